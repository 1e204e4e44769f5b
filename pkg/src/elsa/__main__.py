import sys

from elsa.cli import main

sys.exit(main())

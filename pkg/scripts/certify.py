"""Sample random configurations and check that every Xi log-sum is <= 0."""
import argparse
import json
import sys
from pathlib import Path

from elsa import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out" / "certify"))
    ap.add_argument("--seed", default=None)
    args = ap.parse_args()
    argv = ["certify-theorem", "--config", str(ROOT / "configs" / "certify_defaults.json"), "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", args.seed]
    code = cli.main(argv)
    s = json.loads((Path(args.out) / "certify_summary.json").read_text())
    print(json.dumps({k: v for k, v in s.items() if k != "config"}, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())

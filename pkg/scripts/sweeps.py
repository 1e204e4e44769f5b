"""Attack-mean, noise-variance and anchor-count sweeps with uniform targets.

Writes sweeps.csv next to the usual campaign outputs and prints it.
"""
import argparse
import sys
from pathlib import Path

from elsa import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out" / "sweeps"))
    ap.add_argument("--config", default=str(ROOT / "configs" / "sweeps_uniform.json"))
    args = ap.parse_args()
    code = cli.main(["run", "--config", args.config, "--out", args.out, "--threads", "auto"])
    if code == 0:
        print((Path(args.out) / "sweeps.csv").read_text(), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())

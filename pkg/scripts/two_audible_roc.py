"""ROC of ELSA vs the conventional GLRT with targets in the 2-audible zone.

    python3 scripts/two_audible_roc.py [--out DIR] [--seed N]
"""
import argparse
import json
import sys
from pathlib import Path

from elsa import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out" / "two_audible"))
    ap.add_argument("--seed", default=None)
    args = ap.parse_args()
    argv = ["run", "--config", str(ROOT / "configs" / "two_audible_zone.json"), "--out", args.out, "--threads", "auto"]
    if args.seed is not None:
        argv += ["--seed", args.seed]
    code = cli.main(argv)
    if code:
        return code
    s = json.loads((Path(args.out) / "summary.json").read_text())
    for name, row in s["roc"].items():
        print(f"{name:26s} auc={row['auc']:.4f} pd@0.02={row['pd_at_pf_0.02']:.3f} pd@0.05={row['pd_at_pf_0.05']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Full MovieLens-100K experiment: split, score, rerank, evaluate, sweep, trace.

    python3 scripts/run_ml100k.py [--config configs/ml100k.ini]

Outputs land in the config's output directory (out/ml100k by default).
"""
import argparse
import sys
from pathlib import Path

from fetch_ml100k import fetch

from stablerank.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "ml100k.ini"))
    args = ap.parse_args(argv)
    fetch()
    for cmd in ("split", "score", "rerank", "evaluate", "sweep", "trace"):
        print(f"== {cmd}")
        code = cli([cmd, "--config", args.config])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())

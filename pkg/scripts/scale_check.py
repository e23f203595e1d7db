"""Time and memory of one large untruncated MMDA run.

    python3 scripts/scale_check.py --users 10000 --items 9000 --k 10 --cap 15

Prints one JSON object; peak memory is this process's max resident set size.
"""
import argparse
import json
import resource
import sys
import time

from stablerank.data import CapacityConfig, build_preferences
from stablerank.mmda import run_mmda
from stablerank.synthetic import popularity_scores


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=10_000)
    ap.add_argument("--items", type=int, default=9_000)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--cap", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    scores = popularity_scores(args.users, args.items, args.seed)
    prefs = build_preferences(scores)
    del scores
    t1 = time.perf_counter()
    caps = CapacityConfig.uniform(args.k, args.cap, args.items)
    matching, proposals = run_mmda(prefs, caps)
    t2 = time.perf_counter()
    counts = matching.counts()
    result = {
        "users": args.users,
        "items": args.items,
        "k": args.k,
        "cap": args.cap,
        "proposals": proposals,
        "complete": bool(matching.is_complete(args.k)),
        "max_count": int(counts.max()),
        "items_used": int((counts > 0).sum()),
        "prepare_seconds": round(t1 - t0, 3),
        "mmda_seconds": round(t2 - t1, 3),
        "total_seconds": round(t2 - t0, 3),
        "peak_rss_mb": round(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024, 1),
    }
    json.dump(result, sys.stdout)
    print()


if __name__ == "__main__":
    main()

"""Run every compare config in scripts/configs and summarise the sandwich checks."""

import argparse
import csv
import time
from pathlib import Path

from smalldev import cli

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/compare")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    worst = 0
    for cfg in sorted((HERE / "configs").glob("compare_*.json")):
        out = Path(args.out) / cfg.stem
        t = time.time()
        extra = ["--seed", str(args.seed)] if args.seed is not None else []
        code = cli.main(["compare", "--config", str(cfg), "--out", str(out), "--workers", str(args.workers), *extra])
        worst = max(worst, code)
        rows = []
        if (out / "compare.csv").exists():
            with open(out / "compare.csv") as f:
                next(f)
                rows = list(csv.DictReader(f))
        bad = [r for r in rows if r["violations"]]
        print(f"{cfg.stem:28s} exit={code} points={len(rows):3d} violations={len(bad)} {time.time() - t:6.1f}s")
        for r in bad:
            print(f"    eps={float(r['eps']):.4g}: {r['violations']}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())

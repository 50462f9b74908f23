#!/usr/bin/env python3
"""Per-insert online cost vs from-scratch batch retrain as data accumulates.

Writes time_vs_n.csv under --out with an environment capture in the header.
"""

import argparse

from ogslda.bench import environment_capture, time_scaling, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--learners", type=int, default=100)
    ap.add_argument("--checkpoints", type=int, nargs="+", default=[500, 1000, 2000, 5000])
    ap.add_argument("--repeats", type=int, default=9)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/timing")
    args = ap.parse_args()

    rows = time_scaling(
        learners=args.learners,
        checkpoints=tuple(args.checkpoints),
        repeats=args.repeats,
        seed=args.seed,
    )
    from pathlib import Path

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": args.seed, "learners": args.learners, **environment_capture()}
    write_table(out / "time_vs_n.csv",
                ["n_accumulated", "online_per_insert_s", "batch_retrain_s"], rows, meta)
    for n, online, batch in rows:
        print(f"N={n}: online {online * 1e6:8.1f} us/insert   batch retrain {batch * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()

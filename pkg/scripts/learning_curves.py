#!/usr/bin/env python3
"""Batch-vs-online learning curves on the packaged digit surrogate.

Writes error_curve.csv, error_vs_k.csv, and error_vs_fraction.csv under
--out. Point --train/--test at vector tables to run on real data instead.
"""

import argparse

from ogslda.bench import RunConfig, run_benchmark, write_report
from ogslda.datasets import Dataset, VECTOR_TABLE, load_vector_table
from ogslda.synth import synthetic_digit_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train")
    ap.add_argument("--test")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--out", default="out/learning-curves")
    args = ap.parse_args()

    if args.train and args.test:
        train = load_vector_table(args.train)
        test = load_vector_table(args.test)
    else:
        train_v, train_l, test_v, test_l = synthetic_digit_pair()
        train = Dataset(train_v, train_l, VECTOR_TABLE)
        test = Dataset(test_v, test_l, VECTOR_TABLE)

    config = RunConfig(
        learners=25,
        learner_grid=(5, 10, 50, 100),
        initial_frac=0.3,
        fractions=(0.5, 0.7),
        repeats=args.repeats,
        seed=args.seed,
        eval_every=25,
    )
    report = run_benchmark(config, train, test)
    for path in write_report(report, args.out):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()

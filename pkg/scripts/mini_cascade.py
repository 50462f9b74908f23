#!/usr/bin/env python3
"""Train a small cascade on synthetic patches and update it online.

The initial positive pool is a deliberately narrow slice of the positive
appearance distribution; streaming held-out positives into the trained
cascade then measurably lifts test detection at a fixed false-positive
budget. Writes stages.csv, roc_before.csv, and roc_after.csv under --out.
"""

import argparse
from pathlib import Path

import numpy as np

from ogslda.bench import write_table
from ogslda.cascade import CascadeConfig, classify_patches, online_update_cascade, roc_curve, train_cascade
from ogslda.haar import enumerate_haar_features
from ogslda.online import POSITIVE
from ogslda.serialize import serialize_model
from ogslda.synth import synthetic_patch_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--stages", type=int, default=3)
    ap.add_argument("--updates", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default="out/mini-cascade")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    narrow = dict(band_depth=(32.0, 50.0), band_jitter=1, bar_lift=(14.0, 28.0))
    pos, neg = synthetic_patch_dataset(seed=args.seed, n_pos=500, n_neg=5000, **narrow)
    extra_pos, _ = synthetic_patch_dataset(seed=args.seed + 7, n_pos=args.updates, n_neg=1)
    test_pos, test_neg = synthetic_patch_dataset(seed=args.seed + 53, n_pos=300, n_neg=2000)
    test_patches = np.concatenate([test_pos, test_neg])
    test_labels = np.zeros(test_patches.shape[0], dtype=bool)
    test_labels[: test_pos.shape[0]] = True

    features = enumerate_haar_features(position_stride=6, size_stride=3)
    cascade = train_cascade(pos, neg, args.stages, features,
                            CascadeConfig(negatives_per_stage=1000))
    rows = [
        (i + 1, len(s.features), s.train_detection_rate, s.train_fp_rate)
        for i, s in enumerate(cascade.stages)
    ]
    write_table(out / "stages.csv", ["stage", "learners", "detection", "fp_rate"], rows,
                {"seed": args.seed})

    before = roc_curve(cascade, test_patches, test_labels)
    accepted, _ = classify_patches(cascade, test_patches)
    print(f"before update: test detection {accepted[test_labels].mean():.4f} "
          f"at {int(accepted[~test_labels].sum())} false positives")
    write_table(out / "roc_before.csv", ["false_positives", "detection_rate"], before,
                {"seed": args.seed})

    for patch in extra_pos:
        online_update_cascade(cascade, patch, POSITIVE)
    after = roc_curve(cascade, test_patches, test_labels)
    accepted, _ = classify_patches(cascade, test_patches)
    print(f"after {args.updates} positive inserts: test detection "
          f"{accepted[test_labels].mean():.4f} at {int(accepted[~test_labels].sum())} false positives")
    write_table(out / "roc_after.csv", ["false_positives", "detection_rate"], after,
                {"seed": args.seed, "updates": args.updates})
    serialize_model(cascade, out / "cascade.json")
    print(f"wrote tables and cascade.json under {out}")


if __name__ == "__main__":
    main()

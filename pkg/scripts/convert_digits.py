#!/usr/bin/env python3
"""Convert the classic handwritten-digit text layout to vector tables.

Input rows are a digit label followed by 256 grayscale values in [-1, 1]
(intensities are rescaled to [0, 1] by (v + 1) / 2). Only the two requested
digits are kept; the first becomes the positive class.
"""

import argparse

from ogslda.datasets import convert_digit_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("src", help="digit text file (e.g. the zip-code train split)")
    ap.add_argument("out", help="output vector table path")
    ap.add_argument("--positive", type=int, default=3)
    ap.add_argument("--negative", type=int, default=5)
    args = ap.parse_args()
    n = convert_digit_text(args.src, args.out, args.positive, args.negative)
    print(f"wrote {n} rows ({args.positive} vs {args.negative}) to {args.out}")


if __name__ == "__main__":
    main()

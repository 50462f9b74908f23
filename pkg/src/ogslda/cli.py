"""Command-line interface.

Subcommands map one-to-one onto the experiments this package supports:
``train-batch``, ``train-online``, ``train-cascade``, ``update``, ``detect``,
``eval-roc``, and ``bench``. Every subcommand accepts ``--config FILE`` (a
JSON object of option names) with explicit flags taking precedence.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import RunConfig, run_benchmark, write_report, write_table
from .cascade import (
    CascadeConfig,
    merge_detections,
    online_update_cascade,
    roc_curve,
    scan_image,
    train_cascade,
)
from .datasets import IMAGE_DIRECTORY, VECTOR_TABLE, load_dataset, split_stream
from .errors import DataError, NumericalError
from .gslda import DEFAULT_RIDGE
from .haar import DEFAULT_POSITION_STRIDE, DEFAULT_SIZE_STRIDE, enumerate_haar_features
from .online import CRITERIA, EQUAL_DENSITY, NEGATIVE, POSITIVE, OnlineClassifier, online_insert
from .serialize import deserialize_model, serialize_model
from .synth import synthetic_digit_pair, synthetic_patch_dataset

log = logging.getLogger("ogslda.cli")


class Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_criterion(text: str):
    """'target-detect:p' carries the miss rate; other tags stand alone."""
    if text.startswith("target-detect:"):
        return "target-detect", float(text.split(":", 1)[1])
    if text == "target-detect":
        return text, 0.01
    if text in CRITERIA:
        return text, 0.01
    raise argparse.ArgumentTypeError(
        f"unknown criterion {text!r}; expected one of "
        "equal-density, target-detect:p, neg-mean, asym-min, fisher"
    )


def _dataset_from_args(args, attr="data"):
    path = getattr(args, attr)
    if path is None:
        raise DataError(f"--{attr.replace('_', '-')} is required")
    return load_dataset(path, args.format)


def _synthetic_vectors():
    from .datasets import Dataset

    train_v, train_l, test_v, test_l = synthetic_digit_pair()
    train = Dataset(train_v, train_l, VECTOR_TABLE, {"source": "synthetic"})
    test = Dataset(test_v, test_l, VECTOR_TABLE, {"source": "synthetic"})
    return train, test


def cmd_train_batch(args) -> int:
    from .bench import train_batch_classifier

    if args.synthetic:
        train, test = _synthetic_vectors()
    else:
        train = _dataset_from_args(args)
        test = load_dataset(args.test, args.format) if args.test else None
    cfg = RunConfig(criterion=args.criterion[0], miss_rate=args.criterion[1],
                    ridge=args.ridge, seed=args.seed)
    clf = train_batch_classifier(train.samples, train.labels, args.learners, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_model(clf, out / "model.json")
    rows = [("train", _model_error(clf, train))]
    if test is not None:
        rows.append(("test", _model_error(clf, test)))
    write_table(out / "errors.csv", ["split", "error"], rows,
                {"seed": args.seed, "learners": args.learners})
    print(f"saved {out / 'model.json'} ({args.learners} learners)")
    return 0


def _model_error(clf: OnlineClassifier, dataset) -> float:
    from .bench import test_error_from_responses
    from .online import project_rows

    responses = project_rows(clf.stumps, dataset.samples)
    return test_error_from_responses(clf, responses, dataset.labels)


def cmd_train_online(args) -> int:
    from .bench import train_batch_classifier

    if args.synthetic:
        train, test = _synthetic_vectors()
    else:
        train = _dataset_from_args(args)
        test = load_dataset(args.test, args.format) if args.test else None
    initial, stream = split_stream(train, args.initial_frac, args.seed)
    cfg = RunConfig(criterion=args.criterion[0], miss_rate=args.criterion[1],
                    ridge=args.ridge, seed=args.seed)
    clf = train_batch_classifier(initial.samples, initial.labels, args.learners, cfg)
    for values, label in zip(stream.samples, stream.labels):
        online_insert(clf, values, POSITIVE if label else NEGATIVE)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_model(clf, out / "model.json")
    rows = [("initial_n", initial.n), ("streamed_n", stream.n)]
    if test is not None:
        rows.append(("test_error", _model_error(clf, test)))
    write_table(out / "summary.csv", ["key", "value"], rows,
                {"seed": args.seed, "learners": args.learners})
    print(f"saved {out / 'model.json'} after {stream.n} online inserts")
    return 0


def cmd_train_cascade(args) -> int:
    # Image directories are loaded as single-class sets, so point --pos and
    # --neg at directories that themselves contain pos/ and neg/ subtrees,
    # or use --synthetic.
    if args.synthetic:
        pos, neg = synthetic_patch_dataset()
    else:
        if not args.pos or not args.neg:
            raise DataError("--pos and --neg directories (or --synthetic) are required")
        pos = _flat_image_dir(args.pos)
        neg = _flat_image_dir(args.neg)
    config = CascadeConfig(
        max_learners=args.max_learners,
        negatives_per_stage=args.negatives_per_stage,
        scale_factor=args.scale_factor,
        step=args.step,
        ridge=args.ridge,
    )
    features = enumerate_haar_features(
        position_stride=args.position_stride, size_stride=args.size_stride
    )
    cascade = train_cascade(pos, neg, args.stages, features, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_model(cascade, out / "cascade.json")
    rows = [
        (i + 1, len(s.features), s.train_detection_rate, s.train_fp_rate)
        for i, s in enumerate(cascade.stages)
    ]
    write_table(out / "stages.csv", ["stage", "learners", "detection", "fp_rate"], rows,
                {"stages": len(cascade.stages)})
    print(f"saved {out / 'cascade.json'} with {len(cascade.stages)} stages")
    return 0


def _flat_image_dir(path):
    """Directory of grayscale images, no class subtrees."""
    from PIL import Image

    from .errors import ParseError
    from .haar import BASE_WINDOW

    folder = Path(path)
    patches = []
    for item in sorted(folder.iterdir()):
        if not item.is_file():
            continue
        try:
            with Image.open(item) as img:
                gray = img.convert("L")
                if gray.size != (BASE_WINDOW, BASE_WINDOW):
                    gray = gray.resize((BASE_WINDOW, BASE_WINDOW), Image.NEAREST)
                patches.append(np.asarray(gray, dtype=np.uint8))
        except OSError as exc:
            raise ParseError(f"{item}: {exc}") from None
    if not patches:
        raise ParseError(f"{path}: no images found")
    return np.stack(patches)


def cmd_update(args) -> int:
    model = deserialize_model(args.model)
    data = load_dataset(args.data, args.format)
    inserted = 0
    if isinstance(model, OnlineClassifier):
        for values, label in zip(data.samples, data.labels):
            online_insert(model, values, POSITIVE if label else NEGATIVE)
            inserted += 1
    else:
        for patch, label in zip(data.samples, data.labels):
            online_update_cascade(model, patch, POSITIVE if label else NEGATIVE)
            inserted += 1
    serialize_model(model, args.out)
    print(f"updated with {inserted} samples -> {args.out}")
    return 0


def cmd_detect(args) -> int:
    from PIL import Image

    cascade = deserialize_model(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for image_path in args.images:
        with Image.open(image_path) as img:
            image = np.asarray(img.convert("L"), dtype=np.uint8)
        raw = scan_image(cascade, image, scale_factor=args.scale_factor, step=args.step)
        if args.top1:
            dets = [max(raw, key=lambda d: d.score)] if raw else []
        else:
            dets = merge_detections(raw, min_neighbors=args.min_neighbors)
        name = Path(image_path).name
        rows.extend((name, d.x, d.y, d.width, d.height, d.score) for d in dets)
    write_table(out / "detections.csv", ["image", "x", "y", "w", "h", "score"], rows,
                {"model": Path(args.model).name, "images": len(args.images)})
    print(f"wrote {len(rows)} detections to {out / 'detections.csv'}")
    return 0


def cmd_eval_roc(args) -> int:
    cascade = deserialize_model(args.model)
    data = load_dataset(args.data, IMAGE_DIRECTORY)
    points = roc_curve(cascade, data.samples, data.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "roc.csv", ["false_positives", "detection_rate"], points,
                {"model": Path(args.model).name, "windows": data.n})
    print(f"wrote {len(points)} operating points to {out / 'roc.csv'}")
    return 0


def cmd_bench(args) -> int:
    config = RunConfig(
        mode=args.mode,
        learners=args.learners,
        initial_frac=args.initial_frac,
        criterion=args.criterion[0],
        miss_rate=args.criterion[1],
        seed=args.seed,
        repeats=args.repeats,
        eval_every=args.eval_every,
        learner_grid=tuple(args.learner_grid or ()),
        fractions=tuple(args.fractions or ()),
        ridge=args.ridge,
        timing=args.timing,
    )
    if args.synthetic:
        train, test = _synthetic_vectors()
    else:
        train = _dataset_from_args(args)
        if not args.test:
            raise DataError("--test is required with --data")
        test = load_dataset(args.test, args.format)
    report = run_benchmark(config, train, test)
    written = write_report(report, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def _add_common(p, *, data=True):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    if data:
        p.add_argument("--data", help="dataset path")
        p.add_argument("--test", help="held-out dataset path")
        p.add_argument("--format", choices=[VECTOR_TABLE, IMAGE_DIRECTORY],
                       default=VECTOR_TABLE)
        p.add_argument("--synthetic", action="store_true",
                       help="use the packaged synthetic dataset")


def build_parser() -> Parser:
    parser = Parser(prog="ogslda", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-batch", help="offline training")
    _add_common(p)
    p.add_argument("--learners", type=int, default=25)
    p.add_argument("--criterion", type=parse_criterion, default=("fisher", 0.01))
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.set_defaults(func=cmd_train_batch)

    p = sub.add_parser("train-online", help="offline phase plus streamed inserts")
    _add_common(p)
    p.add_argument("--learners", type=int, default=25)
    p.add_argument("--initial-frac", type=float, default=0.3)
    p.add_argument("--criterion", type=parse_criterion, default=(EQUAL_DENSITY, 0.01))
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.set_defaults(func=cmd_train_online)

    p = sub.add_parser("train-cascade", help="multi-stage detector training")
    _add_common(p, data=False)
    p.add_argument("--pos", help="directory of positive patches")
    p.add_argument("--neg", help="directory of negative patches")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--max-learners", type=int, default=200)
    p.add_argument("--negatives-per-stage", type=int, default=1000)
    p.add_argument("--position-stride", type=int, default=DEFAULT_POSITION_STRIDE,
                   help="feature-pool position subsampling (1 = every pixel)")
    p.add_argument("--size-stride", type=int, default=DEFAULT_SIZE_STRIDE,
                   help="feature-pool size subsampling")
    p.add_argument("--scale-factor", type=float, default=1.2)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.set_defaults(func=cmd_train_cascade)

    p = sub.add_parser("update", help="stream a dataset into a saved model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_update, out="updated.json")

    p = sub.add_parser("detect", help="sliding-window detection on images")
    _add_common(p, data=False)
    p.add_argument("--model", required=True)
    p.add_argument("images", nargs="+")
    p.add_argument("--scale-factor", type=float, default=1.2)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--min-neighbors", type=int, default=2)
    p.add_argument("--top1", action="store_true",
                   help="emit only the highest-scoring window per image")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval-roc", help="ROC table over labeled windows")
    _add_common(p, data=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="image directory with pos/ and neg/")
    p.set_defaults(func=cmd_eval_roc)

    p = sub.add_parser("bench", help="batch-vs-online benchmark tables")
    _add_common(p)
    p.add_argument("--mode", choices=["batch", "online"], default="online")
    p.add_argument("--learners", type=int, default=25)
    p.add_argument("--initial-frac", type=float, default=0.3)
    p.add_argument("--criterion", type=parse_criterion, default=(EQUAL_DENSITY, 0.01))
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--eval-every", type=int, default=25)
    p.add_argument("--learner-grid", type=int, nargs="*")
    p.add_argument("--fractions", type=float, nargs="*")
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _apply_config_file(parser: Parser, argv):
    """Config-file values sit between built-in defaults and explicit flags."""
    probe = Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config, "r", encoding="utf-8") as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{known.config}: {exc}") from None
        if not isinstance(defaults, dict):
            raise DataError(f"{known.config}: config must be a JSON object")
        for action in parser._subparsers._group_actions:
            for sub in action.choices.values():
                sub.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if isinstance(getattr(args, "criterion", None), str):
            args.criterion = parse_criterion(args.criterion)
        return args.func(args)
    except DataError as exc:
        print(f"ogslda: data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"ogslda: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ogslda: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

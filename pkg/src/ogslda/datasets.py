"""Dataset ingestion: delimited vector tables and labeled image directories.

The vector-table format is plain delimited text (comma or whitespace), one
sample per row, features first and the class label last (positive iff the
label is > 0). Image datasets live in two subdirectories, ``pos/`` and
``neg/``, of 8-bit grayscale rasters; they are rescaled to the detector base
window on load. A converter ingests the classic handwritten-digit text
layout (digit label followed by 256 intensities in [-1, 1]).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError
from .haar import BASE_WINDOW

VECTOR_TABLE = "vector-table"
IMAGE_DIRECTORY = "image-directory"


@dataclass
class Dataset:
    samples: np.ndarray  # (N, d) float64 vectors or (N, s, s) uint8 images
    labels: np.ndarray   # (N,) bool, True = positive
    kind: str = VECTOR_TABLE
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.samples[idx], self.labels[idx], self.kind, dict(self.meta))


def _parse_row(line: str):
    parts = line.split(",") if "," in line else line.split()
    return [p.strip() for p in parts if p.strip()]


def load_vector_table(path) -> Dataset:
    path = Path(path)
    rows = []
    labels = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = _parse_row(line)
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if len(values) < 2:
                raise ParseError(f"{path}:{lineno}: need at least one feature and a label")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    f"{path}:{lineno}: row has {len(values)} columns, expected {width}"
                )
            rows.append(values[:-1])
            labels.append(values[-1] > 0)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(
        samples=np.array(rows, dtype=float),
        labels=np.array(labels, dtype=bool),
        kind=VECTOR_TABLE,
        meta={"source": str(path), "dim": width - 1},
    )


def save_vector_table(dataset: Dataset, path) -> None:
    """Writer for the delimited format; floats keep full round-trip precision."""
    if dataset.kind != VECTOR_TABLE:
        raise ValueError("only vector datasets can be written as tables")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row, label in zip(dataset.samples, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append("1" if label else "-1")
            fh.write(",".join(cells) + "\n")


def load_image_directory(path, window: int = BASE_WINDOW) -> Dataset:
    from PIL import Image

    path = Path(path)
    patches = []
    labels = []
    for sub, positive in (("pos", True), ("neg", False)):
        folder = path / sub
        if not folder.is_dir():
            raise ParseError(f"{path}: missing '{sub}' subdirectory")
        for item in sorted(folder.iterdir()):
            if not item.is_file():
                continue
            try:
                with Image.open(item) as img:
                    gray = img.convert("L")
                    if gray.size != (window, window):
                        gray = gray.resize((window, window), Image.NEAREST)
                    patches.append(np.asarray(gray, dtype=np.uint8))
            except OSError as exc:
                raise ParseError(f"{item}: {exc}") from None
            labels.append(positive)
    if not patches:
        raise ParseError(f"{path}: no images found under pos/ or neg/")
    return Dataset(
        samples=np.stack(patches),
        labels=np.array(labels, dtype=bool),
        kind=IMAGE_DIRECTORY,
        meta={"source": str(path), "window": window},
    )


def load_dataset(path, format: str = VECTOR_TABLE, window: int = BASE_WINDOW) -> Dataset:
    if format == VECTOR_TABLE:
        return load_vector_table(path)
    if format == IMAGE_DIRECTORY:
        return load_image_directory(path, window)
    raise ValueError(f"unknown dataset format {format!r}")


def split_stream(dataset: Dataset, initial_fraction: float, seed: int):
    """Seeded shuffle into an initial batch set and an ordered stream.

    The split uses floor(fraction * N) initial samples; the remaining
    samples keep their shuffled order as the stream. Both parts together are
    exactly the original multiset.
    """
    if not (0.0 < initial_fraction < 1.0):
        raise ValueError(f"initial fraction must lie strictly in (0, 1), got {initial_fraction}")
    n = dataset.n
    n_init = int(initial_fraction * n)
    if n_init < 1 or n_init >= n:
        raise ValueError(f"fraction {initial_fraction} leaves no usable split of {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(perm[:n_init]), dataset.subset(perm[n_init:])


def convert_digit_text(src, out, positive_digit: int = 3, negative_digit: int = 5) -> int:
    """Convert the classic digit text layout to a vector table.

    Input rows are a digit label followed by 256 grayscale values in
    [-1, 1]; intensities are rescaled to [0, 1] via (v + 1) / 2. Rows for
    other digits are dropped. Returns the number of rows written.
    """
    src = Path(src)
    written = 0
    with src.open("r", encoding="utf-8") as fh, Path(out).open(
        "w", encoding="utf-8", newline="\n"
    ) as dst:
        for lineno, line in enumerate(fh, start=1):
            parts = _parse_row(line.strip())
            if not parts:
                continue
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"{src}:{lineno}: {exc}") from None
            digit = int(round(values[0]))
            if digit not in (positive_digit, negative_digit):
                continue
            if len(values) != 257:
                raise DimensionMismatch(
                    f"{src}:{lineno}: expected 256 features, got {len(values) - 1}"
                )
            feats = [(v + 1.0) / 2.0 for v in values[1:]]
            cells = [repr(v) for v in feats]
            cells.append("1" if digit == positive_digit else "-1")
            dst.write(",".join(cells) + "\n")
            written += 1
    return written

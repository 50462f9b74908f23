"""Packaged synthetic datasets for tests, benchmarks, and demos.

Two generators: a digit-pair surrogate with the same shape as the classic
16x16 handwritten-digit split (406/361 training and 418/355 test samples,
256 raw intensity features), and a 24x24 patch set whose positives carry a
band-plus-bar structure that Haar features pick up against textured noise.
Everything is driven by explicit seeds, so datasets are reproducible.
"""

from __future__ import annotations

import numpy as np

DIGIT_SIDE = 16
PATCH_SIDE = 24


def _smooth_field(rng, side, cells=4, amplitude=1.0):
    """Low-frequency random field: coarse Gaussian grid, bilinear upsample."""
    coarse = rng.standard_normal((cells, cells)) * amplitude
    xs = np.linspace(0, cells - 1, side)
    x0 = np.clip(xs.astype(int), 0, cells - 2)
    fx = xs - x0
    rows = coarse[x0, :] * (1 - fx[:, None]) + coarse[x0 + 1, :] * fx[:, None]
    cols = rows[:, x0] * (1 - fx[None, :]) + rows[:, x0 + 1] * fx[None, :]
    return cols


def synthetic_digit_pair(
    seed: int = 12345,
    n_train=(406, 361),
    n_test=(418, 355),
    contrast: float = 0.5,
    noise: float = 0.9,
    cells: int = 6,
):
    """Two-class 256-feature surrogate with heavily overlapping classes.

    Returns (train_values, train_labels, test_values, test_labels) with
    values in [0, 1], one row per sample, and boolean labels (True =
    positive class). The class templates are smooth fields so that signal is
    spread over many pixels; per-sample illumination jitter and strong pixel
    noise keep single features weak, which is what makes more training data
    genuinely help.
    """
    rng = np.random.default_rng(seed)
    t_pos = _smooth_field(rng, DIGIT_SIDE, cells=cells, amplitude=contrast)
    t_neg = _smooth_field(rng, DIGIT_SIDE, cells=cells, amplitude=contrast)

    def draw(template, n):
        jitter = rng.normal(0.0, 0.08, size=(n, 1, 1))
        pix = rng.normal(0.0, noise, size=(n, DIGIT_SIDE, DIGIT_SIDE))
        imgs = 0.5 + 0.5 * np.tanh(template[None] + jitter + pix)
        return imgs.reshape(n, DIGIT_SIDE * DIGIT_SIDE)

    def split(counts):
        pos = draw(t_pos, counts[0])
        neg = draw(t_neg, counts[1])
        values = np.vstack([pos, neg])
        labels = np.zeros(values.shape[0], dtype=bool)
        labels[: counts[0]] = True
        return values, labels

    train_values, train_labels = split(n_train)
    test_values, test_labels = split(n_test)
    return train_values, train_labels, test_values, test_labels


def _textured_background(rng, n, side):
    base = rng.normal(128.0, 14.0, size=(n, 1, 1))
    grad_x = rng.uniform(-2.0, 2.0, size=(n, 1, 1)) * np.arange(side)[None, None, :]
    grad_y = rng.uniform(-2.0, 2.0, size=(n, 1, 1)) * np.arange(side)[None, :, None]
    noise = rng.normal(0.0, 18.0, size=(n, side, side))
    return base + grad_x + grad_y + noise


def synthetic_patch_dataset(
    seed: int = 2024,
    n_pos: int = 500,
    n_neg: int = 5000,
    side: int = PATCH_SIDE,
    band_depth=(20.0, 50.0),
    band_jitter: int = 3,
    bar_lift=(8.0, 28.0),
):
    """Positive patches with a dark band and bright bar; textured negatives.

    Returns (positives, negatives) as uint8 stacks. Positive structure
    jitters in position and contrast so that no single feature separates the
    classes perfectly. Narrowing ``band_depth``/``band_jitter`` yields a
    biased slice of the positive appearance distribution, which is how the
    online-update experiments model an initial pool that under-represents
    the target class.
    """
    rng = np.random.default_rng(seed)
    positives = _textured_background(rng, n_pos, side)
    for i in range(n_pos):
        top = side // 3 + int(rng.integers(-band_jitter, band_jitter + 1))
        depth = rng.uniform(*band_depth)
        positives[i, top : top + side // 4, :] -= depth
        left = side // 4 + int(rng.integers(-band_jitter, band_jitter + 1))
        lift = rng.uniform(*bar_lift)
        positives[i, :, left : left + side // 6] += lift
    negatives = _textured_background(rng, n_neg, side)
    # Many negatives carry a misplaced faint band or bar, so no single
    # rectangle contrast separates the classes; stages need several
    # learners and keep a moderate false-positive rate.
    banded = rng.random(n_neg) < 0.45
    for i in np.nonzero(banded)[0]:
        top = int(rng.integers(0, side - side // 4))
        negatives[i, top : top + side // 4, :] -= rng.uniform(10.0, 40.0)
    barred = rng.random(n_neg) < 0.25
    for i in np.nonzero(barred)[0]:
        left = int(rng.integers(0, side - side // 6))
        negatives[i, :, left : left + side // 6] += rng.uniform(5.0, 25.0)

    def clip(a):
        return np.clip(a, 0, 255).astype(np.uint8)

    return clip(positives), clip(negatives)

"""Decision stumps over raw feature values, trained by sorted threshold search.

A stump answers 1 iff polarity * (value - threshold) > 0. Training places
candidate thresholds at midpoints between consecutive distinct sorted values
plus one cut below the minimum and one above the maximum, evaluates both
polarities at every cut from prefix weight sums (O(N log N) per feature),
and breaks ties by smallest threshold, then polarity +1.

When every value is identical the search degenerates to the two constant
classifiers; the returned stump has its threshold below the minimum and the
polarity of the better constant prediction.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class StumpLearner:
    feature_id: int
    threshold: float
    polarity: int  # +1 or -1

    def respond(self, values):
        """Binary response, elementwise over arrays and plain for scalars."""
        out = self.polarity * (np.asarray(values, dtype=float) - self.threshold) > 0
        return out.astype(np.uint8) if out.ndim else int(out)


@dataclass
class FeatureTable:
    """Lookup table of weak-learner responses: one row per feature."""

    responses: np.ndarray  # (M, N) uint8 in {0, 1}
    labels: np.ndarray     # (N,) bool, True = positive class

    def __post_init__(self):
        self.responses = np.ascontiguousarray(self.responses, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.responses.ndim != 2 or self.labels.ndim != 1:
            raise DimensionMismatch("responses must be (M, N) and labels (N,)")
        if self.responses.shape[1] != self.labels.shape[0]:
            raise DimensionMismatch(
                f"{self.responses.shape[1]} response columns vs {self.labels.shape[0]} labels"
            )
        if self.responses.size and self.responses.max() > 1:
            raise ValueError("responses must be binary")

    @property
    def n_features(self):
        return self.responses.shape[0]

    @property
    def n_samples(self):
        return self.responses.shape[1]


def train_stump(values, labels, weights=None, feature_id: int = 0):
    """Return (stump, weighted error) minimizing error over all cuts.

    ``labels`` is boolean with True marking the positive class; ``weights``
    defaults to uniform. Requires at least two samples and positive total
    weight.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    n = values.shape[0]
    if labels.shape[0] != n:
        raise DimensionMismatch(f"{n} values vs {labels.shape[0]} labels")
    if n < 2:
        raise ValueError("need at least two samples to place a threshold")
    if weights is None:
        weights = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape[0] != n:
            raise DimensionMismatch("weights length disagrees with samples")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")

    order = np.argsort(values, kind="stable")
    v = values[order]
    wp = np.where(labels[order], weights[order], 0.0)
    wn = np.where(labels[order], 0.0, weights[order])
    prefix_pos = np.concatenate([[0.0], np.cumsum(wp)])
    prefix_neg = np.concatenate([[0.0], np.cumsum(wn)])
    total_pos = prefix_pos[-1]
    total_neg = prefix_neg[-1]

    # Valid cuts: before everything, between distinct neighbours, after everything.
    interior = np.nonzero(v[1:] > v[:-1])[0] + 1
    cuts = np.concatenate([[0], interior, [n]])
    thresholds = np.empty(cuts.shape[0])
    thresholds[0] = v[0] - 1.0
    thresholds[-1] = v[-1] + 1.0
    thresholds[1:-1] = 0.5 * (v[cuts[1:-1] - 1] + v[cuts[1:-1]])

    # polarity +1 predicts 1 for samples at or beyond the cut.
    err_plus = (total_neg - prefix_neg[cuts]) + prefix_pos[cuts]
    err_minus = (total_pos - prefix_pos[cuts]) + prefix_neg[cuts]

    errs = np.concatenate([err_plus, err_minus])
    thrs = np.concatenate([thresholds, thresholds])
    pol_rank = np.concatenate([np.zeros(cuts.shape[0]), np.ones(cuts.shape[0])])
    best = np.lexsort((pol_rank, thrs, errs))[0]
    polarity = 1 if best < cuts.shape[0] else -1
    return StumpLearner(feature_id, float(thrs[best]), polarity), float(errs[best])


def _train_block(args):
    """Vectorized threshold search over a block of feature rows.

    Reproduces the scalar search bitwise: same stable sort, same prefix
    sums, and the same (error, threshold, polarity) tie-breaking.
    """
    values_block, labels, weights, first_id = args
    values_block = np.asarray(values_block, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    m, n = values_block.shape
    if weights is None:
        weights = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")

    order = np.argsort(values_block, axis=1, kind="stable")
    v = np.take_along_axis(values_block, order, axis=1)
    wp_all = np.where(labels, weights, 0.0)
    wn_all = np.where(labels, 0.0, weights)
    prefix_pos = np.zeros((m, n + 1))
    prefix_neg = np.zeros((m, n + 1))
    np.cumsum(wp_all[order], axis=1, out=prefix_pos[:, 1:])
    np.cumsum(wn_all[order], axis=1, out=prefix_neg[:, 1:])
    total_pos = prefix_pos[:, -1:]
    total_neg = prefix_neg[:, -1:]

    valid = np.ones((m, n + 1), dtype=bool)
    valid[:, 1:n] = v[:, 1:] > v[:, :-1]
    thresholds = np.empty((m, n + 1))
    thresholds[:, 0] = v[:, 0] - 1.0
    thresholds[:, n] = v[:, -1] + 1.0
    thresholds[:, 1:n] = 0.5 * (v[:, :-1] + v[:, 1:])

    err_plus = (total_neg - prefix_neg) + prefix_pos
    err_minus = (total_pos - prefix_pos) + prefix_neg
    errs = np.concatenate([err_plus, err_minus], axis=1)
    errs[~np.concatenate([valid, valid], axis=1)] = np.inf
    thrs = np.concatenate([thresholds, thresholds], axis=1)
    # Lexicographic argmin: smallest error, then threshold, then polarity +1
    # (the +1 copies occupy the first n+1 columns).
    best_err = errs.min(axis=1, keepdims=True)
    thr_tied = np.where(errs == best_err, thrs, np.inf)
    best_thr = thr_tied.min(axis=1, keepdims=True)
    winner = np.argmax((errs == best_err) & (thrs == best_thr), axis=1)

    out = []
    for i in range(m):
        col = int(winner[i])
        polarity = 1 if col < n + 1 else -1
        out.append(
            (StumpLearner(first_id + i, float(thrs[i, col]), polarity), float(errs[i, col]))
        )
    return out


def train_all_stumps(values, labels, weights=None, n_workers: int = 1, block: int = 256):
    """Train one stump per row of ``values``; returns (stumps, errors).

    Rows are independent: blocks are trained by a vectorized search (bitwise
    identical to per-row ``train_stump``) and, with ``n_workers > 1``, in
    parallel processes; results are reassembled in feature order either way.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DimensionMismatch("expected a (M, N) value matrix")
    if values.shape[1] < 2:
        raise ValueError("need at least two samples to place thresholds")
    if np.asarray(labels).shape != (values.shape[1],):
        raise DimensionMismatch("one label per value column required")
    m = values.shape[0]
    jobs = [
        (values[a : min(a + block, m)], labels, weights, a) for a in range(0, m, block)
    ]
    if n_workers <= 1 or len(jobs) < 2:
        chunks = map(_train_block, jobs)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(_train_block, jobs))
    pairs = [pair for chunk in chunks for pair in chunk]
    stumps = [p[0] for p in pairs]
    errors = np.array([p[1] for p in pairs])
    return stumps, errors


def build_feature_table(values, labels, stumps) -> FeatureTable:
    """Evaluate every trained stump on every sample (column)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != len(stumps):
        raise DimensionMismatch("one value row per stump required")
    responses = np.empty(values.shape, dtype=np.uint8)
    for i, stump in enumerate(stumps):
        responses[i] = stump.respond(values[i])
    return FeatureTable(responses=responses, labels=labels)

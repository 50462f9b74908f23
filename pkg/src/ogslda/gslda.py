"""Scatter-matrix bookkeeping, the Fisher criterion, and greedy selection.

Scatter matrices follow the unnormalized convention: per-class scatter is
the mean-removed outer-product sum without any 1/N factor, the between-class
matrix is the two-class form (N1 N2 / N) d d' with d = m1 - m2, and the
within-class matrix is sigma1 + sigma2. Keeping the raw sums means online
per-sample updates compose without rescaling.

Within-class inversion is regularized as Sw + ridge * trace(Sw)/T * I, which
covers the common degeneracy of two selected stumps agreeing on every sample
of a class. Tests that compare against raw recomputation pass ``ridge=0`` on
well-conditioned instances.

Greedy forward selection scores each remaining candidate by the maximal
two-class Fisher ratio J = (N1 N2/N) d' Sw^-1 d on the extended set, obtained
from a Schur-complement extension of the current inverse in O(k^2) per
candidate instead of refactoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DegenerateCandidate,
    DimensionMismatch,
    EmptyClass,
    InsufficientRank,
    SingularMatrix,
    SingularScatter,
    ZeroDenominator,
)
from .stumps import FeatureTable

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-6
# Schur complements at or below this are treated as linear dependence.
SCHUR_TOL = 1e-12


@dataclass
class ScatterState:
    """Class counts, means, scatters, and the within-class inverse.

    ``ridge_diag`` records the value actually added to the diagonal of
    sigma1 + sigma2 before producing ``sw_inv``; online updates keep using
    the same value so the tracked inverse stays consistent.
    """

    n1: int
    n2: int
    m1: np.ndarray
    m2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    sb: np.ndarray
    sw_inv: np.ndarray
    ridge_diag: float = 0.0

    @property
    def dim(self) -> int:
        return self.m1.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def sw(self) -> np.ndarray:
        return self.sigma1 + self.sigma2

    def mean_difference(self) -> np.ndarray:
        return self.m1 - self.m2

    def copy(self) -> "ScatterState":
        return ScatterState(
            n1=self.n1,
            n2=self.n2,
            m1=self.m1.copy(),
            m2=self.m2.copy(),
            sigma1=self.sigma1.copy(),
            sigma2=self.sigma2.copy(),
            sb=self.sb.copy(),
            sw_inv=self.sw_inv.copy(),
            ridge_diag=self.ridge_diag,
        )


@dataclass
class LinearModel:
    """Selected feature ids, weight vector, and decision threshold.

    Decision rule: positive iff w @ x > w0. The orientation is normalized so
    the positive class projects higher (w @ m1 > w @ m2).
    """

    selected: list[int]
    w: np.ndarray
    w0: float = 0.0

    def margins(self, x):
        """w @ x - w0 for one response vector or a (T, n) column stack."""
        return np.asarray(x, dtype=float).T @ self.w - self.w0

    def decide(self, x):
        return self.margins(x) > 0


def between_class_scatter(n1: int, n2: int, m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Two-class between-class matrix (N1 N2 / N)(m1-m2)(m1-m2)'."""
    n = n1 + n2
    if n == 0 or n1 == 0 or n2 == 0:
        return np.zeros((m1.shape[0], m1.shape[0]))
    d = m1 - m2
    return (n1 * n2 / n) * np.outer(d, d)


def ridge_value(sw: np.ndarray, ridge: float) -> float:
    """Diagonal load: ridge * trace(Sw)/T, with ridge itself as the floor
    when the trace vanishes (single-sample classes)."""
    if ridge == 0.0:
        return 0.0
    tr = float(np.trace(sw))
    return ridge * tr / sw.shape[0] if tr > 0.0 else ridge

def _invert_sw(sw: np.ndarray, ridge_diag: float) -> np.ndarray:
    try:
        return linalg.mat_inverse(sw + ridge_diag * np.eye(sw.shape[0]))
    except SingularMatrix as exc:
        raise SingularScatter(f"within-class scatter not invertible: {exc}") from exc


def scatter_from_responses(
    responses: np.ndarray, labels: np.ndarray, ridge: float = DEFAULT_RIDGE
) -> ScatterState:
    """Exact batch scatter over a (T, N) response matrix.

    Rows are features, columns samples; ``labels`` marks positive columns.
    """
    x = np.asarray(responses, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if x.ndim != 2 or x.shape[1] != labels.shape[0]:
        raise DimensionMismatch("responses must be (T, N) with one label per column")
    linalg.check_finite(x, "responses")
    pos = labels
    n1 = int(pos.sum())
    n2 = int(labels.shape[0] - n1)
    if n1 == 0 or n2 == 0:
        raise EmptyClass(f"both classes required, got {n1} positive / {n2} negative")
    x1 = x[:, pos]
    x2 = x[:, ~pos]
    m1 = x1.mean(axis=1)
    m2 = x2.mean(axis=1)
    c1 = x1 - m1[:, None]
    c2 = x2 - m2[:, None]
    sigma1 = linalg.symmetrize(c1 @ c1.T)
    sigma2 = linalg.symmetrize(c2 @ c2.T)
    sw = sigma1 + sigma2
    ridge_diag = ridge_value(sw, ridge)
    return ScatterState(
        n1=n1,
        n2=n2,
        m1=m1,
        m2=m2,
        sigma1=sigma1,
        sigma2=sigma2,
        sb=between_class_scatter(n1, n2, m1, m2),
        sw_inv=_invert_sw(sw, ridge_diag),
        ridge_diag=ridge_diag,
    )


def scatter_from_data(
    table: FeatureTable, selected, ridge: float = DEFAULT_RIDGE
) -> ScatterState:
    """Batch scatter over the selected rows of a feature table."""
    selected = list(selected)
    if len(set(selected)) != len(selected):
        raise ValueError("selected feature ids must be distinct")
    return scatter_from_responses(table.responses[selected], table.labels, ridge)


def fisher_criterion(state: ScatterState, w: np.ndarray) -> float:
    """Class-separation ratio (w' Sb w) / (w' Sw w) on the raw scatters."""
    num = linalg.quadratic_form(w, state.sb)
    den = linalg.quadratic_form(w, state.sw())
    if den <= 0.0:
        raise ZeroDenominator(f"w' Sw w = {den:.3e} is not positive")
    return num / den


def lda_direction(state: ScatterState) -> np.ndarray:
    """Direction maximizing the two-class ratio: Sw^-1 (m1 - m2), oriented
    so the positive class projects higher."""
    w = state.sw_inv @ state.mean_difference()
    if float(w @ state.mean_difference()) < 0.0:
        w = -w
    return w


def candidate_score(
    state: ScatterState,
    selected_responses: np.ndarray,
    candidate_responses: np.ndarray,
    labels: np.ndarray,
) -> float:
    """Best J on the selected set extended by one candidate, in O(k^2).

    Extends the stored within-class inverse by the Schur complement of the
    bordered system rather than refactoring. Raises ``DegenerateCandidate``
    when the complement is at or below ``SCHUR_TOL`` (candidate linearly
    dependent on the selected set).
    """
    labels = np.asarray(labels, dtype=bool)
    cand = np.asarray(candidate_responses, dtype=float).reshape(-1)
    n1 = int(labels.sum())
    n2 = int(labels.shape[0] - n1)
    if n1 == 0 or n2 == 0:
        raise EmptyClass("both classes required")
    coef = n1 * n2 / (n1 + n2)
    delta = cand[labels].mean() - cand[~labels].mean()

    def class_stats(mask):
        c = cand[mask] - cand[mask].mean()
        return c

    cc1 = class_stats(labels)
    cc2 = class_stats(~labels)
    c_self = float(cc1 @ cc1 + cc2 @ cc2)

    k = state.dim if selected_responses is not None and len(selected_responses) else 0
    if k == 0:
        if c_self <= SCHUR_TOL:
            raise DegenerateCandidate("candidate has no within-class variance")
        return coef * delta * delta / c_self

    sel = np.asarray(selected_responses, dtype=float)
    if sel.shape != (state.dim, labels.shape[0]):
        raise DimensionMismatch("selected responses must be (k, N)")
    s1 = sel[:, labels] - sel[:, labels].mean(axis=1, keepdims=True)
    s2 = sel[:, ~labels] - sel[:, ~labels].mean(axis=1, keepdims=True)
    b = s1 @ cc1 + s2 @ cc2  # cross within-class scatter with the selected set

    d = state.mean_difference()
    u = state.sw_inv @ d
    base = float(d @ u)
    sb_inv_b = state.sw_inv @ b
    schur = c_self + state.ridge_diag - float(b @ sb_inv_b)
    if schur <= SCHUR_TOL:
        raise DegenerateCandidate(f"Schur complement {schur:.3e} at or below tolerance")
    gain = (delta - float(b @ u)) ** 2 / schur
    return coef * (base + gain)


class GreedySelection:
    """Incremental forward selection over a feature table.

    ``step()`` commits the best-scoring candidate and rebuilds the scatter
    state on the enlarged set; per-round scoring reuses cached cross-scatter
    rows so each candidate costs O(k^2). Scoring across candidates within a
    round is independent (the state is frozen), matching the concurrency
    contract; this implementation evaluates them as one vectorized pass.
    """

    def __init__(self, table: FeatureTable, ridge: float = DEFAULT_RIDGE, chunk: int = 512):
        self.table = table
        self.ridge = ridge
        self.chunk = chunk
        labels = table.labels
        self.pos = labels
        self.n1 = int(labels.sum())
        self.n2 = int(labels.shape[0] - self.n1)
        if self.n1 == 0 or self.n2 == 0:
            raise EmptyClass(f"both classes required, got {self.n1}/{self.n2}")
        self.coef = self.n1 * self.n2 / (self.n1 + self.n2)

        resp = table.responses
        sums1 = resp[:, self.pos].sum(axis=1, dtype=np.int64)
        sums2 = resp[:, ~self.pos].sum(axis=1, dtype=np.int64)
        self.m1_all = sums1 / self.n1
        self.m2_all = sums2 / self.n2
        self.delta_all = self.m1_all - self.m2_all
        # Binary responses: sum of squares equals the sum, so the per-class
        # self-scatter is s_c (1 - s_c / N_c).
        self.c_all = sums1 * (1.0 - self.m1_all) + sums2 * (1.0 - self.m2_all)

        self.selected: list[int] = []
        m = table.n_features
        self._b1 = np.empty((0, m))
        self._b2 = np.empty((0, m))
        self.state: ScatterState | None = None

    def _cross_rows(self, fid: int):
        """Within-class cross-scatter of feature ``fid`` against all features."""
        resp = self.table.responses
        row1 = resp[fid, self.pos].astype(float)
        row2 = resp[fid, ~self.pos].astype(float)
        m = resp.shape[0]
        out1 = np.empty(m)
        out2 = np.empty(m)
        for a in range(0, m, self.chunk):
            b = min(a + self.chunk, m)
            blk = resp[a:b]
            out1[a:b] = blk[:, self.pos].astype(float) @ row1
            out2[a:b] = blk[:, ~self.pos].astype(float) @ row2
        out1 -= self.n1 * self.m1_all * self.m1_all[fid]
        out2 -= self.n2 * self.m2_all * self.m2_all[fid]
        return out1, out2

    def scores(self) -> np.ndarray:
        """J on the extended set for every candidate; -inf marks selected or
        degenerate features."""
        invalid = np.zeros(self.table.n_features, dtype=bool)
        invalid[self.selected] = True
        if not self.selected:
            # The ridge floor keeps perfectly separating features scorable
            # (their raw within-class scatter is zero); with ridge=0 they are
            # degenerate for the Fisher ratio and get skipped.
            schur = self.c_all + self.ridge
            gain = np.where(schur > SCHUR_TOL, self.delta_all**2 / np.where(schur > 0, schur, 1.0), 0.0)
            base = 0.0
        else:
            st = self.state
            b = self._b1 + self._b2
            d = st.mean_difference()
            u = st.sw_inv @ d
            base = float(d @ u)
            q = st.sw_inv @ b
            schur = self.c_all + st.ridge_diag - np.einsum("km,km->m", b, q)
            gain = np.where(
                schur > SCHUR_TOL, (self.delta_all - u @ b) ** 2 / np.where(schur > 0, schur, 1.0), 0.0
            )
        out = self.coef * (base + gain)
        out[invalid | (schur <= SCHUR_TOL)] = -np.inf
        return out

    def step(self) -> int:
        """Commit the argmax-score candidate (ties to the smallest id)."""
        scores = self.scores()
        best = int(np.argmax(scores))
        if not np.isfinite(scores[best]):
            raise InsufficientRank(
                f"no non-degenerate candidate left after {len(self.selected)} picks"
            )
        b1, b2 = self._cross_rows(best)
        self._b1 = np.vstack([self._b1, b1])
        self._b2 = np.vstack([self._b2, b2])
        self.selected.append(best)
        self._rebuild_state()
        return best

    def _rebuild_state(self):
        ids = self.selected
        sigma1 = linalg.symmetrize(self._b1[:, ids])
        sigma2 = linalg.symmetrize(self._b2[:, ids])
        m1 = self.m1_all[ids]
        m2 = self.m2_all[ids]
        sw = sigma1 + sigma2
        ridge_diag = ridge_value(sw, self.ridge)
        self.state = ScatterState(
            n1=self.n1,
            n2=self.n2,
            m1=m1,
            m2=m2,
            sigma1=sigma1,
            sigma2=sigma2,
            sb=between_class_scatter(self.n1, self.n2, m1, m2),
            sw_inv=_invert_sw(sw, ridge_diag),
            ridge_diag=ridge_diag,
        )

    def model(self) -> LinearModel:
        if self.state is None:
            raise InsufficientRank("no features selected yet")
        return LinearModel(selected=list(self.selected), w=lda_direction(self.state))


def fisher_threshold(state: ScatterState, priors: tuple[float, float] | None = None) -> float:
    """Projected-midpoint threshold shifted by the prior log-ratio.

    Expressed on the decision scale "positive iff w @ x > w0" for this
    state's own direction w = Sw^-1 (m1 - m2). The classical shifted-midpoint
    formula is derived for the pooled-covariance direction; since Sw here is
    an unnormalized scatter sum, w is smaller by the pooled factor N - 2 and
    the log-prior shift has to be brought onto the same scale, otherwise it
    swamps the projections entirely. ``priors`` defaults to the empirical
    counts (N1/N, N2/N).
    """
    if priors is None:
        pr1, pr2 = state.n1 / state.n, state.n2 / state.n
    else:
        pr1, pr2 = priors
        if pr1 <= 0 or pr2 <= 0:
            raise ValueError("priors must be positive")
    w = lda_direction(state)
    midpoint = 0.5 * float(w @ (state.m1 + state.m2))
    pooled_dof = max(state.n - 2, 1)
    return midpoint + float(np.log(pr2 / pr1)) / pooled_dof


def greedy_select(
    table: FeatureTable,
    count: int,
    ridge: float = DEFAULT_RIDGE,
    priors: tuple[float, float] | None = None,
) -> tuple[LinearModel, ScatterState]:
    """Select ``count`` features greedily; returns the model and its state.

    The threshold is the projected-midpoint rule with empirical priors
    (online criteria can replace it later); the state is returned so online
    training can continue from the batch phase.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > table.n_features:
        raise InsufficientRank(f"requested {count} of {table.n_features} features")
    sel = GreedySelection(table, ridge=ridge)
    for _ in range(count):
        sel.step()
    model = sel.model()
    model.w0 = fisher_threshold(sel.state, priors)
    return model, sel.state

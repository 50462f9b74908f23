"""Per-sample online updates of the scatter state, weights, and threshold.

One insert runs: project the raw sample through the fixed weak learners,
update the labeled class mean and the between-class matrix, update the class
covariance as a rank-two perturbation, update the within-class inverse with
the fast rank-two formula, recompute the weight vector, and recompute the
threshold for the configured criterion. Every step is O(T^2), independent of
how many samples have accumulated; no samples are stored.

The selected weak learners never change online, and neither do their
parameters: adapting stump thresholds to asymmetric streams measurably hurts,
so adaptation is confined to the weights and the decision threshold.

Inserts stage their work on copies and commit atomically, so a failed insert
leaves the classifier untouched. A classifier is single-writer: serialize
inserts, read-only classification can proceed against a committed snapshot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DegenerateUpdate, DimensionMismatch, DomainError, EmptyClass, ZeroDenominator
from .gslda import LinearModel, ScatterState, between_class_scatter, lda_direction
from .stumps import StumpLearner

log = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 2

EQUAL_DENSITY = "equal-density"
TARGET_DETECT = "target-detect"
NEG_MEAN = "neg-mean"
ASYM_MIN = "asym-min"
FISHER = "fisher"
CRITERIA = (EQUAL_DENSITY, TARGET_DETECT, NEG_MEAN, ASYM_MIN, FISHER)

# How many rank-two updates may pass before the inverse is refreshed from the
# explicitly stored scatters to bound floating-point drift.
DEFAULT_REFRESH_INTERVAL = 10_000


def _check_label(label: int) -> bool:
    if label not in (POSITIVE, NEGATIVE):
        raise ValueError(f"label must be POSITIVE (1) or NEGATIVE (2), got {label!r}")
    return label == POSITIVE


def project_sample(model: LinearModel, stumps, values) -> np.ndarray:
    """Binary response vector [h_1(I), ..., h_T(I)] of the selected learners.

    ``stumps`` is the full learner pool indexed by feature id; ``values`` is
    the raw feature-value vector of the sample.
    """
    values = np.asarray(values, dtype=float)
    x = np.empty(len(model.selected))
    for i, fid in enumerate(model.selected):
        stump = stumps[fid]
        x[i] = stump.respond(values[stump.feature_id])
    return x


def project_rows(selected_stumps, values_rows) -> np.ndarray:
    """Responses of the selected learners over (n, M) value rows, as (T, n)."""
    values_rows = np.asarray(values_rows, dtype=float)
    out = np.empty((len(selected_stumps), values_rows.shape[0]))
    for i, stump in enumerate(selected_stumps):
        out[i] = stump.respond(values_rows[:, stump.feature_id])
    return out


def update_means(state: ScatterState, x: np.ndarray, label: int) -> ScatterState:
    """New state with the labeled class mean moved to m + (x - m)/(N_c + 1).

    The other class is untouched; scatters are carried over unchanged and
    must be updated separately.
    """
    positive = _check_label(label)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != state.dim:
        raise DimensionMismatch(f"sample of dim {x.shape[0]} vs state dim {state.dim}")
    linalg.check_finite(x, "sample")
    new = state.copy()
    if positive:
        new.m1 = state.m1 + (x - state.m1) / (state.n1 + 1)
        new.n1 = state.n1 + 1
    else:
        new.m2 = state.m2 + (x - state.m2) / (state.n2 + 1)
        new.n2 = state.n2 + 1
    return new


def update_sb(state: ScatterState) -> np.ndarray:
    """Two-class between-class matrix from the state's current means."""
    return between_class_scatter(state.n1, state.n2, state.m1, state.m2)


def covariance_update_vectors(state: ScatterState, x, label: int, prev_mean=None):
    """Rank-two vectors (p1, q1, p2, q2) with sigma_new = sigma + p1 q1' + p2 q2'.

    Requires the labeled class mean already updated to its post-insert value;
    ``prev_mean`` is the pre-insert mean and is reconstructed from the updated
    state when not supplied. N_c is the pre-insert count.
    """
    positive = _check_label(label)
    x = np.asarray(x, dtype=float).reshape(-1)
    m_new = state.m1 if positive else state.m2
    n_prev = (state.n1 if positive else state.n2) - 1
    if n_prev < 0:
        raise ValueError("state counts do not reflect the insert")
    if prev_mean is None:
        prev_mean = ((n_prev + 1) * m_new - x) / n_prev if n_prev > 0 else m_new.copy()
    p1 = x - m_new
    shift = m_new - np.asarray(prev_mean, dtype=float)
    return p1, p1.copy(), n_prev * shift, shift


def update_sw_inverse(state: ScatterState, p1, q1, p2, q2) -> np.ndarray:
    """Within-class inverse after the rank-two perturbation, in O(T^2).

    Falls back to a direct inverse of the explicitly stored scatters when the
    update is degenerate, so the state's sigma1/sigma2 must already reflect
    the insert.
    """
    try:
        return linalg.rank_two_inverse_update(state.sw_inv, p1, q1, p2, q2)
    except DegenerateUpdate as exc:
        log.warning("rank-two update degenerate (%s); falling back to direct inverse", exc)
        return refresh_sw_inverse(state)


def refresh_sw_inverse(state: ScatterState) -> np.ndarray:
    """Direct inverse of sigma1 + sigma2 plus the state's ridge diagonal."""
    sw = state.sw() + state.ridge_diag * np.eye(state.dim)
    return linalg.mat_inverse(sw)


def recompute_weights(state: ScatterState) -> np.ndarray:
    """Weight vector Sw^-1 (m1 - m2); the selected feature set never changes."""
    return lda_direction(state)


def projected_stats(state: ScatterState, w):
    """Projected means and standard deviations (mu1, mu2, sd1, sd2).

    The projected variance is w' sigma_c w / (N_c - 1): the stored scatter is
    an unnormalized sum, and the N_c - 1 divisor makes the Gaussian-mass
    postconditions of the threshold rules hold on finite samples.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    mu1 = float(w @ state.m1)
    mu2 = float(w @ state.m2)
    if state.n1 < 2 or state.n2 < 2:
        raise ZeroDenominator("projected variance needs at least two samples per class")
    v1 = linalg.quadratic_form(w, state.sigma1) / (state.n1 - 1)
    v2 = linalg.quadratic_form(w, state.sigma2) / (state.n2 - 1)
    if v1 <= 0.0 or v2 <= 0.0:
        raise ZeroDenominator(f"projected variances must be positive, got {v1:.3e}, {v2:.3e}")
    return mu1, mu2, float(np.sqrt(v1)), float(np.sqrt(v2))


def threshold_equal_density(state: ScatterState, w) -> float:
    """Point between the projected means where the class densities are equal.

    Solves a x^2 + b x + c = 0 with
    a = -1/(2 v1) + 1/(2 v2), b = mu1/v1 - mu2/v2,
    c = mu2^2/(2 v2) - mu1^2/(2 v1) + log(sd2) - log(sd1),
    taking the root strictly between the projected means (in either order);
    equal variances reduce to the linear solution -c/b. When no root falls
    between the means, or a projected variance degenerates to zero (the
    point-mass limit), the midpoint is returned and a warning logged.
    """
    if state.n1 == 0 or state.n2 == 0:
        raise EmptyClass("equal-density threshold needs both classes")
    w = np.asarray(w, dtype=float).reshape(-1)
    mu1 = float(w @ state.m1)
    mu2 = float(w @ state.m2)
    lo, hi = min(mu1, mu2), max(mu1, mu2)
    if lo == hi:
        return lo
    v1 = linalg.quadratic_form(w, state.sigma1) / (state.n1 - 1) if state.n1 > 1 else 0.0
    v2 = linalg.quadratic_form(w, state.sigma2) / (state.n2 - 1) if state.n2 > 1 else 0.0
    if v1 <= 0.0 or v2 <= 0.0:
        log.warning(
            "degenerate projected variance (%.3e, %.3e); using the midpoint", v1, v2
        )
        return 0.5 * (lo + hi)
    sd1, sd2 = float(np.sqrt(v1)), float(np.sqrt(v2))
    a = -0.5 / v1 + 0.5 / v2
    b = mu1 / v1 - mu2 / v2
    c = 0.5 * mu2 * mu2 / v2 - 0.5 * mu1 * mu1 / v1 + np.log(sd2) - np.log(sd1)
    roots = []
    if abs(a) <= 1e-12 * max(1.0 / v1, 1.0 / v2):
        if b != 0.0:
            roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = float(np.sqrt(disc))
            roots = sorted([(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)])
    for r in roots:
        if lo < r < hi:
            return float(r)
    log.warning(
        "no equal-density root between projected means (%.6g, %.6g); using midpoint", lo, hi
    )
    return 0.5 * (lo + hi)


def threshold_target_detection(state: ScatterState, w, miss_rate: float) -> float:
    """mu1 + Phi^-1(p) sd1: leaves mass 1 - p of the positive Gaussian above.

    Only the positive class enters. A zero projected variance (perfectly
    separating learners) degenerates to the point-mass quantile mu1.
    """
    if not (0.0 < miss_rate < 1.0):
        raise DomainError(f"miss rate must lie in (0, 1), got {miss_rate}")
    w = np.asarray(w, dtype=float).reshape(-1)
    if state.n1 < 2:
        raise ZeroDenominator("projected variance needs at least two positive samples")
    mu1 = float(w @ state.m1)
    v1 = max(linalg.quadratic_form(w, state.sigma1) / (state.n1 - 1), 0.0)
    return mu1 + linalg.inverse_normal_cdf(miss_rate) * float(np.sqrt(v1))


def threshold_negative_mean(state: ScatterState, w) -> float:
    """Projected mean of the negative class."""
    if state.n2 == 0:
        raise EmptyClass("negative class is empty")
    return float(np.asarray(w, dtype=float) @ state.m2)


def update_threshold(state, w, criterion: str, miss_rate: float = 0.01) -> float:
    from .gslda import fisher_threshold

    if criterion == EQUAL_DENSITY:
        return threshold_equal_density(state, w)
    if criterion == TARGET_DETECT:
        return threshold_target_detection(state, w, miss_rate)
    if criterion == NEG_MEAN:
        return threshold_negative_mean(state, w)
    if criterion == ASYM_MIN:
        return min(
            threshold_target_detection(state, w, miss_rate),
            threshold_negative_mean(state, w),
        )
    if criterion == FISHER:
        return fisher_threshold(state)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


@dataclass
class OnlineClassifier:
    """A linear model plus the scatter state that keeps it updatable.

    ``stumps`` are the selected weak learners in selection order, each still
    carrying its original feature id into the raw value vector.
    """

    model: LinearModel
    state: ScatterState
    stumps: list[StumpLearner] = field(default_factory=list)
    criterion: str = EQUAL_DENSITY
    miss_rate: float = 0.01
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    insert_count: int = 0
    updates_since_refresh: int = 0

    def project(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        x = np.empty(len(self.stumps))
        for i, stump in enumerate(self.stumps):
            x[i] = stump.respond(values[stump.feature_id])
        return x

    def margin(self, values) -> float:
        return float(self.model.w @ self.project(values)) - self.model.w0

    def margins_of_responses(self, responses) -> np.ndarray:
        """Margins over a (T, n) response stack."""
        return self.model.w @ np.asarray(responses, dtype=float) - self.model.w0


def insert_response_vector(clf: OnlineClassifier, x, label: int) -> OnlineClassifier:
    """Insert an already-projected response vector; the atomic core of an insert."""
    positive = _check_label(label)
    x = np.asarray(x, dtype=float).reshape(-1)
    prev_mean = (clf.state.m1 if positive else clf.state.m2).copy()

    staged = update_means(clf.state, x, label)
    p1, q1, p2, q2 = covariance_update_vectors(staged, x, label, prev_mean=prev_mean)
    bump = linalg.symmetrize(np.outer(p1, q1) + np.outer(p2, q2))
    if positive:
        staged.sigma1 = linalg.symmetrize(staged.sigma1 + bump)
    else:
        staged.sigma2 = linalg.symmetrize(staged.sigma2 + bump)
    staged.sb = update_sb(staged)

    if clf.updates_since_refresh + 1 >= clf.refresh_interval:
        staged.sw_inv = refresh_sw_inverse(staged)
        next_since_refresh = 0
    else:
        staged.sw_inv = update_sw_inverse(staged, p1, q1, p2, q2)
        next_since_refresh = clf.updates_since_refresh + 1

    w = recompute_weights(staged)
    w0 = update_threshold(staged, w, clf.criterion, clf.miss_rate)

    # Commit only after every stage has succeeded.
    clf.state = staged
    clf.model = LinearModel(selected=list(clf.model.selected), w=w, w0=w0)
    clf.insert_count += 1
    clf.updates_since_refresh = next_since_refresh
    return clf


def online_insert(clf: OnlineClassifier, values, label: int) -> OnlineClassifier:
    """Project a raw sample and fold it into the classifier.

    All-or-nothing: any failure leaves the classifier exactly as it was.
    """
    return insert_response_vector(clf, clf.project(values), label)

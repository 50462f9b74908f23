"""Dense symmetric-matrix kernels for the scatter-matrix machinery.

Direct inversion by Gauss-Jordan elimination (initialisation and the oracle
for the fast path), the rank-two inverse update that keeps a within-class
inverse current in O(T^2) per insert, quadratic forms, and an inverse
standard-normal CDF for the detection-rate threshold rule.

All functions are pure and operate on plain ``numpy`` arrays; there is no
shared mutable state, so concurrent callers need no locking. Matrices are
dense; the dimensions in play stay in the low hundreds.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateUpdate, DimensionMismatch, DomainError, SingularMatrix

# Relative tolerance under which a matrix counts as symmetric.
SYMMETRY_RTOL = 1e-10
# Pivot threshold for Gauss-Jordan elimination, relative to the row scale.
PIVOT_RTOL = 1e-12
# Degeneracy threshold for the rank-two update denominators r1, r2.
DEGENERACY_RTOL = 1e-10


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (A + A') / 2; applied after every update to suppress drift."""
    return 0.5 * (a + a.T)


def is_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - a.T)) <= rtol * scale) if a.size else True


def check_finite(a: np.ndarray, name: str = "array") -> None:
    """Reject NaN/Inf before they can enter persistent state."""
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def mat_inverse(a: np.ndarray, *, condition_cap: float = 1e14) -> np.ndarray:
    """Invert a small dense matrix; raise ``SingularMatrix`` when unsafe.

    The LAPACK inverse serves as the fast path and is accepted only when the
    residual max|A X - I| is negligible relative to the operand scales.
    Anything suspicious is re-done by Gauss-Jordan elimination with partial
    pivoting, which raises ``SingularMatrix`` when a pivot falls below
    ``PIVOT_RTOL`` times the scale of its row (the caller's signal to
    regularize). A condition estimate above ``condition_cap`` is rejected on
    either path. Symmetric inputs get a symmetrized result.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {a.shape}")
    check_finite(a, "matrix")
    symmetric_input = is_symmetric(a)

    inv = None
    try:
        cand = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cand = None
    if cand is not None and np.all(np.isfinite(cand)):
        resid = float(np.max(np.abs(a @ cand - np.eye(a.shape[0]))))
        scale = float(np.linalg.norm(a, 1) * np.linalg.norm(cand, 1))
        if resid <= 1e-10 * max(1.0, scale):
            inv = cand
    if inv is None:
        inv = _gauss_jordan_inverse(a)

    cond = float(np.linalg.norm(a, 1) * np.linalg.norm(inv, 1))
    if cond > condition_cap:
        raise SingularMatrix(f"condition estimate {cond:.3e} exceeds cap {condition_cap:.3e}")
    return symmetrize(inv) if symmetric_input else inv


def _gauss_jordan_inverse(a: np.ndarray) -> np.ndarray:
    """Partial-pivoted elimination; the slow path that diagnoses singularity."""
    n = a.shape[0]
    aug = np.hstack([a, np.eye(n)])
    row_scale = np.max(np.abs(a), axis=1)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(aug[k:, k])))
        pivot = aug[piv, k]
        if abs(pivot) <= PIVOT_RTOL * row_scale[piv]:
            raise SingularMatrix(
                f"pivot {pivot:.3e} below threshold in column {k} of a {n}x{n} matrix"
            )
        if piv != k:
            aug[[k, piv]] = aug[[piv, k]]
            row_scale[[k, piv]] = row_scale[[piv, k]]
        aug[k] /= aug[k, k]
        col = aug[:, k].copy()
        col[k] = 0.0
        aug -= np.outer(col, aug[k])
    return aug[:, n:]


def rank_two_inverse_update(
    sinv0: np.ndarray,
    p1: np.ndarray,
    q1: np.ndarray,
    p2: np.ndarray,
    q2: np.ndarray,
) -> np.ndarray:
    """Return (S0 + p1 q1' + p2 q2')^-1 given S0^-1, in O(n^2).

    Two Sherman-Morrison steps folded into one correction::

        inv = S0inv - S0inv U D^-1 V' S0inv

    with U = [p1, p2 - (q1' S0inv p2 / r1) p1],
    V = [q1, q2 - (q2' S0inv p1 / r1) q1], D = diag(r1, r2),
    r1 = 1 + q1' S0inv p1 and r2 = 1 + V[:,1]' S0inv p2.

    Raises ``DegenerateUpdate`` when |r1| or |r2| is too close to zero
    relative to the size of the correction term; callers fall back to a
    direct inverse of the explicitly updated matrix. A result that is
    already symmetric to within tolerance is symmetrized to suppress drift;
    a genuinely asymmetric update (p != q) is returned as computed.
    """
    sinv0 = np.asarray(sinv0, dtype=float)
    n = sinv0.shape[0]
    vecs = [np.asarray(v, dtype=float).reshape(-1) for v in (p1, q1, p2, q2)]
    if sinv0.ndim != 2 or sinv0.shape != (n, n) or any(v.shape != (n,) for v in vecs):
        raise DimensionMismatch("inverse and update vectors disagree in dimension")
    p1, q1, p2, q2 = vecs

    a1 = sinv0 @ p1
    a2 = sinv0 @ p2
    t1 = float(q1 @ a1)
    r1 = 1.0 + t1
    if abs(r1) < DEGENERACY_RTOL * (1.0 + abs(t1)):
        raise DegenerateUpdate(f"r1 = {r1:.3e} too close to zero")
    u2 = p2 - (float(q1 @ a2) / r1) * p1
    v2 = q2 - (float(q2 @ a1) / r1) * q1
    t2 = float(v2 @ a2)
    r2 = 1.0 + t2
    if abs(r2) < DEGENERACY_RTOL * (1.0 + abs(t2)):
        raise DegenerateUpdate(f"r2 = {r2:.3e} too close to zero")

    # Chain order ((S0inv U) D^-1)(V' S0inv) keeps every product O(n^2).
    su = np.column_stack([a1, sinv0 @ u2])
    su[:, 0] /= r1
    su[:, 1] /= r2
    vs = np.vstack([q1 @ sinv0, v2 @ sinv0])
    out = sinv0 - su @ vs
    return symmetrize(out) if is_symmetric(out, rtol=1e-8) else out


def quadratic_form(w: np.ndarray, a: np.ndarray) -> float:
    """Return w' A w."""
    w = np.asarray(w, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape != (w.shape[0], w.shape[0]):
        raise DimensionMismatch(
            f"vector of dim {w.shape[0]} against matrix of shape {a.shape}"
        )
    return float(w @ (a @ w))


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


# Coefficients of the Acklam rational approximation to the inverse normal CDF.
_ICDF_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ICDF_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ICDF_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ICDF_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)
_ICDF_P_LOW = 0.02425


def inverse_normal_cdf(p: float) -> float:
    """Return z with Phi(z) = p, accurate to well under 1e-9 absolute.

    A rational approximation supplies the starting point and a single Halley
    refinement against the erfc-based CDF finishes the job, which keeps this
    module free of special-function dependencies.
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"probability must lie strictly in (0, 1), got {p}")
    a, b, c, d = _ICDF_A, _ICDF_B, _ICDF_C, _ICDF_D
    if p < _ICDF_P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p > 1.0 - _ICDF_P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    # One Halley step against the accurate CDF.
    e = normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)

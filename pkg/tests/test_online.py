import logging
import math

import numpy as np
import pytest

from ogslda.errors import DimensionMismatch, DomainError, EmptyClass, ZeroDenominator
from ogslda.gslda import ScatterState, greedy_select, lda_direction, scatter_from_responses
from ogslda.linalg import mat_inverse
from ogslda.online import (
    ASYM_MIN,
    EQUAL_DENSITY,
    NEGATIVE,
    POSITIVE,
    OnlineClassifier,
    covariance_update_vectors,
    insert_response_vector,
    online_insert,
    project_rows,
    project_sample,
    recompute_weights,
    refresh_sw_inverse,
    threshold_equal_density,
    threshold_negative_mean,
    threshold_target_detection,
    update_means,
    update_sb,
    update_sw_inverse,
)
from ogslda.stumps import StumpLearner, build_feature_table, train_all_stumps


def one_dim_state(mu1, mu2, sd1, sd2, n1=5, n2=5):
    """Dim-1 state with prescribed projected statistics under w = [1]."""
    return ScatterState(
        n1=n1,
        n2=n2,
        m1=np.array([float(mu1)]),
        m2=np.array([float(mu2)]),
        sigma1=np.array([[sd1 * sd1 * (n1 - 1)]]),
        sigma2=np.array([[sd2 * sd2 * (n2 - 1)]]),
        sb=np.zeros((1, 1)),
        sw_inv=np.eye(1),
    )


def stream_setup(seed, m=12, t=5, n_init=80, n_stream=300, criterion=EQUAL_DENSITY):
    """Noisy overlapping classes; batch phase on the first n_init samples."""
    rng = np.random.default_rng(seed)
    n_total = n_init + n_stream
    labels = rng.random(n_total) < 0.5
    labels[:4] = [True, True, False, False]
    shift = rng.uniform(0.4, 1.2, size=m)
    values = rng.standard_normal((n_total, m)) + np.where(labels[:, None], shift, 0.0)
    init_vals, init_labels = values[:n_init], labels[:n_init]
    stumps, _ = train_all_stumps(init_vals.T, init_labels)
    table = build_feature_table(init_vals.T, init_labels, stumps)
    model, state = greedy_select(table, t, ridge=0.0)
    clf = OnlineClassifier(
        model=model,
        state=state,
        stumps=[stumps[i] for i in model.selected],
        criterion=criterion,
    )
    return clf, values, labels, n_init


def batch_oracle(clf, values, labels, upto, ridge=0.0):
    """Scratch recomputation over every sample seen so far."""
    responses = project_rows(clf.stumps, values[:upto])
    return scatter_from_responses(responses, labels[:upto], ridge=ridge)


def run_stream(clf, values, labels, n_init, n_stream):
    for i in range(n_init, n_init + n_stream):
        online_insert(clf, values[i], POSITIVE if labels[i] else NEGATIVE)
    return clf


# --- projection -----------------------------------------------------------


def test_project_all_below_thresholds_is_zero_vector():
    from ogslda.gslda import LinearModel

    stumps = [StumpLearner(0, 5.0, 1), StumpLearner(1, 7.0, 1)]
    model = LinearModel(selected=[0, 1], w=np.ones(2))
    x = project_sample(model, stumps, np.array([1.0, 2.0]))
    np.testing.assert_array_equal(x, [0.0, 0.0])


def test_project_matches_per_stump_and_is_deterministic():
    clf, values, _, _ = stream_setup(0)
    sample = values[10]
    x = clf.project(sample)
    expect = [s.respond(sample[s.feature_id]) for s in clf.stumps]
    np.testing.assert_array_equal(x, expect)
    np.testing.assert_array_equal(x, clf.project(sample))
    rows = project_rows(clf.stumps, values[:3])
    for j in range(3):
        np.testing.assert_array_equal(rows[:, j], clf.project(values[j]))


# --- update_means ---------------------------------------------------------


def base_state(dim=2):
    return ScatterState(
        n1=1,
        n2=1,
        m1=np.ones(dim),
        m2=np.zeros(dim),
        sigma1=np.zeros((dim, dim)),
        sigma2=np.zeros((dim, dim)),
        sb=np.zeros((dim, dim)),
        sw_inv=np.eye(dim),
    )


def test_mean_update_fixed_point():
    st = base_state()
    new = update_means(st, st.m1, POSITIVE)
    np.testing.assert_array_equal(new.m1, st.m1)
    assert new.n1 == 2


def test_mean_update_hand_case():
    st = base_state()
    new = update_means(st, np.array([3.0, 3.0]), POSITIVE)
    np.testing.assert_array_equal(new.m1, [2.0, 2.0])


def test_mean_update_isolation():
    st = base_state()
    new = update_means(st, np.array([5.0, -1.0]), NEGATIVE)
    assert new.m1 is not st.m1
    np.testing.assert_array_equal(new.m1, st.m1)
    assert new.n1 == st.n1 and new.n2 == st.n2 + 1


# --- update_sb ------------------------------------------------------------


def test_sb_zero_when_means_coincide():
    st = base_state()
    st.m2 = st.m1.copy()
    np.testing.assert_array_equal(update_sb(st), np.zeros((2, 2)))


def test_sb_rank_at_most_one():
    clf, values, labels, n_init = stream_setup(1, n_stream=30)
    run_stream(clf, values, labels, n_init, 30)
    assert np.linalg.matrix_rank(clf.state.sb, tol=1e-9) <= 1


def test_sb_matches_batch_recompute():
    clf, values, labels, n_init = stream_setup(2, n_stream=50)
    run_stream(clf, values, labels, n_init, 50)
    oracle = batch_oracle(clf, values, labels, n_init + 50)
    np.testing.assert_allclose(clf.state.sb, oracle.sb, rtol=1e-9, atol=1e-12)


# --- covariance_update_vectors ---------------------------------------------


def test_covariance_vectors_first_sample_gives_zero_scatter():
    st = base_state()
    st.n1, st.m1 = 0, np.zeros(2)  # class empty, mean at the zero convention
    x = np.array([2.0, -1.0])
    staged = update_means(st, x, POSITIVE)
    p1, q1, p2, q2 = covariance_update_vectors(staged, x, POSITIVE)
    np.testing.assert_array_equal(p1, 0.0)
    np.testing.assert_array_equal(p2, 0.0)


def test_covariance_vectors_inserting_the_mean():
    clf, values, labels, n_init = stream_setup(3, n_stream=0)
    st = clf.state
    x = st.m1.copy()
    staged = update_means(st, x, POSITIVE)
    p1, q1, p2, q2 = covariance_update_vectors(staged, x, POSITIVE, prev_mean=st.m1)
    np.testing.assert_allclose(p1, 0.0, atol=1e-15)
    np.testing.assert_allclose(p2, 0.0, atol=1e-12)  # mean shift vanishes


def test_covariance_stream_matches_batch_sums():
    clf, values, labels, n_init = stream_setup(4, n_stream=200)
    run_stream(clf, values, labels, n_init, 200)
    oracle = batch_oracle(clf, values, labels, n_init + 200)
    for got, expect in ((clf.state.sigma1, oracle.sigma1), (clf.state.sigma2, oracle.sigma2)):
        err = np.linalg.norm(got - expect) / np.linalg.norm(expect)
        assert err <= 1e-9


def test_covariance_vectors_reconstruct_prev_mean():
    clf, *_ = stream_setup(5, n_stream=0)
    st = clf.state
    x = np.ones(st.dim)
    staged = update_means(st, x, NEGATIVE)
    explicit = covariance_update_vectors(staged, x, NEGATIVE, prev_mean=st.m2)
    derived = covariance_update_vectors(staged, x, NEGATIVE)
    for a, b in zip(explicit, derived):
        np.testing.assert_allclose(a, b, atol=1e-10)


# --- update_sw_inverse ------------------------------------------------------


def test_sw_inverse_zero_perturbation_unchanged():
    clf, *_ = stream_setup(6, n_stream=0)
    z = np.zeros(clf.state.dim)
    np.testing.assert_array_equal(update_sw_inverse(clf.state, z, z, z, z), clf.state.sw_inv)


def test_sw_inverse_hand_case_identity_bump():
    st = base_state(3)
    st.sw_inv = np.eye(3)
    e1 = np.array([1.0, 0.0, 0.0])
    z = np.zeros(3)
    got = update_sw_inverse(st, e1, e1, z, z)
    np.testing.assert_allclose(got, np.diag([0.5, 1.0, 1.0]), atol=1e-15)


def test_sw_inverse_long_stream_matches_direct_inverse():
    clf, values, labels, n_init = stream_setup(7, t=4, n_stream=500)
    run_stream(clf, values, labels, n_init, 500)
    expect = mat_inverse(clf.state.sw())
    err = np.linalg.norm(clf.state.sw_inv - expect) / np.linalg.norm(expect)
    assert err <= 1e-7


def test_sw_inverse_degenerate_falls_back_to_direct():
    clf, *_ = stream_setup(8, n_stream=0)
    st = clf.state
    p = np.zeros(st.dim)
    p[0] = 1.0
    # q = -p against sw_inv[0,0] scaling drives r1 to zero exactly.
    q = -p / st.sw_inv[0, 0]
    got = update_sw_inverse(st, p, q, np.zeros(st.dim), np.zeros(st.dim))
    np.testing.assert_allclose(got, refresh_sw_inverse(st), atol=1e-12)


# --- recompute_weights ------------------------------------------------------


def test_weights_noop_stream_is_batch_direction():
    clf, *_ = stream_setup(9, n_stream=0)
    np.testing.assert_array_equal(recompute_weights(clf.state), lda_direction(clf.state))


def test_weights_stream_matches_batch():
    clf, values, labels, n_init = stream_setup(10, n_stream=100)
    run_stream(clf, values, labels, n_init, 100)
    oracle = batch_oracle(clf, values, labels, n_init + 100)
    w_batch = lda_direction(oracle)
    err = np.linalg.norm(clf.model.w - w_batch) / np.linalg.norm(w_batch)
    assert err <= 1e-7


def test_weights_duplicate_initial_set_keeps_direction():
    clf, values, labels, n_init = stream_setup(11, n_stream=0)
    w_before = clf.model.w.copy()
    responses = project_rows(clf.stumps, values[:n_init])
    for j in range(n_init):
        insert_response_vector(clf, responses[:, j], POSITIVE if labels[j] else NEGATIVE)
    w_after = clf.model.w
    a = w_before / np.linalg.norm(w_before)
    b = w_after / np.linalg.norm(w_after)
    assert np.linalg.norm(a - b) <= 1e-7


# --- threshold criteria -----------------------------------------------------


def normal_pdf(x, mu, sd):
    return math.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))


def test_equal_density_symmetric_case_is_midpoint():
    st = one_dim_state(2.0, 0.0, 1.5, 1.5)
    assert threshold_equal_density(st, np.array([1.0])) == pytest.approx(1.0, abs=1e-12)


def test_equal_density_matches_bisection_oracle():
    mu1, mu2, sd1, sd2 = 2.0, 0.0, 1.0, 2.0
    lo, hi = 0.0, 2.0
    for _ in range(200):  # bisection on the density difference
        mid = 0.5 * (lo + hi)
        if normal_pdf(mid, mu1, sd1) > normal_pdf(mid, mu2, sd2):
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    st = one_dim_state(mu1, mu2, sd1, sd2)
    got = threshold_equal_density(st, np.array([1.0]))
    assert abs(got - root) <= 1e-9
    assert 0.0 < got < 2.0
    assert abs(normal_pdf(got, mu1, sd1) - normal_pdf(got, mu2, sd2)) <= 1e-9


def test_equal_density_swap_symmetric():
    a = threshold_equal_density(one_dim_state(2.0, 0.0, 1.0, 2.0), np.array([1.0]))
    b = threshold_equal_density(one_dim_state(0.0, 2.0, 2.0, 1.0), np.array([1.0]))
    assert a == pytest.approx(b, abs=1e-12)


def test_equal_density_fallback_to_midpoint(caplog):
    # A much wider negative class pushes both crossings outside the means.
    st = one_dim_state(0.0, 1.0, 1.0, 1000.0)
    with caplog.at_level(logging.WARNING, logger="ogslda.online"):
        got = threshold_equal_density(st, np.array([1.0]))
    assert got == pytest.approx(0.5)
    assert any("midpoint" in rec.message for rec in caplog.records)


def test_target_detection_median_is_positive_mean():
    st = one_dim_state(3.0, 0.0, 2.0, 1.0)
    assert threshold_target_detection(st, np.array([1.0]), 0.5) == pytest.approx(3.0, abs=1e-12)


def test_target_detection_frozen_quantile():
    st = one_dim_state(0.0, -1.0, 1.0, 1.0)
    got = threshold_target_detection(st, np.array([1.0]), 0.01)
    assert got == pytest.approx(-2.3263478740408408, abs=1e-9)


def test_target_detection_mass_above_threshold():
    st = one_dim_state(1.0, 0.0, 2.0, 1.0)
    for p in (0.5, 0.1, 0.01):
        w0 = threshold_target_detection(st, np.array([1.0]), p)
        xs = np.linspace(w0, 1.0 + 12 * 2.0, 200_001)
        mass = np.trapezoid([normal_pdf(x, 1.0, 2.0) for x in xs], xs)
        assert abs(mass - (1.0 - p)) <= 1e-6


def test_target_detection_domain_error():
    st = one_dim_state(0.0, -1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        threshold_target_detection(st, np.array([1.0]), 0.0)


def test_negative_mean_cases():
    st = one_dim_state(1.0, 0.0, 1.0, 1.0)
    assert threshold_negative_mean(st, np.array([1.0])) == 0.0
    clf, *_ = stream_setup(12, n_stream=0)
    w = clf.model.w
    assert threshold_negative_mean(clf.state, w) == float(w @ clf.state.m2)
    st.n2 = 0
    with pytest.raises(EmptyClass):
        threshold_negative_mean(st, np.array([1.0]))


def test_negative_mean_rejects_half_the_negatives():
    mu2, sd2 = 0.5, 1.3
    st = one_dim_state(3.0, mu2, 1.0, sd2)
    w0 = threshold_negative_mean(st, np.array([1.0]))
    xs = np.linspace(mu2 - 12 * sd2, w0, 200_001)
    rejected = np.trapezoid([normal_pdf(x, mu2, sd2) for x in xs], xs)
    assert abs(rejected - 0.5) <= 1e-6


def test_asymmetric_min_never_exceeds_negative_mean():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        st = one_dim_state(rng.uniform(0, 3), rng.uniform(-2, 1), rng.uniform(0.5, 2), rng.uniform(0.5, 2))
        w = np.array([1.0])
        from ogslda.online import update_threshold

        asym = update_threshold(st, w, ASYM_MIN, miss_rate=0.02)
        assert asym <= threshold_negative_mean(st, w) + 1e-15


# --- online_insert ----------------------------------------------------------


def test_insert_then_classify_inserted_sample():
    # Classes are well separated in aggregate but every feature keeps some
    # within-class response variance (a perfectly separating stump has a
    # zero Fisher denominator and is rightly rejected as degenerate).
    rng = np.random.default_rng(3)
    n, m = 120, 10
    labels = np.arange(n) % 2 == 0
    values = rng.standard_normal((n, m)) * 0.4 + np.where(labels[:, None], 0.5, -0.5)
    stumps, _ = train_all_stumps(values[:100].T, labels[:100])
    table = build_feature_table(values[:100].T, labels[:100], stumps)
    model, state = greedy_select(table, 7, ridge=0.0)
    clf = OnlineClassifier(model=model, state=state,
                           stumps=[stumps[i] for i in model.selected], criterion=EQUAL_DENSITY)
    for i in range(100, n):
        label = POSITIVE if labels[i] else NEGATIVE
        online_insert(clf, values[i], label)
        got = clf.margin(values[i]) > 0
        assert got == labels[i]


def test_full_equivalence_over_300_inserts():
    clf, values, labels, n_init = stream_setup(14, n_stream=300)
    run_stream(clf, values, labels, n_init, 300)
    oracle = batch_oracle(clf, values, labels, n_init + 300)
    for got, expect in (
        (clf.state.sb, oracle.sb),
        (clf.state.sw_inv, oracle.sw_inv),
        (clf.model.w, lda_direction(oracle)),
    ):
        err = np.linalg.norm(got - expect) / np.linalg.norm(expect)
        assert err <= 1e-6


def test_empty_stream_leaves_classifier_bitwise_unchanged():
    clf, values, labels, n_init = stream_setup(15, n_stream=0)
    w, w0 = clf.model.w.copy(), clf.model.w0
    snapshot = clf.state.copy()
    for _ in []:
        pass
    np.testing.assert_array_equal(clf.model.w, w)
    assert clf.model.w0 == w0
    np.testing.assert_array_equal(clf.state.sw_inv, snapshot.sw_inv)
    assert clf.insert_count == 0


def test_stream_order_invariance():
    clf_a, values, labels, n_init = stream_setup(16, n_stream=100)
    clf_b = OnlineClassifier(
        model=clf_a.model,
        state=clf_a.state.copy(),
        stumps=list(clf_a.stumps),
        criterion=clf_a.criterion,
    )
    idx = list(range(n_init, n_init + 100))
    for i in idx:
        online_insert(clf_a, values[i], POSITIVE if labels[i] else NEGATIVE)
    for i in reversed(idx):
        online_insert(clf_b, values[i], POSITIVE if labels[i] else NEGATIVE)
    for a, b in (
        (clf_a.state.sb, clf_b.state.sb),
        (clf_a.state.sigma1, clf_b.state.sigma1),
        (clf_a.state.sigma2, clf_b.state.sigma2),
    ):
        assert np.linalg.norm(a - b) <= 1e-8 * max(np.linalg.norm(b), 1.0)


def test_failed_insert_is_all_or_nothing():
    clf, values, labels, n_init = stream_setup(17, n_stream=1)
    clf.miss_rate = 1.5  # breaks the threshold stage, after scatters are staged
    clf.criterion = "target-detect"
    state_before = clf.state
    w_before = clf.model.w
    with pytest.raises(DomainError):
        online_insert(clf, values[n_init], POSITIVE)
    assert clf.state is state_before
    assert clf.model.w is w_before
    assert clf.insert_count == 0


def test_refresh_cadence_resets_counter_and_matches_direct():
    clf, values, labels, n_init = stream_setup(18, n_stream=12)
    clf.refresh_interval = 5
    run_stream(clf, values, labels, n_init, 12)
    assert clf.insert_count == 12
    assert clf.updates_since_refresh == 2  # refreshed at inserts 5 and 10
    expect = refresh_sw_inverse(clf.state)
    np.testing.assert_allclose(clf.state.sw_inv, expect, rtol=1e-10)


def test_insert_rejects_bad_label_and_dimension():
    clf, values, *_ = stream_setup(19, n_stream=1)
    with pytest.raises(ValueError):
        online_insert(clf, values[0], 3)
    with pytest.raises(DimensionMismatch):
        insert_response_vector(clf, np.ones(clf.state.dim + 1), POSITIVE)

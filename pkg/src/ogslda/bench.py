"""Batch-vs-online benchmark harness: learning curves, error tables, timing.

A run is fully described by a ``RunConfig``; every stochastic choice (split,
stream order, repeat seeds) flows from the single run seed, so two runs with
the same config hash and seed produce byte-identical error tables. Timing
tables are naturally exempt from byte-identity: they report medians of
repeated wall-clock measurements together with an environment capture.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import median

import numpy as np

from .datasets import Dataset, split_stream
from .gslda import DEFAULT_RIDGE, GreedySelection, LinearModel, fisher_threshold, lda_direction, scatter_from_responses
from .online import (
    EQUAL_DENSITY,
    NEGATIVE,
    POSITIVE,
    OnlineClassifier,
    insert_response_vector,
    project_rows,
    update_threshold,
)
from .stumps import build_feature_table, train_all_stumps


@dataclass
class RunConfig:
    mode: str = "online"             # "batch" or "online"
    learners: int = 25               # T, the sparsity budget
    initial_frac: float = 0.3
    criterion: str = EQUAL_DENSITY
    miss_rate: float = 0.01
    seed: int = 0
    repeats: int = 10
    eval_every: int = 25             # stream positions between test evaluations
    learner_grid: tuple = ()         # extra T values for the error-vs-k table
    fractions: tuple = ()            # extra fractions for error-vs-fraction
    ridge: float = DEFAULT_RIDGE
    max_stream: int | None = None    # cap on streamed inserts (0 = none streamed)
    timing: bool = False
    timing_checkpoints: tuple = (500, 5000)
    timing_learners: int = 100
    out_dir: str | None = None

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _labels_to_codes(labels):
    return np.where(labels, POSITIVE, NEGATIVE)


def make_classifier(model: LinearModel, state, stumps, config: RunConfig) -> OnlineClassifier:
    return OnlineClassifier(
        model=model,
        state=state,
        stumps=[stumps[i] for i in model.selected],
        criterion=config.criterion,
        miss_rate=config.miss_rate,
    )


def train_batch_classifier(values, labels, learners, config: RunConfig) -> OnlineClassifier:
    """Offline phase: train stumps, greedy-select, set the threshold."""
    stumps, _ = train_all_stumps(values.T, labels)
    table = build_feature_table(values.T, labels, stumps)
    selector = GreedySelection(table, ridge=config.ridge)
    for _ in range(learners):
        selector.step()
    state = selector.state
    w = lda_direction(state)
    model = LinearModel(selected=list(selector.selected), w=w,
                        w0=_initial_threshold(state, w, config))
    return make_classifier(model, state, stumps, config)


def _initial_threshold(state, w, config: RunConfig) -> float:
    try:
        return update_threshold(state, w, config.criterion, config.miss_rate)
    except Exception:
        # Tiny initial sets can lack the per-class variance the online
        # criteria need; the projected-midpoint rule always applies.
        return fisher_threshold(state)


def test_error_from_responses(clf: OnlineClassifier, responses, labels) -> float:
    margins = clf.margins_of_responses(responses)
    return float(((margins > 0) != labels).mean())


def run_online_trial(train: Dataset, test: Dataset, config: RunConfig, seed: int, learners=None):
    """One seeded split + stream; returns the error curve and final errors."""
    learners = learners if learners is not None else [config.learners]
    kmax = max(learners)
    initial, stream = split_stream(train, config.initial_frac, seed)
    n_stream = stream.n if config.max_stream is None else min(stream.n, config.max_stream)

    stumps, _ = train_all_stumps(initial.samples.T, initial.labels)
    table = build_feature_table(initial.samples.T, initial.labels, stumps)
    selector = GreedySelection(table, ridge=config.ridge)
    snapshots = {}
    for k in range(1, kmax + 1):
        selector.step()
        if k in learners:
            snapshots[k] = (list(selector.selected), selector.state.copy())

    out = {}
    for k in learners:
        selected, state = snapshots[k]
        w = lda_direction(state)
        model = LinearModel(selected=selected, w=w, w0=_initial_threshold(state, w, config))
        clf = make_classifier(model, state, stumps, config)
        test_resp = project_rows(clf.stumps, test.samples)
        stream_resp = project_rows(clf.stumps, stream.samples[:n_stream])
        codes = _labels_to_codes(stream.labels[:n_stream])

        curve = [(0, test_error_from_responses(clf, test_resp, test.labels))]
        for i in range(n_stream):
            insert_response_vector(clf, stream_resp[:, i], int(codes[i]))
            done = i + 1
            if done % config.eval_every == 0 or done == n_stream:
                curve.append((done, test_error_from_responses(clf, test_resp, test.labels)))
        out[k] = {
            "curve": curve,
            "final_error": curve[-1][1],
            "initial_error": curve[0][1],
            "n_initial": initial.n,
            "n_stream": n_stream,
            "classifier": clf,
        }
    return out


def batch_errors(train: Dataset, test: Dataset, config: RunConfig, learners) -> dict:
    """Full-training-set batch reference errors at each requested T."""
    kmax = max(learners)
    stumps, _ = train_all_stumps(train.samples.T, train.labels)
    table = build_feature_table(train.samples.T, train.labels, stumps)
    selector = GreedySelection(table, ridge=config.ridge)
    errors = {}
    for k in range(1, kmax + 1):
        selector.step()
        if k in learners:
            state = selector.state
            w = lda_direction(state)
            model = LinearModel(selected=list(selector.selected), w=w,
                                w0=_initial_threshold(state, w, config))
            clf = make_classifier(model, state, stumps, config)
            resp = project_rows(clf.stumps, test.samples)
            errors[k] = test_error_from_responses(clf, resp, test.labels)
    return errors


def time_scaling(
    learners: int = 100,
    checkpoints=(500, 5000),
    repeats: int = 7,
    inner: int = 50,
    seed: int = 0,
    ridge: float = DEFAULT_RIDGE,
):
    """Median per-insert cost vs a from-scratch batch retrain, per checkpoint.

    Synthetic raw values isolate the algorithmic scaling from any dataset.
    The online insert updates a fixed learner set in O(T^2), flat in the
    accumulated count N. The batch counterpart redoes, on all N accumulated
    samples, everything an insert invalidates offline: retrain the stumps
    (O(T N log N)), rebuild the scatter state (O(T^2 N)), and recompute the
    weights and threshold.
    """
    repeats = max(repeats, 5)  # reported medians cover at least 5 repetitions
    rng = np.random.default_rng(seed)
    rows = []
    for n in checkpoints:
        labels = np.arange(n) % 2 == 0
        shift = rng.uniform(0.4, 1.0, size=learners)
        values = rng.standard_normal((learners, n)) + np.where(labels, shift[:, None], 0.0)
        fresh = rng.random((learners, inner)) < 0.5

        def retrain():
            stumps, _ = train_all_stumps(values, labels)
            table = build_feature_table(values, labels, stumps)
            state = scatter_from_responses(table.responses.astype(float), labels, ridge=ridge)
            w = lda_direction(state)
            w0 = update_threshold(state, w, EQUAL_DENSITY)
            return state, w, w0

        def fresh_classifier():
            state, w, w0 = retrain()
            return OnlineClassifier(
                model=LinearModel(selected=list(range(learners)), w=w, w0=w0),
                state=state,
                stumps=[],
                criterion=EQUAL_DENSITY,
            )

        clf = fresh_classifier()  # also warms caches and thread pools
        online_times = []
        for _ in range(repeats):
            clf = fresh_classifier()
            start = time.perf_counter()
            for i in range(inner):
                insert_response_vector(clf, fresh[:, i].astype(float),
                                       POSITIVE if i % 2 == 0 else NEGATIVE)
            online_times.append((time.perf_counter() - start) / inner)

        # Each timing sample covers a block of retrains to stay well above
        # timer and scheduler jitter.
        block = 3
        retrain_times = []
        for _ in range(max(repeats, 5)):
            start = time.perf_counter()
            for _ in range(block):
                retrain()
            retrain_times.append((time.perf_counter() - start) / block)
        rows.append((n, median(online_times), median(retrain_times)))
    return rows


def environment_capture() -> dict:
    return {
        "cpu_count": os.cpu_count(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
    }


def run_benchmark(config: RunConfig, train: Dataset, test: Dataset) -> dict:
    """Execute the configured mode and assemble the report tables."""
    learners = sorted(set((config.learners,) + tuple(config.learner_grid)))
    fractions = sorted(set((config.initial_frac,) + tuple(config.fractions)))
    meta = {"config": config.config_hash(), "seed": config.seed}
    tables = {}

    batch = batch_errors(train, test, config, learners)

    if config.mode == "batch":
        tables["error_vs_k"] = (
            ["k", "batch_full_error"],
            [(k, batch[k]) for k in learners],
        )
        return {"meta": meta, "tables": tables}

    curve_rows = []
    frac_rows = []
    k_rows = []
    base_frac = config.initial_frac
    for frac in fractions:
        cfg = RunConfig(**{**asdict(config), "initial_frac": frac})
        finals = {k: [] for k in learners}
        curves = {k: [] for k in learners}
        for r in range(config.repeats):
            trial = run_online_trial(train, test, cfg, seed=config.seed + r, learners=learners)
            for k in learners:
                finals[k].append(trial[k]["final_error"])
                curves[k].append(trial[k]["curve"])
        for k in learners:
            mean_final = float(np.mean(finals[k]))
            frac_rows.append((frac, k, mean_final, batch[k]))
            if frac == base_frac:
                k_rows.append((k, batch[k], mean_final))
                positions = [p for p, _ in curves[k][0]]
                for idx, pos in enumerate(positions):
                    mean_err = float(np.mean([c[idx][1] for c in curves[k]]))
                    curve_rows.append((k, frac, pos, mean_err))

    tables["error_curve"] = (["k", "fraction", "inserted", "mean_test_error"], curve_rows)
    tables["error_vs_k"] = (["k", "batch_full_error", "online_mean_error"], k_rows)
    tables["error_vs_fraction"] = (
        ["fraction", "k", "online_mean_error", "batch_full_error"],
        frac_rows,
    )
    if config.timing:
        rows = time_scaling(
            learners=config.timing_learners,
            checkpoints=config.timing_checkpoints,
            seed=config.seed,
            ridge=config.ridge,
        )
        env_meta = {**meta, **environment_capture()}
        tables["time_vs_n"] = (
            ["n_accumulated", "online_per_insert_s", "batch_retrain_s"],
            rows,
            env_meta,
        )
    return {"meta": meta, "tables": tables}


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header, rows, meta: dict) -> None:
    """Comma-separated, header row, LF endings, meta as a leading comment."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def write_report(report: dict, out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in report["tables"].items():
        header, rows, *extra = table
        meta = extra[0] if extra else report["meta"]
        path = out_dir / f"{name}.csv"
        write_table(path, header, rows, meta)
        written.append(str(path))
    return written

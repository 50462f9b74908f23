"""Versioned JSON persistence for classifiers and cascades.

The document is self-describing: a format tag and version, the criterion,
the model (selected ids, weights, threshold), the stump parameters, and the
full scatter state, so online training can resume from a checkpoint.
Cascades additionally carry per-stage feature descriptors, goals, and
recorded training rates. Floats are written as shortest round-trip decimals
(at most 17 significant digits), so a load-save-load cycle is lossless.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cascade import Cascade, Stage
from .errors import ParseError, VersionMismatch
from .gslda import LinearModel, ScatterState
from .haar import HaarFeature
from .online import OnlineClassifier
from .stumps import StumpLearner

FORMAT = "ogslda"
VERSION = 1


def _state_doc(state: ScatterState) -> dict:
    return {
        "n1": state.n1,
        "n2": state.n2,
        "m1": state.m1.tolist(),
        "m2": state.m2.tolist(),
        "sigma1": state.sigma1.tolist(),
        "sigma2": state.sigma2.tolist(),
        "sb": state.sb.tolist(),
        "sw_inv": state.sw_inv.tolist(),
        "ridge_diag": state.ridge_diag,
    }


def _state_from(doc: dict) -> ScatterState:
    return ScatterState(
        n1=int(doc["n1"]),
        n2=int(doc["n2"]),
        m1=np.array(doc["m1"], dtype=float),
        m2=np.array(doc["m2"], dtype=float),
        sigma1=np.array(doc["sigma1"], dtype=float),
        sigma2=np.array(doc["sigma2"], dtype=float),
        sb=np.array(doc["sb"], dtype=float),
        sw_inv=np.array(doc["sw_inv"], dtype=float),
        ridge_diag=float(doc["ridge_diag"]),
    )


def _classifier_doc(clf: OnlineClassifier) -> dict:
    return {
        "criterion": clf.criterion,
        "miss_rate": clf.miss_rate,
        "refresh_interval": clf.refresh_interval,
        "insert_count": clf.insert_count,
        "updates_since_refresh": clf.updates_since_refresh,
        "model": {
            "selected": list(map(int, clf.model.selected)),
            "w": clf.model.w.tolist(),
            "w0": float(clf.model.w0),
        },
        "stumps": [
            {"feature_id": s.feature_id, "threshold": s.threshold, "polarity": s.polarity}
            for s in clf.stumps
        ],
        "state": _state_doc(clf.state),
    }


def _classifier_from(doc: dict) -> OnlineClassifier:
    model = LinearModel(
        selected=[int(i) for i in doc["model"]["selected"]],
        w=np.array(doc["model"]["w"], dtype=float),
        w0=float(doc["model"]["w0"]),
    )
    stumps = [
        StumpLearner(int(s["feature_id"]), float(s["threshold"]), int(s["polarity"]))
        for s in doc["stumps"]
    ]
    return OnlineClassifier(
        model=model,
        state=_state_from(doc["state"]),
        stumps=stumps,
        criterion=doc["criterion"],
        miss_rate=float(doc["miss_rate"]),
        refresh_interval=int(doc["refresh_interval"]),
        insert_count=int(doc["insert_count"]),
        updates_since_refresh=int(doc["updates_since_refresh"]),
    )


def _feature_doc(f: HaarFeature) -> dict:
    return {"kind": f.kind, "x": f.x, "y": f.y, "width": f.width, "height": f.height}


def _feature_from(doc: dict) -> HaarFeature:
    return HaarFeature(doc["kind"], int(doc["x"]), int(doc["y"]),
                       int(doc["width"]), int(doc["height"]))


def _stage_doc(stage: Stage) -> dict:
    doc = _classifier_doc(stage.classifier)
    doc["features"] = [_feature_doc(f) for f in stage.features]
    doc["min_detection"] = stage.min_detection
    doc["max_fp"] = stage.max_fp
    doc["train_detection_rate"] = stage.train_detection_rate
    doc["train_fp_rate"] = stage.train_fp_rate
    return doc


def _stage_from(doc: dict) -> Stage:
    return Stage(
        classifier=_classifier_from(doc),
        features=[_feature_from(f) for f in doc["features"]],
        min_detection=float(doc["min_detection"]),
        max_fp=float(doc["max_fp"]),
        train_detection_rate=float(doc["train_detection_rate"]),
        train_fp_rate=float(doc["train_fp_rate"]),
    )


def serialize_model(obj, path) -> None:
    """Write a classifier or cascade as a versioned JSON document."""
    if isinstance(obj, OnlineClassifier):
        doc = {"format": FORMAT, "version": VERSION, "kind": "classifier"}
        doc.update(_classifier_doc(obj))
    elif isinstance(obj, Cascade):
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "kind": "cascade",
            "base_window": obj.base_window,
            "stages": [_stage_doc(s) for s in obj.stages],
        }
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def deserialize_model(path):
    """Load a classifier or cascade; the format tag and version are checked."""
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise VersionMismatch(f"{path}: not an {FORMAT} document")
    if doc.get("version") != VERSION:
        raise VersionMismatch(
            f"{path}: version {doc.get('version')!r} unsupported (expected {VERSION})"
        )
    kind = doc.get("kind")
    try:
        if kind == "classifier":
            return _classifier_from(doc)
        if kind == "cascade":
            return Cascade(
                stages=[_stage_from(s) for s in doc["stages"]],
                base_window=int(doc["base_window"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed document ({exc})") from None
    raise ParseError(f"{path}: unknown document kind {kind!r}")

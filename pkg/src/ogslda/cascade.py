"""Cascade training, sliding-window scanning, merging, and evaluation.

Stages are trained on 24x24 patches: Haar feature values feed decision
stumps, greedy selection adds learners one at a time, and after each
addition the threshold is set by the asymmetric rule (the smaller of the
detection-rate threshold and the projected negative mean) until the stage
meets its node goal on its training pools. Negative pools for later stages
are bootstrapped from windows the current cascade still accepts.

Scanning slides the base window at every scale ``scale_factor**k`` that fits
the image; the step grows proportionally with the scale. Scanning reads an
immutable cascade snapshot and may be parallelized across windows; online
updates are serialized writers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyClass, GoalUnreachable, ImageTooSmall, PoolExhausted
from .gslda import DEFAULT_RIDGE, GreedySelection, LinearModel, lda_direction
from .haar import (
    BASE_WINDOW,
    DEFAULT_POSITION_STRIDE,
    DEFAULT_SIZE_STRIDE,
    HaarFeature,
    haar_value,
    haar_values,
    integral_image,
    integral_images,
    rescale_patch,
)
from .online import (
    ASYM_MIN,
    POSITIVE,
    OnlineClassifier,
    insert_response_vector,
    update_threshold,
)
from .stumps import FeatureTable, StumpLearner, train_all_stumps

log = logging.getLogger(__name__)

MERGE_IOU = 0.3


@dataclass
class CascadeConfig:
    min_detection: float = 0.99
    max_fp: float = 0.5
    max_learners: int = 200
    ridge: float = DEFAULT_RIDGE
    n_workers: int = 1
    scale_factor: float = 1.2
    step: int = 1
    negatives_per_stage: int = 1000
    min_negatives: int = 20  # below this the pool counts as exhausted
    position_stride: int = DEFAULT_POSITION_STRIDE
    size_stride: int = DEFAULT_SIZE_STRIDE

    @property
    def miss_rate(self) -> float:
        # Floored so a 1.0 detection goal still yields a usable quantile.
        return max(1.0 - self.min_detection, 1e-9)


@dataclass
class Stage:
    classifier: OnlineClassifier
    features: list[HaarFeature]
    min_detection: float
    max_fp: float
    train_detection_rate: float
    train_fp_rate: float

    def responses_for_stack(self, ii_stack) -> np.ndarray:
        """Stump responses (T, n) over a stack of base-window patches."""
        out = np.empty((len(self.features), ii_stack.shape[0]))
        for i, (feat, stump) in enumerate(zip(self.features, self.classifier.stumps)):
            out[i] = stump.respond(haar_values(ii_stack, feat))
        return out

    def window_responses(self, ii, window) -> np.ndarray:
        x = np.empty(len(self.features))
        for i, (feat, stump) in enumerate(zip(self.features, self.classifier.stumps)):
            x[i] = stump.respond(haar_value(ii, feat, window))
        return x

    def window_margin(self, ii, window) -> float:
        model = self.classifier.model
        return float(model.w @ self.window_responses(ii, window)) - model.w0


@dataclass
class Cascade:
    stages: list[Stage] = field(default_factory=list)
    base_window: int = BASE_WINDOW


@dataclass
class Detection:
    x: float
    y: float
    width: float
    height: float
    score: float

    def as_tuple(self):
        return (self.x, self.y, self.width, self.height)


@dataclass
class CascadeDecision:
    accepted: bool
    score: float
    stages_evaluated: int


def stage_margins(stage: Stage, ii_stack) -> np.ndarray:
    model = stage.classifier.model
    return model.w @ stage.responses_for_stack(ii_stack) - model.w0


def train_stage(positives, negatives, features, config: CascadeConfig | None = None) -> Stage:
    """Grow one stage until detection >= goal and fp <= goal on its pools.

    Learners are added greedily; after each addition the threshold is reset
    by the asymmetric rule. Hitting the learner cap with the false-positive
    goal met is reported and the stage is frozen with its achieved rates;
    hitting the cap with fp above goal raises ``GoalUnreachable``.
    """
    config = config or CascadeConfig()
    positives = np.asarray(positives)
    negatives = np.asarray(negatives)
    if positives.shape[0] == 0 or negatives.shape[0] == 0:
        raise EmptyClass("both training pools must be nonempty")
    patches = np.concatenate([positives, negatives], axis=0)
    labels = np.zeros(patches.shape[0], dtype=bool)
    labels[: positives.shape[0]] = True

    # Feature values are produced and consumed block by block: only the
    # binary responses are kept, so a pool of tens of thousands of features
    # stays within a uint8 matrix instead of a dense float one.
    ii_stack = integral_images(patches)
    n = patches.shape[0]
    responses = np.empty((len(features), n), dtype=np.uint8)
    stumps = []
    block = 256
    for start in range(0, len(features), block):
        chunk = features[start : start + block]
        values = np.empty((len(chunk), n))
        for i, feat in enumerate(chunk):
            values[i] = haar_values(ii_stack, feat)
        chunk_stumps, _ = train_all_stumps(values, labels, n_workers=config.n_workers)
        for i, stump in enumerate(chunk_stumps):
            stump = StumpLearner(start + i, stump.threshold, stump.polarity)
            stumps.append(stump)
            responses[start + i] = stump.respond(values[i])
    table = FeatureTable(responses=responses, labels=labels)

    selector = GreedySelection(table, ridge=config.ridge)
    detection = fp_rate = 0.0
    w = None
    w0 = 0.0
    for _ in range(config.max_learners):
        selector.step()
        w = lda_direction(selector.state)
        w0 = update_threshold(selector.state, w, ASYM_MIN, miss_rate=config.miss_rate)
        margins = w @ table.responses[selector.selected].astype(float) - w0
        accepted = margins > 0
        detection = float(accepted[labels].mean())
        fp_rate = float(accepted[~labels].mean())
        if detection >= config.min_detection and fp_rate <= config.max_fp:
            break
    else:
        if fp_rate > config.max_fp:
            raise GoalUnreachable(
                f"cap of {config.max_learners} learners hit with detection "
                f"{detection:.4f} and fp {fp_rate:.4f}",
                detection_rate=detection,
                fp_rate=fp_rate,
                learners=config.max_learners,
            )
        log.warning(
            "stage frozen at the %d-learner cap: detection %.4f, fp %.4f",
            config.max_learners, detection, fp_rate,
        )

    selected = selector.selected
    model = LinearModel(selected=list(selected), w=w, w0=w0)
    classifier = OnlineClassifier(
        model=model,
        state=selector.state,
        stumps=[stumps[i] for i in selected],
        criterion=ASYM_MIN,
        miss_rate=config.miss_rate,
    )
    return Stage(
        classifier=classifier,
        features=[features[i] for i in selected],
        min_detection=config.min_detection,
        max_fp=config.max_fp,
        train_detection_rate=detection,
        train_fp_rate=fp_rate,
    )


def cascade_classify(cascade: Cascade, patch) -> CascadeDecision:
    """Short-circuit conjunction over the stages of one base-window patch.

    An empty cascade accepts with score 0; otherwise the score is the final
    stage's margin w @ x - w0.
    """
    if not cascade.stages:
        return CascadeDecision(accepted=True, score=0.0, stages_evaluated=0)
    ii = integral_image(np.asarray(patch))
    return _classify_window(cascade, ii, (0, 0, 1.0))


def _classify_window(cascade: Cascade, ii, window) -> CascadeDecision:
    if not cascade.stages:
        return CascadeDecision(accepted=True, score=0.0, stages_evaluated=0)
    score = 0.0
    for i, stage in enumerate(cascade.stages):
        score = stage.window_margin(ii, window)
        if score <= 0.0:
            return CascadeDecision(accepted=False, score=score, stages_evaluated=i + 1)
    return CascadeDecision(accepted=True, score=score, stages_evaluated=len(cascade.stages))


def classify_patches(cascade: Cascade, patches) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized accept mask and final-stage scores for a patch stack."""
    patches = np.asarray(patches)
    n = patches.shape[0]
    accepted = np.ones(n, dtype=bool)
    scores = np.zeros(n)
    if not cascade.stages:
        return accepted, scores
    ii_stack = integral_images(patches)
    for stage in cascade.stages:
        margins = stage_margins(stage, ii_stack)
        scores[accepted] = margins[accepted]
        accepted &= margins > 0
    return accepted, scores


def scan_windows(height: int, width: int, scale_factor: float = 1.2, step: int = 1):
    """Deterministic scan grid: (x, y, scale, side) for every candidate."""
    if height < BASE_WINDOW or width < BASE_WINDOW:
        raise ImageTooSmall(f"{width}x{height} image is smaller than the base window")
    out = []
    scale = 1.0
    while True:
        side = int(round(BASE_WINDOW * scale))
        if side > min(height, width):
            break
        delta = max(1, int(round(step * scale)))
        for y in range(0, height - side + 1, delta):
            for x in range(0, width - side + 1, delta):
                out.append((x, y, scale, side))
        scale *= scale_factor
    return out


def scan_image(cascade: Cascade, image, scale_factor: float = 1.2, step: int = 1):
    """Slide the window over every scale and emit accepted detections."""
    image = np.asarray(image)
    ii = integral_image(image)
    detections = []
    for x, y, scale, side in scan_windows(image.shape[0], image.shape[1], scale_factor, step):
        decision = _classify_window(cascade, ii, (x, y, scale))
        if decision.accepted:
            detections.append(Detection(x, y, side, side, decision.score))
    return detections


def box_iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _cluster_once(detections, min_neighbors):
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    assigned = [False] * len(detections)
    merged = []
    for seed in order:
        if assigned[seed]:
            continue
        members = [seed]
        assigned[seed] = True
        for j in order:
            if not assigned[j] and box_iou(detections[seed].as_tuple(), detections[j].as_tuple()) >= MERGE_IOU:
                assigned[j] = True
                members.append(j)
        if len(members) < min_neighbors:
            continue
        boxes = np.array([detections[i].as_tuple() for i in members])
        mean = boxes.mean(axis=0)
        merged.append(Detection(*mean, score=max(detections[i].score for i in members)))
    return merged


def merge_detections(detections, min_neighbors: int = 2):
    """Greedy IoU clustering; clusters emit their member-averaged box.

    Clusters are seeded in descending score, so the output is deterministic
    for a given input order. ``min_neighbors`` prunes clusters on the first
    pass only; further passes re-cluster the averaged boxes until nothing
    overlaps above the threshold anymore, which makes the merge idempotent.
    """
    merged = _cluster_once(list(detections), min_neighbors)
    while True:
        again = _cluster_once(merged, 1)
        if len(again) == len(merged):
            return again
        merged = again


def evaluate_detections(detections, ground_truth):
    """Greedy one-to-one matching at IoU > 0.5 in descending score order.

    Returns (true positives, false positives, detection rate); extra
    detections of an already matched box count as false positives.
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    matched = [False] * len(ground_truth)
    tp = fp = 0
    for i in order:
        det = detections[i].as_tuple()
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(ground_truth):
            if matched[j]:
                continue
            iou = box_iou(det, tuple(gt))
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_iou > 0.5:
            matched[best_j] = True
            tp += 1
        else:
            fp += 1
    rate = tp / len(ground_truth) if len(ground_truth) else 0.0
    return tp, fp, rate


def roc_curve(cascade: Cascade, patches, labels):
    """Operating points from sweeping the final stage's threshold.

    Earlier stages stay fixed; the sweep runs over the observed final-stage
    projections of the windows that survive them. Points are returned as
    (false positives, detection rate) sorted by false positives.
    """
    if not cascade.stages:
        raise ValueError("roc_curve needs a trained cascade with at least one stage")
    patches = np.asarray(patches)
    labels = np.asarray(labels, dtype=bool)
    if patches.shape[0] == 0:
        raise ValueError("evaluation data must be nonempty")
    ii_stack = integral_images(patches)
    survives = np.ones(patches.shape[0], dtype=bool)
    for stage in cascade.stages[:-1]:
        survives &= stage_margins(stage, ii_stack) > 0
    final = cascade.stages[-1]
    proj = final.classifier.model.w @ final.responses_for_stack(ii_stack)

    n_pos = int(labels.sum())
    points = []
    thresholds = [-np.inf] + sorted(np.unique(proj[survives])) if survives.any() else [-np.inf]
    for t in thresholds:
        accept = survives & (proj > t)
        det = float(accept[labels].sum() / n_pos) if n_pos else 0.0
        points.append((int(accept[~labels].sum()), det))
    points.append((0, 0.0))
    points = sorted(set(points))
    return points


def bootstrap_negatives(
    cascade: Cascade,
    pool_images,
    needed: int,
    scale_factor: float = 1.2,
    step: int = 1,
):
    """Harvest up to ``needed`` windows the cascade still accepts.

    Images are visited in pool order over the fixed scan grid, so the result
    is deterministic. Returns fewer patches when the pool runs dry and
    raises ``PoolExhausted`` when it yields nothing at all.
    """
    collected = []
    for image in pool_images:
        if len(collected) >= needed:
            break
        image = np.asarray(image)
        ii = integral_image(image)
        for x, y, scale, side in scan_windows(image.shape[0], image.shape[1], scale_factor, step):
            if _classify_window(cascade, ii, (x, y, scale)).accepted:
                window = image[y : y + side, x : x + side]
                if side != BASE_WINDOW:
                    window = rescale_patch(window)
                collected.append(window)
                if len(collected) >= needed:
                    break
    if not collected:
        raise PoolExhausted("no acceptable negative windows left in the pool")
    if len(collected) < needed:
        log.warning("bootstrapped only %d of %d requested negatives", len(collected), needed)
    return np.stack(collected)


def train_cascade(positives, negative_pool, n_stages: int, features, config: CascadeConfig | None = None) -> Cascade:
    """Stage-by-stage cascade construction with negative bootstrapping.

    The positive pool is reused by every stage; each stage's negatives are
    the pool windows the cascade built so far still accepts. Training stops
    early when the pool cannot supply enough negatives.
    """
    config = config or CascadeConfig()
    cascade = Cascade(stages=[])
    for index in range(n_stages):
        try:
            negatives = bootstrap_negatives(
                cascade, negative_pool, config.negatives_per_stage,
                config.scale_factor, config.step,
            )
        except PoolExhausted:
            log.warning("negative pool exhausted before stage %d; stopping", index + 1)
            break
        if negatives.shape[0] < config.min_negatives:
            log.warning(
                "only %d negatives available before stage %d; stopping",
                negatives.shape[0], index + 1,
            )
            break
        stage = train_stage(positives, negatives, features, config)
        cascade.stages.append(stage)
        log.info(
            "stage %d: %d learners, detection %.4f, fp %.4f",
            index + 1, len(stage.features), stage.train_detection_rate, stage.train_fp_rate,
        )
    return cascade


def online_update_cascade(cascade: Cascade, patch, label: int) -> Cascade:
    """Fold one labeled patch into the cascade's per-stage classifiers.

    Positives update every stage. A negative updates exactly the stages it
    reaches: reachability is judged against the cascade as it stood when the
    sample arrived, then stages up to and including the rejecting one are
    updated. Per-stage inserts are all-or-nothing.
    """
    if not cascade.stages:
        return cascade
    patch = np.asarray(patch)
    ii = integral_image(patch)
    window = (0, 0, 1.0)
    if label == POSITIVE:
        reached = len(cascade.stages)
    else:
        reached = 0
        for stage in cascade.stages:
            reached += 1
            if stage.window_margin(ii, window) <= 0.0:
                break
    for stage in cascade.stages[:reached]:
        x = stage.window_responses(ii, window)
        insert_response_vector(stage.classifier, x, label)
    return cascade

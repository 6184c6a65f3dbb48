"""Ground-truth labeling and precision-recall scoring.

A query frame is labeled within-map when some map node lies within both the
translation and the heading tolerance of its ground-truth pose (defaults 5 m
and 30 degrees).  Proposals are judged by ground-truth pose distance, never
by node-index equality: the label records, per frame, the full set of
acceptable nodes.  Any proposal on a frame labeled off-map counts as a false
positive regardless of the node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import wrap_angle
from .mapping import TopometricMap
from .tasks import LcdResult, WakeupResult
from .traverse import Traverse

__all__ = [
    "GroundTruthLabel",
    "PrCurve",
    "WakeupScore",
    "label_ground_truth",
    "recall_at_precision",
    "score_lcd",
    "score_wakeup",
]


@dataclass(eq=False)
class GroundTruthLabel:
    """Per-frame ground-truth verdicts against a map.

    ``ok_nodes[t]`` lists every node acceptable as a proposal for frame
    ``t``; ``true_node[t]`` is the nearest of them by translation (-1 when
    the frame is off-map).
    """

    within_map: np.ndarray
    true_node: np.ndarray
    ok_nodes: list[np.ndarray]
    tol_m: float
    tol_deg: float

    def __len__(self) -> int:
        return self.within_map.size


def label_ground_truth(
    query: Traverse,
    map_: TopometricMap,
    tol_m: float = 5.0,
    tol_deg: float = 30.0,
) -> GroundTruthLabel:
    """Label every query frame against the map's ground-truth node poses."""
    if not query.has_gt:
        raise DataError("query traverse carries no ground truth")
    if map_.gt_poses is None:
        raise DataError("map carries no ground-truth node poses")
    if not (tol_m > 0.0 and tol_deg > 0.0):
        raise DataError("tolerances must be positive")
    gt = query.gt_array()
    nodes = map_.gt_poses
    tol_rad = math.radians(tol_deg)
    dists = np.linalg.norm(gt[:, None, :2] - nodes[None, :, :2], axis=2)
    dheads = np.abs(wrap_angle(gt[:, None, 2] - nodes[None, :, 2]))
    ok = (dists <= tol_m) & (dheads <= tol_rad)
    within = ok.any(axis=1)
    masked = np.where(ok, dists, np.inf)
    true_node = np.where(within, np.argmin(masked, axis=1), -1).astype(int)
    ok_nodes = [np.flatnonzero(row) for row in ok]
    return GroundTruthLabel(
        within_map=within,
        true_node=true_node,
        ok_nodes=ok_nodes,
        tol_m=float(tol_m),
        tol_deg=float(tol_deg),
    )


@dataclass(eq=False)
class PrCurve:
    """A precision-recall sweep with raw counts per operating point.

    Thresholds are strictly increasing; a point's proposals are the items
    whose score strictly exceeds its threshold.  Empty-proposal points take
    precision 1.0 and recall 0.0 by convention.
    """

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    def __post_init__(self):
        k = self.thresholds.size
        for name in ("precision", "recall", "tp", "fp", "fn", "tn"):
            if getattr(self, name).size != k:
                raise ValueError(f"{name} length mismatch")
        if k > 1 and np.any(np.diff(self.thresholds) <= 0.0):
            raise ValueError("thresholds must be strictly increasing")
        totals = self.tp + self.fp + self.fn + self.tn
        if k and np.any(totals != totals[0]):
            raise ValueError("confusion counts must partition the item set")

    @property
    def n_items(self) -> int:
        if self.thresholds.size == 0:
            return 0
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])


def _sweep(taus, can_propose, correct, gt_within) -> PrCurve:
    taus = np.asarray(taus, dtype=float)
    can_propose = np.asarray(can_propose, dtype=bool)
    correct = np.asarray(correct, dtype=bool) & can_propose
    gt_within = np.asarray(gt_within, dtype=bool)
    n = taus.size
    order = np.argsort(taus, kind="stable")
    sorted_tau = taus[order]

    def suffix(flags):
        s = np.concatenate([np.cumsum(flags[order][::-1])[::-1], [0]])
        return s

    suf_prop = suffix(can_propose)
    suf_tp = suffix(correct)
    suf_prop_within = suffix(can_propose & gt_within)
    total_within = int(gt_within.sum())
    total_off = n - total_within

    thresholds = np.concatenate([[-1.0], np.unique(sorted_tau)])
    idx = np.searchsorted(sorted_tau, thresholds, side="right")
    tp = suf_tp[idx]
    prop = suf_prop[idx]
    fp = prop - tp
    fn = total_within - suf_prop_within[idx]
    tn = total_off - (prop - suf_prop_within[idx])
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(prop > 0, tp / np.maximum(prop, 1), 1.0)
        recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), 0.0)
    return PrCurve(
        thresholds=thresholds,
        precision=precision.astype(float),
        recall=recall.astype(float),
        tp=tp.astype(int),
        fp=fp.astype(int),
        fn=fn.astype(int),
        tn=tn.astype(int),
    )


def _check_tols(labels: GroundTruthLabel, tol_m, tol_deg):
    if tol_m is not None and float(tol_m) != labels.tol_m:
        raise DataError("tol_m disagrees with the labels; relabel first")
    if tol_deg is not None and float(tol_deg) != labels.tol_deg:
        raise DataError("tol_deg disagrees with the labels; relabel first")


def score_lcd(
    result: LcdResult,
    labels: GroundTruthLabel,
    tol_m: float | None = None,
    tol_deg: float | None = None,
) -> PrCurve:
    """PR curve for a loop-closure run, sweeping over all observed tau values.

    At each threshold a frame proposes its recorded mode node iff its tau
    strictly exceeds the threshold; a proposal is correct iff the node is
    acceptable for the frame under the label tolerances.
    """
    _check_tols(labels, tol_m, tol_deg)
    if len(result.frames) != len(labels):
        raise DataError("result and labels disagree on the frame count")
    taus = np.array([f.tau for f in result.frames])
    correct = np.array(
        [f.proposal in labels.ok_nodes[t] for t, f in enumerate(result.frames)]
    )
    can = np.ones(len(labels), dtype=bool)
    return _sweep(taus, can, correct, labels.within_map)


@dataclass(eq=False)
class WakeupScore:
    """PR curve over wakeup trials plus the distance-to-convergence summary."""

    curve: PrCurve
    _taus: np.ndarray = field(repr=False)
    _can: np.ndarray = field(repr=False)
    _distances: np.ndarray = field(repr=False)

    def mean_distance_at(self, p: float) -> float | None:
        """Mean distance traveled by proposing trials at the best operating
        point with precision >= p; ``None`` when no point qualifies."""
        c = self.curve
        eligible = np.flatnonzero(c.precision >= p)
        if eligible.size == 0:
            return None
        best = eligible[np.argmax(c.recall[eligible])]
        mask = self._can & (self._taus > c.thresholds[best])
        if not mask.any():
            return None
        return float(self._distances[mask].mean())


def score_wakeup(
    results: list[WakeupResult],
    labels: GroundTruthLabel,
    tol_m: float | None = None,
    tol_deg: float | None = None,
) -> WakeupScore:
    """Score wakeup trials: converged-and-correct is a true positive.

    A trial that never converged counts against recall when its decision
    frame is within the map (a missed localization) and as a true negative
    when it is off-map.  The sweep re-thresholds the recorded tau of
    converged trials; unconverged trials never propose.
    """
    _check_tols(labels, tol_m, tol_deg)
    n_frames = len(labels)
    taus = np.empty(len(results))
    can = np.empty(len(results), dtype=bool)
    correct = np.zeros(len(results), dtype=bool)
    within = np.empty(len(results), dtype=bool)
    dist = np.empty(len(results))
    for idx, r in enumerate(results):
        frame = r.start + r.steps_used
        if frame >= n_frames:
            raise DataError(f"trial {r.trial} decision frame beyond the labels")
        taus[idx] = r.tau
        can[idx] = r.converged
        if r.converged:
            correct[idx] = r.proposal in labels.ok_nodes[frame]
        within[idx] = labels.within_map[frame]
        dist[idx] = r.distance_traveled
    curve = _sweep(taus, can, correct, within)
    return WakeupScore(curve=curve, _taus=taus, _can=can, _distances=dist)


def recall_at_precision(curve: PrCurve, p: float) -> float:
    """Maximum recall among operating points with precision >= p (0.0 if none)."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    mask = curve.precision >= p
    if not mask.any():
        return 0.0
    return float(curve.recall[mask].max())

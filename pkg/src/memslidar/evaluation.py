"""3D detection evaluation: rotated IoU, greedy matching, average precision.

Matching protocol: within a frame, detections are processed by descending
confidence (ties: nearer box center to the sensor origin first, then input
order). Each detection takes the still-unmatched ground-truth box with the
highest IoU (lowest index on IoU ties) if that IoU reaches the threshold,
otherwise it is a false positive. Unmatched ground truth boxes are misses.

AP is computed over all detections of all frames in the same global order,
with exact rational arithmetic before the final conversion to float:

* ``exact-auc``: sum over ranks of recall increment times the precision
  envelope (max precision at any rank at or beyond);
* ``40-point``: mean of the envelope sampled at recall 1/40, 2/40, ..., 1.

Edge rule: no ground truth and no detections gives AP 1; ground truth but
no detections gives AP 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._backend import kernels
from .fileio import Detection, Label, read_labels, read_predictions
from .geometry import Box3D

AP_MODES = ("exact-auc", "40-point")


def _rows(boxes) -> np.ndarray:
    return np.array([b.as_array() for b in boxes], dtype=np.float64).reshape(-1, 7)


def iou3d(a: Box3D, b: Box3D) -> float:
    return float(kernels.iou3d_pair(a.as_array(), b.as_array()))


def iou3d_matrix(boxes_a, boxes_b) -> np.ndarray:
    return kernels.iou3d_matrix(_rows(boxes_a), _rows(boxes_b))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    return float(kernels.bev_intersection_area(
        (a.center[0], a.center[1], a.dx, a.dy, a.yaw), (b.center[0], b.center[1], b.dx, b.dy, b.yaw)))


@dataclass
class FrameMatch:
    order: list  # detection indices in processing order
    tp: list  # TP flag per processed detection
    matched_gt: list  # gt index or -1 per processed detection
    num_gt: int

    @property
    def fn(self) -> int:
        return self.num_gt - sum(self.tp)


def detection_order(dets) -> list:
    key = [(-d.confidence, float(np.linalg.norm(d.box.center)), i) for i, d in enumerate(dets)]
    return [k[2] for k in sorted(key)]


def match_frame(dets, gts, iou_threshold: float = 0.5) -> FrameMatch:
    gt_boxes = [g.box if isinstance(g, Label) else g for g in gts]
    order = detection_order(dets)
    ious = iou3d_matrix([d.box for d in dets], gt_boxes) if dets and gt_boxes else None
    used = np.zeros(len(gt_boxes), dtype=bool)
    tp, matched = [], []
    for i in order:
        j = -1
        if ious is not None:
            row = np.where(used, -1.0, ious[i])
            cand = int(np.argmax(row))
            if row[cand] >= iou_threshold:
                j = cand
        if j >= 0:
            used[j] = True
        tp.append(j >= 0)
        matched.append(j)
    return FrameMatch(order, tp, matched, len(gt_boxes))


def _curve(flags, total_gt):
    precision, recall = [], []
    n_tp = 0
    for k, f in enumerate(flags, 1):
        n_tp += bool(f)
        precision.append(Fraction(n_tp, k))
        recall.append(Fraction(n_tp, total_gt))
    return precision, recall


def precision_recall(flags, total_gt: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative precision and recall along the ranked detections."""
    if total_gt <= 0:
        return np.zeros(len(flags)), np.zeros(len(flags))
    p, r = _curve(flags, total_gt)
    return np.array([float(x) for x in p]), np.array([float(x) for x in r])


def _envelope(precision):
    env = list(precision)
    for k in range(len(env) - 2, -1, -1):
        if env[k + 1] > env[k]:
            env[k] = env[k + 1]
    return env


def average_precision(flags, total_gt: int, mode: str = "exact-auc") -> float:
    """AP of a globally ranked TP/FP sequence."""
    if mode not in AP_MODES:
        raise ValueError(f"unknown AP mode {mode!r}; choose from {AP_MODES}")
    flags = [bool(f) for f in flags]
    if total_gt < 0:
        raise ValueError("total_gt must be non-negative")
    if total_gt == 0:
        if flags:
            raise ValueError("detections present but no ground truth: AP is undefined")
        return 1.0
    if sum(flags) > total_gt:
        raise ValueError("more true positives than ground-truth boxes")
    if not flags:
        return 0.0
    precision, recall = _curve(flags, total_gt)
    env = _envelope(precision)
    if mode == "exact-auc":
        ap = Fraction(0)
        prev = Fraction(0)
        for p, r in zip(env, recall):
            ap += (r - prev) * p
            prev = r
        return float(ap)
    total = Fraction(0)
    k = 0
    for i in range(1, 41):
        level = Fraction(i, 40)
        while k < len(recall) and recall[k] < level:
            k += 1
        if k < len(recall):
            total += env[k]
    return float(total / 40)


@dataclass
class EvalReport:
    ap: float
    iou_threshold: float
    mode: str
    ap_by_mode: dict
    precision: np.ndarray
    recall: np.ndarray
    confidence: np.ndarray
    tp: int
    fp: int
    fn: int
    total_gt: int
    per_frame: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap, "mode": self.mode, "iou_threshold": self.iou_threshold,
            "ap_by_mode": self.ap_by_mode,
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "total_gt": self.total_gt},
            "curve": {"confidence": self.confidence.tolist(), "precision": self.precision.tolist(),
                      "recall": self.recall.tolist()},
            "per_frame": {str(k): v for k, v in sorted(self.per_frame.items())},
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def evaluate_frames(detections: dict, ground_truth: dict, iou_threshold: float = 0.5,
                    mode: str = "exact-auc") -> EvalReport:
    """Evaluate ``{frame_id: [Detection]}`` against ``{frame_id: [Label | Box3D]}``."""
    if mode not in AP_MODES:
        raise ValueError(f"unknown AP mode {mode!r}; choose from {AP_MODES}")
    extra = sorted(set(detections) - set(ground_truth))
    if extra:
        raise KeyError(f"prediction frames missing from ground truth: {extra}")
    ranked = []
    total_gt = fn = 0
    per_frame = {}
    for fid in sorted(ground_truth):
        dets = detections.get(fid, [])
        gts = ground_truth[fid]
        m = match_frame(dets, gts, iou_threshold)
        total_gt += m.num_gt
        fn += m.fn
        per_frame[fid] = {"tp": sum(m.tp), "fp": len(m.tp) - sum(m.tp), "fn": m.fn}
        for rank, (i, flag) in enumerate(zip(m.order, m.tp)):
            d = dets[i]
            ranked.append((-d.confidence, float(np.linalg.norm(d.box.center)), fid, rank, flag, d.confidence))
    ranked.sort()
    flags = [r[4] for r in ranked]
    conf = np.array([r[5] for r in ranked])
    if total_gt == 0 and flags:
        # only false positives: report 0 rather than an undefined AP
        by_mode = {m_: 0.0 for m_ in AP_MODES}
    else:
        by_mode = {m_: average_precision(flags, total_gt, m_) for m_ in AP_MODES}
    precision, recall = precision_recall(flags, total_gt)
    n_tp = sum(flags)
    return EvalReport(by_mode[mode], iou_threshold, mode, by_mode, precision, recall, conf,
                      n_tp, len(flags) - n_tp, fn, total_gt, per_frame)


def evaluate(predictions, ground_truth, iou_threshold: float = 0.5, mode: str = "exact-auc") -> EvalReport:
    """Evaluate a predictions manifest against a ground-truth manifest.

    Both are :class:`~memslidar.dataset.DatasetManifest` objects; prediction
    entries reference their prediction file through ``label_path``.
    """
    gt_entries = ground_truth.by_frame_id()
    missing = sorted(e.frame_id for e in predictions.entries if e.frame_id not in gt_entries)
    if missing:
        raise KeyError(f"prediction frames missing from ground truth: {missing}")
    dets = {e.frame_id: read_predictions(e.label_path, e.frame_id) if e.label_path is not None else []
            for e in predictions.entries}
    gts = {fid: read_labels(e.label_path) if e.label_path is not None else [] for fid, e in gt_entries.items()}
    return evaluate_frames(dets, gts, iou_threshold, mode)


def labels_as_detections(labels, frame_id: int = 0, confidence: float = 1.0) -> list[Detection]:
    return [Detection(lb.box, confidence, frame_id, lb.class_name) for lb in labels]

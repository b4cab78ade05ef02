import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memslidar import evaluation as ev
from memslidar.dataset import DatasetManifest, ManifestEntry
from memslidar.fileio import Detection, Label, write_labels, write_predictions
from memslidar.geometry import Box3D

from oracles import axis_aligned_iou, brute_force_ap, greedy_flags, monte_carlo_iou


def cube(x=0.0, y=0.0, z=0.0, yaw=0.0, size=1.0):
    return Box3D(np.array([x, y, z]), size, size, size, yaw)


def random_box(rng, yaw=True):
    return Box3D(rng.uniform(-1, 1, 3), *rng.uniform(0.3, 2.5, 3), rng.uniform(-math.pi, math.pi) if yaw else 0.0)


# IoU ------------------------------------------------------------------------

def test_iou_examples():
    assert ev.iou3d(cube(), cube()) == 1.0
    assert ev.iou3d(cube(), cube(z=1.5)) == 0.0
    assert ev.iou3d(cube(), cube(x=0.5)) == pytest.approx(1 / 3, abs=1e-15)
    assert ev.iou3d(cube(), cube(yaw=math.pi / 2)) == pytest.approx(1.0, abs=1e-12)
    b = Box3D(np.zeros(3), 2, 1, 1, 0.3)
    assert ev.iou3d(b, b.replace(yaw=0.3 + math.pi)) == pytest.approx(1.0, abs=1e-12)


def test_iou_cube_yawed_monte_carlo():
    # octagon overlap: 2 * (sqrt(2) - 1) of the unit square
    exact = (2 * (math.sqrt(2) - 1)) / (2 - 2 * (math.sqrt(2) - 1))
    got = ev.iou3d(cube(), cube(yaw=math.pi / 4))
    assert got == pytest.approx(exact, abs=1e-12)
    assert abs(got - monte_carlo_iou(cube(), cube(yaw=math.pi / 4))) <= 0.005


def test_iou_random_pairs_monte_carlo():
    rng = np.random.default_rng(17)
    for i in range(20):
        a, b = random_box(rng), random_box(rng)
        assert abs(ev.iou3d(a, b) - monte_carlo_iou(a, b, n=200_000, seed=i)) <= 0.01


def test_iou_axis_aligned_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = random_box(rng, yaw=False), random_box(rng, yaw=False)
        assert abs(ev.iou3d(a, b) - axis_aligned_iou(a, b)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-math.pi, math.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_iou_properties(seed, rot, tx, ty):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng), random_box(rng)
    v = ev.iou3d(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(ev.iou3d(b, a), abs=1e-12)
    c, s = math.cos(rot), math.sin(rot)

    def move(x):
        p = x.center
        return x.replace(center=np.array([c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty, p[2]]),
                         yaw=x.yaw + rot)
    assert abs(ev.iou3d(move(a), move(b)) - v) <= 1e-9
    assert ev.iou3d(a, a) == 1.0


def test_iou_matrix_and_bev():
    rng = np.random.default_rng(0)
    A = [random_box(rng) for _ in range(4)]
    B = [random_box(rng) for _ in range(3)]
    m = ev.iou3d_matrix(A, B)
    assert m.shape == (4, 3)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            assert m[i, j] == ev.iou3d(a, b)
    assert ev.bev_intersection_area(cube(), cube(x=0.5)) == pytest.approx(0.5)
    assert ev.bev_intersection_area(cube(), cube(x=1.0 + 1e-13)) == 0.0


# matching -------------------------------------------------------------------

def shifted_cube_with_iou(target):
    # (1 - s) / (1 + s) = target for unit cubes shifted along x
    return cube(x=(1 - target) / (1 + target))


def test_match_examples():
    gts = [Label(cube(x=3 * i)) for i in range(3)]
    m = ev.match_frame([Detection(g.box, 1.0) for g in gts], gts)
    assert all(m.tp) and m.fn == 0
    assert ev.match_frame([], [Label(cube(x=3 * i)) for i in range(6)]).fn == 6
    gt = [Label(cube())]
    d_hi = Detection(shifted_cube_with_iou(0.8), 0.9)
    d_lo = Detection(shifted_cube_with_iou(0.6), 0.95)
    assert ev.iou3d(d_hi.box, gt[0].box) == pytest.approx(0.8)
    m = ev.match_frame([d_hi, d_lo], gt, 0.5)
    assert m.order == [1, 0] and m.tp == [True, False] and m.fn == 0


def test_match_tie_break_by_distance_then_order():
    gt = [Label(cube(x=10))]
    far = Detection(cube(x=10.2), 0.5)
    near = Detection(cube(x=9.9), 0.5)
    assert ev.detection_order([far, near]) == [1, 0]
    same = Detection(cube(x=9.9), 0.5)
    assert ev.detection_order([near, same]) == [0, 1]
    m = ev.match_frame([far, near], gt)
    assert m.tp == [True, False] and m.matched_gt == [0, -1]


# AP ---------------------------------------------------------------------------

def test_ap_examples():
    for mode in ev.AP_MODES:
        assert ev.average_precision([True] * 5, 5, mode) == 1.0
        assert ev.average_precision([False] * 5, 5, mode) == 0.0
        assert ev.average_precision([True, False, True], 2, mode) == float(Fraction(5, 6))
        assert ev.average_precision([], 3, mode) == 0.0
        assert ev.average_precision([], 0, mode) == 1.0
    with pytest.raises(ValueError):
        ev.average_precision([True], 1, "11-point")
    with pytest.raises(ValueError):
        ev.average_precision([False], 0)


def test_ap_fixture_matches_brute_force():
    scored = [(0.9, True), (0.8, False), (0.7, True)]
    assert brute_force_ap(scored, 2) == pytest.approx(5 / 6, abs=1e-15)


def random_instance(rng):
    n_gt = int(rng.integers(0, 11))
    gts = [Box3D(np.array([rng.uniform(-8, 8), rng.uniform(-8, 8), 0.9]), *rng.uniform(0.4, 1.0, 2), 1.8)
           for _ in range(n_gt)]
    dets = []
    for _ in range(int(rng.integers(1, 21))):
        if gts and rng.random() < 0.7:
            g = gts[int(rng.integers(len(gts)))]
            box = g.replace(center=g.center + np.append(rng.normal(0, 0.15, 2), 0.0))
        else:
            box = Box3D(np.array([rng.uniform(-8, 8), rng.uniform(-8, 8), 0.9]), 0.6, 0.6, 1.8)
        dets.append((float(rng.uniform(0.01, 1.0)), box))
    return dets, gts


def test_ap_random_instances_match_brute_force():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(100):
        dets, gts = random_instance(rng)
        if not gts:
            continue
        scored = greedy_flags(dets, gts, axis_aligned_iou, 0.5)
        m = ev.match_frame([Detection(b, c) for c, b in dets], gts, 0.5)
        assert [f for _, f in scored] == m.tp
        got = ev.average_precision(m.tp, len(gts), "exact-auc")
        assert abs(got - brute_force_ap(scored, len(gts))) <= 1e-9
        checked += 1
    assert checked > 80


@settings(max_examples=300, deadline=None)
@given(st.lists(st.booleans(), max_size=25), st.integers(0, 5))
def test_ap_prepending_tp_never_decreases(flags, extra_gt):
    total = sum(flags) + 1 + extra_gt
    for mode in ev.AP_MODES:
        before = ev.average_precision(flags, total, mode)
        after = ev.average_precision([True] + flags, total, mode)
        assert 0.0 <= before <= 1.0
        assert after >= before - 1e-15


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=25), st.integers(0, 5))
def test_precision_recall_properties(flags, extra_gt):
    total = sum(flags) + extra_gt
    if total == 0:
        return
    p, r = ev.precision_recall(flags, total)
    assert np.all((p >= 0) & (p <= 1)) and np.all((r >= 0) & (r <= 1))
    assert np.all(np.diff(r) >= 0)


# evaluate ------------------------------------------------------------------

def gt_frames():
    return {0: [Label(cube(x=5))], 1: [Label(cube(x=8))], 2: [Label(cube(x=11))], 3: [Label(cube(x=14))],
            4: [Label(cube(x=6)), Label(cube(x=9, y=3))]}


def test_micro_benchmark_hand_enumerated():
    g = gt_frames()
    far = cube(x=40)
    dets = {
        0: [Detection(g[0][0].box, 0.95)],
        1: [Detection(far, 0.9)],
        2: [Detection(g[2][0].box, 0.85)],
        3: [Detection(g[3][0].box, 0.8)],
        4: [Detection(far, 0.7), Detection(g[4][1].box, 0.6)],
    }
    rep = ev.evaluate_frames(dets, g, 0.5)
    # precision 1, 1/2, 2/3, 3/4, 3/5, 4/6 at recall 1/6, 1/6, 2/6, 3/6, 3/6, 4/6
    assert abs(rep.ap - 19 / 36) <= 1e-9
    assert (rep.tp, rep.fp, rep.fn, rep.total_gt) == (4, 2, 2, 6)
    assert rep.tp + rep.fn == rep.total_gt
    np.testing.assert_allclose(rep.precision, [1, 1 / 2, 2 / 3, 3 / 4, 3 / 5, 4 / 6])
    np.testing.assert_array_equal(rep.confidence, [0.95, 0.9, 0.85, 0.8, 0.7, 0.6])


def test_evaluate_self_and_shifted():
    g = gt_frames()
    self_dets = {k: ev.labels_as_detections(v, k) for k, v in g.items()}
    for mode in ev.AP_MODES:
        assert ev.evaluate_frames(self_dets, g, 0.5, mode).ap == 1.0
    shifted = {k: [Detection(d.box.replace(center=d.box.center + [10, 0, 0]), 1.0) for d in v]
               for k, v in self_dets.items()}
    assert ev.evaluate_frames(shifted, g, 0.5).ap == 0.0
    with pytest.raises(KeyError):
        ev.evaluate_frames({99: []}, g)
    with pytest.raises(ValueError):
        ev.evaluate_frames({}, g, mode="bogus")


def test_evaluate_only_false_positives_without_gt():
    rep = ev.evaluate_frames({0: [Detection(cube(), 0.5)]}, {0: []})
    assert rep.ap == 0.0 and rep.fp == 1 and rep.total_gt == 0


def test_evaluate_manifests(tmp_path):
    g = gt_frames()
    gt_entries, pred_entries = [], []
    for fid, labels in g.items():
        write_labels(tmp_path / f"g{fid}.txt", labels)
        write_predictions(tmp_path / f"p{fid}.txt", ev.labels_as_detections(labels, fid))
        gt_entries.append(ManifestEntry(None, tmp_path / f"g{fid}.txt", "real", fid))
        pred_entries.append(ManifestEntry(None, tmp_path / f"p{fid}.txt", "prediction", fid))
    rep = ev.evaluate(DatasetManifest(pred_entries), DatasetManifest(gt_entries), 0.5)
    assert rep.ap == 1.0 and rep.ap_by_mode == {"exact-auc": 1.0, "40-point": 1.0}
    d = rep.to_dict()
    assert d["counts"] == {"tp": 6, "fp": 0, "fn": 0, "total_gt": 6}
    rep.save(tmp_path / "r.json")
    with pytest.raises(KeyError):
        ev.evaluate(DatasetManifest([ManifestEntry(None, None, "prediction", 77)]), DatasetManifest(gt_entries))

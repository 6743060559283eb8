"""Ground-truth verdicts and the valid-grasp-candidate rate."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graspkit.evaluation import (
    CLASS_GRIPPERS,
    CandidateVerdict,
    ClassificationMargins,
    Verdict,
    benchmark_verdicts,
    classify,
    format_report,
    run_benchmark,
    valid_rate,
)
from graspkit.graspability import DetectionParams, GraspCandidate, detect
from graspkit.gripper_models import GripperKind, GripperModel
from graspkit.scene_synth import BinModel, Primitive, Shape, default_intrinsics, render
from graspkit.transforms import RigidTransform

K = default_intrinsics()
BIN = BinModel()
FLOOR = BIN.floor_z


def at(x, y, z):
    return RigidTransform(translation=np.array([x, y, z]))


def rest(shape, dims, x, y, part_id=1, part_class=1):
    if shape is Shape.SPHERE:
        cz = FLOOR - dims[0]
    elif shape is Shape.CUBOID:
        cz = FLOOR - dims[2] / 2
    else:
        cz = FLOOR - dims[-1] / 2
    return Primitive(shape, dims, at(x, y, cz), part_id, part_class)


def hand_candidate(u, v, rotation_index=0):
    """Candidate at a pixel; only the pixel and rotation matter to classify."""
    return GraspCandidate(
        u=u,
        v=v,
        rotation_index=rotation_index,
        g4=1.0,
        omega=1.0,
        g6=1.0,
        position=np.zeros(3),
        approach=np.array([0.0, 0.0, 1.0]),
        grasp_z_rotation=0.0,
    )


def pixel_of(x, y):
    return int(round(K.cx + x * K.fx / FLOOR)), int(round(K.cy + y * K.fy / FLOOR))


SUCTION = CLASS_GRIPPERS[1]
TWO_FINGER = CLASS_GRIPPERS[4]
INNER = CLASS_GRIPPERS[6]
SUCTION_MARGINS = ClassificationMargins(n_rotations=1)


# --- classify ------------------------------------------------------------------


def test_suction_center_of_box_valid():
    scene = render([rest(Shape.CUBOID, (0.04, 0.03, 0.026), 0, 0)], BIN, K)
    u, v = pixel_of(0, 0)
    cv = classify(hand_candidate(u, v), scene, SUCTION, SUCTION_MARGINS)
    assert cv.verdict is Verdict.VALID
    assert cv.part_id == 1


def test_suction_off_surface():
    scene = render([rest(Shape.CUBOID, (0.04, 0.03, 0.026), 0, 0)], BIN, K)
    u, v = pixel_of(0.06, 0.05)  # bare floor
    cv = classify(hand_candidate(u, v), scene, SUCTION, SUCTION_MARGINS)
    assert cv.verdict is Verdict.OFF_SURFACE
    assert cv.part_id is None


def test_suction_edge_point():
    scene = render([rest(Shape.CUBOID, (0.04, 0.03, 0.026), 0, 0)], BIN, K)
    # box top spans x in [-0.02, 0.02] at the top plane; probe 1 px inside the
    # label boundary with edge_margin = 3 px
    top = FLOOR - 0.026
    u_edge = int(round(K.cx + 0.02 * K.fx / top))
    v = int(round(K.cy))
    cand = hand_candidate(u_edge - 1, v)
    assert scene.labels[v, u_edge - 1] == 1
    cv = classify(cand, scene, SUCTION, SUCTION_MARGINS)
    assert cv.verdict is Verdict.EDGE_POINT


def test_suction_collision_with_taller_neighbor():
    # neighbor towers over the grasped part inside the pad footprint
    short = rest(Shape.CUBOID, (0.03, 0.03, 0.01), 0, 0, part_id=1)
    tall = rest(Shape.CUBOID, (0.02, 0.02, 0.03), 0.023, 0, part_id=2)
    scene = render([short, tall], BIN, K)
    top = FLOOR - 0.01
    u = int(round(K.cx + 0.010 * K.fx / top))  # interior point, pad overhangs the tall box
    v = int(round(K.cy))
    assert scene.labels[v, u] == 1
    cv = classify(hand_candidate(u, v), scene, SUCTION, SUCTION_MARGINS)
    assert cv.verdict is Verdict.COLLISION


def test_suction_multi_part():
    # two flush boxes side by side; pad seals across both -> multiple parts
    a = rest(Shape.CUBOID, (0.03, 0.03, 0.02), -0.015, 0, part_id=1)
    b = rest(Shape.CUBOID, (0.03, 0.03, 0.02), 0.015, 0, part_id=2)
    scene = render([a, b], BIN, K)
    # interior of part 1 (>= edge margin) with the pad reaching onto part 2
    u, v = int(round(K.cx)) - 4, int(round(K.cy))
    assert scene.labels[v, u] == 1
    cv = classify(hand_candidate(u, v), scene, SUCTION, SUCTION_MARGINS)
    assert cv.verdict is Verdict.MULTI_PART


def test_two_finger_valid_cylinder():
    scene = render([rest(Shape.CYLINDER, (0.006, 0.014), 0, 0)], BIN, K)
    u, v = pixel_of(0, 0)
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, TWO_FINGER)
    assert cv.verdict is Verdict.VALID


def test_two_finger_multi_part_enclosed_neighbor():
    # a second tall part stands inside the closing gap: fingers enclose both
    a = rest(Shape.CYLINDER, (0.004, 0.012), 0, 0, part_id=1)
    b = rest(Shape.CYLINDER, (0.0025, 0.010), 0.006, 0, part_id=2)
    scene = render([a, b], BIN, K)
    u, v = int(round(K.cx)), int(round(K.cy))
    assert scene.labels[v, u] == 1
    # rotation 0 closes along x, the gap region covers both cylinders
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, TWO_FINGER)
    assert cv.verdict is Verdict.MULTI_PART


def test_two_finger_slip_on_flat_shim():
    # a broad 1 mm shim: fingers close over it, no wall to press against
    scene = render([rest(Shape.CUBOID, (0.05, 0.04, 0.001), 0, 0)], BIN, K)
    u, v = pixel_of(0, 0)
    margins = ClassificationMargins(finger_descent_m=0.0)  # fingertips at the top plane
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, TWO_FINGER, margins)
    assert cv.verdict is Verdict.SLIP


def test_two_finger_collision_floor_bottoming():
    # part shorter than descent - clearance: fingers hit the floor
    scene = render([rest(Shape.CUBOID, (0.012, 0.012, 0.002), 0, 0)], BIN, K)
    u, v = pixel_of(0, 0)
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, TWO_FINGER)
    assert cv.verdict is Verdict.COLLISION


def test_inner_valid_washer_hole():
    scene = render([rest(Shape.ANNULUS, (0.0075, 0.00375, 0.003), 0, 0)], BIN, K)
    u, v = pixel_of(0, 0)
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, INNER)
    assert cv.verdict is Verdict.VALID
    assert cv.part_id == 1


def test_inner_off_surface_on_bare_floor():
    scene = render([rest(Shape.ANNULUS, (0.0075, 0.00375, 0.003), 0.05, 0.04)], BIN, K)
    u, v = pixel_of(-0.05, -0.04)
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, INNER)
    assert cv.verdict is Verdict.OFF_SURFACE


def test_inner_edge_point_off_center_hole():
    scene = render([rest(Shape.ANNULUS, (0.009, 0.005, 0.004), 0, 0)], BIN, K)
    # off the hole center, within edge margin of the ring material
    u, v = int(round(K.cx)) + 5, int(round(K.cy)) + 1
    assert scene.labels[v, u] == 0
    cv = classify(hand_candidate(u, v, rotation_index=0), scene, INNER)
    assert cv.verdict is Verdict.EDGE_POINT


def test_candidate_outside_raster_rejected():
    scene = render([rest(Shape.SPHERE, (0.01,), 0, 0)], BIN, K)
    with pytest.raises(ValueError, match="outside raster"):
        classify(hand_candidate(5000, 2), scene, SUCTION, SUCTION_MARGINS)


def test_classify_requires_ground_truth():
    scene = render([rest(Shape.SPHERE, (0.01,), 0, 0)], BIN, K)
    from dataclasses import replace

    bare = replace(scene, clean_depth=None, gt_normals=None)
    with pytest.raises(ValueError, match="ground-truth"):
        classify(hand_candidate(10, 10), bare, SUCTION, SUCTION_MARGINS)


def test_classify_order_independent():
    scene = render(
        [
            rest(Shape.CUBOID, (0.03, 0.03, 0.02), -0.03, 0, part_id=1),
            rest(Shape.CUBOID, (0.03, 0.03, 0.02), 0.03, 0.02, part_id=2),
        ],
        BIN,
        K,
    )
    cands = [
        hand_candidate(*pixel_of(-0.03 * FLOOR / (FLOOR - 0.02), 0)),
        hand_candidate(*pixel_of(0.06, 0.05)),
        hand_candidate(*pixel_of(0.0, 0.0)),
    ]
    forward = [classify(c, scene, SUCTION, SUCTION_MARGINS).verdict for c in cands]
    backward = [classify(c, scene, SUCTION, SUCTION_MARGINS).verdict for c in reversed(cands)]
    assert forward == backward[::-1]


# --- valid_rate -------------------------------------------------------------------


def make_verdicts(n_valid, n_invalid, part_class=1):
    out = []
    for i in range(n_valid):
        out.append(CandidateVerdict(Verdict.VALID, hand_candidate(i, 0), 1, part_class))
    for i in range(n_invalid):
        out.append(CandidateVerdict(Verdict.COLLISION, hand_candidate(i, 1), 1, part_class))
    return out


def test_rate_all_valid():
    report = valid_rate(make_verdicts(10, 0))
    assert report.valid_rate_percent == 100.0


def test_rate_two_failures():
    report = valid_rate(make_verdicts(8, 2))
    assert report.valid_rate_percent == 80.0


def test_rate_302_candidates():
    report = valid_rate(make_verdicts(302 - 45, 45))
    assert report.total_candidates == 302
    assert round(report.valid_rate_percent, 1) == 85.1


def test_rate_empty_undefined():
    report = valid_rate([])
    assert report.total_candidates == 0
    assert report.valid_rate_percent is None


@given(st.lists(st.sampled_from(list(Verdict)), max_size=60))
@settings(max_examples=200, deadline=None)
def test_rate_matches_direct_recomputation(verdict_kinds):
    verdicts = [
        CandidateVerdict(k, hand_candidate(i, 0), 1, (i % 3) + 1)
        for i, k in enumerate(verdict_kinds)
    ]
    report = valid_rate(verdicts)
    total = len(verdict_kinds)
    non = sum(1 for k in verdict_kinds if k is not Verdict.VALID)
    if total == 0:
        assert report.valid_rate_percent is None
    else:
        assert report.valid_rate_percent == (1 - non / total) * 100.0
    assert report.non_graspable == non
    assert sum(report.per_verdict.values()) == total
    for cls, stats in report.per_class.items():
        expected = [k for i, k in enumerate(verdict_kinds) if (i % 3) + 1 == cls]
        assert stats.total == len(expected)
        assert stats.valid == sum(1 for k in expected if k is Verdict.VALID)


# --- benchmark ---------------------------------------------------------------------


def test_benchmark_deterministic_and_reported():
    a = run_benchmark(classes=(6,), scenes_per_class=1, candidates_per_scene=5, seed=3)
    b = run_benchmark(classes=(6,), scenes_per_class=1, candidates_per_scene=5, seed=3)
    assert a.total_candidates == b.total_candidates == 5
    assert a.valid_rate_percent == b.valid_rate_percent
    assert a.per_verdict == b.per_verdict


def test_benchmark_washer_hole_centered_valid():
    verdicts = benchmark_verdicts(classes=(6,), scenes_per_class=2, candidates_per_scene=8, seed=1)
    valid = [v for v in verdicts if v.verdict is Verdict.VALID]
    assert len(valid) / len(verdicts) >= 0.75
    # valid candidates sit in hole voids: label 0 at the pixel
    # (checked here indirectly: inner verdicts carry the grasped part id)
    assert all(v.part_id is not None and v.part_id > 0 for v in valid)


def test_benchmark_unknown_class():
    with pytest.raises(ValueError):
        run_benchmark(classes=(12,), scenes_per_class=1, candidates_per_scene=1, seed=0)


def test_format_report_table():
    report = valid_rate(make_verdicts(9, 1, part_class=2))
    text = format_report(report)
    assert "output_pulley" in text
    assert "90.0" in text
    assert "all" in text

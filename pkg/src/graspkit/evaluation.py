"""Ground-truth verdicts for grasp candidates and the valid-rate benchmark.

A detected candidate is checked against the synthetic scene's noise-free
rasters in a fixed order: off-surface/edge placement, collision of the
gripper footprint, multi-part enclosure, then slip (finger grasps whose
contact walls are too shallow). A candidate triggering several conditions
gets the highest-precedence verdict. The valid rate of a set of verdicts is

    (1 - non_graspable / total) * 100

and is undefined (None) for an empty set, which is distinct from 0.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .gripper_models import (
    GripperKind,
    GripperModel,
    GripperTemplateSet,
    build_templates,
    enclosed_region_mask,
)
from .graspability import DetectionParams, GraspCandidate, detect
from .scene_synth import PART_CATALOG, SyntheticScene, generate_benchmark


class Verdict(enum.Enum):
    VALID = "valid"
    EDGE_POINT = "edge_point"
    SLIP = "slip"
    COLLISION = "collision"
    MULTI_PART = "multi_part"
    OFF_SURFACE = "off_surface"


@dataclass(frozen=True, eq=False)
class CandidateVerdict:
    verdict: Verdict
    candidate: GraspCandidate
    part_id: int | None
    part_class: int | None = None


@dataclass(frozen=True)
class ClassificationMargins:
    edge_margin_px: float = 3.0
    slip_slope_deg: float = 30.0
    collision_clearance_m: float = 0.002
    contact_band_m: float = 0.003
    wall_margin_m: float = 0.002
    finger_descent_m: float = 0.005
    min_overlap_px: int = 2
    n_rotations: int = 8


@dataclass(frozen=True)
class ClassStats:
    total: int
    valid: int

    @property
    def rate_percent(self) -> float | None:
        if self.total == 0:
            return None
        return (1.0 - (self.total - self.valid) / self.total) * 100.0


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    total_candidates: int
    non_graspable: int
    valid_rate_percent: float | None
    per_class: dict
    per_verdict: dict


# Approach type used to pick each part class (the mapping is fixed per class,
# mirroring a manually assigned gripper per part type).
CLASS_GRIPPERS: dict[int, GripperModel] = {
    1: GripperModel(GripperKind.SUCTION, pad_radius=0.0045),
    2: GripperModel(GripperKind.SUCTION, pad_radius=0.0045),
    3: GripperModel(GripperKind.SUCTION, pad_radius=0.0045),
    4: GripperModel(
        GripperKind.TWO_FINGER,
        opening_width=0.018,
        finger_width=0.010,
        finger_thickness=0.004,
        closing_stroke=0.010,
    ),
    5: GripperModel(
        GripperKind.TWO_FINGER_INNER,
        opening_width=0.004,
        finger_width=0.0035,
        finger_thickness=0.0015,
        closing_stroke=0.007,
    ),
    6: GripperModel(
        GripperKind.TWO_FINGER_INNER,
        opening_width=0.004,
        finger_width=0.0035,
        finger_thickness=0.0015,
        closing_stroke=0.007,
    ),
    7: GripperModel(GripperKind.SUCTION, pad_radius=0.0045),
}


def _mask_indices(mask: np.ndarray, r_px: int, v: int, u: int, shape):
    """Raster indices covered by a centered template mask, clipped to bounds."""
    offs = np.argwhere(mask) - r_px
    vs = offs[:, 0] + v
    us = offs[:, 1] + u
    ok = (vs >= 0) & (vs < shape[0]) & (us >= 0) & (us < shape[1])
    return vs[ok], us[ok]


def _wall_inclinations(gt: np.ndarray, vs, us, resolution: float) -> np.ndarray:
    """Inclination from vertical (degrees) of the steepest wall evidence at
    each contact pixel: atan(pixel pitch / depth drop to the deepest 3x3
    neighbor). No drop means no wall (90 degrees)."""
    deepest = ndimage.maximum_filter(gt, size=3, mode="nearest")
    drop = np.maximum(deepest[vs, us] - gt[vs, us], 0.0)
    return np.degrees(np.arctan2(resolution, drop))


def classify(
    candidate: GraspCandidate,
    scene: SyntheticScene,
    model: GripperModel,
    margins: ClassificationMargins = ClassificationMargins(),
    templates: GripperTemplateSet | None = None,
) -> CandidateVerdict:
    """Verdict for one candidate against the scene's ground truth.

    The candidate must come from this scene's rendered depth map. Suction and
    two-finger grasp points must sit on a part; inner grasp points sit in a
    hole and are judged by what the outward-opening fingers contact.
    """
    if scene.clean_depth is None:
        raise ValueError("scene carries no ground-truth rasters (re-render it)")
    labels = scene.labels
    gt = scene.clean_depth.astype(np.float64)
    h, w = labels.shape
    u, v = candidate.u, candidate.v
    if not (0 <= u < w and 0 <= v < h):
        raise ValueError(f"candidate pixel ({u}, {v}) outside raster bounds")

    if templates is None:
        n_rot = 1 if model.kind is GripperKind.SUCTION else margins.n_rotations
        templates = build_templates(
            model,
            scene.rendered.ground_resolution(),
            n_rot,
            contact_depth_band=margins.contact_band_m,
        )
    res = templates.resolution
    r_px = templates.radius_px
    rot = candidate.rotation_index
    contact_mask = templates.contact_masks[rot]
    collision_mask = templates.collision_masks[rot]

    center_depth = gt[v, u]
    if model.kind is GripperKind.TWO_FINGER:
        grasp_depth = center_depth + margins.finger_descent_m
    else:
        grasp_depth = center_depth

    kind = model.kind
    label_at = int(labels[v, u])

    def verdict(kind_, part_id):
        return CandidateVerdict(kind_, candidate, part_id)

    # --- (1) off-surface / edge ------------------------------------------------
    if kind is GripperKind.TWO_FINGER_INNER:
        vs, us = _mask_indices(contact_mask, r_px, v, u, (h, w))
        contact_sel = (labels[vs, us] > 0) & (gt[vs, us] <= grasp_depth - margins.wall_margin_m)
        if not contact_sel.any():
            return verdict(Verdict.OFF_SURFACE, None)
        ids, counts = np.unique(labels[vs[contact_sel], us[contact_sel]], return_counts=True)
        target = int(ids[np.argmax(counts)])
        dist_to_material = ndimage.distance_transform_edt(labels == 0)
        if dist_to_material[v, u] < margins.edge_margin_px:
            return verdict(Verdict.EDGE_POINT, target)
    else:
        if label_at == 0:
            return verdict(Verdict.OFF_SURFACE, None)
        target = label_at
        dist_inside = ndimage.distance_transform_edt(labels == target)
        if dist_inside[v, u] < margins.edge_margin_px:
            return verdict(Verdict.EDGE_POINT, target)

    # --- (2) collision -----------------------------------------------------------
    clearance = margins.collision_clearance_m
    if kind is GripperKind.SUCTION:
        vs, us = _mask_indices(contact_mask, r_px, v, u, (h, w))
        obstructed = (gt[vs, us] < grasp_depth - clearance) & (labels[vs, us] != target)
        if obstructed.any():
            return verdict(Verdict.COLLISION, target)
    else:
        vs, us = _mask_indices(collision_mask, r_px, v, u, (h, w))
        obstructed = gt[vs, us] < grasp_depth - clearance
        lab = labels[vs, us]
        if (obstructed & (lab != target)).any():
            return verdict(Verdict.COLLISION, target)
        if int((obstructed & (lab == target)).sum()) >= margins.min_overlap_px:
            return verdict(Verdict.COLLISION, target)

    # --- (3) multi-part ------------------------------------------------------------
    if kind is GripperKind.SUCTION:
        vs, us = _mask_indices(contact_mask, r_px, v, u, (h, w))
        sel = np.abs(gt[vs, us] - grasp_depth) <= margins.contact_band_m
    elif kind is GripperKind.TWO_FINGER:
        gap = enclosed_region_mask(model, res, templates.rotations[rot], r_px)
        vs, us = _mask_indices(gap, r_px, v, u, (h, w))
        sel = gt[vs, us] < grasp_depth
    else:
        vs, us = _mask_indices(contact_mask, r_px, v, u, (h, w))
        sel = gt[vs, us] <= grasp_depth - margins.wall_margin_m
    lab = labels[vs[sel], us[sel]]
    ids, counts = np.unique(lab[lab > 0], return_counts=True)
    if int((counts >= margins.min_overlap_px).sum()) >= 2:
        return verdict(Verdict.MULTI_PART, target)

    # --- (4) slip (finger grasps) ----------------------------------------------------
    if kind is not GripperKind.SUCTION:
        vs, us = _mask_indices(contact_mask, r_px, v, u, (h, w))
        csel = (labels[vs, us] == target) & (gt[vs, us] <= grasp_depth - margins.wall_margin_m)
        if not csel.any():
            return verdict(Verdict.SLIP, target)
        incl = _wall_inclinations(gt, vs[csel], us[csel], res)
        if float(incl.min()) > margins.slip_slope_deg:
            return verdict(Verdict.SLIP, target)

    return verdict(Verdict.VALID, target)


def valid_rate(verdicts) -> EvaluationReport:
    """Aggregate verdicts into the valid-grasp-candidate rate report."""
    verdicts = list(verdicts)
    total = len(verdicts)
    non = sum(1 for v in verdicts if v.verdict is not Verdict.VALID)
    rate = None if total == 0 else (1.0 - non / total) * 100.0
    per_class: dict = {}
    for cls in sorted({v.part_class for v in verdicts if v.part_class is not None}):
        sub = [v for v in verdicts if v.part_class == cls]
        per_class[cls] = ClassStats(
            total=len(sub), valid=sum(1 for v in sub if v.verdict is Verdict.VALID)
        )
    hist = Counter(v.verdict for v in verdicts)
    return EvaluationReport(
        total_candidates=total,
        non_graspable=non,
        valid_rate_percent=rate,
        per_class=per_class,
        per_verdict={k: hist.get(k, 0) for k in Verdict},
    )


def _scene_seed(seed: int, part_class: int, scene_index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(part_class, scene_index))
    return int(ss.generate_state(1)[0])


def benchmark_verdicts(
    classes=tuple(range(1, 8)),
    scenes_per_class: int = 5,
    candidates_per_scene: int = 9,
    seed: int = 0,
    params: DetectionParams | None = None,
    margins: ClassificationMargins = ClassificationMargins(),
) -> list[CandidateVerdict]:
    """Per-candidate verdicts of the full benchmark, in the fixed aggregation
    order (class, scene index, candidate rank)."""
    if scenes_per_class < 1 or candidates_per_scene < 1:
        raise ValueError("scenes_per_class and candidates_per_scene must be >= 1")
    base = params or DetectionParams()
    verdicts = []
    for cls in classes:
        if cls not in CLASS_GRIPPERS:
            raise ValueError(f"no gripper assignment for part class {cls}")
        model = CLASS_GRIPPERS[cls]
        spec = PART_CATALOG[cls]
        for s in range(scenes_per_class):
            scene = generate_benchmark(cls, spec.default_count, _scene_seed(seed, cls, s))
            run_params = replace(
                base,
                max_candidates=candidates_per_scene,
                background_depth_m=scene.bin.floor_z,
                max_protrusion_m=base.max_protrusion_m or 0.035,
            )
            n_rot = 1 if model.kind is GripperKind.SUCTION else run_params.n_rotations
            templates = build_templates(
                model,
                scene.rendered.ground_resolution(),
                n_rot,
                contact_depth_band=run_params.contact_band_m,
            )
            cls_margins = replace(margins, n_rotations=n_rot)
            for cand in detect(scene.rendered, model, run_params):
                cv = classify(cand, scene, model, cls_margins, templates=templates)
                verdicts.append(CandidateVerdict(cv.verdict, cv.candidate, cv.part_id, cls))
    return verdicts


def run_benchmark(
    classes=tuple(range(1, 8)),
    scenes_per_class: int = 5,
    candidates_per_scene: int = 9,
    seed: int = 0,
    params: DetectionParams | None = None,
    margins: ClassificationMargins = ClassificationMargins(),
) -> EvaluationReport:
    """Generate scenes per class, detect with the class's assigned gripper,
    classify every candidate against ground truth and aggregate.

    Fully reproducible from the seed. The bin floor depth is handed to the
    detector as the background reference, standing in for an empty-bin
    reference capture.
    """
    return valid_rate(
        benchmark_verdicts(classes, scenes_per_class, candidates_per_scene, seed, params, margins)
    )


def format_report(report: EvaluationReport) -> str:
    """Plain-text table mirroring the per-class rate layout."""
    lines = []
    lines.append(f"{'class':<7}{'part':<16}{'total':>7}{'valid':>7}{'rate_pct':>10}")
    for cls, stats in sorted(report.per_class.items()):
        name = PART_CATALOG[cls].name if cls in PART_CATALOG else "?"
        rate = stats.rate_percent
        rate_s = f"{rate:.1f}" if rate is not None else "n/a"
        lines.append(f"{cls:<7}{name:<16}{stats.total:>7}{stats.valid:>7}{rate_s:>10}")
    rate = report.valid_rate_percent
    rate_s = f"{rate:.1f}" if rate is not None else "n/a"
    lines.append(
        f"{'all':<7}{'':<16}{report.total_candidates:>7}"
        f"{report.total_candidates - report.non_graspable:>7}{rate_s:>10}"
    )
    lines.append("")
    lines.append("verdicts: " + "  ".join(f"{k.value}={v}" for k, v in report.per_verdict.items()))
    return "\n".join(lines)

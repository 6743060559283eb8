"""Graspability scoring on depth maps and 6-DoF grasp pose extraction.

The 4-DoF score of a pixel/rotation pair is the fraction of the gripper's
contact footprint that meets part surface, vetoed by collision and free-space
rules per approach type:

  suction          grasp depth = center depth. Contact = pixels sealing within
                   the depth band. Vetoes: anything poking above the pad seal
                   plane; grasp depth at/behind the background reference (the
                   pad would be on the bin floor).
  two_finger       fingertips descend to center depth + descent. Contact =
                   material standing at least the protrusion margin above the
                   fingertips inside the closing sweep, required on both finger
                   sides. Vetoes: material under the open-finger footprint
                   above fingertip depth + clearance; no free space below
                   fingertip depth inside the sweep.
  two_finger_inner fingertips descend level with the hole bottom (center
                   depth). Contact = walls standing above the fingertips in
                   the outward sweep, required on both finger sides at every
                   rotation (enclosure: a hole surrounds the insertion point,
                   a gap between two parts does not). Veto: material inside
                   the closed-finger insertion footprint above fingertip
                   depth + clearance.

An optional working-depth window (max_protrusion_m) zeroes grasp points whose
center depth lies more than that height above the background reference;
deployed bins bound their part pile height, and this keeps bin-wall tops from
scoring.

The 6-DoF score multiplies a per-pixel viewing-angle weight: zero at or beyond
the threshold angle between the negated view ray and the surface normal,
rising linearly to one when they align. Grasp candidates are score peaks; the
approach vector is the negated surface normal at the peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .depth_io import (
    CameraIntrinsics,
    DepthMap,
    NormalMap,
    deproject,
    estimate_normals,
    viewing_rays,
)
from .gripper_models import GripperKind, GripperModel, GripperTemplateSet, build_templates


class ResolutionMismatchError(Exception):
    """Template raster scale incompatible with the depth map's ground scale."""


@dataclass(frozen=True)
class DetectionParams:
    t_theta_deg: float = 25.0
    min_score: float = 0.15
    max_candidates: int = 10
    nms_radius_px: float = 8.0
    collision_clearance_m: float = 0.002
    min_protrusion_m: float = 0.002
    finger_descent_m: float = 0.005
    contact_band_m: float = 0.003
    n_rotations: int = 8
    smoothing_sigma_px: float = 1.0
    normal_half_window: int = 2
    background_depth_m: float | None = None
    background_percentile: float = 99.0
    max_protrusion_m: float | None = None  # working-depth window above background


@dataclass(frozen=True, eq=False)
class GraspabilityMaps:
    g4: np.ndarray  # (R, H, W) scores in [0, 1], as used downstream
    omega: np.ndarray  # (H, W) viewing-angle weight in [0, 1]
    g6: np.ndarray  # (R, H, W) omega * g4
    theta: np.ndarray  # (H, W) degrees between -viewing ray and surface normal
    t_theta: float  # threshold angle, degrees
    viewing: np.ndarray  # (H, W, 3) unit viewing rays


@dataclass(frozen=True, eq=False)
class GraspCandidate:
    u: int
    v: int
    rotation_index: int
    g4: float
    omega: float
    g6: float
    position: np.ndarray  # camera-frame 3D point
    approach: np.ndarray  # unit vector, negated surface normal
    grasp_z_rotation: float  # radians


def estimate_background_depth(dmap: DepthMap, percentile: float = 99.0) -> float:
    """Background (bin floor) reference depth: robust maximum of valid depths."""
    if not dmap.valid.any():
        raise ValueError("no valid pixels")
    return float(np.percentile(dmap.depth[dmap.valid].astype(np.float64), percentile))


def compute_g4(
    dmap: DepthMap,
    templates: GripperTemplateSet,
    params: DetectionParams = DetectionParams(),
) -> np.ndarray:
    """Per-rotation 4-DoF graspability rasters, values in [0, 1].

    Invalid pixels contribute no contact, no collision and no free space;
    pixels outside the raster behave like invalid ones. Centers with invalid
    depth score 0.
    """
    ground = dmap.ground_resolution()
    if abs(templates.resolution - ground) / ground > 0.05:
        raise ResolutionMismatchError(
            f"template resolution {templates.resolution:.6g} m/px vs map ground "
            f"resolution {ground:.6g} m/px (>5% apart)"
        )

    h, w = dmap.height, dmap.width
    r_px = templates.radius_px
    depth = np.zeros((h + 2 * r_px, w + 2 * r_px), dtype=np.float64)
    valid = np.zeros_like(depth, dtype=bool)
    depth[r_px : r_px + h, r_px : r_px + w] = dmap.depth.astype(np.float64)
    valid[r_px : r_px + h, r_px : r_px + w] = dmap.valid

    center_d = dmap.depth.astype(np.float64)
    center_ok = dmap.valid
    band = templates.contact_depth_band
    clearance = params.collision_clearance_m
    margin = params.min_protrusion_m
    kind = templates.kind

    if kind is GripperKind.SUCTION:
        grasp_d = center_d
    elif kind is GripperKind.TWO_FINGER:
        grasp_d = center_d + params.finger_descent_m
    else:
        grasp_d = center_d

    background = None
    if kind is GripperKind.SUCTION or params.max_protrusion_m is not None:
        background = params.background_depth_m
        if background is None:
            background = estimate_background_depth(dmap, params.background_percentile)

    def window(arr, dy, dx):
        return arr[r_px + dy : r_px + dy + h, r_px + dx : r_px + dx + w]

    out = np.zeros((len(templates.rotations), h, w), dtype=np.float64)
    enclosed = np.ones((h, w), dtype=bool)
    for r, (cmask, xmask) in enumerate(zip(templates.contact_masks, templates.collision_masks)):
        n_contact_total = int(cmask.sum())
        contact = np.zeros((h, w), dtype=np.int64)
        blocked = np.zeros((h, w), dtype=bool)
        free_below = np.zeros((h, w), dtype=bool)
        collide = np.zeros((h, w), dtype=bool)
        touched_pos = np.zeros((h, w), dtype=bool)
        touched_neg = np.zeros((h, w), dtype=bool)

        if kind is GripperKind.SUCTION:
            for dy, dx in np.argwhere(cmask) - r_px:
                wd = window(depth, dy, dx)
                wv = window(valid, dy, dx)
                contact += wv & (np.abs(wd - grasp_d) <= band)
                blocked |= wv & (wd < grasp_d - band)
        else:
            pos_mask, neg_mask = templates.contact_halves[r]
            for half, touched in ((pos_mask, touched_pos), (neg_mask, touched_neg)):
                for dy, dx in np.argwhere(half) - r_px:
                    wd = window(depth, dy, dx)
                    wv = window(valid, dy, dx)
                    hit = wv & (wd <= grasp_d - margin)
                    contact += hit
                    touched |= hit
                    if kind is GripperKind.TWO_FINGER:
                        free_below |= wv & (wd > grasp_d + margin)

        for dy, dx in np.argwhere(xmask) - r_px:
            wd = window(depth, dy, dx)
            wv = window(valid, dy, dx)
            collide |= wv & (wd < grasp_d - clearance)

        score = contact / n_contact_total
        score[~center_ok] = 0.0
        if kind is GripperKind.SUCTION:
            score[blocked] = 0.0
            score[center_d >= background - margin] = 0.0
        elif kind is GripperKind.TWO_FINGER:
            score[collide] = 0.0
            score[~free_below] = 0.0
            score[~(touched_pos & touched_neg)] = 0.0
        else:
            score[collide] = 0.0
            score[~(touched_pos & touched_neg)] = 0.0
            enclosed &= touched_pos & touched_neg
        if params.max_protrusion_m is not None:
            score[center_d < background - params.max_protrusion_m] = 0.0
        out[r] = score
    if kind is GripperKind.TWO_FINGER_INNER:
        out[:, ~enclosed] = 0.0
    return out


def compute_omega(
    normals: NormalMap, intrinsics: CameraIntrinsics, t_theta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Viewing-angle weight and angle rasters.

    theta is the angle in degrees between the negated per-pixel viewing ray
    and the surface normal; omega = 1 - theta/t_theta below the threshold, 0
    at or beyond it and on invalid normals (where theta is NaN).
    """
    if t_theta <= 0:
        raise ValueError("t_theta must be positive")
    rays = viewing_rays(intrinsics)
    ns = normals.normals
    ns_norm = np.linalg.norm(ns, axis=-1)
    rays_norm = np.linalg.norm(rays, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = -(rays * ns).sum(axis=-1) / (rays_norm * ns_norm)
    theta = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    theta[~normals.valid] = np.nan
    omega = np.where(normals.valid & (theta < t_theta), 1.0 - theta / t_theta, 0.0)
    return omega, theta


def compute_g6(g4: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Elementwise product of the per-rotation scores and the angle weight."""
    g4 = np.asarray(g4)
    omega = np.asarray(omega)
    if g4.shape[-2:] != omega.shape:
        raise ValueError(f"shape mismatch: g4 {g4.shape} vs omega {omega.shape}")
    return omega[None, :, :] * g4 if g4.ndim == 3 else omega * g4


def extract_candidates(
    maps: GraspabilityMaps,
    normals: NormalMap,
    dmap: DepthMap,
    max_candidates: int,
    min_score: float,
    nms_radius: float,
    rotations=None,
) -> list[GraspCandidate]:
    """Greedy best-first peak selection with spatial non-maximum suppression.

    Candidates are ordered by descending score; exact ties break by ascending
    (v, u, rotation_index). A candidate suppresses later ones within
    nms_radius pixels (Euclidean, any rotation). Zero-score pixels never
    qualify, independent of min_score.
    """
    if max_candidates < 1:
        raise ValueError("max_candidates must be >= 1")
    g6 = maps.g6
    eligible = (g6 >= min_score) & (g6 > 0) & dmap.valid[None] & normals.valid[None]
    idx = np.argwhere(eligible)
    if idx.size == 0:
        return []
    scores = g6[eligible]
    order = np.lexsort((idx[:, 0], idx[:, 2], idx[:, 1], -scores))
    idx = idx[order]
    scores = scores[order]

    kept: list[int] = []
    kept_pos = np.empty((0, 2), dtype=np.float64)
    for i in range(idx.shape[0]):
        pos = idx[i, 1:3].astype(np.float64)
        if kept_pos.size and (np.linalg.norm(kept_pos - pos, axis=1) <= nms_radius).any():
            continue
        kept.append(i)
        kept_pos = np.vstack([kept_pos, pos[None]])
        if len(kept) >= max_candidates:
            break

    if rotations is None:
        rotations = tuple(range(g6.shape[0]))
    k = dmap.intrinsics
    out = []
    for i in kept:
        r, v, u = (int(x) for x in idx[i])
        n = normals.normals[v, u]
        approach = -n / np.linalg.norm(n)
        d = float(dmap.depth[v, u])
        out.append(
            GraspCandidate(
                u=u,
                v=v,
                rotation_index=r,
                g4=float(maps.g4[r, v, u]),
                omega=float(maps.omega[v, u]),
                g6=float(scores[i]),
                position=deproject(u, v, d, k),
                approach=approach,
                grasp_z_rotation=float(rotations[r]),
            )
        )
    return out


def compute_maps(
    dmap: DepthMap,
    templates: GripperTemplateSet,
    normals: NormalMap,
    params: DetectionParams = DetectionParams(),
) -> GraspabilityMaps:
    """Score rasters as used by detect: raw 4-DoF scores, optional Gaussian
    smoothing, then the angle weighting."""
    g4 = compute_g4(dmap, templates, params)
    if params.smoothing_sigma_px > 0:
        g4 = np.stack(
            [ndimage.gaussian_filter(g4[r], params.smoothing_sigma_px) for r in range(g4.shape[0])]
        )
    omega, theta = compute_omega(normals, dmap.intrinsics, params.t_theta_deg)
    g6 = compute_g6(g4, omega)
    return GraspabilityMaps(
        g4=g4,
        omega=omega,
        g6=g6,
        theta=theta,
        t_theta=params.t_theta_deg,
        viewing=viewing_rays(dmap.intrinsics),
    )


def detect(
    dmap: DepthMap,
    model: GripperModel,
    params: DetectionParams = DetectionParams(),
) -> list[GraspCandidate]:
    """Full pipeline: normals -> templates -> scores -> weight -> candidates.

    Deterministic for fixed inputs and parameters. Returns an empty list when
    the map has no valid pixels or nothing scores above min_score.
    """
    if not dmap.valid.any():
        return []
    normals = estimate_normals(dmap, params.normal_half_window)
    n_rot = 1 if model.kind is GripperKind.SUCTION else params.n_rotations
    templates = build_templates(
        model, dmap.ground_resolution(), n_rot, contact_depth_band=params.contact_band_m
    )
    maps = compute_maps(dmap, templates, normals, params)
    return extract_candidates(
        maps,
        normals,
        dmap,
        params.max_candidates,
        params.min_score,
        params.nms_radius_px,
        rotations=templates.rotations,
    )


# --- parameter config files ----------------------------------------------------

_PARAM_TYPES = {
    "t_theta_deg": float,
    "min_score": float,
    "max_candidates": int,
    "nms_radius_px": float,
    "collision_clearance_m": float,
    "min_protrusion_m": float,
    "finger_descent_m": float,
    "contact_band_m": float,
    "n_rotations": int,
    "smoothing_sigma_px": float,
    "normal_half_window": int,
    "background_depth_m": float,
    "background_percentile": float,
    "max_protrusion_m": float,
}


def load_detection_params(path) -> DetectionParams:
    """Read detection parameters from a key=value text file; absent keys keep
    their defaults."""
    overrides = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _PARAM_TYPES:
                raise ValueError(f"{path}: unknown detection parameter '{key}'")
            overrides[key] = _PARAM_TYPES[key](val.strip())
    return replace(DetectionParams(), **overrides)

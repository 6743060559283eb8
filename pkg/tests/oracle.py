"""Independent per-pixel mask-overlay oracle for the 4-DoF score.

Scores every (pixel, rotation) pair by slicing the depth window under the
template and applying the documented contact/veto rules by direct mask
indexing. Deliberately structured differently from the production
shifted-raster implementation so the two can cross-check bit-exactly.
"""

import numpy as np

from graspkit.gripper_models import GripperKind
from graspkit.graspability import DetectionParams, estimate_background_depth


def brute_force_g4(dmap, templates, params: DetectionParams = DetectionParams()) -> np.ndarray:
    h, w = dmap.height, dmap.width
    r_px = templates.radius_px
    size = 2 * r_px + 1
    kind = templates.kind

    depth = np.zeros((h + 2 * r_px, w + 2 * r_px), dtype=np.float64)
    valid = np.zeros_like(depth, dtype=bool)
    depth[r_px : r_px + h, r_px : r_px + w] = dmap.depth.astype(np.float64)
    valid[r_px : r_px + h, r_px : r_px + w] = dmap.valid

    band = templates.contact_depth_band
    clearance = params.collision_clearance_m
    margin = params.min_protrusion_m

    background = None
    if kind is GripperKind.SUCTION or params.max_protrusion_m is not None:
        background = params.background_depth_m
        if background is None:
            background = estimate_background_depth(dmap, params.background_percentile)

    n_rot = len(templates.rotations)
    out = np.zeros((n_rot, h, w))
    enclosed = np.ones((h, w), dtype=bool)  # inner grasps: both sides at every rotation

    for r in range(n_rot):
        cmask = templates.contact_masks[r]
        xmask = templates.collision_masks[r]
        n_total = int(cmask.sum())
        halves = templates.contact_halves[r] if kind is not GripperKind.SUCTION else None

        for v in range(h):
            for u in range(w):
                if not dmap.valid[v, u]:
                    continue
                cd = float(dmap.depth[v, u])
                gd = cd + params.finger_descent_m if kind is GripperKind.TWO_FINGER else cd
                win_d = depth[v : v + size, u : u + size]
                win_v = valid[v : v + size, u : u + size]

                if kind is GripperKind.SUCTION:
                    seal = win_v[cmask] & (np.abs(win_d[cmask] - gd) <= band)
                    score = int(np.count_nonzero(seal)) / n_total
                    if np.any(win_v[cmask] & (win_d[cmask] < gd - band)):
                        score = 0.0
                    if cd >= background - margin:
                        score = 0.0
                else:
                    pos, neg = halves
                    hit_pos = win_v[pos] & (win_d[pos] <= gd - margin)
                    hit_neg = win_v[neg] & (win_d[neg] <= gd - margin)
                    both = bool(hit_pos.any()) and bool(hit_neg.any())
                    score = (int(np.count_nonzero(hit_pos)) + int(np.count_nonzero(hit_neg))) / n_total
                    if np.any(win_v[xmask] & (win_d[xmask] < gd - clearance)):
                        score = 0.0
                    if not both:
                        score = 0.0
                        if kind is GripperKind.TWO_FINGER_INNER:
                            enclosed[v, u] = False
                    if kind is GripperKind.TWO_FINGER:
                        if not np.any(win_v[cmask] & (win_d[cmask] > gd + margin)):
                            score = 0.0
                if params.max_protrusion_m is not None and cd < background - params.max_protrusion_m:
                    score = 0.0
                out[r, v, u] = score

    if kind is GripperKind.TWO_FINGER_INNER:
        out[:, ~enclosed] = 0.0
    return out

"""Gripper approach types and their rasterized footprint templates.

Three approach types are supported:
  * suction       — a pad pressed onto the surface at the grasp point
  * two_finger    — fingers descend open around the point and close inward
  * two_finger_inner — fingers descend closed into a hole and open outward

Each template rotation carries two disjoint binary masks centered on the
grasp pixel: contact_mask (where part surface is expected to meet the
gripper) and collision_mask (where the gripper body descends and must not
meet material above the grasp depth).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class GripperConfigError(Exception):
    """Invalid gripper description or config file."""


class GripperKind(enum.Enum):
    SUCTION = "suction"
    TWO_FINGER = "two_finger"
    TWO_FINGER_INNER = "two_finger_inner"


@dataclass(frozen=True)
class GripperModel:
    kind: GripperKind
    pad_radius: float = 0.0045
    opening_width: float = 0.018
    finger_width: float = 0.010
    finger_thickness: float = 0.004
    closing_stroke: float = 0.008

    def __post_init__(self):
        if self.kind is GripperKind.SUCTION:
            if self.pad_radius <= 0:
                raise GripperConfigError("pad_radius must be positive")
            return
        for name in ("opening_width", "finger_width", "finger_thickness", "closing_stroke"):
            if getattr(self, name) <= 0:
                raise GripperConfigError(f"{name} must be positive")
        if self.kind is GripperKind.TWO_FINGER and self.closing_stroke >= self.opening_width:
            raise GripperConfigError("closing_stroke must be smaller than opening_width")
        # two_finger_inner: opening_width is the closed span; the stroke expands it


@dataclass(frozen=True, eq=False)
class GripperTemplateSet:
    resolution: float  # meters per pixel
    rotations: tuple  # z-axis angles, radians
    contact_masks: tuple  # per rotation, odd-sized bool raster
    collision_masks: tuple  # per rotation, same shape, disjoint from contact
    contact_depth_band: float  # vertical tolerance for surface contact, meters
    kind: GripperKind = GripperKind.SUCTION
    # finger kinds: contact mask split by finger (positive/negative closing
    # axis); a grasp needs contact on both sides
    contact_halves: tuple = ()

    @property
    def radius_px(self) -> int:
        return self.contact_masks[0].shape[0] // 2


def _pixel_grid(radius_px: int, resolution: float):
    """Metric (x, y) coordinates of pixel centers of an odd-sized template."""
    coords = np.arange(-radius_px, radius_px + 1, dtype=np.float64) * resolution
    x = np.broadcast_to(coords[None, :], (coords.size, coords.size))
    y = np.broadcast_to(coords[:, None], (coords.size, coords.size))
    return x, y


def _finger_band_masks(model: GripperModel, x, y):
    """Per-rotation-0 masks for finger grippers; closing axis along +x/-x.

    Returns (sweep, body): sweep is the area fingertips pass over while the
    gap changes, body is the finger footprint at the descent position.
    """
    half_w = model.finger_width / 2.0
    in_width = np.abs(y) < half_w
    ax = np.abs(x)
    if model.kind is GripperKind.TWO_FINGER:
        open_half = model.opening_width / 2.0
        closed_half = (model.opening_width - model.closing_stroke) / 2.0
        sweep = in_width & (ax >= closed_half) & (ax < open_half)
        body = in_width & (ax >= open_half) & (ax < open_half + model.finger_thickness)
    else:  # TWO_FINGER_INNER
        closed_half = model.opening_width / 2.0
        open_half = closed_half + model.closing_stroke / 2.0
        sweep = in_width & (ax >= closed_half) & (ax < open_half)
        body = in_width & (ax < closed_half)
    return sweep, body


def build_templates(
    model: GripperModel,
    resolution: float,
    n_rotations: int = 8,
    contact_depth_band: float = 0.003,
) -> GripperTemplateSet:
    """Rasterize a gripper into per-rotation contact/collision masks.

    Suction is rotationally symmetric and always gets a single rotation.
    Finger grippers get n_rotations equally spaced over [0, pi); masks are
    produced by testing pixel centers against the analytically rotated
    geometry, so no resampling artifacts accumulate between rotations.
    """
    if resolution <= 0:
        raise GripperConfigError("resolution must be positive")
    if n_rotations < 1:
        raise GripperConfigError("n_rotations must be >= 1")

    if model.kind is GripperKind.SUCTION:
        radius_px = int(math.ceil(model.pad_radius / resolution))
        x, y = _pixel_grid(radius_px, resolution)
        contact = x * x + y * y <= model.pad_radius * model.pad_radius
        if not contact.any():
            raise GripperConfigError("resolution too coarse: suction pad rasterizes to nothing")
        collision = np.zeros_like(contact)
        return GripperTemplateSet(
            resolution=resolution,
            rotations=(0.0,),
            contact_masks=(contact,),
            collision_masks=(collision,),
            contact_depth_band=contact_depth_band,
            kind=model.kind,
        )

    if model.kind is GripperKind.TWO_FINGER:
        reach = model.opening_width / 2.0 + model.finger_thickness
    else:
        reach = (model.opening_width + model.closing_stroke) / 2.0
    reach = max(reach, model.finger_width / 2.0)
    radius_px = int(math.ceil(reach / resolution))
    x, y = _pixel_grid(radius_px, resolution)

    angles = tuple(i * math.pi / n_rotations for i in range(n_rotations))
    contact_masks, collision_masks, halves = [], [], []
    for phi in angles:
        c, s = math.cos(phi), math.sin(phi)
        # rotate pixel coordinates back into the gripper frame
        xr = c * x + s * y
        yr = -s * x + c * y
        sweep, body = _finger_band_masks(model, xr, yr)
        if not sweep.any() or not body.any():
            raise GripperConfigError("resolution too coarse: finger masks rasterize to nothing")
        pos = sweep & (xr > 0)
        neg = sweep & (xr < 0)
        if not pos.any() or not neg.any():
            raise GripperConfigError("resolution too coarse: a finger sweep rasterizes to nothing")
        contact_masks.append(sweep)
        collision_masks.append(body)
        halves.append((pos, neg))
    return GripperTemplateSet(
        resolution=resolution,
        rotations=angles,
        contact_masks=tuple(contact_masks),
        collision_masks=tuple(collision_masks),
        contact_depth_band=contact_depth_band,
        kind=model.kind,
        contact_halves=tuple(halves),
    )


def enclosed_region_mask(
    model: GripperModel, resolution: float, angle: float, radius_px: int
) -> np.ndarray:
    """Region enclosed between two fingers as they close (two_finger only);
    used by ground-truth verdicts to detect multi-part grasps."""
    if model.kind is not GripperKind.TWO_FINGER:
        raise GripperConfigError("enclosed region is defined for two_finger grippers only")
    x, y = _pixel_grid(radius_px, resolution)
    c, s = math.cos(angle), math.sin(angle)
    xr = c * x + s * y
    yr = -s * x + c * y
    return (np.abs(xr) < model.opening_width / 2.0) & (np.abs(yr) < model.finger_width / 2.0)


# --- config files ------------------------------------------------------------

_FLOAT_KEYS = ("pad_radius", "opening_width", "finger_width", "finger_thickness", "closing_stroke")


def load_gripper_config(path) -> GripperModel:
    """Read a gripper description from a key=value text file."""
    values = {}
    try:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
    except OSError as e:
        raise GripperConfigError(f"cannot read gripper config {path}: {e}") from e
    if "kind" not in values:
        raise GripperConfigError(f"{path}: missing 'kind'")
    try:
        kind = GripperKind(values.pop("kind"))
    except ValueError:
        raise GripperConfigError(
            f"{path}: kind must be one of {[k.value for k in GripperKind]}"
        ) from None
    kwargs = {}
    for key, val in values.items():
        if key not in _FLOAT_KEYS:
            raise GripperConfigError(f"{path}: unknown key '{key}'")
        try:
            kwargs[key] = float(val)
        except ValueError:
            raise GripperConfigError(f"{path}: bad value for '{key}'") from None
    return GripperModel(kind=kind, **kwargs)


def save_gripper_config(model: GripperModel, path) -> None:
    lines = [f"kind={model.kind.value}"]
    if model.kind is GripperKind.SUCTION:
        lines.append(f"pad_radius={model.pad_radius!r}")
    else:
        for key in ("opening_width", "finger_width", "finger_thickness", "closing_stroke"):
            lines.append(f"{key}={getattr(model, key)!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")

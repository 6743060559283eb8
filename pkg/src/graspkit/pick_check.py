"""Pick-success checks for the three end effectors.

Suction is judged by vacuum gauge pressure, parallel grippers by their
opening width after re-closing, and the compliant pincer by the mean red
value of a wrist-camera view against a red backdrop. All thresholds use
strict inequalities: exactly at the threshold counts as not picked.

The redness check direction is configurable. With a red backdrop, an empty
gripper shows more background and a higher mean red value, so the default
reports "picked" when the mean falls BELOW the threshold. Sensor setups that
behave the other way around can flip picked_when.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PickCheckError(Exception):
    """Invalid check configuration or image input."""


@dataclass(frozen=True)
class PressureReading:
    gauge_pressure: float  # kPa relative to ambient; negative = vacuum

    def __post_init__(self):
        if not np.isfinite(self.gauge_pressure):
            raise ValueError("pressure must be finite")


class PickedWhen(enum.Enum):
    ABOVE = "above"
    BELOW = "below"


@dataclass(frozen=True)
class RednessCheckConfig:
    roi: tuple  # (u0, v0, width, height) pixels
    r_threshold: float
    picked_when: PickedWhen = PickedWhen.BELOW

    def __post_init__(self):
        u0, v0, rw, rh = self.roi
        if rw <= 0 or rh <= 0:
            raise PickCheckError("ROI must be non-empty")
        if u0 < 0 or v0 < 0:
            raise PickCheckError("ROI origin must be non-negative")
        if not (0 <= self.r_threshold <= 255):
            raise PickCheckError("r_threshold must be in [0, 255]")


def suction_picked(p: PressureReading, threshold_kpa: float = -55.0) -> bool:
    """True iff gauge pressure is strictly below the vacuum threshold."""
    return p.gauge_pressure < threshold_kpa


def width_picked(
    width_after_close: float, fully_closed_width: float, tolerance: float
) -> bool:
    """True iff the gripper stopped strictly more than tolerance short of
    fully closed, i.e. something is between the fingers."""
    if width_after_close < 0 or fully_closed_width < 0:
        raise ValueError("widths must be >= 0")
    return width_after_close > fully_closed_width + tolerance


def redness_picked(image: np.ndarray, config: RednessCheckConfig) -> tuple[bool, float]:
    """Mean red value over the ROI and the resulting picked decision."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] < 3:
        raise PickCheckError("image must be an RGB raster (H, W, 3)")
    u0, v0, rw, rh = config.roi
    if v0 + rh > image.shape[0] or u0 + rw > image.shape[1]:
        raise PickCheckError("ROI outside image bounds")
    r_mean = float(image[v0 : v0 + rh, u0 : u0 + rw, 0].astype(np.float64).mean())
    if config.picked_when is PickedWhen.ABOVE:
        return r_mean > config.r_threshold, r_mean
    return r_mean < config.r_threshold, r_mean


def load_ppm(path) -> np.ndarray:
    """Binary PPM (P6, maxval 255) to an (H, W, 3) uint8 array."""
    try:
        with open(path, "rb") as f:
            magic = f.readline().strip()
            if magic != b"P6":
                raise PickCheckError(f"{path}: not a binary PPM (P6)")
            fields = []
            while len(fields) < 3:
                line = f.readline()
                if not line:
                    raise PickCheckError(f"{path}: truncated header")
                text = line.split(b"#", 1)[0]
                fields.extend(text.split())
            width, height, maxval = (int(x) for x in fields[:3])
            if maxval != 255:
                raise PickCheckError(f"{path}: only maxval 255 supported")
            buf = f.read(3 * width * height)
            if len(buf) != 3 * width * height:
                raise PickCheckError(f"{path}: truncated pixel data")
    except OSError as e:
        raise PickCheckError(f"cannot read {path}: {e}") from e
    return np.frombuffer(buf, dtype=np.uint8).reshape(height, width, 3)


def save_ppm(image: np.ndarray, path) -> None:
    image = np.asarray(image, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode())
        f.write(image.tobytes())

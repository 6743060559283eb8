"""Metric depth rasters: PFM file I/O, pinhole geometry, surface normals.

Conventions used across the toolkit:
  * depth is z-depth (range along the optical axis), meters, float32 raster
  * pixel (u, v) = (column, row); rasters are indexed [v, u]
  * invalid pixels carry an explicit boolean mask in memory and are stored
    as 0.0 in files
  * the camera looks along +z; normals of visible surfaces have n_z < 0
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class DepthIOError(Exception):
    """Malformed depth file or intrinsics sidecar."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the raster")


@dataclass(frozen=True, eq=False)
class DepthMap:
    width: int
    height: int
    depth: np.ndarray
    valid: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float32)
        valid = np.asarray(self.valid, dtype=bool)
        if depth.shape != (self.height, self.width) or valid.shape != depth.shape:
            raise ValueError("depth/valid raster shape must match width x height")
        if (self.intrinsics.width, self.intrinsics.height) != (self.width, self.height):
            raise ValueError("intrinsics size must equal raster size")
        if valid.any():
            d = depth[valid]
            if not (np.all(np.isfinite(d)) and np.all(d > 0)):
                raise ValueError("valid depths must be finite and positive")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid", valid)

    @staticmethod
    def from_raw(depth: np.ndarray, intrinsics: CameraIntrinsics) -> "DepthMap":
        """Build a DepthMap from a raw raster; non-finite or <= 0 samples become invalid."""
        depth = np.asarray(depth, dtype=np.float32)
        valid = np.isfinite(depth) & (depth > 0)
        clean = np.where(valid, depth, np.float32(0.0))
        return DepthMap(depth.shape[1], depth.shape[0], clean, valid, intrinsics)

    def median_depth(self) -> float:
        if not self.valid.any():
            raise ValueError("no valid pixels")
        return float(np.median(self.depth[self.valid]))

    def ground_resolution(self) -> float:
        """Meters per pixel at the median scene depth."""
        k = self.intrinsics
        return self.median_depth() * 0.5 * (1.0 / k.fx + 1.0 / k.fy)


@dataclass(frozen=True, eq=False)
class NormalMap:
    normals: np.ndarray  # (H, W, 3) unit vectors, camera frame, n_z < 0 where valid
    valid: np.ndarray  # (H, W) bool


# --- intrinsics sidecar ------------------------------------------------------

_INTR_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def save_intrinsics(k: CameraIntrinsics, path) -> None:
    lines = [
        f"fx={float(k.fx)!r}",
        f"fy={float(k.fy)!r}",
        f"cx={float(k.cx)!r}",
        f"cy={float(k.cy)!r}",
        f"width={int(k.width)}",
        f"height={int(k.height)}",
    ]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_intrinsics(path) -> CameraIntrinsics:
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
        raise DepthIOError(f"cannot read intrinsics file {path}: {e}") from e
    missing = [k for k in _INTR_KEYS if k not in values]
    if missing:
        raise DepthIOError(f"intrinsics file {path} missing keys: {', '.join(missing)}")
    try:
        return CameraIntrinsics(
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            width=int(values["width"]),
            height=int(values["height"]),
        )
    except ValueError as e:
        raise DepthIOError(f"bad intrinsics values in {path}: {e}") from e


def _default_intrinsics_path(pfm_path: str) -> str:
    stem, _ = os.path.splitext(str(pfm_path))
    sidecar = stem + ".intrinsics.txt"
    if os.path.exists(sidecar):
        return sidecar
    return os.path.join(os.path.dirname(str(pfm_path)), "intrinsics.txt")


# --- PFM ---------------------------------------------------------------------


def save_pfm(dmap: DepthMap, path, intrinsics_path=None) -> None:
    """Write a grayscale PFM (little-endian, bottom-to-top rows) plus its
    intrinsics sidecar. Invalid pixels are stored as 0.0."""
    data = np.where(dmap.valid, dmap.depth, np.float32(0.0)).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{dmap.width} {dmap.height}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(data).tobytes())
    if intrinsics_path is None:
        stem, _ = os.path.splitext(str(path))
        intrinsics_path = stem + ".intrinsics.txt"
    save_intrinsics(dmap.intrinsics, intrinsics_path)


def load_pfm(path, intrinsics_path=None) -> DepthMap:
    """Read a grayscale PFM and its intrinsics sidecar into a DepthMap.

    Non-positive or non-finite samples become invalid pixels. Color (PF)
    files are rejected.
    """
    try:
        with open(path, "rb") as f:
            magic = f.readline().strip()
            if magic == b"PF":
                raise DepthIOError(f"{path}: unsupported channel count (color PFM)")
            if magic != b"Pf":
                raise DepthIOError(f"{path}: not a PFM file (bad magic {magic!r})")
            dims = f.readline().split()
            if len(dims) != 2:
                raise DepthIOError(f"{path}: malformed dimensions line")
            try:
                width, height = int(dims[0]), int(dims[1])
            except ValueError:
                raise DepthIOError(f"{path}: malformed dimensions line") from None
            if width <= 0 or height <= 0:
                raise DepthIOError(f"{path}: non-positive raster size")
            try:
                scale = float(f.readline().strip())
            except ValueError:
                raise DepthIOError(f"{path}: malformed scale line") from None
            count = width * height
            buf = f.read(4 * count)
            if len(buf) != 4 * count:
                raise DepthIOError(f"{path}: truncated pixel data")
            dtype = "<f4" if scale < 0 else ">f4"
            data = np.frombuffer(buf, dtype=dtype).reshape(height, width)
            data = np.flipud(data).astype(np.float32)
    except OSError as e:
        raise DepthIOError(f"cannot read {path}: {e}") from e
    if intrinsics_path is None:
        intrinsics_path = _default_intrinsics_path(path)
    k = load_intrinsics(intrinsics_path)
    if (k.width, k.height) != (width, height):
        raise DepthIOError(
            f"{path}: raster {width}x{height} does not match intrinsics "
            f"{k.width}x{k.height}"
        )
    return DepthMap.from_raw(data, k)


# --- pinhole geometry --------------------------------------------------------


def deproject(u: float, v: float, d: float, k: CameraIntrinsics) -> np.ndarray:
    """Pixel (u, v) at z-depth d to a camera-frame 3D point."""
    return np.array([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d])


def project(point, k: CameraIntrinsics) -> tuple[float, float, float]:
    """Camera-frame point to (u, v, d); analytic inverse of deproject."""
    x, y, z = np.asarray(point, dtype=np.float64)
    return (x * k.fx / z + k.cx, y * k.fy / z + k.cy, z)


def viewing_rays(k: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) unit rays from the camera center through each pixel, into the scene."""
    us = np.arange(k.width, dtype=np.float64)
    vs = np.arange(k.height, dtype=np.float64)
    x = (us[None, :] - k.cx) / k.fx
    y = (vs[:, None] - k.cy) / k.fy
    rays = np.stack([np.broadcast_to(x, (k.height, k.width)),
                     np.broadcast_to(y, (k.height, k.width)),
                     np.ones((k.height, k.width))], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


# --- surface normals ---------------------------------------------------------


def estimate_normals(dmap: DepthMap, half_window: int = 2) -> NormalMap:
    """Per-pixel least-squares plane fit over a (2*half_window+1)^2 window.

    Neighborhood points use lateral offsets (j*z/fx, i*z/fy) relative to the
    window center, which makes the result exactly equivariant under whole-pixel
    shifts of the raster content. A pixel gets a normal when it is valid and
    has at least 6 valid neighbors in the window; normals are unit length and
    oriented toward the camera (n_z < 0).
    """
    if half_window < 1:
        raise ValueError("half_window must be >= 1")
    k = dmap.intrinsics
    h, w = dmap.height, dmap.width
    m = dmap.valid.astype(np.float64)
    z = dmap.depth.astype(np.float64) * m
    if not dmap.valid.any():
        return NormalMap(np.zeros((h, w, 3)), np.zeros((h, w), dtype=bool))
    z_ref = float(np.median(dmap.depth[dmap.valid]))
    zs = (dmap.depth.astype(np.float64) - z_ref) * m  # shifted depth, stabilizes sums

    size = 2 * half_window + 1
    idx = np.arange(-half_window, half_window + 1, dtype=np.float64)
    ki = np.broadcast_to(idx[:, None], (size, size))  # row offsets
    kj = np.broadcast_to(idx[None, :], (size, size))  # column offsets

    def corr(arr, kernel):
        return ndimage.correlate(arr, kernel, mode="constant", cval=0.0)

    ones = np.ones((size, size))
    z2 = z * z
    zzs = z * zs
    zs2 = zs * zs

    n = corr(m, ones)
    sx = corr(z, kj) / k.fx
    sy = corr(z, ki) / k.fy
    sz = corr(zs, ones)
    sxx = corr(z2, kj * kj) / (k.fx * k.fx)
    syy = corr(z2, ki * ki) / (k.fy * k.fy)
    szz = corr(zs2, ones)
    sxy = corr(z2, ki * kj) / (k.fx * k.fy)
    sxz = corr(zzs, kj) / k.fx
    syz = corr(zzs, ki) / k.fy

    ok = dmap.valid & (n >= 7)  # center plus at least 6 valid neighbors
    normals = np.zeros((h, w, 3))
    if ok.any():
        nn = n[ok]
        scat = np.empty((nn.size, 3, 3))
        scat[:, 0, 0] = sxx[ok] - sx[ok] * sx[ok] / nn
        scat[:, 1, 1] = syy[ok] - sy[ok] * sy[ok] / nn
        scat[:, 2, 2] = szz[ok] - sz[ok] * sz[ok] / nn
        scat[:, 0, 1] = scat[:, 1, 0] = sxy[ok] - sx[ok] * sy[ok] / nn
        scat[:, 0, 2] = scat[:, 2, 0] = sxz[ok] - sx[ok] * sz[ok] / nn
        scat[:, 1, 2] = scat[:, 2, 1] = syz[ok] - sy[ok] * sz[ok] / nn
        _, vecs = np.linalg.eigh(scat)
        nrm = vecs[:, :, 0]  # eigenvector of the smallest eigenvalue
        nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
        flip = nrm[:, 2] > 0
        nrm[flip] = -nrm[flip]
        degenerate = nrm[:, 2] == 0  # edge-on fit, orientation undefined
        normals[ok] = nrm
        ok_flat = np.zeros(ok.sum(), dtype=bool)
        ok_flat[:] = ~degenerate
        updated = ok.copy()
        updated[ok] = ok_flat
        ok = updated
    normals[~ok] = 0.0
    return NormalMap(normals, ok)

"""Synthetic bin scenes: analytic ray-cast rendering with ground-truth labels.

Scenes are built from four primitive shapes posed inside an open-top bin and
rendered into a z-depth raster plus a per-pixel part-id label map (0 = floor,
bin walls and background). Analytic surface normals of the winning surface
are kept in memory for oracle checks. All generation is reproducible from
(seed, parameters).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .depth_io import CameraIntrinsics, DepthMap, save_pfm, load_pfm
from .transforms import RigidTransform, quat_from_axis_angle

_EPS = 1e-9


class SceneError(Exception):
    """Invalid scene description or failed generation."""


class PlacementError(SceneError):
    """Rejection sampling could not place all parts (bin too full)."""


class Shape(enum.Enum):
    CYLINDER = "cylinder"
    ANNULUS = "annulus"
    CUBOID = "cuboid"
    SPHERE = "sphere"


# dims per shape:
#   cylinder: (radius, height)         annulus: (outer_radius, inner_radius, height)
#   cuboid:   (size_x, size_y, size_z) sphere:  (radius,)
_DIM_COUNT = {Shape.CYLINDER: 2, Shape.ANNULUS: 3, Shape.CUBOID: 3, Shape.SPHERE: 1}


@dataclass(frozen=True, eq=False)
class Primitive:
    shape: Shape
    dimensions: tuple
    pose: RigidTransform  # part frame -> camera frame
    part_id: int
    part_class: int

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != _DIM_COUNT[self.shape]:
            raise SceneError(
                f"{self.shape.value} needs {_DIM_COUNT[self.shape]} dimensions, got {len(dims)}"
            )
        if any(d <= 0 for d in dims):
            raise SceneError("dimensions must be positive")
        if self.shape is Shape.ANNULUS and dims[1] >= dims[0]:
            raise SceneError("annulus inner radius must be smaller than outer radius")
        object.__setattr__(self, "dimensions", dims)

    def circumradius(self) -> float:
        """Radius of the bounding sphere, for placement checks."""
        d = self.dimensions
        if self.shape is Shape.SPHERE:
            return d[0]
        if self.shape is Shape.CYLINDER:
            return float(np.hypot(d[0], d[1] / 2))
        if self.shape is Shape.ANNULUS:
            return float(np.hypot(d[0], d[2] / 2))
        return float(np.linalg.norm(d) / 2)

    def planar_circumradius(self) -> float:
        """Radius of the xy-footprint circle for parts resting upright."""
        d = self.dimensions
        if self.shape is Shape.SPHERE:
            return d[0]
        if self.shape is Shape.CUBOID:
            return float(np.hypot(d[0] / 2, d[1] / 2))
        return d[0]


@dataclass(frozen=True)
class BinModel:
    """Open-top bin: floor plane plus four walls, axis-aligned in camera x/y."""

    inner_x: float = 0.20
    inner_y: float = 0.16
    wall_height: float = 0.04
    wall_thickness: float = 0.008
    floor_z: float = 0.80
    center_x: float = 0.0
    center_y: float = 0.0

    def __post_init__(self):
        if min(self.inner_x, self.inner_y, self.wall_height, self.wall_thickness) <= 0:
            raise SceneError("degenerate bin dimensions")
        if self.floor_z <= 0:
            raise SceneError("bin floor must be in front of the camera")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    primitives: tuple
    bin: BinModel
    rendered: DepthMap
    labels: np.ndarray  # (H, W) int32, 0 = floor/bin
    noise_seed: int | None = None
    clean_depth: np.ndarray | None = None  # pre-noise z raster
    gt_normals: np.ndarray | None = None  # analytic normals of visible surfaces


def default_intrinsics(width: int = 288, height: int = 240, focal: float = 1000.0) -> CameraIntrinsics:
    """Camera looking straight down from ~0.8 m, sized to frame the default bin."""
    return CameraIntrinsics(
        fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )


# --- ray casting ---------------------------------------------------------------


def _ray_dirs(k: CameraIntrinsics) -> np.ndarray:
    us = np.arange(k.width, dtype=np.float64)
    vs = np.arange(k.height, dtype=np.float64)
    x = np.broadcast_to(((us - k.cx) / k.fx)[None, :], (k.height, k.width))
    y = np.broadcast_to(((vs - k.cy) / k.fy)[:, None], (k.height, k.width))
    return np.stack([x, y, np.ones((k.height, k.width))], axis=-1)


def _point_at(o, t, d):
    """Ray points at parameter t; non-finite t gives a dummy point (masked later)."""
    tt = np.where(np.isfinite(t), t, 0.0)
    return o[None, None, :] + tt[..., None] * d


def _cast_sphere(o, d, radius):
    a = np.einsum("...i,...i->...", d, d)
    b = 2.0 * np.einsum("i,...i->...", o, d)
    c = float(o @ o) - radius * radius
    disc = b * b - 4 * a * c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t = (-b - sq) / (2 * a)
    t = np.where(hit & (t > _EPS), t, np.inf)
    n = _point_at(o, t, d) / radius
    return t, n


def _cast_caps(o, d, half_h, rho_min, rho_max):
    """Intersections with the z=±half_h cap annuli (rho_min may be 0)."""
    dz = d[..., 2]
    ts, ns = [], []
    for sign in (-1.0, 1.0):
        zc = sign * half_h
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zc - o[2]) / dz
        t = np.where(np.isfinite(t), t, np.inf)
        p = _point_at(o, t, d)
        rho2 = p[..., 0] ** 2 + p[..., 1] ** 2
        ok = (t > _EPS) & np.isfinite(t) & (rho2 <= rho_max**2) & (rho2 >= rho_min**2)
        t = np.where(ok, t, np.inf)
        n = np.zeros_like(p)
        n[..., 2] = sign
        ts.append(t)
        ns.append(n)
    return ts, ns


def _cast_tube(o, d, radius, half_h, inner: bool):
    """Roots on the infinite cylinder rho=radius restricted to |z|<=half_h.

    Returns the smaller valid root for an outer wall; for an inner wall both
    roots are candidates (the far root is the visible one down a hole) and
    the z-buffer min picks correctly.
    """
    a = d[..., 0] ** 2 + d[..., 1] ** 2
    b = 2.0 * (o[0] * d[..., 0] + o[1] * d[..., 1])
    c = o[0] ** 2 + o[1] ** 2 - radius * radius
    disc = b * b - 4 * a * c
    hit = (disc >= 0) & (a > _EPS)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    ts = []
    for sign in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b + sign * sq) / (2 * a)
        t = np.where(np.isfinite(t), t, np.inf)
        p = _point_at(o, t, d)
        ok = hit & (t > _EPS) & np.isfinite(t) & (np.abs(p[..., 2]) <= half_h)
        ts.append(np.where(ok, t, np.inf))
    out = []
    for t in ts:
        p = _point_at(o, t, d)
        n = np.zeros_like(p)
        n[..., 0] = p[..., 0] / radius
        n[..., 1] = p[..., 1] / radius
        if inner:
            n = -n
        out.append((t, n))
    return out


def _cast_cuboid(o, d, sx, sy, sz):
    h = np.array([sx / 2, sy / 2, sz / 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-h[None, None, :] - o[None, None, :]) / d
        t2 = (h[None, None, :] - o[None, None, :]) / d
    tnear = np.minimum(t1, t2)
    tfar = np.maximum(t1, t2)
    # axes the ray is parallel to: inside-slab check instead of root
    par = np.abs(d) < _EPS
    inside = np.abs(np.broadcast_to(o, d.shape)) <= h[None, None, :]
    tnear = np.where(par, np.where(inside, -np.inf, np.inf), tnear)
    tfar = np.where(par, np.where(inside, np.inf, -np.inf), tfar)
    tmin = tnear.max(axis=-1)
    tmax = tfar.min(axis=-1)
    hit = (tmax >= tmin) & (tmin > _EPS)
    t = np.where(hit, tmin, np.inf)
    axis = np.argmax(tnear, axis=-1)
    n = np.zeros_like(d)
    rows = np.arange(d.shape[0])[:, None]
    cols = np.arange(d.shape[1])[None, :]
    n[rows, cols, axis] = -np.sign(np.take_along_axis(d, axis[..., None], axis=-1))[..., 0]
    return t, n


def _cast_primitive(prim: Primitive, dirs: np.ndarray):
    """Smallest positive ray parameter (== z-depth) and camera-frame normal."""
    inv = prim.pose.inverse()
    o = inv.translation
    rot = inv.rotation_matrix()
    d = dirs @ rot.T

    cands = []
    dims = prim.dimensions
    if prim.shape is Shape.SPHERE:
        cands.append(_cast_sphere(o, d, dims[0]))
    elif prim.shape is Shape.CUBOID:
        cands.append(_cast_cuboid(o, d, *dims))
    elif prim.shape is Shape.CYLINDER:
        radius, height = dims
        cands.extend(_cast_tube(o, d, radius, height / 2, inner=False)[:1])
        ts, ns = _cast_caps(o, d, height / 2, 0.0, radius)
        cands.extend(zip(ts, ns))
    else:  # ANNULUS
        r_out, r_in, height = dims
        cands.extend(_cast_tube(o, d, r_out, height / 2, inner=False)[:1])
        cands.extend(_cast_tube(o, d, r_in, height / 2, inner=True))
        ts, ns = _cast_caps(o, d, height / 2, r_in, r_out)
        cands.extend(zip(ts, ns))

    t = np.full(d.shape[:2], np.inf)
    n = np.zeros_like(d)
    for tc, nc in cands:
        closer = tc < t
        t = np.where(closer, tc, t)
        n = np.where(closer[..., None], nc, n)
    R = prim.pose.rotation_matrix()
    return t, n @ R.T


def _bin_walls(bin_model: BinModel):
    hx, hy = bin_model.inner_x / 2, bin_model.inner_y / 2
    wt, wh = bin_model.wall_thickness, bin_model.wall_height
    cz = bin_model.floor_z - wh / 2
    cx, cy = bin_model.center_x, bin_model.center_y
    span_x = bin_model.inner_x + 2 * wt
    walls = [
        ((cx - hx - wt / 2, cy, cz), (wt, bin_model.inner_y, wh)),
        ((cx + hx + wt / 2, cy, cz), (wt, bin_model.inner_y, wh)),
        ((cx, cy - hy - wt / 2, cz), (span_x, wt, wh)),
        ((cx, cy + hy + wt / 2, cz), (span_x, wt, wh)),
    ]
    return [
        Primitive(Shape.CUBOID, size, RigidTransform(translation=np.array(center)), -1 - i, 0)
        for i, (center, size) in enumerate(walls)
    ]


def render(primitives, bin_model: BinModel, intrinsics: CameraIntrinsics) -> SyntheticScene:
    """Z-buffer render of primitives, bin walls and floor into depth + labels."""
    if intrinsics.width <= 0 or intrinsics.height <= 0:
        raise SceneError("empty intrinsics")
    primitives = tuple(primitives)
    ids = [p.part_id for p in primitives]
    if len(set(ids)) != len(ids):
        raise SceneError("part_id values must be unique within a scene")
    for p in primitives:
        if p.pose.translation[2] - p.circumradius() > bin_model.floor_z + 1e-6:
            raise SceneError(f"part {p.part_id} lies below the bin floor")

    dirs = _ray_dirs(intrinsics)
    h, w = intrinsics.height, intrinsics.width

    # floor plane z = floor_z; rays all have dz == 1, so t == z-depth
    depth = np.full((h, w), bin_model.floor_z)
    labels = np.zeros((h, w), dtype=np.int32)
    normals = np.zeros((h, w, 3))
    normals[..., 2] = -1.0

    for prim in list(_bin_walls(bin_model)) + list(primitives):
        t, n = _cast_primitive(prim, dirs)
        closer = t < depth
        depth = np.where(closer, t, depth)
        label_value = prim.part_id if prim.part_id > 0 else 0
        labels = np.where(closer, np.int32(label_value), labels)
        normals = np.where(closer[..., None], n, normals)

    dmap = DepthMap.from_raw(depth.astype(np.float32), intrinsics)
    return SyntheticScene(
        primitives=primitives,
        bin=bin_model,
        rendered=dmap,
        labels=labels,
        clean_depth=depth.astype(np.float32),
        gt_normals=normals,
    )


# --- noise ---------------------------------------------------------------------


def apply_noise(
    scene: SyntheticScene, sigma_depth: float, dropout_rate: float, seed: int
) -> SyntheticScene:
    """Gaussian depth noise plus edge-biased dropout, fully determined by seed."""
    if sigma_depth < 0:
        raise SceneError("sigma_depth must be >= 0")
    if not (0 <= dropout_rate < 1):
        raise SceneError("dropout_rate must be in [0, 1)")
    dmap = scene.rendered
    if sigma_depth == 0 and dropout_rate == 0:
        return replace(scene, noise_seed=seed)
    rng = np.random.default_rng(seed)
    depth = dmap.depth.astype(np.float64).copy()
    valid = dmap.valid.copy()

    if sigma_depth > 0:
        depth[valid] += rng.normal(0.0, sigma_depth, int(valid.sum()))

    if dropout_rate > 0:
        gy, gx = np.gradient(dmap.depth.astype(np.float64))
        grad = np.hypot(gx, gy)
        flat_idx = np.flatnonzero(valid)
        weights = grad.ravel()[flat_idx] + 1e-6
        weights = weights / weights.sum()
        n_drop = int(round(dropout_rate * flat_idx.size))
        if n_drop > 0:
            drop = rng.choice(flat_idx, size=n_drop, replace=False, p=weights)
            valid.ravel()[drop] = False

    depth = np.where(valid & (depth > 0), depth, 0.0)
    valid = valid & (depth > 0)
    noisy = DepthMap(dmap.width, dmap.height, depth.astype(np.float32), valid, dmap.intrinsics)
    return replace(scene, rendered=noisy, noise_seed=seed)


# --- benchmark generation --------------------------------------------------------


@dataclass(frozen=True)
class PartClassSpec:
    name: str
    shape: Shape
    dimensions: tuple
    placement_gap: float  # extra center separation beyond circumradii, meters
    wall_margin: float  # extra margin from bin walls beyond circumradius
    default_count: int


PART_CATALOG: dict[int, PartClassSpec] = {
    1: PartClassSpec("motor_block", Shape.CUBOID, (0.040, 0.030, 0.026), 0.004, 0.008, 5),
    2: PartClassSpec("output_pulley", Shape.CYLINDER, (0.018, 0.012), 0.004, 0.008, 7),
    3: PartClassSpec("bearing", Shape.ANNULUS, (0.011, 0.004, 0.007), 0.004, 0.008, 10),
    4: PartClassSpec("spacer", Shape.CYLINDER, (0.006, 0.014), 0.017, 0.016, 10),
    5: PartClassSpec("idler_pulley", Shape.ANNULUS, (0.008, 0.004, 0.008), 0.004, 0.008, 10),
    6: PartClassSpec("washer", Shape.ANNULUS, (0.0075, 0.00375, 0.003), 0.004, 0.008, 12),
    7: PartClassSpec("bearing_ball", Shape.SPHERE, (0.007,), 0.004, 0.008, 9),
}

DEFAULT_NOISE_SIGMA = 0.0002
DEFAULT_NOISE_DROPOUT = 0.01


def _resting_pose(spec: PartClassSpec, x: float, y: float, yaw: float, floor_z: float) -> RigidTransform:
    d = spec.dimensions
    if spec.shape is Shape.SPHERE:
        cz = floor_z - d[0]
    elif spec.shape is Shape.CUBOID:
        cz = floor_z - d[2] / 2
    else:  # cylinder / annulus rest on their base
        cz = floor_z - d[-1] / 2
    return RigidTransform(quat_from_axis_angle([0, 0, 1], yaw), np.array([x, y, cz]))


def generate_benchmark(
    part_class: int,
    n_parts: int,
    seed: int,
    intrinsics: CameraIntrinsics | None = None,
    bin_model: BinModel | None = None,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    noise_dropout: float = DEFAULT_NOISE_DROPOUT,
    max_tries: int = 400,
) -> SyntheticScene:
    """Pose n_parts same-class parts in the bin without interpenetration,
    render, and apply the default sensor noise. Deterministic in seed."""
    if part_class not in PART_CATALOG:
        raise SceneError(f"unknown part class {part_class} (valid: 1..7)")
    if n_parts < 1:
        raise SceneError("n_parts must be >= 1")
    spec = PART_CATALOG[part_class]
    intrinsics = intrinsics or default_intrinsics()
    bin_model = bin_model or BinModel()

    ss = np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss.spawn(1)[0])
    noise_seed = int(np.random.default_rng(ss.spawn(1)[0]).integers(0, 2**31 - 1))

    probe = Primitive(spec.shape, spec.dimensions, RigidTransform(), 1, part_class)
    circ = probe.planar_circumradius()
    hx = bin_model.inner_x / 2 - circ - spec.wall_margin
    hy = bin_model.inner_y / 2 - circ - spec.wall_margin
    if hx <= 0 or hy <= 0:
        raise PlacementError("parts do not fit the bin with required margins")

    min_sep = 2 * circ + spec.placement_gap
    prims: list[Primitive] = []
    for restart in range(20):  # greedy sampling can wedge; retry whole layouts
        placed: list[RigidTransform] = []
        prims = []
        for i in range(n_parts):
            for attempt in range(max_tries):
                x = bin_model.center_x + rng.uniform(-hx, hx)
                y = bin_model.center_y + rng.uniform(-hy, hy)
                yaw = rng.uniform(0, 2 * np.pi)
                if all(
                    np.hypot(x - p.translation[0], y - p.translation[1]) >= min_sep
                    for p in placed
                ):
                    pose = _resting_pose(spec, x, y, yaw, bin_model.floor_z)
                    placed.append(pose)
                    prims.append(Primitive(spec.shape, spec.dimensions, pose, i + 1, part_class))
                    break
            else:
                break
        if len(prims) == n_parts:
            break
    else:
        raise PlacementError(
            f"could not place {n_parts} parts of class {part_class} "
            f"after {max_tries} tries x 20 layouts (bin too full)"
        )

    scene = render(prims, bin_model, intrinsics)
    return apply_noise(scene, noise_sigma, noise_dropout, noise_seed)


# --- serialization ---------------------------------------------------------------


def _save_pgm16(labels: np.ndarray, path) -> None:
    data = labels.astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{labels.shape[1]} {labels.shape[0]}\n65535\n".encode())
        f.write(data.tobytes())


def _load_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise SceneError(f"{path}: not a binary PGM")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        maxval = int(f.readline().strip())
        if maxval != 65535:
            raise SceneError(f"{path}: expected 16-bit PGM")
        buf = f.read(2 * width * height)
    return np.frombuffer(buf, dtype=">u2").reshape(height, width).astype(np.int32)


def save_scene(scene: SyntheticScene, directory) -> None:
    """Write depth.pfm, intrinsics.txt, labels.pgm and manifest.txt."""
    import os

    os.makedirs(directory, exist_ok=True)
    save_pfm(
        scene.rendered,
        os.path.join(directory, "depth.pfm"),
        intrinsics_path=os.path.join(directory, "intrinsics.txt"),
    )
    _save_pgm16(scene.labels, os.path.join(directory, "labels.pgm"))
    b = scene.bin
    lines = [
        f"noise_seed={scene.noise_seed if scene.noise_seed is not None else ''}",
        f"bin_inner_x={b.inner_x!r}",
        f"bin_inner_y={b.inner_y!r}",
        f"bin_wall_height={b.wall_height!r}",
        f"bin_wall_thickness={b.wall_thickness!r}",
        f"bin_floor_z={b.floor_z!r}",
        f"bin_center_x={b.center_x!r}",
        f"bin_center_y={b.center_y!r}",
    ]
    for p in scene.primitives:
        dims = " ".join(repr(float(d)) for d in p.dimensions)
        pose = " ".join(repr(float(x)) for x in p.pose.as_tuple7())
        lines.append(f"part {p.part_id} {p.part_class} {p.shape.value} {dims} pose {pose}")
    with open(os.path.join(directory, "manifest.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


def load_scene(directory, rerender: bool = True) -> SyntheticScene:
    """Read a scene directory back; re-renders the clean rasters for oracles."""
    import os

    dmap = load_pfm(
        os.path.join(directory, "depth.pfm"),
        intrinsics_path=os.path.join(directory, "intrinsics.txt"),
    )
    labels = _load_pgm16(os.path.join(directory, "labels.pgm"))
    kv = {}
    prims = []
    with open(os.path.join(directory, "manifest.txt")) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("part "):
                tokens = line.split()
                part_id, part_class = int(tokens[1]), int(tokens[2])
                shape = Shape(tokens[3])
                pose_at = tokens.index("pose")
                dims = tuple(float(t) for t in tokens[4:pose_at])
                pose7 = [float(t) for t in tokens[pose_at + 1 : pose_at + 8]]
                prims.append(
                    Primitive(shape, dims, RigidTransform.from_tuple7(pose7), part_id, part_class)
                )
            else:
                key, _, val = line.partition("=")
                kv[key.strip()] = val.strip()
    bin_model = BinModel(
        inner_x=float(kv["bin_inner_x"]),
        inner_y=float(kv["bin_inner_y"]),
        wall_height=float(kv["bin_wall_height"]),
        wall_thickness=float(kv["bin_wall_thickness"]),
        floor_z=float(kv["bin_floor_z"]),
        center_x=float(kv["bin_center_x"]),
        center_y=float(kv["bin_center_y"]),
    )
    noise_seed = int(kv["noise_seed"]) if kv.get("noise_seed") else None
    clean_depth = gt_normals = None
    if rerender:
        clean = render(prims, bin_model, dmap.intrinsics)
        clean_depth, gt_normals = clean.clean_depth, clean.gt_normals
    return SyntheticScene(
        primitives=tuple(prims),
        bin=bin_model,
        rendered=dmap,
        labels=labels,
        noise_seed=noise_seed,
        clean_depth=clean_depth,
        gt_normals=gt_normals,
    )

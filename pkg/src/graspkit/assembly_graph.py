"""Assembly frame trees parsed from text files.

Parts carry named subframes (hole centers, screw tips, ...) whose offsets may
be linear expressions of named part dimensions. Users mate any two frames;
internally every mate is rewired into a main-frame -> main-frame tree edge
whose transform composes the subframe offsets with the mate transform, so the
stored tree stays strictly hierarchical while preserving the mated relative
pose exactly. Changing a part's dimensions (surprise parts) rebuilds the
affected subframes and every mate edge that was routed through them.

File grammar (one record per line, '#' comments):

    part <name> [param=value ...]
    frame <part> <frame_name> <qw qx qy qz tx ty tz> [tx|ty|tz=a+b*param ...]
    mate <frame_a> <frame_b> <qw qx qy qz tx ty tz>

A mate makes frame_b's part a child of frame_a's part; the 7-tuple is the
pose of frame_b expressed in frame_a. Unmated parts hang off the world root
with identity pose.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .transforms import RigidTransform

WORLD = "world"


class AssemblyError(Exception):
    """Violation of the frame-tree rules (cycles, duplicates, unknowns)."""


class AssemblyParseError(AssemblyError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MissingParameterError(AssemblyError):
    """A subframe expression references a parameter not provided."""


class FrameKind(enum.Enum):
    WORLD = "world"
    PART_MAIN = "part_main"
    SUBFRAME = "subframe"


@dataclass(frozen=True, eq=False)
class Frame:
    name: str
    parent: str | None
    local_transform: RigidTransform
    kind: FrameKind


@dataclass(frozen=True)
class _Expr:
    """component := offset + scale * params[param]"""

    component: str  # tx | ty | tz
    offset: float
    scale: float
    param: str


@dataclass(frozen=True, eq=False)
class _SubframeDef:
    name: str
    base_pose: np.ndarray  # 7-tuple
    exprs: tuple


@dataclass(frozen=True, eq=False)
class _PartDef:
    name: str
    params: dict
    subframes: dict  # frame name -> _SubframeDef
    line_no: int


@dataclass(frozen=True, eq=False)
class _MateDef:
    frame_a: str
    frame_b: str
    transform: RigidTransform
    line_no: int


@dataclass(frozen=True, eq=False)
class AssemblyGraph:
    frames: dict  # name -> Frame
    parts: dict  # part name -> _PartDef
    mates: tuple

    def part_of(self, frame_name: str) -> str | None:
        """Owning part of a frame; None for the world root."""
        f = self.frames[frame_name]
        while f.kind is FrameKind.SUBFRAME:
            f = self.frames[f.parent]
        return f.name if f.kind is FrameKind.PART_MAIN else None


_COMPONENTS = ("tx", "ty", "tz")
_EXPR_RE = re.compile(
    r"^(t[xyz])=(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"(?:([-+]\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\*([A-Za-z_]\w*))?$"
)


def _subframe_pose(sub: _SubframeDef, params: dict) -> RigidTransform:
    pose = sub.base_pose.copy()
    comp_index = {"tx": 4, "ty": 5, "tz": 6}
    for e in sub.exprs:
        if e.param not in params:
            raise MissingParameterError(
                f"subframe '{sub.name}' needs parameter '{e.param}'"
            )
        pose[comp_index[e.component]] = e.offset + e.scale * params[e.param]
    return RigidTransform.from_tuple7(pose)


def _build_frames(parts: dict, mates: tuple) -> dict:
    """Recompute all frames from part definitions and mates (the rewiring)."""
    frames: dict[str, Frame] = {
        WORLD: Frame(WORLD, None, RigidTransform.identity(), FrameKind.WORLD)
    }
    subframe_local: dict[str, RigidTransform] = {}
    owner: dict[str, str] = {}

    for part in parts.values():
        frames[part.name] = Frame(
            part.name, WORLD, RigidTransform.identity(), FrameKind.PART_MAIN
        )
        owner[part.name] = part.name
        for sub in part.subframes.values():
            local = _subframe_pose(sub, part.params)
            subframe_local[sub.name] = local
            frames[sub.name] = Frame(sub.name, part.name, local, FrameKind.SUBFRAME)
            owner[sub.name] = part.name

    def main_to(frame_name: str) -> RigidTransform:
        """Transform main frame <- given frame within one part."""
        if frame_name in subframe_local:
            return subframe_local[frame_name]
        return RigidTransform.identity()

    parent_of: dict[str, str] = {}
    for mate in mates:
        for name in (mate.frame_a, mate.frame_b):
            if name != WORLD and name not in frames:
                raise AssemblyParseError(
                    mate.line_no, f"mate references undefined frame '{name}'"
                )
        part_a = owner.get(mate.frame_a)  # None when mating to world
        part_b = owner.get(mate.frame_b)
        if part_b is None:
            raise AssemblyParseError(mate.line_no, "cannot mate the world as a child")
        if part_b in parent_of:
            raise AssemblyParseError(
                mate.line_no, f"part '{part_b}' already has a parent mate"
            )
        parent_name = part_a if part_a is not None else WORLD
        # main_a <- frame_a <- frame_b <- main_b
        local = main_to(mate.frame_a) @ mate.transform @ main_to(mate.frame_b).inverse()
        parent_of[part_b] = parent_name
        frames[part_b] = Frame(part_b, parent_name, local, FrameKind.PART_MAIN)
        # cycle check along the new chain of part parents
        seen = {part_b}
        cur = parent_name
        while cur != WORLD:
            if cur in seen:
                raise AssemblyParseError(
                    mate.line_no, f"mate creates a cycle through part '{cur}'"
                )
            seen.add(cur)
            cur = parent_of.get(cur, WORLD)
    return frames


def _rebuild(parts: dict, mates: tuple) -> AssemblyGraph:
    return AssemblyGraph(frames=_build_frames(parts, mates), parts=parts, mates=mates)


def parse_assembly(text: str) -> AssemblyGraph:
    """Parse assembly file contents into a strictly hierarchical frame tree."""
    parts: dict[str, _PartDef] = {}
    mates: list[_MateDef] = []
    names: set[str] = {WORLD}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]

        if kind == "part":
            if len(tokens) < 2:
                raise AssemblyParseError(line_no, "part needs a name")
            name = tokens[1]
            if name in names:
                raise AssemblyParseError(line_no, f"duplicate frame name '{name}'")
            params = {}
            for tok in tokens[2:]:
                key, eq, val = tok.partition("=")
                if not eq:
                    raise AssemblyParseError(line_no, f"bad parameter '{tok}'")
                try:
                    params[key] = float(val)
                except ValueError:
                    raise AssemblyParseError(line_no, f"bad parameter value '{tok}'") from None
            parts[name] = _PartDef(name, params, {}, line_no)
            names.add(name)

        elif kind == "frame":
            if len(tokens) < 10:
                raise AssemblyParseError(
                    line_no, "frame needs: part, name, 7-tuple pose"
                )
            part_name, frame_name = tokens[1], tokens[2]
            if part_name not in parts:
                raise AssemblyParseError(line_no, f"frame references unknown part '{part_name}'")
            if frame_name in names:
                raise AssemblyParseError(line_no, f"duplicate frame name '{frame_name}'")
            try:
                pose = np.array([float(t) for t in tokens[3:10]])
            except ValueError:
                raise AssemblyParseError(line_no, "bad pose 7-tuple") from None
            exprs = []
            for tok in tokens[10:]:
                m = _EXPR_RE.match(tok)
                if not m:
                    raise AssemblyParseError(
                        line_no,
                        f"bad expression '{tok}' (expected t{{x,y,z}}=a or t{{x,y,z}}=a+b*param)",
                    )
                comp, offset, scale, param = m.groups()
                if param is None:
                    exprs.append(None)
                    pose[{"tx": 4, "ty": 5, "tz": 6}[comp]] = float(offset)
                else:
                    exprs.append(_Expr(comp, float(offset), float(scale), param))
            exprs = tuple(e for e in exprs if e is not None)
            sub = _SubframeDef(frame_name, pose, exprs)
            part = parts[part_name]
            new_subs = dict(part.subframes)
            new_subs[frame_name] = sub
            parts[part_name] = _PartDef(part.name, part.params, new_subs, part.line_no)
            names.add(frame_name)

        elif kind == "mate":
            if len(tokens) != 10:
                raise AssemblyParseError(line_no, "mate needs: frame_a, frame_b, 7-tuple")
            frame_a, frame_b = tokens[1], tokens[2]
            try:
                tf = RigidTransform.from_tuple7([float(t) for t in tokens[3:10]])
            except ValueError:
                raise AssemblyParseError(line_no, "bad mate 7-tuple") from None
            mates.append(_MateDef(frame_a, frame_b, tf, line_no))

        else:
            raise AssemblyParseError(line_no, f"unknown record '{kind}'")

    # validate expression parameters exist up front
    for part in parts.values():
        for sub in part.subframes.values():
            for e in sub.exprs:
                if e.param not in part.params:
                    raise AssemblyParseError(
                        part.line_no,
                        f"subframe '{sub.name}' references undefined parameter '{e.param}'",
                    )
    return _rebuild(parts, tuple(mates))


def resolve(graph: AssemblyGraph, from_frame: str, to_frame: str) -> RigidTransform:
    """Transform taking coordinates in to_frame into from_frame."""
    for name in (from_frame, to_frame):
        if name not in graph.frames:
            raise AssemblyError(f"unknown frame '{name}'")

    def root_from(name: str) -> RigidTransform:
        tf = RigidTransform.identity()
        f = graph.frames[name]
        while f.parent is not None:
            tf = f.local_transform @ tf
            f = graph.frames[f.parent]
        return tf

    return root_from(from_frame).inverse() @ root_from(to_frame)


def swap_part(graph: AssemblyGraph, part: str, new_dimensions: dict) -> AssemblyGraph:
    """New graph with the part's dimension parameters replaced.

    new_dimensions must cover every parameter the part's subframe expressions
    reference; subframe offsets and all mate edges routed through them are
    recomputed, other parts are untouched.
    """
    if part not in graph.parts:
        raise AssemblyError(f"unknown part '{part}'")
    old = graph.parts[part]
    referenced = {e.param for sub in old.subframes.values() for e in sub.exprs}
    missing = sorted(referenced - set(new_dimensions))
    if missing:
        raise MissingParameterError(
            f"part '{part}' swap missing parameters: {', '.join(missing)}"
        )
    params = dict(old.params)
    params.update({k: float(v) for k, v in new_dimensions.items()})
    parts = dict(graph.parts)
    parts[part] = _PartDef(old.name, params, old.subframes, old.line_no)
    return _rebuild(parts, graph.mates)


def format_assembly(graph: AssemblyGraph) -> str:
    """Serialize back to the file grammar (canonical ordering)."""
    lines = []
    for part in graph.parts.values():
        tokens = ["part", part.name]
        tokens += [f"{k}={v!r}" for k, v in sorted(part.params.items())]
        lines.append(" ".join(tokens))
        for sub in part.subframes.values():
            pose = " ".join(repr(float(x)) for x in sub.base_pose)
            tokens = ["frame", part.name, sub.name, pose]
            tokens += [f"{e.component}={e.offset!r}{e.scale:+}*{e.param}" for e in sub.exprs]
            lines.append(" ".join(tokens))
    for mate in graph.mates:
        pose = " ".join(repr(float(x)) for x in mate.transform.as_tuple7())
        lines.append(f"mate {mate.frame_a} {mate.frame_b} {pose}")
    return "\n".join(lines) + "\n"

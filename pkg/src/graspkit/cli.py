"""Command-line entry point.

Subcommands: synth, detect, eval, calibrate, check-pick, assembly. Every run
with identical flags and seeds produces byte-identical primary outputs (no
timestamps are written). Exit codes: 0 success, 1 runtime/data failure,
2 usage error.

The environment variable GRASPKIT_OUT_DIR, when set, re-roots relative
output paths.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .assembly_graph import (
    AssemblyError,
    AssemblyParseError,
    MissingParameterError,
    format_assembly,
    parse_assembly,
    resolve,
    swap_part,
)
from .depth_io import DepthIOError
from .evaluation import ClassificationMargins, benchmark_verdicts, format_report, valid_rate
from .gripper_models import GripperConfigError, load_gripper_config
from .graspability import DetectionParams, detect, load_detection_params
from .handeye import DegenerateMotionError, read_samples, residual, solve_handeye
from .pick_check import (
    PickCheckError,
    PickedWhen,
    PressureReading,
    RednessCheckConfig,
    load_ppm,
    redness_picked,
    suction_picked,
    width_picked,
)
from .scene_synth import PlacementError, SceneError, generate_benchmark, load_scene, save_scene


def _out_path(path: str) -> str:
    root = os.environ.get("GRASPKIT_OUT_DIR")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# --- synth ----------------------------------------------------------------------


def _cmd_synth(args) -> int:
    try:
        scene = generate_benchmark(args.part_class, args.parts, args.seed)
        out = _out_path(args.out)
        save_scene(scene, out)
    except (SceneError, PlacementError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote scene (class {args.part_class}, {args.parts} parts, seed {args.seed}) to {out}")
    return 0


# --- detect ---------------------------------------------------------------------

_SCHEMA = "u v rotation_index g4 omega g6 x y z ax ay az"


def _cmd_detect(args) -> int:
    try:
        scene = load_scene(args.scene, rerender=False)
        model = load_gripper_config(args.gripper)
        params = load_detection_params(args.params) if args.params else DetectionParams()
        if args.max_candidates is not None:
            from dataclasses import replace

            params = replace(params, max_candidates=args.max_candidates)
        candidates = detect(scene.rendered, model, params)
    except (SceneError, DepthIOError, GripperConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    lines = [
        f"# graspkit detect v{__version__}",
        f"# scene={args.scene} gripper={args.gripper} params={args.params or 'default'}",
        _SCHEMA,
    ]
    for c in candidates:
        row = [str(c.u), str(c.v), str(c.rotation_index), _fmt(c.g4), _fmt(c.omega), _fmt(c.g6)]
        row += [_fmt(x) for x in c.position] + [_fmt(x) for x in c.approach]
        lines.append(" ".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write_text(_out_path(args.out), text)
    else:
        sys.stdout.write(text)
    if candidates:
        top = candidates[0]
        print(
            f"top candidate: pixel ({top.u}, {top.v}) rotation {top.rotation_index} "
            f"score {top.g6:.3f} position ({_fmt(top.position[0])}, "
            f"{_fmt(top.position[1])}, {_fmt(top.position[2])})"
        )
    else:
        print("no candidates above threshold")
    return 0


# --- eval -----------------------------------------------------------------------


def _cmd_eval(args) -> int:
    classes = tuple(int(c) for c in args.classes.split(",")) if args.classes else tuple(range(1, 8))
    try:
        verdicts = benchmark_verdicts(
            classes=classes,
            scenes_per_class=args.scenes,
            candidates_per_scene=args.candidates,
            seed=args.seed,
            margins=ClassificationMargins(),
        )
        report = valid_rate(verdicts)
    except (SceneError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    table = format_report(report)
    record_lines = [
        f"# graspkit eval v{__version__}",
        f"# classes={','.join(str(c) for c in classes)} scenes={args.scenes} "
        f"candidates={args.candidates} seed={args.seed}",
        "part_class verdict part_id u v rotation_index g6",
    ]
    for cv in verdicts:
        c = cv.candidate
        record_lines.append(
            f"{cv.part_class} {cv.verdict.value} {cv.part_id if cv.part_id else 0} "
            f"{c.u} {c.v} {c.rotation_index} {_fmt(c.g6)}"
        )
    if args.out:
        out = _out_path(args.out)
        os.makedirs(out, exist_ok=True)
        _atomic_write_text(os.path.join(out, "report.txt"), table + "\n")
        _atomic_write_text(os.path.join(out, "records.txt"), "\n".join(record_lines) + "\n")
    print(table)

    if args.min_rate is not None:
        rate = report.valid_rate_percent
        if rate is None or rate < args.min_rate:
            shown = "undefined" if rate is None else f"{rate:.1f}%"
            print(f"valid rate {shown} below gate {args.min_rate}%", file=sys.stderr)
            return 1
    return 0


# --- calibrate --------------------------------------------------------------------


def _cmd_calibrate(args) -> int:
    try:
        samples = read_samples(args.samples)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        estimate = solve_handeye(samples)
    except DegenerateMotionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    stats = residual(samples, estimate)
    pose = " ".join(_fmt(x) for x in estimate.as_tuple7())
    lines = [
        f"base_to_camera {pose}",
        f"rotation_rms_rad {_fmt(stats.rotation_rms_rad)}",
        f"translation_rms_m {_fmt(stats.translation_rms_m)}",
        f"n_pairs {stats.n_pairs}",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write_text(_out_path(args.out), text)
    sys.stdout.write(text)
    return 0


# --- check-pick --------------------------------------------------------------------


def _cmd_check_pick(args) -> int:
    try:
        if args.check == "suction":
            picked = suction_picked(PressureReading(args.pressure), args.threshold)
            print(f"picked={str(picked).lower()} pressure_kpa={_fmt(args.pressure)}")
        elif args.check == "width":
            picked = width_picked(args.width, args.closed, args.tolerance)
            print(f"picked={str(picked).lower()} width_m={_fmt(args.width)}")
        else:
            image = load_ppm(args.image)
            config = RednessCheckConfig(
                roi=tuple(args.roi),
                r_threshold=args.threshold,
                picked_when=PickedWhen(args.picked_when),
            )
            picked, r_mean = redness_picked(image, config)
            print(f"picked={str(picked).lower()} r_mean={_fmt(r_mean)}")
    except (PickCheckError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


# --- assembly ---------------------------------------------------------------------


def _cmd_assembly(args) -> int:
    try:
        with open(args.file) as f:
            graph = parse_assembly(f.read())
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except AssemblyParseError as e:
        print(f"error: {args.file}: {e}", file=sys.stderr)
        return 1

    try:
        if args.action == "resolve":
            tf = resolve(graph, args.frame_a, args.frame_b)
            print(" ".join(f"{x:.12g}" for x in tf.as_tuple7()))
        else:  # swap
            dims = {}
            for tok in args.dimensions:
                key, eq, val = tok.partition("=")
                if not eq:
                    print(f"error: bad dimension '{tok}' (expected key=value)", file=sys.stderr)
                    return 2
                dims[key] = float(val)
            new_graph = swap_part(graph, args.part, dims)
            out = _out_path(args.out) if args.out else args.file
            _atomic_write_text(out, format_assembly(new_graph))
            print(f"wrote {out}")
    except (MissingParameterError, AssemblyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graspkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"graspkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic bin scene directory")
    p.add_argument("--class", dest="part_class", type=int, required=True, help="part class 1..7")
    p.add_argument("--parts", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("detect", help="detect grasp candidates on a scene directory")
    p.add_argument("--scene", required=True)
    p.add_argument("--gripper", required=True, help="gripper config file")
    p.add_argument("--params", help="detection parameter config file")
    p.add_argument("--max-candidates", type=int)
    p.add_argument("--out", help="candidate records file (default: stdout)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="run the synthetic valid-rate benchmark")
    p.add_argument("--classes", help="comma-separated part classes (default 1..7)")
    p.add_argument("--scenes", type=int, default=5)
    p.add_argument("--candidates", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-rate", type=float, help="fail (exit 1) if overall rate below this")
    p.add_argument("--out", help="output directory for report and records")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("calibrate", help="solve hand-eye calibration from a samples file")
    p.add_argument("--samples", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("check-pick", help="pick success checks")
    check = p.add_subparsers(dest="check", required=True)
    c = check.add_parser("suction")
    c.add_argument("--pressure", type=float, required=True, help="gauge pressure, kPa")
    c.add_argument("--threshold", type=float, default=-55.0)
    c = check.add_parser("width")
    c.add_argument("--width", type=float, required=True, help="width after closing, m")
    c.add_argument("--closed", type=float, required=True, help="fully closed width, m")
    c.add_argument("--tolerance", type=float, default=0.001)
    c = check.add_parser("redness")
    c.add_argument("--image", required=True, help="binary PPM (P6)")
    c.add_argument("--roi", type=int, nargs=4, required=True, metavar=("U", "V", "W", "H"))
    c.add_argument("--threshold", type=float, required=True)
    c.add_argument("--picked-when", choices=["above", "below"], default="below")
    p.set_defaults(func=_cmd_check_pick)

    p = sub.add_parser("assembly", help="assembly frame-graph queries")
    act = p.add_subparsers(dest="action", required=True)
    a = act.add_parser("resolve")
    a.add_argument("file")
    a.add_argument("frame_a")
    a.add_argument("frame_b")
    a = act.add_parser("swap")
    a.add_argument("file")
    a.add_argument("part")
    a.add_argument("dimensions", nargs="+", metavar="key=value")
    a.add_argument("--out", help="output file (default: rewrite in place)")
    p.set_defaults(func=_cmd_assembly)
    return parser


def _validate(args, parser) -> None:
    if args.command == "synth":
        if args.parts < 1:
            parser.error("--parts must be >= 1")
        if not 1 <= args.part_class <= 7:
            parser.error("--class must be in 1..7")
    if args.command == "eval":
        if args.scenes < 1 or args.candidates < 1:
            parser.error("--scenes and --candidates must be >= 1")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

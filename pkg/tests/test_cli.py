"""CLI subcommands: contracts, exit codes, reproducibility."""

import os

import numpy as np
import pytest

from graspkit.cli import main
from graspkit.handeye import generate_dataset, write_samples
from graspkit.transforms import RigidTransform, quat_from_axis_angle
from graspkit.handeye import CalibrationSample

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def run(argv):
    try:
        return main(argv)
    except SystemExit as e:  # argparse uses SystemExit for usage errors
        return e.code


# --- synth ----------------------------------------------------------------------


def test_synth_writes_four_files(tmp_path):
    out = tmp_path / "s1"
    assert run(["synth", "--class", "3", "--parts", "6", "--seed", "7", "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["depth.pfm", "intrinsics.txt", "labels.pgm", "manifest.txt"]


def test_synth_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["synth", "--class", "5", "--parts", "8", "--seed", "3", "--out", str(out)]) == 0
    for name in ("depth.pfm", "intrinsics.txt", "labels.pgm", "manifest.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_zero_parts_usage_error(tmp_path, capsys):
    assert run(["synth", "--class", "3", "--parts", "0", "--out", str(tmp_path / "x")]) == 2


def test_synth_bad_class_usage_error(tmp_path):
    assert run(["synth", "--class", "9", "--parts", "3", "--out", str(tmp_path / "x")]) == 2


def test_synth_overfull_bin_failure(tmp_path):
    assert run(["synth", "--class", "1", "--parts", "80", "--out", str(tmp_path / "x")]) == 1


# --- detect ---------------------------------------------------------------------


@pytest.fixture()
def washer_scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene") / "washers"
    assert run(["synth", "--class", "6", "--parts", "8", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_detect_washer_scene_records(washer_scene, tmp_path):
    out = tmp_path / "cands.txt"
    rc = run(
        [
            "detect",
            "--scene",
            str(washer_scene),
            "--gripper",
            os.path.join(CONFIGS, "two_finger_inner.cfg"),
            "--params",
            os.path.join(CONFIGS, "detection.cfg"),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    data = [l for l in lines if l and not l.startswith("#")]
    assert data[0].startswith("u v rotation_index")  # schema header
    assert len(data) >= 2  # at least one candidate record
    fields = data[1].split()
    assert len(fields) == 12


def test_detect_deterministic_bytes(washer_scene, tmp_path):
    outs = []
    for name in ("a.txt", "b.txt"):
        out = tmp_path / name
        assert (
            run(
                [
                    "detect",
                    "--scene",
                    str(washer_scene),
                    "--gripper",
                    os.path.join(CONFIGS, "two_finger_inner.cfg"),
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_detect_all_invalid_scene_empty_ok(tmp_path):
    from graspkit.depth_io import CameraIntrinsics, DepthMap
    from graspkit.scene_synth import BinModel, SyntheticScene, save_scene

    k = CameraIntrinsics(500.0, 500.0, 15.5, 15.5, 32, 32)
    dmap = DepthMap.from_raw(np.zeros((32, 32), np.float32), k)
    scene = SyntheticScene(
        primitives=(),
        bin=BinModel(),
        rendered=dmap,
        labels=np.zeros((32, 32), np.int32),
    )
    scene_dir = tmp_path / "blank"
    save_scene(scene, scene_dir)
    out = tmp_path / "cands.txt"
    rc = run(
        [
            "detect",
            "--scene",
            str(scene_dir),
            "--gripper",
            os.path.join(CONFIGS, "suction.cfg"),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    data = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
    assert len(data) == 1  # schema line only, empty record list


def test_detect_missing_gripper_config(washer_scene, tmp_path):
    rc = run(
        [
            "detect",
            "--scene",
            str(washer_scene),
            "--gripper",
            str(tmp_path / "missing.cfg"),
        ]
    )
    assert rc == 1


# --- eval -----------------------------------------------------------------------


def test_eval_single_class_gate(tmp_path):
    out = tmp_path / "report"
    rc = run(
        [
            "eval",
            "--classes",
            "6",
            "--scenes",
            "1",
            "--candidates",
            "5",
            "--seed",
            "1",
            "--min-rate",
            "80",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert (out / "report.txt").exists()
    assert (out / "records.txt").exists()


def test_eval_deterministic_bytes(tmp_path):
    texts = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        rc = run(
            ["eval", "--classes", "6", "--scenes", "1", "--candidates", "4", "--seed", "2", "--out", str(out)]
        )
        assert rc == 0
        texts.append((out / "records.txt").read_bytes() + (out / "report.txt").read_bytes())
    assert texts[0] == texts[1]


def test_eval_unreachable_gate(tmp_path):
    rc = run(
        ["eval", "--classes", "6", "--scenes", "1", "--candidates", "4", "--seed", "2", "--min-rate", "101"]
    )
    assert rc == 1


# --- calibrate ------------------------------------------------------------------


def test_calibrate_noiseless_recovers_truth(tmp_path, capsys):
    gt = RigidTransform.random(np.random.default_rng(4), trans_scale=0.7)
    samples = generate_dataset(gt, 30, seed=12)
    path = tmp_path / "samples.txt"
    write_samples(samples, path)
    assert run(["calibrate", "--samples", str(path)]) == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert line.startswith("base_to_camera ")
    est = RigidTransform.from_tuple7([float(x) for x in line.split()[1:]])
    assert est.rotation_angle_to(gt) <= 1e-9
    assert est.translation_distance_to(gt) <= 1e-9


def test_calibrate_degenerate_exit_1(tmp_path, capsys):
    rng = np.random.default_rng(5)
    x = RigidTransform.random(rng, trans_scale=0.5)
    mount = RigidTransform.random(rng, trans_scale=0.05)
    samples = []
    for i in range(6):
        g = RigidTransform(quat_from_axis_angle([0, 0, 1], 0.4 * i), rng.uniform(-0.2, 0.2, 3))
        samples.append(CalibrationSample(g, x.inverse() @ g @ mount))
    path = tmp_path / "deg.txt"
    write_samples(samples, path)
    assert run(["calibrate", "--samples", str(path)]) == 1
    assert "degenerate" in capsys.readouterr().err


def test_calibrate_two_samples_exit_2(tmp_path):
    gt = RigidTransform.random(np.random.default_rng(6))
    write_samples(generate_dataset(gt, 3, seed=1)[:2], tmp_path / "two.txt")
    assert run(["calibrate", "--samples", str(tmp_path / "two.txt")]) == 2


# --- check-pick -----------------------------------------------------------------


def test_check_pick_suction(capsys):
    assert run(["check-pick", "suction", "--pressure", "-60"]) == 0
    assert "picked=true" in capsys.readouterr().out
    assert run(["check-pick", "suction", "--pressure", "-55"]) == 0
    assert "picked=false" in capsys.readouterr().out


def test_check_pick_width(capsys):
    assert run(["check-pick", "width", "--width", "0.008", "--closed", "0.0"]) == 0
    assert "picked=true" in capsys.readouterr().out


def test_check_pick_redness(tmp_path, capsys):
    from graspkit.pick_check import save_ppm

    img = np.zeros((16, 16, 3), np.uint8)
    img[..., 0] = 200
    save_ppm(img, tmp_path / "view.ppm")
    rc = run(
        [
            "check-pick",
            "redness",
            "--image",
            str(tmp_path / "view.ppm"),
            "--roi",
            "2",
            "2",
            "8",
            "8",
            "--threshold",
            "150",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "picked=false" in out and "r_mean=200" in out


# --- assembly -------------------------------------------------------------------


def test_assembly_resolve_identity(capsys):
    path = os.path.join(CONFIGS, "example_assembly.txt")
    assert run(["assembly", "resolve", path, "plate", "plate"]) == 0
    assert capsys.readouterr().out.strip() == "1 0 0 0 0 0 0"


def test_assembly_swap_then_resolve(tmp_path, capsys):
    src = os.path.join(CONFIGS, "example_assembly.txt")
    before_rc = run(["assembly", "resolve", src, "world", "plate_hole_center"])
    assert before_rc == 0
    before = [float(x) for x in capsys.readouterr().out.split()]
    out = tmp_path / "swapped.txt"
    rc = run(
        [
            "assembly",
            "swap",
            src,
            "plate",
            "thickness=0.002",
            "hole_offset=0.012",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    capsys.readouterr()
    assert run(["assembly", "resolve", str(out), "world", "plate_hole_center"]) == 0
    after = [float(x) for x in capsys.readouterr().out.split()]
    assert abs((after[4] - before[4]) - 0.002) < 1e-12


def test_assembly_malformed_mate_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("part a\nmate a b 1 0 0\n")
    assert run(["assembly", "resolve", str(bad), "a", "a"]) == 1
    assert "line 2" in capsys.readouterr().err


# --- misc -----------------------------------------------------------------------


def test_out_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("GRASPKIT_OUT_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    assert run(["synth", "--class", "7", "--parts", "3", "--seed", "1", "--out", "sub/scene"]) == 0
    assert (tmp_path / "sub" / "scene" / "depth.pfm").exists()

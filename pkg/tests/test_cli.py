import json
import subprocess
import sys

import numpy as np
import pytest

from edgediff.cli import main
from edgediff.io import read_grid_csv

SCENE = {
    "frequency_hz": 5.32e9,
    "transmitters": [{"position": [3, 0, 0]}, {"position": [-3, 0, 0], "amplitude": [1, 0]}],
    "edges": [{"midpoint": [0.04, 1.2, 0.02], "angle_deg": 90, "half_length": 0.02}],
    "object_points": [{"position": [0.1, 1.1, -0.1], "amplitude": 0.05}],
    "background_points": [{"position": [0, 3, 0], "amplitude": 0.2}],
    "region": {"min": [-1, 0.5, -1], "max": [1, 2, 1]},
    "grid": {"origin": [-0.35, 0, -0.3], "axis_u": [1, 0, 0], "axis_v": [0, 0, 1],
             "n_u": 50, "n_v": 20, "pitch_u": 0.014, "pitch_v": 0.03},
}
SMALL_PLANE = ["--plane-size", "0.2", "--plane-pitch", "0.02"]


def _tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture
def scene_file(tmp_path):
    p = tmp_path / "scene.json"
    p.write_text(json.dumps(SCENE))
    return p


def test_simulate_outputs(tmp_path, scene_file):
    out = tmp_path / "sim"
    assert main(["simulate", str(scene_file), "--out", str(out)]) == 0
    files = _tree(out)
    assert {"tx0/field.csv", "tx0/power.csv", "tx0/power_bg.csv", "tx0/sbar.csv", "tx1/sbar.csv",
            "manifest.json"} <= set(files)
    grid, sbar = read_grid_csv(out / "tx0" / "sbar.csv")
    _, p = read_grid_csv(out / "tx0" / "power.csv")
    _, pb = read_grid_csv(out / "tx0" / "power_bg.csv")
    assert grid.shape == (50, 20)
    assert np.array_equal(sbar, p - pb)
    man = json.loads(files["manifest.json"])
    assert man["config"]["command"] == "simulate"
    assert len(man["files"]) == 8


def test_simulate_and_image_are_bit_identical(tmp_path, scene_file):
    for run in ("a", "b"):
        assert main(["simulate", str(scene_file), "--out", str(tmp_path / f"sim_{run}")]) == 0
    assert _tree(tmp_path / "sim_a") == _tree(tmp_path / "sim_b")
    for run in ("a", "b"):
        assert main(["image", "--sim", str(tmp_path / "sim_a"), "--out", str(tmp_path / f"img_{run}"),
                     *SMALL_PLANE]) == 0
    a = _tree(tmp_path / "img_a")
    assert a == _tree(tmp_path / "img_b")
    assert {"fused.csv", "mask.csv", "orientation_map.csv", "heatmap.pgm",
            "intensity_tx0.csv", "intensity_tx1.csv"} <= set(a)


def test_noise_flag(tmp_path, scene_file):
    outs = []
    for seed in (1, 1, 2):
        out = tmp_path / f"n{len(outs)}"
        assert main(["simulate", str(scene_file), "--out", str(out), "--noise-db", "-30",
                     "--seed", str(seed)]) == 0
        outs.append(read_grid_csv(out / "tx0" / "sbar.csv")[1])
    assert np.array_equal(outs[0], outs[1])
    assert not np.array_equal(outs[0], outs[2])


def test_image_from_sbar_files(tmp_path, scene_file):
    sim = tmp_path / "sim"
    main(["simulate", str(scene_file), "--out", str(sim)])
    out = tmp_path / "img"
    rc = main(["image", "--sbar", str(sim / "tx0" / "sbar.csv"), "--tx", "3,0,0",
               "--freq", "5.32e9", "--out", str(out), "--normalize-by-signature", *SMALL_PLANE])
    assert rc == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["normalize_by_signature"] is True
    _, mask = read_grid_csv(out / "mask.csv")
    assert mask.shape == (11, 11) and mask.max() == 1.0


def test_image_dimension_mismatch(tmp_path, scene_file):
    sim = tmp_path / "sim"
    main(["simulate", str(scene_file), "--out", str(sim)])
    other = dict(SCENE, grid=dict(SCENE["grid"], n_u=10))
    (tmp_path / "other.json").write_text(json.dumps(other))
    main(["simulate", str(tmp_path / "other.json"), "--out", str(tmp_path / "sim2")])
    rc = main(["image", "--sbar", str(sim / "tx0" / "sbar.csv"), "--tx", "3,0,0",
               "--sbar", str(tmp_path / "sim2" / "tx0" / "sbar.csv"), "--tx=-3,0,0",
               "--out", str(tmp_path / "img")])
    assert rc == 3
    assert not (tmp_path / "img").exists()


def test_malformed_scene(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "frequency_hz": 5e9,,\n}')
    rc = main(["simulate", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert f"{bad}:2:" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_geometry_error(tmp_path):
    doc = dict(SCENE, edges=[{"midpoint": [0, 0, 0.1], "angle_deg": 0, "half_length": 0.02}], region=None)
    del doc["region"]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 3
    assert not (tmp_path / "o").exists()


def test_design_evaluate(tmp_path):
    for run in ("a", "b"):
        assert main(["design", "--preset", "paper-lattice-1pt", "--seed", "4",
                     "--out", str(tmp_path / run)]) == 0
    a = _tree(tmp_path / "a")
    assert a == _tree(tmp_path / "b")
    assert {"lattice.csv", "objective.txt", "field.csv", "gain_db.txt", "manifest.json"} <= set(a)
    rows = a["lattice.csv"].decode().split("\r\n")
    assert rows[0] == "i,j,theta_deg,phi_deg,assignment"
    assert len([r for r in rows[1:] if r]) == 400
    gain = float(a["gain_db.txt"].split()[1])
    assert gain > 3
    assert main(["evaluate", str(tmp_path / "a" / "lattice.csv"), "--preset", "paper-lattice-1pt",
                 "--out", str(tmp_path / "ev")]) == 0
    ev = _tree(tmp_path / "ev")
    assert ev["gain_db.txt"] == a["gain_db.txt"]
    assert ev["field.csv"] == a["field.csv"]


def test_design_infeasible(tmp_path, capsys):
    p, t = np.array([0.3, 1.0, 0.1]), np.array([0.0, 2.5, 0.0])
    excess = np.linalg.norm(p) + np.linalg.norm(t - p) - np.linalg.norm(t)
    (tmp_path / "lat.json").write_text(json.dumps(
        {"rows": 1, "cols": 1, "spacing": 0.04, "center": p.tolist(), "wavelength_m": excess / 6.5}))
    (tmp_path / "focal.json").write_text(json.dumps({"targets": [t.tolist()]}))
    rc = main(["design", str(tmp_path / "lat.json"), str(tmp_path / "focal.json"), "--seed", "0",
               "--out", str(tmp_path / "o")])
    assert rc == 4
    assert "[1]" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_design_needs_seed(tmp_path):
    with pytest.raises(SystemExit):
        main(["design", "--preset", "paper-lattice-1pt", "--out", str(tmp_path / "o")])


def test_evaluate_bad_lattice_csv(tmp_path):
    (tmp_path / "l.csv").write_text("i,j,theta_deg,phi_deg,assignment\r\n0,0,0,90,0\r\n")
    rc = main(["evaluate", str(tmp_path / "l.csv"), "--preset", "paper-lattice-1pt",
               "--out", str(tmp_path / "o")])
    assert rc == 3


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "edgediff.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "simulate" in r.stdout and "design" in r.stdout

"""Command line front-end: ``simulate``, ``image``, ``design``, ``evaluate``.

Exit codes: 0 ok, 2 parse error, 3 geometry or dimension error, 4 infeasible design.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import backend, presets
from .forward import (Box, DiffractingEdge, PowerGrid, Scatterer, Scene, Transmitter,
                      field_parts, wavelength_from_frequency)
from .geometry import EdgeSegment, GeometryError, PlanarGrid, angles_to_orientation
from .imaging import OrientationSet, default_plane, edge_image
from .io import (FOCAL_SCHEMA, LATTICE_SCHEMA, SCENE_SCHEMA, ParseError, amplitude,
                 grid_csv_text, grid_from_dict, grid_to_dict, load_json, pgm_bytes,
                 read_grid_csv, write_outputs)
from .lattice import (Assignment, DesignedLattice, FocalSet, InfeasibleDesignError,
                      LatticeSpec, Schedule, design, evaluate_field, gain_db)

log = logging.getLogger("edgediff")

EXIT_OK, EXIT_PARSE, EXIT_GEOMETRY, EXIT_INFEASIBLE = 0, 2, 3, 4


class DimensionError(GeometryError):
    pass


# ------------------------------------------------------------------ simulate

def build_scene(doc: dict, preset: str | None) -> tuple[Scene, PlanarGrid]:
    preset = doc.get("preset", preset)
    base = presets.imaging_preset() if preset == "paper-imaging" else None
    if "wavelength_m" in doc:
        lam = doc["wavelength_m"]
    elif "frequency_hz" in doc:
        lam = wavelength_from_frequency(doc["frequency_hz"])
    elif base is not None:
        lam = base["wavelength"]
    else:
        raise ParseError("<scene>", "scene needs frequency_hz or wavelength_m (or a preset)")
    if "transmitters" in doc:
        txs = [Transmitter(t["position"], amplitude(t.get("amplitude"))) for t in doc["transmitters"]]
    elif base is not None:
        txs = [Transmitter(p) for p in base["transmitters"]]
    else:
        raise ParseError("<scene>", "scene needs transmitters (or a preset)")
    edges = []
    for e in doc.get("edges", []):
        if "angle_deg" in e:
            seg = EdgeSegment.in_plane(e["midpoint"], math.radians(e["angle_deg"]), e["half_length"])
        else:
            d = np.asarray(e["direction"], float)
            seg = EdgeSegment(e["midpoint"], d / np.linalg.norm(d), e["half_length"])
        edges.append(DiffractingEdge(seg, float(e.get("weight", 1.0))))
    objs = [Scatterer(s["position"], amplitude(s.get("amplitude"))) for s in doc.get("object_points", [])]
    bgs = [Scatterer(s["position"], amplitude(s.get("amplitude"))) for s in doc.get("background_points", [])]
    region = Box(doc["region"]["min"], doc["region"]["max"]) if "region" in doc else None
    grid = grid_from_dict(doc["grid"]) if "grid" in doc else presets.receiver_grid()
    return Scene(lam, txs, edges, objs, bgs, region), grid


def cmd_simulate(args) -> int:
    doc = load_json(args.scene, SCENE_SCHEMA) if args.scene else {}
    if not args.scene and not args.preset:
        raise ParseError("<args>", "simulate needs a scene file or --preset")
    scene, grid = build_scene(doc, args.preset)
    rng = np.random.default_rng(args.seed)
    files = {}
    for i in range(len(scene.transmitters)):
        parts = field_parts(scene.for_transmitter(i), grid)
        base = parts.direct + parts.background
        full = base + parts.objects
        p = np.abs(full) ** 2
        p_bg = np.abs(base) ** 2
        if args.noise_db is not None:
            sigma = float(np.max(np.abs(parts.direct) ** 2)) * 10 ** (args.noise_db / 10)
            p = p + rng.normal(0.0, sigma, p.shape)
            p_bg = p_bg + rng.normal(0.0, sigma, p_bg.shape)
        files[f"tx{i}/field.csv"] = grid_csv_text(grid, full)
        files[f"tx{i}/power.csv"] = grid_csv_text(grid, p)
        files[f"tx{i}/power_bg.csv"] = grid_csv_text(grid, p_bg)
        files[f"tx{i}/sbar.csv"] = grid_csv_text(grid, p - p_bg)
    config = {
        "command": "simulate", "scene": args.scene, "preset": args.preset, "seed": args.seed,
        "noise_db": args.noise_db, "wavelength_m": scene.wavelength,
        "transmitters": [t.position for t in scene.transmitters],
        "grid": grid_to_dict(grid), "backend": backend.NAME,
    }
    write_outputs(args.out, files, config)
    log.info("simulate: wrote %d transmitter views to %s", len(scene.transmitters), args.out)
    return EXIT_OK


# --------------------------------------------------------------------- image

def _parse_vec(text: str) -> np.ndarray:
    try:
        v = [float(x) for x in text.split(",")]
    except ValueError:
        raise ParseError("<args>", f"bad vector {text!r}") from None
    if len(v) != 3:
        raise ParseError("<args>", f"vector {text!r} needs three components")
    return np.array(v)


def _image_inputs(args):
    lam = None
    if args.sim:
        sim = Path(args.sim)
        try:
            man = json.loads((sim / "manifest.json").read_text())["config"]
        except (OSError, ValueError, KeyError) as exc:
            raise ParseError(sim / "manifest.json", f"unreadable simulation manifest ({exc})") from None
        txs = [np.asarray(t, float) for t in man["transmitters"]]
        paths = [sim / f"tx{i}" / "sbar.csv" for i in range(len(txs))]
        lam = man.get("wavelength_m")
    else:
        if not args.sbar or len(args.sbar) != len(args.tx or []):
            raise ParseError("<args>", "give one --tx per --sbar file (or --sim DIR)")
        paths = [Path(p) for p in args.sbar]
        txs = [_parse_vec(t) for t in args.tx]
    if args.wavelength:
        lam = args.wavelength
    elif args.freq:
        lam = wavelength_from_frequency(args.freq)
    if lam is None:
        lam = presets.imaging_preset()["wavelength"]
    grids = [read_grid_csv(p) for p in paths]
    g0 = grids[0][0]
    for (g, _), p in zip(grids, paths):
        if g.shape != g0.shape:
            raise DimensionError(f"{p}: grid {g.shape} does not match {g0.shape}")
    views = [(PowerGrid(g, s.real if np.iscomplexobj(s) else s), t) for (g, s), t in zip(grids, txs)]
    return views, lam, [str(p) for p in paths]


def cmd_image(args) -> int:
    views, lam, paths = _image_inputs(args)
    phis = OrientationSet.uniform(args.phi_pitch_deg)
    plane = default_plane(args.plane_depth, args.plane_size, args.plane_pitch)
    vol = edge_image(views, plane, phis, lam, args.threshold_frac, args.normalize_by_signature)
    files = {}
    for i, m in enumerate(vol.view_max()):
        files[f"intensity_tx{i}.csv"] = grid_csv_text(plane, m)
    files["fused.csv"] = grid_csv_text(plane, vol.fused)
    files["orientation_map.csv"] = grid_csv_text(plane, np.round(np.degrees(vol.orientation_map), 9))
    files["mask.csv"] = grid_csv_text(plane, vol.mask.astype(float))
    files["heatmap.pgm"] = pgm_bytes(vol.fused)
    config = {
        "command": "image", "sbar": paths, "transmitters": vol.transmitters,
        "wavelength_m": lam, "phi_pitch_deg": args.phi_pitch_deg,
        "threshold_frac": args.threshold_frac, "normalize_by_signature": args.normalize_by_signature,
        "plane": grid_to_dict(plane), "status": vol.status, "backend": backend.NAME,
    }
    write_outputs(args.out, files, config)
    if vol.status != "ok":
        log.warning("image: %s", vol.status)
    return EXIT_OK


# -------------------------------------------------------------------- design

def _lattice_inputs(args):
    doc = load_json(args.lattice, LATTICE_SCHEMA) if args.lattice else {}
    preset = doc.get("preset", args.preset)
    base = presets.lattice_preset(preset) if preset else None
    if base is None and not {"rows", "cols", "spacing"} <= doc.keys():
        raise ParseError(args.lattice or "<args>", "lattice needs rows, cols and spacing (or a preset)")
    spec0 = base["spec"] if base else None
    if "wavelength_m" in doc:
        lam = doc["wavelength_m"]
    elif "frequency_hz" in doc:
        lam = wavelength_from_frequency(doc["frequency_hz"])
    else:
        lam = spec0.wavelength if spec0 else wavelength_from_frequency(presets.LATTICE_FREQ)
    spec = LatticeSpec(
        doc.get("rows", spec0.rows if spec0 else 0), doc.get("cols", spec0.cols if spec0 else 0),
        doc.get("spacing", spec0.spacing if spec0 else 0),
        doc.get("center", spec0.center if spec0 else presets.LATTICE_CENTER), lam,
        tuple(doc.get("element_size", spec0.element_size if spec0 else (0.03, 0.015))))
    if args.focal:
        targets = load_json(args.focal, FOCAL_SCHEMA)["targets"]
    elif base:
        targets = base["targets"]
    else:
        raise ParseError("<args>", "design needs a focal file (or a preset)")
    focal = FocalSet(targets)
    if "eval_grid" in doc:
        grid = grid_from_dict(doc["eval_grid"])
    elif base:
        grid = base["eval_grid"]
    else:
        grid = presets.eval_grid(float(np.mean([t[1] for t in focal.targets])))
    return spec, focal, grid, preset


def _lattice_csv(d: DesignedLattice) -> str:
    theta, phi = d.angles()
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["i", "j", "theta_deg", "phi_deg", "assignment"])
    t = d.assignment.targets
    for i in range(d.spec.rows):
        for j in range(d.spec.cols):
            w.writerow([i, j, repr(math.degrees(theta[i, j])), repr(math.degrees(phi[i, j])), int(t[i, j])])
    return buf.getvalue()


def _read_lattice_csv(path, spec: LatticeSpec, focal: FocalSet) -> DesignedLattice:
    path = Path(path)
    try:
        rows = list(csv.reader(path.read_text().splitlines()))
    except OSError as exc:
        raise ParseError(path, f"cannot read file: {exc.strerror}") from None
    if not rows or rows[0] != ["i", "j", "theta_deg", "phi_deg", "assignment"]:
        raise ParseError(path, "missing lattice header", 1, 1)
    dirs = np.zeros((spec.rows, spec.cols, 3))
    assign = np.zeros((spec.rows, spec.cols), dtype=np.int32)
    seen = np.zeros((spec.rows, spec.cols), dtype=bool)
    for n, r in enumerate(rows[1:], start=2):
        try:
            i, j, th, ph, a = int(r[0]), int(r[1]), float(r[2]), float(r[3]), int(r[4])
        except (IndexError, ValueError):
            raise ParseError(path, "malformed lattice row", n, 1) from None
        if not (0 <= i < spec.rows and 0 <= j < spec.cols) or not 0 <= a <= len(focal):
            raise DimensionError(f"{path}:{n}: element ({i}, {j}) or assignment {a} out of range")
        dirs[i, j] = angles_to_orientation(math.radians(th), math.radians(ph))
        assign[i, j] = a
        seen[i, j] = True
    if not seen.all():
        raise DimensionError(f"{path}: lattice file does not cover a {spec.rows}x{spec.cols} lattice")
    elig = np.ones((spec.rows, spec.cols, len(focal)), dtype=bool)
    return DesignedLattice(spec, focal, dirs, Assignment(assign, len(focal)), elig, float("nan"), -1)


def _field_outputs(d: DesignedLattice, grid: PlanarGrid) -> dict:
    pw = evaluate_field(d, grid)
    gains = gain_db(d)
    return {
        "field.csv": grid_csv_text(grid, pw.samples),
        "gain_db.txt": "".join(f"{k + 1} {float(g)!r}\n" for k, g in enumerate(gains)),
    }


def cmd_design(args) -> int:
    spec, focal, grid, preset = _lattice_inputs(args)
    sched = Schedule(args.iters, args.cooling)
    d = design(spec, focal, args.seed, sched, chains=args.chains)
    files = {"lattice.csv": _lattice_csv(d), "objective.txt": f"{d.objective!r}\n"}
    files.update(_field_outputs(d, grid))
    sizes = d.assignment.sizes()
    config = {
        "command": "design", "lattice": args.lattice, "focal": args.focal, "preset": preset,
        "seed": args.seed, "iters": args.iters, "cooling": args.cooling, "chains": args.chains,
        "rows": spec.rows, "cols": spec.cols, "spacing": spec.spacing, "center": spec.center,
        "wavelength_m": spec.wavelength, "targets": list(focal.targets),
        "partition_sizes": sizes, "eval_grid": grid_to_dict(grid), "backend": backend.NAME,
    }
    write_outputs(args.out, files, config)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    spec, focal, grid, preset = _lattice_inputs(args)
    d = _read_lattice_csv(args.lattice_csv, spec, focal)
    config = {"command": "evaluate", "lattice_csv": args.lattice_csv, "lattice": args.lattice,
              "focal": args.focal, "preset": preset, "eval_grid": grid_to_dict(grid),
              "backend": backend.NAME}
    write_outputs(args.out, _field_outputs(d, grid), config)
    return EXIT_OK


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgediff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize receiver-grid fields and subtracted power")
    s.add_argument("scene", nargs="?", help="scene JSON file")
    s.add_argument("--preset", choices=presets.IMAGING_PRESETS)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-db", type=float, help="Gaussian power noise, dB relative to peak direct-path power")
    s.set_defaults(func=cmd_simulate)

    im = sub.add_parser("image", help="edge image from subtracted power grids")
    im.add_argument("--sim", help="output directory of a simulate run")
    im.add_argument("--sbar", action="append", help="subtracted power CSV (repeat per transmitter)")
    im.add_argument("--tx", action="append", help="transmitter position x,y,z for the matching --sbar")
    im.add_argument("--out", required=True)
    im.add_argument("--freq", type=float, help="carrier frequency in Hz")
    im.add_argument("--wavelength", type=float, help="wavelength in meters")
    im.add_argument("--phi-pitch-deg", type=float, default=10.0)
    im.add_argument("--threshold-frac", type=float, default=0.5)
    im.add_argument("--normalize-by-signature", action="store_true")
    im.add_argument("--plane-depth", type=float, default=1.2)
    im.add_argument("--plane-size", type=float, default=1.4)
    im.add_argument("--plane-pitch", type=float, default=0.02)
    im.add_argument("--preset", choices=presets.IMAGING_PRESETS)
    im.set_defaults(func=cmd_image)

    for name, func, help_ in (("design", cmd_design, "orient and partition an edge lattice"),
                              ("evaluate", cmd_evaluate, "field of an existing lattice.csv")):
        d = sub.add_parser(name, help=help_)
        if name == "evaluate":
            d.add_argument("lattice_csv")
        d.add_argument("lattice", nargs="?", help="lattice spec JSON")
        d.add_argument("focal", nargs="?", help="focal points JSON")
        d.add_argument("--preset", choices=presets.LATTICE_PRESETS)
        d.add_argument("--out", required=True)
        if name == "design":
            d.add_argument("--seed", type=int, required=True)
            d.add_argument("--iters", type=int, default=10_000)
            d.add_argument("--cooling", type=float, default=0.999)
            d.add_argument("--chains", type=int, default=1)
        d.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleDesignError as exc:
        print(f"error: infeasible design: unreachable targets {exc.unreachable}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())

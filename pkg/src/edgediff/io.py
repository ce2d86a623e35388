"""File formats: JSON inputs, CSV grids, PGM heatmaps, run manifests.

Grid CSV layout (RFC 4180, ``\\r\\n`` line ends)::

    dims,<n_u>,<n_v>,<real|complex>
    pitch,<pitch_u>,<pitch_v>,origin,<x>,<y>,<z>,axis_u,<x>,<y>,<z>,axis_v,<x>,<y>,<z>
    <n_v rows of n_u values; row j holds v index j, column i holds u index i>

Values are written with ``repr`` so a read reproduces them exactly.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .geometry import PlanarGrid


class ParseError(ValueError):
    def __init__(self, path, message, line=None, column=None):
        self.path, self.line, self.column = str(path), line, column
        where = f"{path}"
        if line is not None:
            where += f":{line}:{column}"
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------- JSON inputs

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_AMP = {"oneOf": [{"type": "number"},
                  {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_GRID = {
    "type": "object",
    "required": ["origin", "axis_u", "axis_v", "n_u", "n_v", "pitch_u", "pitch_v"],
    "properties": {
        "origin": _VEC3, "axis_u": _VEC3, "axis_v": _VEC3,
        "n_u": {"type": "integer", "minimum": 1}, "n_v": {"type": "integer", "minimum": 1},
        "pitch_u": {"type": "number", "exclusiveMinimum": 0},
        "pitch_v": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}
_SCATTERER = {
    "type": "object", "required": ["position"],
    "properties": {"position": _VEC3, "amplitude": _AMP}, "additionalProperties": False,
}

SCENE_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["paper-imaging"]},
        "frequency_hz": {"type": "number", "exclusiveMinimum": 0},
        "wavelength_m": {"type": "number", "exclusiveMinimum": 0},
        "transmitters": {"type": "array", "items": _SCATTERER},
        "edges": {"type": "array", "items": {
            "type": "object", "required": ["midpoint", "half_length"],
            "properties": {
                "midpoint": _VEC3, "direction": _VEC3,
                "angle_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 180},
                "half_length": {"type": "number", "exclusiveMinimum": 0},
                "weight": {"type": "number"},
            },
            "oneOf": [{"required": ["direction"]}, {"required": ["angle_deg"]}],
            "additionalProperties": False,
        }},
        "object_points": {"type": "array", "items": _SCATTERER},
        "background_points": {"type": "array", "items": _SCATTERER},
        "region": {"type": "object", "required": ["min", "max"],
                   "properties": {"min": _VEC3, "max": _VEC3}, "additionalProperties": False},
        "grid": _GRID,
    },
    "additionalProperties": False,
}

LATTICE_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"enum": ["paper-lattice-1pt", "paper-lattice-4pt"]},
        "rows": {"type": "integer", "minimum": 1},
        "cols": {"type": "integer", "minimum": 1},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "center": _VEC3,
        "frequency_hz": {"type": "number", "exclusiveMinimum": 0},
        "wavelength_m": {"type": "number", "exclusiveMinimum": 0},
        "element_size": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                         "minItems": 2, "maxItems": 2},
        "eval_grid": _GRID,
    },
    "additionalProperties": False,
}

FOCAL_SCHEMA = {
    "type": "object", "required": ["targets"],
    "properties": {"targets": {"type": "array", "items": _VEC3, "minItems": 1}},
    "additionalProperties": False,
}


def load_json(path, schema: dict) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(path, f"cannot read file: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.msg, exc.lineno, exc.colno) from None
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(path, f"at {loc}: {exc.message}") from None
    return doc


def amplitude(value) -> complex:
    if value is None:
        return 1.0 + 0j
    if isinstance(value, list):
        return complex(value[0], value[1])
    return complex(value)


def grid_from_dict(d: dict) -> PlanarGrid:
    return PlanarGrid(d["origin"], d["axis_u"], d["axis_v"], d["n_u"], d["n_v"], d["pitch_u"], d["pitch_v"])


def grid_to_dict(g: PlanarGrid) -> dict:
    return {"origin": g.origin.tolist(), "axis_u": g.axis_u.tolist(), "axis_v": g.axis_v.tolist(),
            "n_u": g.n_u, "n_v": g.n_v, "pitch_u": g.pitch_u, "pitch_v": g.pitch_v}


# ------------------------------------------------------------------ CSV grids

def _fmt(x, kind: str) -> str:
    if kind == "complex":
        return repr(complex(x))
    return repr(float(x))


def grid_csv_text(grid: PlanarGrid, samples: np.ndarray) -> str:
    s = np.asarray(samples)
    kind = "complex" if np.iscomplexobj(s) else "real"
    s = s.reshape(grid.shape)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["dims", grid.n_u, grid.n_v, kind])
    w.writerow(["pitch", repr(grid.pitch_u), repr(grid.pitch_v),
                "origin", *map(repr, grid.origin.tolist()),
                "axis_u", *map(repr, grid.axis_u.tolist()),
                "axis_v", *map(repr, grid.axis_v.tolist())])
    for j in range(grid.n_v):
        w.writerow([_fmt(s[i, j], kind) for i in range(grid.n_u)])
    return buf.getvalue()


def read_grid_csv(path) -> tuple[PlanarGrid, np.ndarray]:
    path = Path(path)
    try:
        rows = list(csv.reader(path.read_text().splitlines()))
    except OSError as exc:
        raise ParseError(path, f"cannot read file: {exc.strerror}") from None
    if len(rows) < 2 or not rows[0] or rows[0][0] != "dims":
        raise ParseError(path, "missing 'dims' header", 1, 1)
    try:
        n_u, n_v, kind = int(rows[0][1]), int(rows[0][2]), rows[0][3]
    except (IndexError, ValueError):
        raise ParseError(path, "malformed 'dims' header", 1, 1) from None
    h = rows[1]
    try:
        if h[0] != "pitch" or h[3] != "origin" or h[7] != "axis_u" or h[11] != "axis_v":
            raise ValueError
        pu, pv = float(h[1]), float(h[2])
        origin = [float(x) for x in h[4:7]]
        au = [float(x) for x in h[8:11]]
        av = [float(x) for x in h[12:15]]
    except (IndexError, ValueError):
        raise ParseError(path, "malformed 'pitch' header", 2, 1) from None
    grid = PlanarGrid(origin, au, av, n_u, n_v, pu, pv)
    body = rows[2:]
    if len(body) != n_v:
        raise ParseError(path, f"expected {n_v} data rows, found {len(body)}", 3, 1)
    conv = complex if kind == "complex" else float
    out = np.zeros((n_u, n_v), dtype=complex if kind == "complex" else float)
    for j, row in enumerate(body):
        if len(row) != n_u:
            raise ParseError(path, f"expected {n_u} values, found {len(row)}", j + 3, 1)
        for i, cell in enumerate(row):
            try:
                out[i, j] = conv(cell)
            except ValueError:
                raise ParseError(path, f"bad value {cell!r}", j + 3, i + 1) from None
    return grid, out


# --------------------------------------------------------------- PGM heatmap

def pgm_bytes(image: np.ndarray) -> bytes:
    """8-bit binary PGM of a ``(n_u, n_v)`` map, max-normalized, +v pointing up."""
    a = np.asarray(image, dtype=float)
    top = float(np.nanmax(a)) if a.size else 0.0
    scaled = np.zeros_like(a) if top <= 0 else np.clip(a / top, 0, 1) * 255.0
    pix = np.round(np.nan_to_num(scaled)).astype(np.uint8).T[::-1]
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ParseError(path, "not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


# ----------------------------------------------------------- atomic outputs

def write_atomic(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir, files: dict, config: dict) -> dict:
    """Write ``{relative name: bytes|str}`` atomically, then a manifest with checksums."""
    out_dir = Path(out_dir)
    sums = {}
    for name in sorted(files):
        data = files[name]
        raw = data.encode() if isinstance(data, str) else data
        write_atomic(out_dir / name, raw)
        sums[name] = hashlib.sha256(raw).hexdigest()
    manifest = {"config": config, "files": sums}
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return manifest


def _jsonable(x: Any):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serializable: {type(x).__name__}")

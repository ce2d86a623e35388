"""Receiver-grid field synthesis for transmitters, edges and point scatterers.

The received baseband signal at each grid point is the superposition of the
direct path, background scatterers and the objects inside the scene region.
Every scattered path carries ``alpha(p_t, p) g(p_t, p) alpha(p, p_r)``.
Edges contribute only where the grid point sits on the Keller cone of one of
their discretized points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import backend
from .geometry import (EdgeSegment, GeometryError, PlanarGrid, as_point,
                       distance)

C_LIGHT = 299_792_458.0
EDGE_STEP_FRACTION = 0.1


@dataclass(frozen=True)
class Transmitter:
    position: np.ndarray
    amplitude: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class Scatterer:
    """Specular point scatterer with complex reflectivity."""

    position: np.ndarray
    amplitude: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class DiffractingEdge:
    segment: EdgeSegment
    weight: float = 1.0


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_point(self.lo))
        object.__setattr__(self, "hi", as_point(self.hi))
        if np.any(self.hi < self.lo):
            raise GeometryError("box upper corner below lower corner")

    def contains(self, p) -> bool:
        p = as_point(p)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True)
class Scene:
    wavelength: float
    transmitters: tuple = ()
    edges: tuple = ()
    object_points: tuple = ()
    background_points: tuple = ()
    region: Optional[Box] = None
    edge_step: Optional[float] = None

    def __post_init__(self):
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")
        for name in ("transmitters", "edges", "object_points", "background_points"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.region is not None:
            for i, e in enumerate(self.edges):
                for end in (-1, 1):
                    p = e.segment.midpoint + end * e.segment.half_length * e.segment.direction
                    if not self.region.contains(p):
                        raise GeometryError(f"edge {i} leaves the scene region")
            for i, s in enumerate(self.object_points):
                if not self.region.contains(s.position):
                    raise GeometryError(f"object point {i} lies outside the scene region")
            for i, s in enumerate(self.background_points):
                if self.region.contains(s.position):
                    raise GeometryError(f"background point {i} lies inside the scene region")

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def step(self) -> float:
        return self.edge_step if self.edge_step is not None else EDGE_STEP_FRACTION * self.wavelength

    def for_transmitter(self, i: int) -> "Scene":
        return replace(self, transmitters=(self.transmitters[i],))

    def without_objects(self) -> "Scene":
        return replace(self, edges=(), object_points=())


def wavelength_from_frequency(freq_hz: float) -> float:
    return C_LIGHT / freq_hz


@dataclass(frozen=True)
class FieldGrid:
    grid: PlanarGrid
    samples: np.ndarray  # complex, shape grid.shape

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.size != self.grid.size:
            raise GeometryError("sample count does not match grid size")
        object.__setattr__(self, "samples", s.reshape(self.grid.shape))


@dataclass(frozen=True)
class PowerGrid:
    grid: PlanarGrid
    samples: np.ndarray  # real, shape grid.shape

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.size != self.grid.size:
            raise GeometryError("sample count does not match grid size")
        object.__setattr__(self, "samples", s.reshape(self.grid.shape))


def path_amplitude(p_t, p_o, p_r, kind: str, source_amplitude: float = 1.0) -> float:
    """Spreading loss of the path ``p_t -> p_o -> p_r``.

    Spherical spreading on the first leg; the second leg decays as ``1/sqrt(r)``
    off an edge and ``1/r`` off a point scatterer.
    """
    d1 = distance(p_t, p_o)
    d2 = distance(p_o, p_r)
    if d1 == 0.0 or d2 == 0.0:
        raise GeometryError("path amplitude of coincident points")
    if kind == "edge":
        return source_amplitude / (d1 * math.sqrt(d2))
    if kind == "point":
        return source_amplitude / (d1 * d2)
    raise ValueError(f"unknown path kind {kind!r}")


def _distances(points: np.ndarray, p) -> np.ndarray:
    d = points - p[None, :]
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])


def _point_terms(scene: Scene, tx: Transmitter, pts: np.ndarray, scatterers, label: str) -> np.ndarray:
    k = scene.wavenumber
    out = np.zeros(pts.shape[0], dtype=complex)
    for i, s in enumerate(scatterers):
        d1 = distance(tx.position, s.position)
        if d1 == 0.0:
            raise GeometryError(f"{label} {i} coincides with a transmitter")
        d2 = _distances(pts, s.position)
        if np.any(d2 == 0.0):
            raise GeometryError(f"{label} {i} coincides with a receiver")
        out += (tx.amplitude * s.amplitude / (d1 * d2)) * np.exp(-1j * k * (d1 + d2))
    return out


def _edge_terms(scene: Scene, tx: Transmitter, grid: PlanarGrid, pts: np.ndarray, kernels) -> tuple:
    k = scene.wavenumber
    half_diag = 0.5 * grid.pitch_diag
    out = np.zeros(pts.shape[0], dtype=complex)
    support = np.zeros(pts.shape[0], dtype=bool)
    for i, edge in enumerate(scene.edges):
        seg = edge.segment
        if abs(grid.signed_distance(seg.midpoint)) < 1e-12:
            raise GeometryError(f"edge {i} lies on the receiver plane")
        src = seg.discretize(scene.step)
        to_tx = tx.position[None, :] - src
        d1 = np.sqrt(np.sum(to_tx * to_tx, axis=1))
        if np.any(d1 == 0.0):
            raise GeometryError(f"edge {i} passes through a transmitter")
        if np.any(_min_distances(pts, src) == 0.0):
            raise GeometryError(f"edge {i} passes through a receiver")
        pref = tx.amplitude * edge.weight * np.exp(-1j * k * d1) / d1
        dirs = np.broadcast_to(seg.direction, src.shape)
        f, cnt = kernels.cone_sum(pts, src, pref, to_tx / d1[:, None], dirs, k, half_diag, -1.0, True)
        out += f
        support |= cnt > 0
    return out, support


def _min_distances(pts: np.ndarray, src: np.ndarray) -> np.ndarray:
    return np.array([_distances(pts, s).min() for s in src])


@dataclass
class FieldParts:
    """Per-receiver components of the received signal."""

    direct: np.ndarray
    background: np.ndarray
    objects: np.ndarray
    edge_support: np.ndarray = field(default=None)


def field_parts(scene: Scene, grid: PlanarGrid, kernels=None) -> FieldParts:
    """Direct, background and object sums at every grid point, summed over transmitters."""
    kernels = kernels or backend.kernels
    pts = grid.points()
    k = scene.wavenumber
    direct = np.zeros(pts.shape[0], dtype=complex)
    bg = np.zeros_like(direct)
    obj = np.zeros_like(direct)
    support = np.zeros(pts.shape[0], dtype=bool)
    for ti, tx in enumerate(scene.transmitters):
        d = _distances(pts, tx.position)
        if np.any(d == 0.0):
            raise GeometryError(f"transmitter {ti} coincides with a receiver")
        direct += tx.amplitude * np.exp(-1j * k * d) / d
        bg += _point_terms(scene, tx, pts, scene.background_points, "background point")
        obj += _point_terms(scene, tx, pts, scene.object_points, "object point")
        e, s = _edge_terms(scene, tx, grid, pts, kernels)
        obj += e
        support |= s
    shape = grid.shape
    return FieldParts(direct.reshape(shape), bg.reshape(shape), obj.reshape(shape), support.reshape(shape))


def simulate_field(scene: Scene, grid: PlanarGrid, with_objects: bool = True, kernels=None) -> FieldGrid:
    """Complex received signal on ``grid``; ``with_objects=False`` gives the background-only scene."""
    if not with_objects:
        scene = scene.without_objects()
    parts = field_parts(scene, grid, kernels)
    return FieldGrid(grid, parts.direct + parts.background + parts.objects)


def power(field: FieldGrid) -> PowerGrid:
    s = field.samples
    return PowerGrid(field.grid, s.real * s.real + s.imag * s.imag)


def background_subtract(p_with: PowerGrid, p_bg: PowerGrid) -> PowerGrid:
    if not p_with.grid.same_as(p_bg.grid):
        raise GeometryError("power grids do not share a receiver grid")
    return PowerGrid(p_with.grid, p_with.samples - p_bg.samples)


def subtracted_power(scene: Scene, grid: PlanarGrid, kernels=None) -> PowerGrid:
    """Background-subtracted power for ``scene`` in one call."""
    parts = field_parts(scene, grid, kernels)
    base = parts.direct + parts.background
    full = base + parts.objects
    return PowerGrid(grid, np.abs(full) ** 2 - np.abs(base) ** 2)


def power_decomposition(parts: FieldParts) -> dict:
    """Exact split of ``P - P_bg`` into object power and the two cross terms.

    ``object_power + direct_cross + background_cross`` equals the subtracted
    power identically; the first-order model keeps only ``direct_cross``.
    """
    o = parts.objects
    return {
        "object_power": np.abs(o) ** 2,
        "direct_cross": 2 * np.real(o * np.conj(parts.direct)),
        "background_cross": 2 * np.real(o * np.conj(parts.background)),
    }


def first_order_subtracted(scene: Scene, grid: PlanarGrid) -> np.ndarray:
    """Evaluate ``2 Re{sum Lambda g*(p_t, p_r) g(p_o, p_r)}`` over point scatterers directly.

    Each path amplitude carries the direct-path factor ``alpha*(p_t, p_r)`` and
    the transmitter-to-scatterer phase. Edges are not included; this is the
    reference used to check the subtraction model on point-scatterer scenes.
    """
    if scene.edges:
        raise ValueError("first_order_subtracted handles point scatterers only")
    pts = grid.points()
    k = scene.wavenumber
    total = np.zeros(pts.shape[0])
    for tx in scene.transmitters:
        d_tr = _distances(pts, tx.position)
        alpha_direct = tx.amplitude / d_tr
        g_tr = np.exp(-1j * k * d_tr)
        acc = np.zeros(pts.shape[0], dtype=complex)
        for s in scene.object_points:
            d_to = distance(tx.position, s.position)
            d_or = _distances(pts, s.position)
            lam = s.amplitude * tx.amplitude / (d_to * d_or) * np.conj(alpha_direct) * np.exp(-1j * k * d_to)
            acc += lam * np.conj(g_tr) * np.exp(-1j * k * d_or)
        total += 2 * np.real(acc)
    return total.reshape(grid.shape)


def add_power_noise(p: PowerGrid, sigma: float, rng: np.random.Generator) -> PowerGrid:
    return PowerGrid(p.grid, p.samples + rng.normal(0.0, sigma, size=p.samples.shape))

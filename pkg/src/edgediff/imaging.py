"""Edge imaging from background-subtracted receiver power.

For every candidate pixel ``p_m`` and in-plane orientation ``phi`` the
subtracted power is phase-compensated and summed coherently over the
receivers on that hypothesis' Keller conic. The orientation with the largest
magnitude wins; pixels above a fraction of the global maximum form the edge
mask. Several transmitter views are fused by max-normalizing each view and
averaging.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backend
from .forward import PowerGrid
from .geometry import (PlanarGrid, as_point, band_tolerance, distance,
                       in_plane_direction, keller_residual)

log = logging.getLogger(__name__)

DEFAULT_PLANE_DEPTH = 1.2
DEFAULT_PLANE_SIZE = 1.4
DEFAULT_PLANE_PITCH = 0.02
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class OrientationSet:
    angles: tuple

    def __post_init__(self):
        a = tuple(float(x) for x in self.angles)
        if not a:
            raise ValueError("orientation set is empty")
        if any(x < 0 or x >= math.pi for x in a):
            raise ValueError("orientations must lie in [0, pi)")
        if any(b <= c for c, b in zip(a, a[1:])):
            raise ValueError("orientations must be strictly increasing")
        object.__setattr__(self, "angles", a)

    @classmethod
    def uniform(cls, pitch_deg: float = 10.0) -> "OrientationSet":
        n = int(round(180.0 / pitch_deg))
        if n < 1 or abs(n * pitch_deg - 180.0) > 1e-9:
            raise ValueError("orientation pitch must divide 180 degrees")
        return cls(tuple(math.radians(i * pitch_deg) for i in range(n)))

    def __len__(self):
        return len(self.angles)

    def directions(self) -> np.ndarray:
        return np.array([in_plane_direction(a) for a in self.angles])


def default_plane(depth: float = DEFAULT_PLANE_DEPTH, size: float = DEFAULT_PLANE_SIZE,
                  pitch: float = DEFAULT_PLANE_PITCH) -> PlanarGrid:
    """Square imaging plane parallel to the receivers, centered on the y axis."""
    n = int(round(size / pitch)) + 1
    return PlanarGrid.centered((0.0, depth, 0.0), (1, 0, 0), (0, 0, 1), n, n, pitch, pitch)


@dataclass
class ImagingVolume:
    plane: PlanarGrid
    phis: OrientationSet
    transmitters: np.ndarray  # (V, 3)
    intensities: np.ndarray  # (V, P, n_u, n_v)
    fused: np.ndarray  # (n_u, n_v)
    orientation_map: np.ndarray  # (n_u, n_v) radians
    mask: np.ndarray  # (n_u, n_v) bool
    status: str = "ok"

    def view_max(self) -> np.ndarray:
        """Per-view intensity maximized over orientation, shape ``(V, n_u, n_v)``."""
        return self.intensities.max(axis=1)

    def peak_index(self) -> tuple:
        return np.unravel_index(int(np.argmax(self.fused)), self.fused.shape)


def imaging_kernel(p_m, p_r, p_t, phi: float, grid: PlanarGrid, wavelength: float) -> complex:
    """``g(p_t, p_r) g*(p_m, p_r)`` when ``p_r`` is on the conic of the hypothesis, else 0."""
    e = in_plane_direction(phi)
    d = distance(p_r, p_m)
    if abs(keller_residual(p_t, p_m, e, p_r)) > band_tolerance(grid, d):
        return 0j
    k = 2 * math.pi / wavelength
    return complex(np.exp(-1j * k * (distance(p_t, p_r) - d)))


def _weights(s_bar: PowerGrid, p_t, wavelength: float) -> tuple:
    pts = s_bar.grid.points()
    d = pts - as_point(p_t)[None, :]
    d_tr = np.sqrt(np.sum(d * d, axis=1))
    return pts, s_bar.samples.ravel() * np.exp(-2j * math.pi / wavelength * d_tr)


def intensity_map(s_bar: PowerGrid, pixels, p_t, phis: OrientationSet, wavelength: float,
                  normalize_by_signature: bool = False, kernels=None) -> np.ndarray:
    """Intensity for every pixel in ``pixels`` (``(M, 3)``) and every orientation, ``(M, P)``."""
    kernels = kernels or backend.kernels
    rx, w = _weights(s_bar, p_t, wavelength)
    return kernels.intensity_volume(rx, w, np.atleast_2d(np.asarray(pixels, float)), as_point(p_t),
                                    phis.directions(), 2 * math.pi / wavelength,
                                    0.5 * s_bar.grid.pitch_diag, normalize_by_signature)


def intensity(s_bar: PowerGrid, p_m, phi: float, p_t, wavelength: float,
              normalize_by_signature: bool = False, kernels=None) -> float:
    """Coherent conic-gated sum magnitude for one hypothesis (0 if the cone misses)."""
    return float(intensity_map(s_bar, [as_point(p_m)], p_t, OrientationSet((phi,)), wavelength,
                               normalize_by_signature, kernels)[0, 0])


def orientation_argmax(s_bar: PowerGrid, p_m, phis: OrientationSet, p_t, wavelength: float,
                       normalize_by_signature: bool = False, kernels=None) -> tuple[float, float]:
    """Best orientation at ``p_m`` and its intensity; ties go to the lowest index."""
    vals = intensity_map(s_bar, [as_point(p_m)], p_t, phis, wavelength, normalize_by_signature, kernels)[0]
    i = int(np.argmax(vals))
    return phis.angles[i], float(vals[i])


def edge_image(views: Sequence[tuple], plane: PlanarGrid, phis: OrientationSet, wavelength: float,
               threshold_frac: float = DEFAULT_THRESHOLD, normalize_by_signature: bool = False,
               kernels=None) -> ImagingVolume:
    """Image edges on ``plane`` from ``views = [(s_bar, p_t), ...]``."""
    if not views:
        raise ValueError("need at least one transmitter view")
    if not 0.0 < threshold_frac <= 1.0:
        raise ValueError("threshold_frac must lie in (0, 1]")
    pixels = plane.points()
    stack = []
    for s_bar, p_t in views:
        vol = intensity_map(s_bar, pixels, p_t, phis, wavelength, normalize_by_signature, kernels)
        stack.append(vol.T.reshape((len(phis),) + plane.shape))
    intens = np.stack(stack)
    per_view = intens.max(axis=1)
    best_dir = intens.argmax(axis=1)
    gmax = per_view.reshape(len(views), -1).max(axis=1)
    norm = np.zeros_like(per_view)
    live = gmax > 0
    norm[live] = per_view[live] / gmax[live, None, None]
    fused = norm.mean(axis=0)
    strongest = per_view.argmax(axis=0)
    dir_idx = np.take_along_axis(best_dir, strongest[None], axis=0)[0]
    orientation = np.asarray(phis.angles)[dir_idx]
    status = "ok"
    top = float(fused.max())
    if top <= 0.0:
        mask = np.zeros(plane.shape, dtype=bool)
        status = "empty: no signal in any view"
        log.warning("edge_image: all views are zero, mask is empty")
    else:
        mask = fused >= threshold_frac * top
    txs = np.array([as_point(p) for _, p in views])
    return ImagingVolume(plane, phis, txs, intens, fused, orientation, mask, status)

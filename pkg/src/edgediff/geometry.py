"""Vector geometry shared by the simulator, the imager and the lattice designer.

Points and directions are plain ``numpy`` arrays of shape ``(3,)``. The
receiver grid lives in the plane ``y = 0`` with the scene at ``y > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Degenerate or invalid geometric input."""


def as_point(p: Sequence[float]) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite point {a!r}")
    return a


def as_unit(v: Sequence[float], normalize: bool = False) -> np.ndarray:
    a = as_point(v)
    n = _norm(a)
    if normalize:
        if n == 0.0:
            raise GeometryError("cannot normalize the zero vector")
        return a / n
    if abs(n - 1.0) > UNIT_TOL:
        raise GeometryError(f"vector {a!r} is not unit length (norm {n!r})")
    return a


def _norm(a) -> float:
    # explicit component form so scalar and vectorized paths round identically
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def distance(a, b) -> float:
    return _norm((a[0] - b[0], a[1] - b[1], a[2] - b[2]))


def keller_residual(p_t, p_e, e_hat, p_r) -> float:
    """Return ``<unit(p_r - p_e) + unit(p_t - p_e), e_hat>``.

    Zero exactly when ``p_r`` lies on the Keller cone of diffracted rays
    leaving ``p_e`` for an edge along ``e_hat`` lit from ``p_t``.
    """
    rx, ry, rz = p_r[0] - p_e[0], p_r[1] - p_e[1], p_r[2] - p_e[2]
    tx, ty, tz = p_t[0] - p_e[0], p_t[1] - p_e[1], p_t[2] - p_e[2]
    dr = math.sqrt(rx * rx + ry * ry + rz * rz)
    dt = math.sqrt(tx * tx + ty * ty + tz * tz)
    if dr == 0.0:
        raise GeometryError("receiver coincides with the edge point")
    if dt == 0.0:
        raise GeometryError("transmitter coincides with the edge point")
    ux = rx / dr + tx / dt
    uy = ry / dr + ty / dt
    uz = rz / dr + tz / dt
    return ux * e_hat[0] + uy * e_hat[1] + uz * e_hat[2]


def keller_residuals(p_t, p_e, e_hat, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`keller_residual` over an ``(N, 3)`` array of receivers.

    Arithmetic follows the scalar routine term by term, so both agree bitwise.
    """
    pts = np.asarray(points, dtype=float)
    rx = pts[:, 0] - p_e[0]
    ry = pts[:, 1] - p_e[1]
    rz = pts[:, 2] - p_e[2]
    tx, ty, tz = p_t[0] - p_e[0], p_t[1] - p_e[1], p_t[2] - p_e[2]
    dr = np.sqrt(rx * rx + ry * ry + rz * rz)
    dt = math.sqrt(tx * tx + ty * ty + tz * tz)
    if dt == 0.0:
        raise GeometryError("transmitter coincides with the edge point")
    if np.any(dr == 0.0):
        raise GeometryError("receiver coincides with the edge point")
    ux = rx / dr + tx / dt
    uy = ry / dr + ty / dt
    uz = rz / dr + tz / dt
    return ux * e_hat[0] + uy * e_hat[1] + uz * e_hat[2]


def green(p_a, p_b, wavelength: float) -> complex:
    """Free-space phase term ``exp(-j 2 pi |p_a - p_b| / wavelength)``."""
    if wavelength <= 0:
        raise GeometryError("wavelength must be positive")
    d = distance(p_a, p_b)
    if d == 0.0:
        raise GeometryError("green function of coincident points")
    return complex(np.exp(-2j * np.pi * d / wavelength))


def bisector_orientation(p_elem, p_target) -> np.ndarray:
    """Edge direction whose Keller cone, lit from the origin, passes ``p_target``.

    The direction is the normalized sum of ``unit(p_target - p_elem)`` and
    ``unit(p_elem)``. Raises :class:`GeometryError` when the two are antiparallel.
    """
    p_elem = as_point(p_elem)
    p_target = as_point(p_target)
    de = _norm(p_elem)
    dp = distance(p_target, p_elem)
    if de == 0.0:
        raise GeometryError("element sits on the source")
    if dp == 0.0:
        raise GeometryError("target coincides with the element")
    s = (p_target - p_elem) / dp + p_elem / de
    n = _norm(s)
    if n < 1e-12:
        raise GeometryError("degenerate orientation: target lies straight back toward the source")
    return s / n


def angles_to_orientation(theta: float, phi: float) -> np.ndarray:
    """``[cos(phi) sin(theta), cos(phi) cos(theta), sin(phi)]``."""
    c = math.cos(phi)
    return np.array([c * math.sin(theta), c * math.cos(theta), math.sin(phi)])


def orientation_to_angles(e) -> tuple[float, float]:
    """Inverse of :func:`angles_to_orientation`; theta is 0 for vertical edges."""
    e = as_unit(e)
    z = min(1.0, max(-1.0, float(e[2])))
    phi = math.asin(z)
    if math.hypot(e[0], e[1]) < 1e-12:
        return 0.0, phi
    theta = math.atan2(e[0], e[1]) % (2 * math.pi)
    return theta, phi


def in_plane_direction(phi: float) -> np.ndarray:
    """Direction of an edge lying parallel to the receiver plane at angle ``phi`` from +x."""
    return np.array([math.cos(phi), 0.0, math.sin(phi)])


@dataclass(frozen=True)
class EdgeSegment:
    midpoint: np.ndarray
    direction: np.ndarray
    half_length: float
    in_plane_angle: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "midpoint", as_point(self.midpoint))
        object.__setattr__(self, "direction", as_unit(self.direction))
        if not self.half_length > 0:
            raise GeometryError("edge half_length must be positive")
        if self.in_plane_angle is not None:
            if not 0.0 <= self.in_plane_angle < math.pi:
                raise GeometryError("in_plane_angle must lie in [0, pi)")
            expect = in_plane_direction(self.in_plane_angle)
            if np.max(np.abs(expect - self.direction)) > UNIT_TOL:
                raise GeometryError("direction disagrees with in_plane_angle")

    @classmethod
    def in_plane(cls, midpoint, phi: float, half_length: float) -> "EdgeSegment":
        return cls(midpoint, in_plane_direction(phi), half_length, phi)

    def discretize(self, step: float) -> np.ndarray:
        """Points along the segment at spacing ``step``, symmetric about the midpoint.

        Segments shorter than one step collapse to the midpoint alone.
        """
        if step <= 0:
            raise GeometryError("discretization step must be positive")
        n_half = int(math.floor(self.half_length / step + 1e-12))
        offsets = np.arange(-n_half, n_half + 1) * step
        return self.midpoint[None, :] + offsets[:, None] * self.direction[None, :]


@dataclass(frozen=True)
class PlanarGrid:
    """Rectangular lattice ``origin + i*pitch_u*axis_u + j*pitch_v*axis_v``."""

    origin: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    n_u: int
    n_v: int
    pitch_u: float
    pitch_v: float

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "axis_u", as_unit(self.axis_u))
        object.__setattr__(self, "axis_v", as_unit(self.axis_v))
        if abs(float(np.dot(self.axis_u, self.axis_v))) > UNIT_TOL:
            raise GeometryError("grid axes must be orthogonal")
        if self.n_u < 1 or self.n_v < 1:
            raise GeometryError("grid needs at least one point per axis")
        if not (self.pitch_u > 0 and self.pitch_v > 0):
            raise GeometryError("grid pitches must be positive")

    @classmethod
    def centered(cls, center, axis_u, axis_v, n_u, n_v, pitch_u, pitch_v) -> "PlanarGrid":
        center = as_point(center)
        au, av = as_unit(axis_u), as_unit(axis_v)
        origin = center - 0.5 * (n_u - 1) * pitch_u * au - 0.5 * (n_v - 1) * pitch_v * av
        return cls(origin, au, av, int(n_u), int(n_v), float(pitch_u), float(pitch_v))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_u, self.n_v)

    @property
    def size(self) -> int:
        return self.n_u * self.n_v

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.axis_u, self.axis_v)

    @property
    def pitch_diag(self) -> float:
        return math.sqrt(self.pitch_u ** 2 + self.pitch_v ** 2)

    def points(self) -> np.ndarray:
        """All grid points, shape ``(n_u * n_v, 3)``, flattened with ``u`` as the slow index."""
        iu, iv = np.meshgrid(np.arange(self.n_u), np.arange(self.n_v), indexing="ij")
        iu = iu.ravel()[:, None] * self.pitch_u
        iv = iv.ravel()[:, None] * self.pitch_v
        return self.origin[None, :] + iu * self.axis_u[None, :] + iv * self.axis_v[None, :]

    def point(self, iu: int, iv: int) -> np.ndarray:
        return self.origin + iu * self.pitch_u * self.axis_u + iv * self.pitch_v * self.axis_v

    def unravel(self, flat) -> tuple:
        return np.unravel_index(flat, self.shape)

    def nearest_index(self, p) -> tuple[int, int]:
        d = as_point(p) - self.origin
        iu = int(round(float(np.dot(d, self.axis_u)) / self.pitch_u))
        iv = int(round(float(np.dot(d, self.axis_v)) / self.pitch_v))
        return min(max(iu, 0), self.n_u - 1), min(max(iv, 0), self.n_v - 1)

    def signed_distance(self, p) -> float:
        return float(np.dot(as_point(p) - self.origin, self.normal))

    def same_as(self, other: "PlanarGrid", tol: float = 1e-12) -> bool:
        return (
            self.shape == other.shape
            and abs(self.pitch_u - other.pitch_u) <= tol
            and abs(self.pitch_v - other.pitch_v) <= tol
            and np.allclose(self.origin, other.origin, atol=tol, rtol=0)
            and np.allclose(self.axis_u, other.axis_u, atol=tol, rtol=0)
            and np.allclose(self.axis_v, other.axis_v, atol=tol, rtol=0)
        )


Tolerance = Union[None, float]


def band_tolerance(grid: PlanarGrid, distances):
    """Membership half-width: half a grid diagonal seen from ``distances`` away."""
    return 0.5 * grid.pitch_diag / distances


def membership_tolerance(tol_policy: Tolerance, grid: PlanarGrid, distances):
    if tol_policy is None:
        return band_tolerance(grid, distances)
    if tol_policy < 0:
        raise GeometryError("fixed tolerance must be nonnegative")
    return np.full_like(np.asarray(distances, dtype=float), float(tol_policy))


@dataclass(frozen=True)
class ConicSignature:
    """Grid points hit by one Keller cone, with their residuals."""

    member_indices: np.ndarray  # (M, 2) ints, (iu, iv)
    residuals: np.ndarray  # (M,)
    grid_shape: tuple = field(default=(0, 0))

    def __len__(self) -> int:
        return len(self.residuals)

    def index_set(self) -> set:
        return {(int(a), int(b)) for a, b in self.member_indices}

    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid_shape, dtype=bool)
        if len(self):
            m[self.member_indices[:, 0], self.member_indices[:, 1]] = True
        return m


def conic_signature(p_t, edge: EdgeSegment, grid: PlanarGrid, tol_policy: Tolerance = None) -> ConicSignature:
    """Receivers on ``grid`` that the Keller cone from the edge midpoint reaches.

    ``tol_policy=None`` uses the one-cell band of :func:`band_tolerance`; a
    float selects a fixed absolute tolerance on the residual.
    """
    p_t = as_point(p_t)
    p_e = edge.midpoint
    if abs(grid.signed_distance(p_e)) < 1e-12:
        raise GeometryError("edge midpoint lies on the grid plane")
    pts = grid.points()
    res = keller_residuals(p_t, p_e, edge.direction, pts)
    d = pts - p_e[None, :]
    dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])
    tol = membership_tolerance(tol_policy, grid, dist)
    hit = np.flatnonzero(np.abs(res) <= tol)
    iu, iv = grid.unravel(hit)
    return ConicSignature(np.stack([iu, iv], axis=1).astype(int), res[hit], grid.shape)

"""Edge-lattice metasurface design.

A transmitter at the origin lights a planar array of thin edge elements.
Each element is turned so its Keller cone passes through a chosen focal
point, kept only where its diffracted field adds constructively to the
direct path, and the elements are shared among several focal points by a
Metropolis walk over assignments that trades partition balance against
border length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import backend
from .forward import PowerGrid, wavelength_from_frequency
from .geometry import (GeometryError, PlanarGrid, as_point, bisector_orientation,
                       distance, keller_residual, orientation_to_angles)

IDLE = 0
IDLE_DIRECTION = np.array([0.0, 0.0, 1.0])
FOCAL_TOL = 1e-9
DEFAULT_ITERS = 10_000
DEFAULT_COOLING = 0.999


class InfeasibleDesignError(ValueError):
    def __init__(self, unreachable):
        self.unreachable = [int(k) for k in unreachable]
        super().__init__(f"no element can reach target(s) {self.unreachable}")


@dataclass(frozen=True)
class LatticeSpec:
    """Regular ``rows x cols`` array of edge elements; row 0 is the top row."""

    rows: int
    cols: int
    spacing: float
    center: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    wavelength: float = wavelength_from_frequency(5.18e9)
    element_size: tuple = (0.03, 0.015)
    source_amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if self.rows * self.cols < 1:
            raise GeometryError("lattice needs at least one element")
        if not self.spacing > 0:
            raise GeometryError("element spacing must be positive")
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def positions(self) -> np.ndarray:
        """Element positions, shape ``(rows, cols, 3)``, in the plane through ``center`` facing the source."""
        jj, ii = np.meshgrid(np.arange(self.cols), np.arange(self.rows))
        x = (jj - 0.5 * (self.cols - 1)) * self.spacing
        z = (0.5 * (self.rows - 1) - ii) * self.spacing
        pos = np.zeros((self.rows, self.cols, 3))
        pos[..., 0] = self.center[0] + x
        pos[..., 1] = self.center[1]
        pos[..., 2] = self.center[2] + z
        return pos

    def neighbors(self) -> np.ndarray:
        """4-connected neighbor table on flattened indices, ``-1`` padded, shape ``(size, 4)``."""
        out = np.full((self.size, 4), -1, dtype=np.int32)
        for i in range(self.rows):
            for j in range(self.cols):
                n = 0
                for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    a, b = i + di, j + dj
                    if 0 <= a < self.rows and 0 <= b < self.cols:
                        out[i * self.cols + j, n] = a * self.cols + b
                        n += 1
        return out


@dataclass(frozen=True)
class FocalSet:
    targets: tuple

    def __post_init__(self):
        t = tuple(as_point(p) for p in self.targets)
        if not t:
            raise ValueError("need at least one focal point")
        for a in range(len(t)):
            if np.linalg.norm(t[a]) == 0.0:
                raise GeometryError(f"target {a + 1} sits on the source")
            for b in range(a):
                if np.array_equal(t[a], t[b]):
                    raise GeometryError(f"targets {b + 1} and {a + 1} coincide")
        object.__setattr__(self, "targets", t)

    def __len__(self):
        return len(self.targets)


@dataclass
class Assignment:
    """Target index per element (``0`` idle, ``1..K`` targets), shape ``(rows, cols)``."""

    targets: np.ndarray
    n_targets: int

    def partitions(self) -> list:
        flat = self.targets.ravel()
        return [set(np.flatnonzero(flat == k).tolist()) for k in range(self.n_targets + 1)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.targets.ravel(), minlength=self.n_targets + 1)

    def validate(self, eligible: Optional[np.ndarray] = None) -> None:
        t = self.targets
        if t.min() < 0 or t.max() > self.n_targets:
            raise ValueError("assignment index out of range")
        if eligible is not None:
            rr, cc = np.nonzero(t)
            bad = ~eligible[rr, cc, t[rr, cc] - 1]
            if bad.any():
                raise ValueError(f"element {(int(rr[bad][0]), int(cc[bad][0]))} assigned to an ineligible target")


@dataclass
class DesignedLattice:
    spec: LatticeSpec
    focal: FocalSet
    directions: np.ndarray  # (rows, cols, 3)
    assignment: Assignment
    eligible: np.ndarray  # (rows, cols, K) bool
    objective: float
    seed: int
    history: Optional[np.ndarray] = None

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        theta = np.zeros((self.spec.rows, self.spec.cols))
        phi = np.zeros_like(theta)
        for i in range(self.spec.rows):
            for j in range(self.spec.cols):
                theta[i, j], phi[i, j] = orientation_to_angles(self.directions[i, j])
        return theta, phi


def field_contributions(spec: LatticeSpec, p_ij, e_ij, p, tol: float = FOCAL_TOL) -> tuple[complex, complex]:
    """Diffracted field of one element at ``p`` and the direct field there.

    The element contributes only if ``p`` lies on its Keller cone within
    ``tol``. Amplitudes follow the edge and free-space decay laws.
    """
    p_ij, p = as_point(p_ij), as_point(p)
    origin = np.zeros(3)
    d_src = distance(origin, p)
    d_e = distance(origin, p_ij)
    d_ep = distance(p_ij, p)
    if d_src == 0.0 or d_e == 0.0 or d_ep == 0.0:
        raise GeometryError("field point coincides with the source or the element")
    k = spec.wavenumber
    c = spec.source_amplitude
    f_src = c * np.exp(-1j * k * d_src) / d_src
    if abs(keller_residual(origin, p_ij, e_ij, p)) > tol:
        return 0j, complex(f_src)
    f_cone = c * np.exp(-1j * k * (d_e + d_ep)) / (d_e * math.sqrt(d_ep))
    return complex(f_cone), complex(f_src)


def constructive_gate(spec: LatticeSpec, p_ij, e_ij, p, tol: float = FOCAL_TOL) -> bool:
    f_cone, f_src = field_contributions(spec, p_ij, e_ij, p, tol)
    return (f_cone.conjugate() * f_src).real > 0


def eligible_targets(spec: LatticeSpec, p_ij, focal: FocalSet) -> set:
    """Targets (1-based) this element reinforces when steered at them."""
    out = set()
    for k, t in enumerate(focal.targets, start=1):
        try:
            e = bisector_orientation(p_ij, t)
        except GeometryError:
            continue
        if constructive_gate(spec, p_ij, e, t):
            out.add(k)
    return out


def eligibility(spec: LatticeSpec, focal: FocalSet) -> np.ndarray:
    pos = spec.positions()
    out = np.zeros((spec.rows, spec.cols, len(focal)), dtype=bool)
    for i in range(spec.rows):
        for j in range(spec.cols):
            for k in eligible_targets(spec, pos[i, j], focal):
                out[i, j, k - 1] = True
    return out


def partition_objective(assignment: Assignment, neighbors: Optional[np.ndarray] = None) -> int:
    """Border count between distinct non-idle partitions plus the largest size gap.

    Each 4-neighbor pair in different non-idle partitions counts once (half
    the per-element disagreement total). Idle elements are ignored by both terms.
    """
    t = assignment.targets
    a = t.ravel()
    rows, cols = t.shape
    if neighbors is None:
        horiz = (t[:, :-1] != t[:, 1:]) & (t[:, :-1] != IDLE) & (t[:, 1:] != IDLE)
        vert = (t[:-1, :] != t[1:, :]) & (t[:-1, :] != IDLE) & (t[1:, :] != IDLE)
        cut = int(horiz.sum() + vert.sum())
    else:
        nu = 0
        for i, row in enumerate(neighbors):
            if a[i] == IDLE:
                continue
            nu += sum(1 for j in row if j >= 0 and a[j] != IDLE and a[j] != a[i])
        cut = nu // 2
    sizes = np.bincount(a, minlength=assignment.n_targets + 1)[1:]
    return cut + int(sizes.max() - sizes.min())


@dataclass(frozen=True)
class Schedule:
    iters: int = DEFAULT_ITERS
    cooling: float = DEFAULT_COOLING
    t0: Optional[float] = None

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        if not 0 < self.cooling <= 1:
            raise ValueError("cooling factor must lie in (0, 1]")


@dataclass
class PartitionResult:
    assignment: Assignment
    objective: int
    history: np.ndarray
    accepted: int


def metropolis_partition(eligible: np.ndarray, seed: int, schedule: Schedule = Schedule(),
                         chains: int = 1, kernels=None) -> PartitionResult:
    """Minimize the partition objective by a cooled Metropolis walk.

    ``eligible[i, j, k]`` says element ``(i, j)`` may serve target ``k + 1``.
    Elements with no option stay idle; single-option elements are fixed.
    With ``chains > 1`` independent chains are seeded from ``seed`` and the
    best result (first on ties) is returned.
    """
    rows, cols, n_t = eligible.shape
    reach = eligible.reshape(-1, n_t).any(axis=0)
    if not reach.all():
        raise InfeasibleDesignError([k + 1 for k in np.flatnonzero(~reach)])
    if chains < 1:
        raise ValueError("need at least one chain")
    kernels = kernels or backend.kernels
    nbr = _neighbors(rows, cols)
    seeds = [seed] if chains == 1 else np.random.SeedSequence(seed).spawn(chains)
    best = None
    for s in seeds:
        res = _run_chain(eligible, nbr, np.random.default_rng(s), schedule, kernels)
        if best is None or res.objective < best.objective:
            best = res
    return best


def _neighbors(rows, cols) -> np.ndarray:
    return LatticeSpec(rows, cols, 1.0, center=(0, 1, 0)).neighbors()


def _run_chain(eligible, nbr, rng, schedule: Schedule, kernels) -> PartitionResult:
    rows, cols, n_t = eligible.shape
    flat = eligible.reshape(-1, n_t)
    n_opts = flat.sum(axis=1)
    assign = np.zeros(rows * cols, dtype=np.int32)
    for i in np.flatnonzero(n_opts):
        opts = np.flatnonzero(flat[i]) + 1
        assign[i] = opts[rng.integers(len(opts))]
    movable = np.flatnonzero(n_opts > 1).astype(np.int32)
    e0 = partition_objective(Assignment(assign.reshape(rows, cols), n_t))
    if len(movable) == 0 or schedule.iters == 0:
        return PartitionResult(Assignment(assign.reshape(rows, cols), n_t), e0,
                               np.full(schedule.iters, e0, dtype=np.int64), 0)
    options = np.zeros((len(movable), n_t), dtype=np.int32)
    for m, i in enumerate(movable):
        o = np.flatnonzero(flat[i]) + 1
        options[m, :len(o)] = o
    t0 = schedule.t0 if schedule.t0 is not None else max(float(e0), 1.0)
    n = schedule.iters
    picks = rng.integers(0, len(movable), size=n)
    alt_u = rng.random(n)
    acc_u = rng.random(n)
    temps = t0 * schedule.cooling ** np.arange(n, dtype=float)
    best, best_e, history, accepted = kernels.metropolis_walk(
        assign, movable, options, n_opts[movable].astype(np.int32), nbr, n_t,
        picks, alt_u, acc_u, temps)
    return PartitionResult(Assignment(np.asarray(best).reshape(rows, cols), n_t), int(best_e),
                           np.asarray(history), int(accepted))


def design(spec: LatticeSpec, focal: FocalSet, seed: int, schedule: Schedule = Schedule(),
           chains: int = 1, kernels=None) -> DesignedLattice:
    """Gate, partition and steer every element of the lattice."""
    elig = eligibility(spec, focal)
    res = metropolis_partition(elig, seed, schedule, chains, kernels)
    res.assignment.validate(elig)
    pos = spec.positions()
    dirs = np.tile(IDLE_DIRECTION, (spec.rows, spec.cols, 1))
    t = res.assignment.targets
    for i, j in zip(*np.nonzero(t)):
        dirs[i, j] = bisector_orientation(pos[i, j], focal.targets[t[i, j] - 1])
    return DesignedLattice(spec, focal, dirs, res.assignment, elig, float(res.objective), seed, res.history)


def _active(designed: DesignedLattice) -> tuple:
    pos = designed.spec.positions()
    on = designed.assignment.targets != IDLE
    return pos[on], designed.directions[on]


def field_at(designed: DesignedLattice, points, tol: Optional[float] = FOCAL_TOL,
             half_diag: float = 0.0, kernels=None) -> np.ndarray:
    """Total complex field (direct plus active elements) at ``points`` (``(N, 3)``).

    ``tol=None`` switches membership to the grid band with half-width ``half_diag / d``.
    """
    kernels = kernels or backend.kernels
    spec = designed.spec
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d_src = np.sqrt(np.sum(pts * pts, axis=1))
    if np.any(d_src == 0.0):
        raise GeometryError("field point coincides with the source")
    k = spec.wavenumber
    direct = spec.source_amplitude * np.exp(-1j * k * d_src) / d_src
    src, dirs = _active(designed)
    if len(src) == 0:
        return direct
    d_e = np.sqrt(np.sum(src * src, axis=1))
    pref = spec.source_amplitude * np.exp(-1j * k * d_e) / d_e
    back = -src / d_e[:, None]
    fixed = -1.0 if tol is None else float(tol)
    cones, _ = kernels.cone_sum(pts, src, pref, back, dirs, k, half_diag, fixed, False)
    return direct + cones


def baseline_field(spec: LatticeSpec, points) -> np.ndarray:
    """Direct-path field with every element idle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.sqrt(np.sum(pts * pts, axis=1))
    return spec.source_amplitude * np.exp(-1j * spec.wavenumber * d) / d


def evaluate_field(designed: DesignedLattice, eval_grid: PlanarGrid, kernels=None) -> PowerGrid:
    """Power on ``eval_grid`` with cone membership banded to the grid pitch."""
    pos = designed.spec.positions().reshape(-1, 3)
    dists = np.array([eval_grid.signed_distance(p) for p in pos])
    if np.any(np.abs(dists) < 1e-12):
        raise GeometryError("evaluation grid intersects the lattice plane")
    f = field_at(designed, eval_grid.points(), tol=None, half_diag=0.5 * eval_grid.pitch_diag,
                 kernels=kernels)
    return PowerGrid(eval_grid, np.abs(f) ** 2)


def gain_db(designed: DesignedLattice, points=None) -> np.ndarray:
    """Power gain over the no-lattice baseline at each target (or ``points``), in dB."""
    pts = np.array(designed.focal.targets) if points is None else np.atleast_2d(points)
    with_lattice = np.abs(field_at(designed, pts)) ** 2
    without = np.abs(baseline_field(designed.spec, pts)) ** 2
    return 10 * np.log10(with_lattice / without)

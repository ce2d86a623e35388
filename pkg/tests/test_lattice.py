import dataclasses
import itertools
import math

import numpy as np
import pytest

from edgediff import presets
from edgediff.geometry import (GeometryError, PlanarGrid, angles_to_orientation, bisector_orientation,
                               keller_residual)
from edgediff.lattice import (IDLE_DIRECTION, Assignment, FocalSet, InfeasibleDesignError, LatticeSpec,
                              Schedule, baseline_field, constructive_gate, design, eligibility,
                              eligible_targets, evaluate_field, field_at, field_contributions,
                              gain_db, metropolis_partition, partition_objective)


def A(rows, k=2):
    return Assignment(np.array(rows, dtype=np.int32), k)


class TestSpec:
    def test_positions(self):
        s = LatticeSpec(3, 4, 0.1, center=(0, 1, 0))
        pos = s.positions()
        assert pos.shape == (3, 4, 3)
        assert np.allclose(pos[..., 1], 1.0)
        assert np.allclose(pos[0, 0], (-0.15, 1, 0.1))
        assert np.allclose(pos[2, 3], (0.15, 1, -0.1))
        assert np.allclose(pos.reshape(-1, 3).mean(axis=0), (0, 1, 0))

    def test_neighbors(self):
        nb = LatticeSpec(3, 3, 0.1).neighbors()
        counts = (nb >= 0).sum(axis=1)
        assert counts.tolist() == [2, 3, 2, 3, 4, 3, 2, 3, 2]
        assert set(nb[4]) == {1, 3, 5, 7}

    def test_invalid(self):
        with pytest.raises(GeometryError):
            LatticeSpec(0, 3, 0.1)
        with pytest.raises(GeometryError):
            LatticeSpec(2, 3, 0.0)

    def test_focal_set(self):
        with pytest.raises(GeometryError):
            FocalSet([(0, 0, 0)])
        with pytest.raises(GeometryError):
            FocalSet([(0, 2, 0), (0, 2, 0)])
        with pytest.raises(ValueError):
            FocalSet([])


class TestObjective:
    @pytest.mark.parametrize("rows,expect", [
        ([[1, 2], [2, 1]], 4),
        ([[1, 2], [1, 2]], 2),
        ([[1, 1], [2, 2]], 2),
        ([[1, 1], [1, 1]], 4),
        ([[0, 1], [2, 0]], 0),
        ([[1, 0], [1, 1]], 3),
        ([[1, 2, 1], [2, 1, 2], [1, 2, 1]], 13),
    ])
    def test_hand_values(self, rows, expect):
        a = A(rows)
        assert partition_objective(a) == expect
        r, c = a.targets.shape
        assert partition_objective(a, LatticeSpec(r, c, 1.0).neighbors()) == expect

    def test_three_targets(self):
        assert partition_objective(A([[1, 2, 3]], 3)) == 2
        assert partition_objective(A([[1, 1, 3]], 3)) == 1 + 2

    def test_assignment_validate(self):
        elig = np.ones((2, 2, 2), dtype=bool)
        elig[0, 0, 1] = False
        A([[1, 2], [2, 1]]).validate(elig)
        with pytest.raises(ValueError):
            A([[2, 2], [2, 1]]).validate(elig)
        with pytest.raises(ValueError):
            A([[3, 2], [2, 1]]).validate()
        assert A([[0, 2], [2, 1]]).sizes().tolist() == [1, 1, 2]


class TestGate:
    P = np.array([0.3, 1.0, 0.1])
    T = np.array([0.0, 2.5, 0.0])

    def _excess(self):
        return np.linalg.norm(self.P) + np.linalg.norm(self.T - self.P) - np.linalg.norm(self.T)

    @pytest.mark.parametrize("n", [3, 7, 20])
    def test_in_phase(self, n):
        spec = LatticeSpec(1, 1, 0.1, wavelength=self._excess() / n)
        e = bisector_orientation(self.P, self.T)
        f_cone, f_src = field_contributions(spec, self.P, e, self.T)
        assert f_cone != 0
        assert np.angle(f_cone.conjugate() * f_src) == pytest.approx(0, abs=1e-6)
        assert constructive_gate(spec, self.P, e, self.T)
        assert eligible_targets(spec, self.P, FocalSet([self.T])) == {1}

    @pytest.mark.parametrize("n", [3, 7, 20])
    def test_out_of_phase(self, n):
        spec = LatticeSpec(1, 1, 0.1, wavelength=self._excess() / (n + 0.5))
        e = bisector_orientation(self.P, self.T)
        assert not constructive_gate(spec, self.P, e, self.T)
        assert eligible_targets(spec, self.P, FocalSet([self.T])) == set()

    def test_amplitudes(self):
        spec = LatticeSpec(1, 1, 0.1, wavelength=self._excess() / 5)
        e = bisector_orientation(self.P, self.T)
        f_cone, f_src = field_contributions(spec, self.P, e, self.T)
        d_e, d_ep = np.linalg.norm(self.P), np.linalg.norm(self.T - self.P)
        assert abs(f_cone) == pytest.approx(1 / (d_e * math.sqrt(d_ep)))
        assert abs(f_src) == pytest.approx(1 / np.linalg.norm(self.T))

    def test_off_cone_is_zero(self):
        spec = LatticeSpec(1, 1, 0.1)
        f_cone, _ = field_contributions(spec, self.P, IDLE_DIRECTION, self.T)
        assert f_cone == 0
        assert not constructive_gate(spec, self.P, IDLE_DIRECTION, self.T)

    def test_eligibility_matches_elementwise(self):
        spec = LatticeSpec(4, 5, 0.04)
        focal = FocalSet([(0.2, 2.5, 0.1), (-0.3, 2.5, -0.2)])
        el = eligibility(spec, focal)
        pos = spec.positions()
        for i, j in itertools.product(range(4), range(5)):
            assert {k + 1 for k in np.flatnonzero(el[i, j])} == eligible_targets(spec, pos[i, j], focal)


def _brute_min(rows, cols, k):
    best = None
    for combo in itertools.product(range(1, k + 1), repeat=rows * cols):
        v = partition_objective(Assignment(np.array(combo, dtype=np.int32).reshape(rows, cols), k))
        best = v if best is None else min(best, v)
    return best


class TestMetropolis:
    def test_brute_force_small(self):
        elig = np.ones((2, 3, 2), dtype=bool)
        brute = _brute_min(2, 3, 2)
        assert brute == 3  # 3/3 split along the long side
        hits = sum(metropolis_partition(elig, s, Schedule(2000)).objective == brute for s in range(20))
        assert hits == 20

    def test_deterministic(self, kernels):
        elig = np.random.default_rng(1).random((6, 6, 3)) < 0.7
        a = metropolis_partition(elig, 42, kernels=kernels)
        b = metropolis_partition(elig, 42, kernels=kernels)
        assert np.array_equal(a.assignment.targets, b.assignment.targets)
        assert np.array_equal(a.history, b.history)

    def test_result_is_consistent(self):
        elig = np.random.default_rng(2).random((6, 6, 3)) < 0.7
        res = metropolis_partition(elig, 5, Schedule(3000))
        res.assignment.validate(elig)
        assert partition_objective(res.assignment) == res.objective
        assert np.all(np.diff(res.history) <= 0)
        assert res.history[-1] == res.objective
        assert res.history.shape == (3000,)
        none = ~elig.any(axis=2)
        assert np.all(res.assignment.targets[none] == 0)
        single = elig.sum(axis=2) == 1
        assert np.all(res.assignment.targets[single] == elig[single].argmax(axis=1) + 1)

    def test_chains_pick_best(self):
        elig = np.random.default_rng(3).random((8, 8, 4)) < 0.6
        many = metropolis_partition(elig, 9, Schedule(2000), chains=4)
        assert many.objective == min(metropolis_partition(elig, s, Schedule(2000)).objective
                                     for s in np.random.SeedSequence(9).spawn(4))

    def test_zero_iterations(self):
        elig = np.ones((2, 2, 2), dtype=bool)
        res = metropolis_partition(elig, 0, Schedule(0))
        assert res.history.size == 0
        assert res.objective == partition_objective(res.assignment)

    def test_infeasible(self):
        elig = np.zeros((3, 3, 3), dtype=bool)
        elig[..., 1] = True
        with pytest.raises(InfeasibleDesignError) as info:
            metropolis_partition(elig, 0)
        assert info.value.unreachable == [1, 3]

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            Schedule(cooling=1.5)
        with pytest.raises(ValueError):
            Schedule(iters=-1)


@pytest.fixture(scope="module")
def one_point():
    p = presets.lattice_preset("paper-lattice-1pt")
    return p, design(p["spec"], FocalSet(p["targets"]), seed=1)


class TestDesign:
    def test_steering_is_exact(self, one_point):
        p, d = one_point
        pos = d.spec.positions()
        t = d.assignment.targets
        assert (t > 0).sum() > 0
        for i, j in zip(*np.nonzero(t)):
            target = d.focal.targets[t[i, j] - 1]
            assert abs(keller_residual((0, 0, 0), pos[i, j], d.directions[i, j], target)) < 1e-12
        assert np.allclose(d.directions[t == 0], IDLE_DIRECTION)

    def test_assignment_respects_gate(self, one_point):
        _, d = one_point
        d.assignment.validate(d.eligible)
        assert np.array_equal(d.assignment.targets > 0, d.eligible[..., 0])

    def test_angles_round_trip(self, one_point):
        _, d = one_point
        theta, phi = d.angles()
        for i, j in [(0, 0), (5, 7), (19, 19)]:
            assert np.allclose(angles_to_orientation(theta[i, j], phi[i, j]), d.directions[i, j])

    def test_gain_positive(self, one_point):
        _, d = one_point
        g = gain_db(d)
        assert g.shape == (1,)
        assert g[0] > 3.0

    def test_idle_lattice_equals_baseline(self, one_point):
        _, d = one_point
        idle = dataclasses.replace(d, assignment=Assignment(np.zeros_like(d.assignment.targets), 1))
        pts = np.array(d.focal.targets)
        np.testing.assert_array_equal(field_at(idle, pts), baseline_field(d.spec, pts))

    def test_evaluate_field(self, one_point, kernels):
        p, d = one_point
        grid = presets.eval_grid(pitch=0.04, half_width=0.6)
        pw = evaluate_field(d, grid, kernels=kernels)
        assert pw.samples.shape == grid.shape
        assert np.all(pw.samples > 0)
        bad = PlanarGrid.centered((0, 1.0, 0), (1, 0, 0), (0, 0, 1), 5, 5, 0.02, 0.02)
        with pytest.raises(GeometryError):
            evaluate_field(d, bad)

    def test_backends_identical(self, kernels):
        p = presets.lattice_preset("paper-lattice-4pt")
        a = design(p["spec"], FocalSet(p["targets"]), seed=3)
        b = design(p["spec"], FocalSet(p["targets"]), seed=3, kernels=kernels)
        assert np.array_equal(a.assignment.targets, b.assignment.targets)
        assert a.objective == b.objective

import math
from unittest import TestCase

import numpy as np

from opideal.constructions import ParamSchedule, build_non_fss_diagonal
from opideal.error import StructuralError
from opideal.fss_probe import (
    corollary_level, corollary_witness, fss_profile, l1_to_lq_profile, milman_vector, tied_count,
)
from opideal.rip import RipFamily, gen_family
from opideal.spaces import identity, zero_operator
from opideal.types import DenseOperator, l2, linf


class TestMilman(TestCase):
    def test_all_ones(self):
        result = milman_vector(np.array([[1.0], [1.0]]))
        assert result
        assert result.mode == "exhaustive"
        assert np.allclose(np.abs(result.vector), [1.0, 1.0])
        assert result.tied == 2

    def test_signed(self):
        result = milman_vector(np.array([[1.0], [-1.0], [0.0]]))
        assert np.allclose(result.vector * np.sign(result.vector[0]), [1.0, -1.0, 0.0])
        assert result.tied == 2

    def test_tied_at_least_dimension(self):
        Q = np.random.default_rng(0).standard_normal((7, 3))
        result = milman_vector(Q)
        assert result.found
        assert result.tied >= 3
        coefficients, *_ = np.linalg.lstsq(Q, result.vector, rcond=None)
        assert np.abs(Q @ coefficients - result.vector).max() <= 1e-9

    def test_vertex_search(self):
        Q = np.random.default_rng(1).standard_normal((6, 2))
        result = milman_vector(Q, budget=1, seed=3)
        assert result.mode == "vertex-lp"
        assert result.found
        assert result.tied >= 2

    def test_bad_basis(self):
        with self.assertRaises(StructuralError):
            milman_vector(np.ones((2, 3)))
        with self.assertRaises(StructuralError):
            milman_vector(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]))

    def test_tied_count(self):
        assert tied_count([3.0, -3.0, 1.0]) == 2
        assert tied_count([0.0, 0.0]) == 0


class TestProfile(TestCase):
    def test_zero_operator(self):
        profile = fss_profile(zero_operator(l2(4), linf(4)), [1, 2, 3], trials=2)
        assert all(point.estimate == 0.0 for point in profile.points)

    def test_identity(self):
        profile = fss_profile(identity(l2(4)), [1, 2, 4], trials=3, seed=1)
        for point in profile.points:
            self.assertAlmostEqual(point.estimate, 1.0, delta=1e-12)
            assert point.method == "svd"

    def test_non_fss_witness(self):
        T = build_non_fss_diagonal(2, [1, 2, 3])
        profile = fss_profile(T, [1, 2], trials=2, seed=0)
        envelope = [point.envelope for point in profile.points]
        assert envelope == sorted(envelope, reverse=True)
        for point in profile.points:
            assert point.best_subspace >= 0.5 - 1e-9
            assert point.estimate <= point.best_subspace

    def test_seeded(self):
        T = build_non_fss_diagonal(2, [1, 2])
        first = fss_profile(T, [1, 2], trials=2, seed=4, threads=1)
        again = fss_profile(T, [1, 2], trials=2, seed=4, threads=2)
        assert first == again

    def test_dims_checked(self):
        with self.assertRaises(StructuralError):
            fss_profile(identity(l2(3)), [4], trials=1)
        with self.assertRaises(ValueError):
            fss_profile(identity(l2(3)), [1], trials=0)

    def test_l1_to_lq(self):
        profile = l1_to_lq_profile(8, 2, [1, 2], trials=2)
        for point in profile.points:
            assert 1 / math.sqrt(8) - 1e-9 <= point.estimate <= 1.0 + 1e-9


class TestCorollary(TestCase):
    def test_level(self):
        assert corollary_level(1.0, 2) == 20
        for epsilon, q in [(0.5, 3), (2.0, 2), (1.0, 4.5)]:
            m = corollary_level(epsilon, q)
            assert 1 / m + 2 * m ** (-1 / q) < epsilon / 2
            if m > 1:
                assert 1 / (m - 1) + 2 * (m - 1) ** (-1 / q) >= epsilon / 2

    def test_level_arguments(self):
        with self.assertRaises(ValueError):
            corollary_level(0.0, 2)
        with self.assertRaises(ValueError):
            corollary_level(1.0, math.inf)

    def test_witness(self):
        schedule = ParamSchedule.from_preset("tiny")
        family = gen_family(schedule.levels, 0)
        record = corollary_witness(schedule, family, [1, 2, 3], 1, seed=0)
        assert record.bound_holds
        assert record.q == 2.0
        assert record.witness_norm > 0

    def test_milman_budget(self):
        schedule = ParamSchedule.from_preset("tiny")
        rng = np.random.default_rng(9)
        second = rng.standard_normal((16, 20))
        second[:, :2] = np.eye(16)[:, :2]
        family = RipFamily.from_columns([rng.standard_normal((2, 6)), second, rng.standard_normal((24, 40))])
        # B sends the basis onto the first two columns of level 2, so P is injective
        B = DenseOperator(np.eye(16)[:, :2], l2(2), l2(16))
        with self.assertLogs("opideal.fss_probe", level="INFO") as logs:
            record = corollary_witness(schedule, family, [1, 2], 1, seed=0, B=B, milman_budget=1)
        assert any("searching vertices" in line for line in logs.output)
        assert not record.via_kernel
        assert record.tied >= 1
        assert record.bound_holds

    def test_no_levels_above(self):
        schedule = ParamSchedule.from_preset("tiny")
        family = gen_family(schedule.levels, 0)
        record = corollary_witness(schedule, family, [1, 2, 3], 3)
        assert record.certified
        assert record.via_kernel


class TestMilmanSubspaces(TestCase):
    def test_random_subspaces(self):
        rng = np.random.default_rng(12)
        for d, K in [(1, 3), (2, 6), (3, 9), (4, 12)] * 5:
            Q = rng.standard_normal((K, d))
            result = milman_vector(Q)
            assert result.mode == "exhaustive"
            y = np.abs(result.vector)
            assert np.count_nonzero(y >= y.max() - 1e-9) >= d
            coefficients, *_ = np.linalg.lstsq(Q, result.vector, rcond=None)
            assert np.abs(Q @ coefficients - result.vector).max() <= 1e-9

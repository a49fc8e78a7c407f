import itertools
from unittest import TestCase

import numpy as np

from opideal.error import StructuralError
from opideal.rip import (
    RipFamily, certify_almost_on, certify_besselian, gen_family, gen_gaussian_columns, subset_extremes, verify_rip_def,
)
from opideal.types import CertMode


class TestGeneration(TestCase):
    def test_seeded(self):
        first = gen_family([(4, 6), (8, 10)], 7)
        again = gen_family([(4, 6), (8, 10)], 7)
        other = gen_family([(4, 6), (8, 10)], 8)
        assert first.shape == [(4, 6), (8, 10)]
        for a, b in zip(first.levels, again.levels):
            assert np.array_equal(a.columns, b.columns)
        assert not np.array_equal(first.levels[0].columns, other.levels[0].columns)

    def test_unit_columns(self):
        level = gen_gaussian_columns(5, 9, 0)
        assert np.abs(np.linalg.norm(level.columns, axis=0) - 1).max() <= 1e-12
        assert np.abs(np.diag(level.gram) - 1).max() <= 1e-12

    def test_orthonormalize(self):
        level = gen_gaussian_columns(6, 4, 1, orthonormalize=True)
        assert np.abs(level.gram - np.eye(4)).max() <= 1e-12
        with self.assertRaises(StructuralError):
            gen_gaussian_columns(3, 4, 1, orthonormalize=True)

    def test_bad_levels(self):
        with self.assertRaises(StructuralError):
            gen_gaussian_columns(0, 3, 0)
        with self.assertRaises(StructuralError):
            RipFamily.from_columns([np.zeros((2, 2))])
        family = gen_family([(2, 2)], 0)
        with self.assertRaises(StructuralError):
            family.level(2)


class TestCertificates(TestCase):
    def setUp(self):
        self.family = gen_family([(6, 10), (12, 14)], 0)

    def test_order_one(self):
        c = certify_almost_on(self.family, 1, 1)
        assert c.mode is CertMode.EXHAUSTIVE
        assert c.samples == 10
        self.assertAlmostEqual(c.lambda_min, 1.0, delta=1e-12)
        self.assertAlmostEqual(c.lambda_max, 1.0, delta=1e-12)
        assert c.certifies

    def test_orthonormal_columns_certify(self):
        family = gen_family([(8, 4)], 2, orthonormalize=True)
        c = certify_almost_on(family, 1, 4)
        assert c.holds and c.certifies
        assert c.id == "almost-on:level=1:order=4"

    def test_sampled_never_certifies(self):
        c = certify_besselian(self.family, 2, 3, budget=1, samples=50)
        assert c.mode is CertMode.SAMPLED
        assert c.samples == 50
        assert not c.certifies

    def test_exhaustive_count(self):
        c = certify_besselian(self.family, 2, 3)
        assert c.samples == 364
        assert c.besselian_only

    def test_threads_do_not_change_results(self):
        single = certify_almost_on(self.family, 2, 4, threads=1)
        many = certify_almost_on(self.family, 2, 4, threads=4)
        assert single.lambda_min == many.lambda_min
        assert single.lambda_max == many.lambda_max

    def test_sampled_is_seeded(self):
        first = certify_almost_on(self.family, 2, 5, budget=1, samples=300, seed=11, threads=3)
        again = certify_almost_on(self.family, 2, 5, budget=1, samples=300, seed=11, threads=1)
        assert first.lambda_min == again.lambda_min

    def test_order_outside(self):
        with self.assertRaises(StructuralError):
            subset_extremes(self.family.level(1).gram, 11)


class TestRipDefinition(TestCase):
    def test_identity_holds(self):
        verdict = verify_rip_def(np.eye(4), 2, 0.1)
        assert verdict
        self.assertAlmostEqual(verdict.sigma_min, 1.0, delta=1e-12)

    def test_repeated_column_fails(self):
        matrix = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        verdict = verify_rip_def(matrix, 2, 0.5)
        assert not verdict
        assert verdict.witness_support == (0, 1)
        coefficients = verdict.witness_coefficients
        self.assertAlmostEqual(abs(coefficients[0] + coefficients[1]), 0.0, delta=1e-12)


class TestInvariants(TestCase):
    def setUp(self):
        self.family = gen_family([(6, 10), (12, 14)], 0)

    def test_monotone_in_order(self):
        for level in (1, 2):
            certificates = [certify_almost_on(self.family, level, k) for k in range(1, 6)]
            for smaller, larger in zip(certificates, certificates[1:]):
                assert larger.lambda_min <= smaller.lambda_min
                assert larger.lambda_max >= smaller.lambda_max

    def test_sampled_within_exhaustive(self):
        for order in (2, 3, 4):
            exhaustive = certify_almost_on(self.family, 2, order)
            sampled = certify_almost_on(self.family, 2, order, mode=CertMode.SAMPLED, samples=300, seed=order)
            assert exhaustive.mode is CertMode.EXHAUSTIVE
            assert sampled.mode is CertMode.SAMPLED
            assert sampled.lambda_min >= exhaustive.lambda_min - 1e-12
            assert sampled.lambda_max <= exhaustive.lambda_max + 1e-12

    def test_almost_on_implies_besselian(self):
        family = gen_family([(6, 10), (12, 14), (8, 4)], 3)
        for level in (1, 2, 3):
            for order in (1, 2, 3, 4):
                full = certify_almost_on(family, level, order)
                upper = certify_besselian(family, level, order)
                assert full.lambda_max == upper.lambda_max
                assert upper.besselian_only and not full.besselian_only
                if full.holds:
                    assert upper.holds

    def test_duplicated_columns(self):
        family = RipFamily.from_columns([np.array([[1.0, 1.0], [0.0, 0.0]])])
        full = certify_almost_on(family, 1, 2)
        self.assertAlmostEqual(full.lambda_min, 0.0, delta=1e-12)
        self.assertAlmostEqual(full.lambda_max, 2.0, delta=1e-12)
        assert not full.holds
        upper = certify_besselian(family, 1, 2)
        self.assertAlmostEqual(upper.lambda_max, 2.0, delta=1e-12)
        assert upper.holds


GRID_POINTS = 41
GRID_MARGIN = 0.05


def _ratios(grams: np.ndarray, points: np.ndarray) -> np.ndarray:
    """||sum a_i g_i||^2 / sum a_i^2 for every support (rows) and coefficient vector (columns)."""
    return np.einsum('pi,sij,pj->sp', points, grams, points) / (points ** 2).sum(axis=1)


def _cube_faces(k: int) -> np.ndarray:
    # the ratio is scale invariant, so a_i = 1 on one coordinate covers every direction
    axis = np.linspace(-1.0, 1.0, GRID_POINTS)
    free = np.array(list(itertools.product(axis, repeat=k - 1))).reshape(-1, k - 1)
    return np.vstack([np.insert(free, i, 1.0, axis=1) for i in range(k)])


def _zoom(gram: np.ndarray, start: np.ndarray, sign: float) -> float:
    k = len(start)
    offsets = np.array(list(itertools.product(range(-4, 5), repeat=k)), dtype=float)
    point, step = start, 2.0 / (GRID_POINTS - 1)
    for _ in range(25):
        step /= 4
        candidates = point + step * offsets
        values = sign * _ratios(gram[None], candidates)[0]
        point = candidates[int(np.argmax(values))]
        point = point / np.abs(point).max()
    return float(_ratios(gram[None], point[None])[0, 0])


def grid_extremes(gram: np.ndarray, k: int):
    supports = np.array(list(itertools.combinations(range(gram.shape[0]), k)))
    grams = gram[supports[:, :, None], supports[:, None, :]]
    points = _cube_faces(k)
    ratios = _ratios(grams, points)
    highs, lows = ratios.max(axis=1), ratios.min(axis=1)
    high = max(_zoom(grams[s], points[int(ratios[s].argmax())], 1.0)
               for s in np.flatnonzero(highs >= highs.max() - GRID_MARGIN))
    low = min(_zoom(grams[s], points[int(ratios[s].argmin())], -1.0)
              for s in np.flatnonzero(lows <= lows.min() + GRID_MARGIN))
    return low, high


class TestOracle(TestCase):
    def test_matches_coefficient_grid(self):
        for seed in range(10):
            family = gen_family([(8, 12)], seed)
            gram = np.array(family.level(1).gram)
            for k in (2, 3):
                c = certify_almost_on(family, 1, k)
                assert c.mode is CertMode.EXHAUSTIVE
                low, high = grid_extremes(gram, k)
                self.assertAlmostEqual(c.lambda_min, low, delta=1e-6)
                self.assertAlmostEqual(c.lambda_max, high, delta=1e-6)

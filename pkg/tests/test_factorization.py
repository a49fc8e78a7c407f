import math
from unittest import TestCase
from unittest.mock import patch

import numpy as np

from opideal.constructions import ParamSchedule, build_net_embedding, build_non_fss_diagonal
from opideal.error import HypothesisError, SamplingExhausted, StructuralError
from opideal.factorization import (
    Witness, factor_K_through_witnessed_T, factor_identity_through_T_n, factor_through_L, factor_through_embedding,
    factor_through_formal_identity, minimal_m_cols, reduce_p_le_2,
)
from opideal.lp import L1RepresentationSolver
from opideal.opnorm import quick_norm
from opideal.rip import RipFamily, certify_besselian, gen_family
from opideal.spaces import identity
from opideal.types import TWO, BlockSpace, CertMode, DenseOperator, ExtExponent, NormBound, NormMode, l2, linf


class TestFormalIdentity(TestCase):
    def setUp(self):
        self.schedule = ParamSchedule.from_preset("tiny")
        self.family = gen_family(self.schedule.levels, 0)

    def random_B(self, m, levels, seed):
        target = BlockSpace.uniform(TWO, [self.schedule.u(n) for n in levels], self.schedule.p)
        rng = np.random.default_rng(seed)
        B = DenseOperator(rng.standard_normal((target.total_dim, self.schedule.u(m))), l2(self.schedule.u(m)), target)
        return B.scaled(1.0 / quick_norm(B).upper)

    def test_random_operators(self):
        certificates = [certify_besselian(self.family, n, 5) for n in (2, 3)]
        assert all(c.mode is CertMode.EXHAUSTIVE for c in certificates)
        # at most five rows survive and both levels are besselian at order 5
        p_bound = math.sqrt(max(c.lambda_max for c in certificates))
        for seed in range(100):
            B = self.random_B(1, [2, 3], seed)
            result = factor_through_formal_identity(B, self.schedule, self.family, 1, [2, 3])
            assert result.residual_norm <= 1.0 + 1e-9
            assert result.size <= result.budget_s_m == 4
            assert result.P_norm.upper <= min(p_bound, 2.0) + 1e-9
            assert result.R_norm.upper <= 1.0 + 1e-9

    def test_aligned_column_is_selected(self):
        column = self.family.level(3).columns[:, 5]
        matrix = np.zeros((24, 16))
        matrix[:, 0] = column
        B = DenseOperator(matrix, l2(16), BlockSpace.single(TWO, 24))
        result = factor_through_formal_identity(B, self.schedule, self.family, 2, [3])
        assert (3, 6) in result.positions
        assert 6 in result.index_sets[3]
        assert result.residual_norm <= 0.5 + 1e-9
        assert result.R_norm.upper <= 1.0 + 1e-9
        record = result.record()
        assert record.budget_s_m == 128
        assert not record.p_reduced

    def test_zero_operator(self):
        B = DenseOperator(np.zeros((40, 2)), l2(2), BlockSpace.uniform(TWO, [16, 24], TWO))
        result = factor_through_formal_identity(B, self.schedule, self.family, 1, [2, 3])
        assert result.P is None
        assert result.size == 0
        assert result.residual_norm == 0.0

    def test_levels_above_m(self):
        B = self.random_B(2, [3], 0)
        with self.assertRaises(HypothesisError):
            factor_through_formal_identity(B, self.schedule, self.family, 3, [3])

    def test_norm_hypothesis(self):
        B = self.random_B(1, [2, 3], 0).scaled(3.0)
        with self.assertRaises(HypothesisError):
            factor_through_formal_identity(B, self.schedule, self.family, 1, [2, 3])

    def test_reduction(self):
        low = ParamSchedule(ExtExponent.finite("1.5"), self.schedule.levels)
        B = DenseOperator(np.zeros((40, 2)), l2(2), BlockSpace.uniform(TWO, [16, 24], low.p))
        reduced, note = reduce_p_le_2(B, low)
        assert reduced.codomain.outer == TWO
        assert "l_2" in note
        high = ParamSchedule(ExtExponent.finite(3), self.schedule.levels)
        with self.assertRaises(HypothesisError):
            reduce_p_le_2(B, high)

    def test_norm_checked_before_reduction(self):
        low = ParamSchedule(ExtExponent.finite("1.5"), self.schedule.levels)
        matrix = np.zeros((40, 2))
        matrix[0, 0] = matrix[16, 0] = 1.0 / math.sqrt(2.0)
        # unit norm once the outer l_1.5 is replaced by l_2, 2^(1/6) before
        B = DenseOperator(matrix, l2(2), BlockSpace.uniform(TWO, [16, 24], low.p))
        self.assertAlmostEqual(quick_norm(B.with_spaces(codomain=BlockSpace.uniform(TWO, [16, 24], TWO))).upper,
                               1.0, delta=1e-12)
        with self.assertRaises(HypothesisError):
            factor_through_formal_identity(B, low, self.family, 1, [2, 3])

    def test_reduced_keeps_original_indices(self):
        low = ParamSchedule(ExtExponent.finite("1.5"), self.schedule.levels)
        matrix = np.zeros((24, 16))
        matrix[:, 0] = self.family.level(3).columns[:, 5]
        B = DenseOperator(matrix, l2(16), BlockSpace.single(TWO, 24))
        result = factor_through_formal_identity(B, low, self.family, 2, [3])
        assert result.p_reduced
        assert 6 in result.index_sets[3]
        assert result.positions == tuple((3, j) for j in result.index_sets[3])
        assert result.size <= low.u(3)
        assert result.P.codomain == BlockSpace.single(TWO, result.size)


class TestIdentityThroughT(TestCase):
    def test_minimal_m_cols(self):
        assert minimal_m_cols(1) == 1
        assert minimal_m_cols(2) == 34
        for m in range(2, 6):
            M = minimal_m_cols(m)
            assert m * math.sqrt(m * (m - 1) / (M - 1)) < 0.5
            assert m * math.sqrt(m * (m - 1) / (M - 2)) >= 0.5 - 1e-12

    def test_reconstruction(self):
        assert 2 * math.sqrt(2 / 33) < 0.5
        for seed in range(10):
            family = gen_family([(64, 64)], seed)
            result = factor_identity_through_T_n(family, 2, 1, 34, seed=seed, max_tries=1000)
            assert result.tries <= 1000
            assert result.reconstruction_error <= 1e-9
            assert result.gram_energy <= result.energy_limit
            assert result.A_norm <= 2.0
            assert result.B_norm <= 2.0
            assert all(i < 34 for i in result.subset)
            assert result.record().subset == [i + 1 for i in result.subset]

    def test_norm_bounds_enforced(self):
        family = gen_family([(64, 64)], 0)
        inflated = NormBound(2.5, 2.5, NormMode.EXACT)
        with patch("opideal.factorization.quick_norm", return_value=inflated):
            with self.assertRaises(HypothesisError) as ctx:
                factor_identity_through_T_n(family, 2, 1, 34)
        assert "exceeds 2" in str(ctx.exception)

    def test_too_few_columns(self):
        family = gen_family([(64, 64)], 0)
        with self.assertRaises(HypothesisError) as ctx:
            factor_identity_through_T_n(family, 2, 1, 33)
        assert "34" in str(ctx.exception)

    def test_exhausted(self):
        family = RipFamily.from_columns([np.ones((4, 40))])
        with self.assertRaises(SamplingExhausted) as ctx:
            factor_identity_through_T_n(family, 2, 1, 34, max_tries=3)
        assert ctx.exception.tries == 3


class TestEmbedding(TestCase):
    def test_net(self):
        net = build_net_embedding(2, 2, 2.0, rows=16)
        rng = np.random.default_rng(4)
        for _ in range(50):
            T = DenseOperator(rng.standard_normal((4, 2)), l2(2), linf(4))
            result = factor_through_embedding(net, T)
            assert result.max_error <= 1e-9
            assert result.A_norm <= result.T_norm * (1 + 1e-6)
            assert result.record().rows == 16

    def test_threads(self):
        net = build_net_embedding(2, 2, 2.0, rows=16)
        T = DenseOperator(np.random.default_rng(5).standard_normal((6, 2)), l2(2), linf(6))
        single = factor_through_embedding(net, T, threads=1)
        many = factor_through_embedding(net, T, threads=3)
        assert np.array_equal(single.A.matrix, many.A.matrix)

    def test_uncertified_embedding(self):
        T = DenseOperator(np.eye(2), l2(2), linf(2))
        with self.assertRaises(HypothesisError):
            factor_through_embedding(identity(l2(2), linf(2)), T)

    def test_shrinking_embedding_refused(self):
        net = build_net_embedding(2, 2, 2.0, rows=16)
        T = DenseOperator(np.random.default_rng(6).standard_normal((4, 2)), l2(2), linf(4))
        with self.assertRaises(HypothesisError) as ctx:
            factor_through_embedding(net.operator.scaled(0.5), T, certified=True)
        assert "exceeds ||T||" in str(ctx.exception)

    def test_reconstruction_checked(self):
        class ZeroSolver(L1RepresentationSolver):
            def solve(self, rows, target, index=0):
                return np.zeros(rows.shape[0])

        net = build_net_embedding(2, 2, 2.0, rows=16)
        T = DenseOperator(np.eye(2), l2(2), linf(2))
        with self.assertRaises(HypothesisError):
            factor_through_embedding(net, T, solver=ZeroSolver())

    def test_target_must_be_sup(self):
        net = build_net_embedding(2, 2, 2.0, rows=16)
        with self.assertRaises(HypothesisError):
            factor_through_embedding(net, identity(l2(2)))


class TestLargeIdeal(TestCase):
    def test_non_fss_diagonal(self):
        T = build_non_fss_diagonal(2, [1, 2])
        result = factor_through_L(T)
        assert result.max_error <= 1e-9
        assert result.A_norm <= result.T_norm * (1 + 1e-6)

    def test_not_diagonal(self):
        T = build_non_fss_diagonal(2, [1, 2])
        matrix = np.array(T.matrix)
        matrix[0, 1] = 1.0
        with self.assertRaises(StructuralError):
            factor_through_L(DenseOperator(matrix, T.domain, T.codomain))


class TestWitnessed(TestCase):
    def setUp(self):
        self.T = build_non_fss_diagonal(2, [1, 2])

    def witnesses(self, epsilon=0.5):
        found = []
        for index, dim in enumerate([1, 2]):
            embedding = np.zeros((self.T.domain.total_dim, dim))
            embedding[self.T.domain.block_slice(index)] = 2.0 * np.eye(dim)
            found.append(Witness(embedding, epsilon, index + 1))
        return found

    def test_factorization(self):
        result = factor_K_through_witnessed_T(self.T, self.witnesses())
        assert result.max_error <= 1e-9
        assert result.within_bound
        self.assertAlmostEqual(result.uniform_bound, 4.0, delta=1e-9)
        self.assertAlmostEqual(result.B_norm, 2.0, delta=1e-9)

    def test_distinct_blocks(self):
        first = self.witnesses()[0]
        with self.assertRaises(HypothesisError):
            factor_K_through_witnessed_T(self.T, [first, first])

    def test_epsilon(self):
        with self.assertRaises(HypothesisError):
            factor_K_through_witnessed_T(self.T, self.witnesses(epsilon=0.0))

    def test_wrong_block(self):
        witness = self.witnesses()[1]
        moved = Witness(witness.embedding, 0.5, 1)
        with self.assertRaises(HypothesisError):
            factor_K_through_witnessed_T(self.T, [moved])

    def test_too_small(self):
        witness = self.witnesses()[1]
        shrunk = Witness(witness.embedding / 4, 0.5, 2)
        with self.assertRaises(HypothesisError):
            factor_K_through_witnessed_T(self.T, [shrunk])

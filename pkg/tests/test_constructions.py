import math
from unittest import TestCase

import numpy as np

from opideal.constructions import (
    SMALL, TINY, ParamSchedule, build_J_VW, build_S_M, build_T_M, build_T_n, build_formal_inclusion, build_net_embedding,
    build_non_fss_diagonal, join_masks, s_of, schedule_check, u_space, v_space,
)
from opideal.error import ConfigError, NetBudgetError, StructuralError
from opideal.opnorm import quick_norm
from opideal.rip import gen_family
from opideal.spaces import adjoint, compose, norm_of, norms_of
from opideal.types import TWO, ExtExponent, l2, linf


class TestSchedule(TestCase):
    def test_s_values(self):
        assert s_of(2, 2, 1) == (4, True)
        assert s_of("1.5", 3, 2) == (24, True)
        assert s_of(4, 2, 1) == (16, True)
        assert s_of(3, 2, 1) == (8, True)
        assert s_of(3, 1, 1) == (3, False)

    def test_presets(self):
        tiny = ParamSchedule.from_preset("tiny")
        assert tiny.levels == ((2, 6), (16, 20), (24, 40))
        assert tiny.p == TWO
        assert ParamSchedule.from_preset("small").count == 3
        with self.assertRaises(ConfigError):
            ParamSchedule.from_preset("huge")

    def test_malformed(self):
        with self.assertRaises(ConfigError):
            ParamSchedule.from_dict({"p": 2})
        with self.assertRaises(ConfigError):
            ParamSchedule.from_dict({"p": "inf", "levels": [{"u": 1, "v": 2}]})

    def test_constants(self):
        assert TINY == ParamSchedule.from_preset("tiny")
        assert SMALL.levels[-1] == (96, 256)

    def test_presets_are_honest(self):
        for schedule in (TINY, SMALL):
            report = schedule_check(schedule)
            assert not any(check.growth_holds for check in report.levels[1:])

    def test_tiny_check(self):
        report = schedule_check(ParamSchedule.from_preset("tiny"))
        assert [check.ordered for check in report.levels] == [True, True, True]
        assert not any(check.growth_holds for check in report.levels)
        assert not any(check.width_holds for check in report.levels)
        assert report.levels[0].width_required == 36

    def test_growth_requirement(self):
        schedule = ParamSchedule(TWO, ((19, 10 ** 6), (20, 10 ** 7)))
        first, second = schedule_check(schedule).levels
        assert first.growth_holds
        assert not second.growth_holds
        self.assertAlmostEqual(second.growth_required_log10, math.log10(19 * 8) + 19 * math.log10(13), delta=1e-9)
        assert second.growth_required_log10 > 6


class TestOperators(TestCase):
    def setUp(self):
        self.schedule = ParamSchedule.from_preset("tiny")
        self.family = gen_family(self.schedule.levels, 0)

    def test_spaces(self):
        assert u_space(self.schedule).dims == (2, 16, 24)
        assert v_space(self.schedule).total_dim == 66

    def test_single_level(self):
        T_2 = build_T_n(self.family, 2)
        assert T_2.domain == l2(16)
        assert T_2.codomain == linf(20)
        assert np.array_equal(T_2.matrix, self.family.level(2).columns.T)

    def test_masked_blocks(self):
        masked = build_T_M(self.schedule, self.family, [1, 3])
        assert np.array_equal(masked.block(1), self.family.level(1).columns.T)
        assert not np.any(masked.block(2))
        assert np.array_equal(masked.block(3), self.family.level(3).columns.T)

    def test_block_norms(self):
        for n in self.schedule.level_indices:
            op = build_T_M(self.schedule, self.family, [n]).realized
            self.assertAlmostEqual(quick_norm(op).upper, 1.0, delta=1e-12)

    def test_mask_outside(self):
        with self.assertRaises(StructuralError):
            build_T_M(self.schedule, self.family, [4])
        with self.assertRaises(StructuralError):
            build_T_M(self.schedule, gen_family([(2, 6)], 0), [1])

    def test_join(self):
        assert join_masks(self.schedule, self.family, [1, 2], [2, 3])
        assert join_masks(self.schedule, self.family, [], [3])

    def test_adjoint_transport(self):
        S_M = build_S_M(self.schedule, self.family, [1, 2, 3])
        T_M = build_T_M(self.schedule, self.family, [1, 2, 3]).realized
        assert np.array_equal(adjoint(S_M).matrix, compose(build_J_VW(self.schedule), T_M).matrix)
        assert S_M.codomain.outer == TWO

    def test_formal_inclusion(self):
        inclusion = build_formal_inclusion(self.schedule)
        assert np.array_equal(inclusion.matrix, np.eye(42))
        assert inclusion.codomain.is_sup_type


class TestNets(TestCase):
    def test_equiangular(self):
        net = build_net_embedding(2, 2, 2.0, rows=16)
        assert net.method == "equiangular"
        assert net.rows == 16
        rng = np.random.default_rng(0)
        for x in rng.standard_normal((50, 2)):
            size = np.linalg.norm(x)
            image = np.abs(net.operator.apply(x)).max()
            assert size <= image + 1e-12
            assert image <= net.distortion * size + 1e-12

    def test_coordinate(self):
        net = build_net_embedding(3, 1)
        assert net.method == "coordinate"
        assert net.distortion == 1.0

    def test_cube_grid(self):
        net = build_net_embedding(3, 2, 2.0)
        assert net.method == "cube-grid"
        assert net.distortion <= 2.0 + 1e-12
        p = ExtExponent.finite(3)
        rng = np.random.default_rng(1)
        for x in rng.standard_normal((50, 2)):
            size = np.linalg.norm(x, ord=p.value)
            assert size <= np.abs(net.operator.apply(x)).max() + 1e-12

    def test_distortion_on_many_points(self):
        rng = np.random.default_rng(5)
        for inner, dim, rows in [(2, 2, 16), (2, 2, None), (3, 2, None), (2, 3, None), ("1.5", 3, None)]:
            net = build_net_embedding(inner, dim, 2.0, rows=rows)
            assert net.distortion <= 2.0
            points = rng.standard_normal((dim, 10_000))
            sizes = norms_of(net.operator.domain, points)
            images = np.abs(net.operator.matrix @ points).max(axis=0)
            assert np.all(sizes <= images * (1 + 1e-12))
            assert np.all(images <= net.distortion * sizes * (1 + 1e-12))

    def test_budget(self):
        with self.assertRaises(NetBudgetError):
            build_net_embedding(2, 4, 2.0, budget=10)
        assert build_net_embedding(2, 5).method == "cube-grid"
        with self.assertRaises(NetBudgetError) as ctx:
            build_net_embedding(2, 6)
        assert ctx.exception.required_rows == 600000

    def test_bad_target(self):
        with self.assertRaises(ValueError):
            build_net_embedding(2, 2, 3.0)

    def test_non_fss_diagonal(self):
        T = build_non_fss_diagonal(2, [1, 2])
        rng = np.random.default_rng(2)
        for x in rng.standard_normal((20, 2)):
            full = np.concatenate([[0.0], x])
            image = norm_of(T.codomain, T.apply(full))
            assert image <= np.linalg.norm(x) + 1e-12
            assert np.linalg.norm(x) <= 2 * image + 1e-12

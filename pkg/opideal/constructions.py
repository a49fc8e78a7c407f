"""Parameter schedules and the concrete operators built from a column family."""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .error import ConfigError, NetBudgetError, StructuralError
from .preset_utils import PRESET_NAMES, load_preset
from .rip import RipFamily
from .spaces import adjoint, block_diag, compose, identity, mask_blocks
from .types import (
    C0, INF, TWO, BlockSpace, DenseOperator, ExtExponent, LevelCheck, ScheduleReport, l2, linf,
)

__all__ = [
    'SValue', 'ParamSchedule', 'MaskedDiagonal', 'NetEmbedding', 'DEFAULT_NET_ROWS', 'TINY', 'SMALL',
    's_of', 'schedule_check', 'u_space', 'v_space', 'w_space', 'v_inclusion_space',
    'build_T_n', 'build_T_M', 'join_masks', 'build_formal_inclusion', 'build_J_VW', 'build_S_M',
    'build_net_embedding', 'build_non_fss_diagonal',
]

logger = logging.getLogger(__name__)

DEFAULT_NET_ROWS = 200000
DEFAULT_EQUIANGULAR_ROWS = 16


class SValue(NamedTuple):
    value: int
    exact: bool


def s_of(p, u: int, n: int) -> SValue:
    p = ExtExponent.parse(p)
    if p.is_sup:
        raise ValueError("the schedule exponent must be finite")
    if u < 1 or n < 1:
        raise ValueError("u and n must be positive")
    ratio = p.ratio
    if ratio <= 2:
        return SValue(2 * u * n * n, True)
    if ratio.denominator == 1:
        k = ratio.numerator
        squared = (2 * u) ** k * n ** (2 * k)
        root = math.isqrt(squared)
        if root * root == squared:
            return SValue(root, True)
        return SValue(root + 1, False)
    return SValue(math.ceil((2 * u) ** (float(ratio) / 2) * n ** float(ratio)), False)


@dataclass(frozen=True)
class ParamSchedule:
    p: ExtExponent
    levels: Tuple[Tuple[int, int], ...]
    name: Optional[str] = None

    def __post_init__(self):
        if self.p.is_sup:
            raise ConfigError("schedule exponent p must be finite")
        if not self.levels:
            raise ConfigError("schedule needs at least one level")
        for u, v in self.levels:
            if u < 1 or v < 1:
                raise ConfigError(f"level sizes must be positive, got ({u}, {v})")

    @classmethod
    def from_preset(cls, name: str) -> 'ParamSchedule':
        if name not in PRESET_NAMES:
            raise ConfigError(f"unknown schedule preset {name!r}, expected one of {', '.join(PRESET_NAMES)}")
        return cls.from_dict(load_preset(name))

    @classmethod
    def from_dict(cls, data: dict) -> 'ParamSchedule':
        try:
            levels = tuple((int(level['u']), int(level['v'])) for level in data['levels'])
            return cls(ExtExponent.parse(data['p']), levels, data.get('name'))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed schedule: {e}")

    @classmethod
    def parse(cls, value: Union[str, dict, 'ParamSchedule']) -> 'ParamSchedule':
        if isinstance(value, ParamSchedule):
            return value
        if isinstance(value, str):
            return cls.from_preset(value)
        return cls.from_dict(value)

    def dict(self):
        return {
            "p": str(self.p),
            "levels": [{"u": u, "v": v} for u, v in self.levels],
        }

    @property
    def count(self) -> int:
        return len(self.levels)

    @property
    def level_indices(self) -> List[int]:
        return list(range(1, self.count + 1))

    def u(self, n: int) -> int:
        return self.levels[n - 1][0]

    def v(self, n: int) -> int:
        return self.levels[n - 1][1]

    def s(self, n: int) -> SValue:
        return s_of(self.p, self.u(n), n)

    @property
    def hypothesis_flags(self) -> List[Tuple[bool, bool]]:
        return [(check.growth_holds, check.width_holds) for check in schedule_check(self).levels]


def schedule_check(schedule: ParamSchedule) -> ScheduleReport:
    checks = []
    prior = 0
    previous_v = 0
    for n, (u, v) in enumerate(schedule.levels, start=1):
        s = schedule.s(n)
        log_required = math.log10(19 * n ** 3) + prior * math.log10(6 * n + 1)
        if log_required > math.log10(u) + 1:
            growth = False
        else:
            growth = u >= 19 * n ** 3 * (6 * n + 1) ** prior
        width_required = 9 * n ** 3 * s.value
        checks.append(LevelCheck(
            level=n, u=u, v=v, s=s.value, s_exact=s.exact,
            growth_holds=growth, growth_required_log10=log_required,
            width_holds=v >= width_required, width_required=width_required,
            ordered=previous_v < u < v,
        ))
        prior += u
        previous_v = v
    return ScheduleReport(p=str(schedule.p), levels=checks)


TINY = ParamSchedule.from_preset("tiny")
SMALL = ParamSchedule.from_preset("small")


def u_space(schedule: ParamSchedule) -> BlockSpace:
    return BlockSpace.uniform(TWO, [u for u, _ in schedule.levels], schedule.p)


def v_space(schedule: ParamSchedule) -> BlockSpace:
    return BlockSpace.uniform(INF, [v for _, v in schedule.levels], C0)


def w_space(schedule: ParamSchedule) -> BlockSpace:
    return BlockSpace.uniform(INF, [v for _, v in schedule.levels], INF)


def v_inclusion_space(schedule: ParamSchedule) -> BlockSpace:
    return BlockSpace.uniform(INF, [u for u, _ in schedule.levels], C0)


def build_T_n(family: RipFamily, n: int) -> DenseOperator:
    level = family.level(n)
    return DenseOperator(level.columns.T, l2(level.u), linf(level.v))


def _check_family(schedule: ParamSchedule, family: RipFamily):
    if [tuple(level) for level in family.shape] != list(schedule.levels):
        raise StructuralError(f"family shape {family.shape} does not match schedule {list(schedule.levels)}")


def _check_mask(schedule: ParamSchedule, mask: Iterable[int]) -> FrozenSet[int]:
    mask = frozenset(int(n) for n in mask)
    outside = sorted(n for n in mask if not 1 <= n <= schedule.count)
    if outside:
        raise StructuralError(f"mask levels {outside} outside 1..{schedule.count}")
    return mask


@dataclass(frozen=True, eq=False)
class MaskedDiagonal:
    schedule: ParamSchedule
    family: RipFamily
    mask: FrozenSet[int]
    realized: DenseOperator

    def block(self, n: int) -> np.ndarray:
        rows = self.realized.codomain.block_slice(n - 1)
        cols = self.realized.domain.block_slice(n - 1)
        return self.realized.matrix[rows, cols]


def build_T_M(schedule: ParamSchedule, family: RipFamily, mask: Iterable[int]) -> MaskedDiagonal:
    _check_family(schedule, family)
    mask = _check_mask(schedule, mask)
    blocks = [build_T_n(family, n) for n in schedule.level_indices]
    full = block_diag(blocks, schedule.p, C0)
    return MaskedDiagonal(schedule, family, mask, mask_blocks(full, mask))


def join_masks(schedule: ParamSchedule, family: RipFamily, first: Iterable[int], second: Iterable[int]) -> bool:
    """T over the union equals T over the difference plus T over ``second``, entry for entry."""
    first, second = frozenset(first), frozenset(second)
    union = build_T_M(schedule, family, first | second).realized.matrix
    parts = (build_T_M(schedule, family, first - second).realized.matrix
             + build_T_M(schedule, family, second).realized.matrix)
    return bool(np.array_equal(union, parts))


def build_formal_inclusion(schedule: ParamSchedule) -> DenseOperator:
    return identity(u_space(schedule), v_inclusion_space(schedule))


def build_J_VW(schedule: ParamSchedule) -> DenseOperator:
    return identity(v_space(schedule), w_space(schedule))


def build_S_M(schedule: ParamSchedule, family: RipFamily, mask: Iterable[int]) -> DenseOperator:
    """The operator W_* -> U_* whose adjoint is J composed with T_M."""
    t_m = build_T_M(schedule, family, mask).realized
    return adjoint(compose(build_J_VW(schedule), t_m))


@dataclass(frozen=True, eq=False)
class NetEmbedding:
    """Embedding of l_p^dim into l_inf^rows with ||x|| <= ||Kx|| <= distortion ||x||."""
    operator: DenseOperator
    distortion: float
    epsilon: float
    method: str

    @property
    def rows(self) -> int:
        return self.operator.matrix.shape[0]


def _equiangular(dim_rows: Optional[int], target: float) -> Tuple[np.ndarray, float]:
    if dim_rows is None:
        count = DEFAULT_EQUIANGULAR_ROWS
        while 1.0 / math.cos(math.pi / (2 * count)) > target:
            count *= 2
    else:
        count = dim_rows
    cosine = math.cos(math.pi / (2 * count))
    if 1.0 / cosine > target:
        raise ValueError(f"{count} equiangular rows give distortion {1 / cosine:.6f} above {target}")
    angles = math.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)]), 1.0 - cosine


def _cube_grid(p: ExtExponent, dim: int, target: float, budget: int) -> Tuple[np.ndarray, float]:
    dual = p.conjugate()
    spread = (dim - 1) ** dual.reciprocal
    wanted = 1.0 - 1.0 / target
    points = math.ceil(2.0 * spread / wanted) + 1
    required = dim * points ** (dim - 1)
    if required > budget:
        raise NetBudgetError(required, budget)
    spacing = 2.0 / (points - 1)
    axis = np.linspace(-1.0, 1.0, points)
    faces = []
    # positive faces only: the sup norm takes absolute values
    grid = np.array(list(itertools.product(axis, repeat=dim - 1)))
    for fixed in range(dim):
        faces.append(np.insert(grid, fixed, 1.0, axis=1))
    rows = np.unique(np.round(np.vstack(faces), 12), axis=0)
    sizes = np.linalg.norm(rows, ord=np.inf if dual.is_sup else dual.value, axis=1)
    return rows / sizes[:, None], spacing * spread


def build_net_embedding(inner_p, dim: int, distortion_target: float = 2.0, rows: Optional[int] = None,
                        budget: int = DEFAULT_NET_ROWS) -> NetEmbedding:
    """Norming embedding J of l_p^dim into l_inf^rows with ||x|| <= ||Jx|| <= distortion ||x||.

    Only l_2^2 gets the equiangular net. Every other case grids the faces of the
    unit cube, which takes dim * points^(dim - 1) rows with points growing like
    (dim - 1)^(1/p') / (1 - 1/distortion_target). Under the default budget a
    target of 2 on l_2 stops at dim = 5 (dim = 6 needs 600000 rows); past the
    budget NetBudgetError reports the required row count.
    """
    p = ExtExponent.parse(inner_p)
    if not 1.0 < distortion_target <= 2.0:
        raise ValueError(f"distortion target must lie in (1, 2], got {distortion_target}")
    if dim < 1:
        raise ValueError("dimension must be positive")
    domain = BlockSpace.single(p, dim)
    if p.is_sup or dim == 1:
        return NetEmbedding(DenseOperator(np.eye(dim), domain, linf(dim)), 1.0, 0.0, "coordinate")
    if p.value == 2 and dim == 2:
        net, epsilon = _equiangular(rows, distortion_target)
        method = "equiangular"
    else:
        net, epsilon = _cube_grid(p, dim, distortion_target, budget)
        method = "cube-grid"
    distortion = 1.0 / (1.0 - epsilon)
    logger.debug("net for l_%s^%d: %d rows, distortion %.6f", p, dim, len(net), distortion)
    return NetEmbedding(DenseOperator(net * distortion, domain, linf(len(net))), distortion, epsilon, method)


def build_non_fss_diagonal(inner_p, dims: Sequence[int]) -> DenseOperator:
    """diag of normalized net embeddings with ||T_n x|| <= ||x|| <= 2 ||T_n x||."""
    p = ExtExponent.parse(inner_p)
    blocks = []
    for dim in dims:
        net = build_net_embedding(p, dim, 2.0)
        blocks.append(net.operator.scaled(1.0 / net.distortion))
    return block_diag(blocks, p, C0)

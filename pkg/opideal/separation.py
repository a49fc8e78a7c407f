"""Separating functionals on diagonal operators and the experiments built on them."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .constructions import (
    ParamSchedule, build_S_M, build_T_M, build_T_n, build_formal_inclusion, schedule_check, u_space,
    v_inclusion_space, v_space, w_space,
)
from .error import HypothesisError, StructuralError
from .opnorm import DEFAULT_TOLERANCE, quick_norm
from .parallel import child_seeds, parallel_map
from .rip import RipFamily
from .spaces import block_diag, compose, dual_space, norms_of, require_compatible
from .types import (
    C0, TWO, BlockSpace, DenseOperator, PigeonholeRecord, RemarkReport, RipCertificate, SeparationReport,
    VerdictStatus, l_space, l2,
)

__all__ = [
    'FunctionalKind', 'SeparatingFunctional', 'SplitResult', 'ASCENT_STEPS', 'ASCENT_RESTARTS',
    'eval_functional', 'split_at_n0', 'pigeonhole_diagnostic', 'separation_experiment', 'remark_experiment',
    'dual_transport_gap', 'random_sup_operator', 'random_unit_operator',
]

logger = logging.getLogger(__name__)

ASCENT_STEPS = 200
ASCENT_RESTARTS = 8
NET_SAMPLES = 256

CONDITIONAL_NOTE = "conditional: hypotheses not certified at desk scale"


class FunctionalKind(Enum):
    PHI_V = "phi_V"
    PSI_W = "psi_W"
    PSI_DUAL = "psi_dual"
    PSI_REMARK = "psi_remark"


@dataclass(frozen=True, eq=False)
class SeparatingFunctional:
    kind: FunctionalKind
    m: int
    schedule: ParamSchedule
    family: RipFamily

    def __post_init__(self):
        if not 1 <= self.m <= self.schedule.count:
            raise StructuralError(f"level {self.m} outside 1..{self.schedule.count}")

    def spaces(self) -> Tuple[BlockSpace, BlockSpace]:
        """Expected (domain, codomain) of the operators this functional acts on."""
        schedule = self.schedule
        if self.kind is FunctionalKind.PHI_V:
            return u_space(schedule), v_space(schedule)
        if self.kind is FunctionalKind.PSI_W:
            return u_space(schedule), w_space(schedule)
        if self.kind is FunctionalKind.PSI_DUAL:
            return dual_space(v_space(schedule)), dual_space(u_space(schedule))
        return u_space(schedule), v_inclusion_space(schedule)

    def __call__(self, S: DenseOperator) -> float:
        return eval_functional(self, S)


def eval_functional(F: SeparatingFunctional, S: DenseOperator) -> float:
    domain, codomain = F.spaces()
    require_compatible(domain, S.domain)
    require_compatible(codomain, S.codomain)
    index = F.m - 1
    block = S.matrix[codomain.block_slice(index), domain.block_slice(index)]
    if F.kind is FunctionalKind.PSI_REMARK:
        return float(np.trace(block)) / F.schedule.u(F.m)
    G = F.family.level(F.m).columns
    if F.kind is FunctionalKind.PSI_DUAL:
        # <S e_i, g_i> summed over the l_1 basis of block m
        return float(np.einsum('ki,ki->', G, block)) / F.schedule.v(F.m)
    # <S g_i, e_i>
    return float(np.einsum('ik,ki->', block, G)) / F.schedule.v(F.m)


@dataclass(frozen=True, eq=False)
class SplitResult:
    B1: Optional[DenseOperator]
    B2: Optional[DenseOperator]
    D1: Optional[DenseOperator]
    D2: Optional[DenseOperator]
    n0: Optional[int]
    low_levels: Tuple[int, ...]
    high_levels: Tuple[int, ...]
    note: str = ""


def _restrict(B: DenseOperator, schedule: ParamSchedule, family: RipFamily, m: int,
              levels: Sequence[int]) -> Tuple[Optional[DenseOperator], Optional[DenseOperator]]:
    if not levels:
        return None, None
    U = u_space(schedule)
    rows = np.concatenate([np.arange(U.total_dim)[U.block_slice(n - 1)] for n in levels])
    target = BlockSpace.uniform(TWO, [schedule.u(n) for n in levels], schedule.p)
    restricted = DenseOperator(B.matrix[np.ix_(rows, np.arange(U.total_dim)[U.block_slice(m - 1)])],
                               l2(schedule.u(m)), target)
    D = block_diag([build_T_n(family, n) for n in levels], schedule.p, C0)
    return restricted, D


def split_at_n0(B: DenseOperator, schedule: ParamSchedule, family: RipFamily, m: int,
                N_levels: Iterable[int]) -> SplitResult:
    U = u_space(schedule)
    require_compatible(U, B.domain)
    require_compatible(U, B.codomain)
    levels = sorted(set(int(n) for n in N_levels))
    if m in levels:
        raise HypothesisError(f"level {m} must not belong to N")
    if not levels:
        return SplitResult(None, None, None, None, None, (), (), "N is empty, n0 undefined and both parts vanish")
    above = [n for n in levels if n > m]
    n0 = above[0] if above else None
    low = tuple(n for n in levels if n0 is None or n < n0)
    high = tuple(n for n in levels if n0 is not None and n >= n0)
    B1, D1 = _restrict(B, schedule, family, m, low)
    B2, D2 = _restrict(B, schedule, family, m, high)
    note = "" if n0 is not None else "no level of N above m, n0 undefined"
    return SplitResult(B1, B2, D1, D2, n0, low, high, note)


def _ball_samples(space: BlockSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    points = rng.standard_normal((space.total_dim, count))
    points /= norms_of(space, points)
    return points * rng.random(count) ** (1.0 / space.total_dim)


def pigeonhole_diagnostic(B1: Optional[DenseOperator], family: RipFamily, m: int, seed: int = 0,
                          net_samples: int = NET_SAMPLES, tol: float = DEFAULT_TOLERANCE,
                          allow_uncertified: bool = False) -> PigeonholeRecord:
    """The set H of large images and the worst empirical 1/(3m)-cluster inside it.

    ``||B1|| <= 1`` must be certified unless ``allow_uncertified`` is set, in
    which case the record is computed anyway and a warning is logged.
    """
    level = family.level(m)
    target = level.v / m
    if B1 is None:
        return PigeonholeRecord(m=m, h_indices=[], h_size=0, target=target, holds=True, cluster_size=0,
                                cluster_gram_sq=0.0, cluster_gram_limit=0.0, cluster_sum_norm=0.0,
                                cluster_sum_target=0.0, net_log10=0.0)
    require_compatible(l2(level.u), B1.domain)
    bound = quick_norm(B1)
    if bound.lower > 1.0 + tol:
        raise HypothesisError(f"||B1|| >= {bound.lower:.12g} exceeds 1")
    if bound.upper > 1.0 + tol:
        if not allow_uncertified:
            raise HypothesisError(f"||B1|| <= 1 not certified, best upper bound {bound.upper:.12g}",
                                  hint="pass allow_uncertified=True for a diagnostic record")
        logger.warning("||B1|| <= 1 only known up to %.6g", bound.upper)

    images = B1.matrix @ level.columns
    sizes = norms_of(B1.codomain, images)
    H = np.flatnonzero(sizes > 1.0 / m)
    net_log10 = B1.codomain.total_dim * math.log10(6 * m + 1)

    cluster = np.array([], dtype=int)
    if len(H):
        rng = np.random.default_rng(seed)
        centers = np.hstack([images[:, H], _ball_samples(B1.codomain, net_samples, rng)])
        radius = 1.0 / (3 * m)
        for k in range(centers.shape[1]):
            members = H[norms_of(B1.codomain, images[:, H] - centers[:, [k]]) <= radius]
            if len(members) > len(cluster):
                cluster = members
    size = len(cluster)
    total = level.columns[:, cluster].sum(axis=1)
    image_total = images[:, cluster].sum(axis=1)
    return PigeonholeRecord(
        m=m,
        h_indices=[int(i) + 1 for i in H],
        h_size=len(H),
        target=target,
        holds=len(H) <= target,
        cluster_size=size,
        cluster_gram_sq=float(total @ total),
        cluster_gram_limit=2.0 * size,
        cluster_sum_norm=float(norms_of(B1.codomain, image_total[:, None])[0]),
        cluster_sum_target=size / (3 * m),
        net_log10=net_log10,
    )


def random_sup_operator(domain: BlockSpace, codomain: BlockSpace, rng: np.random.Generator) -> DenseOperator:
    """Gaussian operator between sup-normed sums, scaled to norm exactly one."""
    matrix = rng.standard_normal((codomain.total_dim, domain.total_dim))
    return DenseOperator(matrix / np.abs(matrix).sum(axis=1).max(), domain, codomain)


def random_unit_operator(domain: BlockSpace, codomain: BlockSpace, rng: np.random.Generator) -> DenseOperator:
    """Gaussian operator scaled by its certified upper norm."""
    op = DenseOperator(rng.standard_normal((codomain.total_dim, domain.total_dim)), domain, codomain)
    return op.scaled(1.0 / quick_norm(op).upper)


def _sample_pair(seed, U: BlockSpace, V: BlockSpace) -> Tuple[DenseOperator, DenseOperator]:
    rng = np.random.default_rng(seed)
    return random_sup_operator(V, V, rng), random_unit_operator(U, U, rng)


class _PhiAscent:
    """Alternating maximization of Phi_m(A T_N B) over ||A||, ||B|| <= 1.

    Only the block-m rows of A and the block-m columns of B enter the value.
    """

    def __init__(self, F: SeparatingFunctional, T_N: DenseOperator):
        self.F = F
        self.T = T_N.matrix
        U, V = u_space(F.schedule), v_space(F.schedule)
        self.U, self.V = U, V
        self.rows = V.block_slice(F.m - 1)
        self.cols = U.block_slice(F.m - 1)
        self.G = F.family.level(F.m).columns
        self.v_m = F.schedule.v(F.m)
        self.flat = F.schedule.p.value == 2

    def value(self, A_m: np.ndarray, B_m: np.ndarray) -> float:
        return float(np.einsum('ik,ki->', A_m @ self.T @ B_m, self.G)) / self.v_m

    def best_A(self, B_m: np.ndarray) -> np.ndarray:
        X = self.T @ B_m @ self.G
        picks = np.argmax(np.abs(X), axis=0)
        A_m = np.zeros((self.v_m, X.shape[0]))
        columns = np.arange(self.v_m)
        A_m[columns, picks] = np.sign(X[picks, columns])
        return A_m

    def best_B(self, A_m: np.ndarray) -> np.ndarray:
        Y = self.T.T @ A_m.T @ self.G.T
        left, _, right = np.linalg.svd(Y, full_matrices=False)
        B_m = left @ right
        if self.flat:
            return B_m
        # l_2 maximizer pulled back inside the unit ball of L(l_2^{u_m}, U)
        return B_m / quick_norm(DenseOperator(B_m, l2(self.G.shape[0]), self.U)).upper

    def run(self, B_m: np.ndarray, steps: int) -> Tuple[float, np.ndarray, np.ndarray]:
        A_m = self.best_A(B_m)
        best = (abs(self.value(A_m, B_m)), A_m, B_m)
        for _ in range(steps):
            B_m = self.best_B(A_m)
            A_m = self.best_A(B_m)
            value = abs(self.value(A_m, B_m))
            if value <= best[0] + 1e-15:
                break
            best = (value, A_m, B_m)
        return best

    def embed(self, A_m: np.ndarray, B_m: np.ndarray) -> Tuple[DenseOperator, DenseOperator]:
        A = np.zeros((self.V.total_dim, self.V.total_dim))
        A[self.rows] = A_m
        B = np.zeros((self.U.total_dim, self.U.total_dim))
        B[:, self.cols] = B_m
        return DenseOperator(A, self.V, self.V), DenseOperator(B, self.U, self.U)


def _hypotheses_certified(schedule: ParamSchedule, m: int, high_levels: Sequence[int],
                          certificates: Sequence[RipCertificate]) -> bool:
    check = schedule_check(schedule).levels[m - 1]
    if not (check.growth_holds and check.width_holds):
        return False
    order = schedule.s(m).value + 1
    cluster_order = 19 * m * m
    needed = [(n, order, True) for n in high_levels] + [(m, cluster_order, False)]
    for level, k, besselian in needed:
        k = min(k, schedule.v(level))
        if not any(c.level == level and c.order >= k and c.certifies and (besselian or not c.besselian_only)
                   for c in certificates):
            return False
    return True


def separation_experiment(schedule: ParamSchedule, family: RipFamily, M_mask: Iterable[int],
                          N_mask: Iterable[int], m: int, n_samples: int, seed: int = 0,
                          threads: Optional[int] = None, certificates: Sequence[RipCertificate] = (),
                          margin: Optional[float] = None, restarts: int = ASCENT_RESTARTS,
                          steps: int = ASCENT_STEPS, tol: float = DEFAULT_TOLERANCE) -> SeparationReport:
    M, N = sorted(set(M_mask)), sorted(set(N_mask))
    if m not in M or m in N:
        raise HypothesisError(f"level {m} must lie in M \\ N (M={M}, N={N})")
    F = SeparatingFunctional(FunctionalKind.PHI_V, m, schedule, family)
    T_M = build_T_M(schedule, family, M).realized
    T_N = build_T_M(schedule, family, N).realized
    phi_t_m = F(T_M)
    identity_composite = F(T_N)

    U, V = u_space(schedule), v_space(schedule)
    ascent = _PhiAscent(F, T_N)
    seeds = child_seeds(seed, n_samples + restarts)

    def sample(child):
        A, B = _sample_pair(child, U, V)
        return abs(ascent.value(A.matrix[ascent.rows], B.matrix[:, ascent.cols]))

    values = parallel_map(sample, seeds[:n_samples], threads)
    max_random = max(values) if values else 0.0
    logger.info("separation at m=%d: %d samples, max |Phi| %.6g", m, n_samples, max_random)

    starts = []
    if values:
        _, B = _sample_pair(seeds[int(np.argmax(values))], U, V)
        starts.append(B.matrix[:, ascent.cols])
    for child in seeds[n_samples:]:
        _, B = _sample_pair(child, U, V)
        starts.append(B.matrix[:, ascent.cols])
    runs = parallel_map(lambda start: ascent.run(start, steps), starts, threads)
    max_adversarial = max_random
    if runs:
        value, A_m, B_m = max(runs, key=lambda run: run[0])
        A, B = ascent.embed(A_m, B_m)
        # recompute through the full composite
        value = abs(F(compose(A, compose(T_N, B))))
        max_adversarial = max(max_adversarial, value)

    high = [n for n in N if n > m]
    bound = 6.0 / m
    vacuous = bound >= 1.0
    notes: List[str] = []
    within_bound = max_adversarial <= bound + tol
    if _hypotheses_certified(schedule, m, high, certificates):
        status = VerdictStatus.PASSED if within_bound else VerdictStatus.FAILED
    else:
        status = VerdictStatus.CONDITIONAL
        notes.append(CONDITIONAL_NOTE)
    if vacuous:
        notes.append(f"6/m = {bound:.6g} >= 1, the comparison is vacuous")
    within_margin = None if margin is None else max_adversarial <= margin + tol
    return SeparationReport(
        m=m,
        mask_m=M,
        mask_n=N,
        n0=high[0] if high else None,
        samples=n_samples,
        phi_t_m=phi_t_m,
        identity_composite=identity_composite,
        max_random=max_random,
        max_adversarial=max_adversarial,
        bound_6_over_m=bound,
        bound_status=status,
        vacuous=vacuous,
        within_unit_norm=max_adversarial <= 1.0 + tol,
        within_bound=within_bound,
        margin=margin,
        within_margin=within_margin,
        hypothesis_certificates=list(certificates),
        notes=notes,
    )


def remark_experiment(schedule: ParamSchedule, family: RipFamily, m: int, n_samples: int, seed: int = 0,
                      threads: Optional[int] = None) -> RemarkReport:
    """Psi_m on I_{U,V} and on sampled A I_{l_p,c0} B, level by level."""
    p = schedule.p
    note = ""
    if not 1 < p.value < 2:
        note = f"p = {p} lies outside (1, 2); the sweep is diagnostic only"
        logger.warning(note)
    U, V = u_space(schedule), v_inclusion_space(schedule)
    psi = SeparatingFunctional(FunctionalKind.PSI_REMARK, m, schedule, family)
    psi_inclusion = psi(build_formal_inclusion(schedule))

    lp, sup = l_space(p, U.total_dim), l_space(C0, U.total_dim)

    def sample(child) -> np.ndarray:
        rng = np.random.default_rng(child)
        B = random_unit_operator(U, lp, rng)
        A = random_sup_operator(sup, V, rng)
        composite = A.matrix @ B.matrix
        return np.array([
            abs(np.trace(composite[V.block_slice(n - 1), U.block_slice(n - 1)])) / schedule.u(n)
            for n in schedule.level_indices
        ])

    rows = parallel_map(sample, child_seeds(seed, n_samples), threads)
    peaks = np.max(rows, axis=0) if rows else np.zeros(schedule.count)
    per_level = {n: float(peaks[n - 1]) for n in schedule.level_indices}
    return RemarkReport(
        m=m,
        p=str(p),
        psi_inclusion=psi_inclusion,
        per_level=per_level,
        non_increasing=bool(np.all(np.diff(peaks) <= DEFAULT_TOLERANCE)),
        samples=n_samples,
        note=note,
    )


def dual_transport_gap(schedule: ParamSchedule, family: RipFamily, mask: Iterable[int]) -> Dict[int, float]:
    """|Psi_m(S_M) - Phi_m(T_M)| for every level of the mask."""
    mask = sorted(set(mask))
    T_M = build_T_M(schedule, family, mask).realized
    S_M = build_S_M(schedule, family, mask)
    gaps = {}
    for m in mask:
        phi = SeparatingFunctional(FunctionalKind.PHI_V, m, schedule, family)
        psi = SeparatingFunctional(FunctionalKind.PSI_DUAL, m, schedule, family)
        gaps[m] = abs(psi(S_M) - phi(T_M))
    return gaps

"""Constructive factorizations: through the formal identity, of the identity through T_n,
and through norming embeddings into sup-normed spaces."""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constructions import NetEmbedding, ParamSchedule, build_T_n, build_net_embedding
from .error import HypothesisError, SamplingExhausted, StructuralError
from .lp import HighsSolver, L1RepresentationSolver
from .opnorm import DEFAULT_TOLERANCE, injectivity_modulus, quick_norm
from .parallel import parallel_map
from .rip import RipFamily
from .spaces import block_diag, compose, identity, require_compatible
from .types import (
    C0, INF, TWO, BlockSpace, DenseOperator, EmbeddingRecord, FactorizationRecord, IdentityRecord,
    NormBound, NormMode, NormRecord, l2, linf,
)

__all__ = [
    'ApproxFactorization', 'IdentityFactorization', 'EmbeddingFactorization', 'LargeIdealFactorization',
    'Witness', 'WitnessedFactorization', 'minimal_m_cols',
    'factor_through_formal_identity', 'reduce_p_le_2', 'factor_identity_through_T_n',
    'factor_through_embedding', 'factor_through_L', 'factor_K_through_witnessed_T',
]

logger = logging.getLogger(__name__)

_ZERO = NormBound(0.0, 0.0, NormMode.EXACT)
FACTOR_BOUND = 2.0
NORM_SLACK = 1e-6


def _record(bound: NormBound) -> NormRecord:
    return NormRecord(lower=bound.lower, upper=bound.upper, mode=bound.mode.value)


@dataclass(frozen=True, eq=False)
class ApproxFactorization:
    """D B ~ R I P with D = diag(T_n) over the target levels.

    ``P``, ``R`` and ``I_formal`` are None when no index survives the threshold;
    the factorization is then the zero map and the residual is ||DB||.
    """
    m: int
    index_sets: Dict[int, Tuple[int, ...]]
    P: Optional[DenseOperator]
    R: Optional[DenseOperator]
    I_formal: Optional[DenseOperator]
    residual_norm: float
    P_norm: NormBound
    R_norm: NormBound
    budget_s_m: int
    positions: Tuple[Tuple[int, int], ...] = ()
    p_reduced: bool = False

    @property
    def size(self) -> int:
        return sum(len(js) for js in self.index_sets.values())

    def record(self) -> FactorizationRecord:
        return FactorizationRecord(
            m=self.m,
            index_sets={n: list(js) for n, js in self.index_sets.items()},
            residual_norm=self.residual_norm,
            p_norm=_record(self.P_norm),
            r_norm=_record(self.R_norm),
            budget_s_m=self.budget_s_m,
            p_reduced=self.p_reduced,
        )


def reduce_p_le_2(B: DenseOperator, schedule: ParamSchedule) -> Tuple[DenseOperator, str]:
    p = schedule.p.value
    if p > 2:
        raise HypothesisError(f"the l_2 reduction needs p <= 2, schedule has p = {schedule.p}")
    if p == 2:
        return B, "p = 2, nothing to reduce"
    codomain = BlockSpace(B.codomain.blocks, TWO)
    note = f"outer l_{schedule.p} replaced by l_2; the formal identity between them has norm 1"
    return B.with_spaces(codomain=codomain), note


def _target_space(schedule: ParamSchedule, levels: Sequence[int]) -> BlockSpace:
    return BlockSpace.uniform(TWO, [schedule.u(n) for n in levels], schedule.p)


def factor_through_formal_identity(B: DenseOperator, schedule: ParamSchedule, family: RipFamily, m: int,
                                   N_levels: Iterable[int], tol: float = DEFAULT_TOLERANCE) -> ApproxFactorization:
    levels = sorted(set(int(n) for n in N_levels))
    if any(n <= m for n in levels):
        raise HypothesisError(f"target levels {levels} must all lie above m = {m}")
    if any(n > schedule.count for n in levels) or not 1 <= m <= schedule.count:
        raise StructuralError("levels outside the schedule")
    require_compatible(l2(schedule.u(m)), B.domain)
    s_m = schedule.s(m).value
    if not levels:
        logger.info("no target levels, degenerate factorization")
        return ApproxFactorization(m, {}, None, None, None, 0.0, _ZERO, _ZERO, s_m)
    require_compatible(_target_space(schedule, levels), B.codomain)

    # the hypothesis is on B as given, before any change of outer norm
    bound = quick_norm(B)
    if bound.upper > 1.0 + tol:
        raise HypothesisError(f"||B|| <= 1 not certified, best upper bound {bound.upper:.12g} ({bound.mode.value})")
    reduced = schedule.p.value < 2
    if reduced:
        B, note = reduce_p_le_2(B, schedule)
        logger.debug(note)

    # dual sweep ||B* g_j^(n)|| over every target column
    pieces = []
    for index, n in enumerate(levels):
        block = B.matrix[B.codomain.block_slice(index)]
        columns = family.level(n).columns
        scores = np.linalg.norm(block.T @ columns, axis=0)
        pieces.append((np.full(len(scores), n), np.arange(len(scores)), scores, block, columns))
    level_of = np.concatenate([piece[0] for piece in pieces])
    index_of = np.concatenate([piece[1] for piece in pieces])
    scores = np.concatenate([piece[2] for piece in pieces])

    top = np.lexsort((index_of, level_of, -scores))[:s_m + 1]
    chosen = sorted((int(level_of[k]), int(index_of[k])) for k in top if scores[k] >= 1.0 / m)

    D = block_diag([build_T_n(family, n) for n in levels], B.codomain.outer, C0)
    DB = D.matrix @ B.matrix
    index_sets: Dict[int, Tuple[int, ...]] = {n: () for n in levels}

    if not chosen:
        residual = quick_norm(DenseOperator(DB, B.domain, D.codomain)).upper
        return ApproxFactorization(m, index_sets, None, None, None, residual, _ZERO, _ZERO, s_m, (), reduced)

    position = {n: index for index, n in enumerate(levels)}
    rows = []
    for n, j in chosen:
        _, _, _, block, columns = pieces[position[n]]
        rows.append(columns[:, j] @ block)
    counts = [sum(1 for level, _ in chosen if level == n) for n in levels]

    for n, j in chosen:
        index_sets[n] += (j + 1,)
    if reduced:
        # every surviving coordinate lands in one l_2 block of the lowest target level
        if len(chosen) > schedule.u(levels[0]):
            raise HypothesisError(f"{len(chosen)} surviving indices do not fit in u_{levels[0]} = "
                                  f"{schedule.u(levels[0])}")
        small = BlockSpace.single(TWO, len(chosen))
        small_sup = linf(len(chosen))
    else:
        kept = [count for count in counts if count]
        small = BlockSpace.uniform(TWO, kept, schedule.p)
        small_sup = BlockSpace.uniform(INF, kept, C0)

    P = DenseOperator(np.array(rows), B.domain, small)
    I_formal = identity(small, small_sup)
    embed = np.zeros((D.codomain.total_dim, len(chosen)))
    offsets = D.codomain.offsets
    for k, (n, j) in enumerate(chosen):
        embed[offsets[position[n]] + j, k] = 1.0
    R = DenseOperator(embed, small_sup, D.codomain)

    residual = quick_norm(DenseOperator(DB - embed @ P.matrix, B.domain, D.codomain)).upper
    return ApproxFactorization(
        m=m,
        index_sets=index_sets,
        P=P,
        R=R,
        I_formal=I_formal,
        residual_norm=residual,
        P_norm=quick_norm(P),
        R_norm=quick_norm(R),
        budget_s_m=s_m,
        positions=tuple((n, j + 1) for n, j in chosen),
        p_reduced=reduced,
    )


def minimal_m_cols(m: int) -> int:
    """Smallest M with m * sqrt(m(m-1)/(M-1)) < 1/2."""
    if m <= 1:
        return 1
    return 4 * m ** 3 * (m - 1) + 2


@dataclass(frozen=True, eq=False)
class IdentityFactorization:
    A: DenseOperator
    P: DenseOperator
    B: DenseOperator
    T_n: DenseOperator
    subset: Tuple[int, ...]
    reconstruction_error: float
    gram_energy: float
    energy_limit: float
    tries: int
    A_norm: float
    B_norm: float
    m: int
    level: int
    m_cols: int

    def record(self) -> IdentityRecord:
        return IdentityRecord(
            m=self.m, level=self.level, m_cols=self.m_cols,
            subset=[i + 1 for i in self.subset],
            reconstruction_error=self.reconstruction_error,
            gram_energy=self.gram_energy,
            energy_limit=self.energy_limit,
            tries=self.tries,
            a_norm=self.A_norm,
            b_norm=self.B_norm,
        )


def factor_identity_through_T_n(family: RipFamily, m: int, n: int, M_cols: int, seed: int = 0,
                                max_tries: int = 1000) -> IdentityFactorization:
    if m < 1:
        raise HypothesisError("m must be positive")
    if M_cols < minimal_m_cols(m):
        raise HypothesisError(f"m * sqrt(m(m-1)/(M-1)) < 1/2 fails for m = {m}, M = {M_cols}",
                              hint=f"M_cols >= {minimal_m_cols(m)}")
    level = family.level(n)
    if M_cols > level.v or M_cols < m:
        raise HypothesisError(f"level {n} has {level.v} columns, M_cols = {M_cols} with m = {m}")

    limit = m * (m - 1) / (M_cols - 1) if m > 1 else 0.0
    rng = np.random.default_rng(seed)
    best = np.inf
    for tries in range(1, max_tries + 1):
        subset = np.sort(rng.choice(M_cols, size=m, replace=False))
        sub = level.gram[np.ix_(subset, subset)]
        energy = float((sub ** 2).sum() - (np.diag(sub) ** 2).sum())
        if energy <= limit:
            break
        best = min(best, energy)
    else:
        raise SamplingExhausted(max_tries, best)

    T_n = build_T_n(family, n)
    B = DenseOperator(level.columns[:, subset], l2(m), l2(level.u))
    selection = np.zeros((m, level.v))
    selection[np.arange(m), subset] = 1.0
    P = DenseOperator(selection, linf(level.v), linf(m))
    U = compose(P, compose(T_n, B))
    A = DenseOperator(np.linalg.solve(U.matrix, np.eye(m)), linf(m), linf(m))
    composite = compose(A, U)
    error = float(np.abs(composite.matrix - np.eye(m)).max())
    logger.debug("identity through T_%d: subset %s after %d tries, error %.3g", n, subset.tolist(), tries, error)
    A_norm, B_norm = quick_norm(A).upper, quick_norm(B).upper
    if B_norm > FACTOR_BOUND + DEFAULT_TOLERANCE:
        raise HypothesisError(f"||B|| = {B_norm:.12g} exceeds {FACTOR_BOUND}, level {n} columns are not besselian")
    if A_norm > FACTOR_BOUND + DEFAULT_TOLERANCE:
        raise HypothesisError(f"||A|| = {A_norm:.12g} exceeds {FACTOR_BOUND} for subset {subset.tolist()}")
    return IdentityFactorization(
        A=A, P=P, B=B, T_n=T_n,
        subset=tuple(int(i) for i in subset),
        reconstruction_error=error,
        gram_energy=energy,
        energy_limit=limit,
        tries=tries,
        A_norm=A_norm,
        B_norm=B_norm,
        m=m, level=n, m_cols=M_cols,
    )


@dataclass(frozen=True, eq=False)
class EmbeddingFactorization:
    A: DenseOperator
    A_norm: float
    T_norm: float
    max_error: float

    def record(self) -> EmbeddingRecord:
        return EmbeddingRecord(rows=self.A.matrix.shape[1], a_norm=self.A_norm, t_norm=self.T_norm,
                               max_error=self.max_error)


def _certified_embedding(embedding: Union[NetEmbedding, DenseOperator], budget: int, tol: float,
                         certified: bool) -> DenseOperator:
    if isinstance(embedding, NetEmbedding):
        return embedding.operator
    if not embedding.codomain.is_sup_type:
        raise HypothesisError(f"embedding must land in a sup-normed space, got {embedding.codomain}")
    if not certified:
        modulus = injectivity_modulus(embedding, budget, tol)
        if modulus < 1.0 - tol:
            raise HypothesisError(f"||x|| <= ||Jx|| fails, injectivity modulus {modulus:.12g}")
    return embedding


def factor_through_embedding(embedding: Union[NetEmbedding, DenseOperator], T: DenseOperator,
                             solver: Optional[L1RepresentationSolver] = None, tol: float = DEFAULT_TOLERANCE,
                             budget: int = 10 ** 6, threads: Optional[int] = None,
                             certified: bool = False) -> EmbeddingFactorization:
    """Solve T = A J row by row with minimal l_1 rows of A."""
    J = _certified_embedding(embedding, budget, tol, certified)
    require_compatible(J.domain, T.domain)
    if not T.codomain.is_sup_type:
        raise HypothesisError(f"T must map into a sup-normed space, got {T.codomain}")
    solver = solver or HighsSolver(tol)
    rows = parallel_map(lambda j: solver.solve(J.matrix, T.matrix[j], j), range(T.matrix.shape[0]), threads)
    A = DenseOperator(np.array(rows), J.codomain, T.codomain)
    error = float(np.abs(T.matrix - A.matrix @ J.matrix).max())
    A_norm, T_norm = quick_norm(A).upper, quick_norm(T).upper
    if error > tol:
        raise HypothesisError(f"T = AJ reconstructed only up to {error:.3g}")
    if A_norm > T_norm * (1.0 + NORM_SLACK):
        raise HypothesisError(f"||A|| = {A_norm:.12g} exceeds ||T|| = {T_norm:.12g}",
                              hint="J must satisfy ||x|| <= ||Jx|| <= ||x||")
    return EmbeddingFactorization(A, A_norm, T_norm, error)


@dataclass(frozen=True, eq=False)
class LargeIdealFactorization:
    A: DenseOperator
    L: DenseOperator
    A_norm: float
    T_norm: float
    max_error: float


def _diagonal_blocks(T: DenseOperator) -> List[DenseOperator]:
    if len(T.domain.blocks) != len(T.codomain.blocks):
        raise StructuralError("block-diagonal operator needs as many domain as codomain blocks")
    mask = np.ones(T.matrix.shape, dtype=bool)
    blocks = []
    for index, ((inner, dim), (outer_inner, rows)) in enumerate(zip(T.domain.blocks, T.codomain.blocks)):
        r, c = T.codomain.block_slice(index), T.domain.block_slice(index)
        mask[r, c] = False
        blocks.append(DenseOperator(T.matrix[r, c], BlockSpace.single(inner, dim),
                                    BlockSpace.single(outer_inner, rows)))
    if np.any(T.matrix[mask] != 0):
        raise StructuralError("operator is not block diagonal")
    return blocks


def factor_through_L(T: DenseOperator, L: Optional[Sequence[NetEmbedding]] = None,
                     solver: Optional[L1RepresentationSolver] = None, tol: float = DEFAULT_TOLERANCE,
                     threads: Optional[int] = None) -> LargeIdealFactorization:
    blocks = _diagonal_blocks(T)
    if L is None:
        L = [build_net_embedding(block.domain.blocks[0][0], block.domain.total_dim, 2.0) for block in blocks]
    if len(L) != len(blocks):
        raise StructuralError(f"{len(L)} embeddings for {len(blocks)} blocks")
    pieces = [factor_through_embedding(net, block, solver, tol, threads=threads) for net, block in zip(L, blocks)]
    A = block_diag([piece.A for piece in pieces], C0, T.codomain.outer)
    L_op = block_diag([net.operator for net in L], T.domain.outer, C0)
    error = float(np.abs(T.matrix - A.matrix @ L_op.matrix).max())
    return LargeIdealFactorization(A, L_op, quick_norm(A).upper, quick_norm(T).upper, error)


@dataclass(frozen=True, eq=False)
class Witness:
    """E_n given by the columns of ``embedding`` (the map J_n: l_2^d -> domain of T)."""
    embedding: np.ndarray
    epsilon: float
    block: int

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]


@dataclass(frozen=True, eq=False)
class WitnessedFactorization:
    A: DenseOperator
    B: DenseOperator
    K: DenseOperator
    A_norms: Tuple[float, ...]
    B_norm: float
    T_norm: float
    uniform_bound: float
    max_error: float

    @property
    def within_bound(self) -> bool:
        return max(self.A_norms) <= self.uniform_bound + DEFAULT_TOLERANCE


def factor_K_through_witnessed_T(T: DenseOperator, witnesses: Sequence[Witness],
                                 K: Optional[Sequence[NetEmbedding]] = None,
                                 solver: Optional[L1RepresentationSolver] = None,
                                 tol: float = DEFAULT_TOLERANCE, budget: int = 10 ** 6) -> WitnessedFactorization:
    if not witnesses:
        raise HypothesisError("at least one witness is needed")
    targets = [w.block for w in witnesses]
    if len(set(targets)) != len(targets):
        raise HypothesisError(f"witnesses must use distinct codomain blocks, got {targets}")
    if K is None:
        K = [build_net_embedding(TWO, w.dim, 2.0) for w in witnesses]
    if len(K) != len(witnesses):
        raise StructuralError(f"{len(K)} embeddings for {len(witnesses)} witnesses")

    factors = []
    for index, (w, net) in enumerate(zip(witnesses, K)):
        if not 1 <= w.block <= len(T.codomain.blocks) or not T.codomain.blocks[w.block - 1][0].is_sup:
            raise HypothesisError(f"witness {index}: block {w.block} is not a sup-normed block of the codomain")
        if w.epsilon <= 0:
            raise HypothesisError(f"witness {index}: epsilon must be positive")
        rows = T.codomain.block_slice(w.block - 1)
        image = T.matrix @ w.embedding
        outside = np.delete(image, np.arange(rows.start, rows.stop), axis=0)
        if outside.size and np.abs(outside).max() > tol * max(1.0, float(np.abs(image).max())):
            raise HypothesisError(f"witness {index}: T does not map E_n into block {w.block}")
        J_n = DenseOperator(w.embedding, l2(w.dim), T.domain)
        if quick_norm(J_n).upper > 2.0 / w.epsilon + tol:
            raise HypothesisError(f"witness {index}: ||J_n|| exceeds 2/epsilon")
        restricted = DenseOperator(image[rows], l2(w.dim), linf(rows.stop - rows.start))
        modulus = injectivity_modulus(restricted, budget, tol)
        if modulus < 1.0 - tol:
            raise HypothesisError(f"witness {index}: ||T J_n x|| >= ||x|| fails, modulus {modulus:.12g}")
        factors.append(factor_through_embedding(restricted, net.operator, solver, tol, certified=True))

    heights = [net.rows for net in K]
    small = BlockSpace.uniform(INF, heights, C0)
    A = np.zeros((small.total_dim, T.codomain.total_dim))
    for index, (w, factor) in enumerate(zip(witnesses, factors)):
        A[small.block_slice(index), T.codomain.block_slice(w.block - 1)] = factor.A.matrix
    A_op = DenseOperator(A, T.codomain, small)
    B_op = DenseOperator(np.hstack([w.embedding for w in witnesses]),
                         BlockSpace.uniform(TWO, [w.dim for w in witnesses], T.domain.outer), T.domain)
    K_op = block_diag([net.operator for net in K], B_op.domain.outer, C0)
    error = float(np.abs(K_op.matrix - A @ T.matrix @ B_op.matrix).max())
    t_norm = quick_norm(T).upper
    worst = max(max(net.distortion for net in K), 2.0)
    return WitnessedFactorization(
        A=A_op,
        B=B_op,
        K=K_op,
        A_norms=tuple(f.A_norm for f in factors),
        B_norm=quick_norm(B_op).upper,
        T_norm=t_norm,
        uniform_bound=worst * t_norm / min(w.epsilon for w in witnesses),
        max_error=error,
    )

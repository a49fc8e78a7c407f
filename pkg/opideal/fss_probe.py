"""Finite strict singularity probes.

Profiles here are heuristic: the minimum found over a sampled subspace is an
upper bound for the true minimum on that subspace.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linprog, minimize

from .constructions import ParamSchedule, build_T_n
from .error import HypothesisError, StructuralError
from .factorization import factor_through_formal_identity
from .opnorm import DEFAULT_TOLERANCE, quick_norm
from .parallel import child_seeds, parallel_map
from .rip import RipFamily
from .spaces import block_diag, identity, norm_of
from .types import C0, TWO, BlockSpace, CorollaryRecord, DenseOperator, FssPoint, FssProfile, l_space, l2

__all__ = [
    'MilmanResult', 'TIE_TOLERANCE', 'MILMAN_BUDGET',
    'milman_vector', 'tied_count', 'fss_profile', 'corollary_level', 'corollary_witness', 'l1_to_lq_profile',
]

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9
MILMAN_BUDGET = 10 ** 6
LP_ATTEMPTS = 64


@dataclass(frozen=True, eq=False)
class MilmanResult:
    vector: Optional[np.ndarray]
    tied: int
    found: bool
    mode: str

    def __bool__(self):
        return self.found


def tied_count(y: np.ndarray, tol: float = TIE_TOLERANCE) -> int:
    y = np.abs(np.asarray(y, dtype=float))
    if not np.any(y):
        return 0
    return int(np.count_nonzero(y >= y.max() - tol))


def _exhaustive_milman(Q: np.ndarray, tol: float) -> Optional[np.ndarray]:
    K, d = Q.shape
    shifts = np.arange(d - 1)[:, None]
    codes = np.arange(2 ** (d - 1))
    signs = np.vstack([np.ones((1, len(codes))), 1.0 - 2.0 * ((codes[None, :] >> shifts) & 1)])
    for support in itertools.combinations(range(K), d):
        block = Q[list(support)]
        if np.linalg.cond(block) > 1e12:
            continue
        candidates = Q @ np.linalg.solve(block, signs)
        feasible = np.flatnonzero(np.abs(candidates).max(axis=0) <= 1.0 + tol)
        if len(feasible):
            return candidates[:, feasible[0]]
    return None


def _vertex_milman(Q: np.ndarray, seed, tol: float, attempts: int) -> Optional[np.ndarray]:
    """Maximize random objectives over {c : |Qc| <= 1}; simplex optima sit on vertices."""
    K, d = Q.shape
    rng = np.random.default_rng(seed)
    constraints = np.vstack([Q, -Q])
    for _ in range(attempts):
        result = linprog(-rng.standard_normal(d), A_ub=constraints, b_ub=np.ones(2 * K),
                         bounds=(None, None), method="highs-ds")
        if result.status != 0:
            continue
        y = Q @ result.x
        if tied_count(y, tol) >= d:
            return y
    return None


def milman_vector(Q, budget: int = MILMAN_BUDGET, seed: int = 0, tol: float = TIE_TOLERANCE,
                  attempts: int = LP_ATTEMPTS) -> MilmanResult:
    """Nonzero y in the column span of ``Q`` with at least d coordinates of largest magnitude."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] > Q.shape[0]:
        raise StructuralError(f"need a K x d basis with d <= K, got shape {Q.shape}")
    K, d = Q.shape
    if np.linalg.matrix_rank(Q) < d:
        raise StructuralError("basis columns are linearly dependent")
    if math.comb(K, d) * 2 ** d <= budget:
        y = _exhaustive_milman(Q, tol)
        mode = "exhaustive"
    else:
        logger.info("C(%d, %d) supports exceed budget %d, searching vertices by LP", K, d, budget)
        y = _vertex_milman(Q, seed, tol, attempts)
        mode = "vertex-lp"
    if y is None:
        return MilmanResult(None, 0, False, mode)
    return MilmanResult(y, tied_count(y, tol), True, mode)


def _ratio(T: DenseOperator, basis: np.ndarray):
    def ratio(c: np.ndarray) -> float:
        x = basis @ c
        size = norm_of(T.domain, x)
        if size == 0:
            return math.inf
        return norm_of(T.codomain, T.matrix @ x) / size
    return ratio


def _subspace_minimum(T: DenseOperator, basis: np.ndarray) -> Tuple[float, str]:
    image = T.matrix @ basis
    _, sigma, right = np.linalg.svd(image, full_matrices=True)
    start = right[-1]
    ratio = _ratio(T, basis)
    flat = (T.domain.flat_exponent() or C0).value == 2 and (T.codomain.flat_exponent() or C0).value == 2
    if flat:
        # orthonormal basis: the ratio is the smallest singular value
        return (float(sigma[-1]) if len(sigma) == basis.shape[1] else 0.0), "svd"
    best = ratio(start)
    if basis.shape[1] > 1 and best > 0:
        result = minimize(ratio, start, method="Nelder-Mead",
                          options={"maxiter": 200 * basis.shape[1], "xatol": 1e-8, "fatol": 1e-10})
        best = min(best, float(result.fun))
    return best, "svd+nelder-mead"


def _aligned_bases(domain: BlockSpace, d: int) -> List[np.ndarray]:
    bases = []
    for index, dim in enumerate(domain.dims):
        if dim >= d:
            basis = np.zeros((domain.total_dim, d))
            start = domain.offsets[index]
            basis[start:start + d] = np.eye(d)
            bases.append(basis)
    return bases


def fss_profile(T: DenseOperator, dims: Iterable[int], trials: int, seed: int = 0,
                threads: Optional[int] = None) -> FssProfile:
    dims = sorted(set(int(d) for d in dims))
    n = T.domain.total_dim
    if not dims or dims[0] < 1 or dims[-1] > n:
        raise StructuralError(f"subspace dimensions must lie in 1..{n}, got {dims}")
    if trials < 1:
        raise ValueError("at least one trial per dimension is needed")
    jobs = [(d, child) for d, group in zip(dims, child_seeds(seed, len(dims)))
            for child in group.spawn(trials)]

    def trial(job):
        d, child = job
        gaussian = np.random.default_rng(child).standard_normal((n, d))
        basis, _ = np.linalg.qr(gaussian)
        return _subspace_minimum(T, basis)

    results = parallel_map(trial, jobs, threads)
    points = []
    envelope = math.inf
    for position, d in enumerate(dims):
        found = results[position * trials:(position + 1) * trials]
        values = [value for value, _ in found]
        values.extend(_subspace_minimum(T, basis)[0] for basis in _aligned_bases(T.domain, d))
        estimate = min(values)
        envelope = min(envelope, estimate)
        points.append(FssPoint(d=d, estimate=estimate, envelope=envelope, best_subspace=max(values),
                               trials=len(values), method=found[0][1]))
    return FssProfile(points=points)


def corollary_level(epsilon: float, q: float) -> int:
    """Smallest m with 1/m + 2 m^(-1/q) < epsilon/2."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if q < 1 or math.isinf(q):
        raise ValueError("q must be finite and at least 1")

    def ok(m: int) -> bool:
        return 1.0 / m + 2.0 * m ** (-1.0 / q) < epsilon / 2

    high = 1
    while not ok(high):
        high *= 2
    low = high // 2
    while high - low > 1:
        middle = (low + high) // 2
        if ok(middle):
            high = middle
        else:
            low = middle
    return high


def corollary_witness(schedule: ParamSchedule, family: RipFamily, mask: Iterable[int], m: int,
                      seed: int = 0, B: Optional[DenseOperator] = None,
                      tol: float = DEFAULT_TOLERANCE, milman_budget: int = MILMAN_BUDGET) -> CorollaryRecord:
    """Find x with ||D B x|| <= (1/m + 2 m^(-1/q)) ||x|| along the factorization.

    Either x lies in the kernel of P, or P x is a vector of the image of P with
    at least m coordinates of largest magnitude.
    """
    mask = sorted(set(mask))
    q = max(2.0, schedule.p.value)
    levels = [n for n in mask if n > m]
    bound_factor = 1.0 / m + 2.0 * m ** (-1.0 / q)
    u_m = schedule.u(m)
    if not levels:
        return CorollaryRecord(m=m, q=q, witness_norm=1.0, image_norm=0.0, bound=bound_factor,
                               bound_holds=True, via_kernel=True, certified=True, tied=0)
    target = BlockSpace.uniform(TWO, [schedule.u(n) for n in levels], schedule.p)
    if B is None:
        rng = np.random.default_rng(seed)
        B = DenseOperator(rng.standard_normal((target.total_dim, u_m)), l2(u_m), target)
        B = B.scaled(1.0 / quick_norm(B).upper)
    factorization = factor_through_formal_identity(B, schedule, family, m, levels, tol)
    D = block_diag([build_T_n(family, n) for n in levels], schedule.p, C0)

    tied = 0
    found = True
    if factorization.P is None:
        kernel = np.eye(u_m)[:, :1]
    else:
        kernel = scipy.linalg.null_space(factorization.P.matrix)
    if kernel.shape[1]:
        x = kernel[:, 0]
        via_kernel = True
    else:
        via_kernel = False
        result = milman_vector(factorization.P.matrix, milman_budget, seed=seed)
        found = result.found
        if not found:
            raise HypothesisError("no Milman vector found in the image of P", hint="raise the search budget")
        tied = result.tied
        x, *_ = np.linalg.lstsq(factorization.P.matrix, result.vector, rcond=None)

    witness_norm = float(np.linalg.norm(x))
    image_norm = norm_of(D.codomain, D.matrix @ (B.matrix @ x))
    certified = (found
                 and factorization.residual_norm <= 1.0 / m + tol
                 and factorization.P_norm.upper <= 2.0 + tol
                 and factorization.R_norm.upper <= 1.0 + tol
                 and (via_kernel or tied >= m))
    return CorollaryRecord(
        m=m,
        q=q,
        witness_norm=witness_norm,
        image_norm=image_norm,
        bound=bound_factor * witness_norm,
        bound_holds=image_norm <= bound_factor * witness_norm + tol,
        via_kernel=via_kernel,
        certified=certified,
        tied=tied,
    )


def l1_to_lq_profile(n: int, q, dims: Sequence[int], trials: int, seed: int = 0,
                     threads: Optional[int] = None) -> FssProfile:
    """Profile of the formal identity l_1^n -> l_q^n."""
    T = identity(l_space(1, n), l_space(q, n))
    return fss_profile(T, dims, trials, seed, threads)

"""Operator norms between block spaces.

Closed forms are used whenever the pair of spaces admits one; everything else
gets a certified upper bound from the spectral norm and the comparison
constants of the two norms, plus a heuristic lower bound from alternating
ascent.
"""
import itertools
import logging
import math
from enum import Enum
from typing import Optional

import numpy as np

from .error import HypothesisError
from .spaces import conjugate_space, norm_of, norming_functional, norming_vector, norms_of
from .types import BlockSpace, DenseOperator, NormBound, NormMode

__all__ = [
    'NormRequest', 'SIGN_CAP', 'DEFAULT_RESTARTS', 'DEFAULT_TOLERANCE',
    'op_norm', 'exact_norm', 'quick_norm', 'bounded_norm', 'ascent_lower_bound', 'l2_comparison', 'injectivity_modulus',
]

logger = logging.getLogger(__name__)

SIGN_CAP = 20
DEFAULT_RESTARTS = 64
DEFAULT_TOLERANCE = 1e-9
ASCENT_STEPS = 500
_SIGN_CHUNK = 1 << 14


class NormRequest(Enum):
    AUTO = "auto"
    EXACT = "exact"
    BOUNDED = "bounded"


def op_norm(op: DenseOperator,
            mode: NormRequest = NormRequest.AUTO,
            budget: int = DEFAULT_RESTARTS,
            sign_cap: int = SIGN_CAP,
            seed: int = 0) -> NormBound:
    if budget <= 0:
        raise ValueError("op_norm budget must be positive")
    if mode is not NormRequest.BOUNDED:
        exact = exact_norm(op, sign_cap)
        if exact is not None:
            return exact
        if mode is NormRequest.EXACT:
            logger.warning("no exact norm for %s -> %s, falling back to bounds", op.domain, op.codomain)
    return bounded_norm(op, budget, seed)


def _exact(value: float, mode: NormMode) -> NormBound:
    return NormBound(value, value, mode)


def exact_norm(op: DenseOperator, sign_cap: int = SIGN_CAP) -> Optional[NormBound]:
    domain, codomain = op.domain, op.codomain
    dom_flat = domain.flat_exponent()
    cod_flat = codomain.flat_exponent()

    if dom_flat is not None and dom_flat.value == 1:
        # extreme points of the l_1 ball are the signed basis vectors
        return _exact(float(norms_of(codomain, op.matrix).max()), NormMode.EXACT)
    if domain.outer.value == 1 and len(domain.blocks) > 1:
        parts = []
        for index, (inner, dim) in enumerate(domain.blocks):
            piece = DenseOperator(op.matrix[:, domain.block_slice(index)], BlockSpace.single(inner, dim), codomain)
            bound = exact_norm(piece, sign_cap)
            if bound is None:
                break
            parts.append(bound.upper)
        else:
            return _exact(max(parts), NormMode.EXACT)
    if codomain.is_sup_type:
        rows = norms_of(conjugate_space(domain), op.matrix.T)
        return _exact(float(rows.max()), NormMode.EXACT)
    if dom_flat is not None and cod_flat is not None and dom_flat.value == 2 and cod_flat.value == 2:
        return _exact(float(np.linalg.norm(op.matrix, 2)), NormMode.SPECTRAL)
    if domain.is_sup_type and domain.total_dim <= sign_cap:
        return _exact(_sign_enumeration(op.matrix, codomain), NormMode.SIGN_ENUMERATION)
    if cod_flat is not None and cod_flat.value == 1 and codomain.total_dim <= sign_cap:
        # through the adjoint, whose domain is sup-type
        return _exact(_sign_enumeration(op.matrix.T, conjugate_space(domain)), NormMode.SIGN_ENUMERATION)
    return None


def _sign_enumeration(matrix: np.ndarray, codomain: BlockSpace) -> float:
    dim = matrix.shape[1]
    count = 2 ** (dim - 1)
    shifts = np.arange(dim - 1)[:, None]
    best = 0.0
    for start in range(0, count, _SIGN_CHUNK):
        codes = np.arange(start, min(start + _SIGN_CHUNK, count))
        bits = (codes[None, :] >> shifts) & 1
        signs = np.vstack([np.ones((1, len(codes))), 1.0 - 2.0 * bits])
        best = max(best, float(norms_of(codomain, matrix @ signs).max()))
    return best


def l2_comparison(space: BlockSpace):
    """Constants (a, b) with ||y|| <= a ||y||_2 and ||y||_2 <= b ||y|| on ``space``."""
    up, down = 1.0, 1.0
    for inner, dim in space.blocks:
        up = max(up, dim ** max(0.0, inner.reciprocal - 0.5))
        down = max(down, dim ** max(0.0, 0.5 - inner.reciprocal))
    count = len(space.blocks)
    if count > 1:
        up *= count ** max(0.0, space.outer.reciprocal - 0.5)
        down *= count ** max(0.0, 0.5 - space.outer.reciprocal)
    return up, down


def ascent_lower_bound(op: DenseOperator, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                       steps: int = ASCENT_STEPS) -> float:
    """Alternate a norming functional on the codomain with a norming vector on the domain."""
    matrix = op.matrix
    # every basis vector has norm one in a block space
    best = float(norms_of(op.codomain, matrix).max())
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        x = rng.standard_normal(op.domain.total_dim)
        x /= norm_of(op.domain, x)
        value = norm_of(op.codomain, matrix @ x)
        for _ in range(steps):
            f = norming_functional(op.codomain, matrix @ x)
            z = matrix.T @ f
            if not np.any(z):
                break
            candidate = norming_vector(op.domain, z)
            improved = norm_of(op.codomain, matrix @ candidate)
            if improved <= value + 1e-15 * max(value, 1.0):
                value = max(value, improved)
                break
            x, value = candidate, improved
        best = max(best, value)
    return best


def _spectral_upper(op: DenseOperator) -> float:
    up, _ = l2_comparison(op.codomain)
    _, down = l2_comparison(op.domain)
    return float(np.linalg.norm(op.matrix, 2)) * up * down


def quick_norm(op: DenseOperator, sign_cap: int = SIGN_CAP) -> NormBound:
    """Exact when a closed form exists, otherwise the spectral upper bound without ascent."""
    exact = exact_norm(op, sign_cap)
    if exact is not None:
        return exact
    upper = _spectral_upper(op)
    lower = float(norms_of(op.codomain, op.matrix).max())
    return NormBound(lower, max(upper, lower), NormMode.CERTIFIED_UPPER)


def bounded_norm(op: DenseOperator, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> NormBound:
    upper = _spectral_upper(op)
    lower = ascent_lower_bound(op, restarts, seed)
    return NormBound(lower, max(upper, lower), NormMode.CERTIFIED_UPPER)


def injectivity_modulus(op: DenseOperator, budget: int = 10 ** 6, tol: float = DEFAULT_TOLERANCE) -> float:
    """Exact min of ||Tx|| over the unit sphere of the domain, for sup-type codomains.

    The maximum of the domain norm over the polytope ``{x : |Tx| <= 1}`` sits at a
    vertex, and vertices are cut out by ``dim`` active rows.
    """
    if not op.codomain.is_sup_type:
        raise HypothesisError(f"injectivity modulus needs a sup-type codomain, got {op.codomain}")
    rows, dim = op.matrix.shape
    if np.linalg.matrix_rank(op.matrix) < dim:
        return 0.0
    cost = math.comb(rows, dim) * 2 ** (dim - 1)
    if cost > budget:
        raise HypothesisError("vertex enumeration exceeds budget", hint=f"{cost} systems")
    shifts = np.arange(dim - 1)[:, None]
    codes = np.arange(2 ** (dim - 1))
    signs = np.vstack([np.ones((1, len(codes))), 1.0 - 2.0 * ((codes[None, :] >> shifts) & 1)])
    largest = 0.0
    for support in itertools.combinations(range(rows), dim):
        block = op.matrix[list(support)]
        if np.linalg.cond(block) > 1e12:
            continue
        vertices = np.linalg.solve(block, signs)
        feasible = np.abs(op.matrix @ vertices).max(axis=0) <= 1.0 + tol
        if np.any(feasible):
            largest = max(largest, float(norms_of(op.domain, vertices[:, feasible]).max()))
    if largest == 0.0:
        return 0.0
    return 1.0 / largest

from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .error import DualityError, SpaceMismatchError, StructuralError
from .types import BlockSpace, DenseOperator, ExponentKind, ExtExponent, SpaceVector

__all__ = [
    'block_norms', 'norm_of', 'norms_of', 'vector_norm', 'dual_space', 'conjugate_space', 'compatible', 'require_compatible',
    'pairing', 'adjoint', 'compose', 'block_diag', 'mask_blocks', 'identity', 'zero_operator',
    'norming_functional', 'norming_vector',
]

ArrayLike = Union[np.ndarray, Sequence[float]]


def _ord(r: ExtExponent) -> float:
    return np.inf if r.is_sup else r.value


def block_norms(space: BlockSpace, x: np.ndarray) -> np.ndarray:
    """Inner block norms of ``x``; a 2-d ``x`` is treated column by column."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != space.total_dim:
        raise StructuralError(f"coordinates of length {x.shape[0]} do not live in {space}")
    offsets = space.offsets
    rows = [
        np.linalg.norm(x[offsets[i]:offsets[i + 1]], ord=_ord(inner), axis=0)
        for i, (inner, _) in enumerate(space.blocks)
    ]
    return np.array(rows)


def norms_of(space: BlockSpace, x: np.ndarray) -> np.ndarray:
    """Norms of the columns of ``x`` in ``space``."""
    return np.linalg.norm(block_norms(space, x), ord=_ord(space.outer), axis=0)


def norm_of(space: BlockSpace, x: ArrayLike) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise StructuralError("norm_of expects a vector")
    return float(norms_of(space, x))


def vector_norm(v: SpaceVector) -> float:
    return norm_of(v.space, v.coords)


def conjugate_space(space: BlockSpace) -> BlockSpace:
    """Blockwise conjugation without the bidual refusal of ``dual_space``."""
    blocks = tuple((inner.conjugate(), dim) for inner, dim in space.blocks)
    if len(space.blocks) == 1:
        return BlockSpace(blocks, blocks[0][0])
    return BlockSpace(blocks, space.outer.conjugate())


def dual_space(space: BlockSpace) -> BlockSpace:
    if (space.outer.kind is ExponentKind.INF and len(space.blocks) > 1
            and all(inner.value == 1 for inner, _ in space.blocks)):
        raise DualityError(f"dual of {space} would need bidual bookkeeping")
    return conjugate_space(space)


def compatible(a: BlockSpace, b: BlockSpace) -> bool:
    """Same block structure and norms, ignoring the c0/inf tag."""
    if a.dims != b.dims:
        return False
    if not all(x.same_norm(y) for (x, _), (y, _) in zip(a.blocks, b.blocks)):
        return False
    return len(a.blocks) == 1 or a.outer.same_norm(b.outer)


def require_compatible(expected: BlockSpace, actual: BlockSpace):
    if not compatible(expected, actual):
        raise SpaceMismatchError(expected, actual)


def pairing(x: ArrayLike, f: ArrayLike) -> float:
    return float(np.dot(np.asarray(x, dtype=float), np.asarray(f, dtype=float)))


def adjoint(op: DenseOperator) -> DenseOperator:
    return DenseOperator(op.matrix.T.copy(), dual_space(op.codomain), dual_space(op.domain))


def compose(a: DenseOperator, b: DenseOperator) -> DenseOperator:
    """``a`` after ``b``."""
    require_compatible(a.domain, b.codomain)
    return DenseOperator(a.matrix @ b.matrix, b.domain, a.codomain)


def block_diag(ops: Sequence[DenseOperator],
               domain_outer: Optional[ExtExponent] = None,
               codomain_outer: Optional[ExtExponent] = None) -> DenseOperator:
    if not ops:
        raise StructuralError("block_diag needs at least one operator")
    domain_blocks = tuple(block for op in ops for block in op.domain.blocks)
    codomain_blocks = tuple(block for op in ops for block in op.codomain.blocks)
    domain = BlockSpace(domain_blocks, domain_outer or ops[0].domain.outer)
    codomain = BlockSpace(codomain_blocks, codomain_outer or ops[0].codomain.outer)
    matrix = scipy.linalg.block_diag(*[op.matrix for op in ops])
    return DenseOperator(matrix, domain, codomain)


def mask_blocks(op: DenseOperator, mask: Iterable[int]) -> DenseOperator:
    """Keep the diagonal blocks whose 1-based index is in ``mask``."""
    if len(op.domain.blocks) != len(op.codomain.blocks):
        raise StructuralError("mask_blocks needs aligned domain and codomain blocks")
    keep = set(mask)
    matrix = np.array(op.matrix)
    for index in range(len(op.domain.blocks)):
        if index + 1 not in keep:
            matrix[op.codomain.block_slice(index), op.domain.block_slice(index)] = 0.0
    return DenseOperator(matrix, op.domain, op.codomain)


def identity(domain: BlockSpace, codomain: Optional[BlockSpace] = None) -> DenseOperator:
    codomain = codomain or domain
    if codomain.total_dim != domain.total_dim:
        raise StructuralError("identity needs spaces of equal dimension")
    return DenseOperator(np.eye(domain.total_dim), domain, codomain)


def zero_operator(domain: BlockSpace, codomain: BlockSpace) -> DenseOperator:
    return DenseOperator(np.zeros((codomain.total_dim, domain.total_dim)), domain, codomain)


def _norming_flat(r: ExtExponent, y: np.ndarray) -> np.ndarray:
    f = np.zeros_like(y)
    if not np.any(y):
        return f
    if r.is_sup:
        k = int(np.argmax(np.abs(y)))
        f[k] = np.sign(y[k])
        return f
    if r.value == 1:
        return np.sign(y)
    p = r.value
    size = np.linalg.norm(y, ord=p)
    return np.sign(y) * (np.abs(y) / size) ** (p - 1)


def norming_functional(space: BlockSpace, y: ArrayLike) -> np.ndarray:
    """Unit functional in the dual of ``space`` attaining the norm of ``y``."""
    y = np.asarray(y, dtype=float)
    sizes = block_norms(space, y)
    weights = _norming_flat(space.outer, sizes) if len(space.blocks) > 1 else np.ones(1)
    f = np.zeros_like(y)
    for index, (inner, _) in enumerate(space.blocks):
        part = space.block_slice(index)
        if weights[index] != 0:
            f[part] = weights[index] * _norming_flat(inner, y[part])
    return f


def norming_vector(space: BlockSpace, z: ArrayLike) -> np.ndarray:
    """Unit vector of ``space`` on which the functional ``z`` attains its dual norm."""
    return norming_functional(conjugate_space(space), z)

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from opideal.error import StructuralError
from .exponents import ExtExponent, TWO, INF, ONE

__all__ = ['Block', 'BlockSpace', 'SpaceVector', 'DenseOperator', 'NormMode', 'NormBound', 'l_space']

Block = Tuple[ExtExponent, int]


@dataclass(frozen=True)
class BlockSpace:
    """Finite direct sum of l_r^d blocks aggregated by an outer norm."""
    blocks: Tuple[Block, ...]
    outer: ExtExponent

    def __post_init__(self):
        if not self.blocks:
            raise StructuralError("a block space needs at least one block")
        for inner, dim in self.blocks:
            if dim < 1:
                raise StructuralError(f"block dimension must be positive, got {dim}")

    @classmethod
    def single(cls, inner: ExtExponent, dim: int) -> 'BlockSpace':
        return cls(((inner, int(dim)),), inner)

    @classmethod
    def uniform(cls, inner: ExtExponent, dims: Iterable[int], outer: ExtExponent) -> 'BlockSpace':
        return cls(tuple((inner, int(d)) for d in dims), outer)

    @property
    def total_dim(self) -> int:
        return sum(dim for _, dim in self.blocks)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(dim for _, dim in self.blocks)

    @property
    def offsets(self) -> Tuple[int, ...]:
        offsets = [0]
        for _, dim in self.blocks:
            offsets.append(offsets[-1] + dim)
        return tuple(offsets)

    def block_slice(self, index: int) -> slice:
        """Slice of block ``index`` (0-based)."""
        offsets = self.offsets
        return slice(offsets[index], offsets[index + 1])

    def flat_exponent(self) -> Optional[ExtExponent]:
        """The r for which this space is isometrically l_r^{total_dim}, if any."""
        if len(self.blocks) == 1:
            return self.blocks[0][0]
        if all(dim == 1 for dim in self.dims):
            return self.outer
        if all(inner.same_norm(self.outer) for inner, _ in self.blocks):
            return self.outer
        return None

    @property
    def is_sup_type(self) -> bool:
        flat = self.flat_exponent()
        return flat is not None and flat.is_sup

    def __str__(self):
        inner = " + ".join(f"l_{r}^{d}" for r, d in self.blocks)
        if len(self.blocks) == 1:
            return inner
        return f"({inner})_{self.outer}"


def l_space(r, dim: int) -> BlockSpace:
    return BlockSpace.single(ExtExponent.parse(r), dim)


@dataclass(frozen=True, eq=False)
class SpaceVector:
    coords: np.ndarray
    space: BlockSpace

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.space.total_dim,):
            raise StructuralError(f"vector of shape {coords.shape} does not live in {self.space}")
        object.__setattr__(self, 'coords', coords)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    matrix: np.ndarray
    domain: BlockSpace
    codomain: BlockSpace

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise StructuralError("operator matrix must be two dimensional")
        expected = (self.codomain.total_dim, self.domain.total_dim)
        if matrix.shape != expected:
            raise StructuralError(f"matrix shape {matrix.shape} does not match spaces {expected}")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def apply(self, x: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def with_spaces(self, domain: Optional[BlockSpace] = None,
                    codomain: Optional[BlockSpace] = None) -> 'DenseOperator':
        return DenseOperator(self.matrix, domain or self.domain, codomain or self.codomain)

    def scaled(self, factor: float) -> 'DenseOperator':
        return DenseOperator(self.matrix * factor, self.domain, self.codomain)

    def __add__(self, other: 'DenseOperator') -> 'DenseOperator':
        if self.matrix.shape != other.matrix.shape:
            raise StructuralError("cannot add operators of different shapes")
        return DenseOperator(self.matrix + other.matrix, self.domain, self.codomain)

    def __sub__(self, other: 'DenseOperator') -> 'DenseOperator':
        return self + other.scaled(-1.0)


class NormMode(Enum):
    EXACT = "exact"
    CERTIFIED_UPPER = "certified_upper"
    HEURISTIC_LOWER = "heuristic_lower"
    SIGN_ENUMERATION = "sign_enumeration"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class NormBound:
    lower: float
    upper: float
    mode: NormMode

    def __post_init__(self):
        if self.lower < 0:
            raise ValueError("norm lower bound must be non-negative")
        if self.upper < self.lower:
            raise ValueError(f"norm upper bound {self.upper} below lower bound {self.lower}")

    @property
    def is_exact(self) -> bool:
        return self.mode in (NormMode.EXACT, NormMode.SIGN_ENUMERATION, NormMode.SPECTRAL)

    @property
    def value(self) -> float:
        return self.upper

    def dict(self):
        return {"lower": self.lower, "upper": self.upper, "mode": self.mode.value}


# Common flat spaces used in tests and constructions.
def l2(dim: int) -> BlockSpace:
    return BlockSpace.single(TWO, dim)


def linf(dim: int) -> BlockSpace:
    return BlockSpace.single(INF, dim)


def l1(dim: int) -> BlockSpace:
    return BlockSpace.single(ONE, dim)


__all__ += ['l2', 'linf', 'l1']

"""Gaussian column families and spectral certificates over column subsets."""
import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .error import StructuralError
from .parallel import child_seeds, parallel_map, resolve_threads
from .types import CertMode, RipCertificate

__all__ = [
    'DEFAULT_SUBSET_BUDGET', 'DEFAULT_SAMPLES', 'RipLevel', 'RipFamily', 'RipVerdict',
    'gen_gaussian_columns', 'gen_family', 'certify_almost_on', 'certify_besselian', 'verify_rip_def',
    'subset_extremes',
]

logger = logging.getLogger(__name__)

DEFAULT_SUBSET_BUDGET = 10 ** 7
DEFAULT_SAMPLES = 20000
NORM_TOLERANCE = 1e-12
_CHUNK = 1 << 13


@dataclass(frozen=True, eq=False)
class RipLevel:
    columns: np.ndarray
    gram: np.ndarray

    @classmethod
    def from_columns(cls, columns, normalize: bool = True) -> 'RipLevel':
        columns = np.array(columns, dtype=float)
        if columns.ndim != 2 or 0 in columns.shape:
            raise StructuralError(f"level needs a non-empty u x v matrix, got shape {columns.shape}")
        if normalize:
            norms = np.linalg.norm(columns, axis=0)
            if np.any(norms == 0):
                raise StructuralError("cannot normalize a zero column")
            columns = columns / norms
        gram = columns.T @ columns
        gram = (gram + gram.T) / 2
        columns.setflags(write=False)
        gram.setflags(write=False)
        return cls(columns, gram)

    @property
    def u(self) -> int:
        return self.columns.shape[0]

    @property
    def v(self) -> int:
        return self.columns.shape[1]

    def coherence(self) -> float:
        off = np.abs(self.gram - np.diag(np.diag(self.gram)))
        return float(off.max()) if self.v > 1 else 0.0


@dataclass(frozen=True, eq=False)
class RipFamily:
    levels: Tuple[RipLevel, ...]
    seed: Optional[int] = None

    @classmethod
    def from_columns(cls, matrices: Sequence, normalize: bool = True) -> 'RipFamily':
        return cls(tuple(RipLevel.from_columns(m, normalize) for m in matrices))

    def level(self, n: int) -> RipLevel:
        if not 1 <= n <= len(self.levels):
            raise StructuralError(f"family has levels 1..{len(self.levels)}, asked for {n}")
        return self.levels[n - 1]

    @property
    def shape(self) -> List[Tuple[int, int]]:
        return [(level.u, level.v) for level in self.levels]


def gen_gaussian_columns(u: int, v: int, seed, orthonormalize: bool = False) -> RipLevel:
    if u < 1 or v < 1:
        raise StructuralError(f"level dimensions must be positive, got u={u}, v={v}")
    rng = np.random.default_rng(seed)
    columns = rng.standard_normal((u, v))
    if orthonormalize:
        if v > u:
            raise StructuralError(f"cannot orthonormalize {v} columns in dimension {u}")
        columns, _ = np.linalg.qr(columns)
    return RipLevel.from_columns(columns)


def gen_family(shape: Sequence[Tuple[int, int]], seed: int, orthonormalize: bool = False) -> RipFamily:
    seeds = child_seeds(seed, len(shape))
    levels = tuple(gen_gaussian_columns(u, v, s, orthonormalize) for (u, v), s in zip(shape, seeds))
    logger.debug("generated family %s with seed %s", list(shape), seed)
    return RipFamily(levels, seed)


@dataclass(frozen=True)
class _Extremes:
    lambda_min: float
    argmin: Tuple[int, ...]
    lambda_max: float
    argmax: Tuple[int, ...]
    count: int

    def merge(self, other: '_Extremes') -> '_Extremes':
        low = self if self.lambda_min <= other.lambda_min else other
        high = self if self.lambda_max >= other.lambda_max else other
        return _Extremes(low.lambda_min, low.argmin, high.lambda_max, high.argmax, self.count + other.count)


def _chunk_extremes(gram: np.ndarray, subsets: np.ndarray) -> _Extremes:
    blocks = gram[subsets[:, :, None], subsets[:, None, :]]
    eig = np.linalg.eigvalsh(blocks)
    low, high = eig[:, 0], eig[:, -1]
    i, j = int(np.argmin(low)), int(np.argmax(high))
    return _Extremes(float(low[i]), tuple(int(k) for k in subsets[i]),
                     float(high[j]), tuple(int(k) for k in subsets[j]), len(subsets))


def _combination_chunks(v: int, order: int) -> Iterator[np.ndarray]:
    it = itertools.combinations(range(v), order)
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _reduce(gram: np.ndarray, chunks: Iterator, threads: int, work) -> _Extremes:
    result = None
    wave: list = []
    for chunk in chunks:
        wave.append(chunk)
        if len(wave) == threads * 4:
            for part in parallel_map(lambda c: work(gram, c), wave, threads):
                result = part if result is None else result.merge(part)
            wave = []
    if wave:
        for part in parallel_map(lambda c: work(gram, c), wave, threads):
            result = part if result is None else result.merge(part)
    return result


def _sampled_chunk(gram: np.ndarray, job) -> _Extremes:
    seed, count, order = job
    rng = np.random.default_rng(seed)
    subsets = np.sort(rng.random((count, gram.shape[0])).argsort(axis=1)[:, :order], axis=1)
    return _chunk_extremes(gram, subsets)


def subset_extremes(gram: np.ndarray, order: int, budget: int = DEFAULT_SUBSET_BUDGET,
                    samples: int = DEFAULT_SAMPLES, seed: int = 0, threads: Optional[int] = None,
                    mode: Optional[CertMode] = None) -> Tuple[_Extremes, CertMode]:
    """Extreme eigenvalues over all principal submatrices of size ``order``."""
    v = gram.shape[0]
    if not 1 <= order <= v:
        raise StructuralError(f"order {order} outside 1..{v}")
    threads = resolve_threads(threads)
    total = math.comb(v, order)
    if mode is not CertMode.SAMPLED and total <= budget:
        return _reduce(gram, _combination_chunks(v, order), threads, _chunk_extremes), CertMode.EXHAUSTIVE
    if mode is not CertMode.SAMPLED:
        logger.warning("C(%d, %d) = %d subsets exceed budget %d, sampling instead", v, order, total, budget)
    samples = max(samples, 1)
    counts = [min(_CHUNK, samples - start) for start in range(0, samples, _CHUNK)]
    jobs = [(s, c, order) for s, c in zip(child_seeds(seed, len(counts)), counts)]
    return _reduce(gram, iter(jobs), threads, _sampled_chunk), CertMode.SAMPLED


def _certify(family: RipFamily, level: int, order: int, besselian_only: bool, mode: Optional[CertMode],
             budget: int, samples: int, seed: int, threads: Optional[int]) -> RipCertificate:
    started = time.perf_counter()
    gram = family.level(level).gram
    extremes, used = subset_extremes(gram, order, budget, samples, seed, threads, mode)
    elapsed = (time.perf_counter() - started) * 1000.0
    # interlacing pins the extremes around the trace average of 1
    return RipCertificate(
        level=level,
        order=order,
        lambda_min=min(extremes.lambda_min, 1.0),
        lambda_max=max(extremes.lambda_max, 1.0),
        mode=used,
        samples=extremes.count,
        elapsed_ms=elapsed,
        besselian_only=besselian_only,
    )


def certify_almost_on(family: RipFamily, level: int, order: int, mode: Optional[CertMode] = None,
                      budget: int = DEFAULT_SUBSET_BUDGET, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                      threads: Optional[int] = None) -> RipCertificate:
    return _certify(family, level, order, False, mode, budget, samples, seed, threads)


def certify_besselian(family: RipFamily, level: int, order: int, mode: Optional[CertMode] = None,
                      budget: int = DEFAULT_SUBSET_BUDGET, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                      threads: Optional[int] = None) -> RipCertificate:
    return _certify(family, level, order, True, mode, budget, samples, seed, threads)


@dataclass(frozen=True, eq=False)
class RipVerdict:
    holds: bool
    sigma_min: float
    sigma_max: float
    mode: CertMode
    samples: int
    witness_support: Optional[Tuple[int, ...]] = None
    witness_coefficients: Optional[np.ndarray] = None

    def __bool__(self):
        return self.holds


def verify_rip_def(matrix, k: int, delta: float, budget: int = DEFAULT_SUBSET_BUDGET,
                   samples: int = DEFAULT_SAMPLES, seed: int = 0, threads: Optional[int] = None,
                   tol: float = NORM_TOLERANCE) -> RipVerdict:
    """Decide (1-delta)|x| <= |Ax| <= (1+delta)|x| on k-sparse x; witness indices are 0-based."""
    matrix = np.asarray(matrix, dtype=float)
    if not 1 <= k <= matrix.shape[1]:
        raise StructuralError(f"sparsity {k} outside 1..{matrix.shape[1]}")
    gram = matrix.T @ matrix
    gram = (gram + gram.T) / 2
    extremes, mode = subset_extremes(gram, k, budget, samples, seed, threads)
    sigma_min = math.sqrt(max(extremes.lambda_min, 0.0))
    sigma_max = math.sqrt(max(extremes.lambda_max, 0.0))
    low_ok = sigma_min >= 1.0 - delta - tol
    high_ok = sigma_max <= 1.0 + delta + tol
    if low_ok and high_ok:
        return RipVerdict(True, sigma_min, sigma_max, mode, extremes.count)
    support = extremes.argmin if not low_ok else extremes.argmax
    _, vectors = np.linalg.eigh(gram[np.ix_(support, support)])
    coefficients = vectors[:, 0] if not low_ok else vectors[:, -1]
    return RipVerdict(False, sigma_min, sigma_max, mode, extremes.count, support, coefficients)

from abc import ABC, abstractmethod

import numpy as np

__all__ = ['L1RepresentationSolver']


class L1RepresentationSolver(ABC):
    """Finds c with sum_i c_i f_i = g minimizing sum |c_i|."""

    def __init__(self, tolerance: float = 1e-9):
        self.tolerance = tolerance

    @abstractmethod
    def solve(self, rows: np.ndarray, target: np.ndarray, index: int = 0) -> np.ndarray:
        """``rows`` is m x d with the f_i as rows; returns the m coefficients."""
        raise NotImplementedError

import logging

import numpy as np
from scipy.optimize import linprog

from opideal.error import LPInfeasibleError
from .interface import L1RepresentationSolver

__all__ = ['HighsSolver']

logger = logging.getLogger(__name__)


class HighsSolver(L1RepresentationSolver):
    """Split c = a - b with a, b >= 0 and run the HiGHS dual simplex."""

    def solve(self, rows: np.ndarray, target: np.ndarray, index: int = 0) -> np.ndarray:
        count = rows.shape[0]
        if not np.any(target):
            return np.zeros(count)
        constraints = np.hstack([rows.T, -rows.T])
        result = linprog(
            np.ones(2 * count),
            A_eq=constraints,
            b_eq=target,
            bounds=(0, None),
            method="highs-ds",
            options={
                "primal_feasibility_tolerance": min(self.tolerance, 1e-7),
                "dual_feasibility_tolerance": min(self.tolerance, 1e-7),
            },
        )
        if result.status != 0:
            raise LPInfeasibleError(index, result.message)
        coefficients = result.x[:count] - result.x[count:]
        return self._polish(rows, target, coefficients)

    @staticmethod
    def _polish(rows: np.ndarray, target: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
        """Re-solve the equality on the basic support to push the residual to rounding level."""
        support = np.abs(coefficients) > 1e-12
        if not np.any(support):
            return coefficients
        solved, *_ = np.linalg.lstsq(rows[support].T, target, rcond=None)
        polished = np.zeros_like(coefficients)
        polished[support] = solved
        before = np.abs(coefficients @ rows - target).max()
        after = np.abs(polished @ rows - target).max()
        if after < before:
            logger.debug("polished representation residual %.3g -> %.3g", before, after)
            return polished
        return coefficients

"""Preconditioned GMRES shared by the Newton and linear layer solvers.

Every coupled problem in the package has the same shape: spectral in x,
banded in the wall-normal direction.  Freezing the x-dependent coefficients at
their x-mean decouples the Fourier modes, which gives a block-diagonal
preconditioner made of small banded LU factorisations.  The remaining
mode coupling is weak (it scales with the wall-data amplitude), so GMRES
converges in a handful of iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to reach its tolerance."""


@dataclass
class ModeFactors:
    """Sparse LU factors, one per Fourier mode, of the frozen-coefficient operator."""

    factors: list

    @classmethod
    def build(cls, matrices: list[sp.spmatrix]) -> "ModeFactors":
        return cls([spla.splu(sp.csc_matrix(m)) for m in matrices])

    def solve(self, n: int, rhs: np.ndarray) -> np.ndarray:
        return self.factors[n].solve(rhs)


def gmres_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    precondition: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    rtol: float = 1e-11,
    atol: float = 0.0,
    restart: int = 60,
    maxiter: int = 20,
) -> tuple[np.ndarray, int]:
    """Right-preconditioned GMRES on a real vector space.

    Returns the solution and the number of inner iterations.  Raises
    :class:`SolverError` if the requested tolerance is not met.
    """
    n = rhs.size
    count = [0]

    def counted(v: np.ndarray) -> np.ndarray:
        count[0] += 1
        return apply(precondition(v))

    op = spla.LinearOperator((n, n), matvec=counted, dtype=float)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0
    z, info = spla.gmres(op, rhs, rtol=rtol, atol=atol, restart=restart, maxiter=maxiter)
    x = precondition(z)
    res = float(np.linalg.norm(apply(x) - rhs))
    if info != 0 and res > max(10 * rtol * bnorm, atol):
        raise SolverError(f"GMRES stalled: residual {res:.3e} vs rhs {bnorm:.3e} after {count[0]} products")
    return x, count[0]

"""Discrete Poincare constant of the equilibrium measure.

The best constant in Var_m(g) <= C_P * int |grad g|^2 m is the reciprocal of
the smallest non-zero generalised eigenvalue of (stiffness, mass), where
stiffness is the weighted graph Laplacian with face weights
mean(m) * cell_volume / h^2 and mass = diag(m * cell_volume).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericalFailure, ParameterError
from .functionals import dirichlet_energy
from .weights import Equilibrium


@dataclass(frozen=True)
class SpectralGapResult:
    lambda1: float
    C_P: float
    iterations: int
    residual: float
    eigenvector: np.ndarray = field(repr=False)

    CSV_COLUMNS = ("N", "L", "lambda1", "C_P", "residual")


def assemble_operators(eq: Equilibrium) -> tuple[sp.csr_matrix, sp.dia_matrix]:
    grid = eq.grid
    w = grid.face_mean(eq.m) * grid.cell_volume / grid.face_h**2
    l, r = grid.face_left, grid.face_right
    rows = np.concatenate([l, r, l, r])
    cols = np.concatenate([l, r, r, l])
    data = np.concatenate([w, w, -w, -w])
    stiffness = sp.coo_matrix((data, (rows, cols)), shape=(grid.size, grid.size)).tocsr()
    mass = sp.diags(eq.m * grid.cell_volume)
    return stiffness, mass


def _start_vector(eq: Equilibrium) -> np.ndarray:
    grid = eq.grid
    c = grid.centers.reshape(grid.size, -1)
    x = c[:, 0] - c[:, 0].mean()
    if grid.ndim > 1:
        x = x + 0.5 * (c[:, 1] - c[:, 1].mean())
    rng = np.random.default_rng(12345)
    return x + 1e-3 * rng.standard_normal(grid.size) * np.abs(x).max()


def spectral_gap(eq: Equilibrium, tol: float = 1e-10, max_iter: int = 500) -> SpectralGapResult:
    """Smallest non-zero eigenvalue by inverse iteration on the mean-zero subspace."""
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    S, M = assemble_operators(eq)
    mdiag = M.diagonal()
    total = mdiag.sum()

    # grounding cell 0 makes the reduced Laplacian non-singular; for a
    # right-hand side orthogonal to constants it solves the full system
    lu = splu(S[1:, 1:].tocsc())

    def project(x):
        return x - np.dot(mdiag, x) / total

    def normalize(x):
        return x / np.sqrt(np.dot(x, mdiag * x))

    x = normalize(project(_start_vector(eq)))
    residual = np.inf
    lam = np.nan
    for it in range(1, max_iter + 1):
        b = mdiag * x
        y = np.zeros_like(x)
        y[1:] = lu.solve(b[1:])
        x = normalize(project(y))
        Sx = S @ x
        lam = float(np.dot(x, Sx))
        Mx = mdiag * x
        residual = float(np.linalg.norm(Sx - lam * Mx) / (abs(lam) * np.linalg.norm(Mx)))
        if residual <= tol:
            break
    else:
        raise NumericalFailure(
            f"inverse iteration did not reach residual {tol:g} in {max_iter} iterations",
            residual=residual,
        )
    if not lam > 0:
        raise NumericalFailure(f"non-positive spectral gap {lam}", residual=residual)
    return SpectralGapResult(lam, 1.0 / lam, it, residual, x)


def weighted_variance(g, eq: Equilibrium) -> float:
    grid = eq.grid
    g = grid.check(g)
    mean = grid.integrate(g * eq.m)
    return grid.integrate(g * g * eq.m) - mean * mean


def poincare_check(g, eq: Equilibrium, C_P: float) -> float:
    """Slack C_P * int |grad g|^2 m - Var_m(g); non-negative when the inequality holds."""
    return C_P * dirichlet_energy(g, eq) - weighted_variance(g, eq)


def richardson(values, order: float = 2.0, ratio: float = 2.0) -> float:
    """Extrapolate the last two entries of a sequence refined by ``ratio``."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ParameterError("need at least two refinement levels")
    fine, coarse = values[-1], values[-2]
    return float(fine + (fine - coarse) / (ratio**order - 1.0))

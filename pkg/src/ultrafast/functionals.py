"""Free energy, energy gap, dissipation, chi-square distance and the explicit constants.

Notation: ``u = f / m`` is the ratio to equilibrium.  All face quantities use
arithmetic means of the two adjacent cells, and the "face volume" of every
face is the cell volume, so that a discrete Dirichlet energy reads

    sum over faces of  mean(m) * ((g_right - g_left) / h)**2 * cell_volume.

Two dissipation-type quantities are provided:

``dissipation``
    The entropy production -dF/dt along the flow, r^2 * int f |grad(rho / f^(r+1))|^2.
``dissipation_u``
    The ratio form r^2 * int u |grad(u^-(r+1))|^2 m.  Since rho / m^(r+1) is the
    constant gamma^-(r+1), the two differ exactly by the factor gamma^(-2(r+1)).
    The decay constant K controls the gap by ``K * dissipation_u``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError, PositivityError
from .weights import DensityField, Equilibrium, Weight, check_r

_SERIES_CUTOFF = 1e-3


def _values(f) -> np.ndarray:
    return f.f if isinstance(f, DensityField) else np.asarray(f, dtype=float)


def _positive(f: np.ndarray) -> np.ndarray:
    if not np.all(f > 0):
        raise PositivityError("density has non-positive cells")
    return f


def bregman_power(u: np.ndarray, r: float) -> np.ndarray:
    """u**-r - 1 + r*(u - 1), evaluated without cancellation near u = 1."""
    d = u - 1.0
    out = np.expm1(-r * np.log1p(d)) + r * d
    small = np.abs(d) < _SERIES_CUTOFF
    if np.any(small):
        ds = d[small]
        c2 = r * (r + 1) / 2.0
        c3 = -c2 * (r + 2) / 3.0
        c4 = -c3 * (r + 3) / 4.0
        c5 = -c4 * (r + 4) / 5.0
        out[small] = ds * ds * (c2 + ds * (c3 + ds * (c4 + ds * c5)))
    return np.maximum(out, 0.0)


def free_energy(f, eq: Equilibrium, weight: Weight) -> float:
    """F[f] = integral of rho / f**r."""
    f = _positive(eq.grid.check(_values(f)))
    return eq.grid.integrate(weight.rho * f ** (-eq.r))


def energy_gap(f, eq: Equilibrium, weight: Weight | None = None) -> float:
    """F[f] - F[m].

    Evaluated through F[m] = gamma**-(r+1) and unit mass of f and m, as
    gamma**-(r+1) * integral of (u**-r - 1 + r (u - 1)) m, which is a sum of
    non-negative cell terms.  ``weight`` is accepted for symmetry with
    :func:`free_energy`; rho enters only through the equilibrium.
    """
    f = _positive(eq.grid.check(_values(f)))
    u = f / eq.m
    return eq.pressure_level * eq.grid.integrate(bregman_power(u, eq.r) * eq.m)


def chi2_distance(f, eq: Equilibrium) -> float:
    """Integral of (f/m - 1)**2 m."""
    f = eq.grid.check(_values(f))
    d = f / eq.m - 1.0
    return eq.grid.integrate(d * d * eq.m)


def dirichlet_energy(g, eq: Equilibrium) -> float:
    """Discrete integral of |grad g|^2 m with face-mean m."""
    grid = eq.grid
    g = grid.check(g)
    dg = grid.face_difference(g)
    return float(np.sum(grid.face_mean(eq.m) * dg * dg) * grid.cell_volume)


def dissipation_u(f, eq: Equilibrium) -> float:
    """r^2 * integral of u |grad(u^-(r+1))|^2 m, with face means of u and m."""
    grid = eq.grid
    f = _positive(grid.check(_values(f)))
    u = f / eq.m
    r = eq.r
    dp = grid.face_difference(u ** (-(r + 1.0)))
    w = grid.face_mean(u) * grid.face_mean(eq.m)
    return float(r * r * np.sum(w * dp * dp) * grid.cell_volume)


def dissipation(f, eq: Equilibrium, weight: Weight | None = None) -> float:
    """Entropy production -dF/dt = gamma**(-2(r+1)) * dissipation_u."""
    return eq.pressure_level**2 * dissipation_u(f, eq)


def _check_constants(r, gamma, c, C):
    r = check_r(r)
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if not (0 < c <= 1 <= C):
        raise ParameterError(f"need 0 < c <= 1 <= C, got c={c}, C={C}")
    return r


def lemma_constants(r: float, gamma: float, c: float, C: float) -> tuple[float, float]:
    """Two-sided constants k1 <= k2 with k1*chi2 <= gap <= k2*chi2 on the sandwich class."""
    r = _check_constants(r, gamma, c, C)
    base = r * (r + 1.0) / (2.0 * gamma ** (r + 1.0))
    return base * C ** (-(r + 2.0)), base * c ** (-(r + 2.0))


def decay_constant(r: float, gamma: float, c: float, C: float, C_P: float) -> float:
    """K = C_P C^(2r+3) / (2 r (r+1) gamma^(r+1) c^(r+2))."""
    r = _check_constants(r, gamma, c, C)
    if not C_P > 0:
        raise ParameterError(f"Poincare constant must be positive, got {C_P}")
    return C_P * C ** (2 * r + 3) / (2 * r * (r + 1) * gamma ** (r + 1) * c ** (r + 2))


def gradient_constant(r: float, C: float) -> float:
    """C^(2r+3) / (r (r+1))^2, the factor bounding int |grad u|^2 m by dissipation_u."""
    return C ** (2 * r + 3) / (r * (r + 1)) ** 2


@dataclass(frozen=True)
class FunctionalReport:
    F: float
    gap: float
    dissipation: float
    dissipation_u: float
    chi2: float
    c: float
    C: float
    k1: float
    k2: float
    K: float | None = None

    CSV_COLUMNS = ("F", "gap", "I", "chi2", "c", "C", "k1", "k2", "K")

    def csv_row(self) -> list[float]:
        K = math.nan if self.K is None else self.K
        return [self.F, self.gap, self.dissipation, self.chi2, self.c, self.C, self.k1, self.k2, K]

    def as_dict(self) -> dict:
        return asdict(self)


def _sandwich(f: np.ndarray, eq: Equilibrium) -> tuple[float, float]:
    u = f / eq.m
    # unit mass of f and m forces c <= 1 <= C; clamp away rounding
    return min(float(u.min()), 1.0), max(float(u.max()), 1.0)


def functional_report(f, eq: Equilibrium, weight: Weight, C_P: float | None = None) -> FunctionalReport:
    f = _positive(eq.grid.check(_values(f)))
    c, C = _sandwich(f, eq)
    k1, k2 = lemma_constants(eq.r, eq.gamma, c, C)
    K = None if C_P is None else decay_constant(eq.r, eq.gamma, c, C, C_P)
    I_u = dissipation_u(f, eq)
    return FunctionalReport(
        F=free_energy(f, eq, weight),
        gap=energy_gap(f, eq),
        dissipation=eq.pressure_level**2 * I_u,
        dissipation_u=I_u,
        chi2=chi2_distance(f, eq),
        c=c,
        C=C,
        k1=k1,
        k2=k2,
        K=K,
    )


@dataclass(frozen=True)
class BoundsReport:
    """Outcome of the three inequality checks on one field.

    Slacks are ``right-hand side - left-hand side``; a check passes when its
    slack is at least ``-tolerance``.
    """

    gap: float
    chi2: float
    c: float
    C: float
    k1: float
    k2: float
    sandwich_lower_slack: float
    sandwich_upper_slack: float
    gradient_slack: float
    worst_face_slack: float
    faces_failed: int
    n_faces: int
    K: float | None = None
    control_slack: float | None = None
    flow_control_slack: float | None = None
    tolerance: float = 1e-10

    @property
    def sandwich_ok(self) -> bool:
        tol = self.tolerance * max(1.0, self.gap)
        return self.sandwich_lower_slack >= -tol and self.sandwich_upper_slack >= -tol

    @property
    def control_ok(self) -> bool | None:
        if self.control_slack is None:
            return None
        return self.control_slack >= -self.tolerance

    @property
    def gradient_ok(self) -> bool:
        return self.gradient_slack >= -self.tolerance and self.faces_failed == 0

    @property
    def passed(self) -> bool:
        return self.sandwich_ok and self.gradient_ok and self.control_ok is not False


def verify_bounds(
    f, eq: Equilibrium, weight: Weight, C_P: float | None = None, tolerance: float = 1e-10
) -> BoundsReport:
    """Check the two-sided gap bound, the gap/dissipation estimate and the gradient inequality.

    (a) k1 * chi2 <= gap <= k2 * chi2
    (b) gap <= K * dissipation_u  (only when C_P is given; ``flow_control_slack``
        additionally reports gap <= K * dissipation)
    (c) int |grad u|^2 m <= C^(2r+3) / (r(r+1))^2 * dissipation_u, both globally
        and face by face: |du|^2 <= C^(2r+3)/(r+1)^2 * mean(u) * |d(u^-(r+1))|^2
    """
    grid = eq.grid
    f = _positive(grid.check(_values(f)))
    r = eq.r
    c, C = _sandwich(f, eq)
    k1, k2 = lemma_constants(r, eq.gamma, c, C)
    gap = energy_gap(f, eq)
    chi2 = chi2_distance(f, eq)

    u = f / eq.m
    du = grid.face_jump(u)
    dp = grid.face_jump(u ** (-(r + 1.0)))
    face_rhs = C ** (2 * r + 3) / (r + 1) ** 2 * grid.face_mean(u) * dp * dp
    face_slack = face_rhs - du * du
    face_tol = tolerance * np.maximum(1.0, du * du)
    faces_failed = int(np.count_nonzero(face_slack < -face_tol))
    worst_face = float(face_slack.min()) if face_slack.size else 0.0

    I_u = dissipation_u(f, eq)
    grad_energy = dirichlet_energy(u, eq)
    gradient_slack = gradient_constant(r, C) * I_u - grad_energy

    K = control = flow = None
    if C_P is not None:
        K = decay_constant(r, eq.gamma, c, C, C_P)
        control = K * I_u - gap
        flow = K * eq.pressure_level**2 * I_u - gap

    return BoundsReport(
        gap=gap,
        chi2=chi2,
        c=c,
        C=C,
        k1=k1,
        k2=k2,
        sandwich_lower_slack=gap - k1 * chi2,
        sandwich_upper_slack=k2 * chi2 - gap,
        gradient_slack=gradient_slack,
        worst_face_slack=worst_face,
        faces_failed=faces_failed,
        n_faces=int(du.size),
        K=K,
        control_slack=control,
        flow_control_slack=flow,
        tolerance=tolerance,
    )

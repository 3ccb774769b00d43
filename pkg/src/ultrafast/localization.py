"""Truncation ladder: localized problems on boxes of half-width k.

For each rung the equilibrium potential V (with m = exp(-V) a probability
density on R^n) is rescaled to a_k V so that exp(-a_k V) has unit mass on the
box, and the initial data is rescaled to b_k f0 restricted to the box.  The
rung problems are solved with zero-flux walls and compared on an inner box
of half-width R.

Boxes max_i |x_i| <= k stand in for balls; in one dimension they coincide.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, NumericalFailure, TruncationTooSmallError
from .grid import TENSOR_2D, TRUNCATED_1D, Grid, build_grid, sub_box_mask
from .poincare import spectral_gap
from .solver import RunRecord, SolverConfig, fit_rate, run
from .weights import (
    DensityField,
    Equilibrium,
    Potential,
    Weight,
    check_r,
    equilibrium,
    weight_from_equilibrium,
)

LADDER_COLUMNS = ("k", "a_k", "b_k", "c_k", "C_k", "L1_gap_to_next")


def _nested_cells(spacing: float, k: float) -> int:
    n = 2.0 * k / spacing
    if abs(n - round(n)) > 1e-9 * n:
        raise ConfigurationError(f"half-width {k} is not a whole number of cells of width {spacing}")
    return int(round(n))


def _log_mass(a: float, V0: np.ndarray, shift: float, vol: float) -> float:
    # log of the box integral of exp(-a (V0 + shift))
    return math.log(np.sum(np.exp(-a * V0)) * vol) - a * shift


def localize_weight(
    potential: Potential, k: float, n_cells: int, ndim: int = 1
) -> tuple[float, Grid, np.ndarray]:
    """Find a_k with box integral of exp(-a_k V) equal to 1, by bisection.

    ``potential`` describes m; the normalising constant on R^ndim is
    included, so a_k -> 1 as k grows.  Returns (a_k, grid, m_k).
    """
    grid = build_grid(TRUNCATED_1D if ndim == 1 else TENSOR_2D, n_cells, float(k))
    V = potential.full(grid.centers, ndim)
    shift = float(V.min())
    V0 = V - shift
    vol = grid.cell_volume

    if _log_mass(0.0, V0, shift, vol) <= 0.0:
        raise TruncationTooSmallError(f"box of half-width {k} has volume {grid.volume:g} <= 1")
    hi = 1.0
    for _ in range(64):
        if _log_mass(hi, V0, shift, vol) < 0.0:
            break
        hi *= 2.0
    else:
        raise TruncationTooSmallError(f"could not bracket a_k for half-width {k}")

    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _log_mass(mid, V0, shift, vol) > 0.0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    m = np.exp(-a * shift) * np.exp(-a * V0)
    mass = grid.integrate(m)
    if abs(mass - 1.0) > 1e-12:
        raise NumericalFailure(f"bisection for a_k stalled with mass {mass!r}")
    return a, grid, m


def localize_initial(f0: DensityField, k: float) -> tuple[float, np.ndarray]:
    """b_k = 1 / (box integral of f0) and the rescaled restriction b_k f0."""
    grid = f0.grid
    _nested_cells(grid.h[0], k)
    mask = sub_box_mask(grid, k)
    if not np.any(mask):
        raise ConfigurationError(f"box of half-width {k} contains no cells")
    inside = f0.f[mask]
    total = float(np.sum(inside)) * grid.cell_volume
    if not total > 0:
        raise ConfigurationError("initial data has no mass inside the box")
    b = 1.0 / total
    return b, b * inside


@dataclass(frozen=True, eq=False)
class LocalizedProblem:
    k: float
    a_k: float
    b_k: float
    grid: Grid
    weight: Weight
    eq: Equilibrium
    f0: DensityField
    c_k: float
    C_k: float


def localized_problem(potential: Potential, f0: DensityField, k: float, r: float) -> LocalizedProblem:
    big = f0.grid
    n = _nested_cells(big.h[0], k)
    a, grid, m_k = localize_weight(potential, k, n, big.ndim)
    weight = weight_from_equilibrium(grid, m_k, r)
    eq = equilibrium(weight, r)
    b, values = localize_initial(f0, k)
    field0 = DensityField.from_values(values, eq)
    return LocalizedProblem(k, a, b, grid, weight, eq, field0, field0.c, field0.C)


@dataclass
class RungResult:
    problem: LocalizedProblem
    record: RunRecord
    inner: np.ndarray = field(repr=False)
    L1_gap_to_next: float = math.nan

    @property
    def sandwich_violation(self) -> float:
        """How far the run left [c_k, C_k] (0 when it stayed inside)."""
        p = self.problem
        return max(0.0, p.c_k - float(self.record.c.min()), float(self.record.C.max()) - p.C_k)


@dataclass
class LocalizationStudy:
    rungs: list[RungResult]
    R: float
    t_end: float

    def rows(self):
        for rr in self.rungs:
            p = rr.problem
            yield (p.k, p.a_k, p.b_k, p.c_k, p.C_k, rr.L1_gap_to_next)

    @property
    def gaps(self) -> np.ndarray:
        return np.array([rr.L1_gap_to_next for rr in self.rungs[:-1]])

    def monotone(self, tol: float = 1e-9) -> bool:
        """|a_k - 1|, |b_k - 1| and the consecutive L1 gaps are non-increasing."""
        a = np.abs(np.array([rr.problem.a_k for rr in self.rungs]) - 1.0)
        b = np.abs(np.array([rr.problem.b_k for rr in self.rungs]) - 1.0)
        return all(np.all(np.diff(x) <= tol) for x in (a, b, self.gaps))

    def to_csv(self, path=None) -> str:
        from .solver import format_float

        lines = [",".join(LADDER_COLUMNS)]
        for row in self.rows():
            lines.append(",".join(format_float(v) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


class RungFailure(NumericalFailure):
    def __init__(self, k, cause):
        super().__init__(f"rung k={k}: {cause}")
        self.k = k
        self.__cause__ = cause


def _solve_rung(problem: LocalizedProblem, config: SolverConfig, R: float) -> RungResult:
    try:
        record = run(problem.f0, problem.weight, problem.eq, config)
    except NumericalFailure as err:
        raise RungFailure(problem.k, err) from err
    inner = record.final.f[sub_box_mask(problem.grid, R)]
    record.final = None
    return RungResult(problem, record, inner)


def _default_horizon(problem: LocalizedProblem, config: SolverConfig) -> float:
    """One fitted e-fold of the energy gap on the given rung."""
    eq = problem.eq
    r = eq.r
    lam_lin = 2.0 * r * (r + 1.0) * eq.pressure_level / spectral_gap(eq).C_P
    probe = 3.0 / lam_lin
    rec = run(problem.f0, problem.weight, eq, replace(config, t_end=probe, record_every=probe / 60))
    return 1.0 / fit_rate(rec)


def localization_study(
    potential: Potential,
    f0: DensityField,
    r: float,
    ladder,
    R: float,
    t_end: float | None = None,
    cfl_safety: float = 0.4,
    jobs: int = 1,
    positivity_floor: float = 1e-14,
) -> LocalizationStudy:
    """Solve the localized problems on each rung and compare them on the inner box.

    ``potential`` describes the equilibrium m of the whole-space problem and
    ``f0`` lives on a grid whose cells nest with every rung (equal spacing,
    half-widths that are whole numbers of cells).  Rungs reaching far into
    the tails may need ``positivity_floor=0`` since m itself drops below the
    default floor there.
    """
    r = check_r(r)
    ladder = sorted(float(k) for k in ladder)
    if len(ladder) < 2:
        raise ConfigurationError("a ladder needs at least two rungs")
    if not 0 < R < ladder[0]:
        raise ConfigurationError(f"comparison radius R={R} must lie below the smallest rung {ladder[0]}")
    if f0.grid.half_width is None or ladder[-1] > f0.grid.half_width + 1e-12:
        raise ConfigurationError("initial data must cover the largest rung")

    problems = [localized_problem(potential, f0, k, r) for k in ladder]
    base = SolverConfig(t_end=1.0, r=r, cfl_safety=cfl_safety, positivity_floor=positivity_floor)
    if t_end is None:
        t_end = _default_horizon(problems[-1], base)
    config = replace(base, t_end=t_end, record_every=t_end / 50)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rungs = list(pool.map(_solve_rung, problems, [config] * len(problems), [R] * len(problems)))
    else:
        rungs = [_solve_rung(p, config, R) for p in problems]

    vol = f0.grid.cell_volume
    for lower, upper in zip(rungs, rungs[1:]):
        lower.L1_gap_to_next = float(np.sum(np.abs(lower.inner - upper.inner)) * vol)
    return LocalizationStudy(rungs, R, t_end)

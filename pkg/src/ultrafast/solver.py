"""Explicit conservative finite-volume solver for

    d/dt f = -r div(f grad(rho / f^(r+1))).

Each face carries the flux J = w * (phi_right - phi_left) / h with the pressure
phi = rho / f^(r+1) and a face mobility w; the cell update is
f <- f - r dt div(J).  Zero-flux walls have no face, so mass is conserved
by telescoping.  Because rho / m^(r+1) is cell-wise constant, f = m is an
exact fixed point.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, FitError, NumericalFailure, PositivityError
from .functionals import bregman_power, dissipation_u
from .weights import DensityField, Equilibrium, Weight, check_r

log = logging.getLogger(__name__)

FACE_RULES = ("product", "arithmetic")


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    ``face_rule`` selects the face mobility: ``"product"`` uses
    mean(m) * mean(f/m), which makes the semi-discrete energy identity
    dF/dt = -dissipation exact; ``"arithmetic"`` uses mean(f).
    """

    t_end: float
    r: float | None = None
    cfl_safety: float = 0.4
    record_every: float | None = None
    dt_max: float | None = None
    positivity_floor: float = 1e-14
    face_rule: str = "product"
    max_halvings: int = 20
    snapshot_times: tuple[float, ...] = ()
    mass_tolerance: float = 1e-12
    gap_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= 0.9:
            raise ConfigurationError(f"cfl_safety must lie in (0, 0.9], got {self.cfl_safety}")
        if self.record_every is not None and not self.record_every > 0:
            raise ConfigurationError("record_every must be positive")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ConfigurationError("dt_max must be positive")
        if not self.positivity_floor >= 0:
            raise ConfigurationError("positivity_floor must be non-negative")
        if self.face_rule not in FACE_RULES:
            raise ConfigurationError(f"face_rule must be one of {FACE_RULES}")
        if self.r is not None:
            check_r(self.r)

    @property
    def record_interval(self) -> float:
        return self.record_every if self.record_every is not None else self.t_end / 100.0


@dataclass
class RunRecord:
    times: np.ndarray
    F: np.ndarray
    gap: np.ndarray
    I: np.ndarray
    chi2: np.ndarray
    c: np.ndarray
    C: np.ndarray
    mass: np.ndarray
    dt: np.ndarray
    dt_history: np.ndarray = field(repr=False)
    final: DensityField | None = field(default=None, repr=False)
    snapshots: dict = field(default_factory=dict, repr=False)
    n_steps: int = 0

    CSV_COLUMNS = ("t", "F", "gap", "I", "chi2", "c", "C", "mass", "dt")

    def rows(self):
        cols = [self.times, self.F, self.gap, self.I, self.chi2, self.c, self.C, self.mass, self.dt]
        return zip(*cols)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for row in self.rows():
            writer.writerow([format_float(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def format_float(x) -> str:
    """Shortest round-trip repr; scientific notation appears for |x| < 1e-4."""
    return repr(float(x))


class _Recorder:
    def __init__(self):
        self.rows = []

    def add(self, t, f, eq, weight, dt):
        grid = eq.grid
        u = f / eq.m
        I_u = dissipation_u(f, eq)
        gap = eq.pressure_level * grid.integrate(bregman_power(u, eq.r) * eq.m)
        F = grid.integrate(weight.rho * f ** (-eq.r))
        chi2 = grid.integrate((u - 1.0) ** 2 * eq.m)
        self.rows.append(
            (t, F, gap, eq.pressure_level**2 * I_u, chi2, u.min(), u.max(), grid.integrate(f), dt)
        )

    def build(self, dt_history, final, snapshots, n_steps) -> RunRecord:
        cols = np.array(self.rows, dtype=float).reshape(-1, 9).T
        return RunRecord(*cols, dt_history=np.asarray(dt_history), final=final,
                         snapshots=snapshots, n_steps=n_steps)


# ---------------------------------------------------------------------------


def pressure(f, weight: Weight, r: float, floor: float = 1e-14) -> np.ndarray:
    """phi = rho / f^(r+1)."""
    f = f.f if isinstance(f, DensityField) else np.asarray(f, dtype=float)
    if not np.all(f > floor):
        raise PositivityError(f"density fell to or below the floor {floor:g}")
    return weight.rho / f ** (r + 1.0)


def _mobility(f: np.ndarray, eq: Equilibrium, face_rule: str) -> np.ndarray:
    grid = eq.grid
    if face_rule == "product":
        return grid.face_mean(eq.m) * grid.face_mean(f / eq.m)
    return grid.face_mean(f)


def _rate(f, phi, eq, face_rule) -> np.ndarray:
    grid = eq.grid
    J = _mobility(f, eq, face_rule) * grid.face_difference(phi)
    return -eq.r * grid.divergence(J)


def _stable_dt_from_phi(phi_max, grid, r, cfl_safety, dt_max=None) -> float:
    D = r * (r + 1.0) * phi_max
    dt = cfl_safety * grid.h_min**2 / (2.0 * grid.ndim * D)
    return dt if dt_max is None else min(dt, dt_max)


def stable_dt(f, weight: Weight, r: float, cfl_safety: float = 0.4, dt_max: float | None = None) -> float:
    """cfl_safety * h^2 / (2 n_dims max D) with the linearised diffusivity D = r (r+1) rho / f^(r+1)."""
    phi = pressure(f, weight, r, floor=0.0)
    return _stable_dt_from_phi(float(phi.max()), weight.grid, r, cfl_safety, dt_max)


def _advance(f, weight, eq, dt, face_rule, floor):
    phi = pressure(f, weight, eq.r, floor)
    return f + dt * _rate(f, phi, eq, face_rule)


def step(
    f,
    weight: Weight,
    eq: Equilibrium,
    dt: float,
    face_rule: str = "product",
    positivity_floor: float = 1e-14,
) -> DensityField:
    """One explicit Euler step; raises PositivityError when dt is too large."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    values = f.f if isinstance(f, DensityField) else eq.grid.check(f)
    nxt = _advance(values, weight, eq, dt, face_rule, positivity_floor)
    if not np.all(np.isfinite(nxt)):
        raise NumericalFailure("non-finite density after step")
    if not np.all(nxt > positivity_floor):
        raise PositivityError("step produced a non-positive density; reduce dt")
    return DensityField.from_values(nxt, eq)


def _try_step(f, weight, eq, dt, config):
    """Explicit step with up to ``max_halvings`` retries at dt/2."""
    for _ in range(config.max_halvings + 1):
        nxt = _advance(f, weight, eq, dt, config.face_rule, config.positivity_floor)
        if not np.all(np.isfinite(nxt)):
            raise NumericalFailure("non-finite density during time stepping")
        if np.all(nxt > config.positivity_floor):
            return nxt, dt
        dt *= 0.5
    raise PositivityError(f"positivity lost after {config.max_halvings} step halvings")


def _check_inputs(f0, weight, eq, config):
    if f0.grid is not eq.grid or weight.grid is not eq.grid:
        raise ConfigurationError("initial data, weight and equilibrium must share one grid")
    if config.r is not None and not math.isclose(config.r, eq.r):
        raise ConfigurationError(f"solver r={config.r} differs from equilibrium r={eq.r}")


def run(
    f0: DensityField,
    weight: Weight,
    eq: Equilibrium,
    config: SolverConfig,
    monitor: Callable[[float, np.ndarray], None] | None = None,
) -> RunRecord:
    """Integrate to ``config.t_end`` recording diagnostics every ``record_interval``.

    ``monitor(t, f)`` is called after every accepted step.  On failure the
    raised error carries the partial record as ``err.record``.
    """
    _check_inputs(f0, weight, eq, config)
    grid = eq.grid
    r = eq.r
    f = f0.f.copy()
    rec = _Recorder()
    rec.add(0.0, f, eq, weight, 0.0)
    snaps_pending = sorted(t for t in config.snapshot_times if 0 <= t <= config.t_end)
    snapshots = {}
    if snaps_pending and snaps_pending[0] == 0:
        snapshots[0.0] = f.copy()
        snaps_pending.pop(0)

    interval = config.record_interval
    n_records = max(1, int(round(config.t_end / interval)))
    k_next = 1
    t = 0.0
    n_steps = 0
    dt_history = []
    last_dt = 0.0

    def fail(err):
        err.record = rec.build(dt_history, DensityField(grid, f, float((f / eq.m).min()), float((f / eq.m).max())), snapshots, n_steps)
        raise err

    while k_next <= n_records:
        t_rec = config.t_end if k_next == n_records else k_next * interval
        targets = [t_rec] + snaps_pending[:1]
        target = min(targets)
        try:
            phi = pressure(f, weight, r, config.positivity_floor)
        except PositivityError as err:
            fail(err)
        dt = _stable_dt_from_phi(float(phi.max()), grid, r, config.cfl_safety, config.dt_max)
        hit = dt >= target - t
        if hit:
            dt = target - t
        try:
            f, used = _try_step(f, weight, eq, dt, config)
        except NumericalFailure as err:
            fail(err)
        if used != dt:
            hit = False
        t = target if hit else t + used
        n_steps += 1
        last_dt = used
        dt_history.append(used)
        if monitor is not None:
            monitor(t, f)
        if snaps_pending and t >= snaps_pending[0]:
            snapshots[snaps_pending.pop(0)] = f.copy()
        if t >= t_rec:
            rec.add(t, f, eq, weight, last_dt)
            k_next += 1
            _, _, gap_prev = rec.rows[-2][:3]
            gap_now = rec.rows[-1][2]
            mass = rec.rows[-1][7]
            if abs(mass - 1.0) > config.mass_tolerance:
                fail(NumericalFailure(f"mass drifted to {mass!r} at t={t:g}"))
            if gap_now > gap_prev + config.gap_tolerance:
                fail(NumericalFailure(f"energy gap increased at t={t:g}; reduce cfl_safety"))

    final = DensityField.from_values(f, eq)
    return rec.build(dt_history, final, snapshots, n_steps)


@dataclass
class PairedRun:
    times: np.ndarray
    l1: np.ndarray
    f: DensityField
    g: DensityField


def run_pair(
    f0: DensityField,
    g0: DensityField,
    weight: Weight,
    eq: Equilibrium,
    config: SolverConfig,
) -> PairedRun:
    """Evolve two fields with a shared time step and track their L1 distance per step."""
    _check_inputs(f0, weight, eq, config)
    _check_inputs(g0, weight, eq, config)
    grid = eq.grid
    r = eq.r
    f, g = f0.f.copy(), g0.f.copy()
    t = 0.0
    times, dists = [0.0], [grid.integrate(np.abs(f - g))]
    while t < config.t_end:
        phi_max = max(
            float(pressure(f, weight, r, config.positivity_floor).max()),
            float(pressure(g, weight, r, config.positivity_floor).max()),
        )
        dt = _stable_dt_from_phi(phi_max, grid, r, config.cfl_safety, config.dt_max)
        dt = min(dt, config.t_end - t)
        f = _advance(f, weight, eq, dt, config.face_rule, config.positivity_floor)
        g = _advance(g, weight, eq, dt, config.face_rule, config.positivity_floor)
        if not (np.all(f > config.positivity_floor) and np.all(g > config.positivity_floor)):
            raise PositivityError("paired run lost positivity")
        t = config.t_end if config.t_end - t <= dt else t + dt
        times.append(t)
        dists.append(grid.integrate(np.abs(f - g)))
    return PairedRun(np.array(times), np.array(dists),
                     DensityField.from_values(f, eq), DensityField.from_values(g, eq))


def fit_decay_rate(times, gaps, window: float = 0.6, floor: float = 1e-13) -> float:
    """Least-squares slope of -log(gap) against t over the last ``window`` of the time span."""
    times = np.asarray(times, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if not 0 < window <= 1:
        raise FitError(f"window must lie in (0, 1], got {window}")
    t0, t1 = times[0], times[-1]
    sel = (times >= t1 - window * (t1 - t0)) & (gaps > floor)
    if np.count_nonzero(sel) < 10:
        raise FitError(f"need at least 10 usable points, found {np.count_nonzero(sel)}")
    slope, _ = np.polyfit(times[sel], -np.log(gaps[sel]), 1)
    return float(slope)


def fit_rate(record: RunRecord, window: float = 0.6) -> float:
    return fit_decay_rate(record.times, record.gap, window)

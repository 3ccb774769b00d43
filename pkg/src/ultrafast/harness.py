"""Experiment orchestration behind the ``ultrafast`` command.

Configuration files are flat ``key = value`` text with dotted section
prefixes, for example::

    r = 2
    weight.kind = quadratic
    weight.sigma = 1.0
    grid.kind = truncated1d
    grid.n_cells = 600
    grid.L = 9
    initial.kind = cosine
    initial.epsilon = 0.3
    solver.t_end = 0.05

Blank values and missing keys take the defaults in :data:`SCHEMA`.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FitError, NumericalFailure, PropertyViolation
from .functionals import decay_constant, lemma_constants, verify_bounds
from .grid import PERIODIC_1D, TENSOR_2D, TRUNCATED_1D, build_grid
from .localization import LocalizationStudy, localization_study
from .poincare import SpectralGapResult, richardson, spectral_gap
from .solver import SolverConfig, fit_rate, format_float, run
from .weights import (
    Potential,
    check_r,
    default_half_width,
    equilibrium,
    make_initial,
    make_weight,
    save_profile,
)

log = logging.getLogger(__name__)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


SCHEMA = {
    "r": (float, 2.0),
    "seed": (int, 0),
    "weight.kind": (str, "quadratic"),
    "weight.sigma": (float, 1.0),
    "weight.alpha": (float, 1.5),
    "weight.scale": (float, 1.0),
    "grid.kind": (str, TRUNCATED_1D),
    "grid.n_cells": (int, 400),
    "grid.L": (float, None),
    "initial.kind": (str, "cosine"),
    "initial.epsilon": (float, 0.3),
    "initial.mode": (int, 1),
    "initial.left": (float, 1.5),
    "initial.right": (float, 0.5),
    "initial.shift": (float, 0.5),
    "initial.c_min": (float, 0.5),
    "initial.C_max": (float, 2.0),
    "solver.t_end": (float, 0.05),
    "solver.cfl_safety": (float, 0.4),
    "solver.record_every": (float, None),
    "solver.dt_max": (float, None),
    "solver.face_rule": (str, "product"),
    "solver.positivity_floor": (float, 1e-14),
    "poincare.tol": (float, 1e-10),
    "poincare.ladder": (_ints, None),
    "verify.n_samples": (int, 500),
    "verify.max_modes": (int, 8),
    "ladder.k": (_floats, (4.0, 6.0, 8.0, 10.0)),
    "ladder.R": (float, 3.0),
    "ladder.h": (float, 0.05),
    "ladder.t_end": (float, None),
    "output.dir": (str, "runs"),
}

_INITIAL_PARAMS = {
    "cosine": ("epsilon", "mode"),
    "ratio-step": ("left", "right"),
    "tilt": ("shift", "c_min", "C_max"),
    "equilibrium": (),
}


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        raw = parse_config_text(text)
        return cls.from_mapping(raw, **overrides)

    @classmethod
    def from_mapping(cls, raw: dict, **overrides) -> "ExperimentConfig":
        values = {}
        for key, (conv, default) in SCHEMA.items():
            v = raw.get(key, default)
            if isinstance(v, str):
                v = v.strip()
                if v == "":
                    v = default
                else:
                    try:
                        v = conv(v)
                    except ValueError as err:
                        raise ConfigurationError(f"bad value for {key}: {err}") from None
            values[key] = v
        for key, v in overrides.items():
            key = key.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigurationError(f"unknown key {key!r}")
            values[key] = v
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def __getitem__(self, key):
        return self.values[key]

    def with_values(self, **overrides) -> "ExperimentConfig":
        return ExperimentConfig.from_mapping(dict(self.values), **overrides)

    def to_text(self) -> str:
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in SCHEMA)

    # construction -------------------------------------------------------

    def validate(self) -> None:
        check_r(self["r"])
        if self["grid.kind"] not in (PERIODIC_1D, TRUNCATED_1D, TENSOR_2D):
            raise ConfigurationError(f"unknown grid kind {self['grid.kind']!r}")
        if self["initial.kind"] not in _INITIAL_PARAMS:
            raise ConfigurationError(f"unknown initial kind {self['initial.kind']!r}")
        self.potential()
        self.solver_config()

    def potential(self) -> Potential:
        kind = self["weight.kind"]
        if kind == "quadratic":
            return Potential(kind, sigma=self["weight.sigma"])
        if kind == "power":
            return Potential(kind, alpha=self["weight.alpha"], scale=self["weight.scale"])
        return Potential(kind)

    def build_grid(self, n_cells: int | None = None):
        kind = self["grid.kind"]
        n = self["grid.n_cells"] if n_cells is None else n_cells
        if kind == PERIODIC_1D:
            return build_grid(kind, n)
        L = self["grid.L"]
        if L is None:
            L = default_half_width(self.potential(), self["r"], 2 if kind == TENSOR_2D else 1)
        return build_grid(kind, n, L)

    def build_problem(self, n_cells: int | None = None):
        grid = self.build_grid(n_cells)
        weight = make_weight(grid, self.potential())
        eq = equilibrium(weight, self["r"])
        return grid, weight, eq

    def initial_params(self) -> dict:
        kind = self["initial.kind"]
        return {p: self[f"initial.{p}"] for p in _INITIAL_PARAMS[kind]}

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            t_end=self["solver.t_end"],
            r=self["r"],
            cfl_safety=self["solver.cfl_safety"],
            record_every=self["solver.record_every"],
            dt_max=self["solver.dt_max"],
            face_rule=self["solver.face_rule"],
            positivity_floor=self["solver.positivity_floor"],
        )


def _write_summary(path: Path, items: dict) -> None:
    lines = []
    for k, v in items.items():
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = format_float(v)
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def _prepare_dir(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigurationError(f"cannot create output directory {out}: {err}") from None
    return out


def write_error_record(out_dir, err: Exception) -> dict:
    record = {
        "error": type(err).__name__,
        "message": str(err),
        "exit_status": getattr(err, "exit_status", 3),
    }
    if getattr(err, "residual", None) is not None:
        record["residual"] = err.residual
    try:
        out = _prepare_dir(out_dir)
        (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    except ConfigurationError:
        pass
    return record


# subcommands -------------------------------------------------------------


def decay_bound_holds(times, gaps, K: float, atol: float = 1e-14) -> bool:
    gaps = np.asarray(gaps)
    bound = gaps[0] * np.exp(-np.asarray(times) / K)
    return bool(np.all(gaps <= bound + atol))


def cmd_simulate(config: ExperimentConfig, out_dir=None) -> Path:
    """End-to-end decay experiment; returns the run directory."""
    out = _prepare_dir(out_dir or config["output.dir"])
    (out / "config.txt").write_text(config.to_text())

    grid, weight, eq = config.build_problem()
    f0 = make_initial(eq, config["initial.kind"], **config.initial_params())
    gap_result = spectral_gap(eq, tol=config["poincare.tol"])
    k1, k2 = lemma_constants(eq.r, eq.gamma, f0.c, f0.C)
    K = decay_constant(eq.r, eq.gamma, f0.c, f0.C, gap_result.C_P)

    record = run(f0, weight, eq, config.solver_config())
    record.to_csv(out / "trajectory.csv")
    save_profile(out / "final_field.txt", grid, record.final.f, "f")

    try:
        lam = fit_rate(record)
    except FitError:
        lam = math.nan
    stationary = bool(np.max(record.gap) <= 1e-12)
    summary = {
        "r": eq.r,
        "gamma": eq.gamma,
        "c": f0.c,
        "C": f0.C,
        "k1": k1,
        "k2": k2,
        "C_P": gap_result.C_P,
        "K": K,
        "rate_bound": 1.0 / K,
        "lambda_fit": lam,
        "lambda_fit_ok": bool(stationary or lam >= 1.0 / K - 1e-6),
        "bound_holds": decay_bound_holds(record.times, record.gap, K),
        "stationary": stationary,
        "gap_initial": float(record.gap[0]),
        "gap_final": float(record.gap[-1]),
        "max_mass_error": float(np.max(np.abs(record.mass - 1.0))),
        "c_min_over_run": float(record.c.min()),
        "C_max_over_run": float(record.C.max()),
        "n_steps": record.n_steps,
    }
    _write_summary(out / "summary.txt", summary)
    return out


@dataclass
class PoincareTable:
    rows: list
    limit: float

    def to_csv(self, path=None) -> str:
        lines = ["N,L,lambda1,C_P,residual,status"]
        for n, L, lam, cp, res, status in self.rows:
            lines.append(",".join([str(n), _render(L) or "", format_float(lam),
                                   format_float(cp), format_float(res), status]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _poincare_rung(config: ExperimentConfig, n: int):
    _, _, eq = config.build_problem(n)
    try:
        res = spectral_gap(eq, tol=config["poincare.tol"])
        return (n, eq.grid.half_width, res.lambda1, res.C_P, res.residual, "ok")
    except NumericalFailure as err:
        return (n, eq.grid.half_width, math.nan, math.nan,
                math.nan if err.residual is None else err.residual, f"failed: {err}")


def poincare_table(config: ExperimentConfig, jobs: int = 1) -> PoincareTable:
    ladder = config["poincare.ladder"]
    if ladder is None:
        n = config["grid.n_cells"]
        ladder = (n, 2 * n, 4 * n)
    ladder = sorted(ladder)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_poincare_rung, [config] * len(ladder), ladder))
    else:
        rows = [_poincare_rung(config, n) for n in ladder]
    good = [row for row in rows if row[5] == "ok"]
    limit = math.nan
    if len(good) >= 2 and good[-1][0] == 2 * good[-2][0]:
        limit = richardson([good[-2][3], good[-1][3]])
    elif good:
        limit = good[-1][3]
    return PoincareTable(rows, limit)


def cmd_poincare(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> PoincareTable:
    out = _prepare_dir(out_dir or config["output.dir"])
    (out / "config.txt").write_text(config.to_text())
    table = poincare_table(config, jobs)
    table.to_csv(out / "poincare.csv")
    failed = sum(row[5] != "ok" for row in table.rows)
    _write_summary(out / "poincare_summary.txt",
                   {"C_P_extrapolated": table.limit, "rungs": len(table.rows), "failed_rungs": failed})
    return table


def random_admissible_field(eq, rng: np.random.Generator, max_modes: int = 8):
    """Cosine-series perturbation of m with random coefficients, renormalised."""
    while True:
        n_modes = int(rng.integers(1, max_modes + 1))
        coef = rng.standard_normal(n_modes)
        amplitude = rng.uniform(0.05, 0.95)
        coef *= amplitude / np.sum(np.abs(coef))
        try:
            return make_initial(eq, "cosine-series", coefficients=coef)
        except ConfigurationError:
            continue


VERIFY_COLUMNS = ("sample", "gap", "chi2", "c", "C", "sandwich_lower_slack",
                  "sandwich_upper_slack", "control_slack", "gradient_slack",
                  "faces_failed", "passed")


def _verify_chunk(config: ExperimentConfig, C_P: float, seed: int, indices):
    _, weight, eq = config.build_problem()
    rows = []
    for i in indices:
        rng = np.random.default_rng([seed, i])
        f = random_admissible_field(eq, rng, config["verify.max_modes"])
        rep = verify_bounds(f, eq, weight, C_P)
        rows.append((i, rep.gap, rep.chi2, rep.c, rep.C, rep.sandwich_lower_slack,
                     rep.sandwich_upper_slack, rep.control_slack, rep.gradient_slack,
                     rep.faces_failed, rep.passed))
    return rows


@dataclass
class VerifyReport:
    rows: list
    C_P: float

    @property
    def n_samples(self) -> int:
        return len(self.rows)

    @property
    def n_passed(self) -> int:
        return sum(bool(row[-1]) for row in self.rows)

    @property
    def failures(self) -> list[int]:
        return [row[0] for row in self.rows if not row[-1]]

    def worst(self, column: str) -> float:
        j = VERIFY_COLUMNS.index(column)
        return float(min(row[j] for row in self.rows))

    def to_csv(self, path=None) -> str:
        lines = [",".join(VERIFY_COLUMNS)]
        for row in self.rows:
            cells = [str(row[0])] + [format_float(v) for v in row[1:9]] + [str(row[9]), str(bool(row[10])).lower()]
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def verify_sweep(config: ExperimentConfig, n_samples: int, seed: int, jobs: int = 1) -> VerifyReport:
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    _, _, eq = config.build_problem()
    C_P = spectral_gap(eq, tol=config["poincare.tol"]).C_P
    indices = list(range(n_samples))
    if jobs > 1:
        chunks = [indices[j::jobs] for j in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_verify_chunk, [config] * jobs, [C_P] * jobs, [seed] * jobs, chunks)
            rows = sorted((row for part in parts for row in part), key=lambda row: row[0])
    else:
        rows = _verify_chunk(config, C_P, seed, indices)
    return VerifyReport(rows, C_P)


def cmd_verify(config: ExperimentConfig, n_samples: int | None = None, seed: int | None = None,
               out_dir=None, jobs: int = 1) -> VerifyReport:
    out = _prepare_dir(out_dir or config["output.dir"])
    (out / "config.txt").write_text(config.to_text())
    n = config["verify.n_samples"] if n_samples is None else n_samples
    seed = config["seed"] if seed is None else seed
    report = verify_sweep(config, n, seed, jobs)
    report.to_csv(out / "verify.csv")
    _write_summary(out / "verify_summary.txt", {
        "seed": seed,
        "n_samples": report.n_samples,
        "n_passed": report.n_passed,
        "C_P": report.C_P,
        "worst_sandwich_lower_slack": report.worst("sandwich_lower_slack"),
        "worst_sandwich_upper_slack": report.worst("sandwich_upper_slack"),
        "worst_control_slack": report.worst("control_slack"),
        "worst_gradient_slack": report.worst("gradient_slack"),
    })
    if report.failures:
        first = report.failures[0]
        raise PropertyViolation(
            f"{len(report.failures)} of {n} samples violate a bound; first offender: "
            f"seed={seed} sample={first}"
        )
    return report


def localization_from_config(config: ExperimentConfig, jobs: int = 1) -> LocalizationStudy:
    ladder = sorted(config["ladder.k"])
    if len(ladder) < 3:
        raise ConfigurationError("the localization ladder needs at least 3 rungs")
    kind = config["grid.kind"]
    if kind == PERIODIC_1D:
        raise ConfigurationError("localization needs a truncated1d or tensor2d grid")
    r = config["r"]
    h = config["ladder.h"]
    top = ladder[-1]
    n_big = int(round(2 * top / h))
    grid = build_grid(kind, n_big, top)
    weight = make_weight(grid, config.potential())
    eq = equilibrium(weight, r)
    f0 = make_initial(eq, config["initial.kind"], **config.initial_params())
    return localization_study(
        config.potential().equilibrium_potential(r), f0, r, ladder, config["ladder.R"],
        t_end=config["ladder.t_end"], cfl_safety=config["solver.cfl_safety"], jobs=jobs,
        positivity_floor=config["solver.positivity_floor"],
    )


def cmd_localize(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> LocalizationStudy:
    out = _prepare_dir(out_dir or config["output.dir"])
    (out / "config.txt").write_text(config.to_text())
    study = localization_from_config(config, jobs)
    study.to_csv(out / "ladder.csv")
    sandwich = max(rr.sandwich_violation for rr in study.rungs)
    verdict = study.monotone() and sandwich <= 1e-9
    _write_summary(out / "ladder_summary.txt", {
        "t_end": study.t_end,
        "R": study.R,
        "monotone": study.monotone(),
        "max_sandwich_violation": sandwich,
        "verdict": "pass" if verdict else "fail",
    })
    if not verdict:
        raise PropertyViolation("localization ladder is not monotone")
    return study

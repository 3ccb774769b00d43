"""Weights rho, equilibria m = gamma * rho**(1/(r+1)) and admissible initial data.

All normalisations are carried out on the discrete grid so that the discrete
identities (unit mass, constant pressure rho / m**(r+1)) hold to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, ParameterError, UnsupportedWeightError
from .grid import PERIODIC_1D, Grid


@dataclass(frozen=True)
class Potential:
    """Radial potential V with rho proportional to exp(-V).

    ``quadratic``: V = |x|^2 / (2 sigma^2)
    ``power``:     V = |x / scale|^alpha / alpha, 1 < alpha <= 2
    ``uniform``:   V = 0 (periodic unit interval only)
    """

    kind: str
    sigma: float = 1.0
    alpha: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "quadratic":
            if not self.sigma > 0:
                raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        elif kind == "power":
            if not 1.0 < self.alpha <= 2.0:
                raise UnsupportedWeightError(
                    f"power potential needs 1 < alpha <= 2, got {self.alpha}"
                )
            if not self.scale > 0:
                raise ConfigurationError(f"scale must be positive, got {self.scale}")
        elif kind != "uniform":
            raise UnsupportedWeightError(f"unknown potential kind {self.kind!r}")

    @property
    def exponent(self) -> float:
        return 2.0 if self.kind == "quadratic" else self.alpha

    @property
    def length(self) -> float:
        return self.sigma if self.kind == "quadratic" else self.scale

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Unnormalised potential at points x (shape (n,) or (n, d))."""
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.zeros(x.shape[0])
        rad = np.abs(x) if x.ndim == 1 else np.sqrt(np.sum(x * x, axis=1))
        a = self.exponent
        return (rad / self.length) ** a / a

    def log_normalizer(self, ndim: int = 1) -> float:
        """log of the integral of exp(-V) over R^ndim."""
        if self.kind == "uniform":
            return 0.0
        a, s = self.exponent, self.length
        # radial integral of t^(d-1) exp(-t^a / a) = a^(d/a - 1) Gamma(d/a)
        surface = math.log(2.0) if ndim == 1 else math.log(2.0 * math.pi)
        return (
            surface
            + ndim * math.log(s)
            + (ndim / a - 1.0) * math.log(a)
            + float(gammaln(ndim / a))
        )

    def full(self, x: np.ndarray, ndim: int = 1) -> np.ndarray:
        """Potential of the normalised density on R^ndim: exp(-full) integrates to 1."""
        return self(x) + self.log_normalizer(ndim)

    def equilibrium_potential(self, r: float) -> "Potential":
        """Potential of m = gamma * rho**(1/(r+1)); it is rho's potential divided by r+1."""
        if self.kind == "uniform":
            return self
        if self.kind == "quadratic":
            return Potential("quadratic", sigma=self.sigma * math.sqrt(r + 1.0))
        return Potential("power", alpha=self.alpha, scale=self.scale * (r + 1.0) ** (1.0 / self.alpha))

    def axis_std(self) -> float:
        """Standard deviation along one axis of the 1-D density exp(-V)."""
        if self.kind == "uniform":
            return math.sqrt(1.0 / 12.0)
        a, s = self.exponent, self.length
        return s * math.exp(
            0.5 * (2.0 / a * math.log(a) + gammaln(3.0 / a) - gammaln(1.0 / a))
        )


def default_half_width(potential: Potential, r: float, ndim: int = 1) -> float:
    """Six equilibrium standard deviations in 1-D, five in 2-D.

    The 2-D box corners sit further out in the tails; at six deviations m
    drops below the solver's default positivity floor there.
    """
    return (6.0 if ndim == 1 else 5.0) * potential.equilibrium_potential(r).axis_std()


@dataclass(frozen=True, eq=False)
class Weight:
    grid: Grid
    rho: np.ndarray
    potential: Potential | None = None


@dataclass(frozen=True, eq=False)
class Equilibrium:
    grid: Grid
    r: float
    gamma: float
    m: np.ndarray

    @property
    def pressure_level(self) -> float:
        """gamma**-(r+1), the constant value of rho / m**(r+1) and of F[m]."""
        return self.gamma ** (-(self.r + 1.0))


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid
    f: np.ndarray
    c: float
    C: float

    @classmethod
    def from_values(cls, f, eq: Equilibrium) -> "DensityField":
        f = eq.grid.check(f).copy()
        if not np.all(f > 0):
            raise ConfigurationError("density must be strictly positive")
        u = f / eq.m
        f.setflags(write=False)
        return cls(eq.grid, f, float(u.min()), float(u.max()))

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.f)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_r(r: float) -> float:
    r = float(r)
    if not r > 1.0:
        raise ParameterError("r must exceed 1")
    return r


def make_weight(grid: Grid, kind: str | Potential = "quadratic", **params) -> Weight:
    """Normalised weight rho ~ exp(-V) sampled at cell centres.

    >>> from ultrafast.grid import build_grid
    >>> w = make_weight(build_grid("periodic1d", 10), "uniform")
    >>> float(w.rho[0])
    1.0
    """
    pot = kind if isinstance(kind, Potential) else Potential(kind, **params)
    if pot.kind == "uniform" and grid.kind != PERIODIC_1D:
        raise UnsupportedWeightError("the uniform weight is only defined on the periodic unit interval")
    if pot.kind != "uniform" and grid.kind == PERIODIC_1D:
        raise UnsupportedWeightError(f"{pot.kind} weights need a truncated grid")
    V = pot(grid.centers)
    raw = np.exp(-(V - V.min()))
    rho = raw / grid.integrate(raw)
    return Weight(grid, _readonly(rho), pot)


def weight_from_equilibrium(grid: Grid, m: np.ndarray, r: float) -> Weight:
    """The weight whose equilibrium for exponent r is (a multiple of) m."""
    m = grid.check(m)
    raw = (m / m.max()) ** (r + 1.0)
    return Weight(grid, _readonly(raw / grid.integrate(raw)))


def equilibrium(weight: Weight, r: float) -> Equilibrium:
    r = check_r(r)
    grid = weight.grid
    root = weight.rho ** (1.0 / (r + 1.0))
    gamma = 1.0 / grid.integrate(root)
    return Equilibrium(grid, r, gamma, _readonly(gamma * root))


# initial data ------------------------------------------------------------


def _mode(grid: Grid, axis_values: np.ndarray, j: int) -> np.ndarray:
    """j-th cosine mode along one axis: cos(2 pi j x) on [0,1], cos(pi j (x+L)/(2L)) on [-L, L]."""
    if grid.periodic:
        return np.cos(2.0 * math.pi * j * axis_values)
    L = grid.half_width
    return np.cos(math.pi * j * (axis_values + L) / (2.0 * L))


def cosine_ratio(grid: Grid, coefficients, mode: int = 1) -> np.ndarray:
    """Ratio profile 1 + sum_j a_j psi_j.

    ``coefficients`` is a 1-D sequence (a_1, a_2, ...) for modes mode, mode+1, ...
    On the 2-D grid each term is the product psi_j(x) psi_j(y).
    """
    coefficients = np.atleast_1d(np.asarray(coefficients, dtype=float))
    c = grid.centers.reshape(grid.size, -1)
    u = np.ones(grid.size)
    for offset, a in enumerate(coefficients):
        j = mode + offset
        term = np.ones(grid.size)
        for d in range(grid.ndim):
            term = term * _mode(grid, c[:, d], j)
        u += a * term
    return u


def _tilt_ratio(eq: Equilibrium, shift: float, c_min: float, C_max: float) -> np.ndarray:
    grid = eq.grid
    m = grid.reshape(eq.m)
    axis = grid.axes[0]
    if grid.periodic:
        shifted = np.interp(axis - shift, axis, m, period=1.0)
    else:
        shifted = np.apply_along_axis(
            lambda col: np.interp(axis - shift, axis, col), 0, m
        )
    u = shifted.reshape(grid.size) / eq.m
    return np.clip(u, c_min, C_max)


def make_initial(eq: Equilibrium, kind: str = "cosine", **params) -> DensityField:
    """Build an initial density in the sandwich class around ``eq.m``.

    Kinds and parameters:

    ``cosine``     epsilon (|epsilon| < 1), mode (default 1)
    ``cosine-series``  coefficients (sum of |a_j| < 1), mode (default 1)
    ``ratio-step`` left, right: ratio levels on the lower/upper half of the first axis
    ``tilt``       shift, c_min (default 0.5), C_max (default 2.0)
    ``equilibrium`` f = m

    The field is always renormalised to unit mass and its sandwich constants
    are measured afterwards.
    """
    grid = eq.grid
    kind = kind.lower()
    if kind == "equilibrium":
        u = np.ones(grid.size)
    elif kind == "cosine":
        eps = float(params.get("epsilon", 0.0))
        if not abs(eps) < 1.0:
            raise ConfigurationError(f"cosine amplitude must satisfy |epsilon| < 1, got {eps}")
        u = cosine_ratio(grid, [eps], int(params.get("mode", 1)))
    elif kind == "cosine-series":
        coef = np.asarray(params["coefficients"], dtype=float)
        u = cosine_ratio(grid, coef, int(params.get("mode", 1)))
    elif kind == "ratio-step":
        lo, hi = float(params["left"]), float(params["right"])
        c = grid.centers.reshape(grid.size, -1)[:, 0]
        mid = 0.5 if grid.periodic else 0.0
        u = np.where(c < mid, lo, hi)
    elif kind == "tilt":
        u = _tilt_ratio(
            eq,
            float(params["shift"]),
            float(params.get("c_min", 0.5)),
            float(params.get("C_max", 2.0)),
        )
    else:
        raise ConfigurationError(f"unknown initial-data kind {kind!r}")

    f = eq.m * u
    if not np.all(f > 0):
        raise ConfigurationError(f"{kind} initial data is not strictly positive")
    f = f / grid.integrate(f)
    return DensityField.from_values(f, eq)


# two-column text export -----------------------------------------------------


def save_profile(path, grid: Grid, values, name: str = "value") -> None:
    """Write (center, value) rows; 2-D grids get (x, y, value)."""
    values = grid.check(values)
    c = grid.centers.reshape(grid.size, -1)
    cols = ["x", "y"][: grid.ndim] + [name]
    np.savetxt(path, np.column_stack([c, values]), header=" ".join(cols), fmt="%.17g")


def load_profile(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, ndmin=2)
    return data[:, :-1].squeeze(), data[:, -1]

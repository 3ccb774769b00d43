"""Uniform cell-centred grids.

Three domain kinds are supported:

* ``periodic1d``  -- the unit interval [0, 1] with periodic closure,
* ``truncated1d`` -- [-L, L] with zero-flux (Neumann) walls,
* ``tensor2d``    -- the box [-L, L]^2 with zero-flux walls.

Cell values are always stored as flat arrays of length ``grid.size``; for
the 2-D grid the flattening is C-ordered over ``(ix, iy)``.  Faces are held
as index pairs ``(left, right)`` so that every discrete gradient, face mean
and divergence in the package goes through the same three helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

PERIODIC_1D = "periodic1d"
TRUNCATED_1D = "truncated1d"
TENSOR_2D = "tensor2d"
KINDS = (PERIODIC_1D, TRUNCATED_1D, TENSOR_2D)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    n_cells: int
    half_width: float | None
    h: tuple[float, ...]
    axes: tuple[np.ndarray, ...]
    centers: np.ndarray
    face_left: np.ndarray = field(repr=False)
    face_right: np.ndarray = field(repr=False)
    face_h: np.ndarray = field(repr=False)

    @property
    def ndim(self) -> int:
        return len(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_cells,) * self.ndim

    @property
    def size(self) -> int:
        return self.n_cells**self.ndim

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        if self.kind == PERIODIC_1D:
            return 1.0
        return (2.0 * self.half_width) ** self.ndim

    @property
    def periodic(self) -> bool:
        return self.kind == PERIODIC_1D

    @property
    def n_faces(self) -> int:
        return self.face_left.size

    @property
    def h_min(self) -> float:
        return min(self.h)

    def radius(self) -> np.ndarray:
        """Euclidean distance of each cell centre from the origin."""
        c = self.centers.reshape(self.size, -1)
        return np.sqrt(np.sum(c * c, axis=1))

    def check(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape == self.shape and self.ndim > 1:
            v = v.reshape(self.size)
        if v.shape != (self.size,):
            raise DimensionError(
                f"expected {self.size} cell values, got array of shape {v.shape}"
            )
        return v

    def integrate(self, values) -> float:
        """Midpoint quadrature: sum of cell values times the cell volume."""
        v = self.check(values)
        return float(np.sum(v) * self.cell_volume)

    def neighbors(self, i: int) -> list[int]:
        i = int(i)
        out = set(self.face_right[self.face_left == i].tolist())
        out.update(self.face_left[self.face_right == i].tolist())
        return sorted(out)

    # face machinery ---------------------------------------------------

    def face_difference(self, values: np.ndarray) -> np.ndarray:
        """(v_right - v_left) / h on every face."""
        return (values[self.face_right] - values[self.face_left]) / self.face_h

    def face_jump(self, values: np.ndarray) -> np.ndarray:
        return values[self.face_right] - values[self.face_left]

    def face_mean(self, values: np.ndarray) -> np.ndarray:
        return 0.5 * (values[self.face_left] + values[self.face_right])

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Discrete divergence of a face flux oriented from left to right cell.

        Zero-flux walls have no face entry, so they contribute nothing.
        """
        w = flux / self.face_h
        out = np.bincount(self.face_left, weights=w, minlength=self.size)
        out -= np.bincount(self.face_right, weights=w, minlength=self.size)
        return out

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


def _faces_1d(n: int, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    left = np.arange(n if periodic else n - 1)
    right = (left + 1) % n
    return left, right


def build_grid(kind: str, n_cells: int, L: float | None = None) -> Grid:
    """Build a uniform grid.

    Parameters
    ----------
    kind : {"periodic1d", "truncated1d", "tensor2d"}
    n_cells : int
        Number of cells per axis (at least 4).
    L : float, optional
        Half-width of the truncated domain; must be omitted for the periodic
        unit interval.
    """
    kind = str(kind).lower()
    if kind not in KINDS:
        raise ConfigurationError(f"unknown grid kind {kind!r}; expected one of {KINDS}")
    if isinstance(n_cells, bool) or int(n_cells) != n_cells:
        raise ConfigurationError("n_cells must be an integer")
    n = int(n_cells)
    if n < 4:
        raise ConfigurationError(f"n_cells must be at least 4, got {n}")

    if kind == PERIODIC_1D:
        if L is not None:
            raise ConfigurationError("half-width L is not allowed for the periodic grid")
        lo, length = 0.0, 1.0
    else:
        if L is None or not np.isfinite(L) or L <= 0:
            raise ConfigurationError(f"{kind} grid needs a positive half-width L, got {L}")
        L = float(L)
        lo, length = -L, 2.0 * L

    h = length / n
    axis = _frozen(lo + (np.arange(n) + 0.5) * h)
    left1, right1 = _faces_1d(n, kind == PERIODIC_1D)

    if kind == TENSOR_2D:
        idx = np.arange(n * n).reshape(n, n)
        # x-faces join (ix, iy) and (ix+1, iy); y-faces join (ix, iy) and (ix, iy+1)
        lx, rx = idx[left1, :].ravel(), idx[right1, :].ravel()
        ly, ry = idx[:, left1].ravel(), idx[:, right1].ravel()
        face_left = np.concatenate([lx, ly])
        face_right = np.concatenate([rx, ry])
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        centers = np.stack([X.ravel(), Y.ravel()], axis=1)
        hs = (h, h)
        axes = (axis, axis)
    else:
        face_left, face_right = left1, right1
        centers = axis
        hs = (h,)
        axes = (axis,)

    face_h = np.full(face_left.size, h)
    return Grid(
        kind=kind,
        n_cells=n,
        half_width=None if kind == PERIODIC_1D else L,
        h=hs,
        axes=axes,
        centers=_frozen(np.asarray(centers, dtype=float)),
        face_left=_frozen(face_left),
        face_right=_frozen(face_right),
        face_h=_frozen(face_h),
    )


def sub_box_mask(grid: Grid, radius: float) -> np.ndarray:
    """Cells whose centres lie in the box max_i |x_i| <= radius."""
    c = grid.centers.reshape(grid.size, -1)
    return np.all(np.abs(c) <= radius, axis=1)

"""Uniform cell-centred meshes on an interval or rectangle.

Fields are plain numpy arrays of cell averages with shape ``grid.shape``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Grid:
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        cells = tuple(int(n) for n in self.cells)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) not in (1, 2) or len(lengths) != len(cells):
            raise ValueError("grid must be 1D or 2D with one length and cell count per axis")
        if any(n < 4 for n in cells):
            raise ValueError(f"need at least 4 cells per axis, got {cells}")
        if any(not (L > 0) for L in lengths):
            raise ValueError(f"lengths must be positive, got {lengths}")

    @classmethod
    def interval(cls, length: float = 1.0, cells: int = 128) -> Grid:
        return cls((length,), (cells,))

    @classmethod
    def rectangle(cls, lx: float = 1.0, ly: float = 1.0, nx: int = 64, ny: int = 64) -> Grid:
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.h))

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates per axis, broadcast to ``shape``."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.h)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    # -- quadrature and norms -------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_measure)

    def sup_norm(self, f: np.ndarray) -> float:
        return float(np.max(np.abs(f)))

    def lp_integral(self, f: np.ndarray, p: float) -> float:
        """∫ f^p by cell-average quadrature."""
        if p < 1:
            raise ValueError("p must be at least 1")
        if float(p).is_integer():
            return self.integrate(f ** int(p))
        if np.any(f < 0):
            raise ValueError("negative values with a fractional exponent")
        return self.integrate(f**p)


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    grid: Grid

    def __post_init__(self):
        for name in ("u", "v", "w"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid expects {self.grid.shape}")
            setattr(self, name, arr)

    def copy(self) -> State:
        return State(self.t, self.u.copy(), self.v.copy(), self.w.copy(), self.grid)

    def min_value(self) -> float:
        return float(min(self.u.min(), self.v.min(), self.w.min()))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all() and np.isfinite(self.w).all())


# -- snapshot CSV -------------------------------------------------------------

_AXES = ("x", "y")


def snapshot_csv(state: State) -> str:
    """Serialise a state as CSV with header ``x[,y],u,v,w``, row-major over cells."""
    grid = state.grid
    coords = [c.ravel() for c in grid.centers()]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*_AXES[: grid.dim], "u", "v", "w"])
    cols = [*coords, state.u.ravel(), state.v.ravel(), state.w.ravel()]
    for row in zip(*cols):
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def write_snapshot(state: State, path: str | Path) -> None:
    Path(path).write_text(snapshot_csv(state))


def read_snapshot(path: str | Path, grid: Grid, t: float = 0.0) -> State:
    """Inverse of :func:`write_snapshot`; the file must match ``grid`` cell for cell."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = [*_AXES[: grid.dim], "u", "v", "w"]
        if [h.strip() for h in header] != expected:
            raise ValueError(f"snapshot header {header} does not match {expected}")
        rows = np.array([[float(x) for x in row] for row in reader if row])
    if rows.shape[0] != int(np.prod(grid.shape)):
        raise ValueError(f"snapshot has {rows.shape[0]} rows, grid has {int(np.prod(grid.shape))} cells")
    coords = [c.ravel() for c in grid.centers()]
    for k, c in enumerate(coords):
        if not np.allclose(rows[:, k], c, rtol=0, atol=1e-9 * max(grid.lengths)):
            raise ValueError(f"snapshot {_AXES[k]} coordinates do not match the grid cell centres")
    d = grid.dim
    u, v, w = (rows[:, d + k].reshape(grid.shape) for k in range(3))
    return State(t, u, v, w, grid)

"""Uniform 1D grids, nodal fields, norms, and the Neumann Laplacian.

The Laplacian uses the standard second-order centered stencil with
mirror-ghost closure (u[-1] = u[1], u[n] = u[n-2]) for homogeneous
Neumann boundaries.  That closure keeps the stencil second order at the
boundary rows and conserves the trapezoidal-weighted mass exactly, which
the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [x_min, x_max] with node i at x_min + i*dx."""

    x_min: float
    x_max: float
    n_points: int
    dx: float

    def nodes(self) -> np.ndarray:
        """Node coordinates, reproducible bit-exactly from (x_min, dx, i)."""
        return self.x_min + self.dx * np.arange(self.n_points)


@dataclass(frozen=True)
class GridField:
    """Immutable sampled function on a grid, one value per node."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has {arr.shape} values for a {self.grid.n_points}-point grid"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def with_values(self, values: np.ndarray) -> "GridField":
        """Fresh field on the same grid."""
        return GridField(self.grid, values)


def build_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    """Uniform grid covering [x_min, x_max] inclusive of both endpoints.

    Raises ValueError for non-finite bounds, x_max <= x_min, or fewer
    than 3 points.
    """
    if not (np.isfinite(x_min) and np.isfinite(x_max)):
        raise ValueError("grid bounds must be finite")
    if not x_max > x_min:
        raise ValueError("x_max must exceed x_min")
    n_points = int(n_points)
    if n_points < 3:
        raise ValueError("n_points must be at least 3")
    dx = (x_max - x_min) / (n_points - 1)
    return Grid(float(x_min), float(x_max), n_points, dx)


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Quadrature weights w_i with 1/2 at both endpoints, 1 inside."""
    w = np.ones(grid.n_points)
    w[0] = w[-1] = 0.5
    return w


def field_norms(u: GridField) -> tuple[float, float]:
    """(L2, Linf) of a field.

    L2 uses trapezoidal weights: sqrt(sum_i w_i u_i^2 dx); Linf is the
    nodal maximum of |u|.
    """
    v = u.values
    w = trapezoid_weights(u.grid)
    l2 = float(np.sqrt(np.sum(w * v * v) * u.grid.dx))
    linf = float(np.max(np.abs(v)))
    return l2, linf


def weighted_mass(u: GridField) -> float:
    """Trapezoidal-weighted integral sum_i w_i u_i dx."""
    return float(np.sum(trapezoid_weights(u.grid) * u.values) * u.grid.dx)


def nodal_gradient(u: GridField) -> np.ndarray:
    """Centered first differences; one-sided at the two boundary nodes."""
    v = u.values
    dx = u.grid.dx
    g = np.empty_like(v)
    g[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
    g[0] = (v[1] - v[0]) / dx
    g[-1] = (v[-1] - v[-2]) / dx
    return g


def gradient_max(u: GridField) -> float:
    """Max nodal |du/dx| from centered (interior) and one-sided (boundary)
    differences."""
    if u.grid.n_points < 3:
        raise ValueError("gradient needs at least 3 points")
    return float(np.max(np.abs(nodal_gradient(u))))


def laplacian_values(v: np.ndarray, dx: float) -> np.ndarray:
    """Stencil (v[i-1] - 2 v[i] + v[i+1]) / dx^2 with mirror ghosts."""
    out = np.empty_like(v)
    out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / dx**2
    out[0] = 2.0 * (v[1] - v[0]) / dx**2
    out[-1] = 2.0 * (v[-2] - v[-1]) / dx**2
    return out


def apply_laplacian(u: GridField, D: float) -> GridField:
    """D times the discrete Neumann Laplacian of u."""
    if D < 0:
        raise ValueError("diffusion coefficient must be nonnegative")
    return u.with_values(D * laplacian_values(u.values, u.grid.dx))


def second_derivative_max(u: GridField) -> float:
    """Max nodal |d2u/dx2| from the Laplacian stencil."""
    return float(np.max(np.abs(laplacian_values(u.values, u.grid.dx))))

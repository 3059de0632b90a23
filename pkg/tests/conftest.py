"""Shared fixtures and model factories for the test suite."""

import numpy as np
import pytest

from splitlab.flows import FlowTolerances, ReactionModel
from splitlab.grid import Grid, GridField, build_grid


def linear_model(lam: float, k: float = 1.0) -> ReactionModel:
    """f(u) = lam*u: flows commute exactly with diffusion (f'' = 0)."""
    return ReactionModel(
        k=k,
        f=lambda u: lam * np.asarray(u, dtype=float),
        f1=lambda u: np.full_like(np.asarray(u, dtype=float), lam),
        f2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        f3=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        f4=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
    )


def zero_model(k: float = 1.0) -> ReactionModel:
    """f identically zero: splitting is exact."""
    return linear_model(0.0, k)


def smooth_field(grid: Grid, coeffs, amplitude: float = 1.0,
                 offset: float = 0.0) -> GridField:
    """Low-wavenumber cosine combination: smooth, Neumann-compatible."""
    x = grid.nodes()
    length = grid.x_max - grid.x_min
    u = np.full(grid.n_points, float(offset))
    for j, c in enumerate(coeffs):
        u = u + amplitude * c * np.cos(j * np.pi * (x - grid.x_min) / length)
    return GridField(grid, u)


def random_smooth_field(grid: Grid, rng: np.random.Generator,
                        amplitude: float = 1.0, modes: int = 6,
                        offset: float = 0.0) -> GridField:
    return smooth_field(grid, rng.uniform(-1.0, 1.0, size=modes),
                        amplitude=amplitude, offset=offset)


@pytest.fixture
def unit_grid() -> Grid:
    return build_grid(0.0, 1.0, 101)


@pytest.fixture
def loose_tol() -> FlowTolerances:
    return FlowTolerances(abs_tol=1e-8, rel_tol=1e-8)

"""The three time flows: diffusion, pointwise reaction, and the coupled
quasi-exact reference.

All three are adaptive one-step integrators with per-step local error
control against a FlowTolerances contract:

* diffusion_flow   -- one-step implicit TR-BDF2 substeps (each stage one
                      direct tridiagonal solve; the sub-problem is linear)
                      with step-doubling error control; L-stable, so
                      unconditionally stable for the heat sub-problem.
* reaction_flow    -- per-node scalar ODE du/dt = k f(u) integrated with
                      a 3-stage, third-order, L-stable SDIRK scheme and
                      an embedded second-order error estimate; the scalar
                      Newton update is a single division.  Nodes are
                      independent; the numpy vectorization evaluates them
                      in lockstep.
* coupled_flow     -- TR-BDF2 (L-stable, order 2) with step doubling on
                      the full semi-discrete system; Newton systems are
                      tridiagonal-plus-diagonal and solved with a banded
                      LAPACK factorization.  The accepted value is the
                      Richardson-extrapolated pair (locally third order);
                      the extrapolated stability function stays below 1
                      in modulus on the whole negative real axis.

No flow uses splitting internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import solve_banded

from .grid import GridField, laplacian_values

__all__ = [
    "ReactionModel",
    "FlowTolerances",
    "DiffusionCoefficient",
    "ConvergenceError",
    "diffusion_flow",
    "reaction_flow",
    "coupled_flow",
]


class ConvergenceError(RuntimeError):
    """An adaptive sub-integration failed to meet its tolerance contract."""


@dataclass(frozen=True)
class ReactionModel:
    """Nonlinearity f with derivatives up to order 4 and rate coefficient k.

    The flow integrates du/dt = k*f(u); f and f1..f4 are the *unscaled*
    f, f', f'', f''', f'''' and must accept numpy arrays.  Models are
    expected to satisfy f(0) = 0; dissipativity (r*f(r) <= 0 outside
    [-R, R]) is required only by the a-priori-bound guarantees, not by
    the integrators.
    """

    k: float
    f: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    f3: Callable[[np.ndarray], np.ndarray]
    f4: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k >= 0):
            raise ValueError("rate coefficient k must be finite and >= 0")


@dataclass(frozen=True)
class DiffusionCoefficient:
    """Strictly positive scalar diffusion coefficient."""

    D: float

    def __post_init__(self):
        if not (np.isfinite(self.D) and self.D > 0):
            raise ValueError("diffusion coefficient must be finite and positive")


@dataclass(frozen=True)
class FlowTolerances:
    """Accuracy contract for one sub-flow integration.

    abs_tol/rel_tol weight the local error estimate of every accepted
    step: max_i |err_i| / (abs_tol + rel_tol |u_i|) <= 1.  max_substeps
    caps the total number of attempted steps before the flow gives up.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_substeps: int = 1_000_000

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_substeps < 1:
            raise ValueError("max_substeps must be positive")


_Diffusion = Union[DiffusionCoefficient, float]


def _dcoeff(D: _Diffusion) -> float:
    d = D.D if isinstance(D, DiffusionCoefficient) else float(D)
    if not (np.isfinite(d) and d > 0):
        raise ValueError("diffusion coefficient must be finite and positive")
    return d


def _check_time(t: float) -> float:
    if not (np.isfinite(t) and t >= 0):
        raise ValueError("flow time must be finite and >= 0")
    return float(t)


def _step_factor(est: float, order: int) -> float:
    """Step-size update factor from a scaled error estimate (accept at 1)."""
    return min(5.0, max(0.2, 0.9 * (1.0 / max(est, 1e-16)) ** (1.0 / (order + 1))))


# --------------------------------------------------------------------------
# diffusion: TR-BDF2 with step doubling (linear stages, direct solves)
# --------------------------------------------------------------------------

_TRB_GAMMA = 2.0 - np.sqrt(2.0)


def _implicit_matrix(n: int, dx: float, coeff: float) -> np.ndarray:
    """(I - coeff*L) in solve_banded (1,1) layout, L = Neumann Laplacian."""
    c = coeff / dx**2
    ab = np.zeros((3, n))
    ab[1] = 1.0 + 2.0 * c
    ab[0, 1:] = -c
    ab[0, 1] = -2.0 * c      # row 0, mirror ghost
    ab[2, :-1] = -c
    ab[2, -2] = -2.0 * c     # row n-1, mirror ghost
    return ab


def _heat_step(v: np.ndarray, h: float, dx: float, D: float) -> np.ndarray:
    """One TR-BDF2 step of du/dt = D*L*u; two tridiagonal solves."""
    g = _TRB_GAMMA
    n = v.shape[0]
    a1 = 0.5 * g * h
    rhs = v + a1 * D * laplacian_values(v, dx)
    mid = solve_banded((1, 1), _implicit_matrix(n, dx, a1 * D), rhs)
    w1 = 1.0 / (g * (2.0 - g))
    w0 = (1.0 - g) ** 2 / (g * (2.0 - g))
    a2 = (1.0 - g) / (2.0 - g) * h
    return solve_banded((1, 1), _implicit_matrix(n, dx, a2 * D),
                        w1 * mid - w0 * v)


def diffusion_flow(u0: GridField, t: float, D: _Diffusion,
                   tol: FlowTolerances = FlowTolerances()) -> GridField:
    """Heat sub-flow: integrate du/dt = D*L*u over [0, t].

    L-stable TR-BDF2 substeps with step-doubling control; the accepted
    value is the Richardson extrapolation of the (h, h/2) pair, so the
    realized error runs well below the per-step estimate that is checked
    against the tolerance contract.  t = 0 returns u0.
    """
    t = _check_time(t)
    if t == 0.0:
        return u0.with_values(u0.values)
    d = _dcoeff(D)
    dx = u0.grid.dx
    u = np.array(u0.values)
    remaining = t
    h = t
    attempts = 0
    while remaining > 0.0:
        if attempts >= tol.max_substeps:
            raise ConvergenceError(
                f"diffusion flow: {tol.max_substeps} substeps exhausted with "
                f"{remaining:.3e} of {t:.3e} left")
        attempts += 1
        if h >= remaining:
            h = remaining
        coarse = _heat_step(u, h, dx, d)
        half = _heat_step(u, 0.5 * h, dx, d)
        fine = _heat_step(half, 0.5 * h, dx, d)
        scale = tol.abs_tol + tol.rel_tol * np.abs(u)
        est = float(np.max(np.abs(fine - coarse) / scale)) / 3.0
        if est <= 1.0:
            u = fine + (fine - coarse) / 3.0
            remaining = 0.0 if h == remaining else remaining - h
        h *= _step_factor(est, 2)
    return u0.with_values(u)


# --------------------------------------------------------------------------
# reaction: vectorized scalar SDIRK3 with embedded estimate
# --------------------------------------------------------------------------

# 3-stage L-stable SDIRK, gamma the root of x^3 - 3x^2 + 3x/2 - 1/6 in (0,1);
# last row equals b (stiffly accurate).  Embedded weights solve the order-2
# conditions with a zero last stage.
_GAMMA = 0.4358665215084590
_A21 = (1.0 - _GAMMA) / 2.0
_B1 = -(6.0 * _GAMMA**2 - 16.0 * _GAMMA + 1.0) / 4.0
_B2 = (6.0 * _GAMMA**2 - 20.0 * _GAMMA + 5.0) / 4.0
_BH2 = (1.0 - 2.0 * _GAMMA) / (1.0 - _GAMMA)
_BH1 = 1.0 - _BH2

_NEWTON_MAX_ITER = 25
_NEWTON_SLACK = 0.1


def _scalar_stage(z0: np.ndarray, base: np.ndarray, hg: float,
                  model: ReactionModel, tol: FlowTolerances):
    """Solve Z = base + hg*k*f(Z) nodewise by Newton; returns (Z, converged)."""
    Z = z0.copy()
    k = model.k
    for _ in range(_NEWTON_MAX_ITER):
        G = Z - base - hg * k * model.f(Z)
        den = 1.0 - hg * k * model.f1(Z)
        if np.any(np.abs(den) < 1e-12) or not np.all(np.isfinite(G)):
            return Z, False
        dZ = -G / den
        Z = Z + dZ
        bound = _NEWTON_SLACK * (tol.abs_tol + tol.rel_tol * np.abs(Z))
        if np.all(np.abs(dZ) <= bound):
            return Z, True
    return Z, False


def _sdirk3_step(u: np.ndarray, h: float, model: ReactionModel,
                 tol: FlowTolerances):
    hg = h * _GAMMA
    k = model.k
    Z1, ok1 = _scalar_stage(u, u, hg, model, tol)
    if not ok1:
        return None
    F1 = k * model.f(Z1)
    Z2, ok2 = _scalar_stage(Z1, u + h * _A21 * F1, hg, model, tol)
    if not ok2:
        return None
    F2 = k * model.f(Z2)
    Z3, ok3 = _scalar_stage(Z2, u + h * (_B1 * F1 + _B2 * F2), hg, model, tol)
    if not ok3:
        return None
    F3 = k * model.f(Z3)
    unew = u + h * (_B1 * F1 + _B2 * F2 + _GAMMA * F3)
    err = h * ((_B1 - _BH1) * F1 + (_B2 - _BH2) * F2 + _GAMMA * F3)
    return unew, err


def reaction_flow(u0: GridField, t: float, model: ReactionModel,
                  tol: FlowTolerances = FlowTolerances()) -> GridField:
    """Reaction sub-flow: per node, integrate du/dt = k f(u) over [0, t].

    Third-order L-stable SDIRK substeps with an embedded second-order
    error estimate; adaptive sub-stepping to the tolerance contract.
    Newton divergence triggers substep halving; exhausting the retries
    reports the worst node index.
    """
    t = _check_time(t)
    if t == 0.0:
        return u0.with_values(u0.values)
    u = np.array(u0.values)
    k = model.k
    lip = k * float(np.max(np.abs(model.f1(u)))) if k > 0 else 0.0
    h = min(t, 0.1 / lip) if lip > 0 else t
    remaining = t
    attempts = 0
    halvings = 0
    while remaining > 0.0:
        if attempts >= tol.max_substeps:
            raise ConvergenceError(
                f"reaction flow: {tol.max_substeps} substeps exhausted with "
                f"{remaining:.3e} of {t:.3e} left")
        attempts += 1
        if h >= remaining:
            h = remaining
        result = _sdirk3_step(u, h, model, tol)
        if result is None:
            halvings += 1
            if halvings > 60 or h < 1e-14 * t:
                worst = int(np.argmax(np.abs(k * model.f(u))))
                raise ConvergenceError(
                    f"reaction flow: Newton diverged at node {worst} "
                    f"(substep {h:.3e} after {halvings} halvings)")
            h *= 0.5
            continue
        unew, err = result
        scale = tol.abs_tol + tol.rel_tol * np.abs(u)
        est = float(np.max(np.abs(err) / scale))
        if est <= 1.0:
            u = unew
            remaining = 0.0 if h == remaining else remaining - h
            halvings = 0
        h *= _step_factor(est, 2)
    return u0.with_values(u)


# --------------------------------------------------------------------------
# coupled reference: TR-BDF2 with step doubling
# --------------------------------------------------------------------------

def _coupled_rhs(v: np.ndarray, dx: float, d: float, model: ReactionModel):
    return d * laplacian_values(v, dx) + model.k * model.f(v)


def _implicit_solve(z0: np.ndarray, const: np.ndarray, a: float, dx: float,
                    d: float, model: ReactionModel, tol: FlowTolerances):
    """Newton-solve Z - a*(D*L*Z + k f(Z)) = const; tridiagonal-plus-diagonal
    Jacobian, banded factorization each iteration."""
    Z = z0.copy()
    n = Z.shape[0]
    k = model.k
    for _ in range(_NEWTON_MAX_ITER):
        G = Z - a * _coupled_rhs(Z, dx, d, model) - const
        if not np.all(np.isfinite(G)):
            return Z, False
        ab = _implicit_matrix(n, dx, a * d)
        ab[1] -= a * k * model.f1(Z)
        dZ = solve_banded((1, 1), ab, -G)
        Z = Z + dZ
        bound = _NEWTON_SLACK * (tol.abs_tol + tol.rel_tol * np.abs(Z))
        if np.all(np.abs(dZ) <= bound):
            return Z, True
    return Z, False


def _trbdf2_step(u: np.ndarray, h: float, dx: float, d: float,
                 model: ReactionModel, tol: FlowTolerances):
    g = _TRB_GAMMA
    a1 = 0.5 * g * h
    mid, ok = _implicit_solve(u, u + a1 * _coupled_rhs(u, dx, d, model),
                              a1, dx, d, model, tol)
    if not ok:
        return None
    w1 = 1.0 / (g * (2.0 - g))
    w0 = (1.0 - g) ** 2 / (g * (2.0 - g))
    a2 = (1.0 - g) / (2.0 - g) * h
    out, ok = _implicit_solve(mid, w1 * mid - w0 * u, a2, dx, d, model, tol)
    return out if ok else None


def coupled_flow(u0: GridField, t: float, model: ReactionModel, D: _Diffusion,
                 tol: FlowTolerances = FlowTolerances()) -> GridField:
    """Quasi-exact reference: integrate du/dt = D*L*u + k f(u) as one
    coupled stiff system over [0, t].  No splitting is used internally.

    TR-BDF2 with step doubling; the accepted value is the Richardson
    extrapolation of the (h, h/2) pair.  Raises ConvergenceError on
    Newton failure cascades, substep exhaustion, or step-size underflow
    below 1e-14*t.
    """
    t = _check_time(t)
    if t == 0.0:
        return u0.with_values(u0.values)
    d = _dcoeff(D)
    dx = u0.grid.dx
    u = np.array(u0.values)
    remaining = t
    h = min(t, 0.01 / max(model.k, 1.0))
    attempts = 0
    while remaining > 0.0:
        if attempts >= tol.max_substeps:
            raise ConvergenceError(
                f"coupled flow: {tol.max_substeps} substeps exhausted with "
                f"{remaining:.3e} of {t:.3e} left")
        if h < 1e-14 * t:
            raise ConvergenceError(
                f"coupled flow: step size underflow ({h:.3e} < 1e-14*t)")
        attempts += 1
        if h >= remaining:
            h = remaining
        coarse = _trbdf2_step(u, h, dx, d, model, tol)
        half = None if coarse is None else _trbdf2_step(u, 0.5 * h, dx, d, model, tol)
        fine = None if half is None else _trbdf2_step(half, 0.5 * h, dx, d, model, tol)
        if fine is None:
            h *= 0.5
            continue
        scale = tol.abs_tol + tol.rel_tol * np.abs(u)
        est = float(np.max(np.abs(fine - coarse) / scale)) / 3.0
        if est <= 1.0:
            u = fine + (fine - coarse) / 3.0
            remaining = 0.0 if h == remaining else remaining - h
        h *= _step_factor(est, 2)
    return u0.with_values(u)

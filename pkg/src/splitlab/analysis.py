"""Error studies, slope fitting, theoretical bound evaluation, the
commutator diagnostic field, and wavefront speed estimation.

Local-error studies measure ||T^dt u0 - scheme^dt u0|| against the
coupled quasi-exact reference, attach the evaluated bound set to every
row, and fit log-log slopes over dt windows.  The bound families:

* Lie classical:      C t^2  e^(2kt||f'||) (order 2)
* Lie alternative:    C t^1.5 (both schemes) and C t (reaction-last
                      scheme only), from the heat-flow regularization
                      ||d/dx X^t u|| <= ||u|| / sqrt(pi D t)
* Strang classical:   multi-term order-3 bounds (double commutators)
* Strang alternative: regularized bounds of order 1 (diffusion-last) and
                      1.5 (reaction-last)

General (k, D) enter the Strang formulas through the dimensionless
variables tau = k t, r = sqrt(k/D) x; the same substitution reproduces
the printed k-D scaling of the Lie bounds exactly.  Exponential factors
are allowed to saturate to +inf in double precision for very stiff
configurations (k dt ||f'|| of order 350+); entries then compare as
vacuously large.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import flows, splitting
from .flows import ConvergenceError, FlowTolerances, ReactionModel, _dcoeff
from .grid import GridField, field_norms, gradient_max, nodal_gradient, \
    second_derivative_max
from .kpp import DerivativeSupNorms, derivative_sup_norms
from .splitting import SchemeId

__all__ = [
    "BoundSet",
    "StudyRow",
    "ErrorStudyReport",
    "local_error_study",
    "global_error_study",
    "fit_slope",
    "evaluate_bounds",
    "front_location",
    "lie_bracket_field",
    "leading_term_check",
    "wave_speed_estimate",
]

_Tol = Union[FlowTolerances, float]


def _as_tolerances(tol: _Tol) -> FlowTolerances:
    if isinstance(tol, FlowTolerances):
        return tol
    return FlowTolerances(abs_tol=float(tol), rel_tol=float(tol))


def _check_tolerance_separation(tol_split: FlowTolerances,
                                tol_ref: FlowTolerances) -> None:
    if tol_ref.abs_tol > tol_split.abs_tol / 100.0 or \
            tol_ref.rel_tol > tol_split.rel_tol / 100.0:
        raise ValueError(
            "reference tolerance must be at least 100x finer than the "
            "splitting tolerance so the reference dominates in accuracy")


def _worker_count() -> int:
    raw = os.environ.get("SPLITLAB_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(
            f"SPLITLAB_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("SPLITLAB_THREADS must be >= 1")
    return value


def _ordered_map(fn, items: Sequence):
    """Map preserving input order; threads capped by SPLITLAB_THREADS."""
    workers = min(_worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# bound evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundSet:
    """Evaluated theoretical bound values for one scheme and step size.

    Entries not applicable to the scheme stay at +inf; `effective` is the
    minimum over the populated entries.
    """

    classical: float = math.inf
    alt_15: float = math.inf
    alt_1: float = math.inf
    strang_classical: float = math.inf
    strang_alt: float = math.inf

    @property
    def effective(self) -> float:
        return min(self.classical, self.alt_15, self.alt_1,
                   self.strang_classical, self.strang_alt)


def evaluate_bounds(scheme: SchemeId, dt: float, model: ReactionModel,
                    D, u0: GridField,
                    sup_norms: Optional[DerivativeSupNorms] = None) -> BoundSet:
    """Evaluate every bound applicable to the scheme at step size dt.

    kappa = max(||u0||_inf, 1); ||f^(n)|| are sups over [-kappa, kappa];
    ||du0/dx|| and ||d2u0/dx2|| come from grid finite differences.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    d = _dcoeff(D)
    k = model.k
    _, linf = field_norms(u0)
    kappa = max(linf, 1.0)
    sup = sup_norms if sup_norms is not None else derivative_sup_norms(model, kappa)
    if sup.kappa < kappa:
        raise ValueError("sup_norms were computed for a smaller kappa than u0 needs")
    f0, f1n, f2n, f3n, f4n = (sup.norm_f, sup.norm_f1, sup.norm_f2,
                              sup.norm_f3, sup.norm_f4)
    gm = gradient_max(u0)
    u_inf = linf

    with np.errstate(over="ignore"):
        if scheme in (SchemeId.L1, SchemeId.L2):
            e1 = math.exp(min(k * dt * f1n, 745.0)) if k * dt * f1n < 745 else math.inf
            e2 = math.exp(min(2.0 * k * dt * f1n, 745.0)) \
                if 2.0 * k * dt * f1n < 745 else math.inf
            classical = (k * d * dt**2 / 2.0) * e2 * f2n * gm**2
            if scheme is SchemeId.L1:
                alt_15 = (4.0 * kappa * k * d * dt**1.5
                          / (3.0 * math.sqrt(math.pi * d))) * e1 * f2n * gm
                return BoundSet(classical=classical, alt_15=alt_15)
            alt_15 = (2.0 * k * d * dt**1.5
                      / (3.0 * math.sqrt(math.pi * d))) * e2 * f2n * u_inf * gm
            alt_1 = (k * dt / math.pi) * e2 * f2n * u_inf**2
            return BoundSet(classical=classical, alt_15=alt_15, alt_1=alt_1)

        # Strang: evaluate in dimensionless variables tau = k t,
        # r = sqrt(k/D) x (reduces to the unit-coefficient statements).
        tau = k * dt
        g1 = math.sqrt(d / k) * gm if k > 0 else 0.0
        g2 = (d / k) * second_derivative_max(u0) if k > 0 else 0.0
        pi = math.pi

        def ex(c: float) -> float:
            arg = c * tau * f1n
            return math.exp(arg) if arg < 745 else math.inf

        mixed = f1n * f2n + f0 * f3n
        if scheme is SchemeId.S1:
            strang_classical = (
                (tau**3 * f4n / 24.0 + tau**4 * f3n * f2n / 8.0
                 + tau**5 * f2n**3 / 20.0) * ex(4.0) * g1**4
                + (tau**3 * f3n / 6.0 + tau**4 * f2n**2 / 8.0) * ex(3.0)
                * g1**2 * g2
                + (tau**3 / 12.0) * ex(2.0) * f2n * g2**2
                + (tau**3 / 12.0) * ex(2.0) * mixed * g1**2
            )
            strang_alt = (
                (tau / (2.0 * pi**2)) * ex(4.0)
                * (f4n * u_inf**4 + 4.0 * pi * f3n * u_inf**3
                   + 2.0 * pi**2 * f2n * u_inf**2)
                + (tau**2 / pi**2) * ex(4.0)
                * (f3n * f2n * u_inf**4 + pi * f2n**2 * u_inf**3)
                + (tau**2 / (4.0 * pi)) * ex(2.0) * mixed * u_inf**2
                + (tau**3 / (3.0 * pi**2)) * ex(4.0) * f2n**3 * u_inf**4
            )
            return BoundSet(strang_classical=strang_classical,
                            strang_alt=strang_alt)

        strang_classical = (
            (tau**3 * f4n / 12.0 + tau**4 * f3n * f2n / 8.0
             + tau**5 * f2n**3 / 40.0) * ex(2.5) * g1**4
            + (tau**3 * f3n / 3.0 + tau**4 * f2n**2 / 8.0) * ex(2.0)
            * g1**2 * g2
            + (tau**3 / 6.0) * ex(1.5) * f2n * g2**2
            + (tau**3 / 24.0) * ex(2.0) * mixed * g1**2
        )
        strang_alt = (
            (kappa * tau**1.5 / (3.0 * pi**1.5)) * ex(1.0)
            * (2.0 * kappa**2 * f4n + 8.0 * pi * kappa * f3n + 4.0 * pi * f2n)
            * g1
            + (kappa**2 * tau**2 / (16.0 * pi)) * ex(1.5) * mixed
        )
        return BoundSet(strang_classical=strang_classical, strang_alt=strang_alt)


# --------------------------------------------------------------------------
# study reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyRow:
    """One (dt, error) measurement; bounds attached for local studies."""

    dt: float
    err_l2: float
    err_linf: float
    bounds: Optional[BoundSet]
    status: str = "ok"

    @property
    def valid(self) -> bool:
        return self.status == "ok"


@dataclass
class ErrorStudyReport:
    """Table of error measurements for one scheme, sorted by dt."""

    scheme: SchemeId
    rows: list[StudyRow]
    t_eval: Optional[float] = None
    fitted_slopes: list[tuple[tuple[float, float], float]] = field(
        default_factory=list)


def fit_slope(report: ErrorStudyReport, dt_window: tuple[float, float]) -> float:
    """Least-squares slope of log(err_l2) vs log(dt) over rows inside the
    window; needs at least 3 valid rows with nonzero error."""
    lo, hi = dt_window
    pts = [(r.dt, r.err_l2) for r in report.rows
           if r.valid and r.err_l2 > 0.0 and lo <= r.dt <= hi]
    if len(pts) < 3:
        raise ValueError(
            f"slope fit needs >= 3 valid rows in [{lo:g}, {hi:g}], "
            f"found {len(pts)}")
    ld = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    return float(np.polyfit(ld, le, 1)[0])


def _default_windows(k: float, dts: Sequence[float]) -> list[tuple[float, float]]:
    """Report convenience windows: asymptotic below 1/(20 k), order-reduction
    onset over [0.5/k, 10/k]; clipped to the tested grid."""
    if k <= 0:
        return [(min(dts), max(dts))]
    out = []
    asym_hi = min(0.05 / k, max(dts))
    if asym_hi > min(dts):
        out.append((min(dts), asym_hi))
    red_lo, red_hi = 0.5 / k, min(10.0 / k, max(dts))
    if red_hi > red_lo and red_lo < max(dts):
        out.append((max(red_lo, min(dts)), red_hi))
    return out


def _attach_slopes(report: ErrorStudyReport, windows) -> None:
    for window in windows:
        try:
            report.fitted_slopes.append((window, fit_slope(report, window)))
        except ValueError:
            continue


def local_error_study(u0: GridField, dt_list: Iterable[float],
                      schemes: Sequence[SchemeId], model: ReactionModel, D,
                      tol_split: _Tol, tol_ref: _Tol) -> list[ErrorStudyReport]:
    """Measure one-step errors against the coupled reference for each
    scheme and dt; attach evaluated bounds and default fitted slopes.

    The reference is computed once per dt and shared across schemes.
    Solver failures mark the affected row invalid instead of aborting.
    Distinct dt rows may run in parallel (SPLITLAB_THREADS).
    """
    tol_split = _as_tolerances(tol_split)
    tol_ref = _as_tolerances(tol_ref)
    _check_tolerance_separation(tol_split, tol_ref)
    dts = sorted(float(dt) for dt in dt_list)
    if not dts or dts[0] <= 0:
        raise ValueError("dt_list must be nonempty and positive")
    schemes = list(schemes)
    kappa = max(field_norms(u0)[1], 1.0)
    sup = derivative_sup_norms(model, kappa)

    def one_dt(dt: float):
        try:
            ref = flows.coupled_flow(u0, dt, model, D, tol_ref)
        except ConvergenceError as exc:
            return {s: (math.nan, math.nan, f"failed: reference: {exc}")
                    for s in schemes}
        results = {}
        for s in schemes:
            try:
                approx = splitting.split_step(u0, dt, s, model, D, tol_split)
                diff = u0.with_values(approx.values - ref.values)
                l2, linf = field_norms(diff)
                results[s] = (l2, linf, "ok")
            except ConvergenceError as exc:
                results[s] = (math.nan, math.nan, f"failed: {exc}")
        return results

    per_dt = _ordered_map(one_dt, dts)
    reports = []
    for s in schemes:
        rows = []
        for dt, res in zip(dts, per_dt):
            l2, linf, status = res[s]
            bounds = evaluate_bounds(s, dt, model, D, u0, sup_norms=sup)
            rows.append(StudyRow(dt, l2, linf, bounds, status))
        report = ErrorStudyReport(s, rows)
        _attach_slopes(report, _default_windows(model.k, dts))
        reports.append(report)
    return reports


def global_error_study(u0: GridField, dt_list: Iterable[float], scheme: SchemeId,
                       t_final: float, model: ReactionModel, D,
                       tol_split: _Tol, tol_ref: _Tol) -> ErrorStudyReport:
    """Measure ||T^t_final u0 - (scheme^dt)^n u0|| for each dt dividing
    t_final; the reference is computed once at the finer tolerance.

    Rows carry no bound set: the theoretical bounds are one-step (local)
    statements.
    """
    tol_split = _as_tolerances(tol_split)
    tol_ref = _as_tolerances(tol_ref)
    _check_tolerance_separation(tol_split, tol_ref)
    dts = sorted(float(dt) for dt in dt_list)
    if not dts or dts[0] <= 0:
        raise ValueError("dt_list must be nonempty and positive")
    for dt in dts:
        splitting._integer_step_count(t_final, dt)
    ref = flows.coupled_flow(u0, t_final, model, D, tol_ref)

    def one_dt(dt: float) -> StudyRow:
        try:
            approx = splitting.evolve(u0, t_final, dt, scheme, model, D, tol_split)
            diff = u0.with_values(approx.values - ref.values)
            l2, linf = field_norms(diff)
            return StudyRow(dt, l2, linf, None)
        except ConvergenceError as exc:
            return StudyRow(dt, math.nan, math.nan, None, f"failed: {exc}")

    rows = _ordered_map(one_dt, dts)
    report = ErrorStudyReport(scheme, list(rows), t_eval=float(t_final))
    _attach_slopes(report, [(dts[0], dts[-1])])
    return report


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

def lie_bracket_field(model: ReactionModel, u: GridField, D) -> GridField:
    """Commutator diagnostic k D f''(u) (du/dx)^2, the field whose size
    controls the leading splitting error; centered nodal gradient."""
    d = _dcoeff(D)
    g = nodal_gradient(u)
    return u.with_values(model.k * d * model.f2(u.values) * g * g)


def leading_term_check(u0: GridField, dt_list: Iterable[float],
                       model: ReactionModel, D, tol: _Tol
                       ) -> list[tuple[float, float]]:
    """Remainder of the local-error expansion for the reaction-first Lie
    scheme: T^dt u0 - L1^dt u0 = -(dt^2/2) bracket(u0) + O(dt^3).

    Returns (dt, L2 norm of the remainder) pairs; in the asymptotic
    regime the remainder decays at order >= 2.5.  Requires
    dt * k * ||f'|| < 0.1 for every dt.
    """
    tol = _as_tolerances(tol)
    dts = sorted(float(dt) for dt in dt_list)
    if dts and dts[0] < 0:
        raise ValueError("dt values must be >= 0")
    kappa = max(field_norms(u0)[1], 1.0)
    f1n = derivative_sup_norms(model, kappa).norm_f1
    if dts and dts[-1] * model.k * f1n >= 0.1:
        raise ValueError(
            f"dt={dts[-1]:g} is outside the asymptotic regime "
            f"(dt k ||f'|| = {dts[-1] * model.k * f1n:g} >= 0.1)")
    tol_ref = FlowTolerances(abs_tol=tol.abs_tol / 100.0,
                             rel_tol=tol.rel_tol / 100.0,
                             max_substeps=tol.max_substeps)
    bracket = lie_bracket_field(model, u0, D).values

    def one_dt(dt: float) -> tuple[float, float]:
        if dt == 0.0:
            return 0.0, 0.0
        ref = flows.coupled_flow(u0, dt, model, D, tol_ref)
        lie = splitting.split_step(u0, dt, SchemeId.L1, model, D, tol)
        remainder = (ref.values - lie.values) + (dt**2 / 2.0) * bracket
        l2, _ = field_norms(u0.with_values(remainder))
        return dt, l2

    return _ordered_map(one_dt, dts)


def front_location(u: GridField, level: float) -> float:
    """Unique level-crossing location, linearly interpolated between the
    bracketing nodes; raises if the field misses the level or crosses it
    more than once."""
    v = u.values - level
    sign_change = np.nonzero(v[:-1] * v[1:] <= 0.0)[0]
    # an exact zero at a shared node counts twice; merge adjacent hits
    crossings = [i for j, i in enumerate(sign_change)
                 if j == 0 or i > sign_change[j - 1] + 1]
    if len(crossings) == 0:
        raise ValueError(f"field never crosses level {level:g}")
    if len(crossings) > 1:
        raise ValueError(f"field crosses level {level:g} more than once")
    i = crossings[0]
    x0 = u.grid.x_min + u.grid.dx * i
    if v[i + 1] == v[i]:
        return float(x0)
    return float(x0 + u.grid.dx * (-v[i]) / (v[i + 1] - v[i]))


def wave_speed_estimate(snapshots: Sequence[tuple[float, GridField]],
                        level: float) -> float:
    """Front speed: least-squares slope of the level-crossing location
    versus time.

    Every snapshot must cross the level exactly once (monotone front).
    """
    if len(snapshots) < 2:
        raise ValueError("wave speed needs at least 2 snapshots")
    times, locations = [], []
    for t, u in snapshots:
        try:
            locations.append(front_location(u, level))
        except ValueError as exc:
            raise ValueError(f"snapshot at t={t:g}: {exc}") from None
        times.append(t)
    return float(np.polyfit(times, locations, 1)[0])

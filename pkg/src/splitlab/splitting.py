"""Lie and Strang splitting schemes and the multi-step evolution driver.

Scheme compositions (right-to-left on the initial field, X = diffusion,
Y = reaction):

    L1 = X^t Y^t          reaction first, diffusion last
    L2 = Y^t X^t          diffusion first, reaction last
    S1 = X^(t/2) Y^t X^(t/2)
    S2 = Y^(t/2) X^t Y^(t/2)
"""

from __future__ import annotations

import enum
from typing import Callable, Optional

import numpy as np

from . import flows
from .flows import ConvergenceError, FlowTolerances, ReactionModel, _Diffusion
from .grid import GridField

__all__ = ["SchemeId", "split_step", "evolve"]


class SchemeId(enum.Enum):
    """One of the four splitting schemes."""

    L1 = "L1"
    L2 = "L2"
    S1 = "S1"
    S2 = "S2"

    @property
    def stages(self) -> tuple[tuple[str, float], ...]:
        """Sub-flow program as (operator, fraction-of-dt) pairs, applied
        left to right to the evolving field."""
        return _STAGES[self]

    @classmethod
    def parse(cls, tag: str) -> "SchemeId":
        try:
            return cls[tag.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown scheme {tag!r}; expected one of "
                             "L1, L2, S1, S2") from None


_STAGES = {
    SchemeId.L1: (("Y", 1.0), ("X", 1.0)),
    SchemeId.L2: (("X", 1.0), ("Y", 1.0)),
    SchemeId.S1: (("X", 0.5), ("Y", 1.0), ("X", 0.5)),
    SchemeId.S2: (("Y", 0.5), ("X", 1.0), ("Y", 0.5)),
}


def split_step(u0: GridField, dt: float, scheme: SchemeId, model: ReactionModel,
               D: _Diffusion, tol: FlowTolerances = FlowTolerances()) -> GridField:
    """One splitting step: the exact sub-flow composition of the scheme,
    each sub-flow solved to the same tolerance contract.

    dt = 0 returns u0.  Sub-flow failures are re-raised annotated with
    the failing sub-stage.
    """
    if dt < 0:
        raise ValueError("splitting step must be >= 0")
    u = u0
    for index, (op, fraction) in enumerate(scheme.stages):
        try:
            if op == "Y":
                u = flows.reaction_flow(u, fraction * dt, model, tol)
            else:
                u = flows.diffusion_flow(u, fraction * dt, D, tol)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"{scheme.value} stage {index + 1}/{len(scheme.stages)} "
                f"({'reaction' if op == 'Y' else 'diffusion'} over "
                f"{fraction * dt:.3e}): {exc}") from exc
    return u


def _integer_step_count(t_final: float, dt: float) -> int:
    """t_final/dt as an exact integer, allowing a few ulp of division
    rounding; raises on genuine non-divisors."""
    q = t_final / dt
    n = round(q)
    if n < 1 or abs(q - n) > 8.0 * np.finfo(float).eps * max(abs(q), 1.0):
        raise ValueError(
            f"t_final/dt = {q!r} is not an integer step count")
    return int(n)


def evolve(u0: GridField, t_final: float, dt: float, scheme: SchemeId,
           model: ReactionModel, D: _Diffusion,
           tol: FlowTolerances = FlowTolerances(),
           observer: Optional[Callable[[int, float, GridField], None]] = None,
           ) -> GridField:
    """Apply split_step n = t_final/dt times; n must be an integer.

    The observer, if given, receives (step index, time, field) after
    each step, with index starting at 1.
    """
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if t_final == 0:
        return u0.with_values(u0.values)
    n = _integer_step_count(t_final, dt)
    u = u0
    for i in range(1, n + 1):
        u = split_step(u, dt, scheme, model, D, tol)
        if observer is not None:
            observer(i, i * dt, u)
    return u

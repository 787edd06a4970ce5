"""Evolution of the nonmonotonicity allowance nu_k.

Configuration dataclasses live in ``core``; this module carries strategy
state through the solver loop and provides post-hoc verifiers for the
summability and step-domination properties a finished trace may be expected
to satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .core import (
    DirectNu,
    GrippoNu,
    InvariantViolation,
    NuStrategy,
    RatioNu,
    ZeroNu,
    ZhangHagerNu,
)

__all__ = [
    "DirectState",
    "ZhangHagerState",
    "GrippoState",
    "NuState",
    "nu_init",
    "first_step_nu",
    "nu_next",
    "SummabilityReport",
    "verify_summability",
    "step_domination_start",
]

_BUDGET_SLACK = 1e-10


@dataclass(frozen=True)
class DirectState:
    nu_prev: float


@dataclass(frozen=True)
class ZhangHagerState:
    q: float
    c: float


@dataclass(frozen=True)
class GrippoState:
    window: tuple


NuState = Optional[Union[DirectState, ZhangHagerState, GrippoState]]


def nu_init(spec: NuStrategy, phi_x0: float):
    """Initial state and nu_0.

    Returns nu_0 = None for the ratio schedule, whose first value needs the
    first step's ||d||^2 (see ``first_step_nu``).
    """
    if isinstance(spec, DirectNu):
        return DirectState(nu_prev=spec.nu0), spec.nu0
    if isinstance(spec, ZhangHagerNu):
        # C_0 = phi(x^0) + offset and Q_0 = 1, so nu_0 is the offset itself
        return ZhangHagerState(q=1.0, c=phi_x0 + spec.c0_offset), spec.c0_offset
    if isinstance(spec, GrippoNu):
        return GrippoState(window=(phi_x0,)), 0.0
    if isinstance(spec, RatioNu):
        return None, None
    if isinstance(spec, ZeroNu):
        return None, 0.0
    raise TypeError(f"unknown nu strategy {type(spec)!r}")


def first_step_nu(spec: NuStrategy, nu0, d_norm_sq: float) -> float:
    """Resolve nu_0 once the first direction is known."""
    if nu0 is not None:
        return float(nu0)
    assert isinstance(spec, RatioNu)
    return spec.omega * d_norm_sq / spec.u_at(0)


def _check_budget(budget: float, k: int) -> float:
    if budget < -_BUDGET_SLACK:
        raise InvariantViolation(
            "descent estimate violated: phi(x^k) - phi(x^{k+1}) + nu_k + eps_k "
            f"= {budget} < 0 at step {k}"
        )
    return max(budget, 0.0)


def nu_next(spec: NuStrategy, state: NuState, k: int, phi_prev: float,
            phi_curr: float, eps_k: float, d_norm_sq: float):
    """Allowance for step k+1 after the step k -> k+1 completed.

    phi_prev / phi_curr are phi(x^k) and phi(x^{k+1}); eps_k is the budget
    used at step k; d_norm_sq is ||d^{k+1}||^2 of the upcoming step (only the
    ratio schedule reads it).
    """
    if isinstance(spec, DirectNu):
        budget = _check_budget(phi_prev - phi_curr + state.nu_prev + eps_k, k)
        nu = spec.fraction * (1.0 - spec.delta_at(k)) * budget
        return DirectState(nu_prev=nu), nu
    if isinstance(spec, ZhangHagerNu):
        # the allowance actually usable by the search is the floored gap:
        # with eps_k > 0 the raw gap C - phi may dip below zero by up to eps
        nu_prev = max(0.0, state.c - phi_prev)
        _check_budget(phi_prev - phi_curr + nu_prev + eps_k, k)
        eta = spec.eta_at(k)
        q_next = eta * state.q + 1.0
        c_next = (eta * state.q * state.c + phi_curr) / q_next
        return ZhangHagerState(q=q_next, c=c_next), max(0.0, c_next - phi_curr)
    if isinstance(spec, GrippoNu):
        _check_budget(
            phi_prev - phi_curr + (max(state.window) - phi_prev) + eps_k, k
        )
        window = (state.window + (phi_curr,))[-(spec.m + 1):]
        return GrippoState(window=window), max(window) - phi_curr
    if isinstance(spec, RatioNu):
        return None, spec.omega * d_norm_sq / spec.u_at(k + 1)
    if isinstance(spec, ZeroNu):
        return None, 0.0
    raise TypeError(f"unknown nu strategy {type(spec)!r}")


@dataclass(frozen=True)
class SummabilityReport:
    partial_sums: list
    bounded: bool


def verify_summability(trace) -> SummabilityReport:
    """Finite proxy for sum(nu_k) < infinity on a completed trace.

    Reports the partial sums; ``bounded`` holds when the increments have
    decayed below 1e-10 by the end of the trace.  The asymptotic statement
    itself is not testable on a finite run and is reported, not asserted.
    """
    sums, total = [], 0.0
    for r in trace.records:
        total += r.nu_k
        sums.append(total)
    bounded = (not trace.records) or trace.records[-1].nu_k < 1e-10
    return SummabilityReport(partial_sums=sums, bounded=bounded)


def step_domination_start(trace, delta: float) -> Optional[int]:
    """Smallest k0 with nu_k <= delta * ||d^k||^2 for every recorded k >= k0,
    or None when even the final record violates the bound."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    records = trace.records
    k0 = None
    for idx in range(len(records) - 1, -1, -1):
        r = records[idx]
        if r.nu_k <= delta * r.d_norm**2:
            k0 = idx
        else:
            break
    return k0

"""Shared domain types: DC problems, solver configuration, and run traces.

Everything here is an immutable value object after construction, so problems,
configurations, and finished traces can be shared freely across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .convex import ConvexExpr, as_point

__all__ = [
    "InvariantViolation",
    "UnsupportedProblemError",
    "InexactMode",
    "Termination",
    "EpsSchedule",
    "LambdaBarRule",
    "DirectNu",
    "ZhangHagerNu",
    "GrippoNu",
    "RatioNu",
    "ZeroNu",
    "NuStrategy",
    "SolverConfig",
    "DcProblem",
    "IterationRecord",
    "Trace",
    "validate",
    "config_to_flat",
    "config_from_flat",
    "TRACE_CSV_COLUMNS",
]


class InvariantViolation(RuntimeError):
    """A proved inequality failed beyond numerical slack.

    The inequalities checked throughout the solvers are theorems under the
    standing assumptions, so a violation signals a bug, a broken oracle, or a
    misconfigured tolerance rather than an unlucky input.
    """


class UnsupportedProblemError(ValueError):
    """Problem structure outside what the solvers support."""


class InexactMode(Enum):
    """How the per-iteration convex subproblem is solved."""

    INNER_SOLVER = "inner_solver"
    PERTURBED_EXACT = "perturbed_exact"
    EXACT = "exact"


class Termination(Enum):
    STEP_TOL = "step_tol"
    D_ZERO = "d_zero"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class EpsSchedule:
    """Per-iteration budget for the approximate subgradient of h.

    Kinds: ``zero`` (always 0), ``geometric`` (eps0 * q^k, 0 < q < 1) and
    ``harmonic2`` (eps0 / (k+1)^2).  The nonzero kinds are summable, which is
    what the convergence guarantees ask of the schedule.
    """

    kind: str = "zero"
    eps0: float = 0.0
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in ("zero", "geometric", "harmonic2"):
            raise ValueError(f"unknown eps schedule kind {self.kind!r}")
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        if self.kind == "geometric" and not 0.0 < self.q < 1.0:
            raise ValueError("geometric schedule needs q in (0,1)")

    def at(self, k: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "geometric":
            return self.eps0 * self.q**k
        return self.eps0 / (k + 1) ** 2

    @classmethod
    def zero(cls) -> "EpsSchedule":
        return cls("zero")

    @classmethod
    def geometric(cls, eps0: float, q: float = 0.5) -> "EpsSchedule":
        return cls("geometric", eps0, q)

    @classmethod
    def harmonic2(cls, eps0: float) -> "EpsSchedule":
        return cls("harmonic2", eps0)


@dataclass(frozen=True)
class LambdaBarRule:
    """Trial step size for the boosted move along d.

    ``constant`` tries lambda_bar every iteration; ``zero_boost`` forces the
    trial step to 0, which collapses the update to the plain subproblem
    iterate (the DCA baseline).
    """

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "zero_boost"):
            raise ValueError(f"unknown lambda_bar rule {self.kind!r}")

    def trial(self, k: int) -> float:
        return 0.0 if self.kind == "zero_boost" else self.value

    @classmethod
    def constant(cls, value: float) -> "LambdaBarRule":
        return cls("constant", float(value))

    @classmethod
    def zero_boost(cls) -> "LambdaBarRule":
        return cls("zero_boost", 0.0)


# --- nonmonotonicity allowance strategies (behavior lives in nonmonotone.py)


@dataclass(frozen=True)
class DirectNu:
    """Direct rule: the next allowance is a fraction of the admissible budget
    (1 - delta) * (phi drop + previous allowance + eps)."""

    delta_min: float = 0.0
    delta: Optional[float] = None
    delta_rule: Optional[Callable[[int], float]] = None
    nu0: float = 0.0
    fraction: float = 1.0

    kind = "direct"

    def __post_init__(self):
        if not 0.0 <= self.delta_min < 1.0:
            raise ValueError("delta_min must lie in [0, 1)")
        if self.delta is not None and not self.delta_min <= self.delta <= 1.0:
            raise ValueError("delta must lie in [delta_min, 1]")
        if self.nu0 < 0:
            raise ValueError("nu0 must be nonnegative")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")

    def delta_at(self, k: int) -> float:
        if self.delta_rule is not None:
            d = float(self.delta_rule(k))
        elif self.delta is not None:
            d = self.delta
        else:
            d = self.delta_min
        if not self.delta_min <= d <= 1.0:
            raise ValueError(f"delta rule returned {d} outside [delta_min, 1]")
        return d


@dataclass(frozen=True)
class ZhangHagerNu:
    """Zhang-Hager cost-update rule: running average C of past values with
    memory eta; the allowance is C_k - phi(x^k)."""

    eta_min: float = 0.0
    eta_max: float = 0.85
    c0_offset: float = 1.0
    eta: Optional[float] = None
    eta_rule: Optional[Callable[[int], float]] = None

    kind = "zhang_hager"

    def __post_init__(self):
        if not 0.0 <= self.eta_min <= self.eta_max < 1.0:
            raise ValueError("need 0 <= eta_min <= eta_max < 1")
        if self.c0_offset <= 0:
            raise ValueError("c0_offset must be positive")

    def eta_at(self, k: int) -> float:
        if self.eta_rule is not None:
            e = float(self.eta_rule(k))
        elif self.eta is not None:
            e = self.eta
        else:
            e = self.eta_max
        if not self.eta_min <= e <= self.eta_max:
            raise ValueError(f"eta rule returned {e} outside [eta_min, eta_max]")
        return e


@dataclass(frozen=True)
class GrippoNu:
    """Max-window rule: allowance is the gap between the running maximum of
    the last m+1 objective values and the current value."""

    m: int

    kind = "grippo"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("window depth m must be a positive integer")


@dataclass(frozen=True)
class RatioNu:
    """Step-ratio schedule: nu_k = omega * ||d^k||^2 / u_k with u_k -> inf
    (default u_k = k + 1)."""

    omega: float
    u_rule: Optional[Callable[[int], float]] = None

    kind = "ratio"

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    def u_at(self, k: int) -> float:
        u = float(self.u_rule(k)) if self.u_rule is not None else float(k + 1)
        if u <= 0:
            raise ValueError(f"u rule returned {u}, must be positive")
        return u


@dataclass(frozen=True)
class ZeroNu:
    """Monotone search: no allowance at all."""

    kind = "zero"


NuStrategy = Union[DirectNu, ZhangHagerNu, GrippoNu, RatioNu, ZeroNu]


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    beta: float = 0.5
    theta: float = 0.0
    lambda_bar: LambdaBarRule = LambdaBarRule.constant(1.0)
    eps: EpsSchedule = EpsSchedule.zero()
    nu: NuStrategy = ZeroNu()
    stop_step_tol: float = 1e-6
    d_zero_tol: float = 1e-12
    max_iter: int = 1000
    max_backtracks: int = 60
    inexact_mode: InexactMode = InexactMode.EXACT


@dataclass(frozen=True, eq=False)
class DcProblem:
    """Unconstrained minimization of phi = g - h, both components strongly
    convex with the shared modulus sigma."""

    name: str
    g: ConvexExpr
    h: ConvexExpr
    dim: int
    sigma: float
    phi_lower_bound: Optional[float] = None
    known_critical_points: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        self.g.check_dim(self.dim)
        self.h.check_dim(self.dim)
        for f, label in ((self.g, "g"), (self.h, "h")):
            if self.sigma > f.modulus() + 1e-12:
                raise ValueError(
                    f"sigma={self.sigma} exceeds modulus({label})={f.modulus()}"
                )
        if self.known_critical_points is not None:
            pts = tuple(as_point(p, self.dim) for p in self.known_critical_points)
            object.__setattr__(self, "known_critical_points", pts)

    @classmethod
    def from_components(
        cls,
        name: str,
        g: ConvexExpr,
        h: ConvexExpr,
        dim: int,
        phi_lower_bound: Optional[float] = None,
        known_critical_points: Optional[tuple] = None,
    ) -> "DcProblem":
        """Build with sigma = min of the two moduli, the largest shared value."""
        sigma = min(g.modulus(), h.modulus())
        return cls(name, g, h, dim, sigma, phi_lower_bound, known_critical_points)

    def phi(self, x) -> float:
        x = as_point(x, self.dim)
        return self.g.value(x) - self.h.value(x)


def validate(problem: DcProblem, config: SolverConfig) -> list:
    """Parameter-range check of a configuration against a problem.

    Returns a list of human-readable violations (empty when valid); pure.
    """
    v = []
    if not 0.0 < config.beta < 1.0:
        v.append(f"beta ∉ (0,1) (beta={config.beta})")
    if config.rho <= 0:
        v.append(f"rho ≤ 0 (rho={config.rho})")
    if config.theta < 0:
        v.append(f"theta < 0 (theta={config.theta})")
    elif config.theta >= problem.sigma / 2:
        v.append(
            f"theta ≥ sigma/2 (theta={config.theta}, sigma={problem.sigma})"
        )
    if config.stop_step_tol <= 0:
        v.append(f"stop_step_tol ≤ 0 (stop_step_tol={config.stop_step_tol})")
    if config.d_zero_tol <= 0:
        v.append(f"d_zero_tol ≤ 0 (d_zero_tol={config.d_zero_tol})")
    if config.lambda_bar.kind == "constant" and config.lambda_bar.value < 0:
        v.append(f"lambda_bar < 0 (lambda_bar={config.lambda_bar.value})")
    if config.max_iter < 0:
        v.append(f"max_iter < 0 (max_iter={config.max_iter})")
    if config.max_backtracks < 0:
        v.append(f"max_backtracks < 0 (max_backtracks={config.max_backtracks})")
    return v


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """Complete state of one iteration, enough to recheck every certified
    inequality after the fact."""

    k: int
    x: np.ndarray
    phi_x: float
    eps_k: float
    eps_certified: float
    w: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    d_norm: float
    inexact_lhs: float
    inexact_rhs: float
    nu_k: float
    lambda_bar: float
    lambda_k: float
    n_backtracks: int
    phi_y: float
    phi_next: float
    tau_hat: Optional[float] = None
    tau: Optional[float] = None

    def to_json_obj(self) -> dict:
        return {
            "k": self.k,
            "x": [float(v) for v in self.x],
            "phi_x": self.phi_x,
            "eps_k": self.eps_k,
            "eps_certified": self.eps_certified,
            "w": [float(v) for v in self.w],
            "y": [float(v) for v in self.y],
            "xi": [float(v) for v in self.xi],
            "d_norm": self.d_norm,
            "inexact_lhs": self.inexact_lhs,
            "inexact_rhs": self.inexact_rhs,
            "nu_k": self.nu_k,
            "lambda_bar": self.lambda_bar,
            "lambda_k": self.lambda_k,
            "n_backtracks": self.n_backtracks,
            "phi_y": self.phi_y,
            "phi_next": self.phi_next,
            "tau_hat": self.tau_hat,
            "tau": self.tau,
        }

    @classmethod
    def from_json_obj(cls, d: dict) -> "IterationRecord":
        return cls(
            k=int(d["k"]),
            x=np.asarray(d["x"], dtype=float),
            phi_x=float(d["phi_x"]),
            eps_k=float(d["eps_k"]),
            eps_certified=float(d["eps_certified"]),
            w=np.asarray(d["w"], dtype=float),
            y=np.asarray(d["y"], dtype=float),
            xi=np.asarray(d["xi"], dtype=float),
            d_norm=float(d["d_norm"]),
            inexact_lhs=float(d["inexact_lhs"]),
            inexact_rhs=float(d["inexact_rhs"]),
            nu_k=float(d["nu_k"]),
            lambda_bar=float(d["lambda_bar"]),
            lambda_k=float(d["lambda_k"]),
            n_backtracks=int(d["n_backtracks"]),
            phi_y=float(d["phi_y"]),
            phi_next=float(d["phi_next"]),
            tau_hat=None if d.get("tau_hat") is None else float(d["tau_hat"]),
            tau=None if d.get("tau") is None else float(d["tau"]),
        )


TRACE_CSV_COLUMNS = [
    "k",
    "phi_x",
    "eps_k",
    "d_norm",
    "inexact_lhs",
    "inexact_rhs",
    "nu_k",
    "lambda_k",
    "n_backtracks",
    "phi_y",
    "phi_next",
    "tau_hat",
    "tau",
]


@dataclass(frozen=True, eq=False)
class Trace:
    problem_name: str
    config: SolverConfig
    x0: np.ndarray
    records: list
    final_x: np.ndarray
    final_phi: float
    termination: Termination

    def write_jsonl(self, path) -> None:
        """One meta line, then one record per line."""
        meta = {
            "problem_name": self.problem_name,
            "config": config_to_flat(self.config),
            "x0": [float(v) for v in self.x0],
            "final_x": [float(v) for v in self.final_x],
            "final_phi": self.final_phi,
            "termination": self.termination.value,
        }
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(json.dumps(meta) + "\n")
            for r in self.records:
                fh.write(json.dumps(r.to_json_obj()) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "Trace":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty trace file")
        meta = json.loads(lines[0])
        if "problem_name" not in meta:
            raise ValueError(f"{path}: first line is not a trace header")
        records = [IterationRecord.from_json_obj(json.loads(ln)) for ln in lines[1:]]
        return cls(
            problem_name=meta["problem_name"],
            config=config_from_flat(meta["config"]),
            x0=np.asarray(meta["x0"], dtype=float),
            records=records,
            final_x=np.asarray(meta["final_x"], dtype=float),
            final_phi=float(meta["final_phi"]),
            termination=Termination(meta["termination"]),
        )

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_CSV_COLUMNS)
            for r in self.records:
                obj = r.to_json_obj()
                writer.writerow(
                    ["" if obj[c] is None else repr(obj[c]) if isinstance(obj[c], float) else obj[c] for c in TRACE_CSV_COLUMNS]
                )


def _nu_to_flat(nu: NuStrategy) -> dict:
    out = {"nu.kind": nu.kind}
    if isinstance(nu, DirectNu):
        out["nu.delta_min"] = nu.delta_min
        if nu.delta is not None:
            out["nu.delta"] = nu.delta
        out["nu.nu0"] = nu.nu0
        out["nu.fraction"] = nu.fraction
    elif isinstance(nu, ZhangHagerNu):
        out["nu.eta_min"] = nu.eta_min
        out["nu.eta_max"] = nu.eta_max
        out["nu.c0_offset"] = nu.c0_offset
        if nu.eta is not None:
            out["nu.eta"] = nu.eta
    elif isinstance(nu, GrippoNu):
        out["nu.m"] = nu.m
    elif isinstance(nu, RatioNu):
        out["nu.omega"] = nu.omega
    return out


def _nu_from_flat(d: dict) -> NuStrategy:
    kind = d.get("nu.kind", "zero")
    if kind == "zero":
        return ZeroNu()
    if kind == "direct":
        return DirectNu(
            delta_min=float(d.get("nu.delta_min", 0.0)),
            delta=None if d.get("nu.delta") is None else float(d["nu.delta"]),
            nu0=float(d.get("nu.nu0", 0.0)),
            fraction=float(d.get("nu.fraction", 1.0)),
        )
    if kind == "zhang_hager":
        return ZhangHagerNu(
            eta_min=float(d.get("nu.eta_min", 0.0)),
            eta_max=float(d.get("nu.eta_max", 0.85)),
            c0_offset=float(d.get("nu.c0_offset", 1.0)),
            eta=None if d.get("nu.eta") is None else float(d["nu.eta"]),
        )
    if kind == "grippo":
        return GrippoNu(m=int(d["nu.m"]))
    if kind == "ratio":
        return RatioNu(omega=float(d["nu.omega"]))
    raise ValueError(f"unknown nu strategy kind {kind!r}")


def config_to_flat(config: SolverConfig) -> dict:
    """Flat key/value form of a configuration (rule callables are dropped;
    only the declared constants survive the round trip)."""
    out = {
        "rho": config.rho,
        "beta": config.beta,
        "theta": config.theta,
        "lambda_bar": config.lambda_bar.value,
        "lambda_bar.kind": config.lambda_bar.kind,
        "eps.kind": config.eps.kind,
        "eps.eps0": config.eps.eps0,
        "eps.q": config.eps.q,
        "stop_step_tol": config.stop_step_tol,
        "d_zero_tol": config.d_zero_tol,
        "max_iter": config.max_iter,
        "max_backtracks": config.max_backtracks,
        "inexact_mode": config.inexact_mode.value,
    }
    out.update(_nu_to_flat(config.nu))
    return out


def config_from_flat(d: dict) -> SolverConfig:
    base = SolverConfig()
    return SolverConfig(
        rho=float(d.get("rho", base.rho)),
        beta=float(d.get("beta", base.beta)),
        theta=float(d.get("theta", base.theta)),
        lambda_bar=LambdaBarRule(
            kind=d.get("lambda_bar.kind", "constant"),
            value=float(d.get("lambda_bar", 1.0)),
        ),
        eps=EpsSchedule(
            kind=d.get("eps.kind", "zero"),
            eps0=float(d.get("eps.eps0", 0.0)),
            q=float(d.get("eps.q", 0.5)),
        ),
        nu=_nu_from_flat(d),
        stop_step_tol=float(d.get("stop_step_tol", base.stop_step_tol)),
        d_zero_tol=float(d.get("d_zero_tol", base.d_zero_tol)),
        max_iter=int(d.get("max_iter", base.max_iter)),
        max_backtracks=int(d.get("max_backtracks", base.max_backtracks)),
        inexact_mode=InexactMode(d.get("inexact_mode", "exact")),
    )

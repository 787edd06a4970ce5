"""Convex building blocks with exact subdifferential calculus.

The atom set -- quadratic ``a*||x||^2``, linear ``<c, x>``, weighted l1
``b*sum_i |x_i|``, and sums thereof -- is coordinate-separable.  That keeps
every piece of calculus exact: subdifferentials are per-coordinate interval
boxes, strong-convexity moduli can be read off the quadratic weights, and
approximate subgradients carry a machine-checkable linearization-gap
certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvexExpr",
    "Quadratic",
    "Linear",
    "L1",
    "Sum",
    "SubdiffBox",
    "EpsSubgradCert",
    "as_point",
    "expr_from_dict",
    "separable_coefficients",
]


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float vector, optionally checking its length."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ValueError(f"expected a 1-D point, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.shape[0]}")
    return p


@dataclass(frozen=True, eq=False)
class SubdiffBox:
    """Per-coordinate interval box; exactly the subdifferential of a separable
    convex function (the subdifferential of a separable sum is the product of
    the 1-D subdifferentials)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi, lo.shape[0])
        if np.any(lo > hi + 1e-15):
            raise ValueError("box has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def membership_gap(self, v) -> float:
        """Largest per-coordinate distance from v to the box (0 if inside)."""
        v = as_point(v, self.dim)
        return float(np.max(np.maximum(np.maximum(self.lo - v, v - self.hi), 0.0)))

    def contains(self, v, tol: float = 1e-10) -> bool:
        return self.membership_gap(v) <= tol

    def project(self, v) -> np.ndarray:
        v = as_point(v, self.dim)
        return np.clip(v, self.lo, self.hi)

    def gap_to(self, other: "SubdiffBox") -> float:
        """Largest per-coordinate gap between two boxes; 0 iff they intersect
        in every coordinate."""
        if other.dim != self.dim:
            raise ValueError("box dimension mismatch")
        lo_gap = np.maximum(self.lo - other.hi, 0.0)
        hi_gap = np.maximum(other.lo - self.hi, 0.0)
        return float(np.max(np.maximum(lo_gap, hi_gap)))

    def __add__(self, other):
        if not isinstance(other, SubdiffBox):
            return NotImplemented
        return SubdiffBox(self.lo + other.lo, self.hi + other.hi)


@dataclass(frozen=True, eq=False)
class EpsSubgradCert:
    """Approximate subgradient with a proof-carrying gap.

    ``w`` is an exact subgradient at ``anchor_z`` and ``eps_achieved`` equals
    ``f(x) - f(z) - <w, x - z> >= 0``, which certifies that ``w`` satisfies
    the subgradient inequality at ``x`` relaxed by ``eps_achieved``.
    """

    w: np.ndarray
    eps_achieved: float
    anchor_z: np.ndarray


class ConvexExpr:
    """Base class for the separable convex expressions."""

    def value(self, x) -> float:
        raise NotImplementedError

    def subgrad(self, x) -> np.ndarray:
        """Canonical subgradient selection; uses sign(0) = 0 at l1 kinks."""
        raise NotImplementedError

    def subdiff_box(self, x) -> SubdiffBox:
        """Exact subdifferential at x as a per-coordinate interval box."""
        lo, hi = self._interval(as_point(x), 0.0)
        return SubdiffBox(lo, hi)

    def eps_subdiff_box(self, x, eps: float) -> SubdiffBox:
        """Per-atom widened box containing the eps-relaxed subdifferential.

        Widening each atom by its own exact 1-D eps-subdifferential gives a
        superset of the eps-subdifferential of the sum, so a zero gap between
        two such boxes never misses an eps-critical point.
        """
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        lo, hi = self._interval(as_point(x), float(eps))
        return SubdiffBox(lo, hi)

    def modulus(self) -> float:
        """Exact strong-convexity modulus, read off the quadratic weights."""
        raise NotImplementedError

    def check_dim(self, dim: int) -> None:
        """Raise if the expression cannot accept points of this dimension."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _interval(self, x: np.ndarray, eps: float):
        raise NotImplementedError

    def __add__(self, other):
        if not isinstance(other, ConvexExpr):
            return NotImplemented
        left = self.terms if isinstance(self, Sum) else (self,)
        right = other.terms if isinstance(other, Sum) else (other,)
        return Sum(left + right)

    def linearization_cert(self, x, z) -> EpsSubgradCert:
        """Certificate for the subgradient taken at anchor z, valid at x."""
        x = as_point(x)
        z = as_point(z, x.shape[0])
        w = self.subgrad(z)
        gap = self.value(x) - self.value(z) - float(w @ (x - z))
        return EpsSubgradCert(w=w, eps_achieved=max(gap, 0.0), anchor_z=z)

    def eps_subgrad(self, x, eps_target: float, rng) -> EpsSubgradCert:
        """Approximate subgradient at x with certified gap <= eps_target.

        Samples an anchor on a sphere around x, takes the exact subgradient
        there, and shrinks the radius geometrically until the linearization
        gap fits the budget.  eps_target = 0 returns the exact subgradient.
        """
        x = as_point(x)
        if eps_target < 0:
            raise ValueError("eps_target must be nonnegative")
        if eps_target == 0.0:
            return EpsSubgradCert(self.subgrad(x), 0.0, x.copy())
        radius = min(0.1, math.sqrt(eps_target))
        for _ in range(64):
            u = rng.standard_normal(x.shape[0])
            norm = float(np.linalg.norm(u))
            if norm == 0.0:
                continue
            cert = self.linearization_cert(x, x + (radius / norm) * u)
            if cert.eps_achieved <= eps_target:
                return cert
            radius *= 0.5
        # radius-0 fallback: the exact subgradient certifies with zero gap
        return EpsSubgradCert(self.subgrad(x), 0.0, x.copy())


@dataclass(frozen=True)
class Quadratic(ConvexExpr):
    """``a * ||x||^2`` with a >= 0."""

    a: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        if self.a < 0:
            raise ValueError("quadratic weight must be nonnegative")

    def value(self, x) -> float:
        x = as_point(x)
        return float(self.a * (x @ x))

    def subgrad(self, x) -> np.ndarray:
        return 2.0 * self.a * as_point(x)

    def modulus(self) -> float:
        return 2.0 * self.a

    def check_dim(self, dim: int) -> None:
        pass

    def to_dict(self) -> dict:
        return {"quad": self.a}

    def _interval(self, x, eps):
        g = 2.0 * self.a * x
        # {v : a s^2 >= a t^2 + v (s - t) - eps for all s} = 2at +- 2 sqrt(a eps)
        w = 2.0 * math.sqrt(self.a * eps) if eps > 0 else 0.0
        return g - w, g + w


@dataclass(frozen=True, eq=False)
class Linear(ConvexExpr):
    """``<c, x>``."""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", as_point(self.c))

    def value(self, x) -> float:
        x = as_point(x, self.c.shape[0])
        return float(self.c @ x)

    def subgrad(self, x) -> np.ndarray:
        as_point(x, self.c.shape[0])
        return self.c.copy()

    def modulus(self) -> float:
        return 0.0

    def check_dim(self, dim: int) -> None:
        if self.c.shape[0] != dim:
            raise ValueError(
                f"dimension mismatch: linear term has {self.c.shape[0]} "
                f"coefficients, problem dimension is {dim}"
            )

    def to_dict(self) -> dict:
        return {"lin": [float(v) for v in self.c]}

    def _interval(self, x, eps):
        as_point(x, self.c.shape[0])
        # the eps-relaxed subgradient set of an affine function is still {c}
        return self.c.copy(), self.c.copy()


@dataclass(frozen=True)
class L1(ConvexExpr):
    """``b * sum_i |x_i|`` with b >= 0."""

    b: float

    def __post_init__(self):
        object.__setattr__(self, "b", float(self.b))
        if self.b < 0:
            raise ValueError("l1 weight must be nonnegative")

    def value(self, x) -> float:
        x = as_point(x)
        return float(self.b * np.sum(np.abs(x)))

    def subgrad(self, x) -> np.ndarray:
        return self.b * np.sign(as_point(x))

    def modulus(self) -> float:
        return 0.0

    def check_dim(self, dim: int) -> None:
        pass

    def to_dict(self) -> dict:
        return {"l1": self.b}

    def _interval(self, x, eps):
        b = self.b
        if b == 0.0:
            z = np.zeros_like(x)
            return z, z
        lo = np.full_like(x, -b)
        hi = np.full_like(x, b)
        pos = x > 0
        neg = x < 0
        if eps == 0.0:
            lo[pos] = b
            hi[neg] = -b
        else:
            # {v in [-b, b] : v t >= b|t| - eps}
            lo[pos] = np.maximum(-b, b - eps / x[pos])
            hi[neg] = np.minimum(b, -b + eps / (-x[neg]))
        return lo, hi


@dataclass(frozen=True)
class Sum(ConvexExpr):
    """Sum of convex expressions; convex with modulus equal to the sum of
    the terms' moduli."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        for t in terms:
            if not isinstance(t, ConvexExpr):
                raise TypeError(f"Sum terms must be ConvexExpr, got {type(t)!r}")
        object.__setattr__(self, "terms", terms)

    def value(self, x) -> float:
        x = as_point(x)
        return float(sum(t.value(x) for t in self.terms))

    def subgrad(self, x) -> np.ndarray:
        x = as_point(x)
        out = np.zeros_like(x)
        for t in self.terms:
            out += t.subgrad(x)
        return out

    def modulus(self) -> float:
        return float(sum(t.modulus() for t in self.terms))

    def check_dim(self, dim: int) -> None:
        for t in self.terms:
            t.check_dim(dim)

    def to_dict(self) -> dict:
        return {"sum": [t.to_dict() for t in self.terms]}

    def _interval(self, x, eps):
        lo = np.zeros_like(x)
        hi = np.zeros_like(x)
        for t in self.terms:
            tlo, thi = t._interval(x, eps)
            lo += tlo
            hi += thi
        return lo, hi


def expr_from_dict(d: dict) -> ConvexExpr:
    """Inverse of ``ConvexExpr.to_dict``."""
    if not isinstance(d, dict) or len(d) != 1:
        raise ValueError(f"malformed expression node: {d!r}")
    (key, payload), = d.items()
    if key == "quad":
        return Quadratic(payload)
    if key == "lin":
        return Linear(np.asarray(payload, dtype=float))
    if key == "l1":
        return L1(payload)
    if key == "sum":
        return Sum(tuple(expr_from_dict(t) for t in payload))
    raise ValueError(f"unknown expression atom {key!r}")


def separable_coefficients(f: ConvexExpr, dim: int):
    """Aggregate (quad, lin, l1) with f(x) = quad*||x||^2 + <lin, x> + l1*sum|x_i|."""
    quad = 0.0
    l1 = 0.0
    lin = np.zeros(dim)

    def walk(e):
        nonlocal quad, l1
        if isinstance(e, Quadratic):
            quad += e.a
        elif isinstance(e, Linear):
            e.check_dim(dim)
            lin[:] += e.c
        elif isinstance(e, L1):
            l1 += e.b
        elif isinstance(e, Sum):
            for t in e.terms:
                walk(t)
        else:
            raise TypeError(f"unsupported expression type {type(e)!r}")

    walk(f)
    return quad, lin, l1

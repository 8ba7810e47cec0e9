"""Scale-transformation algebra for drift-diffusion models on moving domains.

A one-parameter rescaling x -> eps^a x, t -> eps^b t leaves the forward
equation form-invariant when the coefficient indices satisfy b = a - d and
b = 2a - e, and the density index is c = -a.  Only the ratio alpha = a / b
is physical; the canonical gauge b = 1 is fixed here so every downstream
API takes a single exponent.  The reduced coordinate is z = x / t^alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ScalingExponents",
    "ScaleInvariantProfile",
    "make_exponents",
    "similarity_variable",
    "drift_from_f",
]


@dataclass(frozen=True)
class ScalingExponents:
    """Consistent set of scaling indices (a, b, c, d, e) with alpha = a / b."""

    a: float
    b: float
    c: float
    d: float
    e: float
    alpha: float

    def __post_init__(self) -> None:
        if self.b == 0.0 or self.a == 0.0:
            raise ValueError("scaling indices require a != 0 and b != 0")
        for value in (self.a, self.b, self.c, self.d, self.e, self.alpha):
            if not math.isfinite(value):
                raise ValueError("scaling indices must be finite")
        # validated as d = a - b, e = 2a - b: the same relations oriented the
        # way they are constructed, so equality is exact in floating point
        if self.d != self.a - self.b or self.e != 2.0 * self.a - self.b:
            raise ValueError("indices violate form invariance: need b = a - d = 2a - e")
        if self.c != -self.a:
            raise ValueError("density normalization at all times requires c = -a")
        if self.alpha != self.a / self.b:
            raise ValueError("alpha must equal a / b exactly")


def make_exponents(alpha: float) -> ScalingExponents:
    """Exponent set in the canonical gauge b = 1 for a given alpha.

    Rejects alpha = 0 (and non-finite values): the reduced coordinate
    degenerates there.
    """
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha == 0.0:
        raise ValueError(f"alpha must be finite and nonzero, got {alpha!r}")
    a = alpha
    b = 1.0
    return ScalingExponents(a=a, b=b, c=-a, d=a - b, e=2.0 * a - b, alpha=alpha)


def similarity_variable(x, t, alpha: float):
    """Reduced coordinate z = x / t^alpha; requires t > 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("similarity_variable is defined for t > 0 only")
    z = np.asarray(x, dtype=float) / t**alpha
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class ScaleInvariantProfile:
    """Reduced drift/diffusion profiles and the shape function f on (z_lo, z_hi).

    f is the log-derivative of the reduced density and satisfies
    f = (rho1 - rho2' - alpha z) / rho2 identically on the open domain.
    Derivatives are supplied analytically (every rho2 here is quadratic);
    they are part of the profile so residual checks never differentiate
    numerically.
    """

    rho1: Callable
    rho2: Callable
    f: Callable
    z_lo: float
    z_hi: float
    rho1_prime: Callable
    rho2_prime: Callable
    rho2_second: Callable
    f_prime: Callable

    def __post_init__(self) -> None:
        if not self.z_lo < self.z_hi:
            raise ValueError(f"need z_lo < z_hi, got [{self.z_lo!r}, {self.z_hi!r}]")


def drift_from_f(f: Callable, rho2: Callable, rho2_prime: Callable, alpha: float) -> Callable:
    """Drift profile implied by a shape function and diffusion profile.

    Inverts the definition of f:  rho1(z) = f(z) rho2(z) + rho2'(z) + alpha z.
    This is the constructor used by every solvable family, so the
    self-consistency relation holds by construction rather than by
    transcription.
    """

    def rho1(z):
        z = np.asarray(z, dtype=float)
        out = f(z) * rho2(z) + rho2_prime(z) + alpha * z
        return float(out) if out.ndim == 0 else out

    return rho1

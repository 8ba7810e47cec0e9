"""Monte Carlo verification channel: paths of the Ito process

    dX = D1(X, t) dt + sqrt(2 D2(X, t)) dB

with mirror reflection at the instantaneous domain endpoints.  Under the
Ito convention with noise amplitude sqrt(2 D2), the forward equation for
the path density is exactly the one the analytic models solve (diffusion
inside two derivatives), so histograms of a propagated ensemble must
converge to the analytic density at the usual 1/sqrt(N) rate.  Reflection
realizes the zero-flux boundaries at path level: no particle is ever
absorbed or created.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .solutions import (
    SimilaritySolution,
    boundary_positions,
    coefficients,
    effective_upper,
    reduced_density,
)

__all__ = [
    "PathEnsemble",
    "StepSizeError",
    "init_ensemble",
    "step_ensemble",
    "propagate",
    "histogram_table",
    "histogram_distance",
]


class StepSizeError(ValueError):
    """A step was so large that a particle would cross both boundaries."""


@dataclass(frozen=True)
class PathEnsemble:
    """Particle positions at a common time, plus reflection bookkeeping.

    The generator is stream state shared across the functional updates;
    a fixed ``seed`` makes the whole trajectory reproducible bit for bit.
    """

    positions: np.ndarray
    t: float
    n_reflections: int
    seed: int
    rng: np.random.Generator = field(repr=False)


_CDF_TABLE_POINTS = 10_001


@functools.lru_cache(maxsize=64)
def _cdf_table(sol: SimilaritySolution, *, tail_mass: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    z_hi = effective_upper(sol, tail_mass=tail_mass)
    z = np.linspace(sol.profile.z_lo, z_hi, _CDF_TABLE_POINTS)
    y = reduced_density(sol, z)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(z))])
    cdf /= cdf[-1]
    return z, cdf


def init_ensemble(
    sol: SimilaritySolution, n_paths: int, t0: float, seed: int
) -> PathEnsemble:
    """Ensemble drawn from the analytic density at t0 by inverse-CDF sampling."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    if t0 <= 0.0:
        raise ValueError("need t0 > 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    z_tab, cdf = _cdf_table(sol)
    u = rng.uniform(size=n_paths)
    z = np.interp(u, cdf, z_tab)
    return PathEnsemble(
        positions=z * t0**sol.alpha,
        t=float(t0),
        n_reflections=0,
        seed=int(seed),
        rng=rng,
    )


def step_ensemble(
    ens: PathEnsemble, sol: SimilaritySolution, dt: float, *, noise_scale: float = 1.0
) -> PathEnsemble:
    """One Euler-Maruyama step of size dt with reflection at t + dt boundaries.

    ``noise_scale=0`` switches off the diffusion term, turning the update
    into a forward-Euler step of the deterministic drift flow (used by the
    zero-noise verification against an ODE integrator).
    """
    if dt <= 0.0:
        raise ValueError(f"need dt > 0, got {dt!r}")
    t_new = ens.t + dt
    x = ens.positions
    d1, d2 = coefficients(sol, x, ens.t)
    x_new = x + d1 * dt
    if noise_scale != 0.0:
        noise = ens.rng.standard_normal(x.shape[0])
        x_new = x_new + noise_scale * np.sqrt(2.0 * np.maximum(d2, 0.0) * dt) * noise

    lo, hi = boundary_positions(sol, t_new)
    reflections = 0
    below = x_new < lo
    if below.any():
        reflections += int(below.sum())
        x_new[below] = 2.0 * lo - x_new[below]
    if math.isfinite(hi):
        above = x_new > hi
        if above.any():
            reflections += int(above.sum())
            x_new[above] = 2.0 * hi - x_new[above]
    out_of_domain = (x_new < lo) | (x_new > hi)
    if out_of_domain.any():
        raise StepSizeError(
            f"{int(out_of_domain.sum())} paths crossed both boundaries in one "
            f"step of dt={dt!r}; reduce the step size"
        )
    return replace(
        ens, positions=x_new, t=t_new, n_reflections=ens.n_reflections + reflections
    )


def _domain_width(sol: SimilaritySolution, t: float) -> float:
    lo, hi = boundary_positions(sol, t)
    if math.isinf(hi):
        hi = effective_upper(sol, tail_mass=1e-6) * t**sol.alpha
    return hi - lo


def propagate(
    ens: PathEnsemble,
    sol: SimilaritySolution,
    t_end: float,
    *,
    dt_max: float = 1e-3,
    boundary_motion_fraction: float = 0.1,
) -> PathEnsemble:
    """March the ensemble to ``t_end`` in substeps.

    Substeps are capped so the boundary moves by less than
    ``boundary_motion_fraction`` of the domain width per step, on top of the
    ``dt_max`` accuracy cap.
    """
    if t_end <= ens.t:
        raise ValueError("t_end must exceed the ensemble time")
    alpha = sol.alpha
    while ens.t < t_end - 1e-15 * t_end:
        width = _domain_width(sol, ens.t)
        z_lo, z_hi = sol.profile.z_lo, sol.profile.z_hi
        if math.isinf(z_hi):
            z_hi = effective_upper(sol, tail_mass=1e-6)
        speed = max(abs(alpha * z_lo), abs(alpha * z_hi)) * ens.t ** (alpha - 1.0)
        dt = dt_max if speed == 0.0 else min(dt_max, boundary_motion_fraction * width / speed)
        dt = min(dt, t_end - ens.t)
        ens = step_ensemble(ens, sol, dt)
    return ens


def histogram_table(
    ens: PathEnsemble, sol: SimilaritySolution, n_bins: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bin centers, empirical bin-averaged density, analytic bin-averaged density.

    Bins span the instantaneous domain (half-line domains truncated where
    the analytic tail mass is negligible).
    """
    if n_bins < 10:
        raise ValueError("need at least 10 bins")
    if ens.positions.size == 0:
        raise ValueError("empty ensemble")
    lo, hi = boundary_positions(sol, ens.t)
    if math.isinf(hi):
        hi = effective_upper(sol, tail_mass=1e-9) * ens.t**sol.alpha
    edges = np.linspace(lo, hi, n_bins + 1)
    width = edges[1] - edges[0]
    counts, _ = np.histogram(ens.positions, bins=edges)
    empirical = counts / (ens.positions.size * width)

    # analytic bin masses from a fine trapezoid table of the reduced density
    t_alpha = ens.t**sol.alpha
    z_tab, cdf = _cdf_table(sol)
    cdf_at_edges = np.interp(edges / t_alpha, z_tab, cdf, left=0.0, right=1.0)
    analytic = np.diff(cdf_at_edges) / width
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, empirical, analytic


def histogram_distance(ens: PathEnsemble, sol: SimilaritySolution, n_bins: int) -> float:
    """L1 distance between bin-averaged empirical and analytic densities."""
    _, empirical, analytic = histogram_table(ens, sol, n_bins)
    lo, hi = boundary_positions(sol, ens.t)
    if math.isinf(hi):
        hi = effective_upper(sol, tail_mass=1e-9) * ens.t**sol.alpha
    width = (hi - lo) / n_bins
    return float(np.abs(empirical - analytic).sum() * width)

"""Lattice oracle for the walk distribution.

Integrates dP(z)/dt = lambda sum_j p(x_j, t) P(z - x_j, t) - lambda P(z, t) jointly
with the marginal master equation of X, on a truncated lattice whose spacing
divides both x1 and x2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from funess.features import kernels
from funess.features.params import WalkParams
from funess.features.validators import ensure_ordered

logger = logging.getLogger(__name__)

TAIL_PROBABILITY = 1e-13
BOUNDARY_TOL = 1e-10
MAX_DENOMINATOR = 10**6
FRACTION_TOL = 1e-15
DEFAULT_STEP_ALPHA = 1e-3


class IncommensurateStepsError(ValueError):
    """Raised when x1 and x2 share no lattice spacing with a small denominator."""


class MassLeakError(RuntimeError):
    """Raised when the truncated lattice loses more than the tolerated mass."""


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    """P(S(t) = support[i]) = probs[i] on an evenly spaced support."""

    t: float
    support: np.ndarray
    probs: np.ndarray
    spacing: float
    boundary_mass: float

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def variance(self) -> float:
        return float((self.support - self.mean()) ** 2 @ self.probs)

    def pmf(self, z: float) -> float:
        index = int(round((z - self.support[0]) / self.spacing))
        if 0 <= index < self.support.size and math.isclose(self.support[index], z, abs_tol=1e-9 * self.spacing):
            return float(self.probs[index])
        return 0.0


def _as_fraction(x: float) -> Fraction:
    frac = Fraction(x).limit_denominator(MAX_DENOMINATOR)
    if abs(float(frac) - x) > FRACTION_TOL * max(1.0, abs(x)):
        raise IncommensurateStepsError(f"incommensurate_steps:x={x}")
    return frac


def lattice_steps(x1: float, x2: float) -> Tuple[float, int, int]:
    """Common spacing h and the integer steps (x1/h, x2/h)."""

    f1, f2 = _as_fraction(x1), _as_fraction(x2)
    denominator = f1.denominator * f2.denominator // math.gcd(f1.denominator, f2.denominator)
    n1 = f1.numerator * (denominator // f1.denominator)
    n2 = f2.numerator * (denominator // f2.denominator)
    common = math.gcd(n1, n2) or 1
    return common / denominator, n1 // common, n2 // common


def _shift(probs: np.ndarray, step: int) -> np.ndarray:
    """out[i] = probs[i - step], zero-filled at the edge the mass enters from."""
    out = np.zeros_like(probs)
    if step > 0:
        out[step:] = probs[:-step]
    elif step < 0:
        out[:step] = probs[-step:]
    else:
        out[:] = probs
    return out


def _integrate(w: WalkParams, t: float, step: float, lo: int, hi: int, units: Tuple[int, int]) -> np.ndarray:
    p = w.base
    size = hi - lo + 1
    walk = np.zeros(size)
    for j, u in enumerate(units):
        walk[u - lo] += p.q[j]

    marginal_rhs = kernels.master_rhs(p)

    def rhs(time: float, y: np.ndarray) -> np.ndarray:
        marginal, dist = y[:2], y[2:]
        arrivals = marginal[0] * _shift(dist, units[0]) + marginal[1] * _shift(dist, units[1])
        return np.concatenate([marginal_rhs(time, marginal), w.lam * (arrivals - dist)])

    y = np.concatenate([p.q, walk])
    if t > p.t0:
        grid = kernels.time_grid(p.t0, t, step)
        for left, right in zip(grid[:-1], grid[1:]):
            y = kernels.rk4_step(rhs, left, y, right - left)
    return y[2:]


def walk_distribution_oracle(
    t: float,
    w: WalkParams,
    z_range: Optional[Tuple[float, float]] = None,
    step: Optional[float] = None,
    max_doublings: int = 6,
) -> LatticeDistribution:
    """Distribution of S(t) for increments drawn from the one-time marginal.

    Without ``z_range`` the lattice spans every position reachable with up to the
    1e-13 Poisson quantile of epochs. The range doubles while more than 1e-10 of
    mass sits on the boundary or has left the lattice.
    """

    p = w.base
    ensure_ordered([("t0", p.t0), ("t", t)])
    step = kernels.check_step(DEFAULT_STEP_ALPHA / p.alpha if step is None else step, p)
    spacing, u1, u2 = lattice_steps(p.x1, p.x2)
    units = (u1, u2)

    if z_range is None:
        mean_epochs = w.lam * (t - p.t0)
        epochs = int(stats.poisson.isf(TAIL_PROBABILITY, mean_epochs)) + 1 if mean_epochs > 0 else 0
        lo, hi = min(u1, u2, 0) * (epochs + 1), max(u1, u2, 0) * (epochs + 1)
    else:
        lo, hi = int(math.floor(z_range[0] / spacing)), int(math.ceil(z_range[1] / spacing))
    lo, hi = min(lo, u1, u2), max(hi, u1, u2)

    for attempt in range(max_doublings + 1):
        probs = _integrate(w, t, step, lo, hi, units)
        leaked = max(0.0, 1.0 - float(probs.sum()))
        # an edge only counts if steps can carry mass across it
        boundary = (float(probs[0]) if min(units) < 0 else 0.0) + (float(probs[-1]) if max(units) > 0 else 0.0)
        if boundary + leaked < BOUNDARY_TOL:
            logger.debug("Lattice [%d, %d] at t=%g holds mass to %.2e", lo, hi, t, boundary + leaked)
            return LatticeDistribution(
                t=t,
                support=spacing * np.arange(lo, hi + 1),
                probs=probs,
                spacing=spacing,
                boundary_mass=boundary + leaked,
            )
        width = hi - lo + 1
        lo, hi = lo - width, hi + width
        logger.info("Boundary mass %.2e too large; widening lattice to [%d, %d]", boundary + leaked, lo, hi)
    raise MassLeakError(f"mass_leak:boundary={boundary + leaked:.3e}:t={t}")

"""Optimal static hedge for a liquidation-averse hedger.

A hedger long one BTC shorts ``theta`` perpetuals for ``N`` periods and
minimises

    hedged_variance(theta0) + gamma * sigma2_S * P(liquidation | theta0)

over the normalised position ``theta0`` (``theta = theta0`` for direct and
``theta = F_t * theta0`` for inverse contracts). The hedged variance is
``sigma2_S - 2 theta0 sigma2_SF + theta0**2 sigma2_F`` and the liquidation
probability is the GEV exceedance of the adjusted financial capacity
``m_hat / theta0 - m0_hat``.

Setting the derivative to zero and dividing by ``2 sigma2_F`` gives the
first-order condition ``a(x) / x**2 + x - b = 0`` with
``a(x) = gamma * nu * m_hat / 2 * g(m_hat / x - m0_hat)``, ``g`` the GEV
density, ``b = sigma2_SF / sigma2_F`` and ``nu = sigma2_S / sigma2_F``.
With ``gamma = 0`` (or an unlimited margin budget) the root is ``b``, the
classical minimum-variance ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal

import numpy as np

from perphedge import gev
from perphedge.errors import NonPositiveB, NoRoot, ValidationError
from perphedge.gev import GevParams

GRID_POINTS = 4096
LOWER_BRACKET = 1e-8
UPPER_PAD = 0.1
MAX_BISECTIONS = 400


@dataclass(frozen=True)
class HedgerProfile:
    """Hedger constraints.

    ``m_bar`` is the margin budget: a fraction of the initial futures value
    for direct contracts, a BTC amount for inverse contracts.
    """

    m_bar: float
    gamma: float
    m0: float = 0.01
    horizon_steps: int = 1
    kind: Literal["direct", "inverse"] = "direct"

    def __post_init__(self):
        if self.kind not in ("direct", "inverse"):
            raise ValidationError(f"kind must be 'direct' or 'inverse', got {self.kind!r}")
        if not (self.m_bar > 0 and math.isfinite(self.m_bar)):
            raise ValidationError(f"m_bar must be positive, got {self.m_bar}")
        if not self.gamma >= 0:
            raise ValidationError(f"gamma must be non-negative, got {self.gamma}")
        if not 0 < self.m0 < 0.25:
            raise ValidationError(f"m0 must lie in (0, 0.25), got {self.m0}")
        if int(self.horizon_steps) < 1:
            raise ValidationError("horizon_steps must be >= 1")

    @property
    def omega0(self) -> int:
        return 1 if self.kind == "direct" else -1

    @property
    def m_hat(self) -> float:
        return self.m_bar / (1.0 + self.omega0 * self.m0)

    @property
    def m0_hat(self) -> float:
        return self.m0 / (1.0 + self.omega0 * self.m0)


@dataclass(frozen=True)
class MarketMoments:
    """Variances and covariance of N-period spot and futures returns."""

    sigma2_S: float
    sigma2_F: float
    sigma2_SF: float
    F_t: float = 1.0

    def __post_init__(self):
        if not (self.sigma2_S > 0 and self.sigma2_F > 0):
            raise ValidationError("variances must be positive")
        bound = math.sqrt(self.sigma2_S * self.sigma2_F)
        if abs(self.sigma2_SF) > bound * (1 + 1e-12):
            raise ValidationError("covariance violates Cauchy-Schwarz")
        if not self.F_t > 0:
            raise ValidationError("F_t must be positive")

    @property
    def b(self) -> float:
        return self.sigma2_SF / self.sigma2_F

    @property
    def nu(self) -> float:
        return self.sigma2_S / self.sigma2_F

    @property
    def rho(self) -> float:
        return self.sigma2_SF / math.sqrt(self.sigma2_S * self.sigma2_F)

    @classmethod
    def from_ratios(cls, b: float, nu: float = 1.0, sigma2_F: float = 1.0, F_t: float = 1.0):
        return cls(sigma2_S=nu * sigma2_F, sigma2_F=sigma2_F, sigma2_SF=b * sigma2_F, F_t=F_t)


@dataclass(frozen=True)
class OptimalHedge:
    theta0: float
    theta_star: float
    objective_value: float
    liq_prob: float
    implied_leverage: float
    b: float


def hedged_variance(mm: MarketMoments, theta0):
    return mm.sigma2_S - 2.0 * theta0 * mm.sigma2_SF + theta0 * theta0 * mm.sigma2_F


def liq_threshold(profile: HedgerProfile, theta0):
    """Adjusted financial capacity: the extreme return that liquidates."""
    theta0 = np.asarray(theta0, dtype=float)
    with np.errstate(divide="ignore"):
        out = profile.m_hat / theta0 - profile.m0_hat
    return float(out) if out.ndim == 0 else out


def liq_probability(profile: HedgerProfile, params: GevParams, theta0):
    """GEV approximation of the probability of liquidation within the horizon."""
    return gev.tail_exceedance(params, liq_threshold(profile, theta0))


def objective(profile: HedgerProfile, mm: MarketMoments, params: GevParams, theta0):
    return hedged_variance(mm, theta0) + profile.gamma * mm.sigma2_S * liq_probability(profile, params, theta0)


def foc_term(profile: HedgerProfile, mm: MarketMoments, params: GevParams, x):
    """``a(x) / x**2``, the liquidation part of the first-order condition."""
    x = np.asarray(x, dtype=float)
    a = 0.5 * profile.gamma * mm.nu * profile.m_hat * np.asarray(gev.pdf(params, liq_threshold(profile, x)))
    out = a / (x * x)
    return float(out) if out.ndim == 0 else out


def foc_residual(profile: HedgerProfile, mm: MarketMoments, params: GevParams, x):
    """``a(x) / x**2 + x - b``; the density, and so ``a``, is 0 off the support."""
    x = np.asarray(x, dtype=float)
    out = foc_term(profile, mm, params, x) + x - mm.b
    return float(out) if np.ndim(out) == 0 else out


def _bisect(f, lo: float, hi: float) -> float:
    f_lo = f(lo)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def implied_leverage(profile: HedgerProfile, mm: MarketMoments, theta_star: float) -> float:
    if profile.kind == "inverse":
        return theta_star / (mm.F_t * profile.m_bar)
    return theta_star / profile.m_bar


def _package(profile, mm, params, theta0) -> OptimalHedge:
    omega = 1.0 if profile.kind == "direct" else mm.F_t
    theta_star = omega * theta0
    return OptimalHedge(
        theta0=float(theta0),
        theta_star=float(theta_star),
        objective_value=float(objective(profile, mm, params, theta0)),
        liq_prob=float(liq_probability(profile, params, theta0)),
        implied_leverage=float(implied_leverage(profile, mm, theta_star)),
        b=mm.b,
    )


def candidate_roots(profile: HedgerProfile, mm: MarketMoments, params: GevParams,
                    grid_points: int = GRID_POINTS) -> list[float]:
    """Refined roots of the first-order condition where it crosses from
    negative to positive, i.e. local minima of the objective."""
    b = mm.b
    grid = np.geomspace(LOWER_BRACKET, b + UPPER_PAD, grid_points)
    r = foc_residual(profile, mm, params, grid)
    f = lambda x: foc_residual(profile, mm, params, x)  # noqa: E731
    roots = []
    for i in np.flatnonzero((r[:-1] < 0) & (r[1:] >= 0)):
        roots.append(float(grid[i + 1]) if r[i + 1] == 0 else _bisect(f, grid[i], grid[i + 1]))
    return roots


def solve(profile: HedgerProfile, mm: MarketMoments, params: GevParams,
          grid_points: int = GRID_POINTS) -> OptimalHedge:
    """Optimal normalised position ``theta0`` and the quantities it implies.

    Scans the first-order condition on a log-spaced grid over
    ``(1e-8, b + 0.1]``, refines every sign change by bisection and keeps the
    root with the smallest objective.
    """
    b = mm.b
    if not b > 0:
        raise NonPositiveB(f"b = sigma2_SF / sigma2_F = {b} must be positive")
    if profile.gamma == 0:
        return _package(profile, mm, params, b)
    roots = candidate_roots(profile, mm, params, grid_points)
    if not roots:
        raise NoRoot("first-order condition has no sign change on the scan grid")
    values = [objective(profile, mm, params, x) for x in roots]
    return _package(profile, mm, params, roots[int(np.argmin(values))])


def sensitivity_sweep(profile: HedgerProfile, mm: MarketMoments, params: GevParams,
                      parameter: str, grid: Iterable[float]) -> list[tuple[float, float]]:
    """Re-solve over ``grid`` varying one of gamma, m_bar, tau or rho."""
    out = []
    for value in grid:
        value = float(value)
        p, m, g = profile, mm, params
        if parameter == "gamma":
            p = replace(profile, gamma=value)
        elif parameter == "m_bar":
            p = replace(profile, m_bar=value)
        elif parameter == "tau":
            g = replace(params, tau=value)
        elif parameter == "rho":
            m = replace(mm, sigma2_SF=value * math.sqrt(mm.sigma2_S * mm.sigma2_F))
        else:
            raise ValidationError(f"cannot sweep {parameter!r}")
        out.append((value, solve(p, m, g).theta0))
    return out

"""Generalized extreme value law for block-maximum returns.

Parametrisation::

    G(x) = exp(-(1 + tau * (x - beta) / alpha) ** (-1 / tau))

with tail index ``tau`` (``tau > 0`` heavy-tailed Frechet, ``tau < 0``
bounded Weibull, ``tau -> 0`` Gumbel), scale ``alpha > 0`` and location
``beta``. Note that ``scipy.stats.genextreme`` uses the opposite sign,
``c = -tau``.

Parameters are estimated by probability-weighted moments (Hosking, Wallis
and Wood 1985) with plotting positions ``(j - 0.35) / n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from perphedge.errors import DegenerateSample, TooFewSamples, ValidationError

GUMBEL_EPS = 1e-10
MIN_SAMPLES = 30
EULER_GAMMA = 0.5772156649015329

# Hosking's shape must stay above -1 for the mean (first PWM) to exist.
_K_LO, _K_HI = -0.999, 40.0


@dataclass(frozen=True)
class GevParams:
    tau: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("tau", "alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"GEV {name} must be finite")
        if self.alpha <= 0:
            raise ValidationError(f"GEV scale must be positive, got {self.alpha}")

    def lower_bound(self) -> float:
        """Left end of the support (``-inf`` unless ``tau > 0``)."""
        return self.beta - self.alpha / self.tau if self.tau > GUMBEL_EPS else -math.inf

    def upper_bound(self) -> float:
        """Right end of the support (``+inf`` unless ``tau < 0``)."""
        return self.beta - self.alpha / self.tau if self.tau < -GUMBEL_EPS else math.inf


def _log_survival_term(p: GevParams, x):
    """``t = (1 + tau z) ** (-1/tau)`` with ``z = (x - beta)/alpha``.

    Returns ``t`` (the quantity inside ``exp(-t)``), saturated to ``+inf``
    below the support and ``0`` above it.
    """
    x = np.asarray(x, dtype=float)
    z = np.atleast_1d((x - p.beta) / p.alpha)
    if abs(p.tau) < GUMBEL_EPS:
        with np.errstate(over="ignore"):
            return np.exp(-z).reshape(x.shape)
    tz = p.tau * z
    out = np.empty_like(z)
    inside = tz > -1.0
    with np.errstate(over="ignore", divide="ignore"):
        out[inside] = np.exp(-np.log1p(tz[inside]) / p.tau)
    # outside the support: below the lower end for tau > 0, above the upper end for tau < 0
    out[~inside] = np.inf if p.tau > 0 else 0.0
    return out.reshape(x.shape)


def cdf(p: GevParams, x):
    """GEV distribution function; accepts scalars or arrays."""
    t = _log_survival_term(p, x)
    out = np.exp(-t)
    return float(out) if np.ndim(out) == 0 else out


def tail_exceedance(p: GevParams, threshold):
    """``P(X > threshold) = 1 - G(threshold)``, computed without cancellation."""
    t = _log_survival_term(p, threshold)
    out = -np.expm1(-t)
    return float(out) if np.ndim(out) == 0 else out


def pdf(p: GevParams, x):
    """GEV density; zero outside the support."""
    x = np.asarray(x, dtype=float)
    z = np.atleast_1d((x - p.beta) / p.alpha)
    out = np.zeros_like(z)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if abs(p.tau) < GUMBEL_EPS:
            dens = np.exp(-z - np.exp(-z)) / p.alpha
            out[:] = np.nan_to_num(dens, nan=0.0, posinf=0.0)
        else:
            tz = p.tau * z
            inside = tz > -1.0
            log_s = np.log1p(tz[inside])
            t = np.exp(-log_s / p.tau)
            dens = np.exp(-t - (1.0 / p.tau + 1.0) * log_s) / p.alpha
            out[inside] = np.nan_to_num(dens, nan=0.0, posinf=0.0)
    out = out.reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def ppf(p: GevParams, q):
    """Quantile function, the inverse of :func:`cdf` on ``(0, 1)``."""
    q = np.asarray(q, dtype=float)
    y = -np.log(q)
    if abs(p.tau) < GUMBEL_EPS:
        out = p.beta - p.alpha * np.log(y)
    else:
        out = p.beta + p.alpha * np.expm1(-p.tau * np.log(y)) / p.tau
    return float(out) if np.ndim(out) == 0 else out


def sample(p: GevParams, size, rng: np.random.Generator) -> np.ndarray:
    """Draws by inverse-CDF sampling."""
    u = rng.random(size)
    # rng.random is in [0, 1); 0 maps to the lower support end, nudge it off
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return np.asarray(ppf(p, u))


def sample_pwms(values) -> tuple[float, float, float]:
    """Plotting-position estimates of ``b_r = E[X F(X)^r]`` for r = 0, 1, 2."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    pp = (np.arange(1, n + 1) - 0.35) / n
    return float(x.mean()), float(np.mean(pp * x)), float(np.mean(pp * pp * x))


def _pwm_ratio(k: float) -> float:
    # (3 b2 - b0) / (2 b1 - b0) as a function of Hosking's shape k = -tau
    if abs(k) < 1e-8:
        return math.log(3) / math.log(2)
    return -math.expm1(-k * math.log(3)) / -math.expm1(-k * math.log(2))


def fit_pwm(samples) -> GevParams:
    """Probability-weighted-moment estimate of ``(tau, alpha, beta)``.

    The shape equation ``(3b2 - b0)/(2b1 - b0) = (1 - 3^-k)/(1 - 2^-k)`` is
    solved exactly rather than with Hosking's polynomial approximation, which
    loses accuracy beyond ``|k| = 0.5``.
    """
    values = np.asarray([getattr(s, "value", s) for s in samples], dtype=float)
    if values.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise DegenerateSample("samples contain non-finite values")
    if np.ptp(values) == 0:
        raise DegenerateSample("all samples are identical")

    b0, b1, b2 = sample_pwms(values)
    l2 = 2.0 * b1 - b0
    if l2 <= 0:
        raise DegenerateSample("non-positive second L-moment")
    target = (3.0 * b2 - b0) / l2

    f = lambda k: _pwm_ratio(k) - target  # noqa: E731
    lo, hi = f(_K_LO), f(_K_HI)
    if lo < 0:
        raise DegenerateSample("tail too heavy for PWM estimation (tau >= 1)")
    if hi > 0:
        k = _K_HI
    else:
        k = brentq(f, _K_LO, _K_HI, xtol=1e-14, rtol=1e-14, maxiter=200)

    if abs(k) < 1e-7:
        alpha = l2 / math.log(2)
        beta = b0 - EULER_GAMMA * alpha
    else:
        g = gamma_fn(1.0 + k)
        alpha = l2 * k / (g * -math.expm1(-k * math.log(2)))
        beta = b0 + alpha * (g - 1.0) / k
    return GevParams(tau=-k, alpha=float(alpha), beta=float(beta))


def empirical_cdf_table(samples, params: GevParams, probs=None) -> list[tuple[float, float, float]]:
    """``(x, empirical CDF, fitted CDF)`` rows at the sample deciles."""
    values = np.sort(np.asarray([getattr(s, "value", s) for s in samples], dtype=float))
    probs = np.arange(0.1, 1.0, 0.1) if probs is None else np.asarray(probs)
    xs = np.quantile(values, probs)
    emp = np.searchsorted(values, xs, side="right") / values.size
    fitted = np.atleast_1d(cdf(params, xs))
    return [(float(x), float(e), float(f)) for x, e, f in zip(xs, emp, fitted)]

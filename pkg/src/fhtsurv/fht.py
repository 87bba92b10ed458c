"""Closed-form first-hitting-time laws for diffusions absorbed at zero.

Two processes are covered, both started at ``x0 > 0`` with an absorbing
barrier at the origin:

* driftless Brownian motion with diffusion coefficient ``D`` (hitting times
  follow a Levy distribution),
* Brownian motion with negative drift ``mu`` and unit diffusion (hitting
  times follow an inverse Gaussian distribution).

Survival functions, densities, log densities, analytic parameter gradients
of the survival functions, and the absorbed-boundary transition density are
provided.  Everything broadcasts over numpy arrays and is free of shared
state, so concurrent use is safe.

Conventions: the drifted process fixes ``D = 1`` (the law depends only on
``x0/|mu|`` and ``x0^2/(2D)``, so ``D`` merely rescales time), and ``t = 0``
is rejected rather than special-cased so callers deal with the boundary
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .special import erf, log_norm_cdf, norm_cdf, norm_pdf

_SQRT_PI = 1.7724538509055160273


class FhtDomainError(ValueError):
    """Raised when a time, position, or parameter is outside the valid domain."""


class DistKind(str, Enum):
    LEVY = "levy"
    INVERSE_GAUSSIAN = "invgauss"


def _check_positive(name, value):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0.0):
        raise FhtDomainError(f"{name} must be finite and > 0")
    return arr


@dataclass(frozen=True)
class LevyParams:
    """Driftless Brownian parameters: initial barrier distance and diffusion.

    Fields may be scalars or broadcastable arrays; both must be positive.
    """

    x0: np.ndarray
    diffusion: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x0", _check_positive("x0", self.x0))
        object.__setattr__(self, "diffusion", _check_positive("diffusion", self.diffusion))


@dataclass(frozen=True)
class InvGaussParams:
    """Drifted Brownian parameters: initial barrier distance and drift < 0.

    The diffusion coefficient is fixed to 1; the API deliberately does not
    accept it.
    """

    x0: np.ndarray
    drift: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x0", _check_positive("x0", self.x0))
        drift = np.asarray(self.drift, dtype=np.float64)
        if not np.all(np.isfinite(drift)) or not np.all(drift < 0.0):
            raise FhtDomainError("drift must be finite and < 0")
        object.__setattr__(self, "drift", drift)


def _check_time(t):
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)) or not np.all(t > 0.0):
        raise FhtDomainError("t must be finite and > 0")
    return t


def levy_survival(p: LevyParams, t):
    """P(T > t) = erf(x0 / sqrt(4 D t)) for the driftless process."""
    t = _check_time(t)
    return erf(p.x0 / np.sqrt(4.0 * p.diffusion * t))


def levy_density(p: LevyParams, t):
    """Hitting-time density x0 / sqrt(4 pi D t^3) * exp(-x0^2 / (4 D t)).

    This is -dS/dt of the survival function (and the zero-drift limit of the
    drifted-case density); at D = 1 it reduces to the usual one-parameter
    Levy form.
    """
    t = _check_time(t)
    return (
        p.x0
        / np.sqrt(4.0 * np.pi * p.diffusion * t**3)
        * np.exp(-p.x0 * p.x0 / (4.0 * p.diffusion * t))
    )


def levy_log_density(p: LevyParams, t):
    t = _check_time(t)
    return (
        np.log(p.x0)
        - 0.5 * np.log(4.0 * np.pi * p.diffusion * t**3)
        - p.x0 * p.x0 / (4.0 * p.diffusion * t)
    )


def levy_survival_grad(p: LevyParams, t):
    """Analytic (dS/dx0, dS/dD); S = erf(u) with u = x0 / sqrt(4 D t)."""
    t = _check_time(t)
    u = p.x0 / np.sqrt(4.0 * p.diffusion * t)
    pref = (2.0 / _SQRT_PI) * np.exp(-u * u)
    ds_dx0 = pref * u / p.x0
    ds_dd = -pref * u / (2.0 * p.diffusion)
    return ds_dx0, ds_dd


def _ig_pieces(p: InvGaussParams, t):
    """Common terms of the drifted-case survival: a, b arguments and the
    overflow-safe image weight exp(-mu*x0) * Phi(b)."""
    s = np.sqrt(2.0 * t)
    a = (p.x0 + p.drift * t) / s
    b = (p.drift * t - p.x0) / s
    # exp(-mu*x0) overflows on its own for strongly negative drift; the
    # product with Phi(b) does not, so form it in log space.
    image = np.exp(-p.drift * p.x0 + log_norm_cdf(b))
    return a, b, image


def ig_survival(p: InvGaussParams, t):
    """P(T > t) = Phi((x0+mu t)/sqrt(2t)) - exp(-mu x0) Phi((mu t-x0)/sqrt(2t)).

    Values are clipped to [0, 1]; exact zeros can occur by underflow at
    extreme times even though the law is strictly positive.
    """
    t = _check_time(t)
    a, _, image = _ig_pieces(p, t)
    return np.clip(norm_cdf(a) - image, 0.0, 1.0)


def ig_density(p: InvGaussParams, t):
    """Inverse Gaussian density x0 / sqrt(4 pi t^3) * exp(-(x0+mu t)^2 / (4t))."""
    t = _check_time(t)
    z = p.x0 + p.drift * t
    return p.x0 / np.sqrt(4.0 * np.pi * t ** 3) * np.exp(-z * z / (4.0 * t))


def ig_log_density(p: InvGaussParams, t):
    t = _check_time(t)
    z = p.x0 + p.drift * t
    return np.log(p.x0) - 0.5 * np.log(4.0 * np.pi * t ** 3) - z * z / (4.0 * t)


def ig_survival_grad(p: InvGaussParams, t):
    """Analytic (dS/dx0, dS/dmu) for the drifted case.

    Using phi(a) = exp(-mu*x0) phi(b), the partials collapse to
    dS/dx0 = 2 phi(a)/sqrt(2t) + mu * W and dS/dmu = x0 * W with
    W = exp(-mu*x0) Phi(b).
    """
    t = _check_time(t)
    a, _, image = _ig_pieces(p, t)
    pa = norm_pdf(a)
    ds_dx0 = 2.0 * pa / np.sqrt(2.0 * t) + p.drift * image
    ds_dmu = p.x0 * image
    return ds_dx0, ds_dmu


def transition_density(kind: DistKind, params, x, t):
    """Density of the absorbed process at position x > 0 and time t > 0.

    Written as the free Gaussian times ``1 - exp(-x*x0/(D t))``, which is the
    method-of-images result in a form that cannot go negative and vanishes
    exactly at the barrier.
    """
    t = _check_time(t)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or not np.all(x >= 0.0):
        raise FhtDomainError("x must be finite and >= 0")
    if kind == DistKind.LEVY:
        x0, d, mu = params.x0, params.diffusion, 0.0
    elif kind == DistKind.INVERSE_GAUSSIAN:
        x0, d, mu = params.x0, 1.0, params.drift
    else:
        raise FhtDomainError(f"unknown distribution kind: {kind!r}")
    v = x - x0 - mu * t
    free = np.exp(-v * v / (4.0 * d * t)) / np.sqrt(4.0 * np.pi * d * t)
    return free * -np.expm1(-x * x0 / (d * t))


def survival(kind: DistKind, params, t):
    """Dispatch on the distribution kind."""
    if kind == DistKind.LEVY:
        return levy_survival(params, t)
    if kind == DistKind.INVERSE_GAUSSIAN:
        return ig_survival(params, t)
    raise FhtDomainError(f"unknown distribution kind: {kind!r}")


def density(kind: DistKind, params, t):
    if kind == DistKind.LEVY:
        return levy_density(params, t)
    if kind == DistKind.INVERSE_GAUSSIAN:
        return ig_density(params, t)
    raise FhtDomainError(f"unknown distribution kind: {kind!r}")


def survival_grad(kind: DistKind, params, t):
    if kind == DistKind.LEVY:
        return levy_survival_grad(params, t)
    if kind == DistKind.INVERSE_GAUSSIAN:
        return ig_survival_grad(params, t)
    raise FhtDomainError(f"unknown distribution kind: {kind!r}")


def make_params(kind: DistKind, x0, second):
    """Build the parameter struct for a kind from its two raw columns."""
    if kind == DistKind.LEVY:
        return LevyParams(x0=x0, diffusion=second)
    if kind == DistKind.INVERSE_GAUSSIAN:
        return InvGaussParams(x0=x0, drift=second)
    raise FhtDomainError(f"unknown distribution kind: {kind!r}")

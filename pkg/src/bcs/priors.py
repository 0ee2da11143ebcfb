"""Shrinkage prior families on beta/sigma and their numerical diagnostics.

Three families are implemented:

* ``StudentT``: the scale-mixture-of-Gaussians construction in which each
  local variance follows an inverse gamma IG(a1, s_n).  Marginally
  beta/sigma is Student-t with 2*a1 degrees of freedom and scale
  sqrt(s_n / a1); ``s_n`` equals the squared global scale, and the extra
  sqrt(1/a1) factor between the global scale and the t scale is a
  consequence of the rate parameterization.
* ``Laplace``: the double exponential with rate ``lam``, i.e.
  (lam/2) exp(-lam |x|).  Included mainly as the over-shrinking baseline.
* ``MixtureGaussian``: a two-component normal mixture with a narrow spike
  (sd ``sigma0``) and a wide slab (sd ``sigma1``), slab weight ``m1``.
  The degenerate weights 0 and 1 are admitted for diagnostics.

``check_conditions`` numerically evaluates, at finite (n, p, s), the
prior-shape requirements under which this kind of posterior is known to
concentrate: small mass outside a shrinking spike interval, non-negligible
density over the signal range, and near-flatness around the true signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special


@dataclass(frozen=True)
class StudentT:
    """Local variances IG(a1, s_n); marginal t with df 2*a1, scale sqrt(s_n/a1)."""

    a1: float
    s_n: float

    family = "student-t"

    def __post_init__(self) -> None:
        if not (self.a1 > 0 and math.isfinite(self.a1)):
            raise ValueError("a1 must be finite and > 0")
        if not (self.s_n > 0 and math.isfinite(self.s_n)):
            raise ValueError("s_n must be finite and > 0")

    @property
    def df(self) -> float:
        return 2.0 * self.a1

    @property
    def scale(self) -> float:
        return math.sqrt(self.s_n / self.a1)


@dataclass(frozen=True)
class Laplace:
    """Double exponential with rate lam: density (lam/2) exp(-lam |x|)."""

    lam: float

    family = "laplace"

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be finite and > 0")


@dataclass(frozen=True)
class MixtureGaussian:
    """Two-component normal mixture: spike sd sigma0, slab sd sigma1, slab weight m1."""

    m1: float
    sigma0: float
    sigma1: float

    family = "mixture-gaussian"

    def __post_init__(self) -> None:
        # m1 in [0, 1] and sigma0 == sigma1 are admitted: the degenerate
        # single-component cases are useful for diagnostics.
        if not (0.0 <= self.m1 <= 1.0):
            raise ValueError("m1 must lie in [0, 1]")
        if not (self.sigma0 > 0 and self.sigma1 > 0):
            raise ValueError("sigma0 and sigma1 must be > 0")
        if self.sigma0 > self.sigma1:
            raise ValueError("sigma0 must not exceed sigma1")


Prior = Union[StudentT, Laplace, MixtureGaussian]


@dataclass(frozen=True)
class SigmaPrior:
    """Inverse-gamma prior IG(a0, b0) on the noise variance."""

    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self) -> None:
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("a0 and b0 must be > 0")

    def to_dict(self) -> dict:
        return {"a0": self.a0, "b0": self.b0}

    @classmethod
    def from_dict(cls, d: dict) -> "SigmaPrior":
        return cls(float(d["a0"]), float(d["b0"]))


def prior_to_dict(prior: Prior) -> dict:
    if isinstance(prior, StudentT):
        return {"family": prior.family, "a1": prior.a1, "s_n": prior.s_n}
    if isinstance(prior, Laplace):
        return {"family": prior.family, "lam": prior.lam}
    if isinstance(prior, MixtureGaussian):
        return {
            "family": prior.family,
            "m1": prior.m1,
            "sigma0": prior.sigma0,
            "sigma1": prior.sigma1,
        }
    raise TypeError(f"not a prior: {prior!r}")


def prior_from_dict(d: dict) -> Prior:
    family = d["family"]
    if family == StudentT.family:
        return StudentT(a1=float(d["a1"]), s_n=float(d["s_n"]))
    if family == Laplace.family:
        return Laplace(lam=float(d["lam"]))
    if family == MixtureGaussian.family:
        return MixtureGaussian(
            m1=float(d["m1"]), sigma0=float(d["sigma0"]), sigma1=float(d["sigma1"])
        )
    raise ValueError(f"unknown prior family: {family!r}")


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _norm_logpdf(x: np.ndarray, sd: float) -> np.ndarray:
    return -_LOG_SQRT_2PI - math.log(sd) - 0.5 * (x / sd) ** 2


def log_density(prior: Prior, x: float | np.ndarray) -> float | np.ndarray:
    """Log prior density at x (finite for every finite x)."""
    arr = np.asarray(x, dtype=float)
    if isinstance(prior, StudentT):
        df, scale = prior.df, prior.scale
        z = arr / scale
        out = (
            math.lgamma((df + 1.0) / 2.0)
            - math.lgamma(df / 2.0)
            - 0.5 * math.log(df * math.pi)
            - math.log(scale)
            - 0.5 * (df + 1.0) * np.log1p(z * z / df)
        )
    elif isinstance(prior, Laplace):
        out = math.log(prior.lam / 2.0) - prior.lam * np.abs(arr)
    elif isinstance(prior, MixtureGaussian):
        with np.errstate(divide="ignore"):
            log_spike = math.log(1.0 - prior.m1) if prior.m1 < 1.0 else -math.inf
            log_slab = math.log(prior.m1) if prior.m1 > 0.0 else -math.inf
        out = np.logaddexp(
            log_spike + _norm_logpdf(arr, prior.sigma0),
            log_slab + _norm_logpdf(arr, prior.sigma1),
        )
    else:
        raise TypeError(f"not a prior: {prior!r}")
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def tail_mass(prior: Prior, a: float) -> float:
    """Prior mass outside [-a, a], via the family's closed-form CDF."""
    if a < 0:
        raise ValueError("a must be >= 0")
    if a == 0.0:
        return 1.0
    if isinstance(prior, StudentT):
        # stdtr is the t CDF; two-sided tail by symmetry.
        return float(2.0 * special.stdtr(prior.df, -a / prior.scale))
    if isinstance(prior, Laplace):
        return float(math.exp(-prior.lam * a))
    if isinstance(prior, MixtureGaussian):
        spike = special.erfc(a / (prior.sigma0 * math.sqrt(2.0)))
        slab = special.erfc(a / (prior.sigma1 * math.sqrt(2.0)))
        return float((1.0 - prior.m1) * spike + prior.m1 * slab)
    raise TypeError(f"not a prior: {prior!r}")


def solve_threshold(prior: Prior, target: float, *, max_doublings: int = 2000) -> float:
    """Find a >= 0 with tail_mass(prior, a) == target (relative error <= 1e-8).

    The tail is continuous and strictly decreasing from 1 at a = 0, so a
    bracket is found by doubling and then refined by bracketed root
    finding.  Raises ``RuntimeError`` if no bracket emerges within the
    doubling cap, which signals pathological prior parameters.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in the open interval (0, 1)")

    hi = _initial_scale(prior)
    for _ in range(max_doublings):
        if tail_mass(prior, hi) < target:
            break
        hi *= 2.0
    else:
        raise RuntimeError(f"no bracket found for threshold target {target}")

    from scipy.optimize import brentq

    a = brentq(
        lambda t: tail_mass(prior, t) - target,
        0.0,
        hi,
        xtol=1e-300,
        rtol=8.9e-16,
        maxiter=300,
    )
    achieved = tail_mass(prior, a)
    if abs(achieved - target) > 1e-8 * target:
        raise RuntimeError(
            f"threshold search did not converge: tail({a}) = {achieved}, target {target}"
        )
    return float(a)


def _initial_scale(prior: Prior) -> float:
    if isinstance(prior, StudentT):
        return prior.scale
    if isinstance(prior, Laplace):
        return 1.0 / prior.lam
    return prior.sigma1


def scale_from_gamma(n: int, p: int, gamma: float) -> float:
    """Global prior scale lam_n = 1 / (sqrt(n log p) * p^gamma)."""
    if n < 2 or p < 2:
        raise ValueError("n and p must be at least 2")
    return 1.0 / (math.sqrt(n * math.log(p)) * p**gamma)


def student_t_from_gamma(n: int, p: int, gamma: float, a1: float = 1.5) -> StudentT:
    """Student-t prior at grid point gamma: mixing rate s_n = lam_n^2."""
    lam = scale_from_gamma(n, p, gamma)
    return StudentT(a1=a1, s_n=lam * lam)


def student_t_family(a1: float = 1.5):
    """Factory ``(n, p, gamma) -> StudentT`` for grid tuning."""

    def make(n: int, p: int, gamma: float) -> StudentT:
        return student_t_from_gamma(n, p, gamma, a1)

    return make


def prior_marginal_sd(prior: Prior) -> float | None:
    """Marginal standard deviation, or None when it does not exist (df <= 2)."""
    if isinstance(prior, StudentT):
        if prior.df <= 2.0:
            return None
        return prior.scale * math.sqrt(prior.df / (prior.df - 2.0))
    if isinstance(prior, Laplace):
        return math.sqrt(2.0) / prior.lam
    if isinstance(prior, MixtureGaussian):
        return math.sqrt((1.0 - prior.m1) * prior.sigma0**2 + prior.m1 * prior.sigma1**2)
    raise TypeError(f"not a prior: {prior!r}")


@dataclass(frozen=True)
class ConditionReport:
    """Numerical evaluation of the concentration/flatness prior conditions.

    ``passes_consistency`` requires the spike mass condition
    tail_mass(a_n) <= p^-(1+u_target) together with a density floor over
    the signal range [-E_n, E_n]: -log inf g <= c_log_density * log p.
    ``passes_selection`` checks the flatness surrogate
    s * log(l_n) <= log p, with l_n the worst density ratio over windows
    of half-width c0 * epsilon_n around the true signal values.
    ``u_achieved`` is the effective exponent -log(tail)/log(p) - 1;
    ``epsilon_n = m_const * sqrt(s log p / n)`` is indicative only, since
    the constant in front of the rate is not pinned by theory.
    """

    a_n: float
    u_achieved: float
    tail_mass: float
    log_inf_density: float
    e_n: float
    epsilon_n: float
    l_n: float
    passes_consistency: bool
    passes_selection: bool
    inputs: dict

    def to_dict(self) -> dict:
        return {
            "a_n": self.a_n,
            "u_achieved": self.u_achieved,
            "tail_mass": self.tail_mass,
            "log_inf_density": self.log_inf_density,
            "e_n": self.e_n,
            "epsilon_n": self.epsilon_n,
            "l_n": self.l_n,
            "passes_consistency": self.passes_consistency,
            "passes_selection": self.passes_selection,
            "inputs": self.inputs,
        }


def check_conditions(
    prior: Prior,
    n: int,
    p: int,
    s: int,
    e_n: float,
    u_target: float,
    beta_star_over_sigma: np.ndarray | None = None,
    *,
    m_const: float = 1.0,
    c0: float = 3.0,
    c_log_density: float = 10.0,
    grid_points: int = 1001,
) -> ConditionReport:
    """Evaluate the prior-shape conditions at finite (n, p, s).

    All implemented families are symmetric and unimodal, so the density
    infimum over [-e_n, e_n] is attained at the endpoints and is read off
    directly rather than searched.  The flatness ratio l_n is evaluated by
    a dense grid (``grid_points`` per window) over windows centered at the
    nonzero entries of ``beta_star_over_sigma`` (a single window centered
    at 0 when no signal is given).  A report is always produced.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    if p < n:
        raise ValueError("requires the high-dimensional regime p >= n")
    if e_n <= 0:
        raise ValueError("e_n must be > 0")
    logp = math.log(p)
    a_n = math.sqrt(s * logp / n) / p
    tail = tail_mass(prior, a_n)
    u_achieved = -math.log(max(tail, 1e-308)) / logp - 1.0
    log_inf_density = -float(log_density(prior, e_n))
    eps_n = m_const * math.sqrt(s * logp / n)

    centers = None
    if beta_star_over_sigma is not None:
        b = np.asarray(beta_star_over_sigma, dtype=float)
        centers = b[b != 0.0]
    if centers is None or centers.size == 0:
        centers = np.zeros(1)
    half = c0 * eps_n
    l_n = 1.0
    for c in centers:
        grid = np.linspace(c - half, c + half, grid_points)
        ld = log_density(prior, grid)
        l_n = max(l_n, float(math.exp(np.max(ld) - np.min(ld))))

    passes_consistency = tail <= p ** (-(1.0 + u_target)) and log_inf_density <= c_log_density * logp
    passes_selection = s * math.log(l_n) <= logp

    inputs = {
        "prior": prior_to_dict(prior),
        "n": int(n),
        "p": int(p),
        "s": int(s),
        "u_target": float(u_target),
        "m_const": float(m_const),
        "c0": float(c0),
        "c_log_density": float(c_log_density),
        "grid_points": int(grid_points),
    }
    return ConditionReport(
        a_n=a_n,
        u_achieved=u_achieved,
        tail_mass=tail,
        log_inf_density=log_inf_density,
        e_n=float(e_n),
        epsilon_n=eps_n,
        l_n=l_n,
        passes_consistency=bool(passes_consistency),
        passes_selection=bool(passes_selection),
        inputs=inputs,
    )

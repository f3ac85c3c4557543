"""Joint duration/rate laws for session traffic.

A law describes the pair (duration, rate) attached to every session
arrival.  All built-in laws have a regularly varying duration tail with
index ``alpha`` in (0, 2), which is the parameter the estimator targets.
Built-ins:

* ``pareto_law``       -- survival (1 v t)^(-alpha), rate independent.
* ``stable_law``       -- duration is |S| for S symmetric alpha-stable,
                          rate independent.
* ``two_regime_law``   -- transferred volume W = U*eta is heavy-tailed for
                          rates above a threshold and light-tailed below it.
* ``custom_law``       -- user-supplied sampler and survival function.

Law objects are immutable and safe to share across workers; every sampling
routine takes the caller's generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.stats import levy_stable, norm

from .errors import (
    InfiniteMeanError,
    LawValidationError,
    QuadratureError,
    UnsupportedMomentError,
)

PARETO = "pareto"
STABLE = "stable"
TWO_REGIME = "two_regime"
CUSTOM = "custom"

_QUAD_RTOL = 1e-8


@dataclass(frozen=True)
class RateLaw:
    """Marginal law of the session rate U.

    ``kind`` is one of ``point`` (U == value), ``lognormal`` (parameters
    mu, sigma of log U) or ``table`` (finite discrete law).  All moments
    used by the package are available in closed form.
    """

    kind: str
    value: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("point", "lognormal", "table"):
            raise LawValidationError(f"unknown rate law kind {self.kind!r}")
        if self.kind == "lognormal" and self.sigma <= 0:
            raise LawValidationError("lognormal sigma must be positive")
        if self.kind == "table":
            if len(self.values) == 0 or len(self.values) != len(self.probs):
                raise LawValidationError("table law needs matching values/probs")
            if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
                raise LawValidationError("table probabilities must sum to 1")

    @property
    def strictly_positive(self) -> bool:
        if self.kind == "point":
            return self.value > 0
        if self.kind == "table":
            return min(self.values) > 0
        return True

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(size, self.value)
        if self.kind == "lognormal":
            return rng.lognormal(self.mu, self.sigma, size)
        return rng.choice(np.asarray(self.values, dtype=float), size=size,
                          p=np.asarray(self.probs, dtype=float))

    def moment(self, p: float) -> float:
        """Signed moment E[U^p]."""
        if self.kind == "point":
            return float(self.value) ** p
        if self.kind == "lognormal":
            return math.exp(p * self.mu + 0.5 * p * p * self.sigma ** 2)
        return float(sum(w * v ** p for v, w in zip(self.values, self.probs)))

    def abs_moment(self, p: float) -> float:
        """Absolute moment E[|U|^p]."""
        if self.kind == "point":
            return abs(float(self.value)) ** p
        if self.kind == "lognormal":
            return self.moment(p)
        return float(sum(w * abs(v) ** p for v, w in zip(self.values, self.probs)))

    def partial_moment(self, p: float, cut: float, above: bool) -> float:
        """E[U^p 1{U >= cut}] (``above``) or E[U^p 1{U < cut}].

        Only meaningful for strictly positive laws, which is validated at
        law construction wherever partial moments are needed.
        """
        if self.kind == "point":
            inside = self.value >= cut if above else self.value < cut
            return self.value ** p if inside else 0.0
        if self.kind == "table":
            vals = np.asarray(self.values, dtype=float)
            prob = np.asarray(self.probs, dtype=float)
            mask = vals >= cut if above else vals < cut
            return float(np.sum(prob[mask] * vals[mask] ** p))
        # lognormal: E[U^p 1{U>=a}] = exp(p mu + p^2 s^2/2) Phi((mu + p s^2 - ln a)/s)
        full = self.moment(p)
        if cut <= 0:
            return full if above else 0.0
        z = (self.mu + p * self.sigma ** 2 - math.log(cut)) / self.sigma
        upper = full * float(norm.cdf(z))
        return upper if above else full - upper


def point_rate(value: float = 1.0) -> RateLaw:
    return RateLaw("point", value=value)


def lognormal_rate(mu: float = 0.0, sigma: float = 1.0) -> RateLaw:
    return RateLaw("lognormal", mu=mu, sigma=sigma)


def table_rate(values, probs) -> RateLaw:
    return RateLaw("table", values=tuple(values), probs=tuple(probs))


@dataclass(frozen=True)
class DurationRateLaw:
    """Joint law of (duration, rate); see the module docstring for kinds."""

    kind: str
    alpha: float
    rate_law: RateLaw
    p_star: int = 4
    sigma: float = 1.0          # stable: scale in E[cos(duration*t)] = exp(-sigma |t|^alpha)
    u0: float = 1.0             # two_regime: rate threshold between regimes
    duration_sampler: Optional[Callable] = field(default=None, compare=False)
    duration_survival_fn: Optional[Callable] = field(default=None, compare=False)
    duration_density_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise LawValidationError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.p_star < 2:
            raise LawValidationError("p_star must be at least 2")
        if self.kind not in (PARETO, STABLE, TWO_REGIME, CUSTOM):
            raise LawValidationError(f"unknown law kind {self.kind!r}")
        if self.kind == STABLE and self.sigma <= 0:
            raise LawValidationError("stable scale must be positive")
        if self.kind == TWO_REGIME:
            if self.u0 <= 0:
                raise LawValidationError("two-regime threshold must be positive")
            if not self.rate_law.strictly_positive:
                raise LawValidationError("two-regime rates must be strictly positive")
        if self.kind == CUSTOM and (self.duration_sampler is None
                                    or self.duration_survival_fn is None):
            raise LawValidationError("custom law needs a sampler and a survival function")

    # ------------------------------------------------------------------
    # sampling
    # ------------------------------------------------------------------

    def duration_from_uniform(self, u):
        """Inverse-CDF transform for the Pareto duration: (1-u)^(-1/alpha)."""
        if self.kind != PARETO:
            raise LawValidationError("inverse CDF only available for the Pareto law")
        return np.asarray(1.0 - u) ** (-1.0 / self.alpha)

    def sample_marks(self, rng: np.random.Generator, size: int):
        """Draw ``size`` i.i.d. (duration, rate) pairs.

        Deterministic given the generator state; durations are drawn
        before rates except for the two-regime law, whose duration is a
        function of the rate.
        """
        if self.kind == PARETO:
            durations = self.duration_from_uniform(rng.random(size))
            rates = self.rate_law.sample(rng, size)
        elif self.kind == STABLE:
            durations = self.sigma ** (1.0 / self.alpha) * np.abs(
                _standard_sym_stable(rng, self.alpha, size))
            rates = self.rate_law.sample(rng, size)
        elif self.kind == TWO_REGIME:
            rates = self.rate_law.sample(rng, size)
            volumes = np.empty(size)
            heavy = rates >= self.u0
            volumes[heavy] = (1.0 - rng.random(int(heavy.sum()))) ** (-1.0 / self.alpha)
            volumes[~heavy] = rng.exponential(1.0, int((~heavy).sum()))
            durations = volumes / rates
        else:
            durations = np.asarray(self.duration_sampler(rng, size), dtype=float)
            rates = self.rate_law.sample(rng, size)
        return durations, rates

    def sample_mark(self, rng: np.random.Generator):
        durations, rates = self.sample_marks(rng, 1)
        return float(durations[0]), float(rates[0])

    # ------------------------------------------------------------------
    # tail and moment functions
    # ------------------------------------------------------------------

    def duration_survival(self, t):
        """P(duration > t), vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind == PARETO:
            return np.maximum(t, 1.0) ** (-self.alpha)
        if self.kind == STABLE:
            scale = self.sigma ** (1.0 / self.alpha)
            out = 2.0 * levy_stable.sf(np.maximum(t, 0.0) / scale, self.alpha, 0.0)
            return np.minimum(out, 1.0)
        if self.kind == TWO_REGIME:
            return self._two_regime_tail(0, t)
        return np.clip(np.asarray(self.duration_survival_fn(t), dtype=float), 0.0, 1.0)

    def tail_moment(self, p: int, t) -> float:
        """E[|U|^p 1{duration > t}], exact where a closed form exists.

        The value at t = 0 is E[|U|^p]; the function is non-increasing and
        regularly varying with index -alpha.
        """
        if p > self.p_star:
            raise UnsupportedMomentError(
                f"moment order {p} exceeds declared maximum {self.p_star}")
        t = float(t)
        if t < 0:
            t = 0.0
        if self.kind == TWO_REGIME:
            return self._two_regime_tail(p, t)
        return self.rate_law.abs_moment(p) * float(self.duration_survival(t))

    def tail_prefactor(self, p: int, t) -> float:
        """Slowly varying part of the tail moment: tail_moment(p, t) * t^alpha."""
        return self.tail_moment(p, t) * float(t) ** self.alpha

    def tail_functions(self, p: int) -> "TailFunctions":
        if p > self.p_star:
            raise UnsupportedMomentError(
                f"moment order {p} exceeds declared maximum {self.p_star}")
        return TailFunctions(law=self, p=p)

    def _two_regime_tail(self, p, t):
        """E[U^p 1{duration > t}] for the two-regime law.

        Conditional on a rate u >= u0 the transferred volume W survives w
        with probability (w v 1)^(-alpha); below u0 it survives with
        probability exp(-w).  Durations are W/U, so the heavy part reduces
        to partial rate moments and the light part to one quadrature.
        """
        scalar = np.isscalar(t) or np.asarray(t).ndim == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(ts)
        rl = self.rate_law
        for i, tv in enumerate(ts):
            if tv <= 0.0:
                out[i] = rl.moment(p)
                continue
            ustar = max(self.u0, 1.0 / tv)
            heavy = rl.partial_moment(p, self.u0, above=True) \
                - rl.partial_moment(p, ustar, above=True) \
                + tv ** (-self.alpha) * rl.partial_moment(p - self.alpha, ustar, above=True)
            out[i] = heavy + self._light_tail_part(p, tv)
        return float(out[0]) if scalar else out

    def _light_tail_part(self, p, t):
        """E[U^p exp(-U t) 1{U < u0}]."""
        rl = self.rate_law
        if rl.kind == "point":
            return rl.value ** p * math.exp(-rl.value * t) if rl.value < self.u0 else 0.0
        if rl.kind == "table":
            return float(sum(w * v ** p * math.exp(-v * t)
                             for v, w in zip(rl.values, rl.probs) if v < self.u0))
        dist_pdf = _lognorm_pdf(rl.mu, rl.sigma)
        val, err = integrate.quad(lambda u: u ** p * math.exp(-u * t) * dist_pdf(u),
                                  0.0, self.u0, epsrel=_QUAD_RTOL, epsabs=1e-14)
        return val

    # ------------------------------------------------------------------
    # mean-type moments (finite only for alpha > 1)
    # ------------------------------------------------------------------

    def mean_duration(self) -> float:
        """E[duration]; raises InfiniteMeanError when it does not exist."""
        self._require_stable_regime()
        a = self.alpha
        if self.kind == PARETO:
            return a / (a - 1.0)
        if self.kind == STABLE:
            return self.sigma ** (1.0 / a) * (2.0 / math.pi) * math.gamma(1.0 - 1.0 / a)
        if self.kind == TWO_REGIME:
            rl = self.rate_law
            return (a / (a - 1.0)) * rl.partial_moment(-1.0, self.u0, above=True) \
                + rl.partial_moment(-1.0, self.u0, above=False)
        return self._integrate_survival()

    def rate_duration_moment(self, p: int):
        """(E[U^p * duration], E[duration]).

        The two-regime law couples U and the duration, every other built-in
        factorises.  Raises InfiniteMeanError when alpha <= 1.
        """
        if p > self.p_star:
            raise UnsupportedMomentError(
                f"moment order {p} exceeds declared maximum {self.p_star}")
        mean_eta = self.mean_duration()
        if self.kind == TWO_REGIME:
            a, rl = self.alpha, self.rate_law
            cross = (a / (a - 1.0)) * rl.partial_moment(p - 1.0, self.u0, above=True) \
                + rl.partial_moment(p - 1.0, self.u0, above=False)
        else:
            cross = self.rate_law.moment(p) * mean_eta
        return cross, mean_eta

    def truncated_mean_duration(self, t: float) -> float:
        """E[duration ^ t] = integral of the survival over [0, t]; always finite."""
        t = float(t)
        if t <= 0:
            return 0.0
        if self.kind == PARETO:
            a = self.alpha
            if t <= 1.0:
                return t
            return 1.0 + (1.0 - t ** (1.0 - a)) / (a - 1.0)
        val, err = integrate.quad(lambda v: float(self.duration_survival(v)), 0.0, t,
                                  epsrel=_QUAD_RTOL, limit=200)
        return val

    def _integrate_survival(self) -> float:
        val, err = integrate.quad(lambda v: float(self.duration_survival(v)),
                                  0.0, np.inf, epsrel=_QUAD_RTOL, limit=200)
        if not math.isfinite(val):
            raise QuadratureError("mean duration quadrature did not converge")
        return val

    def _require_stable_regime(self):
        if self.alpha <= 1.0:
            raise InfiniteMeanError(
                f"E[duration] is infinite for alpha = {self.alpha} <= 1")

    # ------------------------------------------------------------------
    # equilibrium (size-biased) sampling for the stationary start
    # ------------------------------------------------------------------

    @property
    def supports_stationary_init(self) -> bool:
        return self.kind == PARETO and self.alpha > 1.0

    def sample_size_biased(self, rng: np.random.Generator, size: int):
        """Draw (total duration, rate) under the length-biased law v*nu(dv,dw)/E[duration].

        Only the Pareto law has an invertible size-biased transform; other
        laws should use a burn-in start instead.
        """
        self._require_stable_regime()
        if self.kind != PARETO:
            raise LawValidationError(
                f"{self.kind} law has no closed size-biased sampler; "
                "use a burn-in start instead")
        totals = (1.0 - rng.random(size)) ** (-1.0 / (self.alpha - 1.0))
        rates = self.rate_law.sample(rng, size)
        return totals, rates


@dataclass(frozen=True)
class TailFunctions:
    """Tail moment of fixed order p and its slowly varying part."""

    law: DurationRateLaw
    p: int

    def H(self, t) -> float:
        return self.law.tail_moment(self.p, t)

    def L(self, t) -> float:
        return self.law.tail_prefactor(self.p, t)


# ----------------------------------------------------------------------
# factories
# ----------------------------------------------------------------------

def pareto_law(alpha: float, rate_law: RateLaw | None = None, p_star: int = 4
               ) -> DurationRateLaw:
    """Duration survival exactly (1 v t)^(-alpha), rate independent of it."""
    return DurationRateLaw(PARETO, alpha, rate_law or point_rate(1.0), p_star)


def stable_law(alpha: float, sigma: float = 1.0, rate_law: RateLaw | None = None,
               p_star: int = 4) -> DurationRateLaw:
    """Duration |S| with S symmetric alpha-stable, E[cos(S t)] = exp(-sigma |t|^alpha)."""
    return DurationRateLaw(STABLE, alpha, rate_law or point_rate(1.0), p_star,
                           sigma=sigma)


def two_regime_law(alpha: float, u0: float = 1.0, rate_law: RateLaw | None = None,
                   p_star: int = 4) -> DurationRateLaw:
    """Transferred volume heavy-tailed above the rate threshold, exponential below."""
    return DurationRateLaw(TWO_REGIME, alpha, rate_law or lognormal_rate(0.0, 1.0),
                           p_star, u0=u0)


def custom_law(alpha: float, duration_sampler: Callable, duration_survival: Callable,
               rate_law: RateLaw | None = None, p_star: int = 4,
               duration_density: Callable | None = None) -> DurationRateLaw:
    """User-supplied independent duration law.

    The caller is responsible for the regular-variation assumptions; the
    package validates only its built-ins.
    """
    return DurationRateLaw(CUSTOM, alpha, rate_law or point_rate(1.0), p_star,
                           duration_sampler=duration_sampler,
                           duration_survival_fn=duration_survival,
                           duration_density_fn=duration_density)


def _standard_sym_stable(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Chambers-Mallows-Stuck draw of a standard symmetric alpha-stable variate.

    Characteristic function exp(-|t|^alpha).
    """
    v = (rng.random(size) - 0.5) * math.pi
    w = rng.exponential(1.0, size)
    if abs(alpha - 1.0) < 1e-12:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def _lognorm_pdf(mu: float, sigma: float):
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def pdf(u):
        if u <= 0:
            return 0.0
        z = (math.log(u) - mu) / sigma
        return c / u * math.exp(-0.5 * z * z)

    return pdf

"""Analytic ground truth: moments, covariances and variance prefactors.

Everything here is computed independently of the simulation and transform
code paths (closed forms where available, quadrature otherwise), so the
test suite can compare Monte Carlo estimates against these values.

The key object is the coefficient-variance law

    var(d_jk) = prefactor(2^j) * 2^((2-alpha) j),

where ``prefactor(z) = z^alpha * E[ U^2 * G(duration/z) ]`` and G(u) is the
squared-increment energy of the mother wavelet's primitive,

    G(u) = integral (Psi(t+u) - Psi(t))^2 dt.

The working primitive is piecewise linear on a dyadic lattice, so G is
evaluated exactly: lag correlations of the table give exact lattice values
and a closed form covers the sub-lattice region that dominates the
integrals when alpha is close to 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .errors import InfiniteMeanError, SessionWaveError
from .laws import PARETO, STABLE, TWO_REGIME, DurationRateLaw
from .wavelets import WaveletPair
from .whittle import effective_decay

_QUAD_RTOL = 1e-8


# ----------------------------------------------------------------------
# first and second order moments of the path
# ----------------------------------------------------------------------

def mean_cov_nonstationary(law: DurationRateLaw, s: float, t: float):
    """(E[X(t)], cov(X(s), X(t))) for the path started empty, 0 <= s <= t.

    The mean is E[U (duration ^ t)]; the covariance is the integral of the
    second tail moment over [t-s, t].
    """
    if not 0.0 <= s <= t:
        raise SessionWaveError("need 0 <= s <= t")
    mean = _truncated_cross_mean(law, t)
    cov = _tail2_integral(law, t - s, t)
    return mean, cov


def mean_cov_stationary(law: DurationRateLaw, t: float):
    """(mean, cov at lag t, Karamata tail equivalent) of the stationary path.

    mean = E[U duration]; cov(lag t) = integral of the second tail moment
    over [t, inf); the third entry is the regular-variation equivalent
    tail_prefactor(2, t) * t^(1-alpha) / (alpha - 1).
    """
    if law.alpha <= 1.0:
        raise InfiniteMeanError("stationary moments need alpha > 1")
    mean, _ = law.rate_duration_moment(1)
    cov = _tail2_integral(law, t, math.inf)
    karamata = math.nan
    if t > 0:
        karamata = law.tail_prefactor(2, t) * t ** (1.0 - law.alpha) / (law.alpha - 1.0)
    return mean, cov, karamata


def scaled_cov_limit(law: DurationRateLaw, s: float, t: float, T_grid):
    """Convergence table of cov(X(Ts), X(Tt)) / (L2(T) T^(1-alpha)) toward
    its limit C = integral of v^-alpha over [t-s, s].

    Returns one row per T: (T, ratio, C).
    """
    if not t > s > 0:
        raise SessionWaveError("need t > s > 0")
    a = law.alpha
    C = _power_integral(t - s, s, a)
    rows = []
    for T in T_grid:
        cov = _tail2_integral(law, T * (t - s), T * t)
        denom = law.tail_prefactor(2, T) * T ** (1.0 - a)
        rows.append((float(T), cov / denom, C))
    return rows


def _power_integral(a: float, b: float, alpha: float) -> float:
    """Integral of v^-alpha over [a, b], 0 for an empty interval."""
    if b <= a:
        return 0.0
    if abs(alpha - 1.0) < 1e-12:
        return math.log(b / a)
    return (b ** (1.0 - alpha) - a ** (1.0 - alpha)) / (1.0 - alpha)


def _pareto_survival_antiderivative(x: float, alpha: float) -> float:
    """Integral of (1 v v)^-alpha over [0, x]."""
    if x <= 1.0:
        return x
    if abs(alpha - 1.0) < 1e-12:
        return 1.0 + math.log(x)
    return 1.0 + (1.0 - x ** (1.0 - alpha)) / (alpha - 1.0)


def _tail2_integral(law: DurationRateLaw, lo: float, hi: float) -> float:
    """Integral of the second tail moment over [lo, hi] (hi may be inf)."""
    if law.p_star < 2:
        raise SessionWaveError("law does not declare a second moment")
    a = law.alpha
    if law.kind == PARETO:
        eu2 = law.rate_law.abs_moment(2)
        if math.isinf(hi):
            if a <= 1.0:
                raise InfiniteMeanError("tail integral diverges for alpha <= 1")
            top = 1.0 + 1.0 / (a - 1.0)
        else:
            top = _pareto_survival_antiderivative(hi, a)
        return eu2 * (top - _pareto_survival_antiderivative(lo, a))
    if math.isinf(hi) and a <= 1.0:
        raise InfiniteMeanError("tail integral diverges for alpha <= 1")
    val, err = integrate.quad(lambda v: law.tail_moment(2, v), lo, hi,
                              epsrel=_QUAD_RTOL, limit=400)
    return val


def _truncated_cross_mean(law: DurationRateLaw, t: float) -> float:
    """E[U (duration ^ t)]; equals E[W ^ U t] for the two-regime law."""
    if law.kind != TWO_REGIME:
        return law.rate_law.moment(1) * law.truncated_mean_duration(t)
    a, rl = law.alpha, law.rate_law

    def cut_mean(u):
        x = u * t
        if u >= law.u0:
            return min(x, 1.0) + _power_integral(1.0, max(x, 1.0), a)
        return 1.0 - math.exp(-x)

    if rl.kind == "point":
        return cut_mean(rl.value)
    if rl.kind == "table":
        return float(sum(w * cut_mean(v) for v, w in zip(rl.values, rl.probs)))
    from .laws import _lognorm_pdf
    pdf = _lognorm_pdf(rl.mu, rl.sigma)
    val, err = integrate.quad(lambda u: cut_mean(u) * pdf(u), 0.0, np.inf,
                              epsrel=_QUAD_RTOL, limit=400)
    return val


# ----------------------------------------------------------------------
# shift energy of the primitive, exact for the tabulated pair
# ----------------------------------------------------------------------

class _ShiftEnergy:
    """Exact evaluation of G and of its power-weighted tail integrals."""

    def __init__(self, wavelet: WaveletPair):
        base = wavelet.primitive_table.astype(float)
        self.h = 2.0 ** -wavelet.resolution
        slopes = np.diff(base) / self.h
        self.p2 = float(np.dot(slopes, slopes))
        self.p11 = float(np.dot(slopes[:-1], slopes[1:]))
        # quarter-lattice refinement (exact for the piecewise-linear table)
        fine = base
        for _ in range(2):
            out = np.empty(2 * len(fine) - 1)
            out[::2] = fine
            out[1::2] = 0.5 * (fine[:-1] + fine[1:])
            fine = out
        self.step = self.h / 4.0
        corr = fftconvolve(fine, fine[::-1])
        mid = len(fine) - 1
        lags = corr[mid:]                      # C(0), C(1), ...
        c_minus = np.concatenate([[lags[1]], lags[:-1]])
        c_plus = np.concatenate([lags[1:], [0.0]])
        rho = (self.step / 6.0) * (4.0 * lags + c_minus + c_plus)
        self.norm_sq = float(rho[0])           # integral of Psi^2
        self.lattice = np.arange(len(fine)) * self.step
        self.g_lattice = np.maximum(2.0 * (self.norm_sq - rho), 0.0)
        self.M = wavelet.M
        self._alpha_cache: dict = {}

    # -- pointwise ------------------------------------------------------

    def g(self, u):
        """G(u), vectorised; exact below the lattice step, interpolated above."""
        u = np.asarray(u, dtype=float)
        small = (self.p2 * self.h) * u ** 2 + ((self.p11 - self.p2) / 3.0) * u ** 3
        interp = np.interp(u, self.lattice, self.g_lattice,
                           right=2.0 * self.norm_sq)
        out = np.where(u <= self.h, small, interp)
        return np.where(u <= 0.0, 0.0, out)

    # -- integrals ------------------------------------------------------

    def tail_integral(self, x: float, alpha: float) -> float:
        """Integral of G(u) u^(-alpha-1) over [x, inf)."""
        if x < 0:
            raise SessionWaveError("lower limit must be nonnegative")
        total = 0.0
        if x < self.h:
            total += self._small_piece(x, self.h, alpha)
            x = self.h
        if x < self.M:
            cells, suffix = self._cells(alpha)
            i = int(np.searchsorted(self.lattice, x, side="left"))
            # partial cell from x to the next lattice point
            if i > 0 and self.lattice[i - 1] < x < self.lattice[min(i, len(self.lattice) - 1)]:
                lo, hi = x, self.lattice[i]
                ga = float(self.g(np.asarray(lo)))
                gb = self.g_lattice[i]
                total += _linear_power_integral(lo, hi, ga, gb, alpha)
                total += suffix[i]
            else:
                total += suffix[i]
            x = self.M
        total += 2.0 * self.norm_sq * x ** (-alpha) / alpha
        return total

    def _small_piece(self, a: float, b: float, alpha: float) -> float:
        c2 = self.p2 * self.h
        c3 = (self.p11 - self.p2) / 3.0
        i2 = (b ** (2.0 - alpha) - a ** (2.0 - alpha)) / (2.0 - alpha)
        i3 = (b ** (3.0 - alpha) - a ** (3.0 - alpha)) / (3.0 - alpha)
        return c2 * i2 + c3 * i3

    def _cells(self, alpha: float):
        key = round(alpha, 12)
        if key not in self._alpha_cache:
            lo = self.lattice[:-1]
            hi = self.lattice[1:]
            ga = self.g_lattice[:-1]
            gb = self.g_lattice[1:]
            start = int(np.searchsorted(self.lattice, self.h))
            cells = np.zeros(len(lo))
            cells[start:] = _linear_power_integral(lo[start:], hi[start:],
                                                   ga[start:], gb[start:], alpha)
            suffix = np.zeros(len(self.lattice))
            suffix[:-1] = np.cumsum(cells[::-1])[::-1]
            self._alpha_cache[key] = (cells, suffix)
        return self._alpha_cache[key]


def _linear_power_integral(lo, hi, ga, gb, alpha):
    """Integral of (linear through (lo,ga),(hi,gb)) * u^(-alpha-1) over [lo, hi]."""
    slope = (gb - ga) / (hi - lo)
    c0 = ga - slope * lo
    if abs(alpha - 1.0) < 1e-12:
        term0 = c0 * (lo ** -alpha - hi ** -alpha) / alpha
        term1 = slope * (np.log(hi) - np.log(lo))
        return term0 + term1
    term0 = c0 * (lo ** -alpha - hi ** -alpha) / alpha
    term1 = slope * (hi ** (1.0 - alpha) - lo ** (1.0 - alpha)) / (1.0 - alpha)
    return term0 + term1


_MACHINES: dict = {}


def _shift_energy(wavelet: WaveletPair) -> _ShiftEnergy:
    key = (wavelet.name, wavelet.resolution)
    if key not in _MACHINES:
        _MACHINES[key] = _ShiftEnergy(wavelet)
    return _MACHINES[key]


def primitive_shift_energy(wavelet: WaveletPair, u):
    """G(u): squared-increment energy of the mother wavelet's primitive."""
    return _shift_energy(wavelet).g(u)


# ----------------------------------------------------------------------
# variance prefactor
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PrefactorValue:
    value: float
    stderr: float | None
    method: str

    def __float__(self):
        return self.value


def variance_prefactor(law: DurationRateLaw, wavelet: WaveletPair, z: float,
                       mc_size: int = 400_000, mc_seed: int = 0) -> PrefactorValue:
    """Slowly varying prefactor of the coefficient variance at width ``z``.

    Pareto laws reduce to an exact one-dimensional power integral of G;
    other laws are evaluated by Monte Carlo over the duration (common
    random numbers across z, standard error reported).
    """
    if z <= 0:
        raise SessionWaveError("z must be positive")
    se = _shift_energy(wavelet)
    a = law.alpha
    if law.kind == PARETO:
        eu2 = law.rate_law.abs_moment(2)
        value = eu2 * a * se.tail_integral(1.0 / z, a)
        return PrefactorValue(value, None, "quadrature")
    rng = np.random.default_rng(np.random.SeedSequence(mc_seed))
    durations, rates = law.sample_marks(rng, mc_size)
    samples = rates ** 2 * se.g(durations / z)
    value = z ** a * float(samples.mean())
    stderr = z ** a * float(samples.std(ddof=1)) / math.sqrt(mc_size)
    return PrefactorValue(value, stderr, "monte_carlo")


def prefactor_limit_constant(wavelet: WaveletPair, alpha: float) -> float:
    """Limit constant of prefactor/L2: alpha * integral of G(t) t^(-alpha-1).

    The printed double-integral form is read with the inner displacement
    equal to the outer integration variable, the only finite reading; it is
    verified numerically against the prefactor ratio.
    """
    if not 0.0 < alpha < 2.0:
        raise SessionWaveError(f"alpha must lie in (0, 2), got {alpha}")
    return alpha * _shift_energy(wavelet).tail_integral(0.0, alpha)


def pareto_expansion_coefficient(law: DurationRateLaw, wavelet: WaveletPair) -> float:
    """Signed coefficient of z^(alpha-2) in the Pareto prefactor expansion.

    The prefactor increases to its limit, so the coefficient is negative
    with magnitude alpha E[U^2] |psi|^2 / (2 - alpha).
    """
    if law.kind != PARETO:
        raise SessionWaveError("expansion coefficient is specific to the Pareto law")
    se = _shift_energy(wavelet)
    psi_sq = se.p2 * se.h
    return -law.alpha * law.rate_law.abs_moment(2) * psi_sq / (2.0 - law.alpha)


def coefficient_variance(law: DurationRateLaw, wavelet: WaveletPair, j: int,
                         **kw) -> float:
    """Oracle variance of a scale-j coefficient of the stationary path."""
    pf = variance_prefactor(law, wavelet, 2.0 ** j, **kw)
    return pf.value * 2.0 ** ((2.0 - law.alpha) * j)


@dataclass(frozen=True)
class SpectrumModel:
    """Variance-law summary for one (law, wavelet) pair."""

    law: DurationRateLaw
    wavelet: WaveletPair
    z_grid: tuple
    prefactor_values: tuple
    limit_constant: float
    expansion_coefficient: float | None
    decay_beta: float | None

    def v(self, j: int) -> float:
        z = 2.0 ** j
        for zz, val in zip(self.z_grid, self.prefactor_values):
            if zz == z:
                return val * z ** (2.0 - self.law.alpha)
        raise SessionWaveError(f"scale {j} not in the model grid")


def build_spectrum_model(law: DurationRateLaw, wavelet: WaveletPair,
                         j_max: int, **kw) -> SpectrumModel:
    zs = tuple(2.0 ** j for j in range(1, j_max + 1))
    vals = tuple(variance_prefactor(law, wavelet, z, **kw).value for z in zs)
    coef = pareto_expansion_coefficient(law, wavelet) if law.kind == PARETO else None
    return SpectrumModel(
        law=law, wavelet=wavelet, z_grid=zs, prefactor_values=vals,
        limit_constant=prefactor_limit_constant(wavelet, law.alpha),
        expansion_coefficient=coef,
        decay_beta=prefactor_decay(law),
    )


def prefactor_decay(law: DurationRateLaw) -> float | None:
    """Decay exponent beta of the variance prefactor, where known.

    Laws whose second-moment tail prefactor is eventually constant decay at
    2 - alpha; the stable-duration law decays at alpha.
    """
    if law.kind in (PARETO, TWO_REGIME):
        return 2.0 - law.alpha
    if law.kind == STABLE:
        return law.alpha
    return None


def rate_exponent(scheme: str, alpha: float, beta: float) -> float:
    """Convergence-rate exponent r in T^-r for the given observation scheme.

    ``beta`` is the decay exponent of the variance prefactor (``inf`` for
    an eventually constant second-moment tail prefactor, which caps the
    effective decay at 2 - alpha).  Sampled or averaged schemes are further
    capped at 2 - alpha by aliasing.
    """
    if not 1.0 < alpha < 2.0:
        raise SessionWaveError("rate theory needs alpha in (1, 2)")
    if not beta > 0.0:
        raise SessionWaveError("beta must be positive")
    eff = effective_decay(scheme, alpha, beta)
    return eff / (2.0 * eff + alpha)


def sobolev_condition(wavelet: WaveletPair, alpha: float, beta: float) -> bool:
    """Feasibility of the smoothness route: does the weighted spectral
    energy (1+|xi|)^(alpha+beta-2) |psi^(xi)|^2 have a convergent tail?

    Checked on the tabulated transform by estimating the spectral decay
    exponent over the last octaves; a sufficient condition only.
    """
    step = 2.0 ** -wavelet.resolution
    table = wavelet.psi_table
    n = 1 << 18
    spec = np.fft.rfft(table, n) * step
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=step)
    power = np.abs(spec) ** 2
    # decay slope of |psi^|^2 over the top octaves
    bands = []
    top = xi[-1]
    edges = [top / 2 ** k for k in range(6, 0, -1)]
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (xi >= lo) & (xi < hi)
        if np.any(sel):
            bands.append((math.log(math.sqrt(lo * hi)), math.log(float(power[sel].mean()))))
    xs = np.array([b[0] for b in bands])
    ys = np.array([b[1] for b in bands])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return (alpha + beta) - 2.0 + slope < -1.0

"""Scale bookkeeping, the reduced log-contrast and its minimiser.

The estimator fits the tail index alpha' in (0, 2) by minimising

    W(alpha') = log( sum_{j,k} d_jk^2 / 2^((2-alpha')j) )
                + delta * log(2) * (2 - alpha')

over a fixed window of octaves (J0, J1], using the first n_j = 2^(J-j)
locations at each scale; delta is the mean scale index of that window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateContrastError, ScaleSelectionError, SessionWaveError
from .wavelets import CoefficientArray

_ALPHA_EDGE = 1e-4
_XTOL = 1e-8
_GRID_POINTS = 32


@dataclass(frozen=True)
class ScaleSelection:
    """Octave window (J0, J1] and its bookkeeping.

    J is the largest scale with 2^J <= (T-M+1)/(M+1); each retained scale
    uses its first n_j = 2^(J-j) coefficient locations.  ``delta`` is the
    count-weighted mean of j over the window, for which a closed form
    exists: J0 + 2 + (J0-J1)/(2^(J1-J0) - 1).
    """

    T: float
    M: int
    J: int
    J0: int
    J1: int
    delta: float
    rule: str = "explicit"

    def n(self, j: int) -> int:
        return 2 ** (self.J - j)

    @property
    def scales(self) -> range:
        return range(self.J0 + 1, self.J1 + 1)

    @property
    def counts(self) -> np.ndarray:
        return np.array([self.n(j) for j in self.scales])


def total_octaves(T: float, M: int) -> int:
    """Largest J with 2^J <= (T - M + 1)/(M + 1)."""
    cap = (T - M + 1) / (M + 1)
    if cap < 2:
        raise ScaleSelectionError(f"horizon T={T} too small for any octave window")
    return int(math.floor(math.log2(cap)))


def delta_closed_form(J0: int, J1: int) -> float:
    return J0 + 2.0 + (J0 - J1) / (2.0 ** (J1 - J0) - 1.0)


def delta_brute_force(J0: int, J1: int, J: int | None = None) -> float:
    """Mean scale index over the window, straight from the definition."""
    J = J1 if J is None else J
    total = 0.0
    count = 0.0
    for j in range(J0 + 1, J1 + 1):
        nj = 2.0 ** (J - j)
        total += nj * j
        count += nj
    return total / count


def build_scales(T: float, M: int, J0: int, J1: int, rule: str = "explicit"
                 ) -> ScaleSelection:
    """Validate an octave window and fill in the bookkeeping."""
    J = total_octaves(T, M)
    if not 0 < J0:
        raise ScaleSelectionError(f"J0 must be positive, got {J0}")
    if not J0 < J1:
        raise ScaleSelectionError(f"J0 < J1 violated: J0={J0}, J1={J1}")
    if not J1 <= J:
        raise ScaleSelectionError(f"J1={J1} exceeds available octaves J={J}")
    return ScaleSelection(T=float(T), M=M, J=J, J0=J0, J1=J1,
                          delta=delta_closed_form(J0, J1), rule=rule)


def default_scales(T: float, M: int, logbase: float = 2.0) -> ScaleSelection:
    """Universal consistency-safe window: J0 = floor(J/2), J1 = floor(J/2 + log J).

    The log base of the window width is not pinned down; the default is 2
    and ``default_scale_readings`` reports the common alternatives.
    """
    J = total_octaves(T, M)
    J0 = J // 2
    if J0 < 1:
        raise ScaleSelectionError(f"horizon T={T} too small for the default rule")
    J1 = min(J, int(math.floor(J / 2.0 + math.log(J) / math.log(logbase))))
    if J1 <= J0:
        J1 = J0 + 1
        if J1 > J:
            raise ScaleSelectionError(f"horizon T={T} too small for the default rule")
    return build_scales(T, M, J0, J1, rule=f"default(logbase={logbase:g})")


def default_scale_readings(T: float, M: int) -> dict:
    """Candidate J1 values of the default rule under base-2 and natural logs."""
    J = total_octaves(T, M)
    return {
        "J": J,
        "J0": J // 2,
        "J1_log2": min(J, int(math.floor(J / 2.0 + math.log2(J)))),
        "J1_ln": min(J, int(math.floor(J / 2.0 + math.log(J)))),
    }


def rate_optimal_scales(T: float, M: int, beta: float, alpha_hint: float,
                        scheme: str) -> ScaleSelection:
    """Bias/variance-balancing window for a law whose variance prefactor
    approaches its limit at rate z^-beta.

    Continuous observation uses J0 = floor(J/(2 beta + alpha)); sampled or
    averaged observation replaces beta by min(beta, 2 - alpha) because of
    interpolation aliasing.  ``beta=inf`` means the second-moment tail
    prefactor is eventually constant, in which case the effective decay is
    2 - alpha for every scheme.  J1 = J.
    """
    if not 1.0 < alpha_hint < 2.0:
        raise ScaleSelectionError(
            f"rate-optimal rule needs alpha in (1, 2), got {alpha_hint}")
    if not beta > 0.0:
        raise ScaleSelectionError(f"smoothness exponent must be positive, got {beta}")
    exponent = effective_decay(scheme, alpha_hint, beta)
    J = total_octaves(T, M)
    J0 = int(math.floor(J / (2.0 * exponent + alpha_hint)))
    return build_scales(T, M, J0, J, rule=f"rate_optimal(beta={beta:g})")


def effective_decay(scheme: str, alpha: float, beta: float) -> float:
    """Decay exponent of the variance prefactor that governs the bias."""
    eff = 2.0 - alpha if math.isinf(beta) else beta
    if scheme in ("discrete", "averaged"):
        eff = min(eff, 2.0 - alpha)
    elif scheme != "continuous":
        raise SessionWaveError(f"unknown scheme {scheme!r}")
    return eff


def hurst_of_alpha(alpha: float) -> float:
    """Memory index H = (3 - alpha)/2, in (1/2, 3/2) for alpha in (0, 2)."""
    if not 0.0 < alpha < 2.0:
        raise SessionWaveError(f"alpha must lie in (0, 2), got {alpha}")
    return (3.0 - alpha) / 2.0


# ----------------------------------------------------------------------
# contrast
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ContrastEvaluation:
    alpha_prime: float
    value: float
    weights: dict
    gradient: float


@dataclass(frozen=True)
class EstimationDiagnostics:
    alpha_hat: float
    hurst: float
    value: float
    gradient: float
    boundary_hit: bool
    weights: dict
    low_alpha_wavelet_warning: bool
    j0_ratio_ok: bool
    j1_ratio_ok: bool
    scales: ScaleSelection
    notes: tuple = field(default_factory=tuple)


def scale_energies(coeffs: CoefficientArray, scales: ScaleSelection,
                   use_all_k: bool = False) -> np.ndarray:
    """Sum of squared coefficients per retained scale (first n_j locations)."""
    energies = []
    for j in scales.scales:
        if j not in coeffs.levels:
            raise ScaleSelectionError(f"no coefficients at scale {j}")
        d = coeffs.levels[j]
        nj = scales.n(j)
        if not use_all_k:
            if len(d) < nj:
                raise ScaleSelectionError(
                    f"scale {j} has {len(d)} coefficients, needs n_j={nj}")
            d = d[:nj]
        energies.append(float(np.dot(d, d)))
    return np.asarray(energies)


def contrast(coeffs: CoefficientArray, scales: ScaleSelection,
             alpha_prime: float, use_all_k: bool = False) -> ContrastEvaluation:
    """Evaluate the contrast, its per-scale weights and its derivative."""
    if not 0.0 < alpha_prime < 2.0:
        raise SessionWaveError(f"alpha' must lie in (0, 2), got {alpha_prime}")
    energies = scale_energies(coeffs, scales, use_all_k)
    js = np.asarray(list(scales.scales), dtype=float)
    value, weights, grad = _contrast_core(energies, js, scales.delta, alpha_prime)
    return ContrastEvaluation(alpha_prime=alpha_prime, value=value,
                              weights={int(j): float(w) for j, w in zip(js, weights)},
                              gradient=grad)


def _contrast_core(energies: np.ndarray, js: np.ndarray, delta: float,
                   alpha_prime: float):
    log2 = math.log(2.0)
    terms = energies * np.exp2((alpha_prime - 2.0) * js)
    total = float(terms.sum())
    if total <= 0.0:
        raise DegenerateContrastError("all squared coefficients vanish in the window")
    weights = terms / total
    value = math.log(total) + delta * log2 * (2.0 - alpha_prime)
    gradient = log2 * (float(np.dot(weights, js)) - delta)
    return value, weights, gradient


def estimate_alpha(coeffs: CoefficientArray, scales: ScaleSelection,
                   use_all_k: bool = False):
    """Minimise the contrast over [1e-4, 2 - 1e-4].

    A 32-point grid seeds a golden-section search (the contrast is smooth
    but global unimodality is not guaranteed), followed by one bisection
    pass on the derivative inside the final bracket.  Returns
    (alpha_hat, EstimationDiagnostics).
    """
    energies = scale_energies(coeffs, scales, use_all_k)
    js = np.asarray(list(scales.scales), dtype=float)
    delta = scales.delta

    def objective(a):
        return _contrast_core(energies, js, delta, a)[0]

    lo, hi = _ALPHA_EDGE, 2.0 - _ALPHA_EDGE
    grid = np.linspace(lo, hi, _GRID_POINTS)
    values = [objective(a) for a in grid]
    best = int(np.argmin(values))
    a_lo = grid[max(best - 1, 0)]
    a_hi = grid[min(best + 1, _GRID_POINTS - 1)]
    alpha_hat = _golden_section(objective, a_lo, a_hi)

    # one derivative-bisection refinement when the minimum is interior
    def gradient(a):
        return _contrast_core(energies, js, delta, a)[2]

    width = max(a_hi - a_lo, 1e-6)
    g_lo, g_hi = max(lo, alpha_hat - width), min(hi, alpha_hat + width)
    if gradient(g_lo) < 0.0 < gradient(g_hi):
        for _ in range(80):
            mid = 0.5 * (g_lo + g_hi)
            if gradient(mid) < 0.0:
                g_lo = mid
            else:
                g_hi = mid
            if g_hi - g_lo < 1e-12:
                break
        alpha_hat = 0.5 * (g_lo + g_hi)

    boundary = alpha_hat <= lo + 10.0 * _XTOL or alpha_hat >= hi - 10.0 * _XTOL
    value, weights, grad = _contrast_core(energies, js, delta, alpha_hat)
    vm = _vanishing_moments_from_name(coeffs.wavelet)
    warn = alpha_hat < 1.0 and vm is not None and vm < 2
    notes = []
    if warn:
        notes.append("alpha_hat below 1 with a single-vanishing-moment wavelet; "
                     "the estimate is outside the wavelet's proven regime")
    if boundary:
        notes.append("minimiser at the edge of (0, 2)")
    diags = EstimationDiagnostics(
        alpha_hat=float(alpha_hat),
        hurst=hurst_of_alpha(float(alpha_hat)),
        value=float(value),
        gradient=float(grad),
        boundary_hit=bool(boundary),
        weights={int(j): float(w) for j, w in zip(js, weights)},
        low_alpha_wavelet_warning=bool(warn),
        j0_ratio_ok=bool(scales.J0 / scales.J < 1.0 / alpha_hat),
        j1_ratio_ok=bool(scales.J1 / scales.J < 1.0 / (2.0 - alpha_hat)),
        scales=scales,
        notes=tuple(notes),
    )
    return float(alpha_hat), diags


def _golden_section(f, lo, hi):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > _XTOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _vanishing_moments_from_name(name: str):
    name = (name or "").strip().lower()
    if name == "haar":
        return 1
    if name.startswith("db"):
        try:
            return int(name[2:])
        except ValueError:
            return None
    return None

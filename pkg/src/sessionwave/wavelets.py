"""Compactly supported wavelet pairs and path coefficients.

Provides the Haar pair and the orthonormal Daubechies-N families together
with the tools the estimator needs:

* exact dyadic tables of the father/mother wavelets and of the mother's
  primitive, built by two-scale refinement (the primitive has its own
  refinement relation, so its endpoint zero holds to machine precision);
* coefficients of a session path observed continuously (session endpoints
  against the tabulated primitive — exact up to table resolution);
* coefficients of sampled or window-averaged observations through the
  standard pyramid filter bank, plus a slow direct-quadrature reference
  used to cross-validate the pyramid.

Scale j carries width 2^j (large j = coarse).  The mother wavelet lives on
[0, M]; the father is recentred on [-M+1, 1] so that interpolating the
samples never reaches outside the observation window, which is what makes
the emitted index counts exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SessionWaveError
from .simulate import PathSample, SessionSet

CONTINUOUS = "continuous"
DISCRETE = "discrete"
AVERAGED = "averaged"

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class WaveletPair:
    """A father/mother pair with tabulated values and primitive.

    ``phi_filter`` (low-pass, sums to sqrt(2)) and ``psi_filter`` refine the
    pair; tables sample [0, M] on a dyadic grid of step 2**-resolution.
    ``phi`` is exposed in the recentred convention (support [-M+1, 1]).
    """

    name: str
    M: int
    vanishing_moments: int
    phi_filter: np.ndarray
    psi_filter: np.ndarray
    resolution: int
    phi_table: np.ndarray      # natural support [0, M]
    psi_table: np.ndarray      # support [0, M]
    primitive_table: np.ndarray  # integral of psi from 0, support [0, M]
    exact_haar: bool = False

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.M * 2 ** self.resolution + 1) / 2.0 ** self.resolution

    def phi(self, x):
        """Father wavelet, recentred to [-M+1, 1]."""
        x = np.asarray(x, dtype=float) + (self.M - 1)
        if self.exact_haar:
            return ((x >= 0.0) & (x < 1.0)).astype(float)
        return self._interp(x, self.phi_table)

    def psi(self, x):
        """Mother wavelet on [0, M]."""
        x = np.asarray(x, dtype=float)
        if self.exact_haar:
            return np.where((x >= 0.0) & (x < 0.5), 1.0,
                            np.where((x >= 0.5) & (x < 1.0), -1.0, 0.0))
        return self._interp(x, self.psi_table)

    def primitive(self, x):
        """Integral of the mother from 0; vanishes outside (0, M)."""
        x = np.asarray(x, dtype=float)
        if self.exact_haar:
            return np.clip(np.minimum(x, 1.0 - x), 0.0, 0.5)
        return self._interp(x, self.primitive_table)

    def _interp(self, x, table):
        scaled = np.clip(x, 0.0, self.M) * 2.0 ** self.resolution
        vals = np.interp(scaled, np.arange(len(table), dtype=float), table)
        return np.where((x <= 0.0) | (x >= self.M), 0.0, vals)

    def psi_norm_sq(self) -> float:
        """Integral of psi^2 as carried by the table (1 for an exact pair)."""
        if self.exact_haar:
            return 1.0
        step = 2.0 ** -self.resolution
        return float(np.trapezoid(self.psi_table ** 2, dx=step))

    def primitive_norm_sq(self) -> float:
        """Integral of the primitive squared over [0, M]."""
        if self.exact_haar:
            return 1.0 / 12.0
        step = 2.0 ** -self.resolution
        return float(np.trapezoid(self.primitive_table ** 2, dx=step))


def make_haar(resolution: int = 12) -> WaveletPair:
    """Indicator father on [0,1), +1/-1 mother; primitive is an exact triangle."""
    h = np.array([1.0, 1.0]) / _SQRT2
    g = np.array([1.0, -1.0]) / _SQRT2
    grid = np.arange(2 ** resolution + 1) / 2.0 ** resolution
    phi_t = ((grid >= 0.0) & (grid < 1.0)).astype(float)
    psi_t = np.where(grid < 0.5, 1.0, -1.0) * phi_t
    prim_t = np.clip(np.minimum(grid, 1.0 - grid), 0.0, 0.5)
    return WaveletPair("haar", 1, 1, h, g, resolution, phi_t, psi_t, prim_t,
                       exact_haar=True)


def make_daubechies(N: int, resolution: int = 12) -> WaveletPair:
    """Orthonormal Daubechies-N pair, N in [2, 10], mother on [0, 2N-1]."""
    if not 2 <= N <= 10:
        raise SessionWaveError(f"Daubechies order must be in [2, 10], got {N}")
    h = daubechies_filter(N)
    M = 2 * N - 1
    g = ((-1.0) ** np.arange(M + 1)) * h[::-1]
    phi_t = _refine_phi(h, M, resolution)
    prim_phi = _refine_phi_primitive(h, M, resolution)
    psi_t = _compose(g, phi_t, M, resolution, _SQRT2, boundary_one=False)
    prim_t = _compose(g, prim_phi, M, resolution, 1.0 / _SQRT2, boundary_one=True)
    return WaveletPair(f"db{N}", M, N, h, g, resolution, phi_t, psi_t, prim_t)


def make_wavelet(name: str, resolution: int = 12) -> WaveletPair:
    """Parse ``haar`` or ``dbN`` into a wavelet pair."""
    name = name.strip().lower()
    if name == "haar":
        return make_haar(resolution)
    if name.startswith("db"):
        return make_daubechies(int(name[2:]), resolution)
    raise SessionWaveError(f"unknown wavelet {name!r}")


@lru_cache(maxsize=None)
def _daubechies_filter_cached(N: int) -> tuple:
    # |m0(xi)|^2 = cos^(2N)(xi/2) * P(sin^2(xi/2)) with P the Daubechies
    # polynomial; factor P on the unit circle and keep the roots inside it,
    # which front-loads the filter energy (extremal phase).
    poly = np.zeros(1)
    base = np.array([1.0])                      # (z-1)^(2k) accumulator
    shift = 2 * (N - 1)
    for k in range(N):
        coeff = math.comb(N - 1 + k, k) * (-0.25) ** k
        # term: coeff * (z-1)^(2k) * z^(N-1-k)
        term = coeff * np.convolve(base, _monomial(N - 1 - k))
        poly = _polyadd(poly, term)
        base = np.convolve(base, np.array([1.0, -2.0, 1.0]))
    roots = np.roots(poly)
    inside = roots[np.abs(roots) < 1.0]
    q = np.array([1.0])
    for r in inside:
        q = np.convolve(q, np.array([1.0, -r]))
    q = np.real(q)
    q /= q.sum()                                 # Q(1) = 1
    binom = np.array([1.0])
    for _ in range(N):
        binom = np.convolve(binom, np.array([0.5, 0.5]))
    h = _SQRT2 * np.convolve(binom, q)
    h *= _SQRT2 / h.sum()
    # extremal phase: keep the filter energy front-loaded
    k = np.arange(len(h))
    if float(np.dot(k, h ** 2)) > float(np.dot(k, h[::-1] ** 2)):
        h = h[::-1]
    return tuple(float(v) for v in h)


def daubechies_filter(N: int) -> np.ndarray:
    """Length-2N orthonormal low-pass filter, sum sqrt(2), extremal phase."""
    return np.asarray(_daubechies_filter_cached(N))


def _monomial(power: int) -> np.ndarray:
    out = np.zeros(power + 1)
    out[0] = 1.0
    return out


def _polyadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[n - len(a):] += a
    out[n - len(b):] += b
    return out


def _refine_phi(h: np.ndarray, M: int, resolution: int) -> np.ndarray:
    """Exact dyadic values of the father on [0, M] at step 2**-resolution."""
    interior = _phi_at_integers(h, M)
    values = np.zeros(M + 1)
    values[1:M] = interior
    for r in range(1, resolution + 1):
        values = _refine_once(h, values, M, r, _SQRT2, boundary_one=False)
    return values


def _refine_phi_primitive(h: np.ndarray, M: int, resolution: int) -> np.ndarray:
    """Exact dyadic values of the father's primitive (0 at 0, 1 beyond M)."""
    n = M - 1
    A = np.zeros((n, n))
    b = np.zeros(n)
    inv = 1.0 / _SQRT2
    for row, nn in enumerate(range(1, M)):
        for col, mm in enumerate(range(1, M)):
            k = 2 * nn - mm
            if 0 <= k <= M:
                A[row, col] = inv * h[k]
        b[row] = inv * sum(h[k] for k in range(0, M + 1) if 2 * nn - k >= M)
    interior = np.linalg.solve(np.eye(n) - A, b)
    values = np.zeros(M + 1)
    values[1:M] = interior
    values[M] = 1.0
    for r in range(1, resolution + 1):
        values = _refine_once(h, values, M, r, inv, boundary_one=True)
    return values


def _refine_once(h, values, M, level, factor, boundary_one):
    """One dyadic refinement pass: new odd points from the two-scale relation.

    ``values`` holds f on the step-2^-(level-1) grid; for an odd fine index
    i the relation reads f(i 2^-level) = factor * sum_k h_k f(c_k 2^-(level-1))
    with coarse index c_k = i - k 2^(level-1).
    """
    n_coarse = len(values) - 1            # = M * 2**(level-1)
    shift = n_coarse // M
    out = np.zeros(2 * n_coarse + 1)
    out[::2] = values
    odd = np.arange(1, len(out), 2)
    acc = np.zeros(len(odd))
    for k in range(len(h)):
        c = odd - k * shift
        v = np.zeros(len(odd))
        mid = (c >= 0) & (c <= n_coarse)
        v[mid] = values[c[mid]]
        if boundary_one:
            v[c > n_coarse] = 1.0
        acc += h[k] * v
    out[odd] = factor * acc
    return out


def _phi_at_integers(h: np.ndarray, M: int) -> np.ndarray:
    """Interior integer values of the father: eigenvector of the two-scale map."""
    n = M - 1
    B = np.zeros((n, n))
    for row, nn in enumerate(range(1, M)):
        for col, mm in enumerate(range(1, M)):
            k = 2 * nn - mm
            if 0 <= k <= M:
                B[row, col] = _SQRT2 * h[k]
    w, v = np.linalg.eig(B)
    i = int(np.argmin(np.abs(w - 1.0)))
    vec = np.real(v[:, i])
    return vec / vec.sum()


def _compose(g, table, M, resolution, factor, boundary_one):
    """Evaluate factor * sum_k g_k f(2t - k) on the dyadic grid from f's table."""
    size = M * 2 ** resolution + 1
    out = np.zeros(size)
    idx0 = 2 * np.arange(size)
    for k in range(len(g)):
        idx = idx0 - k * 2 ** resolution
        vals = np.zeros(size)
        left = idx < 0
        right = idx > M * 2 ** resolution
        ok = ~left & ~right
        vals[ok] = table[idx[ok]]
        if boundary_one:
            vals[right] = 1.0
        out += g[k] * vals
    return factor * out


# ----------------------------------------------------------------------
# index bookkeeping
# ----------------------------------------------------------------------

def computable_range(j: int, T: float, M: int, scheme: str) -> int:
    """Number of whole-support coefficient locations at scale j.

    Continuous observation over [0, T] admits floor(T 2^-j) - M + 1
    locations; sampled or averaged observation of length T admits
    floor(2^-j (T - M + 1)) - M + 1.  Never negative.
    """
    if j < 0:
        raise SessionWaveError("scale index must be nonnegative")
    if scheme == CONTINUOUS:
        count = math.floor(T * 2.0 ** -j) - M + 1
    elif scheme in (DISCRETE, AVERAGED):
        count = math.floor((T - M + 1) * 2.0 ** -j) - M + 1
    else:
        raise SessionWaveError(f"unknown scheme {scheme!r}")
    return max(int(count), 0)


def max_scale(T: float, M: int, scheme: str = CONTINUOUS) -> int:
    """Largest scale with at least one computable coefficient."""
    j = 0
    while computable_range(j + 1, T, M, scheme) >= 1:
        j += 1
    return j


# ----------------------------------------------------------------------
# coefficients
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientArray:
    """Per-scale coefficient arrays d[j][k], j = 1..max level."""

    scheme: str
    T: float
    wavelet: str
    levels: dict

    def level(self, j: int) -> np.ndarray:
        return self.levels[j]

    @property
    def max_level(self) -> int:
        return max(self.levels) if self.levels else 0

    def count(self, j: int) -> int:
        return len(self.levels[j])


def continuous_coefficients(sset: SessionSet, wavelet: WaveletPair,
                            j_max: int) -> CoefficientArray:
    """Exact coefficients of the continuously observed path.

    Each session contributes rate * 2^(j/2) * (primitive at its end -
    primitive at its start) in rescaled coordinates, so only sessions with
    an endpoint inside a coefficient's support matter; fully covering
    sessions cancel because the mother integrates to zero.
    """
    M = wavelet.M
    if j_max < 1 or 2.0 ** j_max > sset.T / M:
        raise SessionWaveError(
            f"j_max={j_max} has no computable coefficients for T={sset.T}, M={M}")
    T = sset.T
    starts = np.concatenate([sset.arrivals, np.zeros(len(sset.init_residuals))])
    ends = np.concatenate([np.minimum(sset.ends, T),
                           np.minimum(sset.init_residuals, T)])
    weights = np.concatenate([sset.rates, sset.init_rates])
    points = np.concatenate([starts, ends])
    signs = np.concatenate([-weights, weights])

    levels = {}
    for j in range(1, j_max + 1):
        count = computable_range(j, T, M, CONTINUOUS)
        if count == 0:
            break
        y = points * 2.0 ** -j
        # endpoints beyond the last support only see the vanished primitive
        near = y < count + M
        yn = y[near]
        sn = signs[near]
        base = np.floor(yn).astype(np.int64)
        frac = yn - base
        d = np.zeros(count)
        scale = 2.0 ** (j / 2.0)
        for i in range(M):
            k = base - i
            ok = (k >= 0) & (k < count)
            if not np.any(ok):
                continue
            vals = wavelet.primitive(frac[ok] + i)
            d += np.bincount(k[ok], weights=sn[ok] * vals, minlength=count)
        levels[j] = scale * d
    return CoefficientArray(CONTINUOUS, T, wavelet.name, levels)


def session_coefficient(wavelet: WaveletPair, j: int, k: int,
                        arrival: float, duration: float, rate: float) -> float:
    """Contribution of one session to the coefficient at (j, k); j >= 0.

    Reference form of the accumulation used by ``continuous_coefficients``:
    rate * 2^(j/2) * (primitive(end 2^-j - k) - primitive(start 2^-j - k)).
    """
    lo = wavelet.primitive(arrival * 2.0 ** -j - k)
    hi = wavelet.primitive((arrival + duration) * 2.0 ** -j - k)
    return rate * 2.0 ** (j / 2.0) * float(hi - lo)


def discrete_coefficients(sample: PathSample, wavelet: WaveletPair,
                          j_max: int) -> CoefficientArray:
    """Pyramid filter-bank coefficients of a sampled or averaged path.

    The samples act as level-0 scaling coefficients of the interpolated
    path; with the recentred father this means feeding the sequence with an
    M-1 shift, after which plain valid (whole-support) filtering emits
    exactly the computable index range at every scale.
    """
    M = wavelet.M
    n = len(sample)
    scheme = DISCRETE if sample.scheme == "grid" else AVERAGED
    if j_max < 1 or computable_range(j_max, n, M, scheme) < 1:
        raise SessionWaveError(
            f"insufficient samples ({n}) for any scale-{j_max} coefficient")
    h = wavelet.phi_filter
    g = wavelet.psi_filter
    approx = sample.values[M - 1:].astype(float)
    levels = {}
    for j in range(1, j_max + 1):
        count = computable_range(j, n, M, scheme)
        if count == 0:
            break
        detail = np.convolve(approx, g[::-1], mode="valid")[::2]
        approx = np.convolve(approx, h[::-1], mode="valid")[::2]
        if len(detail) < count:
            raise SessionWaveError("pyramid produced fewer coefficients than expected")
        levels[j] = detail[:count]
    return CoefficientArray(scheme, float(n), wavelet.name, levels)


def direct_discrete_coefficient(sample: PathSample, wavelet: WaveletPair,
                                j: int, k: int, step: float | None = None) -> float:
    """Reference value of one sampled-path coefficient by direct quadrature.

    Integrates the rescaled mother against the father-interpolated samples
    with the midpoint rule at ``step`` (default the table step).  Exact for
    Haar; table-limited otherwise.  Exists to cross-validate the pyramid.
    """
    M = wavelet.M
    count = computable_range(j, len(sample), M,
                             DISCRETE if sample.scheme == "grid" else AVERAGED)
    if not 0 <= k < count:
        raise SessionWaveError(f"location k={k} outside computable range {count}")
    if step is None:
        step = 2.0 ** -wavelet.resolution
    lo = k * 2.0 ** j
    hi = (k + M) * 2.0 ** j
    s = np.arange(lo, hi, step) + step / 2.0
    psi_vals = 2.0 ** (-j / 2.0) * wavelet.psi(s * 2.0 ** -j - k)
    x = sample.values
    total = 0.0
    n_lo = max(int(math.floor(lo)) - 1, 0)
    n_hi = min(int(math.ceil(hi)) + M, len(x))
    for n in range(n_lo, n_hi):
        phi_vals = wavelet.phi(s - n)
        total += x[n] * float(np.dot(psi_vals, phi_vals)) * step
    return total


# ----------------------------------------------------------------------
# file formats
# ----------------------------------------------------------------------

def write_coefficients(coeffs: CoefficientArray, path) -> None:
    """CSV dump ``scheme,j,k,value``."""
    with open(path, "w") as fh:
        fh.write("scheme,j,k,value\n")
        for j in sorted(coeffs.levels):
            for k, v in enumerate(coeffs.levels[j]):
                fh.write(f"{coeffs.scheme},{j},{k},{float(v)!r}\n")


def read_coefficients(path, wavelet_name: str = "") -> CoefficientArray:
    levels: dict = {}
    scheme = CONTINUOUS
    with open(path) as fh:
        header = fh.readline()
        if not header.strip().lower().startswith("scheme,"):
            raise SessionWaveError("coefficient file must have a 'scheme,j,k,value' header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            scheme_s, j_s, k_s, v_s = line.split(",")
            scheme = scheme_s
            levels.setdefault(int(j_s), []).append((int(k_s), float(v_s)))
    arrays = {}
    for j, pairs in levels.items():
        pairs.sort()
        arrays[j] = np.asarray([v for _, v in pairs])
    return CoefficientArray(scheme, 0.0, wavelet_name, arrays)


def write_wavelet_table(wavelet: WaveletPair, path) -> None:
    """Debug dump ``x,phi,psi,Psi`` over the union of supports."""
    step = 2.0 ** -wavelet.resolution
    xs = np.arange(-(wavelet.M - 1), wavelet.M + step / 2, step)
    phi = wavelet.phi(xs)
    psi = wavelet.psi(xs)
    prim = wavelet.primitive(xs)
    with open(path, "w") as fh:
        fh.write("x,phi,psi,Psi\n")
        for row in zip(xs, phi, psi, prim):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

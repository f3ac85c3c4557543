"""Exact session-level simulation of the superposed traffic path.

A realisation is kept as the marked point process itself (arrival,
duration, rate per session) plus the sessions inherited from the initial
condition, so every downstream quantity (point values, window averages,
wavelet coefficients) is computed without time discretisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import LawValidationError, SessionWaveError
from .laws import DurationRateLaw

FRESH = "fresh"
STATIONARY = "stationary"
BURNIN = "burnin"

_ARRIVAL_BLOCK = 4096


@dataclass(frozen=True)
class Session:
    arrival: float
    duration: float
    rate: float

    def __post_init__(self):
        if self.duration <= 0:
            raise SessionWaveError("session duration must be positive")


@dataclass(frozen=True)
class SessionSet:
    """A realised path on [0, T].

    ``arrivals``/``durations``/``rates`` hold the body sessions (arrivals
    strictly increasing in [0, T)); ``init_residuals``/``init_rates`` hold
    sessions alive at time zero, each active on [0, residual).  A fresh
    start has no initial sessions; a stationary start draws them from the
    equilibrium (size-biased) law, which makes the path strictly
    stationary on [0, T].
    """

    T: float
    mode: str
    seed: int
    arrivals: np.ndarray
    durations: np.ndarray
    rates: np.ndarray
    init_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    init_rates: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.arrivals)

    def sessions(self) -> Iterator[Session]:
        for a, d, r in zip(self.arrivals, self.durations, self.rates):
            yield Session(float(a), float(d), float(r))

    @property
    def ends(self) -> np.ndarray:
        return self.arrivals + self.durations


@dataclass(frozen=True)
class PathSample:
    """Observed path under a discrete scheme.

    ``scheme`` is ``grid`` for point samples X(0), X(1), ... or
    ``averaged`` for unit-window integrals of the path.
    """

    scheme: str
    values: np.ndarray

    def __post_init__(self):
        if self.scheme not in ("grid", "averaged"):
            raise SessionWaveError(f"unknown sample scheme {self.scheme!r}")
        if not np.all(np.isfinite(self.values)):
            raise SessionWaveError("path samples must be finite")

    def __len__(self) -> int:
        return len(self.values)


def simulate(law: DurationRateLaw, T: float, mode: str = FRESH, seed: int = 0,
             burnin_length: float | None = None) -> SessionSet:
    """Simulate the session process on [0, T].

    Arrivals form a unit-rate Poisson process, marks are i.i.d. from
    ``law``.  ``mode``:

    * ``fresh``       -- no sessions alive at time 0 (the paper-native
                         non-stationary start).
    * ``stationary``  -- equilibrium initial condition: a Poisson(E[dur])
                         number of residual sessions whose total duration
                         is size-biased and whose age is uniform.  Requires
                         a finite mean duration and a law with an exact
                         size-biased sampler.
    * ``burnin``      -- approximate stationarity by starting the process
                         ``burnin_length`` (default 10*T) before time 0 and
                         discarding everything that died before 0.

    Pure given (law, T, mode, seed): the draw order is fixed (initial
    conditions first, then body arrivals, then body marks).
    """
    if T < 0:
        raise SessionWaveError("horizon must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    init_residuals = np.empty(0)
    init_rates = np.empty(0)

    if mode == STATIONARY:
        mean_dur = law.mean_duration()   # raises InfiniteMeanError for alpha <= 1
        if not law.supports_stationary_init:
            raise LawValidationError(
                f"{law.kind} law has no exact equilibrium sampler; use burnin mode")
        k0 = int(rng.poisson(mean_dur))
        totals, init_rates = law.sample_size_biased(rng, k0)
        init_residuals = totals * rng.random(k0)
        arrivals = _poisson_arrivals(rng, 0.0, T)
    elif mode == BURNIN:
        length = 10.0 * T if burnin_length is None else float(burnin_length)
        if length < 0:
            raise SessionWaveError("burn-in length must be nonnegative")
        pre = _poisson_arrivals(rng, -length, 0.0)
        pre_dur, pre_rates = law.sample_marks(rng, len(pre))
        alive = pre + pre_dur > 0.0
        init_residuals = (pre + pre_dur)[alive]
        init_rates = pre_rates[alive]
        arrivals = _poisson_arrivals(rng, 0.0, T)
    elif mode == FRESH:
        arrivals = _poisson_arrivals(rng, 0.0, T)
    else:
        raise SessionWaveError(f"unknown init mode {mode!r}")

    durations, rates = law.sample_marks(rng, len(arrivals))
    return SessionSet(T=float(T), mode=mode, seed=int(seed),
                      arrivals=arrivals, durations=durations, rates=rates,
                      init_residuals=init_residuals, init_rates=init_rates)


def _poisson_arrivals(rng: np.random.Generator, start: float, stop: float) -> np.ndarray:
    """Unit-rate Poisson arrival times in [start, stop), strictly increasing."""
    horizon = stop - start
    if horizon <= 0:
        return np.empty(0)
    gaps = []
    total = 0.0
    while total < horizon:
        block = rng.exponential(1.0, max(_ARRIVAL_BLOCK, int(1.2 * (horizon - total))))
        gaps.append(block)
        total += float(block.sum())
    times = start + np.cumsum(np.concatenate(gaps))
    return times[times < stop]


def evaluate(sset: SessionSet, t) -> float | np.ndarray:
    """Exact path value: sum of rates of sessions active at t.

    Session membership is left-closed, right-open; initial sessions count
    while t is strictly below their residual duration.
    """
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or np.any(ts > sset.T):
        raise ValueError(f"evaluation time outside [0, {sset.T}]")
    tcol = np.atleast_1d(ts)
    out = np.zeros(len(tcol))
    if len(sset):
        starts = sset.arrivals
        ends = sset.ends
        order_e = np.argsort(ends, kind="stable")
        ends_sorted = ends[order_e]
        pref_start = _prefix(sset.rates)
        pref_end = _prefix(sset.rates[order_e])
        i_s = np.searchsorted(starts, tcol, side="right")
        i_e = np.searchsorted(ends_sorted, tcol, side="right")
        out += pref_start[i_s] - pref_end[i_e]
    if len(sset.init_residuals):
        order = np.argsort(sset.init_residuals, kind="stable")
        res_sorted = sset.init_residuals[order]
        pref = _prefix(sset.init_rates[order])
        idx = np.searchsorted(res_sorted, tcol, side="right")
        out += pref[-1] - pref[idx]
    return float(out[0]) if ts.ndim == 0 else out


def sample_grid(sset: SessionSet, n: int) -> PathSample:
    """Point samples X(0), ..., X(n-1); requires n <= T + 1."""
    if n < 0 or n > sset.T + 1:
        raise ValueError(f"grid length {n} exceeds horizon {sset.T} + 1")
    values = evaluate(sset, np.arange(n, dtype=float))
    return PathSample("grid", np.atleast_1d(values))


def window_averages(sset: SessionSet, n: int) -> PathSample:
    """Exact unit-window integrals of the path over [k, k+1), k < n.

    Computed from interval-overlap arithmetic on the session events (no
    quadrature): each window equals the level at its left edge plus the
    partial contributions of the events falling inside it.
    """
    if n < 0 or n > sset.T:
        raise ValueError(f"window count {n} exceeds horizon {sset.T}")
    if n == 0:
        return PathSample("averaged", np.empty(0))
    times = np.concatenate([
        sset.arrivals, sset.ends,
        np.zeros(len(sset.init_residuals)), sset.init_residuals,
    ])
    deltas = np.concatenate([
        sset.rates, -sset.rates, sset.init_rates, -sset.init_rates,
    ])
    keep = times < n
    times, deltas = times[keep], deltas[keep]
    order = np.argsort(times, kind="stable")
    times, deltas = times[order], deltas[order]

    # level at each window's left edge, from an extended-precision prefix sum
    pref = _prefix(deltas)
    ks = np.arange(n, dtype=float)
    levels = pref[np.searchsorted(times, ks, side="right")]

    # partial contribution of events strictly inside a window
    frac = times - np.floor(times)
    inside = (frac > 0.0) & (times > 0.0)
    win = np.floor(times[inside]).astype(np.int64)
    win = np.clip(win, 0, n - 1)
    partial = deltas[inside] * (win + 1.0 - times[inside])
    corr = np.bincount(win, weights=partial, minlength=n)
    return PathSample("averaged", levels + corr)


def _prefix(values: np.ndarray) -> np.ndarray:
    """[0, v0, v0+v1, ...] accumulated in extended precision."""
    out = np.zeros(len(values) + 1, dtype=np.longdouble)
    np.cumsum(values.astype(np.longdouble), out=out[1:])
    return out.astype(float)


# ----------------------------------------------------------------------
# file formats
# ----------------------------------------------------------------------

def write_events(sset: SessionSet, path) -> None:
    """One line per session ``arrival<TAB>duration<TAB>rate``.

    Initial sessions are written first with arrival ``-inf`` and their
    residual duration.  The header records the horizon, mode and seed.
    """
    with open(path, "w") as fh:
        fh.write(f"#T={float(sset.T)!r} mode={sset.mode} seed={sset.seed}\n")
        for res, rate in zip(sset.init_residuals, sset.init_rates):
            fh.write(f"-inf\t{float(res)!r}\t{float(rate)!r}\n")
        for a, d, r in zip(sset.arrivals, sset.durations, sset.rates):
            fh.write(f"{float(a)!r}\t{float(d)!r}\t{float(r)!r}\n")


def read_events(path) -> SessionSet:
    arrivals, durations, rates = [], [], []
    init_res, init_rates = [], []
    T, mode, seed = 0.0, FRESH, 0
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise SessionWaveError("event file must start with a '#T=...' header")
        for tok in header[1:].split():
            key, _, val = tok.partition("=")
            if key == "T":
                T = float(val)
            elif key == "mode":
                mode = val
            elif key == "seed":
                seed = int(val)
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a_s, d_s, r_s = line.split("\t")
            if a_s == "-inf":
                init_res.append(float(d_s))
                init_rates.append(float(r_s))
            else:
                arrivals.append(float(a_s))
                durations.append(float(d_s))
                rates.append(float(r_s))
    return SessionSet(T=T, mode=mode, seed=seed,
                      arrivals=np.asarray(arrivals), durations=np.asarray(durations),
                      rates=np.asarray(rates), init_residuals=np.asarray(init_res),
                      init_rates=np.asarray(init_rates))


def write_samples(sample: PathSample, path) -> None:
    """CSV ``k,value`` dump of a grid or averaged observation."""
    with open(path, "w") as fh:
        fh.write("k,value\n")
        for k, v in enumerate(sample.values):
            fh.write(f"{k},{float(v)!r}\n")


def read_samples(path, scheme: str) -> PathSample:
    values = []
    with open(path) as fh:
        header = fh.readline()
        if not header.strip().lower().startswith("k,"):
            raise SessionWaveError("sample file must have a 'k,value' header")
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line.split(",")[1]))
    return PathSample(scheme, np.asarray(values))

"""Config-driven Monte Carlo experiments with seeded replications.

Experiment kinds:

* ``consistency``      -- estimate alpha over a grid of horizons and track
                          the median error.
* ``variance_scaling`` -- pool per-scale second moments and regress their
                          log against the scale index.
* ``rate_study``       -- robust RMSE of the estimate against the horizon,
                          with a log-log slope.
* ``oracle_check``     -- Monte Carlo versus the analytic oracles,
                          reported as z-scores.

All randomness descends from one master seed through a counter-based
split, so results are byte-identical across runs and worker counts.
Outputs are plain CSV: ``results.csv`` (one row per replication),
``summary.csv`` (one row per horizon) and ``scales.csv`` (per-scale second
moments and oracle deviations).
"""

from __future__ import annotations

import configparser
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import oracle
from .errors import SessionWaveError
from .laws import (DurationRateLaw, lognormal_rate, pareto_law, point_rate,
                   stable_law, table_rate, two_regime_law)
from .simulate import (FRESH, STATIONARY, evaluate, sample_grid, simulate,
                       window_averages)
from .wavelets import (AVERAGED, CONTINUOUS, DISCRETE, CoefficientArray,
                       WaveletPair, computable_range, continuous_coefficients,
                       discrete_coefficients, make_wavelet)
from .whittle import (ScaleSelection, build_scales, default_scales,
                      estimate_alpha, rate_optimal_scales, total_octaves)

ROBUST_SCALE = 1.4826   # median absolute error to sigma under normality


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    law_spec: dict
    wavelet_name: str = "haar"
    scheme: str = CONTINUOUS
    t_values: tuple = (65536,)
    replications: int = 50
    master_seed: int = 0
    scale_rule: str = "default"
    j0: int | None = None
    j1: int | None = None
    beta: float | None = None
    alpha_hint: float | None = None
    logbase: float = 2.0
    init_mode: str = STATIONARY
    out_dir: str = "out"
    check: bool = False
    workers: int = 1
    attach_oracle: bool = True
    synthetic: str | None = None
    fast: bool = False

    def effective_replications(self) -> int:
        return min(self.replications, 10) if self.fast else self.replications


@dataclass(frozen=True)
class ReplicationResult:
    T: int
    rep: int
    seed: int
    alpha_hat: float
    hurst: float
    boundary: bool
    m_j: dict
    lambda_j: dict
    runtime_s: float


# ----------------------------------------------------------------------
# config file parsing
# ----------------------------------------------------------------------

def parse_config(path) -> ExperimentConfig:
    """Line-oriented ``key = value`` file with [law]/[wavelet]/[scales]/[run]."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise SessionWaveError(f"cannot read config file {path}")
    law_spec = dict(cp["law"]) if cp.has_section("law") else {}
    wav = cp.get("wavelet", "name", fallback="haar")
    run = cp["run"] if cp.has_section("run") else {}
    scales = cp["scales"] if cp.has_section("scales") else {}

    def parse_t(raw):
        return tuple(int(tok) for tok in raw.replace(",", " ").split())

    return ExperimentConfig(
        kind=run.get("kind", "consistency"),
        law_spec=law_spec,
        wavelet_name=wav,
        scheme=run.get("scheme", CONTINUOUS),
        t_values=parse_t(run.get("t", "65536")),
        replications=int(run.get("replications", "50")),
        master_seed=int(run.get("seed", "0")),
        scale_rule=scales.get("rule", "default"),
        j0=int(scales["j0"]) if "j0" in scales else None,
        j1=int(scales["j1"]) if "j1" in scales else None,
        beta=float(scales["beta"]) if "beta" in scales else None,
        alpha_hint=float(scales["alpha_hint"]) if "alpha_hint" in scales else None,
        logbase=float(scales.get("logbase", "2")),
        init_mode=run.get("init", STATIONARY),
        out_dir=run.get("output_dir", "out"),
        check=run.get("check", "false").strip().lower() in ("1", "true", "yes"),
        workers=int(run.get("workers", "1")),
        attach_oracle=run.get("oracle", "auto").strip().lower()
        in ("1", "true", "yes", "auto"),
        synthetic=run.get("synthetic") or None,
    )


def law_from_spec(spec: dict) -> DurationRateLaw:
    kind = spec.get("kind", "pareto").strip().lower()
    alpha = float(spec.get("alpha", "1.5"))
    rate = parse_rate_law(spec.get("rate_law", "point:1.0"))
    p_star = int(spec.get("p_star", "4"))
    if kind == "pareto":
        return pareto_law(alpha, rate, p_star)
    if kind == "stable":
        return stable_law(alpha, float(spec.get("params.sigma", "1.0")), rate, p_star)
    if kind == "two_regime":
        return two_regime_law(alpha, float(spec.get("params.u0", "1.0")), rate, p_star)
    raise SessionWaveError(f"config cannot build law kind {kind!r}")


def parse_rate_law(text: str):
    name, _, args = text.strip().partition(":")
    name = name.strip().lower()
    if name == "point":
        return point_rate(float(args or "1.0"))
    if name == "lognormal":
        mu, sigma = (args or "0,1").split(",")
        return lognormal_rate(float(mu), float(sigma))
    if name == "table":
        values, probs = [], []
        for pair in args.split(","):
            v, _, p = pair.partition("=")
            values.append(float(v))
            probs.append(float(p))
        return table_rate(values, probs)
    raise SessionWaveError(f"unknown rate law {text!r}")


def split_seed(master: int, r: int) -> int:
    """Counter-based seed for replication r; distinct r give distinct streams."""
    seq = np.random.SeedSequence(master, spawn_key=(r,))
    return int(seq.generate_state(1, np.uint64)[0])


# ----------------------------------------------------------------------
# one replication
# ----------------------------------------------------------------------

def make_scales(cfg: ExperimentConfig, T: int, M: int) -> ScaleSelection:
    if cfg.scale_rule == "default":
        return default_scales(T, M, logbase=cfg.logbase)
    if cfg.scale_rule == "explicit":
        if cfg.j0 is None or cfg.j1 is None:
            raise SessionWaveError("explicit scale rule needs j0 and j1")
        return build_scales(T, M, cfg.j0, cfg.j1)
    if cfg.scale_rule == "rate_optimal":
        if cfg.beta is None:
            raise SessionWaveError("rate_optimal scale rule needs beta")
        hint = cfg.alpha_hint
        if hint is None:
            hint = float(cfg.law_spec.get("alpha", "1.5"))
        return rate_optimal_scales(T, M, cfg.beta, hint, cfg.scheme)
    raise SessionWaveError(f"unknown scale rule {cfg.scale_rule!r}")


def path_coefficients(law: DurationRateLaw, wavelet: WaveletPair, scheme: str,
                      T: int, mode: str, seed: int, j_max: int) -> CoefficientArray:
    sset = simulate(law, T, mode, seed)
    if scheme == CONTINUOUS:
        return continuous_coefficients(sset, wavelet, j_max)
    if scheme == DISCRETE:
        return discrete_coefficients(sample_grid(sset, T), wavelet, j_max)
    if scheme == AVERAGED:
        return discrete_coefficients(window_averages(sset, T), wavelet, j_max)
    raise SessionWaveError(f"unknown scheme {scheme!r}")


def white_noise_coefficients(wavelet: WaveletPair, scheme: str, T: int,
                             seed: int, j_max: int) -> CoefficientArray:
    """Test hook: i.i.d. standard normal coefficients at every scale."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    levels = {}
    for j in range(1, j_max + 1):
        count = computable_range(j, T, wavelet.M, scheme)
        if count == 0:
            break
        levels[j] = rng.standard_normal(count)
    return CoefficientArray(scheme, float(T), wavelet.name, levels)


def run_replication(cfg: ExperimentConfig, law, wavelet, T: int, rep: int,
                    scales: ScaleSelection, j_max: int,
                    oracle_v: dict | None, estimate: bool = True
                    ) -> ReplicationResult:
    seed = split_seed(cfg.master_seed, rep)
    start = time.perf_counter()
    if cfg.synthetic == "white_noise":
        coeffs = white_noise_coefficients(wavelet, cfg.scheme, T, seed, j_max)
    else:
        coeffs = path_coefficients(law, wavelet, cfg.scheme, T, cfg.init_mode,
                                   seed, j_max)
    alpha_hat, hurst, boundary = math.nan, math.nan, False
    if estimate:
        alpha_hat, diags = estimate_alpha(coeffs, scales)
        hurst = diags.hurst
        boundary = diags.boundary_hit
    m_j = {}
    lambda_j = {}
    for j in sorted(coeffs.levels):
        nj = min(scales.n(j), coeffs.count(j)) if j <= scales.J else coeffs.count(j)
        d = coeffs.levels[j][:nj]
        if nj == 0:
            continue
        m = float(np.dot(d, d)) / nj
        m_j[j] = m
        if oracle_v and j in oracle_v:
            lambda_j[j] = m / oracle_v[j] - 1.0
    runtime = time.perf_counter() - start
    return ReplicationResult(T=T, rep=rep, seed=seed, alpha_hat=alpha_hat,
                             hurst=hurst, boundary=boundary, m_j=m_j,
                             lambda_j=lambda_j, runtime_s=runtime)


def _replication_task(args):
    cfg, law, wavelet, T, rep, scales, j_max, oracle_v, estimate = args
    return run_replication(cfg, law, wavelet, T, rep, scales, j_max,
                           oracle_v, estimate)


def _run_batch(cfg, law, wavelet, T, scales, j_max, oracle_v, estimate=True):
    reps = range(cfg.effective_replications())
    tasks = [(cfg, law, wavelet, T, r, scales, j_max, oracle_v, estimate)
             for r in reps]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_replication_task, tasks))
    else:
        results = [_replication_task(t) for t in tasks]
    results.sort(key=lambda r: (r.T, r.rep))
    return results


# ----------------------------------------------------------------------
# experiment kinds
# ----------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> dict:
    runner = {
        "consistency": run_consistency,
        "variance_scaling": run_variance_scaling,
        "rate_study": run_rate_study,
        "oracle_check": run_oracle_check,
    }.get(cfg.kind)
    if runner is None:
        raise SessionWaveError(f"unknown experiment kind {cfg.kind!r}")
    return runner(cfg)


def _prepare(cfg: ExperimentConfig):
    law = law_from_spec(cfg.law_spec)
    wavelet = make_wavelet(cfg.wavelet_name)
    os.makedirs(cfg.out_dir, exist_ok=True)
    return law, wavelet


def _oracle_variances(cfg, law, wavelet, j_max) -> dict | None:
    if not cfg.attach_oracle or law.kind != "pareto" or cfg.scheme != CONTINUOUS:
        return None
    return {j: oracle.coefficient_variance(law, wavelet, j)
            for j in range(1, j_max + 1)}


def run_consistency(cfg: ExperimentConfig) -> dict:
    """Median error of the estimate over a grid of horizons."""
    law, wavelet = _prepare(cfg)
    alpha = law.alpha
    all_results = []
    summary_rows = []
    scale_rows = []
    for T in cfg.t_values:
        scales = make_scales(cfg, T, wavelet.M)
        oracle_v = _oracle_variances(cfg, law, wavelet, scales.J1)
        results = _run_batch(cfg, law, wavelet, T, scales, scales.J1, oracle_v)
        all_results.extend(results)
        summary_rows.append(_summarise(T, alpha, results))
        scale_rows.extend(_scale_summary(T, results))
    _write_results(cfg, all_results, alpha)
    _write_summary(cfg, summary_rows)
    _write_scales(cfg, scale_rows)
    medians = [row["median_abs_err"] for row in summary_rows]
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    if cfg.check and len(medians) > 1 and not decreasing:
        raise SessionWaveError(
            f"median absolute error not decreasing across horizons: {medians}")
    return {"summary": summary_rows, "decreasing": decreasing}


def run_variance_scaling(cfg: ExperimentConfig) -> dict:
    """Pooled per-scale second moments and the regression slope of their log."""
    law, wavelet = _prepare(cfg)
    alpha = law.alpha
    T = cfg.t_values[0]
    J = total_octaves(T, wavelet.M)
    scales = build_scales(T, wavelet.M, 1, J)
    oracle_v = _oracle_variances(cfg, law, wavelet, J)
    results = _run_batch(cfg, law, wavelet, T, scales, J, oracle_v,
                         estimate=False)
    pooled = _pool_mj(results)
    js = np.array(sorted(pooled))
    lo, hi = math.ceil(J / 3.0), math.floor(2.0 * J / 3.0)
    window = js[(js >= lo) & (js <= hi)]
    slope, intercept = _weighted_slope(
        window, np.array([math.log2(pooled[j]) for j in window]),
        np.array([scales.n(j) for j in window], dtype=float))
    _write_results(cfg, results, alpha)
    scale_rows = _scale_summary(T, results)
    _write_scales(cfg, scale_rows)
    summary = [{"T": T, "slope": slope, "target": 2.0 - alpha,
                "window_lo": int(lo), "window_hi": int(hi),
                "n": len(results)}]
    _write_summary(cfg, summary)
    return {"slope": slope, "target": 2.0 - alpha, "pooled": pooled,
            "window": (lo, hi)}


def run_rate_study(cfg: ExperimentConfig) -> dict:
    """Robust RMSE against the horizon, with its log-log slope."""
    law, wavelet = _prepare(cfg)
    if not 1.0 < law.alpha < 2.0:
        raise SessionWaveError("rate study needs alpha in (1, 2)")
    alpha = law.alpha
    all_results = []
    summary_rows = []
    scale_rows = []
    for T in cfg.t_values:
        scales = make_scales(cfg, T, wavelet.M)
        oracle_v = _oracle_variances(cfg, law, wavelet, scales.J1)
        results = _run_batch(cfg, law, wavelet, T, scales, scales.J1, oracle_v)
        all_results.extend(results)
        summary_rows.append(_summarise(T, alpha, results))
        scale_rows.extend(_scale_summary(T, results))
    _write_results(cfg, all_results, alpha)
    _write_summary(cfg, summary_rows)
    _write_scales(cfg, scale_rows)
    out = {"summary": summary_rows}
    if len(cfg.t_values) > 1:
        xs = np.log([row["T"] for row in summary_rows])
        ys = np.log([row["robust_rmse"] for row in summary_rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
        beta = cfg.beta if cfg.beta is not None else math.inf
        out["slope"] = slope
        out["target"] = -oracle.rate_exponent(cfg.scheme, alpha, beta)
    else:
        out["slope"] = math.nan
        out["flag"] = "single horizon: slope undefined"
    return out


def run_oracle_check(cfg: ExperimentConfig) -> dict:
    """Monte Carlo versus analytic oracles, one z-scored row per check."""
    law, wavelet = _prepare(cfg)
    rows = []
    R = cfg.effective_replications()
    rng_master = cfg.master_seed

    if law.alpha > 1.0 and law.supports_stationary_init:
        lag = 2.0
        mean_o, cov_o, _ = oracle.mean_cov_stationary(law, lag)
        x0 = np.empty(R)
        x2 = np.empty(R)
        for r in range(R):
            sset = simulate(law, 8.0, STATIONARY, split_seed(rng_master, r))
            x0[r] = evaluate(sset, 0.0)
            x2[r] = evaluate(sset, lag)
        rows.append(_zrow("stationary_mean", mean_o, x0))
        rows.append(_zrow_cov("stationary_cov_lag2", cov_o, x0, x2))
    mean_o1 = oracle.mean_cov_nonstationary(law, 1.0, 1.0)[0]
    cov_o = oracle.mean_cov_nonstationary(law, 1.0, 2.0)[1]
    y1 = np.empty(R)
    y2 = np.empty(R)
    for r in range(R):
        sset = simulate(law, 4.0, FRESH, split_seed(rng_master + 1, r))
        y1[r] = evaluate(sset, 1.0)
        y2[r] = evaluate(sset, 2.0)
    rows.append(_zrow("fresh_mean_t1", mean_o1, y1))
    rows.append(_zrow_cov("fresh_cov_12", cov_o, y1, y2))

    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "oracle.csv")
    with open(path, "w") as fh:
        fh.write("check,target,estimate,stderr,z,pass\n")
        for row in rows:
            fh.write("{name},{target!r},{estimate!r},{stderr!r},{z!r},{ok}\n"
                     .format(**row))
    return {"rows": rows, "all_pass": all(r["ok"] for r in rows)}


def _zrow(name, target, samples):
    est = float(samples.mean())
    se = float(samples.std(ddof=1)) / math.sqrt(len(samples))
    z = (est - target) / se if se > 0 else math.inf
    return {"name": name, "target": target, "estimate": est, "stderr": se,
            "z": z, "ok": abs(z) <= 4.0}


def _zrow_cov(name, target, xs, ys):
    prods = (xs - xs.mean()) * (ys - ys.mean())
    n = len(xs)
    est = float(prods.sum()) / (n - 1)
    se = float(prods.std(ddof=1)) / math.sqrt(n)
    z = (est - target) / se if se > 0 else math.inf
    return {"name": name, "target": target, "estimate": est, "stderr": se,
            "z": z, "ok": abs(z) <= 4.0}


# ----------------------------------------------------------------------
# summaries and CSV output
# ----------------------------------------------------------------------

def _summarise(T, alpha, results) -> dict:
    hats = np.array([r.alpha_hat for r in results])
    errs = np.abs(hats - alpha)
    return {
        "T": T,
        "n": len(results),
        "alpha": alpha,
        "median_alpha_hat": float(np.median(hats)),
        "mean_alpha_hat": float(hats.mean()),
        "stderr": float(hats.std(ddof=1)) / math.sqrt(len(hats)) if len(hats) > 1 else 0.0,
        "median_abs_err": float(np.median(errs)),
        "robust_rmse": ROBUST_SCALE * float(np.median(errs)),
        "rmse": float(np.sqrt((errs ** 2).mean())),
        "bias": float((hats - alpha).mean()),
        "spread": float(hats.std(ddof=1)) if len(hats) > 1 else 0.0,
        "boundary_count": int(sum(r.boundary for r in results)),
    }


def _pool_mj(results) -> dict:
    pooled: dict = {}
    counts: dict = {}
    for r in results:
        for j, m in r.m_j.items():
            pooled[j] = pooled.get(j, 0.0) + m
            counts[j] = counts.get(j, 0) + 1
    return {j: pooled[j] / counts[j] for j in pooled}


def _scale_summary(T, results):
    rows = []
    js = sorted({j for r in results for j in r.m_j})
    for j in js:
        ms = [r.m_j[j] for r in results if j in r.m_j]
        lams = [r.lambda_j[j] for r in results if j in r.lambda_j]
        row = {"T": T, "j": j, "n_reps": len(ms),
               "m_j": float(np.mean(ms)),
               "lambda_mean": float(np.mean(lams)) if lams else math.nan,
               "lambda_stderr": (float(np.std(lams, ddof=1)) / math.sqrt(len(lams))
                                 if len(lams) > 1 else math.nan)}
        rows.append(row)
    return rows


def _weighted_slope(xs, ys, weights):
    w = weights / weights.sum()
    xbar = float(np.dot(w, xs))
    ybar = float(np.dot(w, ys))
    num = float(np.dot(w, (xs - xbar) * (ys - ybar)))
    den = float(np.dot(w, (xs - xbar) ** 2))
    return num / den, ybar - xbar * num / den


def _write_results(cfg, results, alpha):
    path = os.path.join(cfg.out_dir, "results.csv")
    with open(path, "w") as fh:
        fh.write("kind,scheme,wavelet,alpha,T,rep,seed,alpha_hat,hurst,"
                 "abs_err,boundary,runtime_s\n")
        for r in results:
            err = abs(r.alpha_hat - alpha)
            fh.write(f"{cfg.kind},{cfg.scheme},{cfg.wavelet_name},{alpha!r},"
                     f"{r.T},{r.rep},{r.seed},{r.alpha_hat!r},{r.hurst!r},"
                     f"{err!r},{int(r.boundary)},{r.runtime_s:.3f}\n")


def _write_summary(cfg, rows):
    path = os.path.join(cfg.out_dir, "summary.csv")
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[k]) for k in keys) + "\n")


def _write_scales(cfg, rows):
    path = os.path.join(cfg.out_dir, "scales.csv")
    with open(path, "w") as fh:
        fh.write("T,j,n_reps,m_j,lambda_mean,lambda_stderr\n")
        for row in rows:
            fh.write("{T},{j},{n_reps},{m},{lm},{ls}\n".format(
                T=row["T"], j=row["j"], n_reps=row["n_reps"],
                m=_fmt(row["m_j"]), lm=_fmt(row["lambda_mean"]),
                ls=_fmt(row["lambda_stderr"])))


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))
    return str(value)

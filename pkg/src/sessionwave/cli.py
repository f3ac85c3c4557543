"""Command line interface.

Subcommands: ``simulate`` (write an event file), ``coeffs`` (wavelet
coefficients of an event or sample file), ``estimate`` (the memory
parameter from any observation scheme), ``oracle`` (analytic tables) and
``experiment`` (config-driven Monte Carlo runs).

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import __version__, oracle
from .errors import (DegenerateContrastError, QuadratureError,
                     SessionWaveError)
from .experiments import law_from_spec, parse_config, parse_rate_law, run_experiment
from .laws import DurationRateLaw
from .simulate import (read_events, read_samples, sample_grid, simulate,
                       window_averages, write_events, write_samples)
from .wavelets import (AVERAGED, CONTINUOUS, DISCRETE, continuous_coefficients,
                       discrete_coefficients, make_wavelet, read_coefficients,
                       write_coefficients, write_wavelet_table)
from .whittle import (build_scales, default_scale_readings, default_scales,
                      estimate_alpha, rate_optimal_scales)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sessionwave",
        description="Simulate heavy-tailed session traffic and estimate its "
                    "memory parameter from wavelet coefficients.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="global seed")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a path and write an event file")
    _law_flags(sim)
    sim.add_argument("--t", type=float, required=True, help="horizon")
    sim.add_argument("--mode", default="fresh",
                     choices=["fresh", "stationary", "burnin"])
    sim.add_argument("--burnin-length", type=float, default=None)
    sim.add_argument("--out", required=True, help="event file path")
    sim.add_argument("--grid-out", help="also write point samples (CSV k,value)")
    sim.add_argument("--averaged-out", help="also write window averages (CSV)")

    cf = sub.add_parser("coeffs", help="wavelet coefficients of an input file")
    cf.add_argument("--input", required=True, help="event file or sample CSV")
    cf.add_argument("--scheme", required=True,
                    choices=[CONTINUOUS, DISCRETE, AVERAGED])
    cf.add_argument("--wavelet", default="haar")
    cf.add_argument("--jmax", type=int, default=None)
    cf.add_argument("--out", required=True)
    cf.add_argument("--dump-wavelet", help="debug table CSV x,phi,psi,Psi")

    est = sub.add_parser("estimate", help="estimate the memory parameter")
    est.add_argument("--input", required=True,
                     help="coefficient CSV, event file or sample CSV")
    est.add_argument("--scheme", default=CONTINUOUS,
                     choices=[CONTINUOUS, DISCRETE, AVERAGED])
    est.add_argument("--wavelet", default="haar")
    est.add_argument("--j0", type=int, default=None)
    est.add_argument("--j1", type=int, default=None)
    est.add_argument("--rate-optimal", action="store_true")
    est.add_argument("--beta", type=float, default=None)
    est.add_argument("--alpha-hint", type=float, default=1.5)
    est.add_argument("--logbase", type=float, default=2.0)
    est.add_argument("--diagnostics", action="store_true",
                     help="print weights and condition checks")

    orc = sub.add_parser("oracle", help="emit analytic oracle tables")
    _law_flags(orc)
    orc.add_argument("--wavelet", default="haar")
    orc.add_argument("--out-dir", required=True)
    orc.add_argument("--z", default="16,256,4096,65536",
                     help="comma separated widths for the prefactor table")

    exp = sub.add_parser("experiment", help="run a config-driven experiment")
    exp.add_argument("--config", required=True)
    exp.add_argument("--fast", action="store_true", help="cap replications at 10")
    exp.add_argument("--check", action="store_true",
                     help="enforce the experiment's acceptance property")
    exp.add_argument("--workers", type=int, default=None)
    return parser


def _law_flags(parser):
    parser.add_argument("--kind", default="pareto",
                        choices=["pareto", "stable", "two_regime"])
    parser.add_argument("--alpha", type=float, default=1.5)
    parser.add_argument("--rate-law", default="point:1.0")
    parser.add_argument("--sigma", type=float, default=1.0, help="stable scale")
    parser.add_argument("--u0", type=float, default=1.0, help="two-regime threshold")


def _law_from_args(args) -> DurationRateLaw:
    spec = {"kind": args.kind, "alpha": str(args.alpha), "rate_law": args.rate_law,
            "params.sigma": str(args.sigma), "params.u0": str(args.u0)}
    return law_from_spec(spec)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _dispatch(args)
    except (DegenerateContrastError, QuadratureError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (SessionWaveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def cli_main(argv=None) -> int:
    return main(argv)


def _dispatch(args) -> int:
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "coeffs":
        return _cmd_coeffs(args)
    if args.command == "estimate":
        return _cmd_estimate(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    if args.command == "experiment":
        return _cmd_experiment(args)
    raise SessionWaveError(f"unknown command {args.command!r}")


def _cmd_simulate(args) -> int:
    law = _law_from_args(args)
    sset = simulate(law, args.t, args.mode, args.seed,
                    burnin_length=args.burnin_length)
    write_events(sset, args.out)
    if args.grid_out:
        write_samples(sample_grid(sset, int(args.t)), args.grid_out)
    if args.averaged_out:
        write_samples(window_averages(sset, int(args.t)), args.averaged_out)
    print(f"sessions={len(sset)} initial={len(sset.init_residuals)} -> {args.out}")
    return 0


def _load_coefficients(path, scheme, wavelet_name, j_max=None):
    wavelet = make_wavelet(wavelet_name)
    with open(path) as fh:
        header = fh.readline().strip().lower()
    if header.startswith("scheme,"):
        return read_coefficients(path, wavelet_name), wavelet
    if header.startswith("#t="):
        sset = read_events(path)
        if scheme == CONTINUOUS:
            jm = j_max or _default_jmax(sset.T, wavelet.M)
            return continuous_coefficients(sset, wavelet, jm), wavelet
        sample = (sample_grid(sset, int(sset.T)) if scheme == DISCRETE
                  else window_averages(sset, int(sset.T)))
    elif header.startswith("k,"):
        sample = read_samples(path, "grid" if scheme == DISCRETE else "averaged")
        if scheme == CONTINUOUS:
            raise SessionWaveError("sample files cannot feed the continuous scheme")
    else:
        raise SessionWaveError(f"unrecognised input format in {path}")
    jm = j_max or _default_jmax(len(sample), wavelet.M, discrete=True)
    return discrete_coefficients(sample, wavelet, jm), wavelet


def _default_jmax(T, M, discrete=False):
    j = 1
    while 2.0 ** (j + 1) <= (T - M + 1) / (M + 1):
        j += 1
    return j


def _cmd_coeffs(args) -> int:
    coeffs, wavelet = _load_coefficients(args.input, args.scheme, args.wavelet,
                                         args.jmax)
    write_coefficients(coeffs, args.out)
    if args.dump_wavelet:
        write_wavelet_table(wavelet, args.dump_wavelet)
    total = sum(len(v) for v in coeffs.levels.values())
    print(f"scales={sorted(coeffs.levels)} coefficients={total} -> {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    coeffs, wavelet = _load_coefficients(args.input, args.scheme, args.wavelet)
    T = coeffs.T
    if T <= 0:
        # coefficient files carry no horizon; reconstruct from the top scale
        T = float((wavelet.M + 1) * 2 ** max(coeffs.levels))
    if args.rate_optimal:
        if args.beta is None:
            raise SessionWaveError("--rate-optimal requires --beta")
        scales = rate_optimal_scales(T, wavelet.M, args.beta, args.alpha_hint,
                                     args.scheme)
    elif args.j0 is not None and args.j1 is not None:
        scales = build_scales(T, wavelet.M, args.j0, args.j1)
    else:
        scales = default_scales(T, wavelet.M, logbase=args.logbase)
    alpha_hat, diags = estimate_alpha(coeffs, scales)
    print(f"alpha_hat={alpha_hat:.6f} H={diags.hurst:.6f} J={scales.J} "
          f"J0={scales.J0} J1={scales.J1} delta={scales.delta:.6f} "
          f"boundary={diags.boundary_hit}")
    if args.diagnostics:
        readings = default_scale_readings(T, wavelet.M)
        print(f"gradient={diags.gradient:.3e} "
              f"j0_ratio_ok={diags.j0_ratio_ok} j1_ratio_ok={diags.j1_ratio_ok}")
        print(f"default_rule_readings={readings}")
        print("weights=" + " ".join(f"{j}:{w:.4f}" for j, w in diags.weights.items()))
        for note in diags.notes:
            print(f"note: {note}")
    return 0


def _cmd_oracle(args) -> int:
    law = _law_from_args(args)
    wavelet = make_wavelet(args.wavelet)
    os.makedirs(args.out_dir, exist_ok=True)
    zs = [float(tok) for tok in args.z.split(",")]

    with open(os.path.join(args.out_dir, "moments.csv"), "w") as fh:
        fh.write("quantity,t,value\n")
        for t in (0.5, 1.0, 2.0, 8.0):
            fh.write(f"tail_moment_p2,{t!r},{law.tail_moment(2, t)!r}\n")
        for t in (1.0, 2.0, 4.0):
            mean, cov = oracle.mean_cov_nonstationary(law, t / 2.0, t)
            fh.write(f"fresh_mean,{t!r},{mean!r}\n")
            fh.write(f"fresh_cov_half_t,{t!r},{cov!r}\n")
        if law.alpha > 1.0:
            for t in (0.0, 1.0, 2.0):
                mean, cov, kara = oracle.mean_cov_stationary(law, t)
                fh.write(f"stationary_cov,{t!r},{cov!r}\n")
            fh.write(f"stationary_mean,0.0,{mean!r}\n")

    with open(os.path.join(args.out_dir, "prefactor.csv"), "w") as fh:
        fh.write("z,value,stderr,method\n")
        for z in zs:
            pf = oracle.variance_prefactor(law, wavelet, z)
            fh.write(f"{z!r},{pf.value!r},"
                     f"{'' if pf.stderr is None else repr(pf.stderr)},{pf.method}\n")
        fh.write(f"inf,{oracle.prefactor_limit_constant(wavelet, law.alpha) * law.rate_law.abs_moment(2)!r},,limit\n")

    if 1.0 < law.alpha < 2.0:
        with open(os.path.join(args.out_dir, "rate_exponents.csv"), "w") as fh:
            fh.write("scheme,beta,exponent\n")
            beta = oracle.prefactor_decay(law) or math.inf
            for scheme in (CONTINUOUS, DISCRETE, AVERAGED):
                fh.write(f"{scheme},{beta!r},"
                         f"{oracle.rate_exponent(scheme, law.alpha, beta)!r}\n")
    print(f"oracle tables -> {args.out_dir}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = parse_config(args.config)
    if args.fast:
        cfg = _replaced(cfg, fast=True)
    if args.check:
        cfg = _replaced(cfg, check=True)
    if args.workers is not None:
        cfg = _replaced(cfg, workers=args.workers)
    out = run_experiment(cfg)
    for key in ("slope", "target", "decreasing", "all_pass"):
        if key in out:
            print(f"{key}={out[key]}")
    print(f"results -> {cfg.out_dir}")
    return 0


def _replaced(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Subcommands map one-to-one onto the library stages: threshold search,
Monte-Carlo simulation, trajectory tracing, parameter estimation,
closed-form prediction, surrogate-process experiments, and canned
figure recipes. Every subcommand accepts --seed and --workers; file
outputs go wherever --out (or --out-dir) points.

Exit codes: 0 success, 2 validation error (bad inputs or config),
3 runtime failure (an estimation guard tripped).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .density_evolution import coupled_threshold
from .ensemble import EnsembleSpec, Termination
from .errors import RuntimeFailure, ValidationError
from .harness import (ExperimentConfig, load_config_file, merge_config,
                      predictions_csv, run_experiment, write_json_atomic)
from .ou_model import (OUParams, TWO_WAVE_VARIANTS, VARIANT_SINGLE,
                       coupled_refinement_ks, dump_ou_samples, fit_report,
                       ou_first_hit, two_wave_first_hit)
from .param_estimation import (build_parameter_table, default_eps_grid,
                               dump_autocov_csv, dump_trajectory_csv,
                               estimate_nu_theta, extract_window_params,
                               mean_trajectory, measure_table_knots)
from .peeling import dump_tau0_samples, run_trials
from .rng import derive_seed
from .scaling_law import (LAWS, interpolate, load_params, mu0_from_w,
                          save_params)

DEFAULT_DT_DIVISOR = 8  # keeps the Euler grid-hit bias well under the KS bars


def _parse_floats(tokens) -> list[float]:
    out = []
    for tok in tokens:
        for part in str(tok).split(","):
            if part:
                out.append(float(part))
    return out


def _parse_ints(tokens) -> list[int]:
    return [int(round(v)) for v in _parse_floats(tokens)]


def _add_ensemble_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--dv", type=int, required=required, help="variable node degree")
    p.add_argument("--dc", type=int, required=required, help="check node degree")
    p.add_argument("-L", "--chain-length", dest="L", type=int, required=required,
                   help="number of coupled positions")
    p.add_argument("--termination", choices=[t.value for t in Termination],
                   default=None, help="chain boundary handling (default terminated)")


def _add_common_args(p: argparse.ArgumentParser, out_default=None,
                     seed_default=0) -> None:
    p.add_argument("--seed", type=int, default=seed_default,
                   help="master RNG seed")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: SCSCALE_WORKERS or 1)")
    p.add_argument("--out", default=out_default, help="output file path")


def _spec(args, N: int, default_termination: str = "terminated") -> EnsembleSpec:
    term = args.termination or default_termination
    return EnsembleSpec(args.dv, args.dc, args.L, N, Termination(term))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scscale",
        description="Finite-length scaling toolkit for spatially coupled "
                    "LDPC codes on the erasure channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="density evolution threshold search")
    _add_ensemble_args(p)
    p.add_argument("--tol", type=float, default=2e-5,
                   help="bisection tolerance on eps")
    p.add_argument("--de-tol", type=float, default=1e-8,
                   help="density evolution convergence tolerance")
    _add_common_args(p)

    p = sub.add_parser("simulate", help="Monte-Carlo FER/BER curves")
    p.add_argument("--config", default=None, help="flat TOML config file")
    _add_ensemble_args(p, required=False)
    p.add_argument("--eps", nargs="+", default=None,
                   help="erasure probabilities (space or comma separated)")
    p.add_argument("-N", "--block-size", dest="N", nargs="+", default=None,
                   help="variable nodes per position (one or more)")
    p.add_argument("--trials", type=int, default=None, help="trials per point")
    p.add_argument("--expurgate", action=argparse.BooleanOptionalAction,
                   default=None, help="ignore failures made of size-2 "
                   "stopping sets only (default on)")
    p.add_argument("--laws", nargs="+", default=None, choices=list(LAWS),
                   help="prediction laws to attach")
    p.add_argument("--params", dest="params_path", default=None,
                   help="scaling parameter JSON (enables predictions)")
    p.add_argument("--predictions-out", default=None,
                   help="prediction CSV path (default: <out>.predict.csv)")
    _add_common_args(p, seed_default=None)

    p = sub.add_parser("trace", help="mean degree-one trajectory")
    _add_ensemble_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("-N", "--block-size", dest="N", type=int, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--stride", type=int, default=None,
                   help="recording stride in peeling steps")
    p.add_argument("--eps-star", type=float, default=None,
                   help="if given, also report the steady-state window")
    _add_common_args(p, out_default="trace.csv")

    p = sub.add_parser("estimate", help="scaling parameter estimation")
    _add_ensemble_args(p)
    p.add_argument("--mode", choices=("full", "mean", "fluct"), default="full",
                   help="full table, window knots only, or fluctuation "
                        "constants only")
    p.add_argument("--eps", nargs="+", default=None,
                   help="estimation grid (mean/full) or point (fluct)")
    p.add_argument("-N", "--block-size", dest="N", type=int, default=2000,
                   help="block size for trajectory estimation")
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--eps-star", type=float, default=None,
                   help="threshold; computed by bisection when omitted")
    p.add_argument("--threshold-tol", type=float, default=2e-5)
    p.add_argument("--fluct-eps", type=float, default=None,
                   help="eps for the fluctuation stage (default: largest "
                        "estimable gap at the fluctuation block size)")
    p.add_argument("--fluct-N", type=int, default=None,
                   help="block size for the fluctuation stage (default -N)")
    p.add_argument("--fluct-trials", type=int, default=None)
    p.add_argument("--delta", type=float, default=0.05,
                   help="plateau flatness tolerance")
    p.add_argument("--fill", choices=("extrapolate", "error"),
                   default="extrapolate",
                   help="how to handle grid knots whose failure rate trips "
                        "the estimation guard")
    p.add_argument("--audit-dir", default=None,
                   help="dump per-knot trajectories/autocovariance here")
    p.add_argument("--autocov-out", default=None,
                   help="fluct mode: autocovariance CSV path")
    _add_common_args(p)

    p = sub.add_parser("predict", help="closed-form FER/BER predictions")
    p.add_argument("--params", dest="params_path", required=True,
                   help="scaling parameter JSON")
    p.add_argument("--eps", nargs="+", required=True)
    p.add_argument("-N", "--block-size", dest="N", nargs="+", required=True)
    p.add_argument("--laws", nargs="+", default=list(LAWS), choices=list(LAWS))
    p.add_argument("--beta-from-eps-l", action="store_true",
                   help="use the crude eps*L steady-state end instead of the "
                        "fitted beta (older baseline behaviour)")
    _add_common_args(p, out_default="predictions.csv")

    p = sub.add_parser("ou", help="mean-reverting surrogate first-hit runs")
    p.add_argument("--variant", default=VARIANT_SINGLE,
                   choices=(VARIANT_SINGLE,) + TWO_WAVE_VARIANTS)
    p.add_argument("--paths", type=int, default=5000)
    src = p.add_argument_group("process parameters (pick one route)")
    src.add_argument("--params", dest="params_path", default=None,
                     help="scaling parameter JSON (with --eps and -N)")
    src.add_argument("--gamma", type=float, default=None)
    src.add_argument("--nu", type=float, default=None)
    src.add_argument("--theta", type=float, default=None)
    src.add_argument("--eps-star", type=float, default=None)
    src.add_argument("--eps", type=float, default=None)
    src.add_argument("-N", "--block-size", dest="N", type=int, default=None)
    src.add_argument("--m", type=float, default=None,
                     help="direct route: stationary mean")
    src.add_argument("--s2", type=float, default=None,
                     help="direct route: stationary variance")
    p.add_argument("--alpha", type=float, default=0.0,
                   help="time offset of the steady-state window")
    p.add_argument("--dt-div", type=int, default=DEFAULT_DT_DIVISOR,
                   help="time step divisor below the 0.01/theta ceiling")
    p.add_argument("--tau-mult", type=float, default=12.0,
                   help="horizon in units of the expected hit scale")
    p.add_argument("--check-dt", action="store_true",
                   help="also report the KS shift from halving dt "
                        "(common-noise comparison)")
    _add_common_args(p)

    p = sub.add_parser("reproduce", help="canned figure-data recipes")
    p.add_argument("--figure", type=int, required=True, choices=(1, 2, 3, 4, 5))
    p.add_argument("--fast", action="store_true",
                   help="10x reduced block sizes and trial counts")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default reproduce_fig<k>)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)

    return parser


# ---------------------------------------------------------------- commands

def _cmd_threshold(args) -> int:
    spec_term = args.termination or "terminated"
    result = coupled_threshold(args.dv, args.dc, args.L, tol_eps=args.tol,
                               tol_de=args.de_tol, termination=spec_term)
    payload = {
        "dv": args.dv, "dc": args.dc, "L": args.L,
        "termination": spec_term, "eps_star": result, "tol": args.tol,
    }
    print(json.dumps(payload, indent=2))
    if args.out:
        write_json_atomic(payload, args.out)
    return 0


def _cmd_simulate(args) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    cli_values = {
        "dv": args.dv, "dc": args.dc, "L": args.L,
        "termination": args.termination,
        "eps": _parse_floats(args.eps) if args.eps else None,
        "N": _parse_ints(args.N) if args.N else None,
        "trials": args.trials, "seed": args.seed,
        "expurgate": args.expurgate, "laws": args.laws,
        "params_path": args.params_path,
        "predictions_out": args.predictions_out,
        "out": args.out, "workers": args.workers,
    }
    config = merge_config(file_values, cli_values)
    points = run_experiment(config, progress=_print_point)
    print(f"wrote {config.out} ({len(points)} points)")
    if config.wants_predictions:
        print(f"wrote {config.resolved_predictions_out()}")
    return 0


def _print_point(point) -> None:
    print(f"eps={point.eps:.6g} N={point.N}: fer={point.fer:.4g} "
          f"ber={point.ber:.4g} failures={point.failures} "
          f"expurgated={point.expurgated}")


def _cmd_trace(args) -> int:
    spec = _spec(args, args.N)
    traj = mean_trajectory(spec, args.eps, args.trials, args.seed,
                           workers=args.workers, stride=args.stride)
    dump_trajectory_csv(traj, args.out)
    print(f"wrote {args.out}: {traj.tau.size} grid points, "
          f"{traj.successes}/{traj.trials} successful trials")
    if args.eps_star is not None:
        a, b, g = extract_window_params(traj, args.eps, args.eps_star)
        print(f"window: alpha={a:.4f} beta={b:.4f} gamma={g:.4f}")
    return 0


def _cmd_estimate(args) -> int:
    eps_star = args.eps_star
    if eps_star is None:
        eps_star = coupled_threshold(args.dv, args.dc, args.L,
                                     tol_eps=args.threshold_tol)
        print(f"eps_star = {eps_star:.6f} (bisection, tol {args.threshold_tol:g})")
    spec = _spec(args, args.N)

    if args.mode == "fluct":
        fluct_n = args.fluct_N or args.N
        fspec = EnsembleSpec(args.dv, args.dc, args.L, fluct_n,
                             Termination.TRUNCATED)
        eps = args.fluct_eps
        if eps is None:
            eps = _parse_floats(args.eps)[0] if args.eps else \
                eps_star - 1.6 / math.sqrt(fluct_n)
        stats = estimate_nu_theta(fspec, eps, args.fluct_trials or args.trials,
                                  args.seed, workers=args.workers,
                                  delta=args.delta)
        payload = {
            "dv": args.dv, "dc": args.dc, "L": args.L, "N": fluct_n,
            "eps": eps, "nu": stats.nu, "theta": stats.theta,
            "se_nu": stats.se_nu, "se_theta": stats.se_theta,
            "r_squared": stats.r_squared, "fit_ok": stats.fit_ok,
            "trials": stats.trials,
        }
        print(json.dumps(payload, indent=2))
        if args.out:
            write_json_atomic(payload, args.out)
        if args.autocov_out:
            dump_autocov_csv(stats, args.autocov_out)
        return 0

    grid = _parse_floats(args.eps) if args.eps else default_eps_grid(eps_star)

    if args.mode == "mean":
        knots = measure_table_knots(spec, grid, args.trials, args.seed,
                                    eps_star, workers=args.workers,
                                    delta=args.delta, fill=args.fill,
                                    audit_dir=args.audit_dir)
        payload = {
            "dv": args.dv, "dc": args.dc, "L": args.L, "eps_star": eps_star,
            "knots": [{"eps": k.eps, "alpha": k.alpha, "beta": k.beta,
                       "gamma": k.gamma, "extrapolated": k.extrapolated}
                      for k in knots],
        }
        print(json.dumps(payload, indent=2))
        write_json_atomic(payload, args.out or "knots.json")
        return 0

    fluct_spec = None
    if args.fluct_N:
        fluct_spec = EnsembleSpec(args.dv, args.dc, args.L, args.fluct_N,
                                  Termination.TRUNCATED)
    params = build_parameter_table(
        spec, grid, args.trials, args.seed, eps_star, workers=args.workers,
        nu_theta_eps=args.fluct_eps, nu_theta_trials=args.fluct_trials,
        nu_theta_spec=fluct_spec, delta=args.delta, fill=args.fill,
        audit_dir=args.audit_dir)
    out = args.out or "params.json"
    save_params(params, out)
    print(f"wrote {out}: nu={params.nu:.4f} theta={params.theta:.4f}, "
          f"{len(params.table)} knots on [{params.eps_min:.4f}, "
          f"{params.eps_max:.4f}]")
    return 0


def _cmd_predict(args) -> int:
    params = load_params(args.params_path)
    preds = predictions_csv(params, _parse_floats(args.eps),
                            _parse_ints(args.N), args.laws, args.out,
                            beta_from_eps_l=args.beta_from_eps_l)
    for p in preds:
        print(f"eps={p.eps:.6g} N={p.N} {p.law}: fer={p.fer:.4g} "
              f"ber={p.ber:.4g} log_mu0={p.log_mu0:.4g}")
    print(f"wrote {args.out} ({len(preds)} rows)")
    return 0


def _ou_params(args) -> OUParams:
    if args.m is not None:
        if args.s2 is None or args.theta is None:
            raise ValidationError("direct route needs --m, --s2 and --theta")
        m, s2, theta = args.m, args.s2, args.theta
        dt = 0.01 / theta / args.dt_div
        ref = mu0_from_w(m / math.sqrt(s2), theta)
        if not math.isfinite(ref.value):
            raise ValidationError("hit scale exceeds double range; reduce m/s")
        tau_max = args.alpha + args.tau_mult * max(ref.value, 1.0 / theta)
        return OUParams(m=m, theta=theta, s2=s2, alpha=args.alpha, dt=dt,
                        tau_max=tau_max)
    if args.params_path is not None:
        if args.eps is None or args.N is None:
            raise ValidationError("--params route needs --eps and -N")
        table = load_params(args.params_path)
        _, _, gamma = interpolate(table, args.eps)
        nu, theta, eps_star = table.nu, table.theta, table.eps_star
    else:
        missing = [n for n in ("gamma", "nu", "theta", "eps_star", "eps", "N")
                   if getattr(args, n) is None]
        if missing:
            raise ValidationError(f"constant route needs --{', --'.join(missing)}")
        gamma, nu, theta, eps_star = args.gamma, args.nu, args.theta, args.eps_star
    p = OUParams.from_scaling(gamma, nu, theta, args.N, args.eps, eps_star,
                              alpha=args.alpha, dt=0.01 / theta / args.dt_div)
    if args.tau_mult != 12.0:
        scale = (p.tau_max - p.alpha) / 12.0
        p = OUParams(m=p.m, theta=p.theta, s2=p.s2, alpha=p.alpha, dt=p.dt,
                     tau_max=p.alpha + args.tau_mult * scale)
    return p


def _cmd_ou(args) -> int:
    params = _ou_params(args)
    if args.variant == VARIANT_SINGLE:
        samples = ou_first_hit(params, args.paths, args.seed)
    else:
        samples = two_wave_first_hit(params, args.paths, args.seed,
                                     variant=args.variant)
    report = fit_report(samples)
    report["m"] = params.m
    report["noise_ratio"] = params.noise_ratio
    report["theta"] = params.theta
    report["dt"] = params.dt
    report["mu0"] = float(samples.model_mu0())
    if args.check_dt:
        report["dt_halving_ks"] = coupled_refinement_ks(
            params, min(args.paths, 20000), derive_seed(args.seed, "refine"))
    print(json.dumps(report, indent=2))
    if args.out:
        dump_ou_samples(samples, args.out)
        print(f"wrote {args.out}")
    return 0


# ------------------------------------------------------------- reproduce

_FIGURE_ENSEMBLES = {
    1: (5, 10, 0.4875, None),
    2: (5, 10, 0.4875, 0.485),
    3: (5, 10, None, 0.485),
    4: (4, 8, None, 0.48),
    5: (3, 6, None, 0.475),
}


class _Profile:
    """Full-scale vs 10x-reduced recipe knobs."""

    def __init__(self, fast: bool):
        self.fast = fast
        self.threshold_tol = 5e-4 if fast else 2e-5
        self.scale = 10 if fast else 1

    def n(self, full_n: int) -> int:
        return max(50, full_n // self.scale)

    def trials(self, full_trials: int) -> int:
        return max(50, full_trials // self.scale)


def _figure_threshold(dv, dc, L, profile, out_dir, name) -> float:
    eps_star = coupled_threshold(dv, dc, L, tol_eps=profile.threshold_tol)
    payload = {"dv": dv, "dc": dc, "L": L, "termination": "terminated",
               "eps_star": eps_star, "tol": profile.threshold_tol}
    write_json_atomic(payload, os.path.join(out_dir, name))
    print(f"eps_star = {eps_star:.6f}")
    return eps_star


def _figure_params(dv, dc, L, eps_star, fluct_eps, profile, out_dir, name,
                   seed, workers):
    """Estimated parameter table shared by the figure recipes."""
    est_n = profile.n(2000)
    spec = EnsembleSpec(dv, dc, L, est_n, Termination.TERMINATED)
    fluct_n = profile.n(10000)
    fluct_spec = EnsembleSpec(dv, dc, L, fluct_n, Termination.TRUNCATED)
    params = build_parameter_table(
        spec, default_eps_grid(eps_star), profile.trials(600),
        derive_seed(seed, "table"), eps_star, workers=workers,
        nu_theta_eps=None if profile.fast else fluct_eps,
        nu_theta_trials=150 if profile.fast else 400,
        nu_theta_spec=fluct_spec)
    path = os.path.join(out_dir, name)
    save_params(params, path)
    print(f"wrote {path}: nu={params.nu:.4f} theta={params.theta:.4f}")
    return params, path


def _reproduce_fig1(profile, out_dir, seed, workers) -> None:
    dv, dc, figure_eps, _ = _FIGURE_ENSEMBLES[1]
    L, N = 50, profile.n(2000)
    eps_star = _figure_threshold(dv, dc, L, profile, out_dir, "fig1_threshold.json")
    # the figure's own eps sits where decoding fails almost surely at
    # affordable block sizes, so the trace backs the gap off to the
    # guard-safe scale ~1.6/sqrt(N); the plateau illustration is the
    # same object after the (eps_star - eps) normalization
    eps = round(min(figure_eps, eps_star - 1.6 / math.sqrt(N)), 6)
    window = {"figure_eps": figure_eps, "eps": eps, "eps_star": eps_star,
              "N": N}
    for term in Termination:
        spec = EnsembleSpec(dv, dc, L, N, term)
        traj = mean_trajectory(spec, eps, profile.trials(1000),
                               derive_seed(seed, "fig1", term.value),
                               workers=workers)
        path = os.path.join(out_dir, f"fig1_{term.value}_trace.csv")
        dump_trajectory_csv(traj, path)
        a, b, g = extract_window_params(traj, eps, eps_star)
        window[term.value] = {"alpha": a, "beta": b, "gamma": g}
        print(f"wrote {path} (alpha={a:.3f} beta={b:.3f} gamma={g:.3f})")
    write_json_atomic(window, os.path.join(out_dir, "fig1_window.json"))


def _reproduce_fig2(profile, out_dir, seed, workers) -> None:
    dv, dc, eps, fluct_eps = _FIGURE_ENSEMBLES[2]
    L, N = 50, profile.n(2000)
    eps_star = _figure_threshold(dv, dc, L, profile, out_dir, "fig2_threshold.json")
    params, _ = _figure_params(dv, dc, L, eps_star, fluct_eps, profile,
                               out_dir, "fig2_params.json", seed, workers)

    alpha, beta, gamma = interpolate(params, eps)
    model = {"eps": eps, "N": N, "alpha": alpha, "beta": beta, "gamma": gamma,
             "nu": params.nu, "theta": params.theta, "eps_star": eps_star}
    for term, trials in ((Termination.TERMINATED, profile.trials(10000)),
                         (Termination.TRUNCATED, profile.trials(4000))):
        spec = EnsembleSpec(dv, dc, L, N, term)
        result = run_trials(spec, eps, trials,
                            derive_seed(seed, "fig2", term.value),
                            workers=workers)
        path = os.path.join(out_dir, f"fig2_tau0_{term.value}.csv")
        dump_tau0_samples(result, path)
        model[term.value] = {
            "trials": trials, "fer": result.fer,
            "failures": result.failures,
            "expurgated": result.expurgated_failures,
        }
        print(f"wrote {path} (fer={result.fer:.4g})")

    ou = OUParams.from_scaling(gamma, params.nu, params.theta, N, eps,
                               eps_star, alpha=alpha,
                               dt=0.01 / params.theta / DEFAULT_DT_DIVISOR)
    single = ou_first_hit(ou, profile.trials(5000), derive_seed(seed, "fig2-ou"))
    pair = two_wave_first_hit(ou, profile.trials(5000),
                              derive_seed(seed, "fig2-ou2"))
    sample_sets = [single, pair]
    path = os.path.join(out_dir, "fig2_ou_samples.csv")
    dump_ou_samples(sample_sets, path)
    model["ou_single"] = fit_report(single)
    model["ou_sum_of_hits"] = fit_report(pair)
    model["mu0"] = float(ou.mu0())
    write_json_atomic(model, os.path.join(out_dir, "fig2_model.json"))
    print(f"wrote {path}")


def _reproduce_curves(figure, profile, out_dir, seed, workers) -> None:
    dv, dc, _, fluct_eps = _FIGURE_ENSEMBLES[figure]
    L = 50
    eps_star = _figure_threshold(dv, dc, L, profile, out_dir,
                                 f"fig{figure}_threshold.json")
    _, params_path = _figure_params(dv, dc, L, eps_star, fluct_eps, profile,
                                    out_dir, f"fig{figure}_params.json",
                                    seed, workers)
    eps_grid = [round(eps_star - g, 6) for g in
                (0.035, 0.030, 0.025, 0.020, 0.015, 0.010, 0.005)]
    config = ExperimentConfig(
        dv=dv, dc=dc, L=L, eps=tuple(eps_grid),
        N=tuple(profile.n(n) for n in (500, 1000, 2000)),
        trials=profile.trials(2000), seed=derive_seed(seed, "curves"),
        termination="terminated", expurgate=True, laws=tuple(LAWS),
        params_path=params_path,
        out=os.path.join(out_dir, f"fig{figure}_simulate.csv"),
        predictions_out=os.path.join(out_dir, f"fig{figure}_predict.csv"),
        workers=workers)
    run_experiment(config, progress=_print_point)
    print(f"wrote {config.out}\nwrote {config.predictions_out}")


def _cmd_reproduce(args) -> int:
    out_dir = args.out_dir or f"reproduce_fig{args.figure}"
    os.makedirs(out_dir, exist_ok=True)
    profile = _Profile(args.fast)
    print(f"figure {args.figure} ({'fast' if args.fast else 'full'} profile) "
          f"-> {out_dir}/")
    if args.figure == 1:
        _reproduce_fig1(profile, out_dir, args.seed, args.workers)
    elif args.figure == 2:
        _reproduce_fig2(profile, out_dir, args.seed, args.workers)
    else:
        _reproduce_curves(args.figure, profile, out_dir, args.seed, args.workers)
    return 0


_COMMANDS = {
    "threshold": _cmd_threshold,
    "simulate": _cmd_simulate,
    "trace": _cmd_trace,
    "estimate": _cmd_estimate,
    "predict": _cmd_predict,
    "ou": _cmd_ou,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

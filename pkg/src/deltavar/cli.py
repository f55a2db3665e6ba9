"""Command-line interface.

Exit codes: 0 success, 2 invalid parameters, 3 numerical failure,
4 experiment failed.
"""

import argparse
import os
import sys

from . import constants as K
from . import experiment, jsonio, spde
from .errors import ExperimentFailedError, InvalidParameterError, NumericalError
from .estimators import EstimationInput, estimate, parse_geometry, parse_known, select_M
from .fbm import FbmSpec, sample_iterated_fbm
from .findiff import read_csv, write_csv

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_EXPERIMENT = 0, 2, 3, 4


def _common(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="seed (or seed base); default 0")
    parser.add_argument("--threads", type=int, default=d(None), help="worker threads")
    parser.add_argument("--out-dir", default=d(None), help="directory for output files")
    parser.add_argument("--config", default=d(None), help="JSON experiment configuration")


def _pair(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from exc
    return a, b


def _int_list(text):
    try:
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="deltavar",
                                description="Delta-power variations and SPDE parameter estimation")
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="print CLT constants as JSON")
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--M", type=int, required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--H", type=float, required=True)
    c.add_argument("--alpha", type=float)
    c.add_argument("--gamma", type=float)

    f = sub.add_parser("simulate-fbm", help="sample J^m B^H on a uniform grid")
    f.add_argument("--m", type=int, default=0)
    f.add_argument("--H", type=float, required=True)
    f.add_argument("--a", type=float, default=0.0)
    f.add_argument("--b", type=float, default=1.0)
    f.add_argument("--n", type=int, default=1025, help="number of grid points")
    f.add_argument("--out", help="output CSV (default: stdout)")

    s = sub.add_parser("simulate-spde", help="sample a spatial slice of the SPDE")
    s.add_argument("--theta", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--gamma", type=float, default=0.5)
    s.add_argument("--nonlinearity", default="zero", help="zero | poly:c0,c1,... | advection[:v]")
    s.add_argument("--domain", choices=["dirichlet", "whole-line"], default="dirichlet")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n-modes", type=int, default=spde.DEFAULT_N_MODES)
    s.add_argument("--n-time-steps", type=int, default=1000)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--n-points", type=int, default=4097)
    s.add_argument("--window", type=_pair, help="whole-line window 'x_min,x_max'")
    s.add_argument("--xi-cut", type=float)
    s.add_argument("--n-xi", type=int)
    s.add_argument("--out", help="output CSV (default: stdout)")

    e = sub.add_parser("estimate", help="estimate theta or sigma from a CSV slice")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--q", type=int, default=2)
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--M", type=int)
    g.add_argument("--auto-M", action="store_true")
    e.add_argument("--s-star", type=float, required=True)
    e.add_argument("--known", required=True, help="theta=VALUE or sigma=VALUE")
    e.add_argument("--geometry", default="dirichlet", help="dirichlet | whole-line:alpha,gamma,m")

    x = sub.add_parser("mc-experiment", help="Monte Carlo estimator experiment")
    x.add_argument("--theta", type=float)
    x.add_argument("--sigma", type=float)
    x.add_argument("--alpha", type=float)
    x.add_argument("--gamma", type=float)
    x.add_argument("--nonlinearity")
    x.add_argument("--domain", choices=[spde.DIRICHLET, spde.WHOLE_LINE])
    x.add_argument("--t", dest="t_obs", type=float)
    x.add_argument("--a", dest="window_a", type=float)
    x.add_argument("--b", dest="window_b", type=float)
    x.add_argument("--resolutions", type=_int_list)
    x.add_argument("--q", type=int)
    x.add_argument("--M", help="difference order or 'auto'")
    x.add_argument("--reps", dest="n_replications", type=int)
    x.add_argument("--n-modes", type=int)
    x.add_argument("--n-time-steps", type=int)
    x.add_argument("--plot", action="store_true", help="also write plot CSVs")
    x.add_argument("--svg", action="store_true", help="also render SVG charts (needs matplotlib)")

    k = sub.add_parser("clt-check", help="Monte Carlo check of the variation CLT for J^m B^H")
    k.add_argument("--m", type=int, default=0)
    k.add_argument("--H", type=float, required=True)
    k.add_argument("--M", type=int, required=True)
    k.add_argument("--q", type=int, default=2)
    k.add_argument("--N", type=int, default=4096, help="number of grid intervals")
    k.add_argument("--reps", type=int, default=1000)

    for sp in (c, f, s, e, x, k):
        _common(sp, suppress=True)
    return p


def _seed(a):
    return 0 if a.seed is None else a.seed


def _emit_csv(grid, out, out_dir, default_name):
    if out is None and out_dir is None:
        write_csv(sys.stdout, grid)
        return
    path = os.path.join(out_dir or "", out or default_name)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_csv(path, grid)


def cmd_constants(a):
    cc = K.clt_constants(a.q, a.M, a.m, a.H)
    d = cc.to_dict()
    c = None
    if a.alpha is not None or a.gamma is not None:
        if a.alpha is None or a.gamma is None:
            raise InvalidParameterError("--alpha and --gamma must be given together")
        c = K.c_alpha_gamma_m(a.alpha, a.gamma, a.m)
    out = {"tau_q": d["tau_q"], "mu": d["mu"], "rho_first_20": d["rho_first_20"],
           "rho_sq_k": d["rho_sq_k"], "sigma_sq": d["sigma_sq"], "nu": K.nu(a.H), "c": c}
    sys.stdout.write(jsonio.dumps(out))


def cmd_simulate_fbm(a):
    path = sample_iterated_fbm(FbmSpec(a.m, a.H, a.a, a.b, a.n, _seed(a)))
    _emit_csv(path.values, a.out, a.out_dir, "fbm.csv")


def cmd_simulate_spde(a):
    domain = spde.WHOLE_LINE if a.domain == "whole-line" else spde.DIRICHLET
    model = spde.SpdeModel(a.theta, a.sigma, a.alpha, a.gamma,
                           spde.parse_nonlinearity(a.nonlinearity), domain)
    if domain == spde.WHOLE_LINE:
        window = a.window or (a.a, a.b)
        quad = (a.xi_cut, a.n_xi)
        field = spde.simulate_whole_line(model, a.t, window, a.n_points, quad, _seed(a))
    else:
        if model.is_linear:
            state = spde.simulate_linear_dirichlet(model, a.t, a.n_modes, _seed(a))
        else:
            state = spde.simulate_semilinear_dirichlet(model, a.t, a.n_modes, a.n_time_steps,
                                                       _seed(a))
        field = spde.evaluate_field(state, a.a, a.b, a.n_points)
    _emit_csv(field.values, a.out, a.out_dir, "field.csv")


def cmd_estimate(a):
    obs = read_csv(a.infile)
    M = select_M(a.s_star) if a.auto_M else a.M
    inp = EstimationInput(obs, a.q, M, a.s_star, parse_known(a.known), parse_geometry(a.geometry))
    sys.stdout.write(jsonio.dumps(estimate(inp).to_dict()))


_MC_KEYS = ("theta", "sigma", "alpha", "gamma", "nonlinearity", "domain", "t_obs", "window_a",
            "window_b", "resolutions", "q", "M", "n_replications", "n_modes", "n_time_steps")


def cmd_mc_experiment(a):
    cfg = experiment.load_config(a.config) if a.config else experiment.ExperimentConfig()
    changes = {key: getattr(a, key) for key in _MC_KEYS}
    if changes["M"] is not None and changes["M"] != "auto":
        try:
            changes["M"] = int(changes["M"])
        except ValueError as exc:
            raise InvalidParameterError("--M must be an integer or 'auto'") from exc
    changes["seed_base"] = a.seed
    changes["output_dir"] = a.out_dir
    cfg = cfg.replace(**changes)
    failure = None
    try:
        result = experiment.run_mc_experiment(cfg, threads=a.threads)
    except ExperimentFailedError as exc:
        failure = exc
        result = None
    if result is not None:
        if (a.plot or a.svg) and cfg.output_dir:
            for summ in result.summaries.values():
                experiment.emit_plot_data(summ, cfg.output_dir, svg=a.svg)
        sys.stdout.write(jsonio.dumps(result.to_dict()["summaries"]))
    if failure is not None:
        raise failure


def cmd_clt_check(a):
    rep = experiment.run_clt_check(a.m, a.H, a.M, a.q, a.N, a.reps, _seed(a), a.threads)
    d = rep.to_dict()
    if a.out_dir:
        os.makedirs(a.out_dir, exist_ok=True)
        jsonio.dump(d, os.path.join(a.out_dir, "clt_check.json"))
    sys.stdout.write(jsonio.dumps(d))


COMMANDS = {
    "constants": cmd_constants,
    "simulate-fbm": cmd_simulate_fbm,
    "simulate-spde": cmd_simulate_spde,
    "estimate": cmd_estimate,
    "mc-experiment": cmd_mc_experiment,
    "clt-check": cmd_clt_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ExperimentFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT
    except (InvalidParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

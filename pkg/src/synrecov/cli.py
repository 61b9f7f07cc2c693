"""Command-line entry point ``synrecov``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .io import OutputError, emit_csv, emit_svg_plot
from .model import EXTENDED, SPECIES, ParamsError, load_params
from .ode import IntegrationConfig, IntegrationError, analyze, integrate, integrate_with_sensitivities
from .ssa import run_ensemble, simulate_site, total_current_sample
from .steady_state import FrozenRates, SteadyStateError, steady_state_closed_form, steady_state_derivatives

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _u64(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(cast):
    def conv(s):
        v = cast(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v

    return conv


def _factors(s):
    if "," in s:
        vals = [float(x) for x in s.split(",") if x.strip()]
        if any(not v > 0 for v in vals):
            raise argparse.ArgumentTypeError("factors must be positive")
        return vals
    n = int(s)
    if n < 2:
        raise argparse.ArgumentTypeError("need at least two factors")
    return list(ex.default_factors(n))


def _add_ode_opts(sp):
    sp.add_argument("--t-end", type=_positive(float), default=1.0, help="horizon [s]")
    sp.add_argument("--output-dt", type=_positive(float), default=1e-4, help="grid spacing [s]")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Subcommand copies must not overwrite global flags given before the subcommand.
    def d(v):
        return argparse.SUPPRESS if suppress else v

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", type=Path, default=d(None),
                        help="parameter JSON (default: bundled paper_default.json)")
    common.add_argument("--out", type=Path, default=d(Path(".")), help="output directory")
    common.add_argument("--seed", type=_u64, default=d(None),
                        help="u64 seed; required by stochastic subcommands")
    common.add_argument("--threads", type=_positive(int), default=d(None),
                        help="worker cap (overrides SYNRECOV_THREADS)")
    common.add_argument("--svg", action="store_true", default=d(False),
                        help="also write an SVG line plot")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=False)
    local = _common(suppress=True)

    ap = argparse.ArgumentParser(prog="synrecov", parents=[common],
                                 description="Vesicle and release-site recovery model.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("steady-state", parents=[local],
                        help="steady state and its recovery-rate derivatives")
    sp.add_argument("--t", type=float, default=0.0, help="freeze the rates at this time [s]")

    sp = sub.add_parser("simulate-ode", parents=[local], help="deterministic trajectory and current")
    _add_ode_opts(sp)
    sp.add_argument("--rtol", type=_positive(float), default=1e-8)
    sp.add_argument("--atol", type=_positive(float), default=1e-10)
    sp.add_argument("--max-step", type=_positive(float), default=1e-3)
    sp.add_argument("--max-steps", type=_positive(int), default=50_000_000,
                    help="integrator step budget")
    sp.add_argument("--sensitivities", action="store_true",
                    help="add sensitivity columns and the dominance label")

    sp = sub.add_parser("simulate-ssa", parents=[local], help="one stochastic single-site trajectory")
    _add_ode_opts(sp)

    sp = sub.add_parser("ensemble", parents=[local], help="Monte Carlo moments over independent runs")
    _add_ode_opts(sp)
    sp.add_argument("--runs", type=_positive(int), default=10_000)

    sp = sub.add_parser("total-current", parents=[local], help="scaled total current of N sites")
    _add_ode_opts(sp)
    sp.add_argument("--N", type=_positive(int), required=True, help="number of sites")

    sp = sub.add_parser("sweep", parents=[local], help="sensitivity sweep of one recovery/priming rate")
    sp.add_argument("--param", choices=ex.SWEEP_PARAMS, required=True)
    sp.add_argument("--factors", type=_factors, default=list(ex.default_factors(9)),
                    help="count of log-spaced factors in [1/20, 20], or a comma list")
    _add_ode_opts(sp)

    sp = sub.add_parser("reduced", parents=[local], help="reduced binding systems I and II")
    sp.add_argument("--figure", type=int, choices=[9], default=9)
    sp.add_argument("--runs", type=_positive(int), default=200_000)
    sp.add_argument("--t-end", type=_positive(float), default=2.0)
    sp.add_argument("--points", type=_positive(int), default=201)

    sp = sub.add_parser("calibrate", parents=[local], help="fit k_R and kU_max to a paired-pulse ratio")
    sp.add_argument("--target", type=_positive(float), default=ex.DEFAULT_TARGET_RATIO)
    sp.add_argument("--max-iter", type=_positive(int), default=200)
    sp.add_argument("--k-R-bounds", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    sp.add_argument("--kU-max-bounds", type=float, nargs=2, metavar=("LO", "HI"), default=None)

    sub.add_parser("validate-params", parents=[local], help="check a parameter file")
    return ap


def _need_seed(args):
    if args.seed is None:
        raise ConfigError(f"{args.command} is stochastic and requires --seed")
    return args.seed


def _grid(t_end, dt):
    n = int(round(t_end / dt))
    if n < 1:
        raise ConfigError("output-dt must not exceed t-end")
    return np.arange(n + 1) * dt


def _svg(args, name, series, labels, ylabel):
    if args.svg:
        emit_svg_plot(series, labels, args.out / name, ylabel=ylabel)


def cmd_steady_state(p, args):
    fr = FrozenRates.at(p, args.t)
    x = steady_state_closed_form(fr)
    dV, dP = steady_state_derivatives(fr)
    emit_csv(["species", "value", "d_dgV", "d_dgP"], [list(SPECIES), x, dV, dP],
             args.out / "steady_state.csv")


def cmd_simulate_ode(p, args):
    cfg = IntegrationConfig(args.t_end, args.output_dt, args.rtol, args.atol, args.max_step,
                            args.max_steps)
    if args.sensitivities:
        tr = integrate_with_sensitivities(p, cfg)
        an = analyze(tr)
        header = ["t", *EXTENDED, "dFdt", "C"]
        cols = [tr.t, *tr.y.T, tr.dFdt, an.C]
        header += [f"Z_gV_{s}" for s in EXTENDED] + [f"Z_gP_{s}" for s in EXTENDED]
        cols += [*tr.Z_gV.T, *tr.Z_gP.T]
        header += ["z_gV_C", "z_gP_C", "dominance"]
        cols += [an.z_gV, an.z_gP, an.dominance]
        C = an.C
    else:
        tr = integrate(p, cfg)
        C = tr.current()
        header = ["t", *EXTENDED, "dFdt", "C"]
        cols = [tr.t, *tr.y.T, tr.dFdt, C]
    emit_csv(header, cols, args.out / "ode.csv")
    _svg(args, "ode_current.svg", [(tr.t, C)], ["C"], "current")


def cmd_simulate_ssa(p, args):
    seed = _need_seed(args)
    tr = simulate_site(p, args.t_end, seed)
    emit_csv(["t", "reaction_id"], [tr.event_times, tr.reaction_names], args.out / "events.csv")
    grid = _grid(args.t_end, args.output_dt)
    x = tr.sample(grid)
    emit_csv(["t", *EXTENDED], [grid, *x.T], args.out / "states.csv")
    _svg(args, "ssa_states.svg", [(grid, x[:, i]) for i in (3, 4)], ["R", "P"], "count")


def cmd_ensemble(p, args):
    if args.runs < 2:
        raise ConfigError("--runs must be at least 2")
    st = run_ensemble(p, args.t_end, args.runs, _need_seed(args), _grid(args.t_end, args.output_dt),
                      threads=args.threads, keep_times=False)
    header = ["t", *[f"mean_{s}" for s in EXTENDED], *[f"std_{s}" for s in EXTENDED],
              "cov_VP", "mean_C", "sem_C", "std_C", "corr_VP"]
    cols = [st.t, *st.mean.T, *st.std.T, st.cov, st.mean_C, st.std_C / np.sqrt(st.n_runs),
            st.std_C, st.corr]
    emit_csv(header, cols, args.out / "ensemble.csv")
    _svg(args, "ensemble_current.svg", [(st.t, st.mean_C)], ["mean C"], "current")


def cmd_total_current(p, args):
    grid = _grid(args.t_end, args.output_dt)
    c = total_current_sample(p, args.t_end, args.N, _need_seed(args), grid, threads=args.threads)
    emit_csv(["t", "C_total_over_N"], [grid, c], args.out / "total_current.csv")
    _svg(args, "total_current.svg", [(grid, c)], [f"N = {args.N}"], "current / N")


def cmd_sweep(p, args):
    spec = ex.SweepSpec(args.param, tuple(args.factors), p)
    cfg = IntegrationConfig(t_end=args.t_end, output_dt=args.output_dt)
    legs = ex.run_sweep(spec, cfg, threads=args.threads or 1)
    cols = [[], [], [], [], []]
    failed = []
    for leg in legs:
        if leg.analysis is None:
            failed.append(f"factor {leg.factor!r}: {leg.error}")
            continue
        a = leg.analysis
        n = len(a.t)
        cols[0].extend([leg.factor] * n)
        cols[1].extend(a.t.tolist())
        cols[2].extend(_column_list(a.z_gV))
        cols[3].extend(_column_list(a.z_gP))
        cols[4].extend(a.dominance.tolist())
    emit_csv(["factor", "t", "z_gV_C", "z_gP_C", "dominance"], cols,
             args.out / f"sweep_{args.param}.csv")
    for msg in failed:
        print(f"sweep leg failed: {msg}", file=sys.stderr)
    if failed:
        return EXIT_NUMERIC
    return EXIT_OK


def _column_list(m):
    m = np.ma.asarray(m)
    return [None if k else v for v, k in zip(m.data.tolist(), np.ma.getmaskarray(m).tolist())]


def cmd_reduced(p, args):
    grid = np.linspace(0.0, args.t_end, args.points)
    r = ex.reduced_ssa_correlation(ex.FIG9_I, ex.FIG9_II, args.runs, grid, _need_seed(args),
                                   args.threads)
    emit_csv(["t", "rel_err_A_I", "rel_err_A_II", "corr_I", "corr_II", "rel_err_B_I", "rel_err_B_II"],
             [grid, r.rel_err_A_I, r.rel_err_A_II, r.corr_I, r.corr_II, r.rel_err_B_I,
              r.rel_err_B_II], args.out / "reduced_fig9.csv")
    _svg(args, "reduced_corr.svg", [(grid, r.corr_I), (grid, r.corr_II)], ["I", "II"], "corr(A, B)")


def cmd_calibrate(p, args):
    bounds = {}
    for name, b in (("k_R", args.k_R_bounds), ("kU_max", args.kU_max_bounds)):
        if b is not None:
            if not 0 < b[0] <= b[1]:
                raise ConfigError(f"invalid bounds for {name}")
            bounds[name] = tuple(b)
    full = None
    if bounds:
        full = {"k_R": (p.k_R / 20, p.k_R * 20),
                "kU_max": (p.kU_shape.kU_max / 20, p.kU_shape.kU_max * 20), **bounds}
    res = ex.calibrate(p, args.target, bounds=full, max_iter=args.max_iter)
    path = args.out / "calibrated_params.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(res.params.to_dict(), indent=2) + "\n")
    except OSError as e:
        raise OutputError(path, e) from e
    print(json.dumps({"loss": res.loss, "converged": res.converged, "iterations": res.iterations,
                      "k_R": res.params.k_R, "kU_max": res.params.kU_shape.kU_max}))


def cmd_validate(p, args):
    print(f"ok: {args.params or 'paper_default.json'}")


COMMANDS = {
    "steady-state": cmd_steady_state,
    "simulate-ode": cmd_simulate_ode,
    "simulate-ssa": cmd_simulate_ssa,
    "ensemble": cmd_ensemble,
    "total-current": cmd_total_current,
    "sweep": cmd_sweep,
    "reduced": cmd_reduced,
    "calibrate": cmd_calibrate,
    "validate-params": cmd_validate,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        try:
            p = load_params(args.params)
        except FileNotFoundError as e:
            raise ConfigError(f"parameter file not found: {args.params}") from e
        rc = COMMANDS[args.command](p, args)
        return EXIT_OK if rc is None else rc
    except ParamsError as e:
        for msg in e.problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, SteadyStateError, ex.PeakDetectionError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo ensemble against the deterministic current, V/P correlation and total-current convergence."""
import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from synrecov.io import emit_csv, emit_svg_plot
from synrecov.model import load_params
from synrecov.ode import IntegrationConfig, integrate
from synrecov.ssa import run_ensemble, total_current_sample


@dataclass
class Config:
    params: Path | None = None
    out: Path = Path("results/stochastic")
    runs: int = 10_000
    seed: int = 2024
    total_seed: int = 99
    sizes: tuple = (10, 100, 1000)
    threads: int | None = None


def main(cfg: Config):
    p = load_params(cfg.params)
    ode = integrate(p, IntegrationConfig())
    C = ode.current()
    st = run_ensemble(p, 1.0, cfg.runs, cfg.seed, ode.t, threads=cfg.threads, keep_times=False)
    band = 3 * st.std_C / np.sqrt(st.n_runs)
    emit_csv(["t", "C_ode", "mean_C", "band", "corr_VP"], [st.t, C, st.mean_C, band, st.corr],
             cfg.out / "ensemble_vs_ode.csv")
    emit_svg_plot([(st.t, C), (st.t, st.mean_C)], ["ODE", "ensemble mean"],
                  cfg.out / "ensemble_vs_ode.svg", ylabel="current")
    emit_svg_plot([(st.t, st.corr)], ["corr(V, P)"], cfg.out / "correlation.svg",
                  ylabel="correlation")
    print(f"inside band: {(np.abs(st.mean_C - C) <= band).mean():.2%}")

    dist = []
    for N in cfg.sizes:
        c = total_current_sample(p, 1.0, N, cfg.total_seed, st.t, threads=cfg.threads)
        dist.append(np.max(np.abs(c - st.mean_C)))
        emit_csv(["t", "C_total_over_N"], [st.t, c], cfg.out / f"total_current_N{N}.csv")
    slope = np.polyfit(np.log(cfg.sizes), np.log(dist), 1)[0]
    emit_csv(["N", "sup_distance"], [list(cfg.sizes), dist], cfg.out / "total_current_distance.csv")
    print(f"log-log slope of the total-current distance: {slope:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params", type=Path)
    ap.add_argument("--out", type=Path, default=Config.out)
    ap.add_argument("--runs", type=int, default=Config.runs)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--total-seed", type=int, default=Config.total_seed)
    ap.add_argument("--sizes", type=int, nargs="+", default=list(Config.sizes))
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    args.sizes = tuple(args.sizes)
    main(Config(**vars(args)))

"""Dominance maps of the k_R, g_V and g_P sweeps over factors 1/20 to 20."""
import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from synrecov.experiments import SWEEP_PARAMS, SweepSpec, default_factors, dominance_at, onset_time, run_sweep
from synrecov.io import emit_csv
from synrecov.model import load_params
from synrecov.ode import IntegrationConfig


@dataclass
class Config:
    params: Path | None = None
    out: Path = Path("results/sweeps")
    n_factors: int = 9
    threads: int = 1


def main(cfg: Config):
    p = load_params(cfg.params)
    t_on = onset_time(p)
    for name in SWEEP_PARAMS:
        legs = run_sweep(SweepSpec(name, tuple(default_factors(cfg.n_factors)), p),
                         IntegrationConfig(), threads=cfg.threads)
        rows = [[], [], [], []]
        for leg in legs:
            d = leg.analysis.dominance
            rows[0].append(leg.factor)
            rows[1].append(float(np.mean(d == "SITE_LIMITED")))
            rows[2].append(float(np.mean(d == "VESICLE_LIMITED")))
            rows[3].append(dominance_at(leg.analysis, t_on))
        emit_csv(["factor", "frac_site", "frac_vesicle", "at_onset"], rows,
                 cfg.out / f"dominance_{name}.csv")
        print(name, dict(zip(np.round(rows[0], 3).tolist(), rows[3])))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params", type=Path)
    ap.add_argument("--out", type=Path, default=Config.out)
    ap.add_argument("--n-factors", type=int, default=Config.n_factors)
    ap.add_argument("--threads", type=int, default=Config.threads)
    main(Config(**vars(ap.parse_args())))

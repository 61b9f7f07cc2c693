"""Fit k_R and kU_max to a paired-pulse ratio and report the fitted parameters."""
import argparse
import json
from dataclasses import dataclass
from pathlib import Path

from synrecov.experiments import DEFAULT_TARGET_RATIO, calibrate, paired_pulse_ratio
from synrecov.model import load_params


@dataclass
class Config:
    params: Path | None = None
    out: Path = Path("results/calibration")
    target: float = DEFAULT_TARGET_RATIO
    start_k_R: float = 20.0
    start_kU_max: float = 150.0


def main(cfg: Config):
    p = load_params(cfg.params).replace(k_R=cfg.start_k_R, kU_max=cfg.start_kU_max)
    print(f"start ratio {paired_pulse_ratio(p):.6f}, target {cfg.target:.6f}")
    res = calibrate(p, cfg.target, bounds={"k_R": (1.0, 100.0), "kU_max": (10.0, 3000.0)})
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "calibrated_params.json").write_text(json.dumps(res.params.to_dict(), indent=2) + "\n")
    print(f"loss {res.loss:.2e} after {res.iterations} iterations: "
          f"k_R = {res.params.k_R:.4g}, kU_max = {res.params.kU_shape.kU_max:.4g}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params", type=Path)
    ap.add_argument("--out", type=Path, default=Config.out)
    ap.add_argument("--target", type=float, default=Config.target)
    ap.add_argument("--start-k-R", type=float, default=Config.start_k_R)
    ap.add_argument("--start-kU-max", type=float, default=Config.start_kU_max)
    main(Config(**vars(ap.parse_args())))

"""Parameter sweeps, paired-pulse calibration and the reduced binding systems."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .model import ModelParams
from .ode import (Dominance, IntegrationConfig, IntegrationError, SensitivityAnalysis, integrate,
                  sensitivity_run)
from .ssa import CONST, ReactionNetwork, run_network_ensemble

SWEEP_PARAMS = ("k_R", "g_V", "g_P")

# Paired-pulse ratio of the reference model used as the calibration target.
# Externally sourced (the reference model is not part of this package); the
# value is the ratio this model reproduces at the shipped calibrated parameters.
DEFAULT_TARGET_RATIO = 0.3101744233825214

PROMINENCE = 0.05


def default_factors(n: int = 9) -> np.ndarray:
    """``n`` log-spaced multipliers from 1/20 to 20; for odd ``n`` the middle one is exactly 1."""
    if n < 2:
        raise ValueError("need at least two factors")
    return 20.0 ** np.linspace(-1.0, 1.0, n)


@dataclass(frozen=True)
class SweepSpec:
    parameter_name: str
    factors: tuple
    base: ModelParams

    def __post_init__(self):
        if self.parameter_name not in SWEEP_PARAMS:
            raise ValueError(f"parameter_name must be one of {SWEEP_PARAMS}")
        object.__setattr__(self, "factors", tuple(float(f) for f in self.factors))
        if not self.factors or any(not f > 0 for f in self.factors):
            raise ValueError("factors must be positive")


@dataclass
class SweepLeg:
    factor: float
    params: ModelParams
    analysis: SensitivityAnalysis | None
    error: Exception | None = None


def _leg(spec, cfg, f):
    q = spec.base.scaled(spec.parameter_name, f)
    try:
        return SweepLeg(f, q, sensitivity_run(q, cfg))
    except IntegrationError as e:
        return SweepLeg(f, q, None, e)


def run_sweep(spec: SweepSpec, cfg: IntegrationConfig = IntegrationConfig(),
              threads: int = 1) -> list[SweepLeg]:
    """Sensitivity run for every factor; a failing leg records its error instead of aborting."""
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda f: _leg(spec, cfg, f), spec.factors))
    return [_leg(spec, cfg, f) for f in spec.factors]


def onset_time(p: ModelParams) -> float:
    """Arrival of the first evoked response: first stimulus plus the kernel onset delay."""
    return p.kF_shape.stim_times[0] + p.impulse_kernel.t0


def dominance_at(a: SensitivityAnalysis, t: float) -> str:
    i = int(np.argmin(np.abs(a.t - t)))
    return a.dominance[i]


# ---------------------------------------------------------------------------
# paired-pulse calibration


class PeakDetectionError(ValueError):
    pass


def find_peaks(t, f, stim_times, prominence: float = PROMINENCE) -> list[tuple[float, float]]:
    """Flux peaks, one per stimulus window.

    A window spans the midpoints to the neighbouring stimuli. It contributes a
    peak when its maximum is an interior local maximum that exceeds the
    window minimum by ``prominence`` times the maximum. The peak is refined by
    a parabola through the three samples around it.
    """
    t = np.asarray(t, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    st = np.asarray(stim_times, dtype=np.float64)
    if len(st) == 0:
        return []
    half = 0.5 * np.diff(st).min() if len(st) > 1 else 0.5 * (t[-1] - t[0])
    lo_edges = np.concatenate([[st[0] - half], 0.5 * (st[1:] + st[:-1])])
    hi_edges = np.concatenate([0.5 * (st[1:] + st[:-1]), [st[-1] + half]])
    peaks = []
    for lo, hi in zip(lo_edges, hi_edges):
        idx = np.flatnonzero((t >= lo) & (t < hi))
        if len(idx) < 3:
            continue
        w = f[idx]
        k = int(np.argmax(w))
        if k == 0 or k == len(w) - 1:
            continue
        if w[k] <= 0 or w[k] - w.min() < prominence * w[k]:
            continue
        i = idx[k]
        y0, y1, y2 = f[i - 1], f[i], f[i + 1]
        den = y0 - 2.0 * y1 + y2
        d = 0.5 * (y0 - y2) / den if den < 0 else 0.0
        dt = t[i + 1] - t[i]
        peaks.append((t[i] + d * dt, y1 - 0.25 * (y0 - y2) * d))
    return peaks


def paired_pulse_ratio(p: ModelParams, cfg: IntegrationConfig | None = None,
                       prominence: float = PROMINENCE) -> float:
    """Ratio of the second to the first fusion-flux peak."""
    st = p.kF_shape.stim_times
    if len(st) < 2:
        raise PeakDetectionError("need at least two stimuli")
    if cfg is None:
        t_end = st[2] if len(st) > 2 else st[1] + (st[1] - st[0])
        cfg = IntegrationConfig(t_end=float(t_end), output_dt=1e-5, max_step=1e-3)
    tr = integrate(p, cfg)
    pk = find_peaks(tr.t, tr.dFdt, st, prominence)
    if len(pk) < 2:
        raise PeakDetectionError(f"found {len(pk)} flux peak(s), need 2")
    return pk[1][1] / pk[0][1]


def paired_pulse_loss(p: ModelParams, target_ratio: float = DEFAULT_TARGET_RATIO,
                      cfg: IntegrationConfig | None = None) -> float:
    return abs(paired_pulse_ratio(p, cfg) - target_ratio)


@dataclass
class CalibrationResult:
    params: ModelParams
    loss: float
    converged: bool
    iterations: int
    message: str = ""
    history: list = field(default_factory=list, repr=False)


def calibrate(p0: ModelParams, target_ratio: float = DEFAULT_TARGET_RATIO,
              free=("k_R", "kU_max"), bounds=None, max_iter: int = 200,
              xatol: float = 1e-6, fatol: float = 1e-10) -> CalibrationResult:
    """Nelder-Mead fit of the free parameters to the paired-pulse target.

    ``bounds`` maps parameter names to ``(lo, hi)``; the default allows a
    factor of 20 either way. Candidates outside the box are clamped. The
    search runs on values relative to ``p0``.
    """
    x0 = np.array([_get(p0, n) for n in free], dtype=np.float64)
    if bounds is None:
        bounds = {n: (v / 20.0, v * 20.0) for n, v in zip(free, x0)}
    lo = np.array([bounds[n][0] for n in free]) / x0
    hi = np.array([bounds[n][1] for n in free]) / x0
    if np.any(lo > hi):
        raise ValueError("empty bound interval")
    start = np.clip(np.ones(len(free)), lo, hi)
    history = []

    def build(u):
        u = np.clip(u, lo, hi)
        return p0.replace(**{n: float(v) for n, v in zip(free, u * x0)})

    def f(u):
        try:
            val = paired_pulse_loss(build(u), target_ratio)
        except (PeakDetectionError, IntegrationError):
            val = np.inf
        history.append((tuple(np.clip(u, lo, hi) * x0), val))
        return val

    res = minimize(f, start, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                   options={"maxiter": max_iter, "xatol": xatol, "fatol": fatol})
    if not res.success:
        warnings.warn(f"calibration did not converge: {res.message}", RuntimeWarning)
    return CalibrationResult(build(res.x), float(res.fun), bool(res.success), int(res.nit),
                             str(res.message), history)


def _get(p, name):
    if hasattr(p, name):
        return getattr(p, name)
    for sub in (p.kF_shape, p.kU_shape):
        if hasattr(sub, name):
            return getattr(sub, name)
    raise KeyError(name)


# ---------------------------------------------------------------------------
# reduced systems


@dataclass(frozen=True)
class ReducedParams:
    """System I: ``A + B -> W`` at ``alpha``, ``W -> A + B`` at ``beta``.

    System II: ``A + B -> W_A + W_B`` at ``alpha``, ``W_A -> A`` at ``g_A``,
    ``W_B -> B`` at ``g_B``.
    """

    system: str
    alpha: float
    beta: float = 0.0
    g_A: float = 0.0
    g_B: float = 0.0
    A0: int = 0
    B0: int = 0
    W0: int = 0
    WA0: int = 0
    WB0: int = 0

    def __post_init__(self):
        if self.system not in ("I", "II"):
            raise ValueError("system must be 'I' or 'II'")
        rates = (self.alpha, self.beta) if self.system == "I" else (self.alpha, self.g_A, self.g_B)
        if any(not r > 0 for r in rates):
            raise ValueError("rates must be positive")
        if min(self.A0, self.B0, self.W0, self.WA0, self.WB0) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def species(self):
        return ("A", "B", "W") if self.system == "I" else ("A", "B", "W_A", "W_B")

    @property
    def x0(self):
        if self.system == "I":
            return np.array([self.A0, self.B0, self.W0], dtype=np.int64)
        return np.array([self.A0, self.B0, self.WA0, self.WB0], dtype=np.int64)

    def network(self) -> ReactionNetwork:
        if self.system == "I":
            return ReactionNetwork.build(self.species, [
                ("BIND", ("A", "B"), ("W",), CONST, self.alpha),
                ("UNBIND", ("W",), ("A", "B"), CONST, self.beta),
            ])
        return ReactionNetwork.build(self.species, [
            ("BIND", ("A", "B"), ("W_A", "W_B"), CONST, self.alpha),
            ("RETURN_A", ("W_A",), ("A",), CONST, self.g_A),
            ("RETURN_B", ("W_B",), ("B",), CONST, self.g_B),
        ])

    def rhs(self, t, y):
        if self.system == "I":
            A, B, W = y
            r = -self.alpha * A * B + self.beta * W
            return [r, r, -r]
        A, B, WA, WB = y
        bind = self.alpha * A * B
        return [-bind + self.g_A * WA, -bind + self.g_B * WB, bind - self.g_A * WA,
                bind - self.g_B * WB]


FIG9_I = ReducedParams("I", alpha=5.0, beta=5.0, A0=2, B0=1)
FIG9_II = ReducedParams("II", alpha=5.0, g_A=5.0, g_B=5.0, A0=2, B0=1)


@dataclass
class ReducedTrajectory:
    t: np.ndarray
    y: np.ndarray
    species: tuple

    def __getitem__(self, name):
        return self.y[:, self.species.index(name)]


def reduced_ode(rp: ReducedParams, t_end: float, grid=None, rtol: float = 1e-12,
                atol: float = 1e-14) -> ReducedTrajectory:
    """Mass-action ODE of a reduced system (8th-order Runge-Kutta, tight tolerances)."""
    grid = np.linspace(0.0, t_end, 201) if grid is None else np.asarray(grid, dtype=np.float64)
    sol = solve_ivp(rp.rhs, (0.0, float(t_end)), rp.x0.astype(np.float64), method="DOP853",
                    t_eval=grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    return ReducedTrajectory(grid, sol.y.T.copy(), rp.species)


def _rel_err(mu, x):
    bad = x <= 0
    return np.ma.masked_array(np.abs(mu - x) / np.where(bad, 1.0, x), mask=bad)


@dataclass
class ReducedComparison:
    t: np.ndarray
    corr_I: np.ma.MaskedArray
    corr_II: np.ma.MaskedArray
    rel_err_A_I: np.ma.MaskedArray
    rel_err_B_I: np.ma.MaskedArray
    rel_err_A_II: np.ma.MaskedArray
    rel_err_B_II: np.ma.MaskedArray


def reduced_ssa_correlation(rp_I: ReducedParams, rp_II: ReducedParams, n_runs: int, grid,
                            seed: int = 0, threads: int | None = None) -> ReducedComparison:
    """corr(A, B) of both reduced systems and the relative error of their means to the ODE."""
    grid = np.asarray(grid, dtype=np.float64)
    t_end = float(grid[-1])
    out = {}
    for tag, rp in (("I", rp_I), ("II", rp_II)):
        st = run_network_ensemble(rp.network(), rp.x0, t_end, n_runs, seed, grid, ("A", "B"),
                                  threads)
        ode_sol = reduced_ode(rp, t_end, grid)
        out[tag] = (st.corr, _rel_err(st["A"], ode_sol["A"]), _rel_err(st["B"], ode_sol["B"]))
    return ReducedComparison(grid, out["I"][0], out["II"][0], out["I"][1], out["I"][2],
                             out["II"][1], out["II"][2])

"""Deterministic trajectories and forward sensitivities of the recovery network.

The extended state ``(V, W_V, W_P, R, P, F)`` is advanced by an explicit
Dormand-Prince 5(4) pair with PI step control and the method's continuous
extension for output on a uniform grid. With sensitivities the system has 18
components (state, dY/dg_V, dY/dg_P) that share one step controller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .model import (
    EXTENDED,
    GAUSS_CUTOFF,
    IR,
    ImpulseKernel,
    ModelParams,
    eval_kF,
    kf_rate,
    ku_rate,
    rre_rhs_kernel,
)
from .signal import convolve_flux, convolve_sensitivity
from .steady_state import FrozenRates, initial_state, steady_state_derivatives

# Current below which normalized sensitivities are reported as undefined.
C_MIN = 1e-12

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B = _A[6].copy()
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension: y(t + s h) = y + h * sum_k K_k * (P[k] . (s, s^2, s^3, s^4))
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

OK, UNDERFLOW, NEGATIVE, TOO_MANY_STEPS = 0, 1, 2, 3


class IntegrationError(RuntimeError):
    """Numerical failure of the integrator at time ``t``."""

    def __init__(self, message, t):
        super().__init__(f"{message} at t = {t!r} s")
        self.t = t


@dataclass(frozen=True)
class IntegrationConfig:
    t_end: float = 1.0
    output_dt: float = 1e-4
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1e-3
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.output_dt <= self.t_end:
            raise ValueError("output_dt must lie in (0, t_end]")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.max_steps >= 1:
            raise ValueError("max_steps must be at least 1")

    def grid(self) -> np.ndarray:
        n = int(round(self.t_end / self.output_dt))
        return np.arange(n + 1) * self.output_dt


@njit(cache=True, nogil=True)
def _deriv(t, y, dy, nsys, rates, kf, stim, amp, ku, fscale):
    kR, gV, gP = rates[0], rates[1], rates[2]
    kF = kf_rate(t, kf, stim, amp)
    kU = ku_rate(t, ku)
    rre_rhs_kernel(y[:6], kR, gV, gP, kF, kU, dy[:6])
    if nsys == 1:
        return
    V = max(y[0], 0.0)
    WV = max(y[1], 0.0)
    WP = max(y[2], 0.0)
    P = max(y[4], 0.0)
    for s in range(2):
        o = 6 + 6 * s
        z0, z1, z2, z3, z4 = y[o], y[o + 1], y[o + 2], y[o + 3], y[o + 4]
        # J(t) z; the F column of J is zero
        d0 = -kR * P * z0 + gV * z1 + kU * z3 - kR * V * z4
        d1 = -gV * z1 + kF * z3
        d2 = -gP * z2 + kF * z3
        d3 = kR * P * z0 - (kF + kU) * z3 + kR * V * z4
        d4 = -kR * P * z0 + gP * z2 + kU * z3 - kR * V * z4
        d5 = kF * z3
        if s == 0:
            d0 += fscale * WV
            d1 -= fscale * WV
        else:
            d2 -= fscale * WP
            d4 += fscale * WP
        dy[o] = d0
        dy[o + 1] = d1
        dy[o + 2] = d2
        dy[o + 3] = d3
        dy[o + 4] = d4
        dy[o + 5] = d5


@njit(cache=True, nogil=True)
def _wnorm(v, y, ynew, rtol, atol):
    acc = 0.0
    n = v.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = v[i] / sc
        acc += r * r
    return math.sqrt(acc / n)


@njit(cache=True, nogil=True)
def _dopri5(y0, grid, bounds, capped, rtol, atol, max_step, spike_step, nsys,
            rates, kf, stim, amp, ku, fscale, out, max_steps):
    """Returns (status, time of failure, accepted steps, rejected steps)."""
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    errv = np.empty(n)
    K = np.empty((7, n))
    ngrid = grid.shape[0]
    out[0, :] = y0
    gi = 1
    nacc = 0
    nrej = 0
    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    for seg in range(bounds.shape[0] - 1):
        t = bounds[seg]
        tend = bounds[seg + 1]
        hmax = spike_step if capped[seg] else max_step
        _deriv(t, y, K[0], nsys, rates, kf, stim, amp, ku, fscale)
        # starting step (Hairer-Wanner heuristic); controller history is reset per segment
        d0 = _wnorm(y, y, y, rtol, atol)
        d1 = _wnorm(K[0], y, y, rtol, atol)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, hmax, tend - t)
        for i in range(n):
            ytmp[i] = y[i] + h0 * K[0, i]
        _deriv(t + h0, ytmp, K[1], nsys, rates, kf, stim, amp, ku, fscale)
        for i in range(n):
            errv[i] = (K[1, i] - K[0, i]) / h0
        d2 = _wnorm(errv, y, y, rtol, atol)
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100.0 * h0, h1, hmax)
        errold = 1e-4
        rejected = False
        while t < tend:
            if nacc + nrej >= max_steps:
                return TOO_MANY_STEPS, t, nacc, nrej
            if h < 16.0 * 2.220446049250313e-16 * max(abs(t), 1e-300):
                return UNDERFLOW, t, nacc, nrej
            last = False
            if t + h >= tend or tend - (t + h) < 1e-12 * h:
                h = tend - t
                last = True
            for st in range(1, 7):
                for i in range(n):
                    acc = 0.0
                    for j in range(st):
                        acc += _A[st, j] * K[j, i]
                    ytmp[i] = y[i] + h * acc
                _deriv(t + _C[st] * h, ytmp, K[st], nsys, rates, kf, stim, amp, ku, fscale)
            # stage 7 is evaluated at the 5th-order solution (FSAL)
            for i in range(n):
                ynew[i] = ytmp[i]
                acc = 0.0
                for j in range(7):
                    acc += _E[j] * K[j, i]
                errv[i] = h * acc
            err = _wnorm(errv, y, ynew, rtol, atol)
            if err <= 1.0:
                tnew = tend if last else t + h
                # dense output onto grid points in (t, tnew]
                while gi < ngrid and grid[gi] <= tnew + 1e-12 * h:
                    s = (grid[gi] - t) / h
                    s2 = s * s
                    for i in range(n):
                        acc = 0.0
                        for j in range(7):
                            if j == 1:
                                continue
                            acc += K[j, i] * (_P[j, 0] * s + _P[j, 1] * s2
                                              + _P[j, 2] * s2 * s + _P[j, 3] * s2 * s2)
                        out[gi, i] = y[i] + h * acc
                    gi += 1
                for i in range(5):
                    if ynew[i] < -atol:
                        return NEGATIVE, tnew, nacc, nrej
                nacc += 1
                fac = 0.9 * err ** (-alpha) * errold ** beta if err > 0 else 10.0
                fac = min(10.0, max(0.2, fac))
                if rejected:
                    fac = min(fac, 1.0)
                errold = max(err, 1e-4)
                rejected = False
                t = tnew
                for i in range(n):
                    y[i] = ynew[i]
                    K[0, i] = K[6, i]
                h = min(h * fac, hmax)
            else:
                nrej += 1
                rejected = True
                h = h * max(0.2, 0.9 * err ** (-alpha))
    return OK, t, nacc, nrej


def _segments(p: ModelParams, t_end: float):
    """Segment boundaries (restart at each stimulus and at each spike-window edge)."""
    stim = np.asarray(p.kF_shape.stim_times, dtype=np.float64)
    w = GAUSS_CUTOFF * p.kF_shape.sigma
    pts = {0.0, float(t_end)}
    for ti in stim:
        for v in (ti - w, ti, ti + w):
            if 0.0 < v < t_end:
                pts.add(float(v))
    bounds = np.array(sorted(pts))
    mids = 0.5 * (bounds[1:] + bounds[:-1])
    capped = np.zeros(len(mids), dtype=np.bool_)
    if len(stim):
        idx = np.searchsorted(stim, mids)
        for k, m in enumerate(mids):
            for j in (idx[k] - 1, idx[k]):
                if 0 <= j < len(stim) and abs(m - stim[j]) <= w:
                    capped[k] = True
    return bounds, capped


@dataclass
class Trajectory:
    """Extended state ``(V, W_V, W_P, R, P, F)`` on a uniform time grid."""

    t: np.ndarray
    y: np.ndarray
    params: ModelParams
    steps: int = 0

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __getattr__(self, name):
        if name in EXTENDED:
            return self.y[:, EXTENDED.index(name)]
        raise AttributeError(name)

    @property
    def kF(self) -> np.ndarray:
        return eval_kF(self.t, self.params)

    @property
    def dFdt(self) -> np.ndarray:
        return self.kF * self.y[:, IR]

    def current(self, kernel: ImpulseKernel | None = None) -> np.ndarray:
        k = self.params.impulse_kernel if kernel is None else kernel
        return convolve_flux(self.dFdt, k, self.dt)


@dataclass
class SensitivityTrajectory(Trajectory):
    Z_gV: np.ndarray = None
    Z_gP: np.ndarray = None

    @property
    def Z_dFdt_gV(self) -> np.ndarray:
        # dF/dt = k_F(t) R and k_F does not depend on g
        return self.kF * self.Z_gV[:, IR]

    @property
    def Z_dFdt_gP(self) -> np.ndarray:
        return self.kF * self.Z_gP[:, IR]


def _run(p, cfg, y0, nsys, fscale=1.0):
    grid = cfg.grid()
    bounds, capped = _segments(p, grid[-1])
    kf, stim, amp = p.kf_arrays
    out = np.empty((len(grid), len(y0)))
    spike_step = min(cfg.max_step, p.kF_shape.sigma / 4.0)
    status, tfail, nacc, _ = _dopri5(
        np.asarray(y0, dtype=np.float64), grid, bounds, capped, cfg.rel_tol, cfg.abs_tol,
        cfg.max_step, spike_step, nsys, p.rates_array, kf, stim, amp, p.ku_array,
        float(fscale), out, int(cfg.max_steps),
    )
    if status == UNDERFLOW:
        raise IntegrationError("step size underflow", tfail)
    if status == NEGATIVE:
        raise IntegrationError("negative state beyond -abs_tol", tfail)
    if status == TOO_MANY_STEPS:
        raise IntegrationError("step limit exceeded", tfail)
    return grid, out, nacc


def integrate(p: ModelParams, cfg: IntegrationConfig = IntegrationConfig(), x0=None) -> Trajectory:
    """Integrate the extended RRE from ``x0`` (default: steady state of the t=0 rates, F=0).

    Raises
    ------
    IntegrationError
        On step-size underflow or a negative excursion beyond ``-abs_tol``.
    """
    y0 = initial_state(p) if x0 is None else np.asarray(x0, dtype=np.float64)
    if y0.shape != (6,):
        raise ValueError("x0 must be an extended state (V, W_V, W_P, R, P, F)")
    t, y, nacc = _run(p, cfg, y0, 1)
    return Trajectory(t, y, p, nacc)


def initial_sensitivities(p: ModelParams):
    dgV, dgP = steady_state_derivatives(FrozenRates.at(p, 0.0))
    return np.append(dgV, 0.0), np.append(dgP, 0.0)


def integrate_with_sensitivities(p: ModelParams, cfg: IntegrationConfig = IntegrationConfig(),
                                 x0=None, z0=None, forcing_scale: float = 1.0) -> SensitivityTrajectory:
    """Integrate state and both recovery-rate sensitivities as one 18-component system.

    ``z0`` overrides the initial sensitivities (pair of 6-vectors);
    ``forcing_scale`` multiplies the inhomogeneous terms (a hook for linearity checks).
    """
    y0 = initial_state(p) if x0 is None else np.asarray(x0, dtype=np.float64)
    zV, zP = initial_sensitivities(p) if z0 is None else (np.asarray(z0[0]), np.asarray(z0[1]))
    t, y, nacc = _run(p, cfg, np.concatenate([y0, zV, zP]), 2, forcing_scale)
    return SensitivityTrajectory(t, y[:, :6], p, nacc, y[:, 6:12], y[:, 12:18])


class Dominance(str, Enum):
    SITE_LIMITED = "SITE_LIMITED"
    VESICLE_LIMITED = "VESICLE_LIMITED"
    UNDEFINED = "UNDEFINED"


def normalize_sensitivity(Z_C, g: float, C, c_min: float = C_MIN):
    """Relative sensitivity ``Z * g / C``; masked where ``|C| < c_min``."""
    Z_C = np.asarray(Z_C, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    bad = np.abs(C) < c_min
    safe = np.where(bad, 1.0, C)
    return np.ma.masked_array(Z_C * g / safe, mask=np.broadcast_to(bad, Z_C.shape).copy())


def dominance_series(z_gV, z_gP) -> np.ndarray:
    """Per-time label: site recovery limits when ``|z_gP| > |z_gV|``; ties and masked values undefined."""
    zv = np.ma.asarray(z_gV)
    zp = np.ma.asarray(z_gP)
    if zv.shape != zp.shape:
        raise ValueError("sensitivity series must be aligned")
    av, ap = np.abs(zv.filled(np.nan)), np.abs(zp.filled(np.nan))
    out = np.full(av.shape, Dominance.UNDEFINED.value, dtype=object)
    with np.errstate(invalid="ignore"):
        out[ap > av] = Dominance.SITE_LIMITED.value
        out[av > ap] = Dominance.VESICLE_LIMITED.value
    return out


@dataclass
class SensitivityAnalysis:
    t: np.ndarray
    C: np.ndarray
    Z_C_gV: np.ndarray
    Z_C_gP: np.ndarray
    z_gV: np.ma.MaskedArray
    z_gP: np.ma.MaskedArray
    dominance: np.ndarray


def analyze(traj: SensitivityTrajectory, kernel: ImpulseKernel | None = None) -> SensitivityAnalysis:
    """Current, its sensitivities, normalized sensitivities and the dominance labels."""
    p = traj.params
    k = p.impulse_kernel if kernel is None else kernel
    C = traj.current(k)
    ZV = convolve_sensitivity(traj.Z_dFdt_gV, k, traj.dt)
    ZP = convolve_sensitivity(traj.Z_dFdt_gP, k, traj.dt)
    zV = normalize_sensitivity(ZV, p.g_V, C)
    zP = normalize_sensitivity(ZP, p.g_P, C)
    return SensitivityAnalysis(traj.t, C, ZV, ZP, zV, zP, dominance_series(zV, zP))


def sensitivity_run(p: ModelParams, cfg: IntegrationConfig = IntegrationConfig()) -> SensitivityAnalysis:
    return analyze(integrate_with_sensitivities(p, cfg))


"""Impulse-response kernel and the maps from fusion activity to postsynaptic current."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.optimize import brentq, minimize_scalar

from .model import ImpulseKernel, ModelParams
from .steady_state import averaged_fixed_point, averaged_rates

# The kernel is truncated where it falls below this fraction of its peak.
TRUNCATION = 1e-8


@njit(cache=True, nogil=True)
def kernel_value(s, t0, A, B, tau_r, tau_df, tau_ds):
    if s <= t0:
        return 0.0
    u = s - t0
    rise = -math.expm1(-u / tau_r)
    return A * rise * (B * math.exp(-u / tau_df) + (1.0 - B) * math.exp(-u / tau_ds))


def _kargs(k: ImpulseKernel):
    return (k.t0, k.A, k.B, k.tau_r, k.tau_df, k.tau_ds)


def eval_kernel(t, k: ImpulseKernel):
    """Impulse response g(t); zero for ``t <= t0``."""
    t = np.asarray(t, dtype=np.float64)
    u = np.maximum(t - k.t0, 0.0)
    rise = -np.expm1(-u / k.tau_r)
    val = k.A * rise * (k.B * np.exp(-u / k.tau_df) + (1.0 - k.B) * np.exp(-u / k.tau_ds))
    val = np.where(t > k.t0, val, 0.0)
    return val if val.ndim else float(val)


def kernel_integral(k: ImpulseKernel) -> float:
    """Closed form of the integral of g over the whole line."""

    def part(tau):
        return tau - 1.0 / (1.0 / k.tau_r + 1.0 / tau)

    return k.A * (k.B * part(k.tau_df) + (1.0 - k.B) * part(k.tau_ds))


@lru_cache(maxsize=64)
def kernel_peak(k: ImpulseKernel) -> tuple[float, float]:
    """``(time, value)`` of the kernel maximum."""
    span = 50.0 * max(k.tau_df, k.tau_ds)
    s = np.linspace(k.t0, k.t0 + span, 20001)
    g = eval_kernel(s, k)
    i = int(np.argmax(g))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    res = minimize_scalar(lambda x: -eval_kernel(x, k), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    return float(res.x), float(-res.fun)


@lru_cache(maxsize=64)
def kernel_support(k: ImpulseKernel, rel: float = TRUNCATION) -> float:
    """Time after which |g| stays below ``rel`` times its peak."""
    tp, gp = kernel_peak(k)
    target = rel * gp
    hi = tp + max(k.tau_df, k.tau_ds)
    while eval_kernel(hi, k) > target:
        hi = tp + 2.0 * (hi - tp)
    return float(brentq(lambda x: eval_kernel(x, k) - target, tp, hi, xtol=1e-15))


def _check_uniform(t, dt):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError("time grid must be one-dimensional")
    if len(t) > 1:
        d = np.diff(t)
        if dt is None:
            dt = float(d[0])
        if not np.allclose(d, dt, rtol=1e-9, atol=1e-15):
            raise ValueError("time grid must be uniform")
    return dt


def kernel_samples(k: ImpulseKernel, dt: float) -> np.ndarray:
    n = int(math.ceil(kernel_support(k) / dt)) + 1
    return eval_kernel(np.arange(n) * dt, k)


def convolve_flux(dFdt, k: ImpulseKernel, grid_dt: float, t=None) -> np.ndarray:
    """Causal trapezoid convolution of a flux sampled on a uniform grid starting at 0.

    The flux is taken as zero before the first sample, so the first sample
    carries half weight.
    """
    if t is not None:
        grid_dt = _check_uniform(t, grid_dt)
    if not grid_dt > 0:
        raise ValueError("grid_dt must be positive")
    f = np.asarray(dFdt, dtype=np.float64)
    n = len(f)
    if n == 0:
        return f.copy()
    kv = kernel_samples(k, grid_dt)
    out = np.convolve(f, kv)[:n]
    m = min(n, len(kv))
    out[:m] -= 0.5 * f[0] * kv[:m]
    return grid_dt * out


def convolve_sensitivity(Z_dFdt, k: ImpulseKernel, grid_dt: float, t=None) -> np.ndarray:
    """Sensitivity of the current: the same operator applied to a signed flux sensitivity."""
    return convolve_flux(Z_dFdt, k, grid_dt, t)


@njit(cache=True, nogil=True)
def superpose_events(times, g0, dt, n, support, t0, A, B, tau_r, tau_df, tau_ds, out):
    """Add ``g(t_j - T_i)`` for every event into ``out`` on the grid ``g0 + j*dt``."""
    for i in range(times.shape[0]):
        T = times[i]
        j = int(math.floor((T + t0 - g0) / dt))
        if j < 0:
            j = 0
        jmax = int(math.ceil((T + support - g0) / dt))
        if jmax > n - 1:
            jmax = n - 1
        while j <= jmax:
            out[j] += kernel_value(g0 + j * dt - T, t0, A, B, tau_r, tau_df, tau_ds)
            j += 1


def current_from_events(fusion_times, k: ImpulseKernel, grid) -> np.ndarray:
    """Stochastic current: the kernel superposed at every fusion time, on a uniform grid."""
    grid = np.asarray(grid, dtype=np.float64)
    out = np.zeros(len(grid))
    if len(grid) == 0:
        return out
    dt = _check_uniform(grid, None) if len(grid) > 1 else 1.0
    times = np.asarray(fusion_times, dtype=np.float64)
    superpose_events(times, grid[0], dt, len(grid), kernel_support(k), *_kargs(k), out)
    return out


def fixed_point_current(p: ModelParams, t0: float, T: float, k: ImpulseKernel | None = None) -> float:
    """Current level C0 the asymptotic periodic orbit oscillates around."""
    k = p.impulse_kernel if k is None else k
    kF_bar, _ = averaged_rates(p, t0, T)
    R0 = averaged_fixed_point(p, t0, T)[3]
    return kF_bar * R0 * kernel_integral(k)

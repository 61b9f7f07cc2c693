"""Closed-form steady state of the frozen-rate network and its recovery-rate derivatives."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, eval_kF, eval_kU, kF_integral


class SteadyStateError(ValueError):
    pass


@dataclass(frozen=True)
class FrozenRates:
    k_F: float
    k_U: float
    k_R: float
    g_V: float
    g_P: float
    n_sites: float
    n_ves: float

    @classmethod
    def at(cls, p: ModelParams, t: float) -> "FrozenRates":
        """Rates of ``p`` frozen at time ``t``."""
        return cls(eval_kF(t, p), eval_kU(t, p), p.k_R, p.g_V, p.g_P, p.n_sites, p.n_ves)

    @classmethod
    def from_params(cls, p: ModelParams, k_F: float, k_U: float) -> "FrozenRates":
        return cls(k_F, k_U, p.k_R, p.g_V, p.g_P, p.n_sites, p.n_ves)

    @property
    def alpha(self):
        return 1.0 + self.k_F / self.g_P

    @property
    def beta(self):
        return 1.0 + self.k_F / self.g_V

    @property
    def gamma(self):
        return (self.k_F + self.k_U) / self.k_R

    def check(self):
        if not (self.k_R > 0 and self.g_V > 0 and self.g_P > 0):
            raise SteadyStateError("k_R, g_V and g_P must be positive")
        if self.k_F < 0 or self.k_U < 0:
            raise SteadyStateError("k_F and k_U must be nonnegative")
        if self.n_sites < 0 or self.n_ves < 0:
            raise SteadyStateError("population totals must be nonnegative")
        if not self.gamma > 0:
            raise SteadyStateError(f"gamma = (k_F + k_U)/k_R must be positive, got {self.gamma}")

    def rhs(self, x) -> np.ndarray:
        return _frozen_rhs(self, x)


def _frozen_rhs(fr: FrozenRates, x):
    out = np.empty(5)
    V, WV, WP, R, P = x
    prime = fr.k_R * V * P
    out[0] = -prime + fr.g_V * WV + fr.k_U * R
    out[1] = fr.k_F * R - fr.g_V * WV
    out[2] = fr.k_F * R - fr.g_P * WP
    out[3] = prime - (fr.k_F + fr.k_U) * R
    out[4] = -prime + fr.g_P * WP + fr.k_U * R
    return out


def steady_state_closed_form(fr: FrozenRates) -> np.ndarray:
    """Unique nonnegative root of the frozen-rate RRE as ``(V, W_V, W_P, R, P)``.

    R solves ``R^2 + pR + q = 0``; the admissible root is the smaller one,
    computed as ``q / R_large`` so it stays accurate when ``q << p^2``.
    """
    fr.check()
    a, b, c = fr.alpha, fr.beta, fr.gamma
    ns, nv = float(fr.n_sites), float(fr.n_ves)
    s = b * ns + a * nv + c
    # (2ab)^2 (p^2/4 - q), expanded into a sum of nonnegative terms
    disc = (b * ns - a * nv) ** 2 + 2.0 * c * (b * ns + a * nv) + c * c
    sq = math.sqrt(disc)
    R = 2.0 * nv * ns / (s + sq)
    WV = fr.k_F / fr.g_V * R
    WP = fr.k_F / fr.g_P * R
    # P = ns - aR and V = nv - bR cancel when the species is nearly exhausted;
    # rewrite as ns (u + sq) / (s + sq) with (u + sq)(sq - u) = 4 c a nv
    u = b * ns - a * nv + c
    P = ns * (u + sq if u >= 0 else 4.0 * c * a * nv / (sq - u)) / (s + sq)
    w = a * nv - b * ns + c
    V = nv * (w + sq if w >= 0 else 4.0 * c * b * ns / (sq - w)) / (s + sq)
    return np.array([V, WV, WP, R, P])


def quadratic_roots(fr: FrozenRates):
    """Both roots ``(R_minus, R_plus)`` of the steady-state quadratic (naive formula)."""
    a, b, c = fr.alpha, fr.beta, fr.gamma
    ns, nv = float(fr.n_sites), float(fr.n_ves)
    p = -(nv / b + ns / a + c / (a * b))
    q = nv * ns / (a * b)
    d = p * p / 4.0 - q
    r = math.sqrt(max(d, 0.0))
    return -p / 2.0 - r, -p / 2.0 + r, d


def steady_state_derivatives(fr: FrozenRates):
    """Derivatives of the steady state with respect to g_V and g_P.

    Solves ``J dx + dh/dg = 0`` restricted to the V, W_V, W_P balance rows,
    closed with the two conservation laws (which pin the totals).
    """
    x = steady_state_closed_form(fr)
    J = np.zeros((5, 5))
    V, _, _, _, P = x
    kR, kF, kU = fr.k_R, fr.k_F, fr.k_U
    J[0] = [-kR * P, fr.g_V, 0.0, kU, -kR * V]
    J[1] = [0.0, -fr.g_V, 0.0, kF, 0.0]
    J[2] = [0.0, 0.0, -fr.g_P, kF, 0.0]
    J[3] = [0.0, 0.0, 1.0, 1.0, 1.0]
    J[4] = [1.0, 1.0, 0.0, 1.0, 0.0]
    if fr.n_ves == 0 or fr.n_sites == 0:
        return np.zeros(5), np.zeros(5)
    WV, WP = x[1], x[2]
    dh_dgV = np.array([WV, -WV, 0.0, 0.0, 0.0])
    dh_dgP = np.array([0.0, 0.0, -WP, 0.0, 0.0])
    dgV = np.linalg.solve(J, -dh_dgV)
    dgP = np.linalg.solve(J, -dh_dgP)
    return dgV, dgP


def initial_state(p: ModelParams, t: float = 0.0) -> np.ndarray:
    """Extended state ``(V, W_V, W_P, R, P, F=0)`` at the steady state of the rates frozen at ``t``."""
    return np.append(steady_state_closed_form(FrozenRates.at(p, t)), 0.0)


def averaged_rates(p: ModelParams, t0: float, T: float):
    """Period-averaged fusion rate and the unpriming rate at ``t0``."""
    return kF_integral(t0, t0 + T, p) / T, eval_kU(t0, p)


def averaged_fixed_point(p: ModelParams, t0: float, T: float) -> np.ndarray:
    """Steady state of the right-hand side averaged over one forcing period ``[t0, t0 + T]``."""
    kF_bar, kU_bar = averaged_rates(p, t0, T)
    return steady_state_closed_form(FrozenRates.from_params(p, kF_bar, kU_bar))


def residual(fr: FrozenRates, x) -> float:
    return float(np.max(np.abs(_frozen_rhs(fr, x))))

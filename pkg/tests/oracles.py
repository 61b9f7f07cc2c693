"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical kernels; the oracles rebuild the
quantities from the model definition with different methods (root finding,
quadrature, dense linear algebra, a library integrator).
"""
import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import null_space

# Frozen values (computed by the oracles below at 40-digit precision with mpmath
# where noted, and kept here so regressions surface without recomputation).
GOLDEN_R_HAT = (3.0 - math.sqrt(5.0)) / 2.0  # k_F = 0, k_R = k_U, n_sites = n_ves = 1


def kF_reference(t, p):
    """k_F without Gaussian truncation."""
    s = p.kF_shape
    t = np.asarray(t, dtype=np.float64)
    base = s.m0 / (1.0 + np.exp(-s.m1 * (t - s.m2)))
    st = np.asarray(s.stim_times)[:, None]
    amp = np.asarray(s.amplitudes)[:, None]
    return base + (amp * np.exp(-0.5 * ((t[None, ...] - st) / s.sigma) ** 2)).sum(axis=0)


def kU_reference(t, p):
    u = p.kU_shape
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        return u.kU_max * (1.0 - 1.0 / (1.0 + np.exp(-u.m3 * (t - u.m4)))) + u.kU_min


def rhs_reference(x, kR, gV, gP, kF, kU):
    V, WV, WP, R, P = x
    return np.array([
        -kR * V * P + gV * WV + kU * R,
        kF * R - gV * WV,
        kF * R - gP * WP,
        kR * V * P - (kF + kU) * R,
        -kR * V * P + gP * WP + kU * R,
    ])


def newton_steady_state(kR, gV, gP, kF, kU, ns, nv, x0, tol=1e-15, maxit=100):
    """Newton on the V, W_V, W_P balances closed by both conservation laws."""
    x = np.array(x0, dtype=np.float64)
    for _ in range(maxit):
        V, WV, WP, R, P = x
        f = np.array([
            -kR * V * P + gV * WV + kU * R,
            kF * R - gV * WV,
            kF * R - gP * WP,
            R + P + WP - ns,
            R + V + WV - nv,
        ])
        J = np.array([
            [-kR * P, gV, 0, kU, -kR * V],
            [0, -gV, 0, kF, 0],
            [0, 0, -gP, kF, 0],
            [0, 0, 1, 1, 1],
            [1, 1, 0, 1, 0],
        ], dtype=np.float64)
        dx = np.linalg.solve(J, -f)
        x = x + dx
        if np.max(np.abs(dx)) <= tol * max(1.0, np.max(np.abs(x))):
            break
    return x


def fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, dtype=np.float64)
    f0 = f(x)
    J = np.empty((len(f0), len(x)))
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h * max(1.0, abs(x[j]))
        J[:, j] = (f(x + e) - f(x - e)) / (2 * e[j])
    return J


def kernel_integral_quad(k):
    def g(s):
        if s <= k.t0:
            return 0.0
        u = s - k.t0
        return k.A * (1 - math.exp(-u / k.tau_r)) * (
            k.B * math.exp(-u / k.tau_df) + (1 - k.B) * math.exp(-u / k.tau_ds))

    return quad(g, k.t0, k.t0 + 0.05, limit=200, epsabs=0, epsrel=1e-13)[0] + \
        quad(g, k.t0 + 0.05, np.inf, limit=200)[0]


def kF_integral_quad(a, b, p):
    s = p.kF_shape
    pts = [t for t in s.stim_times if a < t < b]
    f = lambda t: float(kF_reference(np.array([t]), p)[0])  # noqa: E731
    edges = [a] + sorted(set(pts)) + [b]
    return sum(quad(f, lo, hi, limit=200, epsabs=0, epsrel=1e-12)[0]
               for lo, hi in zip(edges[:-1], edges[1:]))


def ode_reference(p, t_grid, x0):
    """Extended RRE with scipy DOP853 at tight tolerances, time-dependent rates untruncated."""
    s = p.kF_shape

    def f(t, y):
        kF = float(kF_reference(np.array([t]), p)[0])
        kU = float(kU_reference(np.array([t]), p)[0])
        d = rhs_reference(y[:5], p.k_R, p.g_V, p.g_P, kF, kU)
        return np.append(d, kF * y[3])

    sol = solve_ivp(f, (t_grid[0], t_grid[-1]), x0, method="DOP853", t_eval=t_grid,
                    rtol=1e-11, atol=1e-13, max_step=s.sigma / 4)
    return sol.y.T


def frozen_states(ns, nv):
    out = []
    for R in range(min(ns, nv) + 1):
        for WP in range(ns - R + 1):
            for WV in range(nv - R + 1):
                out.append((nv - R - WV, WV, WP, R, ns - R - WP))
    return out


def stationary_distribution(kR, gV, gP, kF, kU, ns, nv):
    """Exact stationary law of the constant-rate jump process (generator null space)."""
    states = frozen_states(ns, nv)
    idx = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    moves = [
        ((-1, 0, 0, 1, -1), lambda s: kR * s[0] * s[4]),
        ((1, 0, 0, -1, 1), lambda s: kU * s[3]),
        ((0, 1, 1, -1, 0), lambda s: kF * s[3]),
        ((1, -1, 0, 0, 0), lambda s: gV * s[1]),
        ((0, 0, -1, 0, 1), lambda s: gP * s[2]),
    ]
    for s in states:
        for d, a in moves:
            r = a(s)
            if r > 0:
                t = tuple(int(v) for v in np.add(s, d))
                Q[idx[s], idx[t]] += r
                Q[idx[s], idx[s]] -= r
    pi = null_space(Q.T)[:, 0]
    pi = pi / pi.sum()
    return states, np.clip(pi, 0, None)


def order_statistic_cdf(k, n, rate):
    """CDF of the k-th smallest of n i.i.d. Exp(rate) times (1-based k)."""
    from scipy.stats import beta

    return lambda t: beta.cdf(-np.expm1(-rate * np.asarray(t)), k, n - k + 1)


# mpmath (40 digits): findroot on the steady-state equations, quad for the integrals.
KF_AT_0 = 0.22858670896964138471
KU_AT_0 = 334.0000000102
STEADY_STATE_T0 = (9.5764340344615201121, 0.15403053980046180822, 0.0012322443184036945342,
                   0.26953542573801807964, 0.72923232994357822583)
KERNEL_INTEGRAL = 5.2850143882703908601e-6
KF_INTEGRAL_0_1 = 1057.2338972673752602
KF_AT_FIRST_STIM = 2557.6795011677252513

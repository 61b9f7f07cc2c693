import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import KERNEL_INTEGRAL, kernel_integral_quad
from synrecov.model import ImpulseKernel
from synrecov.signal import (TRUNCATION, convolve_flux, convolve_sensitivity, current_from_events,
                             eval_kernel, fixed_point_current, kernel_integral, kernel_peak,
                             kernel_support)
from synrecov.steady_state import averaged_fixed_point, averaged_rates

K = ImpulseKernel()


def direct_trapezoid(f, k, dt):
    """O(n^2) reference: trapezoid rule over [0, t_j] with f = 0 before the first sample."""
    n = len(f)
    g = eval_kernel(np.arange(n) * dt, k)
    out = np.zeros(n)
    for j in range(n):
        w = np.ones(j + 1)
        w[0] = w[-1] = 0.5
        if j == 0:
            w[:] = 0.5
        out[j] = dt * np.sum(w * f[: j + 1] * g[j::-1])
    return out


def test_kernel_integral_closed_form():
    assert kernel_integral(K) == pytest.approx(KERNEL_INTEGRAL, rel=1e-13)
    assert kernel_integral(K) == pytest.approx(kernel_integral_quad(K), rel=1e-9)


def test_kernel_causal_and_peak():
    assert eval_kernel(K.t0, K) == 0.0
    assert eval_kernel(0.0, K) == 0.0
    tp, gp = kernel_peak(K)
    assert tp > K.t0 and gp > 0
    s = np.linspace(K.t0, K.t0 + 0.05, 50001)
    assert gp >= eval_kernel(s, K).max() * (1 - 1e-12)


def test_support_threshold():
    s = kernel_support(K)
    gp = kernel_peak(K)[1]
    assert eval_kernel(s, K) == pytest.approx(TRUNCATION * gp, rel=1e-6)
    tail = np.linspace(s, s + 0.2, 1000)
    assert np.all(eval_kernel(tail, K) <= TRUNCATION * gp * (1 + 1e-9))


@pytest.mark.parametrize("dt", [1e-4, 3e-4])
def test_convolution_matches_direct_sum(dt, rng):
    f = rng.uniform(0, 1, 400)
    # the package truncates the kernel tail below TRUNCATION * peak
    tail = TRUNCATION * kernel_peak(K)[1] * f.sum() * dt
    np.testing.assert_allclose(convolve_flux(f, K, dt), direct_trapezoid(f, K, dt),
                               rtol=1e-12, atol=tail)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_convolution_linear(a, b):
    r = np.random.default_rng(0)
    f, g = r.uniform(0, 1, 300), r.uniform(-1, 1, 300)
    lhs = convolve_flux(a * f + b * g, K, 1e-4)
    rhs = a * convolve_flux(f, K, 1e-4) + b * convolve_flux(g, K, 1e-4)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (abs(a) + abs(b) + 1) * 1e-4)


def test_constant_flux_reaches_integral():
    # trapezoid error is second order (the kernel has a kink at its onset)
    errs = []
    for dt in (2e-5, 1e-5):
        n = int(round(0.1 / dt)) + 1
        c = convolve_flux(np.full(n, 3.0), K, dt)
        errs.append(abs(c[-1] / (3.0 * kernel_integral(K)) - 1.0))
    assert errs[1] < 1e-5
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_sensitivity_sign_preserved():
    f = np.zeros(500)
    f[10] = -2.0
    z = convolve_sensitivity(f, K, 1e-4)
    assert z.max() <= 0 and z.min() < 0


def test_nonuniform_grid_rejected():
    with pytest.raises(ValueError, match="uniform"):
        convolve_flux(np.ones(3), K, None, t=np.array([0.0, 1e-4, 3e-4]))


def test_single_event_is_shifted_kernel():
    grid = np.arange(2001) * 1e-5
    T = 0.00123
    c = current_from_events([T], K, grid)
    np.testing.assert_allclose(c, eval_kernel(grid - T, K), rtol=1e-14, atol=1e-300)


@given(ts=st.lists(st.floats(0.0, 0.03), max_size=8))
def test_events_superpose(ts):
    grid = np.arange(401) * 1e-4
    total = current_from_events(ts, K, grid)
    parts = sum((current_from_events([t], K, grid) for t in ts), np.zeros(len(grid)))
    np.testing.assert_allclose(total, parts, rtol=1e-12, atol=1e-300)


def test_events_outside_grid():
    grid = np.arange(101) * 1e-4
    assert not current_from_events([5.0], K, grid).any()
    assert current_from_events([], K, grid).shape == (101,)


def test_fixed_point_current(params):
    kF_bar, _ = averaged_rates(params, 0.99, 0.01)
    R0 = averaged_fixed_point(params, 0.99, 0.01)[3]
    assert fixed_point_current(params, 0.99, 0.01) == pytest.approx(kF_bar * R0 * KERNEL_INTEGRAL,
                                                                    rel=1e-12)

"""Acceptance criteria, each checked at its stated tolerance.

Every test appends one PASS/FAIL line to the terminal summary. Criteria that
the model provably cannot meet as worded stay literal and are marked as
strict expected failures; the analysis is in the decisions ledger.
"""
import time

import numpy as np
import pytest
from scipy.stats import expon, kstest

import conftest
from oracles import GOLDEN_R_HAT, newton_steady_state
from synrecov.experiments import (FIG9_I, FIG9_II, SweepSpec, default_factors, dominance_at,
                                  onset_time, reduced_ode, reduced_ssa_correlation, run_sweep)
from synrecov.model import IP, IR, IV, IWP, IWV
from synrecov.ode import IntegrationConfig, integrate, sensitivity_run
from synrecov.signal import fixed_point_current
from synrecov.ssa import CONST, ReactionNetwork, run_network_ensemble, total_current_sample
from synrecov.steady_state import FrozenRates, residual, steady_state_closed_form

SITE, VESICLE = "SITE_LIMITED", "VESICLE_LIMITED"


def report(tag, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"criterion {tag}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def _between(t, lo, hi):
    return (t > lo) & (t < hi)


def test_criterion_01_conservation(params):
    t0 = time.perf_counter()
    tr = integrate(params, IntegrationConfig())
    dt = time.perf_counter() - t0
    y = tr.y
    e_site = np.max(np.abs(y[:, IR] + y[:, IP] + y[:, IWP] - params.n_sites))
    e_ves = np.max(np.abs(y[:, IR] + y[:, IV] + y[:, IWV] - params.n_ves))
    ok = e_site < 1e-9 and e_ves < 1e-9 and dt < 5.0
    report("1", ok, f"site err {e_site:.1e}, vesicle err {e_ves:.1e}, {dt:.2f} s")
    assert ok


def test_criterion_02_steady_state():
    rng = np.random.default_rng(2)
    worst_res = worst_newton = 0.0
    for _ in range(1000):
        kR, gV, gP, kF, kU = 10 ** rng.uniform(-2, 3, 5)
        ns, nv = int(rng.integers(1, 6)), int(rng.integers(1, 21))
        fr = FrozenRates(kF, kU, kR, gV, gP, ns, nv)
        x = steady_state_closed_form(fr)
        worst_res = max(worst_res, residual(fr, x) / max(ns, nv))
        start = x * (1 + 1e-3 * rng.uniform(-1, 1, 5))
        xn = newton_steady_state(kR, gV, gP, kF, kU, ns, nv, start)
        worst_newton = max(worst_newton, np.max(np.abs(x - xn) / np.maximum(np.abs(xn), 1e-300)))
    g = steady_state_closed_form(FrozenRates(0.0, 1.0, 1.0, 1.0, 1.0, 1, 1))
    e_golden = abs(g[IR] - GOLDEN_R_HAT)
    ok = worst_res < 1e-10 and worst_newton < 1e-10 and e_golden < 1e-12
    report("2", ok, f"residual/n {worst_res:.1e}, newton rel {worst_newton:.1e}, "
                    f"golden err {e_golden:.1e}")
    assert ok


def test_criterion_03_sensitivities(params, sens_run):
    t0 = time.perf_counter()
    cfg = IntegrationConfig()
    worst = {}
    for name, Z in (("g_V", sens_run.Z_C_gV), ("g_P", sens_run.Z_C_gP)):
        g = getattr(params, name)
        d = 1e-4 * g
        up = integrate(params.replace(**{name: g + d}), cfg).current()
        dn = integrate(params.replace(**{name: g - d}), cfg).current()
        fd = (up - dn) / (2 * d)
        worst[name] = np.max(np.abs(Z - fd)) / np.max(np.abs(fd))
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-3 and dt < 30.0
    report("3", ok, f"rel sup err g_V {worst['g_V']:.1e}, g_P {worst['g_P']:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_04_periodicity(params, ode_run):
    t, C = ode_run.t, ode_run.current()
    dt = ode_run.dt
    lag = int(round(0.01 / dt))
    w = (t >= 0.9 - 1e-12) & (t <= 0.99 + 1e-12)
    idx = np.flatnonzero(w)
    drift = np.max(np.abs(C[idx] - C[idx + lag]))
    amp = C[w].max() - C[w].min()
    per = (t >= 0.99 - 1e-12) & (t < 1.0 - 1e-12)
    mean = C[per].mean()
    C0 = fixed_point_current(params, 0.99, 0.01)
    rel = abs(mean - C0) / abs(C0)
    ok = drift < 0.01 * amp and rel < 0.02
    report("4", ok, f"period drift {drift / amp:.2%} of amplitude, period mean vs C0 {rel:.2%}")
    assert ok


@pytest.fixture(scope="module")
def default_analysis(params):
    return sensitivity_run(params, IntegrationConfig())


@pytest.mark.xfail(strict=True, reason="current lags the first stimulus; rest state is vesicle "
                                       "limited (see ledger)")
def test_criterion_05a_site_limited_early(params, default_analysis):
    a = default_analysis
    w = _between(a.t, params.t_start, 0.2)
    labels = a.dominance[w]
    bad = a.t[w][labels != SITE]
    ok = len(bad) == 0
    report("5a", ok, "SITE_LIMITED on (t_start, 0.2 s)" if ok else
           f"{len(bad)} points not SITE_LIMITED, in [{bad.min():.4f}, {bad.max():.4f}] s")
    assert ok


def test_criterion_05b_vesicle_late_and_negative_z(default_analysis):
    a = default_analysis
    late = np.all(a.dominance[_between(a.t, 0.7, 1.0)] == VESICLE)
    zmin = np.ma.min(a.z_gP[_between(a.t, 0.2, 0.35)])
    ok = bool(late) and zmin < 0
    report("5b", ok, f"VESICLE_LIMITED on (0.7, 1.0): {bool(late)}, min z_gP in (0.2, 0.35) "
                     f"{zmin:.3f}")
    assert ok


def test_criterion_06_ssa_exactness(params):
    t0 = time.perf_counter()
    g, n0, runs = params.g_V, params.n_ves, 100_000
    net = ReactionNetwork.build(("W_V",), [("RECOVER_V", ("W_V",), (), CONST, g)])
    st = run_network_ensemble(net, [n0], 200.0 / g, runs, 6, np.array([0.0, 200.0 / g]),
                              ("W_V", "W_V"), mark="RECOVER_V")
    times = np.concatenate(st.fusion_times)
    first = np.array([ts[0] for ts in st.fusion_times])
    p_all = kstest(times, expon(scale=1 / g).cdf).pvalue
    p_first = kstest(first, expon(scale=1 / (n0 * g)).cdf).pvalue
    dt = time.perf_counter() - t0
    ok = len(times) == runs * n0 and p_all > 0.01 and p_first > 0.01 and dt < 60.0
    report("6", ok, f"KS p = {p_all:.3f} (all events), {p_first:.3f} (first), {dt:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_07_mean_vs_ode(big_ensemble, ode_run):
    st = big_ensemble
    C = ode_run.current()
    assert np.array_equal(st.t, ode_run.t)
    band = 3 * st.std_C / np.sqrt(st.n_runs)
    inside = np.abs(st.mean_C - C) <= band
    frac = inside.mean()
    ok = frac >= 0.99 and st.elapsed < 600.0
    report("7", ok, f"{frac:.2%} of grid points inside the 3 sigma/sqrt(n) band, "
                    f"n = {st.n_runs}, {st.elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_08_correlation_decay(big_ensemble):
    st = big_ensemble
    late = st.t > 0.5
    c = np.ma.abs(st.corr[late])
    worst = float(np.ma.max(c))
    ok = worst < 0.1 and not np.ma.getmaskarray(st.corr[late]).all()
    report("8", ok, f"max |corr(V, P)| for t > 0.5 s = {worst:.3f}")
    assert ok


@pytest.mark.slow
def test_criterion_09_total_current(params, big_ensemble):
    grid = big_ensemble.t
    Ns = np.array([10, 100, 1000])
    dist = np.array([np.max(np.abs(total_current_sample(params, 1.0, int(N), 99, grid)
                                   - big_ensemble.mean_C)) for N in Ns])
    slope = np.polyfit(np.log(Ns), np.log(dist), 1)[0]
    ok = abs(slope + 0.5) <= 0.1
    report("9", ok, f"log-log slope {slope:.3f}")
    assert ok


def test_criterion_10a_reduced_ode_agree():
    a, b = reduced_ode(FIG9_I, 2.0), reduced_ode(FIG9_II, 2.0)
    err = max(np.max(np.abs(a["A"] - b["A"])), np.max(np.abs(a["B"] - b["B"])))
    ok = err < 1e-8
    report("10a", ok, f"sup |I - II| = {err:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_10b_reduced_correlation():
    t0 = time.perf_counter()
    grid = np.linspace(0.0, 2.0, 201)
    r = reduced_ssa_correlation(FIG9_I, FIG9_II, 200_000, grid, seed=9)
    dt = time.perf_counter() - t0
    after = grid > 0.05 * grid[-1]
    corr_ok = np.all(np.ma.abs(r.corr_II[after]) < np.ma.abs(r.corr_I[after]))
    err_I = 0.5 * (r.rel_err_A_I + r.rel_err_B_I)
    err_II = 0.5 * (r.rel_err_A_II + r.rel_err_B_II)
    better = np.ma.filled(err_II[after] < err_I[after], False)
    ok = bool(corr_ok) and better.all() and dt < 600.0
    report("10b", ok, f"|corr_II| < |corr_I| everywhere: {bool(corr_ok)}, II error below I at "
                      f"{better.mean():.0%} of times, mean rel err I {err_I[after].mean():.3f} "
                      f"vs II {err_II[after].mean():.3f}, {dt:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def k_R_sweep(params):
    return run_sweep(SweepSpec("k_R", tuple(default_factors(9)), params))


@pytest.mark.xfail(strict=True, reason="at onset low-k_R legs are still vesicle limited "
                                       "(see ledger)")
def test_criterion_11a_k_R_sweep_onset(params, k_R_sweep):
    t_on = onset_time(params)
    labels = [dominance_at(leg.analysis, t_on) for leg in k_R_sweep]
    n_site = sum(lab == SITE for lab in labels)
    ok = n_site == len(labels)
    report("11a", ok, f"{n_site} of {len(labels)} k_R factors SITE_LIMITED at onset "
                      f"t = {t_on:.3f} s")
    assert ok


def test_criterion_11b_smallest_g_P(params):
    leg = run_sweep(SweepSpec("g_P", (float(default_factors(9)[0]),), params))[0]
    d = leg.analysis.dominance
    defined = d != "UNDEFINED"
    ok = bool(np.all(d[defined] == SITE)) and defined.mean() > 0.99
    report("11b", ok, f"SITE_LIMITED at every defined point, defined on {defined.mean():.2%} "
                      "of the second")
    assert ok

"""Exact stochastic simulation of the recovery network with time-dependent propensities.

Candidate event times are drawn from a piecewise-constant majorant of the total
propensity and accepted with probability ``a(t) / a_sup`` (thinning). The
majorant is taken over the interval from the current time to the next window
edge (midpoints between stimuli) and is rebuilt after every candidate, so it
always reflects the current counts.

The engine is generic over a small reaction table (mass-action reactants,
stoichiometric change, rate kind) so the reduced two-species systems share it.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .model import ModelParams, eval_kF, eval_kU, kf_rate, kf_sup, ku_rate
from .signal import _kargs, kernel_support, superpose_events
from .steady_state import FrozenRates, steady_state_closed_form

CONST, KF, KU = 0, 1, 2
REACTIONS = ("PRIME", "UNPRIME", "FUSE", "RECOVER_V", "RECOVER_P")
JUMP_SPECIES = ("V", "W_V", "W_P", "R", "P", "F")
FUSE = REACTIONS.index("FUSE")
CHUNK = 128


@dataclass(frozen=True)
class ReactionNetwork:
    """Mass-action reaction table.

    ``reactants[j]`` holds up to two distinct species indices (-1 for none);
    ``kind[j]`` selects a constant rate or the model's k_F(t) / k_U(t).
    """

    species: tuple
    reactions: tuple
    reactants: np.ndarray
    change: np.ndarray
    kind: np.ndarray
    const: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.reactants)
        if np.any((r[:, 0] == r[:, 1]) & (r[:, 0] >= 0)):
            raise ValueError("homodimer reactions are not supported")
        if self.change.shape != (len(self.reactions), len(self.species)):
            raise ValueError("change matrix shape does not match reactions x species")

    @classmethod
    def build(cls, species, reactions):
        """``reactions``: sequence of ``(name, reactants, products, kind, rate)`` tuples."""
        idx = {s: i for i, s in enumerate(species)}
        n = len(reactions)
        reac = -np.ones((n, 2), dtype=np.int64)
        change = np.zeros((n, len(species)), dtype=np.int64)
        kind = np.zeros(n, dtype=np.int64)
        const = np.zeros(n, dtype=np.float64)
        for j, (_, ins, outs, k, rate) in enumerate(reactions):
            for m, s in enumerate(ins):
                reac[j, m] = idx[s]
                change[j, idx[s]] -= 1
            for s in outs:
                change[j, idx[s]] += 1
            kind[j] = k
            const[j] = rate
        return cls(tuple(species), tuple(r[0] for r in reactions), reac, change, kind, const)

    def propensities(self, x, t, p: ModelParams | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(len(self.reactions))
        for j in range(len(out)):
            m = 1.0
            for s in self.reactants[j]:
                if s >= 0:
                    m *= x[s]
            if self.kind[j] == KF:
                c = eval_kF(t, p)
            elif self.kind[j] == KU:
                c = eval_kU(t, p)
            else:
                c = self.const[j]
            out[j] = c * m
        return out

    def rre_rhs(self, t, x, p: ModelParams | None = None) -> np.ndarray:
        """Mass-action reaction rate equation of the same table."""
        return self.propensities(x, t, p) @ self.change


def recovery_network(p: ModelParams, frozen: tuple[float, float] | None = None) -> ReactionNetwork:
    """The five-reaction recovery network with the fusion counter as a sixth species.

    ``frozen=(k_F, k_U)`` replaces the time-dependent rates by constants.
    """
    kf, ku = (KF, 0.0), (KU, 0.0)
    if frozen is not None:
        kf, ku = (CONST, frozen[0]), (CONST, frozen[1])
    return ReactionNetwork.build(
        JUMP_SPECIES,
        [
            ("PRIME", ("V", "P"), ("R",), CONST, p.k_R),
            ("UNPRIME", ("R",), ("V", "P"), *ku),
            ("FUSE", ("R",), ("W_V", "W_P", "F"), *kf),
            ("RECOVER_V", ("W_V",), ("V",), CONST, p.g_V),
            ("RECOVER_P", ("W_P",), ("P",), CONST, p.g_P),
        ],
    )


def window_edges(p: ModelParams) -> np.ndarray:
    """Majorant window edges: midpoints between stimuli plus half a spacing outside the train."""
    st = np.asarray(p.kF_shape.stim_times, dtype=np.float64)
    if len(st) == 0:
        return np.empty(0)
    if len(st) == 1:
        return np.array([st[0] - 4.0 * p.kF_shape.sigma, st[0] + 4.0 * p.kF_shape.sigma])
    mids = 0.5 * (st[1:] + st[:-1])
    return np.concatenate([[st[0] - (mids[0] - st[0])], mids, [st[-1] + (st[-1] - mids[-1])]])


def run_seed(seed0: int, i: int) -> int:
    """32-bit seed of run ``i``: SplitMix64 of ``seed0 + (i + 1) * golden``, upper half."""
    mask = (1 << 64) - 1
    z = (int(seed0) + (int(i) + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    z ^= z >> 31
    return z >> 32


def _threads(threads):
    if threads is None:
        env = os.environ.get("SYNRECOV_THREADS")
        threads = int(env) if env else None
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# compiled core


@njit(cache=True, nogil=True)
def _mass(x, reactants, j):
    r0 = reactants[j, 0]
    r1 = reactants[j, 1]
    if r0 < 0:
        return 1.0
    if r1 < 0:
        return float(x[r0])
    return float(x[r0]) * float(x[r1])


@njit(cache=True, nogil=True)
def _simulate(x, t0, t_end, reactants, change, kind, const, kf, stim, amp, ku, edges,
              grid, gout, record, mark, ev_t, ev_r):
    """Advance ``x`` in place from ``t0`` to ``t_end``.

    ``record``: 0 nothing, 1 every event, 2 only reaction ``mark``. Grid points
    are sampled right-continuously into ``gout``. Returns (ev_t, ev_r, count).
    """
    nr = reactants.shape[0]
    ns = x.shape[0]
    ng = grid.shape[0]
    a = np.empty(nr)
    sup = np.empty(nr)
    nev = 0
    gi = 0
    while gi < ng and grid[gi] < t0:
        gi += 1
    t = t0
    while True:
        k = np.searchsorted(edges, t, side="right")
        wend = edges[k] if k < edges.shape[0] else t_end
        if wend > t_end:
            wend = t_end
        asup = 0.0
        for j in range(nr):
            m = _mass(x, reactants, j)
            if m == 0.0:
                sup[j] = 0.0
                continue
            kd = kind[j]
            if kd == CONST:
                r = const[j]
            elif kd == KF:
                r = kf_sup(t, wend, kf, stim, amp)
            else:
                r = ku_rate(t, ku)
            sup[j] = r * m
            asup += sup[j]
        if asup > 0.0:
            tc = t + np.random.exponential(1.0 / asup)
        else:
            tc = np.inf
        if tc >= wend:
            if wend >= t_end:
                break
            t = wend
            continue
        atot = 0.0
        for j in range(nr):
            if sup[j] == 0.0:
                a[j] = 0.0
                continue
            kd = kind[j]
            if kd == CONST:
                a[j] = sup[j]
            elif kd == KF:
                a[j] = kf_rate(tc, kf, stim, amp) * _mass(x, reactants, j)
            else:
                a[j] = ku_rate(tc, ku) * _mass(x, reactants, j)
            atot += a[j]
        u = np.random.random() * asup
        t = tc
        if u >= atot:
            continue
        j = 0
        acc = a[0]
        while acc <= u and j < nr - 1:
            j += 1
            acc += a[j]
        while gi < ng and grid[gi] < t:
            for s in range(ns):
                gout[gi, s] = x[s]
            gi += 1
        for s in range(ns):
            x[s] += change[j, s]
        if record == 1 or (record == 2 and j == mark):
            if nev == ev_t.shape[0]:
                nt = np.empty(2 * nev + 16)
                nrr = np.empty(2 * nev + 16, dtype=np.int64)
                nt[:nev] = ev_t[:nev]
                nrr[:nev] = ev_r[:nev]
                ev_t = nt
                ev_r = nrr
            ev_t[nev] = t
            ev_r[nev] = j
            nev += 1
    while gi < ng and grid[gi] <= t_end:
        for s in range(ns):
            gout[gi, s] = x[s]
        gi += 1
    return ev_t, ev_r, nev


@njit(cache=True, nogil=True)
def _site(seed, burn, x0, t_end, reactants, change, kind, const, bconst, kf, stim, amp, ku,
          edges, grid, gout, record, mark, reset):
    """One realization: seed the thread's generator, burn in under constant rates, then run.

    ``reset`` names a counter species zeroed after the burn-in (-1 for none).
    """
    np.random.seed(seed)
    x = x0.copy()
    ev_t = np.empty(64)
    ev_r = np.empty(64, dtype=np.int64)
    if burn > 0.0:
        ckind = np.zeros(kind.shape[0], dtype=np.int64)
        nog = np.empty(0)
        nogout = np.empty((0, x.shape[0]), dtype=np.int64)
        _simulate(x, 0.0, burn, reactants, change, ckind, bconst, kf, stim, amp, ku,
                  np.empty(0), nog, nogout, 0, -1, ev_t, ev_r)
        if reset >= 0:
            x[reset] = 0
    xstart = x.copy()
    ev_t, ev_r, n = _simulate(x, 0.0, t_end, reactants, change, kind, const, kf, stim, amp, ku,
                              edges, grid, gout, record, mark, ev_t, ev_r)
    return xstart, ev_t[:n], ev_r[:n]


@njit(cache=True, parallel=True)
def _chunk(seeds, burn, x0, t_end, reactants, change, kind, const, bconst, kf, stim, amp, ku,
           edges, grid, mark, reset, gouts, marks, counts):
    """Run ``len(seeds)`` independent realizations; keep grid samples and marked event times."""
    cap = marks.shape[1]
    for c in prange(seeds.shape[0]):
        _, ev_t, _ = _site(seeds[c], burn, x0, t_end, reactants, change, kind, const, bconst,
                           kf, stim, amp, ku, edges, grid, gouts[c], 2, mark, reset)
        n = ev_t.shape[0]
        counts[c] = n
        m = min(n, cap)
        marks[c, :m] = ev_t[:m]


@njit(cache=True, parallel=True)
def _chunk_currents(marks, counts, g0, dt, n, support, t0, A, B, tau_r, tau_df, tau_ds, out):
    for c in prange(marks.shape[0]):
        superpose_events(marks[c, :counts[c]], g0, dt, n, support, t0, A, B, tau_r, tau_df,
                         tau_ds, out[c])


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class JumpTrajectory:
    """Initial counts and the ordered list of reaction events of one realization."""

    x0: np.ndarray
    event_times: np.ndarray
    reaction_ids: np.ndarray
    network: ReactionNetwork
    t_end: float

    @property
    def reaction_names(self):
        return [self.network.reactions[j] for j in self.reaction_ids]

    @property
    def fusion_times(self) -> np.ndarray:
        return self.event_times[self.reaction_ids == FUSE]

    def replay(self) -> np.ndarray:
        """Counts after each event, starting with the initial state (raises on a negative count)."""
        steps = self.network.change[self.reaction_ids]
        path = np.vstack([self.x0[None, :], self.x0[None, :] + np.cumsum(steps, axis=0)])
        if np.any(path < 0):
            raise ValueError("replay produced a negative count")
        return path

    def sample(self, grid) -> np.ndarray:
        """Right-continuous piecewise-constant state at the grid times."""
        path = self.replay()
        idx = np.searchsorted(self.event_times, np.asarray(grid), side="right")
        return path[idx]


def round_conserving(x, n_sites: int, n_ves: int) -> np.ndarray:
    """Integer state near ``x = (V, W_V, W_P, R, P)`` with both totals exact (largest remainder)."""

    def lr(values, total):
        values = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
        s = values.sum()
        if total == 0:
            return np.zeros(len(values), dtype=np.int64)
        if s == 0:
            values, s = np.ones(len(values)), float(len(values))
        v = values * total / s
        out = np.floor(v).astype(np.int64)
        rem = total - out.sum()
        order = np.argsort(-(v - out), kind="stable")
        out[order[:rem]] += 1
        return out

    V, WV, WP, R, P = x
    R_i, P_i, WP_i = lr([R, P, WP], n_sites)
    R_i = min(R_i, n_ves)
    if R_i + P_i + WP_i != n_sites:
        P_i = n_sites - R_i - WP_i
    V_i, WV_i = lr([V, WV], n_ves - R_i)
    return np.array([V_i, WV_i, WP_i, R_i, P_i], dtype=np.int64)


def burn_in_time(p: ModelParams) -> float:
    """Twenty time constants of the slowest first-order relaxation of the resting system."""
    fr = FrozenRates.at(p, 0.0)
    return 20.0 / min(p.g_V, p.g_P, fr.k_F + fr.k_U)


def _model_args(p: ModelParams, frozen_t: float = 0.0):
    net = recovery_network(p)
    fr = FrozenRates.at(p, frozen_t)
    bnet = recovery_network(p, frozen=(fr.k_F, fr.k_U))
    kf, stim, amp = p.kf_arrays
    return net, bnet, kf, stim, amp, p.ku_array


def _start_state(p: ModelParams):
    x = steady_state_closed_form(FrozenRates.at(p, 0.0))
    return np.append(round_conserving(x, p.n_sites, p.n_ves), 0).astype(np.int64)


def _as_jump_state(x0):
    x0 = np.asarray(x0, dtype=np.int64)
    if x0.shape == (5,):
        x0 = np.append(x0, 0)
    if x0.shape != (6,) or np.any(x0 < 0):
        raise ValueError("jump state must be 5 or 6 nonnegative integers")
    return x0


def propensities(s, t: float, p: ModelParams) -> np.ndarray:
    """Propensities of PRIME, UNPRIME, FUSE, RECOVER_V, RECOVER_P at counts ``s``."""
    V, WV, WP, R, P = np.asarray(s, dtype=np.float64)[:5]
    return np.array([p.k_R * V * P, eval_kU(t, p) * R, eval_kF(t, p) * R, p.g_V * WV, p.g_P * WP])


def simulate_one(p: ModelParams, t_end: float, x0, seed: int,
                 network: ReactionNetwork | None = None, edges=None) -> JumpTrajectory:
    """One exact realization from the given integer state (no burn-in).

    The generator is seeded with ``run_seed(seed, 0)``.
    """
    net = recovery_network(p) if network is None else network
    x0 = _as_jump_state(x0) if network is None else np.asarray(x0, dtype=np.int64)
    if network is None and (x0[3] + x0[4] + x0[2] != p.n_sites or x0[3] + x0[0] + x0[1] != p.n_ves):
        raise ValueError("initial state violates the conservation laws")
    kf, stim, amp = p.kf_arrays
    edges = window_edges(p) if edges is None else np.asarray(edges, dtype=np.float64)
    xs, ev_t, ev_r = _site(run_seed(seed, 0), 0.0, x0, float(t_end), net.reactants,
                           net.change, net.kind, net.const, net.const, kf, stim, amp, p.ku_array,
                           edges, np.empty(0), np.empty((0, len(x0)), dtype=np.int64), 1, -1, -1)
    return JumpTrajectory(xs, ev_t, ev_r, net, float(t_end))


def simulate_site(p: ModelParams, t_end: float, seed: int, burn_in: float | None = None) -> JumpTrajectory:
    """One single-site realization started from a burn-in sample of the resting distribution.

    Identical to run 0 of ``run_ensemble`` or ``total_current_sample`` with the same seed.
    """
    net, bnet, kf, stim, amp, ku = _model_args(p)
    burn = burn_in_time(p) if burn_in is None else float(burn_in)
    xs, ev_t, ev_r = _site(run_seed(seed, 0), burn, _start_state(p), float(t_end),
                           net.reactants, net.change, net.kind, net.const, bnet.const, kf, stim,
                           amp, ku, window_edges(p), np.empty(0),
                           np.empty((0, 6), dtype=np.int64), 1, -1, 5)
    return JumpTrajectory(xs, ev_t, ev_r, net, float(t_end))


def sample_initial_state(p: ModelParams, seed: int, burn_in: float | None = None) -> np.ndarray:
    """Terminal state of a burn-in run under the rates frozen at t = 0 (fusion counter zeroed)."""
    return simulate_site(p, 1e-300, seed, burn_in).x0


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class _Moments:
    """Mergeable running mean / centered second moments (Chan et al. pairwise update)."""

    n: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = None

    def add(self, block: np.ndarray):
        nb = block.shape[0]
        mb = block.mean(axis=0)
        m2b = ((block - mb) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        n = self.n + nb
        d = mb - self.mean
        self.mean = self.mean + d * nb / n
        self.m2 = self.m2 + m2b + d * d * self.n * nb / n
        self.n = n


@dataclass
class _CoMoment:
    n: int = 0
    mx: np.ndarray | None = None
    my: np.ndarray | None = None
    c: np.ndarray | None = None

    def add(self, x: np.ndarray, y: np.ndarray):
        nb = x.shape[0]
        mxb, myb = x.mean(axis=0), y.mean(axis=0)
        cb = ((x - mxb) * (y - myb)).sum(axis=0)
        if self.n == 0:
            self.n, self.mx, self.my, self.c = nb, mxb, myb, cb
            return
        n = self.n + nb
        dx, dy = mxb - self.mx, myb - self.my
        self.c = self.c + cb + dx * dy * self.n * nb / n
        self.mx = self.mx + dx * nb / n
        self.my = self.my + dy * nb / n
        self.n = n


@dataclass
class EnsembleStats:
    """Per-grid-time sample moments over independent runs (``ddof=1``)."""

    t: np.ndarray
    n_runs: int
    species: tuple
    mean: np.ndarray
    std: np.ndarray
    cov: np.ndarray
    corr: np.ma.MaskedArray
    pair: tuple = ("V", "P")
    mean_C: np.ndarray | None = None
    std_C: np.ndarray | None = None
    fusion_times: list = field(default_factory=list, repr=False)

    def __getitem__(self, name):
        return self.mean[:, self.species.index(name)]

    def std_of(self, name):
        return self.std[:, self.species.index(name)]


def _corr_from(cov, sx, sy):
    den = sx * sy
    bad = den <= 0
    val = np.where(bad, 0.0, cov / np.where(bad, 1.0, den))
    return np.ma.masked_array(np.clip(val, -1.0, 1.0), mask=bad)


def _iter_chunks(net, bconst, burn, x0, t_end, grid, seeds, kf, stim, amp, ku, edges, mark,
                 reset, kernel):
    """Yield ``(grid samples, marked times per run, currents or None)`` for consecutive seed blocks."""
    support = kernel_support(kernel) if kernel is not None else 0.0
    dt = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    cap = 256
    for lo in range(0, len(seeds), CHUNK):
        s = seeds[lo:lo + CHUNK]
        while True:
            gouts = np.zeros((len(s), len(grid), len(x0)), dtype=np.int64)
            marks = np.zeros((len(s), cap))
            counts = np.zeros(len(s), dtype=np.int64)
            _chunk(s, burn, x0, t_end, net.reactants, net.change, net.kind, net.const, bconst,
                   kf, stim, amp, ku, edges, grid, mark, reset, gouts, marks, counts)
            if counts.max(initial=0) <= cap:
                break
            cap = int(counts.max()) * 2
        cur = None
        if kernel is not None:
            cur = np.zeros((len(s), len(grid)))
            _chunk_currents(marks, counts, float(grid[0]), dt, len(grid), support,
                            *_kargs(kernel), cur)
        times = [marks[c, :counts[c]].copy() for c in range(len(s))]
        yield gouts, times, cur


def _ensemble(net, bconst, burn, x0, t_end, grid, n_runs, seed0, kf, stim, amp, ku, edges,
              mark, reset, kernel, pair, threads, keep_times=True, seeds=None):
    if seeds is None:
        seeds = [run_seed(seed0, i) for i in range(n_runs)]
    seeds = np.asarray(seeds, dtype=np.int64) & 0xFFFFFFFF
    if len(seeds) < 2:
        raise ValueError("an ensemble needs at least two runs")
    _threads(threads)
    grid = np.asarray(grid, dtype=np.float64)
    i, j = net.species.index(pair[0]), net.species.index(pair[1])
    mom, co, cmom = _Moments(), _CoMoment(), _Moments()
    fusion = []
    for gouts, times, cur in _iter_chunks(net, bconst, burn, x0, t_end, grid, seeds, kf, stim,
                                          amp, ku, edges, mark, reset, kernel):
        xs = gouts.astype(np.float64)
        mom.add(xs)
        co.add(xs[:, :, i], xs[:, :, j])
        if cur is not None:
            cmom.add(cur)
        if keep_times:
            fusion.extend(times)
    n = mom.n
    std = np.sqrt(mom.m2 / (n - 1))
    cov = co.c / (n - 1)
    stats = EnsembleStats(grid, n, net.species, mom.mean, std, cov,
                          _corr_from(cov, std[:, i], std[:, j]), tuple(pair))
    if kernel is not None:
        stats.mean_C = cmom.mean
        stats.std_C = np.sqrt(cmom.m2 / (n - 1))
    stats.fusion_times = fusion
    return stats


def run_ensemble(p: ModelParams, t_end: float, n_runs: int, seed0: int, grid=None,
                 burn_in: float | None = None, threads: int | None = None,
                 keep_times: bool = True, seeds=None) -> EnsembleStats:
    """Monte Carlo moments of the single-site process and its current on ``grid``.

    Run ``i`` uses seed ``run_seed(seed0, i)`` unless an explicit ``seeds`` list
    is given; its initial state is a burn-in sample of the resting (t = 0
    rates) process.
    """
    grid = np.linspace(0.0, t_end, int(round(t_end / 1e-4)) + 1) if grid is None else grid
    net, bnet, kf, stim, amp, ku = _model_args(p)
    burn = burn_in_time(p) if burn_in is None else float(burn_in)
    return _ensemble(net, bnet.const, burn, _start_state(p), float(t_end), grid, n_runs, seed0,
                     kf, stim, amp, ku, window_edges(p), FUSE, 5, p.impulse_kernel, ("V", "P"),
                     threads, keep_times, seeds)


def run_network_ensemble(net: ReactionNetwork, x0, t_end: float, n_runs: int, seed0: int, grid,
                         pair=None, threads: int | None = None, seeds=None,
                         mark: str | None = None) -> EnsembleStats:
    """Moments of a constant-rate network started from a fixed integer state.

    With ``mark`` set to a reaction name, each run's firing times of that
    reaction are kept in ``fusion_times``.
    """
    dummy = np.zeros(4), np.zeros(0), np.zeros(0), np.zeros(4)
    pair = pair if pair is not None else net.species[:2]
    m = -1 if mark is None else net.reactions.index(mark)
    return _ensemble(net, net.const, 0.0, np.asarray(x0, dtype=np.int64), float(t_end), grid,
                     n_runs, seed0, *dummy[:3], dummy[3], np.empty(0), m, -1, None, pair,
                     threads, keep_times=mark is not None, seeds=seeds)


def total_current_sample(p: ModelParams, t_end: float, N: int, seed: int, grid=None,
                         burn_in: float | None = None, threads: int | None = None) -> np.ndarray:
    """Scaled total current: the sum of ``N`` independent single-site currents divided by ``N``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    _threads(threads)
    grid = np.linspace(0.0, t_end, int(round(t_end / 1e-4)) + 1) if grid is None else grid
    grid = np.asarray(grid, dtype=np.float64)
    net, bnet, kf, stim, amp, ku = _model_args(p)
    burn = burn_in_time(p) if burn_in is None else float(burn_in)
    seeds = np.array([run_seed(seed, i) for i in range(N)], dtype=np.int64)
    total = np.zeros(len(grid))
    for _, _, cur in _iter_chunks(net, bnet.const, burn, _start_state(p), float(t_end), grid,
                                  seeds, kf, stim, amp, ku, window_edges(p), FUSE, 5,
                                  p.impulse_kernel):
        for row in cur:
            total += row
    return total / N


def correlation(series_V, series_P) -> np.ma.MaskedArray:
    """Per-time sample correlation of two ``(n_runs, n_times)`` arrays; masked where a variance is zero."""
    x = np.asarray(series_V, dtype=np.float64)
    y = np.asarray(series_P, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need two aligned (n_runs >= 2, n_times) arrays")
    dx = x - x.mean(axis=0)
    dy = y - y.mean(axis=0)
    n = x.shape[0]
    cov = (dx * dy).sum(axis=0) / (n - 1)
    sx = np.sqrt((dx * dx).sum(axis=0) / (n - 1))
    sy = np.sqrt((dy * dy).sum(axis=0) / (n - 1))
    return _corr_from(cov, sx, sy)

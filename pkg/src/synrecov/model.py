"""Recovery network: parameters, time-dependent rates and the reaction rate equation.

The network has five species, ordered ``(V, W_V, W_P, R, P)``, plus the fusion
counter ``F`` appended as a sixth component in the extended state::

    V + P  --k_R-->      R
    R      --k_U(t)-->   V + P
    R      --k_F(t)-->   W_V + W_P   (+ one fusion event)
    W_V    --g_V-->      V
    W_P    --g_P-->      P

The scalar kernels below are compiled with numba so the ODE integrator and the
stochastic engine evaluate the exact same rate expressions.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

SPECIES = ("V", "W_V", "W_P", "R", "P")
EXTENDED = SPECIES + ("F",)
IV, IWV, IWP, IR, IP, IF = range(6)

# Gaussian terms farther than this many widths from t are skipped (< 1.3e-14 of a_i).
GAUSS_CUTOFF = 8.0


class ParamsError(ValueError):
    """Invalid parameter document; ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class KFShape:
    m0: float
    m1: float
    m2: float
    sigma: float
    stim_times: tuple[float, ...]
    amplitudes: tuple[float, ...]


@dataclass(frozen=True)
class KUShape:
    m3: float
    m4: float
    kU_min: float
    kU_max: float


@dataclass(frozen=True)
class ImpulseKernel:
    """Postsynaptic response to a single fusion event (current units, seconds)."""

    t0: float = 3e-3
    A: float = 7.21
    B: float = 2.7e-9
    tau_r: float = 10.6928
    tau_df: float = 1.5e-3
    tau_ds: float = 2.8e-3


@dataclass(frozen=True)
class ModelParams:
    k_R: float
    g_V: float
    g_P: float
    n_sites: int
    n_ves: int
    t_start: float
    kF_shape: KFShape
    kU_shape: KUShape
    impulse_kernel: ImpulseKernel = field(default_factory=ImpulseKernel)

    def __post_init__(self):
        problems = validate(self)
        if problems:
            raise ParamsError(problems)

    def replace(self, **changes) -> "ModelParams":
        """Copy with top-level or nested (``kU_max=...``, ``m0=...``) fields changed."""
        top, kf, ku, ker = {}, {}, {}, {}
        kf_names = {f.name for f in fields(KFShape)}
        ku_names = {f.name for f in fields(KUShape)}
        ker_names = {f.name for f in fields(ImpulseKernel)}
        for key, val in changes.items():
            if key in kf_names:
                kf[key] = val
            elif key in ku_names:
                ku[key] = val
            elif key in ker_names:
                ker[key] = val
            else:
                top[key] = val
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(top)
        if kf:
            d["kF_shape"] = KFShape(**{**asdict(self.kF_shape), **kf})
        if ku:
            d["kU_shape"] = KUShape(**{**asdict(self.kU_shape), **ku})
        if ker:
            d["impulse_kernel"] = ImpulseKernel(**{**asdict(self.impulse_kernel), **ker})
        return ModelParams(**d)

    def scaled(self, name: str, factor: float) -> "ModelParams":
        return self.replace(**{name: getattr(self, name) * factor})

    # numba-facing packed arrays
    @property
    def kf_arrays(self):
        s = self.kF_shape
        return (
            np.array([s.m0, s.m1, s.m2, s.sigma], dtype=np.float64),
            np.asarray(s.stim_times, dtype=np.float64),
            np.asarray(s.amplitudes, dtype=np.float64),
        )

    @property
    def ku_array(self):
        s = self.kU_shape
        return np.array([s.m3, s.m4, s.kU_min, s.kU_max], dtype=np.float64)

    @property
    def rates_array(self):
        return np.array([self.k_R, self.g_V, self.g_P], dtype=np.float64)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kF_shape"]["stim_times"] = list(self.kF_shape.stim_times)
        d["kF_shape"]["amplitudes"] = list(self.kF_shape.amplitudes)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        return cls(**_parse(doc))


def validate(p: ModelParams) -> list[str]:
    problems = []

    def finite(name, v):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            problems.append(f"{name}: must be a finite number, got {v!r}")
            return False
        return True

    for name in ("k_R", "g_V", "g_P"):
        v = getattr(p, name)
        if finite(name, v) and v <= 0:
            problems.append(f"{name}: must be > 0, got {v!r}")
    finite("t_start", p.t_start)
    for name in ("n_sites", "n_ves"):
        v = getattr(p, name)
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            problems.append(f"{name}: must be a nonnegative integer, got {v!r}")

    s = p.kF_shape
    for name in ("m0", "m1", "m2", "sigma"):
        finite(f"kF_shape.{name}", getattr(s, name))
    for name in ("m0", "m1"):
        v = getattr(s, name)
        if isinstance(v, (int, float)) and v < 0:
            problems.append(f"kF_shape.{name}: must be >= 0, got {v!r}")
    if isinstance(s.sigma, (int, float)) and not s.sigma > 0:
        problems.append(f"kF_shape.sigma: must be > 0, got {s.sigma!r}")
    st, amp = list(s.stim_times), list(s.amplitudes)
    if len(st) != len(amp):
        problems.append(
            f"kF_shape: length mismatch, {len(st)} stim_times but {len(amp)} amplitudes"
        )
    if any(b <= a for a, b in zip(st, st[1:])):
        problems.append("kF_shape.stim_times: must be strictly increasing")
    if any(not math.isfinite(a) or a < 0 for a in amp):
        problems.append("kF_shape.amplitudes: must be finite and >= 0")

    u = p.kU_shape
    for name in ("m3", "m4", "kU_min", "kU_max"):
        finite(f"kU_shape.{name}", getattr(u, name))
    for name in ("m3", "kU_min", "kU_max"):
        v = getattr(u, name)
        if isinstance(v, (int, float)) and v < 0:
            problems.append(f"kU_shape.{name}: must be >= 0, got {v!r}")

    k = p.impulse_kernel
    for name in ("t0", "A", "B"):
        finite(f"impulse_kernel.{name}", getattr(k, name))
    for name in ("tau_r", "tau_df", "tau_ds"):
        v = getattr(k, name)
        if finite(f"impulse_kernel.{name}", v) and v <= 0:
            problems.append(f"impulse_kernel.{name}: must be > 0, got {v!r}")
    if isinstance(k.t0, (int, float)) and k.t0 < 0:
        problems.append(f"impulse_kernel.t0: must be >= 0, got {k.t0!r}")
    return problems


_TOP_KEYS = ("k_R", "g_V", "g_P", "n_sites", "n_ves", "t_start", "kF_shape", "kU_shape")


def _section(doc, name, cls, problems, optional=False):
    if name not in doc:
        # a missing top-level section is reported by the caller
        return None
    sub = doc[name]
    if not isinstance(sub, dict):
        problems.append(f"{name}: must be an object")
        return None
    names = [f.name for f in fields(cls)]
    for key in sub:
        if key not in names:
            problems.append(f"unknown key: {name}.{key}")
    missing = [n for n in names if n not in sub]
    if missing and not optional:
        problems.extend(f"missing key: {name}.{n}" for n in missing)
        return None
    return {n: sub[n] for n in names if n in sub}


def _parse(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ParamsError("parameter document must be a JSON object")
    problems = []
    allowed = set(_TOP_KEYS) | {"impulse_kernel"}
    problems.extend(f"unknown key: {k}" for k in doc if k not in allowed)
    problems.extend(f"missing key: {k}" for k in _TOP_KEYS if k not in doc)
    kf = _section(doc, "kF_shape", KFShape, problems)
    ku = _section(doc, "kU_shape", KUShape, problems)
    ker = _section(doc, "impulse_kernel", ImpulseKernel, problems, optional=True)
    if problems:
        raise ParamsError(problems)
    for key in ("stim_times", "amplitudes"):
        if not isinstance(kf[key], list):
            raise ParamsError(f"kF_shape.{key}: must be an array")
    kf["stim_times"] = tuple(kf["stim_times"])
    kf["amplitudes"] = tuple(kf["amplitudes"])
    out = {k: doc[k] for k in _TOP_KEYS[:6]}
    for k in ("n_sites", "n_ves"):
        if isinstance(out[k], float) and out[k].is_integer():
            out[k] = int(out[k])
    out["kF_shape"] = KFShape(**kf)
    out["kU_shape"] = KUShape(**ku)
    out["impulse_kernel"] = ImpulseKernel(**(ker or {}))
    return out


def load_params(path=None) -> ModelParams:
    """Read and validate a parameter JSON document (bundled paper defaults if ``path`` is None).

    Raises
    ------
    ParamsError
        On malformed JSON (message carries line and column) or on any invalid,
        missing or unknown field (all problems are reported together).
    """
    if path is None:
        text = resources.files("synrecov").joinpath("params/paper_default.json").read_text()
        where = "paper_default.json"
    else:
        text = Path(path).read_text()
        where = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParamsError(
            f"{where}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return ModelParams.from_dict(doc)


def paper_defaults() -> ModelParams:
    return load_params(None)


# ---------------------------------------------------------------------------
# compiled scalar kernels


@njit(cache=True, nogil=True)
def _expit(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def kf_rate(t, kf, stim, amp):
    base = kf[0] * _expit(kf[1] * (t - kf[2]))
    sigma = kf[3]
    cut = GAUSS_CUTOFF * sigma
    i = np.searchsorted(stim, t - cut)
    g = 0.0
    n = stim.shape[0]
    while i < n and stim[i] <= t + cut:
        d = (t - stim[i]) / sigma
        g += amp[i] * math.exp(-0.5 * d * d)
        i += 1
    return base + g


@njit(cache=True, nogil=True)
def kf_sup(a, b, kf, stim, amp):
    """Upper bound of k_F on [a, b]; the logistic baseline is nondecreasing."""
    base = kf[0] * _expit(kf[1] * (b - kf[2]))
    sigma = kf[3]
    cut = GAUSS_CUTOFF * sigma
    i = np.searchsorted(stim, a - cut)
    g = 0.0
    n = stim.shape[0]
    while i < n and stim[i] <= b + cut:
        s = stim[i]
        if s < a:
            d = (a - s) / sigma
            g += amp[i] * math.exp(-0.5 * d * d)
        elif s > b:
            d = (s - b) / sigma
            g += amp[i] * math.exp(-0.5 * d * d)
        else:
            g += amp[i]
        i += 1
    return base + g


@njit(cache=True, nogil=True)
def ku_rate(t, ku):
    # k_max * (1 - logistic(m3 (t - m4))) + k_min, written overflow-free
    return ku[3] * _expit(-ku[0] * (t - ku[1])) + ku[2]


@njit(cache=True, nogil=True)
def rre_rhs_kernel(x, kR, gV, gP, kF, kU, out):
    V = max(x[0], 0.0)
    WV = max(x[1], 0.0)
    WP = max(x[2], 0.0)
    R = max(x[3], 0.0)
    P = max(x[4], 0.0)
    prime = kR * V * P
    unprime = kU * R
    fuse = kF * R
    rv = gV * WV
    rp = gP * WP
    out[0] = -prime + rv + unprime
    out[1] = fuse - rv
    out[2] = fuse - rp
    out[3] = prime - fuse - unprime
    out[4] = -prime + rp + unprime
    if out.shape[0] > 5:
        out[5] = fuse


@njit(cache=True, nogil=True)
def jacobian_kernel(x, kR, gV, gP, kF, kU, J):
    V = max(x[0], 0.0)
    P = max(x[4], 0.0)
    J[:, :] = 0.0
    J[0, 0] = -kR * P
    J[0, 1] = gV
    J[0, 3] = kU
    J[0, 4] = -kR * V
    J[1, 1] = -gV
    J[1, 3] = kF
    J[2, 2] = -gP
    J[2, 3] = kF
    J[3, 0] = kR * P
    J[3, 3] = -kF - kU
    J[3, 4] = kR * V
    J[4, 0] = -kR * P
    J[4, 2] = gP
    J[4, 3] = kU
    J[4, 4] = -kR * V
    J[5, 3] = kF


# ---------------------------------------------------------------------------
# Python-level API


def eval_kF(t, p: ModelParams):
    """Fusion rate k_F(t) in 1/s: logistic baseline plus one Gaussian per stimulus."""
    kf, stim, amp = p.kf_arrays
    if np.ndim(t) == 0:
        return kf_rate(float(t), kf, stim, amp)
    t = np.asarray(t, dtype=np.float64)
    return np.array([kf_rate(ti, kf, stim, amp) for ti in t.ravel()]).reshape(t.shape)


def eval_kU(t, p: ModelParams):
    """Unpriming rate k_U(t) in 1/s: a decreasing sigmoid from k_max + k_min to k_min."""
    ku = p.ku_array
    if np.ndim(t) == 0:
        return ku_rate(float(t), ku)
    t = np.asarray(t, dtype=np.float64)
    return np.array([ku_rate(ti, ku) for ti in t.ravel()]).reshape(t.shape)


def kF_integral(a: float, b: float, p: ModelParams) -> float:
    """Closed-form integral of k_F over [a, b] (softplus for the baseline, erf per Gaussian)."""
    s = p.kF_shape
    if s.m1 > 0:

        def softplus(z):
            return max(z, 0.0) + math.log1p(math.exp(-abs(z)))

        base = s.m0 / s.m1 * (softplus(s.m1 * (b - s.m2)) - softplus(s.m1 * (a - s.m2)))
    else:
        base = 0.5 * s.m0 * (b - a)
    root = math.sqrt(2.0) * s.sigma
    c = s.sigma * math.sqrt(math.pi / 2.0)
    gauss = 0.0
    for ti, ai in zip(s.stim_times, s.amplitudes):
        gauss += ai * c * (math.erf((b - ti) / root) - math.erf((a - ti) / root))
    return base + gauss


def _rates(t, p, kF=None, kU=None):
    if kF is None:
        kF = eval_kF(t, p)
    if kU is None:
        kU = eval_kU(t, p)
    return kF, kU


def rre_rhs(t, x, p: ModelParams, kF=None, kU=None) -> np.ndarray:
    """Right-hand side h(x, t) of the reaction rate equation for ``x = (V, W_V, W_P, R, P)``.

    ``kF``/``kU`` override the time-dependent rates (frozen-rate evaluation).
    """
    kF, kU = _rates(t, p, kF, kU)
    out = np.empty(5)
    rre_rhs_kernel(np.asarray(x, dtype=np.float64), p.k_R, p.g_V, p.g_P, kF, kU, out)
    return out


def extended_rhs(t, y, p: ModelParams, kF=None, kU=None) -> np.ndarray:
    """As :func:`rre_rhs` with the fusion flux ``dF/dt = k_F(t) R`` appended."""
    kF, kU = _rates(t, p, kF, kU)
    out = np.empty(6)
    rre_rhs_kernel(np.asarray(y, dtype=np.float64), p.k_R, p.g_V, p.g_P, kF, kU, out)
    return out


def jacobian(t, x, p: ModelParams, kF=None, kU=None) -> np.ndarray:
    """6x6 Jacobian of :func:`extended_rhs` with respect to ``(V, W_V, W_P, R, P, F)``."""
    kF, kU = _rates(t, p, kF, kU)
    J = np.empty((6, 6))
    jacobian_kernel(np.asarray(x, dtype=np.float64), p.k_R, p.g_V, p.g_P, kF, kU, J)
    return J

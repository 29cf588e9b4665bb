"""
Reduced dynamics of the normalized modulation parameters

Normalized variables (time t, not s):

    Z0 = lam^{1/2} e^{i gamma},  Z_j = beta_j lam^{-(j+1/2)} e^{i gamma},
    C_j = c_j lam^{-j},          frakC_{i,j} = frak_c_{i,j} lam^{-(i+j+1)}

The truncated system freezes every index beyond the stored range at 0.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
from scipy import optimize

from cmdnls.admissible import AdmissibleExpr, make_generator
from cmdnls.config import (DEFAULT_SEED, DYADIC_WINDOWS, EXOTIC_MARGIN, MIN_CLASSIFY_SAMPLES,
                           MIN_WINDOW_SAMPLES, OMEGA_CAP, QUANTIZED_MARGIN, STATE_NORM_CEILING)
from cmdnls.errors import BlowupError, ClassificationError, ConfigError
from cmdnls.radiation import a_term, frak_a_term, matrix_accessor, sequence_accessor

logger = logging.getLogger(__name__)

# a decreasing tail needs at least this share of decreasing steps
MONOTONE_FRACTION = 0.8
# log-spaced candidates for T - t_last before the golden-section refinement
FIT_SCAN_POINTS = 181


def _pair(z):
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class NormalizedState:
    L: int
    Z0: complex
    Z: np.ndarray
    C: np.ndarray
    frakC: np.ndarray
    Zt_refined: complex = None

    def __post_init__(self):
        self.Z0 = complex(self.Z0)
        self.Z = np.asarray(self.Z, dtype=complex)
        self.C = np.asarray(self.C, dtype=complex)
        self.frakC = np.asarray(self.frakC, dtype=complex)
        if self.Z.shape != (2 * self.L,):
            raise ConfigError(f"Z must hold Z_1..Z_{2 * self.L}")
        if self.C.shape != (2 * self.L + 1,):
            raise ConfigError(f"C must hold C_1..C_{2 * self.L + 1}")
        if self.frakC.shape != (2 * self.L + 1, 2 * self.L + 1):
            raise ConfigError(f"frakC must be {2 * self.L + 1} x {2 * self.L + 1}")

    @classmethod
    def zeros(cls, L):
        size = 2 * L + 1
        return cls(L, 0.0, np.zeros(2 * L), np.zeros(size), np.zeros((size, size)))

    @property
    def lam(self):
        return abs(self.Z0) ** 2

    def z_at(self, j):
        if j == 0:
            return self.Z0
        if 1 <= j <= 2 * self.L:
            return self.Z[j - 1]
        return 0.0

    def c_accessor(self):
        return sequence_accessor(self.C)

    def frak_accessor(self):
        return matrix_accessor(self.frakC)

    def value_of(self, g):
        """Numerical value of an unconjugated generator"""
        if g.kind == "Z":
            return self.z_at(g.i)
        if g.kind == "C":
            return self.c_accessor()(g.i)
        return self.frak_accessor()(g.i, g.j)

    def forcing(self):
        """(A_j for j = 1..2L+1, frakA_{i,j} for 0 <= i, j <= 2L) from the stored C and frakC"""
        c = self.c_accessor()
        frak = self.frak_accessor()
        size = 2 * self.L + 1
        a = np.array([a_term(j, c, frak) for j in range(1, size + 1)], dtype=complex)
        frak_a = np.array([[frak_a_term(i, j, c, frak) for j in range(size)] for i in range(size)],
                          dtype=complex)
        return a, frak_a

    def to_vector(self):
        return np.concatenate([[self.Z0], self.Z, self.C, self.frakC.ravel()])

    @classmethod
    def from_vector(cls, L, vector, Zt_refined=None):
        size = 2 * L + 1
        z_end = 1 + 2 * L
        c_end = z_end + size
        return cls(L, vector[0], vector[1:z_end], vector[z_end:c_end],
                   vector[c_end:].reshape(size, size), Zt_refined)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.to_vector())))

    def to_dict(self):
        return {
            "L": self.L,
            "Z0": _pair(self.Z0),
            "Z": [_pair(z) for z in self.Z],
            "C": [_pair(z) for z in self.C],
            "frakC": [[_pair(z) for z in row] for row in self.frakC],
            "Zt_refined": None if self.Zt_refined is None else _pair(self.Zt_refined),
        }


def normalize(params, lam, gamma, with_forcing=False):
    """
    Rescale an extracted ParameterSet at scale lam and phase gamma.

    With with_forcing the normalized forcing (A_j = a_j / lam^{j+2},
    frakA_{i,j} = frak_a_{i,j} / lam^{i+j+3}) is returned alongside.
    """
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    L = params.L
    size = 2 * L + 1
    if len(params.beta) != 2 * L or len(params.c) != size or np.shape(params.frak_c) != (size, size):
        raise ConfigError(f"parameter lists do not match L={L}")

    phase = np.exp(1j * gamma)
    z = np.array([params.beta[j - 1] * lam ** -(j + 0.5) for j in range(1, 2 * L + 1)]) * phase
    c = np.array([params.c[j - 1] * lam ** -j for j in range(1, size + 1)])
    index = np.arange(size)
    frak = np.asarray(params.frak_c, dtype=complex) * lam ** -(index[:, None] + index[None, :] + 1.0)
    refined = None
    if params.beta_refined is not None:
        refined = params.beta_refined * lam ** -(2 * L - 0.5) * phase
    state = NormalizedState(L, np.sqrt(lam) * phase, z, c, frak, refined)
    if not with_forcing:
        return state

    a = np.array([params.a(j) * lam ** -(j + 2.0) for j in range(1, size + 1)])
    frak_a = np.array([[params.frak_a(i, j) * lam ** -(i + j + 3.0) for j in range(size)]
                       for i in range(size)])
    return state, {"A": a, "frakA": frak_a}


# symbolic derivation

def _two_im_c1():
    c1 = AdmissibleExpr.c(1)
    return -1j * (c1 - c1.conjugate())


@lru_cache(maxsize=None)
def _derive_generator(g):
    """D of an unconjugated generator"""
    Z = AdmissibleExpr.z
    C = AdmissibleExpr.c
    F = AdmissibleExpr.frak
    if g.kind == "Z":
        j = g.i
        return 1j * Z(j + 2) + _two_im_c1() * Z(j + 1) - 1j * (C(j) * Z(2))
    if g.kind == "C":
        j = g.i
        return 1j * C(j + 2) + a_term(j, C, F)
    i, j = g.i, g.j
    return -1j * F(i, j + 2) + 1j * F(i + 2, j) + frak_a_term(i, j, C, F)


def derive_generator(g):
    d = _derive_generator(g._replace(conj=False))
    return d.conjugate() if g.conj else d


def derivation(expr):
    """D extended to products by Leibniz and to conjugates by conj(D(u)); raises the grade by 2"""
    if not isinstance(expr, AdmissibleExpr):
        raise ConfigError("derivation needs an AdmissibleExpr")
    if not expr.is_homogeneous():
        raise ConfigError(f"malformed expression: mixed orders {expr.orders()}")
    terms = {}
    for monomial, coefficient in expr.terms.items():
        for position, g in enumerate(monomial):
            rest = monomial[:position] + monomial[position + 1:]
            for derived, value in derive_generator(g).terms.items():
                key = tuple(sorted(rest + derived))
                terms[key] = terms.get(key, 0.0) + coefficient * value
    return AdmissibleExpr(terms)


@lru_cache(maxsize=None)
def omega(k):
    """Omega_1 = -i Z_1, Omega_k = D(Omega_{k-1})"""
    if not 1 <= k <= OMEGA_CAP:
        raise ConfigError(f"k must lie in [1, {OMEGA_CAP}], got {k}")
    if k == 1:
        return -1j * AdmissibleExpr.z(1)
    return derivation(omega(k - 1))


def omega_structure(k):
    """Grade, top term and index bounds of Omega_k"""
    expr = omega(k)
    top_index = 2 * k - 1
    top = (make_generator("Z", top_index),)
    expected = -(1j ** k)
    coefficient = expr.coefficient(top)
    others = [m for m in expr.terms if m != top]
    top_alone = all(max(g.i, g.j) < top_index for m in others for g in m)
    bound = max(expr.max_index("C"), expr.max_index("F"))
    result = {
        "k": k,
        "grade": expr.grade,
        "expected_grade": 2 * k - 0.5,
        "top_coefficient": _pair(coefficient),
        "expected_top": _pair(expected),
        "top_alone": top_alone,
        "max_radiation_index": bound,
        "n_terms": len(expr),
    }
    result["ok"] = bool(expr.grade == 2 * k - 0.5 and abs(coefficient - expected) < 1e-12
                        and top_alone and bound <= 2 * k - 3)
    return result


def omega_tilde(state):
    """Omega_L with the refined Z~_{2L-1} in place of Z_{2L-1}"""
    L = state.L
    if state.Zt_refined is None:
        raise ConfigError("state carries no refined Z value")
    value = omega(L).evaluate(state.value_of)
    top = state.z_at(2 * L - 1)
    return value + (1j ** L) * top - (1j ** L) * state.Zt_refined


# truncated system

def rhs(state, noise=None):
    """Time derivative of the normalized state; noise is added to the packed vector"""
    L = state.L
    size = 2 * L + 1
    a, frak_a = state.forcing()
    two_im_c1 = 2.0 * state.C[0].imag
    z2 = state.z_at(2)

    dz = np.array([1j * state.z_at(j + 2) + two_im_c1 * state.z_at(j + 1) - 1j * state.C[j - 1] * z2
                   for j in range(1, 2 * L + 1)])
    c_next = np.concatenate([state.C[2:], [0.0, 0.0]])
    dc = 1j * c_next + a
    frak = state.frakC
    shift_col = np.zeros_like(frak)
    shift_col[:, :size - 2] = frak[:, 2:]
    shift_row = np.zeros_like(frak)
    shift_row[:size - 2, :] = frak[2:, :]
    dfrak = -1j * shift_col + 1j * shift_row + frak_a

    out = np.concatenate([[-1j * state.z_at(1)], dz, dc, dfrak.ravel()])
    if noise is not None:
        out = out + noise
    return out


@dataclass
class ErrorModel:
    kind: str = "none"
    scale: float = 0.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.kind not in ("none", "bounded_noise"):
            raise ConfigError(f"unknown error model {self.kind!r}")
        if self.scale < 0:
            raise ConfigError("noise scale must be nonnegative")

    def sampler(self, size):
        """Per-step perturbation: uniform in [-scale, scale]^2 times lam^{1/2}"""
        if self.kind == "none" or self.scale == 0.0:
            return lambda z0: None
        rng = np.random.default_rng(self.seed)

        def draw(z0):
            values = rng.uniform(-1.0, 1.0, size) + 1j * rng.uniform(-1.0, 1.0, size)
            return self.scale * abs(z0) * values
        return draw


@dataclass
class ReducedTrajectory:
    L: int
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def append(self, t, state):
        self.times.append(float(t))
        self.states.append(state)

    @property
    def lam(self):
        return np.array([state.lam for state in self.states])

    def samples(self):
        return list(zip(self.times, self.lam.tolist()))

    def records(self):
        return [{
            "t": t,
            "lambda": state.lam,
            "Z0": _pair(state.Z0),
            "Z": [_pair(z) for z in state.Z],
            "C": [_pair(z) for z in state.C],
        } for t, state in zip(self.times, self.states)]

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for record in self.records():
                f.write(json.dumps(record, sort_keys=True) + "\n")


def integrate_truncated(state0, L, T, dt, error_model=None, t0=0.0, stride=1):
    """
    Classical RK4 on the truncated normalized system from t0 up to the last
    step strictly before T. The noise sample is frozen across the stages of a step.
    """
    if state0.L != L:
        raise ConfigError(f"state has L={state0.L}, expected {L}")
    if not dt > 0 or not dt < (T - t0) / 100.0:
        raise ConfigError("dt must lie in (0, (T - t0) / 100)")
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    error_model = error_model or ErrorModel()

    n_steps = int(np.floor((T - t0) / dt))
    if t0 + n_steps * dt >= T:
        n_steps -= 1
    y = state0.to_vector()
    draw = error_model.sampler(y.size)
    traj = ReducedTrajectory(L)
    traj.append(t0, state0)

    def f(vector, noise):
        return rhs(NormalizedState.from_vector(L, vector), noise)

    for n in range(1, n_steps + 1):
        noise = draw(y[0])
        k1 = f(y, noise)
        k2 = f(y + 0.5 * dt * k1, noise)
        k3 = f(y + 0.5 * dt * k2, noise)
        k4 = f(y + dt * k3, noise)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + n * dt
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > STATE_NORM_CEILING:
            raise BlowupError(f"state norm ceiling tripped at t={t:.6g}", partial=traj, time=t)
        if n % stride == 0 or n == n_steps:
            traj.append(t, NormalizedState.from_vector(L, y.copy()))
        if n % 1000 == 0:
            logger.debug("integrate_truncated: step %d/%d, lambda=%.3e", n, n_steps, abs(y[0]) ** 2)
    return traj


def seed_quantized_state(k, L, T, amplitude=1.0, phase=0.0):
    """
    State with C = frakC = 0 whose truncated flow is Z0(t) = a (T - t)^k,
    a = amplitude e^{i phase}; then lam = |a|^2 (T - t)^{2k}
    """
    if not 1 <= k <= L:
        raise ConfigError(f"k must lie in [1, L={L}], got {k}")
    if not T > 0:
        raise ConfigError("T must be positive")
    a = amplitude * np.exp(1j * phase)
    state = NormalizedState.zeros(L)
    state.Z0 = complex(a * T ** k)
    for m in range(1, k + 1):
        # m-th time derivative of Z0 at t = 0
        jet = a * factorial(k) / factorial(k - m) * (-1) ** m * T ** (k - m)
        state.Z[2 * m - 2] = 1j * (-1j) ** (m - 1) * jet
    return state


# rate classification

def _fit_slope(x, y, weights=None):
    w = None if weights is None else np.sqrt(weights)
    slope, intercept = np.polyfit(x, y, 1, w=w)
    return float(slope), float(intercept)


def fit_blowup_time(t, lam):
    """
    T minimizing the log-log line-fit residual over the last half of the
    samples. The offset T - t_last is scanned on a log scale, then refined by
    golden-section search in its logarithm.
    """
    t = np.asarray(t, dtype=float)
    log_lam = np.log(np.asarray(lam, dtype=float))
    half = t.size // 2
    t_tail, y_tail = t[half:], log_lam[half:]
    span = t[-1] - t[0]

    def residual(log_offset):
        x = np.log(t[-1] + np.exp(log_offset) - t_tail)
        slope, intercept = np.polyfit(x, y_tail, 1)
        return float(np.sum((y_tail - slope * x - intercept) ** 2))

    offsets = np.log(span * np.geomspace(1e-9, 1.0, FIT_SCAN_POINTS))
    values = np.array([residual(s) for s in offsets])
    best = int(np.argmin(values))
    if 0 < best < offsets.size - 1 and values[best] < min(values[best - 1], values[best + 1]):
        found = optimize.minimize_scalar(residual, bracket=tuple(offsets[best - 1:best + 2]),
                                         method="golden", options={"xtol": 1e-10})
        log_offset, fun = float(found.x), float(found.fun)
    else:
        logger.warning("fit_blowup_time: residual minimum at the edge of the scanned range")
        log_offset, fun = float(offsets[best]), float(values[best])
    T = t[-1] + np.exp(log_offset)
    logger.debug("fit_blowup_time: T=%.12g residual=%.3e", T, fun)
    return float(T)


def _dyadic_windows(tau):
    """Index groups W_m = (tau_max / 2^{m+1}, tau_max / 2^m] closest to tau = 0"""
    labels = np.floor(np.log2(tau.max() / tau)).astype(int)
    groups = [np.flatnonzero(labels == m) for m in np.unique(labels)]
    groups = [g for g in groups if g.size >= MIN_WINDOW_SAMPLES]
    return groups[-DYADIC_WINDOWS:]


def classify_rate(samples, T="fit", L=1):
    """
    Verdict on lam(t) ~ ell (T - t)^p near T:
    quantized (p = 2k, 1 <= k <= L), exotic (p >= 2L + EXOTIC_MARGIN) or inconclusive
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ClassificationError("samples must be (t, lambda) pairs")
    if L < 1:
        raise ConfigError("L must be at least 1")
    t, lam = data[:, 0], data[:, 1]
    if t.size < MIN_CLASSIFY_SAMPLES:
        raise ClassificationError(f"too few samples: {t.size} < {MIN_CLASSIFY_SAMPLES}")
    if np.any(np.diff(t) <= 0):
        raise ClassificationError("sample times must increase")
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ClassificationError("lambda samples must be positive and finite")

    T = fit_blowup_time(t, lam) if T == "fit" else float(T)
    keep = t < T
    t, lam = t[keep], lam[keep]
    if t.size < MIN_CLASSIFY_SAMPLES:
        raise ClassificationError(f"too few samples before T={T}")
    tail = np.diff(lam[t.size // 2:])
    if np.mean(tail < 0) < MONOTONE_FRACTION:
        raise ClassificationError("non-monotone tail: lambda does not decrease toward T")

    tau = T - t
    groups = _dyadic_windows(tau)
    if not groups:
        raise ClassificationError("no dyadic window holds enough samples")
    x = np.log(tau)
    y = np.log(lam)
    window_slopes = [_fit_slope(x[g], y[g])[0] for g in groups]
    index = np.concatenate(groups)
    weights = np.concatenate([np.full(g.size, 1.0 / g.size) for g in groups])
    slope, _ = _fit_slope(x[index], y[index], weights)

    verdict = {"kind": "inconclusive", "k": None, "ell": None, "slope": slope, "T": T,
               "window_slopes": window_slopes}
    k = int(round(slope / 2.0))
    if (1 <= k <= L and abs(slope - 2 * k) <= QUANTIZED_MARGIN
            and all(abs(s - 2 * k) <= QUANTIZED_MARGIN for s in window_slopes)):
        last = groups[-1]
        verdict.update(kind="quantized", k=k, ell=float(np.exp(np.mean(y[last] - 2 * k * x[last]))))
    elif slope >= 2 * L + EXOTIC_MARGIN:
        verdict["kind"] = "exotic"
    logger.info("classify_rate: %s (slope %.4f, T=%.6g)", verdict["kind"], slope, T)
    return verdict


# radial reduction

def radial_rhs(b, eta):
    """Rescaled-time derivative of (b_1..b_L, eta_1..eta_L), b_{L+1} = eta_{L+1} = 0"""
    b = np.asarray(b, dtype=float)
    eta = np.asarray(eta, dtype=float)
    weight = 2.0 * np.arange(1, b.size + 1) - 0.5
    b_next = np.append(b[1:], 0.0)
    eta_next = np.append(eta[1:], 0.0)
    db = b_next - weight * b[0] * b - 0.5 * eta[0] * eta
    deta = eta_next - weight * b[0] * eta + 0.5 * eta[0] * b
    return db, deta


@dataclass
class RadialTrajectory:
    s: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    b: np.ndarray
    eta: np.ndarray

    def samples(self):
        return list(zip(self.t.tolist(), self.lam.tolist()))


def integrate_radial(b0, eta0, lam0=1.0, s_end=1.0, ds=1e-3, gamma0=0.0, t0=0.0):
    """RK4 in s of the radial system together with log(lam)_s = -b_1, gamma_s = eta_1 / 2, t_s = lam^2"""
    b0 = np.asarray(b0, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    if b0.shape != eta0.shape or b0.ndim != 1 or b0.size < 1:
        raise ConfigError("b0 and eta0 must be equal-length lists")
    if not lam0 > 0:
        raise ConfigError("lam0 must be positive")
    if not ds > 0:
        raise ConfigError("ds must be positive")
    size = b0.size

    def f(y):
        b, eta = y[:size], y[size:2 * size]
        db, deta = radial_rhs(b, eta)
        return np.concatenate([db, deta, [-b[0], 0.5 * eta[0], np.exp(2.0 * y[2 * size])]])

    n_steps = int(round(s_end / ds))
    y = np.concatenate([b0, eta0, [np.log(lam0), gamma0, t0]])
    rows = [y]
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * ds * k1)
        k3 = f(y + 0.5 * ds * k2)
        k4 = f(y + ds * k3)
        y = y + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rows.append(y)
    rows = np.array(rows)
    return RadialTrajectory(
        s=ds * np.arange(n_steps + 1),
        t=rows[:, 2 * size + 2],
        lam=np.exp(rows[:, 2 * size]),
        gamma=rows[:, 2 * size + 1],
        b=rows[:, :size],
        eta=rows[:, size:2 * size],
    )


def radial_to_beta(b, eta):
    """beta_{2k-1} = -(1/2) (-i)^{k-1} (i b_k + eta_k) for k = 1..L"""
    return [-0.5 * (-1j) ** (k - 1) * (1j * bk + ek) for k, (bk, ek) in enumerate(zip(b, eta), 1)]


def beta_to_radial(beta_odd):
    b, eta = [], []
    for k, beta in enumerate(beta_odd, 1):
        z = -2.0 * beta / (-1j) ** (k - 1)
        b.append(float(z.imag))
        eta.append(float(z.real))
    return b, eta


# configured runs

@dataclass
class ReducedConfig:
    L: int = 1
    k: int = 1
    T: float = 1.0
    dt: float = 1e-3
    amplitude: float = 1.0
    phase: float = 0.0
    error_model: str = "none"
    noise_scale: float = 0.0
    seed: int = DEFAULT_SEED
    ks: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    classify: bool = False

    def validate(self):
        if self.L < 1:
            raise ConfigError("L must be at least 1")
        for k in self.ks or [self.k]:
            if not 1 <= k <= self.L:
                raise ConfigError(f"k must lie in [1, L={self.L}], got {k}")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if not 0 < self.dt < self.T / 100.0:
            raise ConfigError("dt must lie in (0, T / 100)")
        ErrorModel(self.error_model, self.noise_scale, self.seed)

    def jobs(self):
        """(k, seed) pairs this configuration asks for, in sorted order"""
        ks = self.ks or [self.k]
        seeds = self.seeds or [self.seed]
        return sorted((k, seed) for k in ks for seed in seeds)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def run_reduced(cfg, k=None, seed=None):
    """Seed a rate-k state, integrate it and optionally classify lam(t)"""
    k = cfg.k if k is None else k
    seed = cfg.seed if seed is None else seed
    state0 = seed_quantized_state(k, cfg.L, cfg.T, cfg.amplitude, cfg.phase)
    traj = integrate_truncated(state0, cfg.L, cfg.T, cfg.dt,
                               ErrorModel(cfg.error_model, cfg.noise_scale, seed))
    verdict = classify_rate(traj.samples(), cfg.T, cfg.L) if cfg.classify else None
    return {"k": k, "seed": seed, "trajectory": traj, "verdict": verdict}

"""
Modulation engine: split a near-soliton field into a modulated soliton plus a
remainder, and read off every scalar parameter of the hierarchy fields

All projections happen on the renormalized grid y = (x - x_center) / lam,
which reuses the lab grid's n_points and half_length.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from cmdnls import soliton
from cmdnls.config import (HIERARCHY_CAP, NEWTON_HALVINGS, NEWTON_MAX_ITER, NEWTON_TOL,
                           SMALLNESS_ETA)
from cmdnls.errors import (ConfigError, HierarchyDepthError, NoConvergenceError,
                           NonPositiveScaleError, SmallnessError)
from cmdnls.grid import SpectralField, derivative, gauss_legendre, inner, resample
from cmdnls.operators import LINE, b_q, hierarchy, q_field, tail_closed_integral
from cmdnls.profiles import ProfileName, ProfileTag, render
from cmdnls.radiation import a_term, frak_a_term, matrix_accessor, sequence_accessor

logger = logging.getLogger(__name__)

# Newton may stall on the interpolation rounding floor; accept it below this
STAGNATION_TOL = 1e-10
# 4th-order centered differences need this many samples
MIN_REPORT_SAMPLES = 5


@lru_cache(maxsize=8)
def _test_fields(grid):
    fields = {f"Z{k}": render(ProfileTag(ProfileName.Z, k), grid) for k in range(1, 7)}
    fields.update({f"K{j}": render(ProfileTag(ProfileName.K, j), grid) for j in range(1, 7)})
    fields["Z_c"] = render(ProfileTag(ProfileName.Z_c), grid)
    fields["Z_c2"] = render(ProfileTag(ProfileName.Z_c2), grid)
    fields["Z_h"] = render(ProfileTag(ProfileName.Z_h), grid)
    fields["varphi"] = render(ProfileTag(ProfileName.weight_varphi), grid)
    return fields


@lru_cache(maxsize=8)
def _denominators(grid):
    fields = _test_fields(grid)
    q = q_field(grid)
    y = grid.x
    yq = y * q
    return {
        "c": inner(q, fields["Z_c"], "real"),
        "h": inner(yq, fields["Z_h"], "real"),
        "c2": inner((1.0 + y * y) * q, fields["Z_c2"], "real"),
        "K4": inner(fields["K4"], fields["Z4"], "real"),
        "K5": inner(fields["K5"], fields["Z5"], "real"),
        "K6": inner(fields["K6"], fields["Z6"], "real"),
    }


@dataclass
class ModulationFrame:
    lam: float
    gamma: float
    x_center: float
    eps_tilde: SpectralField
    residual: float = 0.0
    iterations: int = 0
    w_hierarchy: list = None

    @property
    def grid(self):
        return self.eps_tilde.grid

    @property
    def w(self):
        return q_field(self.grid) + self.eps_tilde

    def hierarchy(self, depth):
        """[w, D_w w, ..., D_w^depth w] with the soliton's discrete residual removed"""
        if depth > HIERARCHY_CAP:
            raise HierarchyDepthError(f"hierarchy depth {depth} above the cap {HIERARCHY_CAP}")
        if self.w_hierarchy is None or len(self.w_hierarchy) <= depth:
            self.w_hierarchy = hierarchy(self.w, depth, background=q_field(self.grid), calc=LINE)
        return self.w_hierarchy

    def to_dict(self):
        return {
            "lambda": self.lam,
            "gamma": self.gamma,
            "x_center": self.x_center,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _wrap_phase(gamma):
    return float(np.angle(np.exp(1j * gamma)))


def _outside(grid, lam, x_center):
    targets = lam * grid.x + x_center
    return (targets < -grid.half_length) | (targets >= grid.half_length)


def pull_back(v, lam, gamma, x_center):
    """
    lam^{1/2} e^{-i gamma} v(lam y + x_center) on the renormalized grid.
    Points whose preimage leaves the lab box are filled with Q.
    """
    grid = v.grid
    if lam == 1.0 and x_center == 0.0:
        raw = v
    else:
        raw, _ = resample(v, lam, x_center)
    values = np.sqrt(lam) * np.exp(-1j * gamma) * raw.values
    outside = _outside(grid, lam, x_center)
    if outside.any():
        values = np.where(outside, q_field(grid).values, values)
    return SpectralField(grid, values)


def _orthogonality(eps, tests):
    return np.array([inner(eps, z, "real") for z in tests])


def _jacobian(g, lam, tests):
    """Columns d/d(lam, gamma, x) of the pulled-back field, tested against Z_1..Z_3"""
    y = g.grid.x
    slope = derivative(g)
    columns = [(0.5 * g + y * slope) / lam, -1j * g, slope / lam]
    return np.array([[inner(col, z, "real") for col in columns] for z in tests])


def initial_guess(v):
    grid = v.grid
    lam = q_field(grid).h1_norm() / v.h1_norm()
    peak = int(np.argmax(np.abs(v.values)))
    return float(lam), float(np.angle(v.values[peak])), float(grid.x[peak])


def smallness(eps, lam, x_center):
    """H^1 size of eps over the part of the y-grid the lab box actually covers"""
    grid = eps.grid
    window = 0.5 * min(grid.half_length, (grid.half_length - abs(x_center)) / lam)
    mask = grid.interior(window)
    density = np.abs(eps.values) ** 2 + np.abs(derivative(eps).values) ** 2
    return float(np.sqrt(grid.spacing * density[mask].sum()))


def _frame(v, params, residual, iterations, eta):
    lam, gamma, x_center = params
    eps = pull_back(v, lam, gamma, x_center) - q_field(v.grid)
    size = smallness(eps, lam, x_center)
    if size > eta:
        raise SmallnessError(f"outside near-soliton regime: |eps|_H1 = {size:.3e} > {eta}",
                             params=tuple(params))
    return ModulationFrame(float(lam), _wrap_phase(gamma), float(x_center), eps,
                           residual=float(residual), iterations=iterations)


def decompose(v, init=None, eta=SMALLNESS_ETA):
    """
    Newton solve of (eps, Z_k)_r = 0 for k = 1, 2, 3 in (lam, gamma, x)
    with step halving on residual growth
    """
    grid = v.grid
    fields = _test_fields(grid)
    tests = [fields["Z1"], fields["Z2"], fields["Z3"]]
    q = q_field(grid)
    params = np.array(init if init is not None else initial_guess(v), dtype=float)
    if not params[0] > 0:
        raise NonPositiveScaleError("initial lambda must be positive", params=tuple(params))

    g = pull_back(v, *params)
    residual = _orthogonality(g - q, tests)
    norm = np.max(np.abs(residual))
    for iteration in range(NEWTON_MAX_ITER):
        logger.debug("newton %d: params=%s |F|=%.3e", iteration, params, norm)
        if norm < NEWTON_TOL:
            return _frame(v, params, norm, iteration, eta)
        step = np.linalg.solve(_jacobian(g, params[0], tests), -residual)

        accepted = False
        positive = False
        for halving in range(NEWTON_HALVINGS + 1):
            trial = params + step * 0.5 ** halving
            if not trial[0] > 0:
                continue
            positive = True
            g_trial = pull_back(v, *trial)
            residual_trial = _orthogonality(g_trial - q, tests)
            norm_trial = np.max(np.abs(residual_trial))
            if norm_trial < norm:
                if halving:
                    logger.debug("newton %d: step halved %d times", iteration, halving)
                params, g, residual, norm = trial, g_trial, residual_trial, norm_trial
                accepted = True
                break

        if not accepted:
            if norm < STAGNATION_TOL:
                return _frame(v, params, norm, iteration, eta)
            if not positive:
                raise NonPositiveScaleError("lambda left (0, inf) under every damped step",
                                            params=tuple(params))
            _raise_failure(v, params, eta, f"newton stalled at |F| = {norm:.3e}")

    if norm < STAGNATION_TOL:
        return _frame(v, params, norm, NEWTON_MAX_ITER, eta)
    _raise_failure(v, params, eta, f"no convergence in {NEWTON_MAX_ITER} iterations, |F| = {norm:.3e}")


def _raise_failure(v, params, eta, message):
    # a large remainder explains most failures, report it as such
    lam, gamma, x_center = params
    eps = pull_back(v, lam, gamma, x_center) - q_field(v.grid)
    if smallness(eps, lam, x_center) > eta:
        raise SmallnessError("outside near-soliton regime: " + message, params=tuple(params))
    raise NoConvergenceError(message, params=tuple(params))


@dataclass
class ParameterSet:
    L: int
    b1: float
    eta1: float
    nu0: float
    mu0: float
    beta: list
    beta_check: list
    c: list
    frak_c: np.ndarray
    b1_check: float = 0.0
    eta1_check: float = 0.0
    nu0_check: float = 0.0
    mu0_check: float = 0.0
    beta_refined: complex = None

    def c_at(self, j):
        """c_j with c_0 = 1"""
        return sequence_accessor(self.c)(j)

    def beta_at(self, j):
        """beta_j with beta_0 = i nu_0 / 2"""
        if j == 0:
            return 0.5j * self.nu0
        return sequence_accessor(self.beta)(j)

    def a(self, j):
        return a_term(j, sequence_accessor(self.c), matrix_accessor(self.frak_c))

    def frak_a(self, i, j):
        return frak_a_term(i, j, sequence_accessor(self.c), matrix_accessor(self.frak_c))

    def to_dict(self):
        def pair(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "L": self.L,
            "b1": self.b1,
            "eta1": self.eta1,
            "nu0": self.nu0,
            "mu0": self.mu0,
            "beta": [pair(z) for z in self.beta],
            "beta_check": [pair(z) for z in self.beta_check],
            "c": [pair(z) for z in self.c],
            "frak_c": [[pair(z) for z in row] for row in self.frak_c],
            "b1_check": self.b1_check,
            "eta1_check": self.eta1_check,
            "nu0_check": self.nu0_check,
            "mu0_check": self.mu0_check,
            "beta_refined": None if self.beta_refined is None else pair(self.beta_refined),
        }


def _reflect(f):
    """f(-y) on the symmetric grid"""
    return SpectralField(f.grid, np.roll(f.values[::-1], 1))


def check_parameters(frame):
    """(nu0, b1, eta1) read off eps so that T(check) matches its Z_4..Z_6 projections"""
    grid = frame.grid
    fields = _test_fields(grid)
    den = _denominators(grid)
    eps = frame.eps_tilde
    b1 = 4.0 * inner(eps, fields["Z4"], "real") / den["K4"]
    eta1 = 4.0 * inner(eps, fields["Z5"], "real") / den["K5"]
    nu0 = 2.0 * inner(eps, fields["Z6"], "real") / den["K6"]
    return nu0, b1, eta1


def check_remainder(frame):
    """eps_check = eps - T(nu0_check, b1_check, eta1_check)"""
    nu0, b1, eta1 = check_parameters(frame)
    profile = render(ProfileTag(ProfileName.T, params=(nu0, b1, eta1)), frame.grid)
    return frame.eps_tilde - profile


def check_mu(frame):
    grid = frame.grid
    y = grid.x
    q = q_field(grid)
    remainder = check_remainder(frame)
    odd = 0.5 * (remainder - _reflect(remainder))
    eps = frame.eps_tilde
    first = (y * q * q * q * odd).real.integral().real
    second = tail_closed_integral(y * q * q * eps.abs2()).real
    return float(-first / np.pi - second / (2.0 * np.pi))


def quadratic_radiation(frame, i, j):
    """frak_c_{i,j} = int varphi conj(w_i) w_j"""
    if min(i, j) < 0:
        raise ConfigError("indices must be nonnegative")
    w = frame.hierarchy(max(i, j))
    weight = _test_fields(frame.grid)["varphi"]
    return complex(tail_closed_integral(weight * w[i].conj() * w[j]))


def _normalization_a():
    # (sqrt(2), chi)_r
    return soliton.SQRT2 * gauss_legendre(soliton.chi, -2.0, 2.0)


def refined_beta(frame, L, T, t):
    """
    (1 / (A R)) (w_{2L-1}, B_Q^* chi_R)_c with R = sqrt(T - t) / lam, evaluated
    as (B_Q w_{2L-1}, chi_R)_c so the pairing only sees the support of chi_R
    """
    if not t < T:
        raise ConfigError("refined_beta needs t < T")
    radius = np.sqrt(T - t) / frame.lam
    if radius < 1.0:
        logger.warning("refined_beta: R = %.3e below 1 on the renormalized grid", radius)
    if 2.0 * radius > 0.9 * frame.grid.half_length:
        logger.warning("refined_beta: chi_R support %.3e reaches the box edge", 2.0 * radius)
    w = frame.hierarchy(2 * L - 1)[2 * L - 1]
    cutoff = SpectralField.from_function(frame.grid, lambda y: soliton.chi_r(y, radius))
    return inner(b_q(w, LINE), cutoff, "complex") / (_normalization_a() * radius)


def extract_parameters(frame, L, T=None, t=None):
    if L < 1:
        raise ConfigError("L must be at least 1")
    depth = 2 * L + 1
    w = frame.hierarchy(depth)
    grid = frame.grid
    fields = _test_fields(grid)
    den = _denominators(grid)

    c = [inner(w[j], fields["Z_c"], "complex") / den["c"] for j in range(1, depth + 1)]
    beta = [inner(w[j], fields["Z_h"], "complex") / den["h"] for j in range(1, 2 * L + 1)]
    beta_check = [inner(w[j], fields["Z_c2"], "complex") / den["c2"] for j in range(0, 2 * L + 1)]
    frak_c = np.array([[quadratic_radiation(frame, i, j) for j in range(depth)]
                       for i in range(depth)])
    nu0_check, b1_check, eta1_check = check_parameters(frame)

    params = ParameterSet(
        L=L,
        b1=float(-2.0 * beta[0].imag),
        eta1=float(-2.0 * beta[0].real),
        nu0=float(2.0 * c[0].imag),
        mu0=float(2.0 * c[0].real),
        beta=beta,
        beta_check=beta_check,
        c=c,
        frak_c=frak_c,
        b1_check=float(b1_check),
        eta1_check=float(eta1_check),
        nu0_check=float(nu0_check),
        mu0_check=check_mu(frame),
    )
    if T is not None:
        params.beta_refined = refined_beta(frame, L, T, t)
    return params


def proximity_gap(params):
    return (abs(params.nu0_check - params.nu0) + abs(params.mu0_check - params.mu0)
            + abs(params.b1_check - params.b1) + abs(params.eta1_check - params.eta1))


def nonlinear_radiation_gap(frame, params, j):
    """|(1/pi) int y/(1+y^2) conj(eps) eps_j + 2 c_{j+1} - i nu0 c_j|, eps_j = w_j - c_j Q"""
    grid = frame.grid
    y = grid.x
    w = frame.hierarchy(j)
    eps_j = w[j] - params.c_at(j) * q_field(grid)
    pairing = tail_closed_integral(y / (1.0 + y * y) * frame.eps_tilde.conj() * eps_j) / np.pi
    return float(abs(pairing + 2.0 * params.c_at(j + 1) - 1j * params.nu0 * params.c_at(j)))


@dataclass
class ResidualReport:
    L: int
    times: list
    s: list
    lam: list
    residuals: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    radiation_gaps: dict = field(default_factory=dict)

    def max_ratios(self):
        return {name: float(np.max(values)) for name, values in sorted(self.ratios.items())}

    def to_dict(self):
        return {
            "L": self.L,
            "times": list(self.times),
            "s": list(self.s),
            "lambda": list(self.lam),
            "residuals": {name: list(map(float, values)) for name, values in sorted(self.residuals.items())},
            "ratios": {name: list(map(float, values)) for name, values in sorted(self.ratios.items())},
            "max_ratios": self.max_ratios(),
            "radiation_gaps": {name: list(map(float, values))
                               for name, values in sorted(self.radiation_gaps.items())},
        }


def time_derivative(values, times):
    """
    Centered 4th-order differences for uniform samples, one-sided 2nd order
    at the ends. Nonuniform samples fall back to numpy's 2nd-order gradient.
    """
    values = np.asarray(values)
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    out = np.gradient(values, times, edge_order=2, axis=0)
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0) and len(times) >= MIN_REPORT_SAMPLES:
        h = steps[0]
        out[2:-2] = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (12.0 * h)
    return out


def rescaled_time(times, lam):
    """s(t) = int_0^t lam^{-2}"""
    rate = 1.0 / np.asarray(lam) ** 2
    steps = 0.5 * (rate[1:] + rate[:-1]) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(steps)])


def residual_report(traj, L, eta=SMALLNESS_ETA):
    """
    Left-hand sides of the modulation and radiation laws along a stored
    trajectory, together with their ratios to the expected power of lam.
    Also records the nonlinear radiation gap for j = 1..2L at every time.
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size < MIN_REPORT_SAMPLES:
        raise ConfigError(f"too-sparse sampling: need {MIN_REPORT_SAMPLES} snapshots, got {times.size}")

    frames = []
    guess = None
    for v in traj.snapshots:
        frame = decompose(v, init=guess, eta=eta)
        frames.append(frame)
        guess = (frame.lam, frame.gamma, frame.x_center)
    params = [extract_parameters(frame, L) for frame in frames]

    lam = np.array([frame.lam for frame in frames])
    gamma = np.unwrap([frame.gamma for frame in frames])
    x_center = np.array([frame.x_center for frame in frames])

    def ds(series):
        # d/ds = lam^2 d/dt
        derivative_t = time_derivative(np.asarray(series), times)
        factor = lam ** 2
        return derivative_t * factor.reshape((-1,) + (1,) * (derivative_t.ndim - 1))

    lam_s = ds(lam)
    gamma_s = ds(gamma)
    x_s = ds(x_center)
    b1 = np.array([p.b1 for p in params])
    eta1 = np.array([p.eta1 for p in params])
    nu0 = np.array([p.nu0 for p in params])

    residuals = {
        "mod0_lambda": np.abs(lam_s / lam + b1),
        "mod0_gamma": np.abs(gamma_s - 0.5 * eta1),
        "mod0_x": np.abs(x_s / lam - nu0),
    }
    powers = {"mod0_lambda": 2.0, "mod0_gamma": 2.0, "mod0_x": 2.0}

    beta = np.array([p.beta for p in params])
    c = np.array([p.c for p in params])
    frak = np.array([p.frak_c for p in params])
    beta_s = ds(beta)
    c_s = ds(c)
    frak_s = ds(frak)
    scale_rate = lam_s / lam

    for j in range(1, 2 * L - 1):
        value = np.array([
            beta_s[n, j - 1] - scale_rate[n] * (j + 0.5) * beta[n, j - 1] + 1j * gamma_s[n] * beta[n, j - 1]
            - 1j * params[n].beta_at(j + 2) - nu0[n] * params[n].beta_at(j + 1)
            + 1j * params[n].c_at(j) * params[n].beta_at(2)
            for n in range(times.size)])
        residuals[f"beta_{j}"] = np.abs(value)
        powers[f"beta_{j}"] = j + 3.0

        value = np.array([
            c_s[n, j - 1] - scale_rate[n] * j * c[n, j - 1] - 1j * params[n].c_at(j + 2) - params[n].a(j)
            for n in range(times.size)])
        residuals[f"c_{j}"] = np.abs(value)
        powers[f"c_{j}"] = j + 2.5

    for i in range(0, 2 * L - 1):
        for j in range(0, 2 * L - 1):
            value = np.array([
                frak_s[n, i, j] - scale_rate[n] * (i + j + 1) * frak[n, i, j]
                + 1j * _frak_at(frak[n], i, j + 2) - 1j * _frak_at(frak[n], i + 2, j)
                - params[n].frak_a(i, j)
                for n in range(times.size)])
            residuals[f"frak_c_{i}_{j}"] = np.abs(value)
            powers[f"frak_c_{i}_{j}"] = i + j + 3.5

    ratios = {name: values / lam ** powers[name] for name, values in residuals.items()}
    gaps = {f"radiation_{j}": np.array([nonlinear_radiation_gap(frame, p, j)
                                        for frame, p in zip(frames, params)])
            for j in range(1, 2 * L + 1)}
    logger.info("residual report over %d snapshots, L=%d", times.size, L)
    return ResidualReport(L, times.tolist(), rescaled_time(times, lam).tolist(), lam.tolist(),
                          residuals, ratios, gaps)


def _frak_at(matrix, i, j):
    return matrix_accessor(matrix)(i, j)

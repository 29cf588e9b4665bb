"""
Time integration of the gauged equation (Strang splitting) and of CM-DNLS
itself (ETDRK4), with invariant monitors and trajectory capture
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from cmdnls.config import (BLOWUP_H1_CEILING, DEALIAS_FRACTION, ENERGY_JUMP_FACTOR,
                           MIN_WINDOW_SAMPLES)
from cmdnls.errors import BlowupError, ConfigError
from cmdnls.grid import SpectralField, Symbol, dealias_mask, derivative, inner, symbol_values
from cmdnls.operators import LINE, abs_deriv, bogomolnyi_energy, conserved_ladder
from cmdnls.profiles import d_plus, gauge_forward, gauge_inverse
from cmdnls.snapshot import TrajectoryStore

logger = logging.getLogger(__name__)

# contour points for the ETDRK4 coefficients
N_CIRCLE = 32


class Equation(str, Enum):
    gauged = "gauged"
    original = "original"


class Scheme(str, Enum):
    strang_split = "strang_split"
    etdrk4 = "etdrk4"


@dataclass
class EvolveConfig:
    equation: Equation = Equation.gauged
    dt: float = 1e-4
    t_end: float = 0.5
    scheme: Scheme = Scheme.strang_split
    dealias: float = DEALIAS_FRACTION
    monitor_stride: int = 100
    hierarchy_depth: int = 3
    h1_ceiling: float = BLOWUP_H1_CEILING

    def __post_init__(self):
        self.equation = Equation(self.equation)
        self.scheme = Scheme(self.scheme)

    def validate(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if not 0.5 < self.dealias <= 1.0:
            raise ConfigError("dealias must lie in (0.5, 1]")
        if self.monitor_stride < 1:
            raise ConfigError("monitor_stride must be at least 1")
        if self.hierarchy_depth < 0:
            raise ConfigError("hierarchy_depth must be nonnegative")
        if self.equation is Equation.original and self.scheme is Scheme.strang_split:
            # D_+(|u|^2) is complex, the nonlinear subflow is not a phase rotation
            raise ConfigError("strang_split only integrates the gauged equation")

    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def to_dict(self):
        out = asdict(self)
        out["equation"] = self.equation.value
        out["scheme"] = self.scheme.value
        return out

    @classmethod
    def from_dict(cls, data):
        known = {key: data[key] for key in cls.__dataclass_fields__ if key in data}
        return cls(**known)

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class Trajectory:
    grid: object
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def append(self, time, v, entry):
        if self.times and not time > self.times[-1]:
            raise ConfigError("trajectory times must increase")
        self.times.append(float(time))
        self.snapshots.append(v)
        self.invariants.append(entry)

    def series(self, name):
        return np.array([entry[name] for entry in self.invariants])

    def to_record(self):
        return {
            "grid": self.grid,
            "times": self.times,
            "snapshots": self.snapshots,
            "invariants": self.invariants,
            "flags": self.flags,
            "config": self.config,
        }

    @classmethod
    def from_record(cls, record):
        return cls(record["grid"], list(record["times"]), list(record["snapshots"]),
                   list(record["invariants"]), dict(record.get("flags", {})),
                   dict(record.get("config", {})))

    def save(self, path):
        store = TrajectoryStore(path)
        store.save(self.to_record())
        store.close()

    @classmethod
    def load(cls, path):
        store = TrajectoryStore(path)
        record = store.load()
        store.close()
        return cls.from_record(record)


def _check_finite(coefficients, time=None):
    if not np.all(np.isfinite(coefficients)):
        raise BlowupError("non-finite values in the state", time=time)


def gauged_potential(v, mask=None):
    """Real potential |D|(|v|^2) - |v|^4 / 4 of the gauged equation"""
    density = v.abs2()
    potential = abs_deriv(density) - 0.25 * density * density
    if mask is not None:
        potential = SpectralField.from_fourier(v.grid, potential.fourier * mask)
    return potential.real


def step_gauged(v, dt, dealias=DEALIAS_FRACTION):
    """
    One Strang step: half linear step in Fourier, exact nonlinear phase
    rotation (|v|^2 is frozen along the nonlinear subflow), half linear step.
    The potential and the rotated field are both dealiased.
    """
    grid = v.grid
    half = symbol_values(grid, Symbol.free_propagator, 0.5 * dt)
    mask = dealias_mask(grid, dealias) if dealias < 1.0 else None
    v1 = SpectralField.from_fourier(grid, v.fourier * half)
    rotated = v1 * np.exp(1j * dt * gauged_potential(v1, mask).values)
    coefficients = rotated.fourier * half
    if mask is not None:
        coefficients = coefficients * mask
    _check_finite(coefficients)
    return SpectralField.from_fourier(grid, coefficients)


def original_nonlinearity(u):
    """2i D_+(|u|^2) u"""
    return 2j * d_plus(u.abs2()) * u


def gauged_nonlinearity(v):
    density = v.abs2()
    return 1j * (abs_deriv(density) - 0.25 * density * density) * v


class Etdrk4Stepper:
    """
    Fourth-order exponential time differencing for u_t = i u_xx + N(u).
    Coefficients are averaged over a circle in the complex plane so small
    k^2 dt stays well conditioned.
    """

    def __init__(self, grid, dt, nonlinearity, dealias=DEALIAS_FRACTION):
        self.grid = grid
        self.dt = dt
        self.nonlinearity = nonlinearity
        self.mask = dealias_mask(grid, dealias) if dealias < 1.0 else None

        linear = -1j * grid.k ** 2 * dt
        self.exp_full = np.exp(linear)
        self.exp_half = np.exp(0.5 * linear)

        circle = np.exp(2j * np.pi * (np.arange(1, N_CIRCLE + 1) - 0.5) / N_CIRCLE)
        z = linear[:, np.newaxis] + circle[np.newaxis, :]
        ez = np.exp(z)
        self.zeta = dt * ((np.exp(0.5 * z) - 1.0) / z).mean(axis=1)
        self.alpha = dt * ((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z ** 3).mean(axis=1)
        self.beta = dt * ((2.0 + z + ez * (z - 2.0)) / z ** 3).mean(axis=1)
        self.gamma = dt * ((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z ** 3).mean(axis=1)

    def _rhs(self, coefficients):
        u = SpectralField.from_fourier(self.grid, coefficients)
        out = np.array(self.nonlinearity(u).fourier)
        if self.mask is not None:
            out *= self.mask
        return out

    def step_coefficients(self, coefficients):
        n1 = self._rhs(coefficients)
        a = self.exp_half * coefficients + self.zeta * n1
        n2 = self._rhs(a)
        b = self.exp_half * coefficients + self.zeta * n2
        n3 = self._rhs(b)
        c = self.exp_half * a + self.zeta * (2.0 * n3 - n1)
        n4 = self._rhs(c)
        out = (self.exp_full * coefficients + self.alpha * n1
               + 2.0 * self.beta * (n2 + n3) + self.gamma * n4)
        _check_finite(out)
        return out

    def step(self, u):
        return SpectralField.from_fourier(self.grid, self.step_coefficients(u.fourier))


def gauged_hamiltonian(v):
    """(1/2) int |v_x|^2 - (1/4) int rho |D| rho + (1/24) int rho^3, rho = |v|^2"""
    density = v.abs2()
    kinetic = 0.5 * inner(derivative(v), derivative(v), "real")
    nonlocal_part = 0.25 * inner(density, abs_deriv(density), "real")
    local = (density * density * density).integral().real / 24.0
    return kinetic - nonlocal_part + local


def monitor(v, j_max, equation=Equation.gauged):
    """
    Invariant record for one time. Original-equation states are measured
    through their gauge image, where the ladder lives.
    """
    gauged = -gauge_forward(v) if Equation(equation) is Equation.original else v
    # the ladder is a line quantity, keep the torus kernel out of it
    ladder = conserved_ladder(gauged, j_max, calc=LINE)
    return {
        "M": inner(v, v, "real"),
        "E": gauged_hamiltonian(gauged),
        "E_D": bogomolnyi_energy(gauged, LINE),
        "P": inner(-1j * derivative(v), v, "real"),
        "H1": float(v.h1_norm()),
        "I": [float(value) for value in ladder.I],
    }


def _stepper(v0, cfg):
    if cfg.scheme is Scheme.strang_split:
        return lambda v: step_gauged(v, cfg.dt, cfg.dealias)
    nonlinearity = gauged_nonlinearity if cfg.equation is Equation.gauged else original_nonlinearity
    stepper = Etdrk4Stepper(v0.grid, cfg.dt, nonlinearity, cfg.dealias)
    return stepper.step


def evolve(v0, cfg):
    cfg.validate()
    step = _stepper(v0, cfg)
    trajectory = Trajectory(v0.grid, config=cfg.to_dict())
    trajectory.append(0.0, v0, monitor(v0, cfg.hierarchy_depth, cfg.equation))
    n_steps = cfg.n_steps()
    logger.info("evolve %s/%s: %d steps of %g", cfg.equation.value, cfg.scheme.value, n_steps, cfg.dt)

    v = v0
    scale = 1e-6 * (1.0 + trajectory.invariants[0]["M"])
    for n in range(1, n_steps + 1):
        try:
            v = step(v)
        except BlowupError as error:
            raise BlowupError(str(error), partial=trajectory, time=n * cfg.dt) from error
        if n % cfg.monitor_stride and n != n_steps:
            continue
        entry = monitor(v, cfg.hierarchy_depth, cfg.equation)
        previous = trajectory.invariants[-1]["E"]
        if abs(entry["E"]) > ENERGY_JUMP_FACTOR * (abs(previous) + scale):
            raise BlowupError(f"energy jumped from {previous:.3e} to {entry['E']:.3e}",
                              partial=trajectory, time=n * cfg.dt)
        trajectory.append(n * cfg.dt, v, entry)
        logger.debug("t=%.5f M=%.12f E=%.3e H1=%.3e", n * cfg.dt, entry["M"], entry["E"], entry["H1"])
        if entry["H1"] > cfg.h1_ceiling:
            trajectory.flags["blowup_suspected"] = True
            trajectory.flags["blowup_time"] = n * cfg.dt
            logger.warning("H1 norm %.3e above ceiling at t=%.5f, stopping", entry["H1"], n * cfg.dt)
            break
    return trajectory


def gauge_cross_check(v0, dt, t_end, window=None, dealias=DEALIAS_FRACTION):
    """
    Evolves v0 with the gauged equation and u0 = -G^{-1}(v0) with CM-DNLS,
    then returns sup |(-G(u)) - v| at t_end over the window
    """
    u0 = -gauge_inverse(v0)
    common = dict(dt=dt, t_end=t_end, dealias=dealias, monitor_stride=max(1, int(round(t_end / dt))),
                  hierarchy_depth=0)
    gauged = evolve(v0, EvolveConfig(equation=Equation.gauged, scheme=Scheme.strang_split, **common))
    original = evolve(u0, EvolveConfig(equation=Equation.original, scheme=Scheme.etdrk4, **common))
    return float((-gauge_forward(original.snapshots[-1]) - gauged.snapshots[-1]).sup(window))


def _line_fit(t, y):
    slope, intercept = np.polyfit(t, y, 1)
    residual = y - (slope * t + intercept)
    spread = np.sum((y - y.mean()) ** 2)
    return slope, intercept, float(np.sum(residual ** 2) / spread) if spread > 0 else np.inf


def detect_blowup_window(traj, growth=2.0):
    """
    Looks for monotone H1 growth over the second half of the log and
    extrapolates T by fitting H1^{-1/rho} linearly in t, with rho chosen to
    make the fit straightest. Returns None when there is no such growth.
    """
    times = np.asarray(traj.times, dtype=float)
    h1 = traj.series("H1") if traj.invariants else np.array([])
    if times.size < 2 * MIN_WINDOW_SAMPLES:
        return None
    start = times.size // 2
    t = times[start:]
    h = h1[start:]
    if not np.all(h > 0) or h[-1] < growth * h[0]:
        return None
    if np.mean(np.diff(h) > 0) < 0.8:
        return None

    def badness(rho):
        return _line_fit(t, h ** (-1.0 / rho))[2]

    trials = np.arange(0.5, 12.01, 0.25)
    scores = np.array([badness(rho) for rho in trials])
    best = int(np.argmin(scores))
    rho = float(trials[best])
    if 0 < best < trials.size - 1 and scores[best] < min(scores[best - 1], scores[best + 1]):
        refined = optimize.minimize_scalar(badness, bracket=tuple(trials[best - 1:best + 2]),
                                           method="golden")
        rho = float(refined.x)
    slope, intercept, _ = _line_fit(t, h ** (-1.0 / rho))
    if not slope < 0:
        return None
    t_estimate = -intercept / slope
    logger.info("blow-up window from t=%.5f, T~%.6f (rho=%.3f)", t[0], t_estimate, rho)
    return {"t_start": float(t[0]), "T_estimate": float(t_estimate), "rho": rho}


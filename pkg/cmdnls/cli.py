"""
Command-line entry point

    python . identities --grid 16384,200
    python . omega --k 3 --print
    python . classify --in lambda.csv --T fit --L 2

Every command writes one JSON report {command, config, tolerances, results,
passed, metadata}; only metadata carries timestamps. Exit codes: 0 when every
check passes, 1 on a failed check, 2 on configuration or I/O errors.
"""
import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import partial

import numpy as np
from colorama import Fore, Style, deinit
from colorama import init as colorama_init

from cmdnls import soliton
from cmdnls.config import DEFAULT_SEED, DEFAULT_TOLERANCES, HALF_LENGTH, MACHINE_FLOOR, N_POINTS
from cmdnls.errors import ClassificationError, CmdnlsError, ConfigError
from cmdnls.evolution import EvolveConfig, Trajectory, detect_blowup_window, evolve
from cmdnls.grid import MomentSpec, SpectralField, hilbert, inner, make_grid, moment_integral
from cmdnls.modulation import decompose, extract_parameters, residual_report
from cmdnls.operators import (LINE, Identity, commutator_deviation, commutator_direct,
                              compose_identity_check, q_field)
from cmdnls.profiles import (ProfileName, ProfileTag, pseudo_conformal_residual, render,
                             stationary_residual, transversality_matrix)
from cmdnls.reduced import ReducedConfig, classify_rate, omega, omega_structure, run_reduced
from cmdnls.snapshot import read_csv, read_snapshot, write_csv, write_snapshot
from cmdnls.sweep_worker import run_sweep

logger = logging.getLogger(__name__)

COMMANDS = ("identities", "render", "evolve", "decompose", "reduce", "classify", "omega", "report")

# (power_y, power_q) -> exact value of int y^power_y Q^power_q
MOMENT_TABLE = {
    (2, 4): 2.0 * np.pi,
    (2, 6): np.pi,
    (2, 8): np.pi,
    (2, 10): 1.25 * np.pi,
    (2, 12): 1.75 * np.pi,
    (2, 14): 2.625 * np.pi,
}

# weighted moments that vanish
CANCELLATIONS = {
    "cancel_varphi_yQ2": MomentSpec(1, 2, "varphi"),
    "cancel_varphi_y3Q4": MomentSpec(3, 4, "varphi"),
    "cancel_Phi": MomentSpec(0, 0, "Phi"),
    "cancel_Phi_Q2": MomentSpec(0, 2, "Phi"),
    "cancel_phi_yQ2": MomentSpec(1, 2, "phi"),
    "cancel_phi_yQ4": MomentSpec(1, 4, "phi"),
    "cancel_phi_y3Q4": MomentSpec(3, 4, "phi"),
}


@dataclass
class RunConfig:
    command: str
    grid: tuple = (N_POINTS, HALF_LENGTH)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = DEFAULT_SEED
    in_path: str = None
    out_path: str = None
    report_path: str = None
    options: dict = field(default_factory=dict)
    verbose: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        make_grid(*self.grid)
        for name, value in self.tolerances.items():
            if not value >= MACHINE_FLOOR:
                raise ConfigError(f"tolerance {name}={value} below the machine floor {MACHINE_FLOOR}")
        if self.in_path is not None and not os.path.exists(self.in_path):
            raise ConfigError(f"input not found: {self.in_path}")
        for path in (self.out_path, self.report_path):
            if path is not None:
                parent = os.path.dirname(os.path.abspath(path))
                if not os.path.isdir(parent):
                    raise ConfigError(f"output directory does not exist: {parent}")

    def make_grid(self):
        return make_grid(*self.grid)

    def to_dict(self):
        return {
            "command": self.command,
            "grid": list(self.grid),
            "seed": self.seed,
            "in": self.in_path,
            "out": self.out_path,
            "options": self.options,
        }


def _json_print(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def parse_grid(text):
    try:
        n_points, half_length = text.split(",")
        return int(n_points), float(half_length)
    except ValueError:
        raise ConfigError(f"--grid expects N,L, got {text!r}")


def parse_tolerance(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--tol expects name=value, got {text!r}")
    if name not in DEFAULT_TOLERANCES:
        raise ConfigError(f"unknown tolerance {name!r}")
    try:
        value = float(value)
    except ValueError:
        raise ConfigError(f"tolerance {name} is not a number: {value!r}")
    if not value >= MACHINE_FLOOR:
        raise ConfigError(f"tolerance {name}={value} below the machine floor {MACHINE_FLOOR}")
    return name, value


def _load_config_file(path):
    if not os.path.exists(path):
        raise ConfigError(f"config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


# command-specific flags, merged into RunConfig.options
OPTION_FLAGS = ("k", "L", "T", "tag", "index", "params", "lam", "gamma", "x0", "classify",
                "print", "workers")


def build_config(args):
    """Config file first, flags on top"""
    data = _load_config_file(args.config) if args.config else {}
    grid = tuple(data.get("grid", (N_POINTS, HALF_LENGTH)))
    tolerances = dict(DEFAULT_TOLERANCES)
    for name, value in data.get("tolerances", {}).items():
        tolerances.update([parse_tolerance(f"{name}={value}")])
    reserved = {"grid", "tolerances", "seed", "in", "out", "report", "verbose"}
    options = {key: value for key, value in data.items() if key not in reserved}

    if args.grid is not None:
        grid = parse_grid(args.grid)
    for text in args.tol or []:
        tolerances.update([parse_tolerance(text)])
    for key in OPTION_FLAGS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            options[key] = value

    cfg = RunConfig(
        command=args.command,
        grid=(int(grid[0]), float(grid[1])),
        tolerances=tolerances,
        seed=args.seed if args.seed is not None else int(data.get("seed", DEFAULT_SEED)),
        in_path=args.in_path if args.in_path is not None else data.get("in"),
        out_path=args.out if args.out is not None else data.get("out"),
        report_path=args.report if args.report is not None else data.get("report"),
        options=options,
        verbose=bool(args.verbose or data.get("verbose", False)),
    )
    cfg.validate()
    return cfg


def _check(name, value, expected, tolerance):
    deviation = float(abs(value - expected))
    return {
        "name": name,
        "value": float(value),
        "expected": float(expected),
        "deviation": deviation,
        "tolerance": float(tolerance),
        "passed": bool(deviation <= tolerance),
    }


def _test_field(grid):
    # smooth, decaying, numerically band-limited
    x = grid.x
    return SpectralField(grid, np.exp(-x * x) * (1.0 + 0.5j * x))


def identity_suite(grid, tol):
    checks = []
    for (power_y, power_q), expected in sorted(MOMENT_TABLE.items()):
        value = moment_integral(MomentSpec(power_y, power_q))
        checks.append(_check(f"moment_y{power_y}_Q{power_q}", value, expected, tol["moment"]))
    for name, spec in sorted(CANCELLATIONS.items()):
        checks.append(_check(name, moment_integral(spec), 0.0, tol["weight"]))

    x = grid.x
    derivative_gap = np.max(np.abs(soliton.weight_big_phi(x)
                                   - soliton.complex_step_derivative(soliton.weight_small_phi, x)))
    checks.append(_check("weight_Phi_is_derivative_of_phi", derivative_gap, 0.0, tol["weight_pointwise"]))

    q = q_field(grid)
    density = q * q
    tail_tol = tol["hilbert_tail"] / grid.half_length
    window = 0.5 * grid.half_length
    checks.append(_check("hilbert_Q2", (hilbert(density) - x * soliton.q_squared(x)).sup(window), 0.0,
                         tail_tol))
    checks.append(_check("commutator_Q2", (commutator_direct(density, LINE) - 2.0).sup(window), 0.0,
                         tol["commutator"]))
    mixed = density * (1.0 + np.exp(-x * x))
    checks.append(_check("commutator_closure", commutator_deviation(mixed, window), 0.0, tol["commutator"]))
    checks.append(_check("stationary_Q", stationary_residual(q, window), 0.0, tail_tol))

    f = _test_field(grid)
    for which in Identity:
        checks.append(_check(f"identity_{which.value}", compose_identity_check(which, f), 0.0,
                             tol["identity"]))

    matrix, q_products = transversality_matrix(grid)
    off_diagonal = matrix - np.diag(np.diag(matrix))
    checks.append(_check("transversality_off_diagonal",
                         np.max(np.abs(off_diagonal)) / np.max(np.abs(matrix)), 0.0, tol["transversality"]))
    checks.append(_check("transversality_Q", np.max(np.abs(q_products)), 0.0, tol["transversality_q"]))
    checks.append(_check("pseudo_conformal_t1", pseudo_conformal_residual(1.0, grid, 10.0), 0.0,
                         tol["pseudo_conformal"]))
    checks = sorted(checks, key=lambda check: check["name"])
    return checks, all(check["passed"] for check in checks)


def _read_field(path):
    if path is None:
        raise ConfigError("this command needs --in")
    if path.endswith(".csv"):
        return read_csv(path), 0.0
    return read_snapshot(path)


def _write_field(v, path, t=0.0):
    if path.endswith(".csv"):
        write_csv(v, path)
    else:
        write_snapshot(v, path, t)


def run_identities(cfg):
    return identity_suite(cfg.make_grid(), cfg.tolerances)


def run_render(cfg):
    options = cfg.options
    if "tag" not in options:
        raise ConfigError("render needs --tag")
    try:
        name = ProfileName(options["tag"])
    except ValueError:
        raise ConfigError(f"unknown profile tag {options['tag']!r}")
    tag = ProfileTag(name, options.get("index"), tuple(options.get("params", ())))
    v = render(tag, cfg.make_grid(), float(options.get("lam", 1.0)), float(options.get("gamma", 0.0)),
               float(options.get("x0", 0.0)))
    if cfg.out_path:
        _write_field(v, cfg.out_path)
    return {"tag": name.value, "index": tag.index, "params": list(tag.params),
            "norm_L2": float(v.norm()), "sup": float(v.sup(v.grid.half_length))}, True


def run_evolve(cfg):
    if cfg.in_path is not None:
        v0, _ = _read_field(cfg.in_path)
    else:
        grid = cfg.make_grid()
        v0 = q_field(grid) + 0.01 * np.exp(-grid.x ** 2)
    evolve_cfg = EvolveConfig.from_dict(cfg.options.get("evolve", cfg.options))
    try:
        traj = evolve(v0, evolve_cfg)
    except CmdnlsError as error:
        partial_length = len(error.partial.times) if getattr(error, "partial", None) else 0
        return {"error": str(error), "samples": partial_length}, False
    if cfg.out_path:
        traj.save(cfg.out_path)
    first, last = traj.invariants[0], traj.invariants[-1]
    drift = {name: abs(last[name] - first[name]) / max(abs(first[name]), 1.0) for name in ("M", "E", "P")}
    return {
        "samples": len(traj.times),
        "final_time": traj.times[-1],
        "drift": drift,
        "flags": traj.flags,
        "blowup_window": detect_blowup_window(traj),
        "config": evolve_cfg.to_dict(),
    }, True


def run_decompose(cfg):
    v, _ = _read_field(cfg.in_path)
    options = cfg.options
    init = None
    if "lam" in options:
        init = (float(options["lam"]), float(options.get("gamma", 0.0)), float(options.get("x0", 0.0)))
    frame = decompose(v, init=init)
    tests = [render(ProfileTag(ProfileName.Z, k), frame.grid) for k in range(1, 4)]
    orthogonality = [inner(frame.eps_tilde, z, "real") for z in tests]
    results = {"frame": frame.to_dict(), "orthogonality": orthogonality}
    if "L" in options:
        results["parameters"] = extract_parameters(frame, int(options["L"])).to_dict()
    passed = max(abs(value) for value in orthogonality) <= cfg.tolerances["orthogonality"]
    return results, passed


def run_reduce(cfg):
    options = dict(cfg.options.get("reduce", cfg.options))
    options.setdefault("seed", cfg.seed)
    reduced_cfg = ReducedConfig.from_dict(options)
    reduced_cfg.validate()
    jobs = reduced_cfg.jobs()
    outputs = run_sweep([partial(run_reduced, reduced_cfg, k, seed) for k, seed in jobs],
                        n_workers=int(cfg.options.get("workers", 1)))

    results = []
    lines = []
    passed = True
    for (k, seed), output in zip(jobs, outputs):
        if output is None:
            results.append({"k": k, "seed": seed, "error": "job failed"})
            passed = False
            continue
        traj = output["trajectory"]
        verdict = output["verdict"]
        results.append({"k": k, "seed": seed, "samples": len(traj.times),
                        "lambda_final": float(traj.lam[-1]), "verdict": verdict})
        for record in traj.records():
            lines.append(dict(record, k=k, seed=seed))
        if verdict is not None:
            lines.append({"k": k, "seed": seed, "verdict": verdict})
            passed = passed and verdict["kind"] == "quantized" and verdict["k"] == k
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as f:
            for line in lines:
                f.write(json.dumps(line, sort_keys=True) + "\n")
    return {"config": reduced_cfg.to_dict(), "jobs": results}, passed


def read_lambda_csv(path):
    """(t, lambda) rows of a CSV with a `t,lambda` header"""
    with open(path, "r", encoding="utf-8") as f:
        header = [column.strip() for column in f.readline().split(",")]
    if header[:2] != ["t", "lambda"]:
        raise ConfigError(f"{path}: expected a 't,lambda' header, got {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, :2]


def run_classify(cfg):
    if cfg.in_path is None:
        raise ConfigError("classify needs --in")
    samples = read_lambda_csv(cfg.in_path)
    T = cfg.options.get("T", "fit")
    if T != "fit":
        try:
            T = float(T)
        except ValueError:
            raise ConfigError(f"--T expects a number or 'fit', got {T!r}")
    verdict = classify_rate(samples, T, int(cfg.options.get("L", 1)))
    return verdict, True


def run_omega(cfg):
    if "k" not in cfg.options:
        raise ConfigError("omega needs --k")
    k = int(cfg.options["k"])
    structure = omega_structure(k)
    text = omega(k).text()
    if cfg.options.get("print"):
        print(text)
    return {"k": k, "text": text, "structure": structure}, structure["ok"]


def run_report(cfg):
    if cfg.in_path is None:
        raise ConfigError("report needs --in (a trajectory directory)")
    traj = Trajectory.load(cfg.in_path)
    report = residual_report(traj, int(cfg.options.get("L", 1))).to_dict()
    finite = all(np.isfinite(value) for value in report["max_ratios"].values())
    return report, finite


HANDLERS = {
    "identities": run_identities,
    "render": run_render,
    "evolve": run_evolve,
    "decompose": run_decompose,
    "reduce": run_reduce,
    "classify": run_classify,
    "omega": run_omega,
    "report": run_report,
}


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", help="N,L: number of points and box half-length")
    common.add_argument("--tol", action="append", help="name=value tolerance override (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("--in", dest="in_path")
    common.add_argument("--out")
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    common.add_argument("--config", help="JSON config file; flags win")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cmdnls", description="CM-DNLS numerics and symbolics lab")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("identities", parents=[common], help="moment, weight, operator and profile identities")
    render_cmd = sub.add_parser("render", parents=[common], help="write a closed-form profile")
    render_cmd.add_argument("--tag")
    render_cmd.add_argument("--index", type=int)
    render_cmd.add_argument("--params", type=float, nargs="+")
    render_cmd.add_argument("--lam", type=float)
    render_cmd.add_argument("--gamma", type=float)
    render_cmd.add_argument("--x0", type=float)
    sub.add_parser("evolve", parents=[common], help="integrate and store a trajectory")
    decompose_cmd = sub.add_parser("decompose", parents=[common], help="modulated soliton plus remainder")
    decompose_cmd.add_argument("--L", type=int)
    decompose_cmd.add_argument("--lam", type=float)
    decompose_cmd.add_argument("--gamma", type=float)
    decompose_cmd.add_argument("--x0", type=float)
    reduce_cmd = sub.add_parser("reduce", parents=[common], help="truncated normalized ODE runs")
    reduce_cmd.add_argument("--k", type=int)
    reduce_cmd.add_argument("--L", type=int)
    reduce_cmd.add_argument("--T", type=float)
    reduce_cmd.add_argument("--classify", action="store_true")
    reduce_cmd.add_argument("--workers", type=int)
    classify_cmd = sub.add_parser("classify", parents=[common], help="blow-up rate verdict for lambda(t)")
    classify_cmd.add_argument("--T")
    classify_cmd.add_argument("--L", type=int)
    omega_cmd = sub.add_parser("omega", parents=[common], help="symbolic Omega_k")
    omega_cmd.add_argument("--k", type=int)
    omega_cmd.add_argument("--print", action="store_true")
    report_cmd = sub.add_parser("report", parents=[common], help="modulation residual table of a trajectory")
    report_cmd.add_argument("--L", type=int)
    return parser


def summarize(command, results, passed):
    checks = results if isinstance(results, list) else []
    for check in checks:
        colour = Fore.GREEN if check["passed"] else Fore.RED
        label = "PASS" if check["passed"] else "FAIL"
        print(f"{colour}{label}{Style.RESET_ALL} {check['name']}: deviation {check['deviation']:.3e}"
              f" (tol {check['tolerance']:.1e})")
    colour = Fore.GREEN if passed else Fore.RED
    print(f"{colour}{command}: {'PASS' if passed else 'FAIL'}{Style.RESET_ALL}")


def emit_report(cfg, results, passed, started, elapsed):
    report = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "tolerances": cfg.tolerances,
        "results": results,
        "passed": bool(passed),
        "metadata": {
            "started": started,
            "elapsed": elapsed,
            "host": platform.node(),
            "python": platform.python_version(),
        },
    }
    if cfg.report_path:
        with open(cfg.report_path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
    else:
        _json_print(report)
    return report


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    colorama_init()
    try:
        try:
            cfg = build_config(args)
        except (ConfigError, OSError, json.JSONDecodeError) as error:
            logger.error("%s", error)
            print(f"{Fore.RED}error:{Style.RESET_ALL} {error}")
            return 2

        started = datetime.now(timezone.utc).isoformat()
        t0 = time.perf_counter()
        logger.info("%s on grid %s", cfg.command, cfg.grid)
        try:
            results, passed = HANDLERS[cfg.command](cfg)
        except (ConfigError, ClassificationError, OSError, json.JSONDecodeError) as error:
            logger.error("%s", error)
            print(f"{Fore.RED}error:{Style.RESET_ALL} {error}")
            return 2
        except CmdnlsError as error:
            logger.error("%s", error)
            results, passed = {"error": str(error), "kind": type(error).__name__}, False

        emit_report(cfg, results, passed, started, time.perf_counter() - t0)
        summarize(cfg.command, results, passed)
        logger.info("%s finished: %s", cfg.command, "passed" if passed else "failed")
        return 0 if passed else 1
    finally:
        deinit()


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``scoopsim <scenario> [--flags] [--config FILE]``.

Configuration comes from built-in defaults, then per-scenario defaults, then
the config file (flat ``key = value`` lines, ``#`` comments), then flags.
Output is a comma-separated table preceded by ``#`` lines that record the
full effective configuration.
"""

import argparse
from dataclasses import dataclass, fields, replace
import io
import math
import sys

import numpy as np

from . import __version__
from .core import (DensityMatrixError, PROTON_MASS, WellSystem, ZurekInputs,
                   epsilon_for_occupancy, zurek_decoherence_time)
from .dynamics import TraceDriftError
from .measurement import LOOK_ONLY, PERIODIC, POISSON, SCOOP, MeasurementProtocol
from .scenarios import (DEFAULT_OCCUPANCY, FitError, RegimeError, adaptive_mutation_run,
                        alpha_decay_compare, fit_exponential_rate, late_window_slope,
                        scoop_box_experiment, zeno_scan)
from .trace import TRACE_COLUMNS

__all__ = ["RunConfig", "ConfigError", "parse_config", "run", "main", "SCENARIOS"]

SCENARIOS = ("scoop-box", "mutation", "zeno-scan", "alpha-decay", "zurek")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

# keys that never change the numbers and so stay out of the embedded config
_RUNTIME_ONLY = ("workers", "output_path")


class ConfigError(ValueError):
    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a run.  ``None`` means "derive from the other settings".

    Derived defaults: ``epsilon`` gives a mean well-Y occupancy of 1e-5;
    ``interval`` is a quarter Rabi period pi/(2 Omega); ``t_max`` is 1000
    thermal events for ``mutation``; ``tau_min``/``tau_max`` span
    [0.01, 10]/Omega; ``dt`` is the largest stable step.
    """

    scenario: str = "scoop-box"
    delta: float = 1.0
    epsilon: float = None
    gamma_thermal: float = 0.01
    gamma_lactose: float = 0.1
    n_particles: int = 1_000_000
    timing: str = POISSON
    event_rate: float = 1.0
    interval: float = None
    n_events: int = 1000
    t_max: float = None
    dt: float = None
    seed: int = 0
    mode: str = "deterministic"
    measurement: str = SCOOP
    look_backaction: bool = False
    minus_arm: str = "counted"
    tau_min: float = None
    tau_max: float = None
    points_per_decade: int = 100
    mass: float = PROTON_MASS
    temperature: float = 310.0
    displacement: float = 1e-10
    relaxation_time: float = 1.0
    record_stride: int = 1
    workers: int = 1
    output_path: str = None


# alpha-decay needs a resonant pair to plateau within a sensible run time
SCENARIO_DEFAULTS = {
    "alpha-decay": {"epsilon": 0.0, "gamma_thermal": 0.05, "t_max": 600.0},
}

_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CHOICES = {
    "scenario": SCENARIOS,
    "timing": (PERIODIC, POISSON),
    "mode": ("deterministic", "montecarlo"),
    "measurement": (SCOOP, LOOK_ONLY),
    "minus_arm": ("counted", "reversible"),
}
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def _convert(key, text):
    kind = _TYPES[key]
    text = text.strip()
    if text.lower() in ("none", "auto", "") and kind is not str:
        return None
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind is int:
            return int(text, 0)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {text!r}") from None
    if key in _CHOICES and text not in _CHOICES[key]:
        raise ConfigError(key, f"must be one of {', '.join(_CHOICES[key])}, got {text!r}")
    return text


def _normalize(key):
    name = key.strip().replace("-", "_")
    if name == "output":
        name = "output_path"
    if name not in _TYPES:
        raise ConfigError(key.strip(), "unknown key")
    return name


def read_config_file(path):
    """Parse a flat ``key = value`` file into converted values."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        name = _normalize(key)
        values[name] = _convert(name, value)
    return values


def _require(key, ok, reason):
    if not ok:
        raise ConfigError(key, reason)


def _omega(cfg):
    return math.hypot(cfg.delta, cfg.epsilon)


def resolve(cfg):
    """Fill derived defaults and check every invariant, naming the offending key."""
    _require("delta", cfg.delta >= 0, f"must be >= 0, got {cfg.delta}")
    if cfg.epsilon is None:
        _require("delta", cfg.delta > 0, "must be > 0 to derive the default epsilon")
        cfg = replace(cfg, epsilon=epsilon_for_occupancy(cfg.delta, DEFAULT_OCCUPANCY))
    for key in ("gamma_thermal", "gamma_lactose"):
        _require(key, getattr(cfg, key) >= 0, f"must be >= 0, got {getattr(cfg, key)}")
    _require("n_particles", cfg.n_particles >= 1, f"must be >= 1, got {cfg.n_particles}")
    _require("event_rate", cfg.event_rate > 0, f"must be > 0, got {cfg.event_rate}")
    _require("n_events", cfg.n_events >= 1, f"must be >= 1, got {cfg.n_events}")
    _require("seed", -(2 ** 63) <= cfg.seed < 2 ** 64, "must fit in 64 bits")
    _require("record_stride", cfg.record_stride >= 1, f"must be >= 1, got {cfg.record_stride}")
    _require("workers", cfg.workers >= 1, f"must be >= 1, got {cfg.workers}")
    _require("points_per_decade", cfg.points_per_decade >= 1,
             f"must be >= 1, got {cfg.points_per_decade}")
    for key in ("t_max", "dt", "interval", "tau_min", "tau_max"):
        value = getattr(cfg, key)
        _require(key, value is None or value > 0, f"must be > 0, got {value}")
    for key in ("mass", "temperature", "displacement", "relaxation_time"):
        _require(key, getattr(cfg, key) > 0, f"must be > 0, got {getattr(cfg, key)}")

    omega = _omega(cfg)
    scenario = cfg.scenario
    if scenario in ("scoop-box", "mutation", "zeno-scan", "alpha-decay"):
        _require("delta", omega > 0, "delta and epsilon cannot both be zero")
    if cfg.interval is None and omega > 0:
        cfg = replace(cfg, interval=math.pi / (2 * omega))
    if scenario == "mutation":
        for key in ("gamma_thermal", "gamma_lactose"):
            g = getattr(cfg, key)
            _require(key, g > 0, f"must be > 0 for the mutation scenario, got {g}")
            _require(key, g < omega / 10, f"must be below Omega/10 = {omega / 10:.6g}, got {g}")
        if cfg.t_max is None:
            cfg = replace(cfg, t_max=1000.0 / cfg.gamma_thermal)
    if scenario == "alpha-decay":
        _require("gamma_thermal", cfg.gamma_thermal > 0, "must be > 0 for alpha-decay")
        if cfg.t_max is None:
            cfg = replace(cfg, t_max=600.0)
        limit = min(0.01 / omega, 0.1 / cfg.gamma_thermal)
        if cfg.dt is None:
            cfg = replace(cfg, dt=limit)
        _require("dt", cfg.dt <= limit * (1 + 1e-12),
                 f"must be <= {limit:.6g} (0.01/Omega and 0.1/gamma), got {cfg.dt}")
    if scenario == "zeno-scan":
        if cfg.tau_min is None:
            cfg = replace(cfg, tau_min=0.01 / omega)
        if cfg.tau_max is None:
            cfg = replace(cfg, tau_max=10.0 / omega)
        _require("tau_max", cfg.tau_max > cfg.tau_min, "must exceed tau_min")
    if scenario == "zurek":
        ZurekInputs(cfg.mass, cfg.temperature, cfg.displacement, cfg.relaxation_time)
    return cfg


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="scoopsim",
        description="Measurement-driven transfer in a double well: scenarios and traces.")
    parser.add_argument("scenario", nargs="?", help=f"one of: {', '.join(SCENARIOS)}")
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--output", dest="output_path", help="output file (default: stdout)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    for f in fields(RunConfig):
        if f.name in ("scenario", "output_path"):
            continue
        parser.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar="VALUE")
    parser.error = lambda message: (_ for _ in ()).throw(ConfigError("arguments", message))
    return parser


def parse_config(argv=None):
    """Turn command-line arguments (and an optional config file) into a RunConfig.

    Raises:
        ConfigError: unknown key, type mismatch or invariant violation.
    """
    args = _build_parser().parse_args(argv)
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            flag_values[f.name] = _convert(f.name, raw)
    scenario = flag_values.get("scenario", file_values.get("scenario", RunConfig.scenario))
    values = dict(SCENARIO_DEFAULTS.get(scenario, {}))
    values.update(file_values)
    values.update(flag_values)
    values["scenario"] = scenario
    return resolve(RunConfig(**values))


def _fmt(x):
    return f"{float(x):.17g}"


def _config_lines(cfg):
    lines = [f"# scoopsim {__version__}"]
    for f in fields(cfg):
        if f.name in _RUNTIME_ONLY:
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = _fmt(value)
        elif value is None:
            text = "auto"
        else:
            text = str(value)
        lines.append(f"# {f.name}={text}")
    return lines


def _trace_rows(out, trace, stride):
    trace = trace.decimate(stride)
    for row in zip(*trace.columns()):
        out.write(",".join(_fmt(v) for v in row) + "\n")


def _protocol(cfg, mode=None, rate=None):
    mode = mode or cfg.measurement
    if cfg.timing == PERIODIC:
        return MeasurementProtocol.periodic(cfg.interval, cfg.n_events, mode=mode,
                                            look_backaction=cfg.look_backaction)
    if cfg.t_max is not None:
        return MeasurementProtocol.poisson(rate or cfg.event_rate, t_max=cfg.t_max, mode=mode,
                                           look_backaction=cfg.look_backaction)
    return MeasurementProtocol.poisson(rate or cfg.event_rate, count=cfg.n_events, mode=mode,
                                       look_backaction=cfg.look_backaction)


def _emit(cfg, out):
    for line in _config_lines(cfg):
        out.write(line + "\n")
    scenario = cfg.scenario
    if scenario == "zurek":
        inputs = ZurekInputs(cfg.mass, cfg.temperature, cfg.displacement, cfg.relaxation_time)
        out.write("tau_d_seconds\n")
        out.write(_fmt(zurek_decoherence_time(inputs)) + "\n")
    elif scenario == "zeno-scan":
        decades = math.log10(cfg.tau_max / cfg.tau_min)
        n = max(2, int(round(decades * cfg.points_per_decade)) + 1)
        taus = np.logspace(math.log10(cfg.tau_min), math.log10(cfg.tau_max), n)
        out.write("tau,effective_rate\n")
        for tau, rate in zeno_scan(WellSystem(cfg.delta, cfg.epsilon), taus):
            out.write(f"{_fmt(tau)},{_fmt(rate)}\n")
    elif scenario == "scoop-box":
        trace = scoop_box_experiment(cfg.n_particles, cfg.delta, cfg.epsilon, _protocol(cfg),
                                     mode=cfg.mode, seed=cfg.seed, workers=cfg.workers)
        out.write(",".join(TRACE_COLUMNS) + "\n")
        _trace_rows(out, trace, cfg.record_stride)
    elif scenario == "mutation":
        result = adaptive_mutation_run(
            cfg.gamma_thermal, cfg.gamma_lactose, WellSystem(cfg.delta, cfg.epsilon),
            t_max=cfg.t_max, n_particles=cfg.n_particles, mode=cfg.mode, seed=cfg.seed,
            workers=cfg.workers, minus_arm=cfg.minus_arm)
        out.write(",".join(TRACE_COLUMNS) + "\n")
        for arm in ("minus", "plus"):
            out.write(f"# arm={arm}\n")
            _trace_rows(out, result.traces[arm], cfg.record_stride)
        out.write(f"# rate_minus={_fmt(result.rate_minus)}, rate_plus={_fmt(result.rate_plus)}, "
                  f"enhancement={_fmt(result.enhancement)}, predicted={_fmt(result.predicted)}\n")
    elif scenario == "alpha-decay":
        reversible, absorbing = alpha_decay_compare(
            WellSystem(cfg.delta, cfg.epsilon), cfg.gamma_thermal, cfg.t_max, dt=cfg.dt)
        out.write(",".join(TRACE_COLUMNS) + "\n")
        for arm, trace in (("reversible", reversible), ("absorbing", absorbing)):
            out.write(f"# arm={arm}\n")
            _trace_rows(out, trace, cfg.record_stride)
        out.write(f"# plateau_pop_y={_fmt(reversible.pop_y[-1])}, "
                  f"late_slope={_fmt(late_window_slope(reversible))}, "
                  f"absorbing_rate={_fmt(fit_exponential_rate(absorbing))}\n")
    else:  # pragma: no cover - rejected during parsing
        raise ConfigError("scenario", f"unknown scenario {scenario!r}")


def run(cfg, stdout=None):
    """Execute a resolved config and write the table; returns the exit code."""
    stdout = stdout if stdout is not None else sys.stdout
    buf = io.StringIO()
    try:
        _emit(cfg, buf)
    except (ConfigError, RegimeError) as exc:
        print(f"scoopsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceDriftError, DensityMatrixError, FitError, FloatingPointError) as exc:
        print(f"scoopsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = buf.getvalue()
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"scoopsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"scoopsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""
Configuration loading for RiskTrack

One YAML document with sections app, logging, system, sweep, sim,
trajectories and output. Matrices are nested row-major lists (a scalar is
a 1x1 block); `system: {preset: basic, d: 2}` builds the integrator example.
"""

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import yaml

from src.errors import ConfigError
from src.model.system import MATRIX_FIELDS, PRESETS, SystemSpec, basic_example
from src.simulation.simulator import EVADER_MODES, SimConfig
from src.utils.logger import setup_logger

logger = setup_logger("config")

CONFIG_ENV = "RISKTRACK_CONFIG"
DEFAULT_CONFIG = Path(__file__).resolve().parents[2] / "config.yaml"

MEASUREMENT_MODES = ("perfect", "imperfect")
SOLVERS = ("auto", "structured", "dense")
FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class LoggingConfig:
    level: str = "WARNING"
    file: Optional[str] = None


@dataclass(frozen=True)
class SweepConfig:
    """Grid for sweep-n and theta-star; rows are the product n × θ × ε × mode"""
    n: Tuple[int, ...] = tuple(range(1, 9))
    theta: Tuple[float, ...] = (0.0,)
    epsilon: Tuple[float, ...] = (0.0,)
    modes: Tuple[str, ...] = ("perfect",)
    monte_carlo: bool = False
    solver: str = "auto"
    workers: int = 4
    tolerance: float = 1e-6


@dataclass(frozen=True)
class TrajectoryConfig:
    """
    Trajectory runs: θ̄ = fraction·θ*(n) (perfect) or fraction·θ_I*(n)
    (imperfect) unless theta_bar is set. Agents start at x̄₀ unless
    sample_initial_state draws x₀ from N(x̄₀, Σ₀). epsilon replaces the
    system's pursuer noise scale for these runs.
    """
    n: int = 4
    measurement: str = "perfect"
    epsilon: float = 0.0
    theta_bar: Optional[float] = None
    fraction: float = 0.8
    evader_mode: str = "frozen"
    sample_initial_state: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemSpec = field(default_factory=basic_example)
    app_name: str = "RiskTrack"
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    trajectories: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form; render_config dumps exactly this"""
        sweep = dataclasses.asdict(self.sweep)
        for key in ("n", "theta", "epsilon", "modes"):
            sweep[key] = list(sweep[key])
        return {
            "app": {"name": self.app_name},
            "logging": dataclasses.asdict(self.logging),
            "system": self.system.to_dict(),
            "sweep": sweep,
            "sim": dataclasses.asdict(self.sim),
            "trajectories": dataclasses.asdict(self.trajectories),
            "output": dataclasses.asdict(self.output),
        }


def _mapping(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping", field=name)
    return value


def _reject_unknown(section: Dict[str, Any], name: str, allowed):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'", field=f"{name}.{key}" if name else str(key))


def _convert(value, cast: Callable, path: str):
    if isinstance(value, bool) != (cast is bool):
        raise ConfigError(f"expected {cast.__name__}, got {value!r}", field=path)
    try:
        converted = cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {cast.__name__}, got {value!r}", field=path) from None
    if cast is int and converted != value:
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    return converted


def _sequence(value, cast: Callable, path: str) -> Tuple:
    items = value if isinstance(value, (list, tuple)) else [value]
    return tuple(_convert(item, cast, f"{path}[{i}]") for i, item in enumerate(items))


def _choice(value, choices, path: str) -> str:
    if value not in choices:
        raise ConfigError(f"must be one of {', '.join(choices)}, got {value!r}", field=path)
    return value


def _build_system(section: Dict[str, Any]) -> SystemSpec:
    if not section:
        return basic_example()
    if "preset" in section:
        _reject_unknown(section, "system", ("preset", "d", "epsilon"))
        preset = _choice(section["preset"], tuple(PRESETS), "system.preset")
        d = _convert(section.get("d", 1), int, "system.d")
        epsilon = _convert(section.get("epsilon", 0.0), float, "system.epsilon")
    else:
        _reject_unknown(section, "system", MATRIX_FIELDS + ("epsilon",))
    try:
        if "preset" in section:
            return PRESETS[preset](d=d, epsilon=epsilon)
        return SystemSpec.from_dict(section)
    except ConfigError as e:
        raise ConfigError(e.message, field=f"system.{e.field}" if e.field else "system") from None


def _build_sweep(section: Dict[str, Any]) -> SweepConfig:
    _reject_unknown(section, "sweep", [f.name for f in dataclasses.fields(SweepConfig)])
    defaults = SweepConfig()
    n = section.get("n", list(defaults.n))
    if isinstance(n, dict):
        _reject_unknown(n, "sweep.n", ("min", "max"))
        low = _convert(n.get("min", 1), int, "sweep.n.min")
        high = _convert(n.get("max", low), int, "sweep.n.max")
        n_values = tuple(range(low, high + 1))
    else:
        n_values = _sequence(n, int, "sweep.n")
    if not n_values or min(n_values) < 1:
        raise ConfigError("n values must be integers >= 1", field="sweep.n")
    epsilons = _sequence(section.get("epsilon", list(defaults.epsilon)), float, "sweep.epsilon")
    if any(not eps >= 0 for eps in epsilons):
        raise ConfigError("epsilon values must be >= 0", field="sweep.epsilon")
    modes = _sequence(section.get("modes", list(defaults.modes)), str, "sweep.modes")
    for i, mode in enumerate(modes):
        _choice(mode, MEASUREMENT_MODES, f"sweep.modes[{i}]")
    workers = _convert(section.get("workers", defaults.workers), int, "sweep.workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1", field="sweep.workers")
    tolerance = _convert(section.get("tolerance", defaults.tolerance), float, "sweep.tolerance")
    if not tolerance > 0:
        raise ConfigError("tolerance must be > 0", field="sweep.tolerance")
    return SweepConfig(
        n=n_values,
        theta=_sequence(section.get("theta", list(defaults.theta)), float, "sweep.theta"),
        epsilon=epsilons,
        modes=modes,
        monte_carlo=_convert(section.get("monte_carlo", defaults.monte_carlo), bool,
                             "sweep.monte_carlo"),
        solver=_choice(section.get("solver", defaults.solver), SOLVERS, "sweep.solver"),
        workers=workers,
        tolerance=tolerance,
    )


def _build_sim(section: Dict[str, Any]) -> SimConfig:
    _reject_unknown(section, "sim", [f.name for f in dataclasses.fields(SimConfig)])
    casts = {"dt": float, "horizon": float, "trials": int, "seed": int, "evader_mode": str,
             "record_every": int, "burn_in": float, "measurement_noise": bool,
             "track_x_tilde": bool, "overflow_guard": float, "batch_size": int,
             "chunk_steps": int}
    values = {key: None if value is None and key == "burn_in" else
              _convert(value, casts[key], f"sim.{key}") for key, value in section.items()}
    return SimConfig(**values)


def _build_trajectories(section: Dict[str, Any]) -> TrajectoryConfig:
    _reject_unknown(section, "trajectories", [f.name for f in dataclasses.fields(TrajectoryConfig)])
    defaults = TrajectoryConfig()
    n = _convert(section.get("n", defaults.n), int, "trajectories.n")
    if n < 1:
        raise ConfigError("n must be >= 1", field="trajectories.n")
    epsilon = _convert(section.get("epsilon", defaults.epsilon), float, "trajectories.epsilon")
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise ConfigError("epsilon must be finite and >= 0", field="trajectories.epsilon")
    theta_bar = section.get("theta_bar")
    fraction = _convert(section.get("fraction", defaults.fraction), float, "trajectories.fraction")
    if not 0 < fraction < 1:
        raise ConfigError("fraction must lie in (0, 1)", field="trajectories.fraction")
    return TrajectoryConfig(
        n=n,
        measurement=_choice(section.get("measurement", defaults.measurement), MEASUREMENT_MODES,
                            "trajectories.measurement"),
        epsilon=epsilon,
        theta_bar=None if theta_bar is None else _convert(theta_bar, float, "trajectories.theta_bar"),
        fraction=fraction,
        evader_mode=_choice(section.get("evader_mode", defaults.evader_mode), EVADER_MODES,
                            "trajectories.evader_mode"),
        sample_initial_state=_convert(section.get("sample_initial_state", defaults.sample_initial_state),
                                      bool, "trajectories.sample_initial_state"),
    )


def _build(data: Dict[str, Any]) -> ExperimentConfig:
    _reject_unknown(data, "", ("app", "logging", "system", "sweep", "sim", "trajectories", "output"))
    app = _mapping(data, "app")
    _reject_unknown(app, "app", ("name",))
    log = _mapping(data, "logging")
    _reject_unknown(log, "logging", ("level", "file"))
    output = _mapping(data, "output")
    _reject_unknown(output, "output", ("directory", "format"))
    level = str(log.get("level", "WARNING")).upper()
    return ExperimentConfig(
        system=_build_system(_mapping(data, "system")),
        app_name=str(app.get("name", "RiskTrack")),
        logging=LoggingConfig(level=_choice(level, LOG_LEVELS, "logging.level"),
                              file=log.get("file")),
        sweep=_build_sweep(_mapping(data, "sweep")),
        sim=_build_sim(_mapping(data, "sim")),
        trajectories=_build_trajectories(_mapping(data, "trajectories")),
        output=OutputConfig(directory=str(output.get("directory", "results")),
                            format=_choice(output.get("format", "csv"), FORMATS, "output.format")),
    )


def _key_lines(text: str) -> Dict[str, int]:
    """Dotted key path -> 1-based line of the key in the document"""
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)

    walk(yaml.compose(text, Loader=yaml.SafeLoader), "")
    return lines


def _locate(field_path: Optional[str], lines: Dict[str, int]) -> Optional[int]:
    path = (field_path or "").split("[")[0]
    while path:
        if path in lines:
            return lines[path]
        path = path.rpartition(".")[0]
    return None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse a YAML configuration document

    Raises:
        ConfigError: malformed YAML or invalid values, with field and line
    """
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}: malformed YAML: {getattr(e, 'problem', e)}", line=line) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")

    try:
        return _build(data)
    except ConfigError as e:
        line = e.line if e.line is not None else _locate(e.field, _key_lines(text))
        raise ConfigError(f"{source}: {e.message}", field=e.field, line=line) from None


def render_config(config: ExperimentConfig) -> str:
    """Canonical YAML form; parse_config(render_config(c)) == c"""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical rendering"""
    return hashlib.sha256(render_config(config).encode("utf-8")).hexdigest()


def find_config_path(path: Optional[str] = None) -> Path:
    """Explicit path, then $RISKTRACK_CONFIG, then config.yaml at the repo root"""
    if path:
        return Path(path)
    env = os.getenv(CONFIG_ENV)
    if env:
        return Path(env)
    return DEFAULT_CONFIG


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """
    Load and validate a configuration file

    Args:
        path: YAML file; see find_config_path for the fallbacks

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: unreadable file or invalid document
    """
    config_path = find_config_path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {config_path}: {e.strerror}") from None
    config = parse_config(text, source=str(config_path))
    logger.info(f"Loaded config from {config_path}")
    return config

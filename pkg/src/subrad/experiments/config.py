"""Strict TOML experiment configuration.

A config file has up to four tables. Every key is optional; missing keys take
per-experiment defaults (the standard sweeps). Unknown tables or
keys are errors.

    [physics]
    spacing = [0.25, 0.02]      # lambda; scalar or list
    gamma_fs = 0.1              # Gamma_1D; scalar or list
    gamma_1d = 1.0
    # omega0 = 1e8              # Gamma_1D; absent means Markovian phases

    [sweep]
    n_atoms = {start = 4, stop = 20}   # or an explicit list; stop is inclusive
    delta_d = [1e-3, 1e-5]      # lambda, one per spacing; perturbed spacing is d - delta_d
    policy = "auto"             # auto | min_decay | min_shift
    points = 961                # refined window samples
    window = 12.0               # half-width of the refined window, in units of the mode decay rate
    coarse_points = 2001        # global Fisher scan samples
    m_measurements = 100
    # detuning = {start = -3.0, stop = 3.0, points = 2001}   # spectrum only

    [disorder]
    amplitude = 0.05            # fraction of d
    realizations = 20
    base_seed = 1000

    [output]
    directory = "results"
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("decay_scaling", "spectrum", "shift", "fom_sweep", "fisher_sweep",
         "disorder_ensemble", "resolve_dd")
POLICIES = ("auto", "min_decay", "min_shift")
MAX_ATOMS = 100
MAX_GRID = 10_000
MAX_REALIZATIONS = 100
U64 = 2**64


class ConfigError(ValueError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class PhysicsConfig:
    spacing: Tuple[float, ...]
    gamma_fs: Tuple[float, ...]
    gamma_1d: float = 1.0
    omega0: Optional[float] = None


@dataclass(frozen=True)
class DetuningGrid:
    start: float
    stop: float
    points: int


@dataclass(frozen=True)
class SweepConfig:
    n_atoms: Tuple[int, ...]
    delta_d: Tuple[float, ...]
    policy: str = "auto"
    points: int = 961
    window: float = 12.0
    coarse_points: int = 2001
    m_measurements: int = 100
    detuning: Optional[DetuningGrid] = None


@dataclass(frozen=True)
class DisorderConfig:
    amplitude: float = 0.05
    realizations: int = 20
    base_seed: int = 1000


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    physics: PhysicsConfig
    sweep: SweepConfig
    disorder: DisorderConfig = field(default_factory=DisorderConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        _u64(seed, "seed")
        return dataclasses.replace(self, disorder=dataclasses.replace(self.disorder, base_seed=seed))

    def with_output(self, directory: str) -> "ExperimentConfig":
        return dataclasses.replace(self, output=OutputConfig(str(directory)))


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "decay_scaling": {"spacing": (0.25, 0.10, 0.02), "gamma_fs": (0.0, 0.1),
                      "n_atoms": tuple(range(4, 101))},
    "spectrum": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,), "n_atoms": (2, 10, 20)},
    "shift": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,), "n_atoms": (2, 10, 20)},
    "fom_sweep": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,), "n_atoms": tuple(range(5, 41))},
    "fisher_sweep": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,), "n_atoms": tuple(range(4, 21))},
    "disorder_ensemble": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,),
                          "n_atoms": (5, 6, 8, 10, 12, 16, 20, 25, 32, 40)},
    "resolve_dd": {"spacing": (0.25, 0.02), "gamma_fs": (0.1,), "n_atoms": (10, 100)},
}


def default_delta_d(spacing: float) -> float:
    return 1e-3 if spacing >= 0.1 else 1e-5


def _number(v, name, *, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name} must be finite, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{name} = {v!r} is below its allowed range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"{name} = {v!r} is above its allowed range")
    return v


def _integer(v, name, lo=None, hi=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{name} = {v!r} is outside [{lo}, {hi}]")
    return v


def _u64(v, name) -> int:
    return _integer(v, name, 0, U64 - 1)


def _numbers(v, name, **kw) -> Tuple[float, ...]:
    items = v if isinstance(v, list) else [v]
    if not items:
        raise ConfigError(f"{name} must not be empty")
    return tuple(_number(x, f"{name}[{i}]", **kw) for i, x in enumerate(items))


def _take(table: Dict[str, Any], allowed, where: str) -> Dict[str, Any]:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    return table


def _n_atoms(v) -> Tuple[int, ...]:
    if isinstance(v, dict):
        _take(v, ("start", "stop", "step"), "sweep.n_atoms")
        if "start" not in v or "stop" not in v:
            raise ConfigError("sweep.n_atoms range needs start and stop")
        start = _integer(v["start"], "sweep.n_atoms.start", 1, MAX_ATOMS)
        stop = _integer(v["stop"], "sweep.n_atoms.stop", 1, MAX_ATOMS)
        step = _integer(v.get("step", 1), "sweep.n_atoms.step", 1)
        ns = tuple(range(start, stop + 1, step))
    elif isinstance(v, list):
        ns = tuple(_integer(x, f"sweep.n_atoms[{i}]", 1, MAX_ATOMS) for i, x in enumerate(v))
    else:
        ns = (_integer(v, "sweep.n_atoms", 1, MAX_ATOMS),)
    if not ns:
        raise ConfigError("sweep.n_atoms selects no atom numbers")
    if len(set(ns)) != len(ns):
        raise ConfigError("sweep.n_atoms contains duplicates")
    return ns


def from_dict(kind: str, data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed TOML tree for experiment ``kind``."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    _take(data, ("kind", "physics", "sweep", "disorder", "output"), "top level")
    if "kind" in data and data["kind"] != kind:
        raise ConfigError(f"config is for {data['kind']!r} but the {kind!r} experiment was requested")
    dflt = DEFAULTS[kind]

    ph = _take(data.get("physics", {}), ("spacing", "gamma_fs", "gamma_1d", "omega0"), "physics")
    spacing = _numbers(ph.get("spacing", list(dflt["spacing"])), "physics.spacing",
                       lo=0.0, hi=0.5, lo_open=True, hi_open=True)
    gamma_fs = _numbers(ph.get("gamma_fs", list(dflt["gamma_fs"])), "physics.gamma_fs", lo=0.0)
    gamma_1d = _number(ph.get("gamma_1d", 1.0), "physics.gamma_1d", lo=0.0, lo_open=True)
    omega0 = ph.get("omega0")
    if omega0 is not None:
        omega0 = _number(omega0, "physics.omega0", lo=0.0, lo_open=True)
    physics = PhysicsConfig(spacing, gamma_fs, gamma_1d, omega0)

    sw = _take(data.get("sweep", {}), ("n_atoms", "delta_d", "policy", "points", "window",
                                      "coarse_points", "m_measurements", "detuning"), "sweep")
    ns = _n_atoms(sw.get("n_atoms", list(dflt["n_atoms"])))
    if "delta_d" in sw:
        dd = _numbers(sw["delta_d"], "sweep.delta_d", lo=0.0, lo_open=True)
        if len(dd) == 1:
            dd = dd * len(spacing)
        if len(dd) != len(spacing):
            raise ConfigError("sweep.delta_d needs one value or one per spacing")
    else:
        dd = tuple(default_delta_d(d) for d in spacing)
    for d, x in zip(spacing, dd):
        if x >= d:
            raise ConfigError(f"sweep.delta_d = {x!r} is not smaller than spacing {d!r}")
    policy = sw.get("policy", "auto")
    if policy not in POLICIES:
        raise ConfigError(f"sweep.policy must be one of {', '.join(POLICIES)}, got {policy!r}")
    detuning = None
    if "detuning" in sw:
        dt = _take(sw["detuning"], ("start", "stop", "points"), "sweep.detuning")
        if not {"start", "stop", "points"} <= set(dt):
            raise ConfigError("sweep.detuning needs start, stop and points")
        detuning = DetuningGrid(_number(dt["start"], "sweep.detuning.start"),
                                _number(dt["stop"], "sweep.detuning.stop"),
                                _integer(dt["points"], "sweep.detuning.points", 2, MAX_GRID))
        if detuning.stop <= detuning.start:
            raise ConfigError("sweep.detuning.stop must exceed start")
    sweep = SweepConfig(
        ns, dd, policy,
        _integer(sw.get("points", 961), "sweep.points", 201, MAX_GRID),
        _number(sw.get("window", 12.0), "sweep.window", lo=10.5),
        _integer(sw.get("coarse_points", 2001), "sweep.coarse_points", 2, MAX_GRID),
        _integer(sw.get("m_measurements", 100), "sweep.m_measurements", 1),
        detuning,
    )

    dis = _take(data.get("disorder", {}), ("amplitude", "realizations", "base_seed"), "disorder")
    disorder = DisorderConfig(
        _number(dis.get("amplitude", 0.05), "disorder.amplitude", lo=0.0, hi=0.5, hi_open=True),
        _integer(dis.get("realizations", 20), "disorder.realizations", 2, MAX_REALIZATIONS),
        _u64(dis.get("base_seed", 1000), "disorder.base_seed"),
    )
    if disorder.base_seed + disorder.realizations > U64:
        raise ConfigError("disorder.base_seed + realizations overflows the 64-bit seed range")

    out = _take(data.get("output", {}), ("directory",), "output")
    directory = out.get("directory", "results")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a non-empty string")
    return ExperimentConfig(kind, physics, sweep, disorder, OutputConfig(directory))


def parse_override(assignment: str) -> Tuple[Tuple[str, ...], Any]:
    """``section.key=VALUE`` with VALUE in TOML syntax, e.g. ``sweep.n_atoms=[4,5,6]``."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form section.key=VALUE")
    key, raw = assignment.split("=", 1)
    parts = tuple(p.strip() for p in key.strip().split("."))
    if not all(parts):
        raise ConfigError(f"malformed override key {key!r}")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()  # bare words such as policy names
    return parts, value


def apply_overrides(data: Dict[str, Any], overrides) -> Dict[str, Any]:
    for assignment in overrides:
        parts, value = parse_override(assignment)
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {assignment!r} descends into a non-table")
        node[parts[-1]] = value
    return data


def load_config(kind: str, path=None, overrides=()) -> ExperimentConfig:
    data: Dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}", str(p))
        try:
            with p.open("rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}", str(p)) from exc
    try:
        return from_dict(kind, apply_overrides(data, overrides))
    except ConfigError as exc:
        if exc.path is None and path is not None:
            exc.path = str(path)
        raise

"""Experiment configuration: flat ``key = value`` text with dotted sections.

Example::

    kernel.type = exponential
    kernel.g0 = 0.4
    kernel.eta = 1.0
    problem.p = 2.5
    grid.n = 128
    init.amplitude = 5

Blank lines and ``#`` comments are ignored. Unknown keys, malformed lines and
out-of-range values are reported with their line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .kernels import KernelError, RelaxationKernel, load_tabulated_kernel, make_kernel
from .weighted_space import Grid

KERNEL_TYPES = ("zero", "exponential", "polynomial", "logmixed", "tabulated")
INIT_FAMILIES = ("quadratic", "quartic", "custom")
XI_TYPES = ("auto", "constant", "powerlaw", "logmixed")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class KernelConfig:
    type: str = "exponential"
    g0: float = 0.4
    eta: float = 1.0
    c0: float = 0.3
    q: float = 3.0
    r: float = 1.25
    scale: float = 1.0
    table_path: str = ""


@dataclass
class ProblemConfig:
    p: float = 2.5
    a: float = 0.1
    source: bool = True


@dataclass
class GridConfig:
    ell: float = 1.0
    n: int = 128


@dataclass
class TimeConfig:
    dt: float = 0.0  # 0 selects CFL * h
    T: float = 1.0
    record_every: int = 1
    adaptive: bool = False


@dataclass
class InitConfig:
    family: str = "quadratic"
    amplitude: float = 1.0
    velocity_scale: float = 0.0
    path: str = ""


@dataclass
class AnalysisConfig:
    delta: float = math.nan  # nan selects the default rule
    blowup_threshold_ratio: float = 1e8
    fit_t0: float = 1.0
    seed: int = 20240607
    xi: str = "auto"
    xi_value: float = 1.0
    xi_m: float = 0.2
    xi_scale: float = 1.0
    fit_r: float = math.nan  # nan takes r from the kernel


@dataclass
class OutputConfig:
    dir: str = "out"


@dataclass
class ExperimentConfig:
    kernel: KernelConfig = field(default_factory=KernelConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    init: InitConfig = field(default_factory=InitConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def make_grid(self) -> Grid:
        return Grid(self.grid.ell, self.grid.n)

    def make_kernel(self) -> RelaxationKernel:
        k = self.kernel
        if k.type == "zero":
            return make_kernel("zero")
        if k.type == "exponential":
            return make_kernel("exponential", g0=k.g0, eta=k.eta)
        if k.type == "polynomial":
            return make_kernel("polynomial", c0=k.c0, q=k.q)
        if k.type == "logmixed":
            return make_kernel("logmixed", r=k.r, scale=k.scale)
        return load_tabulated_kernel(k.table_path)

    @property
    def delta(self) -> float | None:
        return None if math.isnan(self.analysis.delta) else self.analysis.delta

    @property
    def dt(self) -> float:
        return self.time.dt if self.time.dt > 0 else 0.5 * self.grid.ell / self.grid.n

    def to_text(self) -> str:
        """Normalized text: every key, sections in fixed order, shortest round-trip floats."""
        lines = []
        for sec in fields(self):
            obj = getattr(self, sec.name)
            for f in fields(obj):
                lines.append(f"{sec.name}.{f.name} = {_fmt(getattr(obj, f.name))}")
        return "\n".join(lines) + "\n"

    def validate(self) -> None:
        _validate(self, {})


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(raw: str, kind, line: int, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}", line) from None


_TYPES = {"float": float, "int": int, "bool": bool, "str": str}


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    lines_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"key {key!r} must look like section.name", lineno)
        sec, name = key.split(".")
        obj = getattr(cfg, sec, None) if sec in {f.name for f in fields(cfg)} else None
        if obj is None:
            raise ConfigError(f"unknown section {sec!r}", lineno)
        ftypes = {f.name: f.type for f in fields(obj)}
        if name not in ftypes:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in lines_of:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines_of[key]})", lineno)
        lines_of[key] = lineno
        setattr(obj, name, _coerce(value, _TYPES[ftypes[name]], lineno, key))
    _validate(cfg, lines_of)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _validate(cfg: ExperimentConfig, lines_of: dict) -> None:
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", lines_of.get(key))

    p = cfg.problem.p
    if not (2.0 < p < 3.0):
        fail("problem.p", f"p={p} violates 2 < p < 3")
    if not cfg.problem.a >= 0:
        fail("problem.a", "damping a must be >= 0")
    if cfg.kernel.type not in KERNEL_TYPES:
        fail("kernel.type", f"unknown kernel type {cfg.kernel.type!r}, choose from {', '.join(KERNEL_TYPES)}")
    if cfg.kernel.type == "tabulated" and not cfg.kernel.table_path:
        fail("kernel.table_path", "tabulated kernel needs a table path")
    if cfg.grid.ell <= 0:
        fail("grid.ell", "ell must be positive")
    if cfg.grid.n < 8:
        fail("grid.n", "n must be >= 8")
    if cfg.time.T <= 0:
        fail("time.T", "horizon T must be positive")
    if cfg.time.dt < 0:
        fail("time.dt", "dt must be >= 0 (0 selects the CFL step)")
    if cfg.time.dt > 0.5 * cfg.grid.ell / cfg.grid.n * (1 + 1e-12):
        fail("time.dt", f"dt={cfg.time.dt} violates dt <= 0.5 h = {0.5 * cfg.grid.ell / cfg.grid.n}")
    if cfg.time.record_every < 1:
        fail("time.record_every", "record_every must be >= 1")
    if cfg.init.family not in INIT_FAMILIES:
        fail("init.family", f"unknown family {cfg.init.family!r}, choose from {', '.join(INIT_FAMILIES)}")
    if cfg.init.family == "custom" and not cfg.init.path:
        fail("init.path", "custom initial data need a CSV path")
    delta = cfg.analysis.delta
    if not math.isnan(delta) and delta >= 1:
        fail("analysis.delta", "delta must be < 1")
    if not cfg.analysis.blowup_threshold_ratio > 1:
        fail("analysis.blowup_threshold_ratio", "threshold ratio must exceed 1")
    if cfg.analysis.fit_t0 < 0:
        fail("analysis.fit_t0", "fit start must be >= 0")
    if cfg.analysis.xi not in XI_TYPES:
        fail("analysis.xi", f"unknown xi {cfg.analysis.xi!r}, choose from {', '.join(XI_TYPES)}")
    try:
        l = cfg.make_kernel().l  # noqa: E741
    except (KernelError, OSError, ValueError) as exc:
        fail("kernel.type", str(exc))
    if not (0.0 < l <= 1.0):
        fail("kernel.type", f"kernel mass {1 - l} leaves l = {l} outside (0, 1]")

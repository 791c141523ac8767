"""Scenario configuration files.

INI-style sections, every key optional (defaults reproduce the baseline
scenario T=5, nu=1, I=1, c=0.1, r=10%, alpha=5%, sigma=20%)::

    [market]
    alpha = 0.05
    sigma = 0.20
    r = 0.10

    [project]
    invest_cost = 1.0
    op_cost = 0.1
    lifetime = 5
    lead_time = 1
    flexible = true

    [solver]
    grid_count = 500
    eps_target = 1e-3
    k_max = 200
    quad_nodes = 64

    [benchmark]          ; large-scale scenario for the contour command
    invest_cost = 1.0
    lifetime = 25
    lead_time = 5

    [contour]
    lifetimes = 0.5, 1, 2.5, 5
    lead_times = 0, 0.3, 1, 3
    tol = 0.01
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .gbm_model import MarketModel
from .reward import ProjectSpec

__all__ = ["ConfigError", "SolverOptions", "ContourOptions", "ScenarioConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    grid_count: int = 500
    eps_target: float = 1e-3
    k_max: int = 200
    quad_nodes: int = 64

    def __post_init__(self) -> None:
        if self.grid_count < 3:
            raise ValueError("grid_count must be at least 3")
        if not self.eps_target > 0.0:
            raise ValueError("eps_target must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.quad_nodes < 1:
            raise ValueError("quad_nodes must be positive")


@dataclass(frozen=True)
class ContourOptions:
    lifetimes: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)
    lead_times: tuple[float, ...] = (0.0, 0.3, 0.5, 1.0, 1.5, 2.0, 3.0)
    tol: float = 1e-2

    def __post_init__(self) -> None:
        if not self.lifetimes or not self.lead_times:
            raise ValueError("lifetimes and lead_times must be nonempty")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    market: MarketModel = field(default_factory=lambda: MarketModel(alpha=0.05, sigma=0.20, r=0.10))
    project: ProjectSpec = field(
        default_factory=lambda: ProjectSpec(invest_cost=1.0, op_cost=0.1, lifetime=5.0, lead_time=1.0)
    )
    solver: SolverOptions = field(default_factory=SolverOptions)
    benchmark: ProjectSpec = field(
        default_factory=lambda: ProjectSpec(invest_cost=1.0, op_cost=0.1, lifetime=25.0, lead_time=5.0)
    )
    contour: ContourOptions = field(default_factory=ContourOptions)


_FLOAT_LIST = "float_list"
_SCHEMA: dict[str, dict[str, object]] = {
    "market": {"alpha": float, "sigma": float, "r": float},
    "project": {"invest_cost": float, "op_cost": float, "lifetime": float, "lead_time": float, "flexible": bool},
    "solver": {"grid_count": int, "eps_target": float, "k_max": int, "quad_nodes": int},
    "benchmark": {"invest_cost": float, "lifetime": float, "lead_time": float, "flexible": bool},
    "contour": {"lifetimes": _FLOAT_LIST, "lead_times": _FLOAT_LIST, "tol": float},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s;#][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    where: dict[tuple[str, str | None], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), lineno)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), lineno)
    return where


def _convert(raw: str, kind):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == _FLOAT_LIST:
        items = [s for s in re.split(r"[,\s]+", raw.strip()) if s]
        if not items:
            raise ValueError("expected a comma-separated list of numbers")
        return tuple(float(s) for s in items)
    if kind is int:
        return int(raw.strip())
    return float(raw.strip())


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_index(text)

    def loc(section: str, key: str | None = None) -> str:
        line = lines.get((section, key)) or lines.get((section, None))
        return f"{source}:{line}" if line else source

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{loc(section)}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{loc(section, key)}: unknown key '{key}' in [{section}]")
            try:
                values[section][key] = _convert(raw, _SCHEMA[section][key])
            except ValueError as exc:
                raise ConfigError(f"{loc(section, key)}: {section}.{key}: {exc}") from exc

    def build(section: str, base):
        fields = values.get(section, {})
        try:
            return replace(base, **fields)
        except ValueError as exc:
            # name the first offending field mentioned in the message
            bad = next((k for k in fields if k in str(exc)), None)
            raise ConfigError(f"{loc(section, bad)}: [{section}] {exc}") from exc

    default = ScenarioConfig()
    market = build("market", default.market)
    project = build("project", default.project)
    # the benchmark shares the operating cost with the project
    bench_base = replace(default.benchmark, op_cost=project.op_cost)
    benchmark = build("benchmark", bench_base)
    return ScenarioConfig(
        market=market,
        project=project,
        solver=build("solver", default.solver),
        benchmark=benchmark,
        contour=build("contour", default.contour),
    )


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))

"""Plain-text solver configuration (key = value lines)."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .mesh import MAX_REFINE_2D, MAX_REFINE_3D
from .newton import CRANK_NICOLSON, IMPLICIT, SHIFTED_CN


@dataclass
class SolverConfig:
    benchmark: str = "fsi2"
    refine_level: int = 0
    order: int = 2
    theta: str = SHIFTED_CN
    dt: float = 0.005
    t_end: float = 0.5
    gmres_reduction: float = 1.0e3
    newton_tol: float = 1.0e-6
    qn_factor: float = 0.1
    inner_solver: str = "direct"
    schur_reduction: float = 1.0e2
    threads: int = 1
    partition_strategy: str = "shared"
    inflow_scale: float = 1.0
    output: str = ""

    def validate(self):
        if self.benchmark not in ("fsi2", "box3d"):
            raise ConfigError(f"unknown benchmark {self.benchmark!r}")
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        if self.theta not in (IMPLICIT, CRANK_NICOLSON, SHIFTED_CN):
            raise ConfigError(f"unknown theta scheme {self.theta!r}")
        limit = MAX_REFINE_2D if self.benchmark == "fsi2" else MAX_REFINE_3D
        if not 0 <= self.refine_level <= limit:
            raise ConfigError(f"refine_level must be in [0, {limit}]")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        for key in ("gmres_reduction", "newton_tol", "qn_factor", "schur_reduction"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.inner_solver not in ("direct", "ilu"):
            raise ConfigError(f"unknown inner_solver {self.inner_solver!r}")
        if self.partition_strategy not in ("shared", "split", "default"):
            raise ConfigError(f"unknown partition_strategy {self.partition_strategy!r}")
        if self.inflow_scale < 0:
            raise ConfigError("inflow_scale must be nonnegative")
        return self

    @property
    def theta_value(self) -> float:
        if self.theta == IMPLICIT:
            return 1.0
        if self.theta == CRANK_NICOLSON:
            return 0.5
        return 0.5 + self.dt


_FIELD_TYPES = {f.name: f.type for f in fields(SolverConfig)}


def parse_config(text: str) -> SolverConfig:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines allowed.

    Unknown keys, malformed lines and out-of-range values raise
    :class:`ConfigError` naming the offending line.
    """
    cfg = SolverConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind in ("int", int):
                setattr(cfg, key, int(value))
            elif kind in ("float", float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def read_config(path) -> SolverConfig:
    with open(path) as fh:
        return parse_config(fh.read())

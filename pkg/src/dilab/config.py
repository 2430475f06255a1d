"""Experiment configuration: TOML files validated by pydantic before any computation.

Every section rejects unknown keys.  Family-specific parameters of the
potential, multiplier and initial data live directly in their section next to
``family`` and are checked against the family's parameter list.
"""
from __future__ import annotations

import copy
import sys
from pathlib import Path
from typing import ClassVar, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .potential import FAMILIES as POTENTIAL_FAMILIES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Family(BaseModel):
    """Section with a ``family`` key plus that family's parameters."""

    model_config = ConfigDict(extra="allow")
    family: str

    ALLOWED: ClassVar[dict] = {}
    COMMON: ClassVar[tuple] = ()

    @model_validator(mode="after")
    def _check_family(self):
        allowed = self.ALLOWED.get(self.family)
        if allowed is None:
            raise ValueError(f"unknown family {self.family!r}; choose from {sorted(self.ALLOWED)}")
        extra = set(self.model_extra or {})
        bad = extra - set(allowed) - set(self.COMMON)
        if self.family == "rescaled":
            base = (self.model_extra or {}).get("base")
            if base not in self.ALLOWED or base == "rescaled":
                raise ValueError("rescaled multiplier needs a valid 'base' family")
            bad -= set(self.ALLOWED[base])
        if bad:
            raise ValueError(f"unknown keys for {self.family}: {sorted(bad)}")
        return self

    @property
    def params(self) -> dict:
        return dict(self.model_extra or {})


class GridConfig(_Strict):
    mode: Literal["cartesian", "radial"]
    n: int
    L: float
    N: int


class PotentialConfig(_Family):
    family: str = "zero"
    ALLOWED: ClassVar[dict] = {name: req + tuple(opt) for name, (req, opt) in POTENTIAL_FAMILIES.items()}


class MultiplierConfig(_Family):
    family: str = "japanese_bracket"
    ALLOWED: ClassVar[dict] = {
        "abs": (),
        "smoothed_abs": ("eps",),
        "japanese_bracket": (),
        "bump_integrated": ("k", "plateau", "edge"),
        "rescaled": ("base", "R"),
        "constant": ("value",),
    }
    COMMON: ClassVar[tuple] = ("scale", "offset")


class DataConfig(_Family):
    family: str = "gaussian"
    ALLOWED: ClassVar[dict] = {
        "gaussian": ("sigma", "tilt", "momentum", "center"),
        "bump": ("radius",),
        "random": ("count", "width_min", "width_max", "freq_max", "components_max", "spread"),
    }
    COMMON: ClassVar[tuple] = ("seed", "normalize")


class SweepConfig(_Strict):
    T: Optional[list[float]] = None
    R: Optional[list[float]] = None
    eps: Optional[list[float]] = None
    k: Optional[list[int]] = None
    N: Optional[list[int]] = None
    dt: Optional[list[float]] = None
    times: Optional[list[float]] = None
    dims: Optional[list[int]] = None
    scale: Optional[list[float]] = None
    steps: Optional[int] = None
    cfl: Optional[float] = None
    time_step: Optional[float] = None
    t_final: Optional[float] = None
    R_window: Optional[list[float]] = None


class ToleranceConfig(_Strict):
    residual: Optional[float] = None
    order: Optional[float] = None
    order_target: Optional[float] = None
    trend: Optional[float] = None
    tail_mass: float = 1e-6
    tail_fraction: float = 0.1
    unitarity_exact: Optional[float] = None
    unitarity_split: Optional[float] = None
    energy: Optional[float] = None
    convention: Optional[float] = None
    limit_gap: Optional[float] = None
    decay_ratio: Optional[float] = None
    plateau: Optional[float] = None
    lower_bound: Optional[float] = None
    average_ratio: Optional[float] = None
    recovery: Optional[float] = None
    stability: Optional[float] = None
    imag: Optional[float] = None
    ibp: Optional[float] = None
    roundoff: Optional[float] = None
    famboc_C: Optional[float] = None


class OutputConfig(_Strict):
    directory: str = "out"
    formats: list[Literal["json", "csv"]] = ["json", "csv"]


class ExperimentConfig(_Strict):
    experiment: str
    grid: GridConfig
    potential: PotentialConfig = PotentialConfig()
    multiplier: MultiplierConfig = MultiplierConfig()
    data: DataConfig = DataConfig()
    sweep: SweepConfig = SweepConfig()
    tolerances: ToleranceConfig = ToleranceConfig()
    output: OutputConfig = OutputConfig()

    def echo(self) -> dict:
        return self.model_dump(mode="json")

    def require(self, section: str, *keys: str):
        block = getattr(self, section)
        missing = [k for k in keys if getattr(block, k) is None]
        if missing:
            raise ConfigError(f"{self.experiment} needs [{section}] keys: {missing}")


def _coerce(text: str):
    """Parse an override value as a TOML scalar or array, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    out = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table")
        node[parts[-1]] = _coerce(value.strip())
    return out


def parse_config(raw: dict) -> ExperimentConfig:
    from .experiments import STUDIES

    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.experiment not in STUDIES:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {sorted(STUDIES)}")
    STUDIES[cfg.experiment].validate(cfg)
    return cfg


def load_config(path, overrides=None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(apply_overrides(raw, overrides))

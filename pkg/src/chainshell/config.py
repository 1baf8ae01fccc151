"""Pipeline configuration: defaults, INI-style parsing, validation, seeds.

All defaults reproduce the published constants; every stage derives its
randomness from the single top-level seed keyed by stage name.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from .errors import ConfigError

_MASK63 = (1 << 63) - 1


def derive_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage seed from the top-level seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63


@dataclass(frozen=True)
class UnitBlock:
    shape: str = "rectangular"
    member_length_mm: float = 11.0
    rod_diameter_mm: float = 1.0
    target_ratio: float = 0.08
    density_g_cm3: float = 1.38


@dataclass(frozen=True)
class Sweep2dBlock:
    shape: str = "rectangular"
    amplitude_step_mm: float = 5.0
    frequency_start: int = 3
    frequency_max: int = 10
    span_mm: float = 2000.0


@dataclass(frozen=True)
class Gen3dBlock:
    iterations: int = 20
    groups: int = 4
    span_mm: float = 2000.0
    resolution: int = 64


@dataclass(frozen=True)
class FilterBlock:
    keep: int = 4
    tolerance_mode: str = "auto"   # auto | explicit
    perimeter_tolerance_m: float = 0.0
    area_tolerance_m2: float = 0.0


@dataclass(frozen=True)
class LoadsBlock:
    plan_area_m2: float = 4.0
    thickness_m: float = 0.08
    unit_weight_kn_m3: float = 1.13
    snow_shape_factor: float = 0.8
    wind_shape_factor: float = 0.75
    solid_fraction: float = 0.08


@dataclass(frozen=True)
class FemBlock:
    elastic_modulus_pa: float = 2.1e9
    shear_modulus_pa: float = 0.78e9
    lattice_grid: int = 10
    supports: str = "boundary-fixed"   # boundary-fixed | corner-pinned


@dataclass(frozen=True)
class OptimizerBlock:
    iterations_per_anchor: int = 20
    amplitude_cap_m: float = 3.0
    amplitude_min_fraction: float = 0.5
    control_F: int = 4
    weight_cms: float = 0.4
    weight_ua: float = 0.4
    weight_lc: float = 0.1
    weight_fc: float = 0.1
    min_slope: float = 0.02
    slope_rule: str = "ponding"        # ponding | strict
    headroom_m: float = 1.5
    column_section_side_m: float = 0.05
    reduction_tolerance: float = 0.02

    @property
    def weights(self) -> Tuple[float, float, float, float]:
        return (self.weight_cms, self.weight_ua, self.weight_lc, self.weight_fc)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 7
    threads: int = 1
    unit: UnitBlock = field(default_factory=UnitBlock)
    sweep2d: Sweep2dBlock = field(default_factory=Sweep2dBlock)
    gen3d: Gen3dBlock = field(default_factory=Gen3dBlock)
    filter: FilterBlock = field(default_factory=FilterBlock)
    loads: LoadsBlock = field(default_factory=LoadsBlock)
    fem: FemBlock = field(default_factory=FemBlock)
    optimizer: OptimizerBlock = field(default_factory=OptimizerBlock)


_BLOCK_NAMES = ("unit", "sweep2d", "gen3d", "filter", "loads", "fem", "optimizer")
_SHAPES = ("triangular", "circular", "rectangular")


def validate(config: PipelineConfig) -> PipelineConfig:
    """Check cross-field invariants; raises ConfigError naming the key."""
    w = config.optimizer.weights
    if abs(sum(w) - 1.0) > 1e-9:
        raise ConfigError(f"criterion weights must sum to 1.0, got {sum(w)}",
                          key="optimizer.weight_cms")
    if config.unit.shape not in _SHAPES:
        raise ConfigError(f"unknown shape {config.unit.shape!r}", key="unit.shape")
    if config.sweep2d.shape not in _SHAPES:
        raise ConfigError(f"unknown shape {config.sweep2d.shape!r}",
                          key="sweep2d.shape")
    if not 0 < config.unit.target_ratio < 1:
        raise ConfigError("target ratio must be in (0, 1)", key="unit.target_ratio")
    if config.gen3d.iterations < 1:
        raise ConfigError("iterations must be >= 1", key="gen3d.iterations")
    if not 1 <= config.gen3d.groups <= 5:
        raise ConfigError("groups must be in 1..5", key="gen3d.groups")
    if config.filter.keep < 1:
        raise ConfigError("keep must be >= 1", key="filter.keep")
    if config.filter.tolerance_mode not in ("auto", "explicit"):
        raise ConfigError(f"unknown tolerance mode {config.filter.tolerance_mode!r}",
                          key="filter.tolerance_mode")
    if config.fem.supports not in ("boundary-fixed", "corner-pinned"):
        raise ConfigError(f"unknown support mode {config.fem.supports!r}",
                          key="fem.supports")
    if config.optimizer.slope_rule not in ("ponding", "strict"):
        raise ConfigError(f"unknown slope rule {config.optimizer.slope_rule!r}",
                          key="optimizer.slope_rule")
    if not 0 < config.optimizer.amplitude_cap_m <= 3.0:
        raise ConfigError("amplitude cap must be in (0, 3] m",
                          key="optimizer.amplitude_cap_m")
    if config.threads < 1:
        raise ConfigError("threads must be >= 1", key="threads")
    for block_name in ("loads",):
        block = getattr(config, block_name)
        for f in fields(block):
            if isinstance(getattr(block, f.name), float) and getattr(block, f.name) <= 0:
                raise ConfigError(f"{f.name} must be positive",
                                  key=f"{block_name}.{f.name}")
    return config


def _coerce(raw: str, to_type: type, key: str):
    try:
        if to_type is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return to_type(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {to_type.__name__}",
                          key=key) from None


def parse_config(text: str) -> PipelineConfig:
    """Parse flat key-value config with [section] headers.

    Unknown sections or keys are rejected with the offending name.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive (control_F)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    config = PipelineConfig()
    updates: Dict[str, object] = {}
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items("run"):
                if key == "seed":
                    updates["seed"] = _coerce(raw, int, "run.seed")
                elif key == "threads":
                    updates["threads"] = _coerce(raw, int, "run.threads")
                else:
                    raise ConfigError(f"unknown key {key!r} in [run]",
                                      key=f"run.{key}")
            continue
        if section not in _BLOCK_NAMES:
            raise ConfigError(f"unknown section [{section}]", key=section)
        block = getattr(config, section)
        block_fields = {f.name: f for f in fields(block)}
        block_updates = {}
        for key, raw in parser.items(section):
            if key not in block_fields:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  key=f"{section}.{key}")
            current = getattr(block, key)
            block_updates[key] = _coerce(raw, type(current), f"{section}.{key}")
        updates[section] = replace(block, **block_updates)
    return validate(replace(config, **updates))


def load_config(path: Optional[str]) -> PipelineConfig:
    if path is None:
        return validate(PipelineConfig())
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config: PipelineConfig) -> str:
    """Canonical text form; hashing this pins the run's configuration."""
    out = io.StringIO()
    out.write("[run]\n")
    out.write(f"seed = {config.seed}\n")
    out.write(f"threads = {config.threads}\n")
    for name in _BLOCK_NAMES:
        block = getattr(config, name)
        out.write(f"\n[{name}]\n")
        for f in fields(block):
            out.write(f"{f.name} = {getattr(block, f.name)}\n")
    return out.getvalue()


def config_hash(config: PipelineConfig) -> str:
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()

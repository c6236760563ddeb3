"""Scenario configuration: defaults, validation, JSON parsing."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

PLACEMENTS = ("uniform", "cell-edge")
LOS_MODES = ("random", "los", "nlos")
SERVING_MODES = ("per_ue", "exclusive")

# (lower, upper) inclusive bounds for the numeric fields.
_RANGES = {
    "carrier_ghz": (0.5, 100.0),
    "isd_m": (1.0, 10_000.0),
    "rings": (0, 2),
    "panels_per_sector": (0, 200),
    "panel_grid": (1, 256),
    "ue_per_sector": (0, 10_000),
    "tx_power_dbm": (-30.0, 80.0),
    "phase_bits": (1, 16),
    "failure_rate": (0.0, 1.0),
    "pairing_threshold_db": (-50.0, 50.0),
    "element_boresight_gain_dbi": (-10.0, 30.0),
    "bandwidth_mhz": (0.001, 1000.0),
    "noise_figure_db": (0.0, 30.0),
    "heatmap_step_m": (0.5, 100.0),
    "heatmap_margin_m": (0.0, 5000.0),
    "codebook_max_entries": (1, 8192),
    "seed": (0, 2**63 - 1),
}

_INT_FIELDS = {"rings", "panels_per_sector", "panel_grid", "ue_per_sector",
               "phase_bits", "codebook_max_entries", "seed"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Every tunable of the evaluation setup plus simulator-only knobs.

    Defaults reproduce the standard parameter table: 7-site hexagonal
    layout at 500 m ISD, 2.6 GHz, 46 dBm sector transmit power, 50 UEs and
    4 RIS panels per sector, 16x16 panels with 2-bit phases.
    """

    carrier_ghz: float = 2.6
    isd_m: float = 500.0
    rings: int = 1
    panels_per_sector: int = 4
    panel_grid: int = 16
    panel_placement: str = "cell-edge"
    ue_per_sector: int = 50
    ue_placement: str = "uniform"
    tx_power_dbm: float = 46.0
    phase_bits: int = 2
    failure_rate: float = 0.0
    # A panel pairs with a UE when the cascaded gain is at least this many
    # dB above the direct link. Of the two readings of the pairing rule,
    # +3 reproduces the reported panel-to-UE distance statistics better.
    pairing_threshold_db: float = 3.0
    cross_ris_interference: bool = False
    shadowing: bool = True
    near_field_exact: bool = True
    # "per_ue": every paired UE is evaluated with its best panel configured
    # toward it (the panel revisits each served UE over the drop);
    # "exclusive": a panel freezes on its single best proposer and the
    # losing UEs fall back to the direct link.
    serving_mode: str = "per_ue"
    codebook_mode: bool = False
    codebook_max_entries: int = 1024
    los_mode: str = "random"
    element_boresight_gain_dbi: float = 5.0
    bandwidth_mhz: float = 20.0
    noise_figure_db: float = 9.0
    heatmap_step_m: float = 5.0
    heatmap_margin_m: float = 60.0
    seed: int = 1

    @property
    def wavelength_m(self) -> float:
        return 299_792_458.0 / (self.carrier_ghz * 1e9)

    @property
    def noise_dbm(self) -> float:
        """Thermal noise over the configured bandwidth plus UE noise figure."""
        import math

        return -174.0 + 10.0 * math.log10(self.bandwidth_mhz * 1e6) + self.noise_figure_db

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_BOOL_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)
                if f.type == "bool" or isinstance(f.default, bool)}
_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every field against its allowed range; return cfg on success."""
    for name, (lo, hi) in _RANGES.items():
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigurationError(f"{name}: expected a number, got {value!r}")
        if name in _INT_FIELDS and int(value) != value:
            raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
        if not (lo <= value <= hi):
            raise ConfigurationError(f"{name}: {value!r} outside allowed range [{lo}, {hi}]")
    for name in _BOOL_FIELDS:
        if not isinstance(getattr(cfg, name), bool):
            raise ConfigurationError(f"{name}: expected true/false, got {getattr(cfg, name)!r}")
    if cfg.panel_placement not in PLACEMENTS:
        raise ConfigurationError(f"panel_placement: {cfg.panel_placement!r} not one of {PLACEMENTS}")
    if cfg.ue_placement not in PLACEMENTS:
        raise ConfigurationError(f"ue_placement: {cfg.ue_placement!r} not one of {PLACEMENTS}")
    if cfg.los_mode not in LOS_MODES:
        raise ConfigurationError(f"los_mode: {cfg.los_mode!r} not one of {LOS_MODES}")
    if cfg.serving_mode not in SERVING_MODES:
        raise ConfigurationError(
            f"serving_mode: {cfg.serving_mode!r} not one of {SERVING_MODES}")
    return cfg


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a validated config; unspecified fields keep their defaults."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"config root must be an object, got {type(data).__name__}")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    coerced = {}
    for key, value in data.items():
        if key in _INT_FIELDS and isinstance(value, float) and value.is_integer():
            value = int(value)
        coerced[key] = value
    try:
        cfg = ScenarioConfig(**coerced)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return validate_config(cfg)


def parse_config(path: str | Path) -> ScenarioConfig:
    """Load and validate a JSON scenario file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def _parse_literal(text: str):
    """Interpret a --set value: JSON literal if possible, else a string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: ScenarioConfig, overrides: dict[str, str]) -> ScenarioConfig:
    """Apply ``--set key=value`` pairs on top of a parsed config and re-validate."""
    merged = cfg.to_dict()
    for key, raw in overrides.items():
        merged[key] = _parse_literal(raw) if isinstance(raw, str) else raw
    return config_from_dict(merged)

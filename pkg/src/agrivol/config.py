"""Pipeline configuration: JSON file with a versioned schema.

See README for the documented schema. Unknown keys are rejected so typos
fail fast; every path is checked before any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .series import MonthStamp

CONFIG_VERSION = 1

KNOWN_SCENARIOS = ("SSP2-4.5", "SSP5-8.5")


@dataclass
class PricingConfig:
    rate: float = 0.07
    maturity_years: float = 1.0
    spot_policy: str = "hold-last"  # hold-last | linear-trend | file
    spot_path_file: str | None = None
    msp_policy: str = "hold-last"  # hold-last | growth
    msp_growth: float = 0.0  # annual rate when msp_policy == growth
    vol_floor: float = 1e-6


@dataclass
class PipelineConfig:
    dataset_dir: str
    out_dir: str = "out"
    seed: int = 0
    crop: str = ""
    state: str = ""
    egarch_orders: tuple[int, int, int] | str = (1, 1, 1)  # or "auto"
    egarch_max_order: int = 2
    sarimax_orders: tuple[int, int, int, int, int, int, int] | str = (1, 0, 1, 1, 0, 1, 12)
    sarimax_grid: dict = field(
        default_factory=lambda: {"p": (0, 1), "q": (0, 1), "P": (0, 1), "Q": (0, 1)}
    )
    validation_fraction: float = 0.2
    exog_variables: tuple[str, ...] = ("tasmax", "pr")
    exog_anomalies: bool = False
    log_volatility: bool = False
    scenarios: tuple[str, ...] = KNOWN_SCENARIOS
    pricing: PricingConfig = field(default_factory=PricingConfig)
    smoothing_window: int = 25
    forecast_end: str = "2100-12"
    price_band_window: int = 20
    price_band_k: float = 2.0
    climate_band_window: int = 12
    climate_band_k: float = 1.0
    average_duplicate_prices: bool = False
    config_version: int = CONFIG_VERSION

    def validate(self) -> None:
        if self.config_version != CONFIG_VERSION:
            raise ConfigError(
                f"config_version {self.config_version} unsupported; expected {CONFIG_VERSION}"
            )
        d = Path(self.dataset_dir)
        for name in ("prices.csv", "msp.csv", "climate.csv", "manifest.json"):
            if not (d / name).exists():
                raise ConfigError(f"dataset file missing: {d / name}")
        if not 0.0 < self.validation_fraction <= 0.5:
            raise ConfigError(
                f"validation_fraction must be in (0, 0.5], got {self.validation_fraction}"
            )
        unknown = [s for s in self.scenarios if s not in KNOWN_SCENARIOS]
        if unknown:
            raise ConfigError(f"unknown scenarios {unknown}; allowed: {list(KNOWN_SCENARIOS)}")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if self.egarch_orders != "auto":
            if len(self.egarch_orders) != 3 or any(o < 0 for o in self.egarch_orders):
                raise ConfigError(f"egarch_orders must be (p, o, q) or 'auto'")
        if self.sarimax_orders != "auto" and len(self.sarimax_orders) != 7:
            raise ConfigError("sarimax_orders must be (p, m, q, P, M, Q, s) or 'auto'")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError("smoothing_window must be odd and >= 1")
        try:
            MonthStamp.parse(self.forecast_end)
        except ValueError as e:
            raise ConfigError(f"forecast_end: {e}") from None
        if self.pricing.maturity_years <= 0:
            raise ConfigError("pricing.maturity_years must be positive")
        if self.pricing.vol_floor <= 0:
            raise ConfigError("pricing.vol_floor must be positive")
        if self.pricing.spot_policy not in ("hold-last", "linear-trend", "file"):
            raise ConfigError(f"unknown spot_policy {self.pricing.spot_policy!r}")
        if self.pricing.spot_policy == "file":
            if not self.pricing.spot_path_file:
                raise ConfigError("spot_policy 'file' requires spot_path_file")
            if not Path(self.pricing.spot_path_file).exists():
                raise ConfigError(f"spot_path_file missing: {self.pricing.spot_path_file}")
        if self.pricing.msp_policy not in ("hold-last", "growth"):
            raise ConfigError(f"unknown msp_policy {self.pricing.msp_policy!r}")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        doc = asdict(self)
        for key in ("egarch_orders", "sarimax_orders", "exog_variables", "scenarios"):
            if isinstance(doc[key], tuple):
                doc[key] = list(doc[key])
        return doc


_PRICING_KEYS = set(PricingConfig.__dataclass_fields__)
_TOP_KEYS = set(PipelineConfig.__dataclass_fields__)


def config_from_dict(doc: dict) -> PipelineConfig:
    doc = dict(doc)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "dataset_dir" not in doc:
        raise ConfigError("config requires dataset_dir")
    pricing_doc = doc.pop("pricing", {})
    if not isinstance(pricing_doc, dict):
        raise ConfigError("pricing must be an object")
    unknown = set(pricing_doc) - _PRICING_KEYS
    if unknown:
        raise ConfigError(f"unknown pricing keys: {sorted(unknown)}")
    for key in ("egarch_orders", "sarimax_orders", "exog_variables", "scenarios"):
        if key in doc and isinstance(doc[key], list):
            doc[key] = tuple(doc[key])
    if "sarimax_grid" in doc and isinstance(doc["sarimax_grid"], dict):
        doc["sarimax_grid"] = {k: tuple(v) for k, v in doc["sarimax_grid"].items()}
    try:
        cfg = PipelineConfig(pricing=PricingConfig(**pricing_doc), **doc)
    except TypeError as e:
        raise ConfigError(f"bad config value: {e}") from None
    return cfg


def load_config(path) -> PipelineConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    cfg = config_from_dict(doc)
    # Paths in the config file are relative to the file's directory.
    base = p.parent
    cfg.dataset_dir = str((base / cfg.dataset_dir).resolve())
    if not Path(cfg.out_dir).is_absolute():
        cfg.out_dir = str((base / cfg.out_dir).resolve())
    if cfg.pricing.spot_path_file:
        cfg.pricing.spot_path_file = str((base / cfg.pricing.spot_path_file).resolve())
    return cfg

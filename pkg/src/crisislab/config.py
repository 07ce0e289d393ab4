"""Run configuration: one JSON/TOML file, CLI flags win on conflict.

A run manifest (the JSON a finished command writes next to its outputs)
embeds the fully resolved config under a ``config`` key and is itself
accepted wherever a config file is, which is how a run is reproduced
bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

PRESETS = {
    # built-in operator parameter groups
    "group1": {"mdd_threshold": 0.20, "sensitivity": 75},
    "group2": {"mdd_threshold": 0.15, "sensitivity": 80},
    "group3": {"mdd_threshold": 0.10, "sensitivity": 70},
}


@dataclass
class RunConfig:
    output_dir: str = "run"
    dataset_manifest: str | None = None
    scenario_file: str | None = None
    scenario: dict | None = None

    mdd_threshold: float = 0.10
    sensitivity: int = 70
    horizon: int = 100

    replications: int = 200
    reference_seed: int = 0
    reference_rho_scope: str = "in_sample"   # in_sample | full_sample
    hellinger_mode: str = "mass"             # mass | density
    dump_spectra: bool = False

    sharpe_convention: str = "paper"         # paper | daily
    execution_lag_days: int = 0
    initial_cash: float = 10_000_000.0
    initial_shares: int = 10_000

    rsp_paths: int = 50_000
    rsp_seed: int = 0
    rsp_mode: str = "iid"                    # iid | permutation
    rsp_metrics_csv: bool = False
    fan_sample_paths: int = 2_000

    threads: int = 1

    def __post_init__(self):
        if not 0 < self.mdd_threshold < 1:
            raise ValueError("mdd_threshold must be in (0, 1)")
        if not 0 <= self.sensitivity <= 100:
            raise ValueError("sensitivity must be in [0, 100]")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.reference_rho_scope not in ("in_sample", "full_sample"):
            raise ValueError("reference_rho_scope must be in_sample or full_sample")
        if self.hellinger_mode not in ("mass", "density"):
            raise ValueError("hellinger_mode must be mass or density")
        if self.sharpe_convention not in ("paper", "daily"):
            raise ValueError("sharpe_convention must be paper or daily")
        if self.rsp_mode not in ("iid", "permutation"):
            raise ValueError("rsp_mode must be iid or permutation")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def to_jsonable(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canonical = json.dumps(self.to_jsonable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                preset: str | None = None) -> RunConfig:
    """Read a config (or run-manifest) file and apply preset + overrides."""
    payload: dict = {}
    if path is not None:
        path = Path(path)
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                payload = tomllib.load(fh)
        else:
            with open(path) as fh:
                payload = json.load(fh)
        if "config" in payload and isinstance(payload["config"], dict):
            payload = payload["config"]  # a run manifest was supplied
    unknown = set(payload) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        payload.update(PRESETS[preset])
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in _FIELD_NAMES:
                raise ValueError(f"unknown config override {key!r}")
            payload[key] = value
    return RunConfig(**payload)

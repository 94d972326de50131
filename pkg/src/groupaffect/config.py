"""Run configuration, deterministic seeding substreams, and digests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from groupaffect.errors import ValidationError


MODEL_KINDS = ("gp", "lasso", "rf", "svr")

STRATEGY_NAMES = (
    "Location",
    "Activity",
    "SMS",
    "Calls",
    "SIAS",
    "Communication",
    "DailyActivity",
    "SIAS+Communication",
    "AllMinusCommunication",
    "AllMinusSIAS",
)


def substream(seed: int, *names: str) -> np.random.Generator:
    """Named random substream derived from one root seed.

    Streams for different name paths are independent, and adding a new named
    stream never shifts the draws of an existing one.
    """
    keys = [zlib.crc32(name.encode("utf-8")) for name in names]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *keys]))


def derive_seed(seed: int, *names: str) -> int:
    """32-bit integer seed for components that cannot take a Generator."""
    return int(substream(seed, *names).integers(0, 2**31 - 1))


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunConfig:
    """Everything a pipeline run needs beyond the raw data files.

    CLI flags override values loaded from the TOML config file.
    """

    data_dir: str = "data"
    out_dir: str = "out"
    seed: int = 0
    strategies: list[str] = field(default_factory=lambda: ["DailyActivity"])
    models: list[str] = field(default_factory=lambda: list(MODEL_KINDS))
    folds: int = 5
    jobs: int = 1

    # ingest
    utc_offset_hours: float = 0.0

    # mobility thresholds
    d_max_m: float = 200.0
    t_min_s: float = 600.0
    out_of_town_km: float = 25.0
    unmatched_label: str = "Leisure"

    # feature toggles
    epoch_minutes: int = 60
    hour_of_day: bool = True

    # profiling
    standardize_profiles: bool = True
    gmeans_alpha: float = 1e-4

    # evaluation
    weight_by_participants: bool = False

    def validate(self) -> None:
        for name in ("d_max_m", "t_min_s", "out_of_town_km", "epoch_minutes"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"config: {name} must be positive")
        if self.folds < 2:
            raise ValidationError("config: folds must be >= 2")
        if not 0.0 < self.gmeans_alpha < 1.0:
            raise ValidationError("config: gmeans_alpha must be in (0, 1)")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ValidationError(f"config: unknown strategy {s!r}")
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ValidationError(f"config: unknown model {m!r}")

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return digest_bytes(payload.encode("utf-8"))


# TOML section -> config fields living in it.
_SECTIONS = {
    "run": ("data_dir", "out_dir", "seed", "strategies", "models", "folds", "jobs"),
    "ingest": ("utc_offset_hours",),
    "mobility": ("d_max_m", "t_min_s", "out_of_town_km", "unmatched_label"),
    "features": ("epoch_minutes", "hour_of_day"),
    "profiling": ("standardize_profiles", "gmeans_alpha"),
    "evaluation": ("weight_by_participants",),
}


def load_config(path: Path | str) -> RunConfig:
    """Load a RunConfig from a TOML file with [run]/[mobility]/... sections."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config file {path}: {exc}") from exc
    cfg = RunConfig()
    for section, keys in _SECTIONS.items():
        table = raw.get(section, {})
        if not isinstance(table, dict):
            raise ValidationError(f"config section [{section}] must be a table")
        for key, value in table.items():
            if key not in keys:
                raise ValidationError(f"config: unknown key {key!r} in [{section}]")
            setattr(cfg, key, value)
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValidationError(f"config: unknown sections {sorted(unknown)}")
    cfg.validate()
    return cfg

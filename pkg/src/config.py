"""Process settings and per-run configuration.

Defaults: denominator margins 1e-7, 1000 centroid points for a single
linear-fractional constraint (100 per axis otherwise), bisection tolerance
0.01, snap tolerance 0.75 and a 101-point coarse theta grid refined by
golden-section search (tol 1e-5, 40 steps).
"""

from __future__ import annotations

import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: API-identical backport
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

BUILTIN_METRICS = {"DP", "EOpp", "PEq", "PP", "FOR", "AccParity", "EO"}


class Settings(BaseSettings):
    log_level: str = "INFO"
    out_dir: Path = Path("runs")

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, value: str) -> str:
        if not isinstance(value, str):
            return value
        return value.strip().upper()

    model_config = SettingsConfigDict(
        env_prefix="ROCF_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()


class MechanismKind(str, Enum):
    ANTI_DIAGONAL = "ad"
    LABEL_FLIPPING = "lf"


class DataConfig(BaseModel):
    csv: Path | None = None
    # Pre-split inputs skip the random split when both are given.
    post_csv: Path | None = None
    test_csv: Path | None = None
    score_col: str = "score"
    group_col: str = "group"
    label_col: str = "label"
    fractions: tuple[float, float, float] = (0.30, 0.35, 0.35)

    @field_validator("fractions")
    @classmethod
    def check_fractions(cls, value: tuple[float, float, float]):
        if any(f <= 0 for f in value):
            raise ValueError(f"split fractions must be positive, got {value}")
        if abs(sum(value) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(value)}")
        return value


class CustomConstraintConfig(BaseModel):
    """A raw linear / linear-fractional metric given by per-group coefficients."""

    label: str
    u: list[tuple[float, float, float]]
    v: list[tuple[float, float, float]] | None = None
    delta: float = Field(ge=0.0, le=1.0)


class ConstraintsConfig(BaseModel):
    # Active metrics with their tolerance; metrics not listed are reported only.
    metrics: dict[str, float] = Field(default_factory=dict)
    epsilon: float = Field(default=1e-7, gt=0.0)
    custom: list[CustomConstraintConfig] = Field(default_factory=list)

    @field_validator("metrics")
    @classmethod
    def check_metrics(cls, value: dict[str, float]) -> dict[str, float]:
        unknown = sorted(set(value) - BUILTIN_METRICS)
        if unknown:
            available = ", ".join(sorted(BUILTIN_METRICS))
            raise ValueError(f"Unknown metric(s) {unknown}. Available: {available}")
        for name, delta in value.items():
            if not 0.0 <= delta <= 1.0:
                raise ValueError(f"delta for {name} must lie in [0, 1], got {delta}")
        return value


class LossConfig(BaseModel):
    # Per-group (gamma_tpr, gamma_fpr, gamma_1) rows; misclassification when unset.
    gamma: list[tuple[float, float, float]] | None = None


class RegionConfig(BaseModel):
    single_lf_points: int = Field(default=1000, ge=1)
    multi_lf_points: int = Field(default=100, ge=1)
    tau_alpha: float = Field(default=0.01, gt=0.0)
    alpha_cap: float = Field(default=100.0, ge=1.0)


class ConstructConfig(BaseModel):
    mechanism: MechanismKind = MechanismKind.ANTI_DIAGONAL
    snap_xi: float = Field(default=0.75, ge=0.0)
    coarse_points: int = Field(default=101, ge=2)
    golden_tol: float = Field(default=1e-5, gt=0.0)
    golden_max_iter: int = Field(default=40, ge=1)


class BetaParams(BaseModel):
    a: float = Field(gt=0.0)
    b: float = Field(gt=0.0)


class SynthGroupConfig(BaseModel):
    label: str
    n_pos: int = Field(ge=1)
    n_neg: int = Field(ge=1)
    pos: BetaParams = BetaParams(a=4.0, b=2.0)
    neg: BetaParams = BetaParams(a=2.0, b=4.0)


class SynthConfig(BaseModel):
    groups: list[SynthGroupConfig] = Field(
        default_factory=lambda: [
            SynthGroupConfig(label="A", n_pos=400, n_neg=600),
            SynthGroupConfig(
                label="B",
                n_pos=250,
                n_neg=750,
                pos=BetaParams(a=3.0, b=2.0),
                neg=BetaParams(a=2.0, b=3.0),
            ),
        ]
    )
    out_csv: Path = Path("synthetic.csv")


class RunConfig(BaseSettings):
    """Effective configuration of one pipeline run."""

    data: DataConfig = Field(default_factory=DataConfig)
    constraints: ConstraintsConfig = Field(default_factory=ConstraintsConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    region: RegionConfig = Field(default_factory=RegionConfig)
    construct: ConstructConfig = Field(default_factory=ConstructConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    seed: int = 0
    out_dir: Path = Field(default_factory=lambda: settings.out_dir)
    diagnostics: bool = False
    dump_lp: bool = False
    # Also run the guarded search on TEST and attach it to the run report.
    with_oracle: bool = False

    model_config = SettingsConfigDict(
        env_prefix="ROCF_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    @model_validator(mode="after")
    def check_pre_split(self) -> "RunConfig":
        if (self.data.post_csv is None) != (self.data.test_csv is None):
            raise ValueError("data.post_csv and data.test_csv must be given together")
        return self

    @classmethod
    def from_file(
        cls, path: str | Path | None, overrides: dict[str, Any] | None = None
    ) -> "RunConfig":
        """Load a TOML or JSON config; nested overrides win over the file."""
        raw: dict[str, Any] = {}
        if path is not None:
            path = Path(path)
            text = path.read_text(encoding="utf-8")
            if path.suffix.lower() == ".json":
                raw = json.loads(text)
            else:
                raw = tomllib.loads(text)
        return cls(**_deep_merge(raw, overrides or {}))

    def dump(self) -> str:
        return self.model_dump_json(indent=2)

    def config_hash(self) -> str:
        """sha256 of the settings that determine results (output options excluded)."""
        payload = self.model_dump_json(exclude={"out_dir", "diagnostics", "dump_lp"})
        return hashlib.sha256(payload.encode()).hexdigest()


def _deep_merge(base: dict[str, Any], updates: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if value is None:
            continue
        if isinstance(value, dict):
            current = merged.get(key)
            merged[key] = _deep_merge(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged

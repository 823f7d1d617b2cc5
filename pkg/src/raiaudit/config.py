"""Audit configuration document (YAML or JSON)."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .dataset import ColumnRole, Schema

STAGES = ("metrics", "proxy", "privacy", "explain", "mitigate", "assess")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DatasetConfig(_Model):
    path: str
    format: Literal["csv", "jsonl"] = "csv"
    delimiter: str = ","

    @field_validator("delimiter")
    @classmethod
    def _one_char(cls, v: str) -> str:
        if len(v) != 1:
            raise ValueError("delimiter must be a single character")
        return v


class SchemaConfig(_Model):
    roles: dict[str, ColumnRole]
    privileged: dict[str, str] = {}
    invert_label: bool = False
    categorical: list[str] = []

    def to_schema(self) -> Schema:
        return Schema(
            roles=dict(self.roles),
            privileged=dict(self.privileged),
            invert_label=self.invert_label,
            categorical=tuple(self.categorical),
        )


class MetricsConfig(_Model):
    epsilon: float = Field(0.10, ge=0)
    alpha: float = Field(1.0, ge=0)
    threshold: float = Field(0.5, ge=0, le=1, description="score cut-off used when the file has no prediction column")


class ProxyConfig(_Model):
    threshold: float = Field(0.5, ge=0, le=1)


class MitigationConfig(_Model):
    objective: Literal["equal_opportunity"] = "equal_opportunity"
    performance: Literal["accuracy", "balanced_accuracy"] = "accuracy"
    epsilon: float = Field(0.10, ge=0)
    grid: Union[int, list[float]] = 101
    sensitive: Optional[str] = None
    reweigh: bool = True
    thresholds: bool = True

    @field_validator("grid")
    @classmethod
    def _grid(cls, v):
        if isinstance(v, int) and v < 2:
            raise ValueError("grid needs at least 2 points")
        if isinstance(v, list):
            if not v or any(not 0 <= x <= 1 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("grid must be a strictly increasing list inside [0,1]")
        return v


class SurrogateConfig(_Model):
    max_depth: int = Field(4, ge=0)
    min_leaf: int = Field(5, ge=1)


class BinningConfig(_Model):
    edges: list[float] = []
    merge: Optional[dict[str, str]] = None


class PrivacyConfig(_Model):
    quasi_identifiers: Optional[list[str]] = None
    k: int = Field(5, ge=1)
    binning: dict[str, BinningConfig] = {}
    include_values: bool = False


class ProfileConfig(_Model):
    epsilon: float = Field(0.10, ge=0)
    di_band: tuple[float, float] = (0.8, 1.25)
    k: int = Field(5, ge=1)
    min_fidelity: float = Field(0.8, ge=0, le=1)

    @field_validator("di_band")
    @classmethod
    def _band(cls, v):
        if not 0 < v[0] <= 1 <= v[1]:
            raise ValueError("di_band must be [low, high] with 0 < low <= 1 <= high")
        return v


class AuditConfig(_Model):
    dataset: DatasetConfig
    table_schema: SchemaConfig = Field(alias="schema")
    metrics: MetricsConfig = MetricsConfig()
    proxy: ProxyConfig = ProxyConfig()
    mitigation: MitigationConfig = MitigationConfig()
    surrogate: SurrogateConfig = SurrogateConfig()
    privacy: PrivacyConfig = PrivacyConfig()
    profile: ProfileConfig = ProfileConfig()
    questionnaire: str = "builtin"
    answers: Optional[str] = None
    fairness_evidence: Literal["original", "mitigated"] = "original"
    stages: list[Literal["metrics", "proxy", "privacy", "explain", "mitigate", "assess"]] = list(STAGES)
    output_dir: str = "audit-out"

    # directory relative paths are resolved against; not part of the document
    base_dir: Path = Field(default=Path("."), exclude=True)

    @model_validator(mode="after")
    def _schema_refs(self):
        roles = self.table_schema.roles
        sens = self.mitigation.sensitive
        if sens is not None and roles.get(sens) is not ColumnRole.SENSITIVE:
            raise ValueError(f"mitigation.sensitive {sens!r} is not a sensitive column in the schema")
        return self

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        """Config as echoed into the report: everything except where outputs go."""
        return self.model_dump(mode="json", by_alias=True, exclude={"output_dir", "base_dir"})


def load_config(path: str | Path) -> AuditConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} is not a mapping")
    cfg = AuditConfig.model_validate(doc)
    return cfg.model_copy(update={"base_dir": path.parent})

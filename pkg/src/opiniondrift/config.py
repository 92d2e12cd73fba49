"""Run configuration, stored as a single JSON document."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .community_dims import SGNSParams
from .panel import AvgMode, ContractViolation, TopicWeighting
from .timeseries import DEFAULT_WINDOW, Quarter

CONFIG_ENV = "OPINIONDRIFT_CONFIG"


@dataclass
class RunConfig:
    input: str
    output_dir: str
    facets: list[str] = field(default_factory=lambda: ["topic", "cohort"])
    prefiltered: bool = False
    first_activity: str | None = None
    topic_weighting: str = TopicWeighting.FRACTIONAL.value
    avg_mode: str = AvgMode.QUARTERLY.value
    # None: renormalize only when some group is missing in some quarter
    renormalize: bool | None = None
    dimensions: dict[str, list[list[str]]] = field(default_factory=dict)
    embedding: str | None = None
    cooccurrence: str | None = None
    sgns: dict[str, Any] = field(default_factory=dict)
    window: list[str] = field(default_factory=lambda: [str(q) for q in DEFAULT_WINDOW])
    rank_metric: str = "l1_loss"
    seed: int = 0
    svg: bool = False

    def __post_init__(self):
        TopicWeighting(self.topic_weighting)
        AvgMode(self.avg_mode)
        start, end = self.window_quarters
        if start > end:
            raise ContractViolation(f"window start {start} is after end {end}")
        known = {f.name for f in fields(SGNSParams)}
        unknown = set(self.sgns) - known
        if unknown:
            raise ContractViolation(f"unknown SGNS settings: {sorted(unknown)}")
        for name in self.facets:
            if name not in ("topic", "cohort") and name not in self.dimensions:
                raise ContractViolation(f"facet {name!r} is neither topic, cohort nor a configured dimension")

    @property
    def window_quarters(self) -> tuple[Quarter, Quarter]:
        if len(self.window) != 2:
            raise ContractViolation("window must be [start, end]")
        return Quarter.parse(self.window[0]), Quarter.parse(self.window[1])

    def sgns_params(self) -> SGNSParams:
        return SGNSParams(**{"seed": self.seed, **self.sgns})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ContractViolation("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ContractViolation(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ContractViolation(str(exc)) from None

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "RunConfig":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            raise ContractViolation(f"no config given and ${CONFIG_ENV} is unset")
        cfg = cls.from_json(Path(path).read_text(encoding="utf-8"))
        base = Path(path).resolve().parent
        # relative paths in the file are relative to the file itself
        for key in ("input", "output_dir", "first_activity", "embedding", "cooccurrence"):
            value = getattr(cfg, key)
            if value and not os.path.isabs(value):
                setattr(cfg, key, str(base / value))
        return cfg

    def check_files(self) -> None:
        for key in ("input", "first_activity", "embedding", "cooccurrence"):
            value = getattr(self, key)
            if value and not os.path.exists(value):
                raise FileNotFoundError(f"{key}: {value} does not exist")

"""Trained model bundle: forest plus everything needed to score a repository.

A bundle records the scenario and anchor policy used for feature extraction,
the forest (already restricted to the pruned columns) and the LMA quartiles of
its reference population, so prediction needs nothing but the bundle and a
snapshot.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from . import forest as forest_mod
from .errors import ModelError, NoModel, StorageError
from .features import AnchorPolicy, Dataset, Scenario, extract_features, flatten
from .forest import Forest, ForestConfig, Prediction, oob_p_active, predict_proba, train_forest
from .ingest.models import RepoSnapshot
from .lma import quartiles_of
from .prune import DEFAULT_THRESHOLD, PruneReport, fit_prune

SCHEMA_VERSION = 1
FALLBACK_QUARTILES = (25.0, 50.0, 75.0)


@dataclass
class ModelBundle:
    forest: Forest
    scenario: Scenario
    anchor: AnchorPolicy = AnchorPolicy.LAST_COMMIT
    quartiles: tuple[float, float, float] = FALLBACK_QUARTILES

    @property
    def model_version(self) -> str:
        return self.forest.model_version

    def predict(self, s: RepoSnapshot, anchor: datetime | None = None) -> Prediction:
        """Raises ``InsufficientHistory`` when the snapshot is too short for the scenario."""
        when = anchor if anchor is not None else self.anchor.anchor_for(s)
        return predict_proba(self.forest, flatten(extract_features(s, self.scenario, when)))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": str(self.scenario),
            "anchor": self.anchor.value,
            "quartiles": list(self.quartiles),
            "model_version": self.model_version,
            "forest": forest_mod.to_dict(self.forest),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("schema") != SCHEMA_VERSION:
            raise ModelError(f"unsupported model schema {d.get('schema')!r}")
        try:
            q = tuple(float(x) for x in d["quartiles"])
            bundle = cls(forest_mod.from_dict(d["forest"]), Scenario.parse(d["scenario"]), AnchorPolicy(d["anchor"]), q)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed model bundle: {exc}") from exc
        if len(bundle.quartiles) != 3:
            raise ModelError("quartiles must have three values")
        return bundle

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_text(self.dumps(), encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cannot write model {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ModelBundle":
        path = Path(path)
        if not path.exists():
            raise NoModel(f"no model at {path}; run 'train' first")
        try:
            return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ModelError(f"model file {path} is not JSON: {exc}") from exc
        except OSError as exc:
            raise StorageError(f"cannot read model {path}: {exc}") from exc


def reference_quartiles(f: Forest, X: np.ndarray) -> tuple[float, float, float]:
    """LMA quartiles of training rows whose out-of-bag vote is active.

    Out-of-bag votes avoid the inflated in-sample probabilities; rows never out
    of bag are ignored. Falls back to (25, 50, 75) when no row qualifies.
    """
    p = oob_p_active(f, X)
    p = p[~np.isnan(p) & (p >= 0.5)]
    if p.size == 0:
        return FALLBACK_QUARTILES
    return quartiles_of(200 * p - 100)


def train_bundle(
    ds: Dataset,
    scenario: Scenario,
    cfg: ForestConfig = ForestConfig(),
    prune: PruneReport | float | None = DEFAULT_THRESHOLD,
    anchor: AnchorPolicy = AnchorPolicy.LAST_COMMIT,
) -> tuple[ModelBundle, PruneReport | None]:
    """Prune (fit on ``ds`` unless a report is given), train, and attach quartiles."""
    ds = ds.labeled()
    report = None
    columns: Sequence[str] = ds.columns
    if isinstance(prune, PruneReport):
        report = prune
    elif prune is not None:
        report = fit_prune(ds.X, ds.columns, prune)
    if report is not None:
        columns = report.kept
    sub = ds.select_columns(columns)
    f = train_forest(sub, cfg=cfg)
    return ModelBundle(f, scenario, anchor, reference_quartiles(f, sub.X)), report

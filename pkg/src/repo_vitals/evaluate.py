"""Stratified cross-validation, evaluation metrics and baselines.

The positive class for every metric is *unmaintained*: precision and recall
describe how well unmaintained repositories are found, and AUC ranks rows by
``1 - p_active``. Metrics whose denominator is zero are ``None`` (written as
``undefined``), never 0.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import SingleClass, TooFewPerClass
from .features import AnchorPolicy, Dataset, Scenario, build_dataset
from .forest import UNMAINTAINED, ForestConfig, train_forest
from .prune import DEFAULT_THRESHOLD, fit_prune
from .stats import average_ranks

METRIC_NAMES = ("accuracy", "precision", "recall", "f_measure", "kappa", "auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, predicted_unmaintained: Sequence[bool], actual_unmaintained: Sequence[bool]) -> "ConfusionCounts":
        p = np.asarray(predicted_unmaintained, dtype=bool)
        a = np.asarray(actual_unmaintained, dtype=bool)
        return cls(
            int(np.sum(p & a)),
            int(np.sum(p & ~a)),
            int(np.sum(~p & a)),
            int(np.sum(~p & ~a)),
        )


@dataclass(frozen=True)
class Metrics:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f_measure: float | None
    kappa: float | None
    auc: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def kappa_from_counts(cc: ConfusionCounts) -> float | None:
    """Cohen's kappa, computed in exact integer arithmetic and rounded once."""
    n = cc.n
    chance = (cc.tp + cc.fp) * (cc.tp + cc.fn) + (cc.fn + cc.tn) * (cc.fp + cc.tn)
    den = n * n - chance
    if den == 0:
        return None
    return float(Fraction(n * (cc.tp + cc.tn) - chance, den))


def auc_score(scores: Sequence[float], positive: Sequence[bool]) -> float | None:
    """P(random positive outscores random negative), ties counting one half."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def compute_metrics(cc: ConfusionCounts, scores: Iterable[tuple[float, bool]]) -> Metrics:
    """Six metrics from counts plus ``(p_unmaintained, is_unmaintained)`` pairs for AUC."""
    scores = list(scores)
    if len(scores) != cc.n:
        raise ValueError(f"{len(scores)} scores for {cc.n} counted rows")
    precision = _ratio(cc.tp, cc.tp + cc.fp)
    recall = _ratio(cc.tp, cc.tp + cc.fn)
    f = None
    if precision is not None and recall is not None:
        f = _ratio(2 * cc.tp, 2 * cc.tp + cc.fp + cc.fn) if precision + recall > 0 else None
    auc = auc_score([s for s, _ in scores], [p for _, p in scores]) if scores else None
    return Metrics(_ratio(cc.tp + cc.tn, cc.n), precision, recall, f, kappa_from_counts(cc), auc)


def metrics_from_p_active(p_active: Sequence[float], y: Sequence[int]) -> Metrics:
    """Metrics for vote fractions against labels (0 = unmaintained, 1 = active)."""
    p = np.asarray(p_active, dtype=np.float64)
    actual = np.asarray(y) == UNMAINTAINED
    cc = ConfusionCounts.from_labels(p < 0.5, actual)
    return compute_metrics(cc, zip((1.0 - p).tolist(), actual.tolist()))


def mean_metrics(rows: Sequence[Metrics]) -> Metrics:
    """Per-metric mean over the rounds where the metric is defined."""
    out = {}
    for name in METRIC_NAMES:
        vals = [getattr(m, name) for m in rows if getattr(m, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return Metrics(**out)


def stratified_kfold(y: Sequence[int], k: int, seed: int = 0) -> list[np.ndarray]:
    """Split row indices into ``k`` folds with near-equal class proportions.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over from one class to the next so fold sizes differ by at most one.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            raise TooFewPerClass(f"class {cls} has {members.size} rows, need >= {k} for {k} folds")
        for i in rng.permutation(members):
            buckets[pos % k].append(int(i))
            pos += 1
    return [np.sort(np.array(b, dtype=np.int64)) for b in buckets]


def baseline_metrics(y: Sequence[int] | Dataset, kind: str = "all_unmaintained", seed: int = 0) -> Metrics:
    """Trivial classifiers: everything unmaintained, or a seeded fair coin per row."""
    if isinstance(y, Dataset):
        y = y.y
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("no rows")
    actual = y == UNMAINTAINED
    if kind == "all_unmaintained":
        score = np.ones(y.size)
    elif kind == "random":
        score = np.random.default_rng(seed).random(y.size)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    cc = ConfusionCounts.from_labels(score >= 0.5, actual)
    return compute_metrics(cc, zip(score.tolist(), actual.tolist()))


def _derive(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fmt(v: float | None) -> str:
    return "undefined" if v is None else repr(float(v))


@dataclass
class ExperimentResult:
    scenario: Scenario | None
    rounds: list[Metrics]
    # columns used per round and fold, after pruning on the training folds
    fold_columns: list[list[list[str]]] = field(default_factory=list)
    n_rows: int = 0

    @property
    def mean(self) -> Metrics:
        return mean_metrics(self.rounds)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("round," + ",".join(METRIC_NAMES) + "\n")
        for i, m in enumerate(self.rounds, 1):
            buf.write(f"{i}," + ",".join(_fmt(getattr(m, n)) for n in METRIC_NAMES) + "\n")
        mean = self.mean
        buf.write("mean," + ",".join(_fmt(getattr(mean, n)) for n in METRIC_NAMES) + "\n")
        return buf.getvalue()


def run_experiment(
    data,
    scenario: Scenario | None = None,
    cfg: ForestConfig = ForestConfig(),
    rounds: int = 100,
    k: int = 5,
    seed: int = 0,
    prune_threshold: float | None = DEFAULT_THRESHOLD,
    anchor: AnchorPolicy = AnchorPolicy.LAST_COMMIT,
) -> ExperimentResult:
    """Repeated stratified k-fold evaluation of the forest.

    ``data`` is a labeled ``Dataset`` or a corpus (features are extracted for
    ``scenario``). Each round gets a fresh fold split; pruning is fitted on the
    training folds only and the same columns are used for the held-out fold.
    A round's metrics are computed over the pooled held-out predictions of all
    its folds. ``prune_threshold=None`` disables pruning.
    """
    if isinstance(data, Dataset):
        ds = data.labeled()
    else:
        if scenario is None:
            raise ValueError("a scenario is required to extract features from a corpus")
        ds = build_dataset(data, scenario, anchor).labeled()
    if ds.X.shape[0] == 0 or np.unique(ds.y).size < 2:
        raise SingleClass("evaluation needs labeled rows of both classes")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")

    results, columns_log = [], []
    for r in range(rounds):
        folds = stratified_kfold(ds.y, k, _derive(seed, r))
        p_active = np.empty(len(ds))
        round_cols = []
        for f_idx, test in enumerate(folds):
            train = np.setdiff1d(np.arange(len(ds)), test)
            Xtr, ytr = ds.X[train], ds.y[train]
            if prune_threshold is not None:
                report = fit_prune(Xtr, ds.columns, prune_threshold)
                col_idx = [ds.columns.index(c) for c in report.kept]
            else:
                col_idx = list(range(len(ds.columns)))
            cols = [ds.columns[i] for i in col_idx]
            forest = train_forest(Xtr[:, col_idx], ytr, cols, replace(cfg, seed=_derive(seed, r, f_idx)))
            p_active[test] = forest.p_active(ds.X[np.ix_(test, col_idx)])
            round_cols.append(cols)
        results.append(metrics_from_p_active(p_active, ds.y))
        columns_log.append(round_cols)
    return ExperimentResult(scenario, results, columns_log, len(ds))


"""Random forest of Gini CART trees with vote probabilities and permutation importance.

Classes are ordered ``(unmaintained, active)`` and encoded 0 / 1. Each tree is
grown on a bootstrap sample drawn from its own seed, derived from the forest
seed and the tree index, so trees can be grown in any order (or in parallel)
with identical results.

Split search: at every node ``mtry`` candidate columns are drawn without
replacement; for each, thresholds are midpoints between adjacent distinct
sorted values. The split maximising

    (cL0^2 + cL1^2) / nL + (cR0^2 + cR1^2) / nR

(equivalently, minimising the weighted Gini impurity of the children) wins.
The score is evaluated as one correctly rounded division of two exact
integers, so equal rational scores compare equal; ties go to the lowest column
index, then the lowest threshold.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ColumnMismatch, EmptyDataset, ModelError, NoOobRows, SingleClass
from .features import CLASS_NAMES, Dataset

UNMAINTAINED, ACTIVE = 0, 1
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    mtry: int | None = None  # None: floor(sqrt(#columns))
    min_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True

    def resolved(self, n_columns: int) -> "ForestConfig":
        mtry = self.mtry if self.mtry is not None else max(1, int(math.isqrt(n_columns)))
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 1 <= mtry <= n_columns:
            raise ValueError(f"mtry must be in [1, {n_columns}], got {mtry}")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        return replace(self, mtry=mtry)


@dataclass
class DecisionTree:
    """Flat array tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts of the training sample
    oob_indices: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def vote_active(self, X: np.ndarray) -> np.ndarray:
        """Per-row vote; leaf-majority ties go to unmaintained."""
        c = self.counts[self.apply(X)]
        return c[:, ACTIVE] > c[:, UNMAINTAINED]

    def used_columns(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}


def _grow(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator) -> tuple:
    n_cols = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(c0: int, c1: int) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((c0, c1))
        return len(feature) - 1

    root_idx = np.arange(X.shape[0])
    n1 = int(y.sum())
    stack = [(new_node(y.size - n1, n1), root_idx, 0)]
    min_leaf = cfg.min_leaf
    while stack:
        node, idx, depth = stack.pop()
        n = idx.size
        c1 = int(y[idx].sum())
        c0 = n - c1
        if c0 == 0 or c1 == 0 or n < 2 * min_leaf or (cfg.max_depth is not None and depth >= cfg.max_depth):
            continue
        if cfg.mtry == n_cols:
            cand = range(n_cols)
        else:
            cand = np.sort(rng.choice(n_cols, size=cfg.mtry, replace=False))
        cand = np.asarray(cand, dtype=np.int64)
        xs = X[idx[:, None], cand[None, :]]  # (n, n_cand)
        order = np.argsort(xs, axis=0, kind="stable")
        xs = np.take_along_axis(xs, order, axis=0)
        cum1 = np.cumsum(y[idx][order], axis=0)[:-1]  # left-side actives per cut
        nl = np.arange(1, n, dtype=np.int64)[:, None]
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        l1 = cum1
        l0 = nl - l1
        rn = n - nl
        r1 = c1 - l1
        r0 = rn - r1
        num = (l0 * l0 + l1 * l1) * rn + (r0 * r0 + r1 * r1) * nl
        score = num.astype(np.float64) / (nl * rn).astype(np.float64)
        score = np.where(valid, score, -1.0)
        # column-major argmax: first maximum by candidate column, then by cut position
        flat = int(np.argmax(score.T))
        c_pos, pos = divmod(flat, n - 1)
        best_col = int(cand[c_pos])
        best_thr = (xs[pos, c_pos] + xs[pos + 1, c_pos]) / 2.0
        mask = X[idx, best_col] <= best_thr
        li, ri = idx[mask], idx[~mask]
        l1c = int(y[li].sum())
        r1c = int(y[ri].sum())
        lnode = new_node(li.size - l1c, l1c)
        rnode = new_node(ri.size - r1c, r1c)
        feature[node], threshold[node], left[node], right[node] = best_col, best_thr, lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, 2),
    )


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(tree_index,)))


def grow_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, tree_index: int) -> DecisionTree:
    rng = tree_rng(cfg.seed, tree_index)
    n = X.shape[0]
    if cfg.bootstrap:
        sample = rng.integers(0, n, size=n)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[sample] = True
        oob = np.flatnonzero(~in_bag)
        Xb, yb = X[sample], y[sample]
    else:
        oob = np.zeros(0, dtype=np.int64)
        Xb, yb = X, y
    return DecisionTree(*_grow(Xb, yb, cfg, rng), oob_indices=oob)


@dataclass
class Prediction:
    p_active: float
    label: str

    @classmethod
    def from_votes(cls, active_votes: int, n_trees: int) -> "Prediction":
        p = active_votes / n_trees
        return cls(p, "active" if p >= 0.5 else "unmaintained")


@dataclass
class Forest:
    trees: list[DecisionTree]
    column_names: list[str]
    config: ForestConfig
    n_train_rows: int
    class_order: tuple[str, str] = CLASS_NAMES

    def _matrix(self, X) -> np.ndarray:
        if isinstance(X, Dataset):
            index = {c: i for i, c in enumerate(X.columns)}
            missing = [c for c in self.column_names if c not in index]
            if missing:
                raise ColumnMismatch(f"missing columns: {', '.join(missing[:5])}")
            return X.X[:, [index[c] for c in self.column_names]]
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.column_names):
            raise ColumnMismatch(f"expected {len(self.column_names)} columns, got {X.shape[1]}")
        return X

    def active_votes(self, X) -> np.ndarray:
        X = self._matrix(X)
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for t in self.trees:
            votes += t.vote_active(X)
        return votes

    def p_active(self, X) -> np.ndarray:
        return self.active_votes(X) / len(self.trees)

    def predict(self, X) -> list[Prediction]:
        n = len(self.trees)
        return [Prediction.from_votes(int(v), n) for v in self.active_votes(X)]

    @property
    def model_version(self) -> str:
        digest = hashlib.sha256(json.dumps(to_dict(self), sort_keys=True).encode()).hexdigest()
        return digest[:12]


def train_forest(X, y=None, columns: Sequence[str] | None = None, cfg: ForestConfig = ForestConfig()) -> Forest:
    """Train on a labeled ``Dataset`` or on ``(X, y, columns)``; y uses 0=unmaintained, 1=active."""
    if isinstance(X, Dataset):
        data = X
        X, y, columns = data.X, data.y, data.columns
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    if X.shape[0] < 2:
        raise EmptyDataset("need at least 2 training rows")
    if columns is None or len(columns) != X.shape[1]:
        raise ColumnMismatch("column names do not match the matrix width")
    if y.shape != (X.shape[0],) or not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (unmaintained) or 1 (active) for every row")
    if np.unique(y).size < 2:
        raise SingleClass("training data has a single class")
    cfg = cfg.resolved(X.shape[1])
    trees = [grow_tree(X, y, cfg, t) for t in range(cfg.n_trees)]
    return Forest(trees, list(columns), cfg, X.shape[0])


def predict_proba(f: Forest, v: Mapping[str, float] | Sequence[float] | np.ndarray) -> Prediction:
    """Vote fraction for one data-point vector (a name->value mapping or an ordered array)."""
    if isinstance(v, Mapping):
        missing = [c for c in f.column_names if c not in v]
        if missing:
            raise ColumnMismatch(f"vector lacks {len(missing)} forest columns, e.g. {missing[0]}")
        row = np.array([v[c] for c in f.column_names], dtype=np.float64)
    else:
        row = np.asarray(v, dtype=np.float64).reshape(-1)
    return f.predict(row)[0]


def oob_p_active(f: Forest, X: np.ndarray) -> np.ndarray:
    """Out-of-bag vote fraction for each training row; NaN for rows never out of bag."""
    X = f._matrix(X)
    votes = np.zeros(X.shape[0])
    seen = np.zeros(X.shape[0])
    for t in f.trees:
        if t.oob_indices.size:
            votes[t.oob_indices] += t.vote_active(X[t.oob_indices])
            seen[t.oob_indices] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(seen > 0, votes / np.maximum(seen, 1), np.nan)


# -- importance -------------------------------------------------------------


@dataclass
class ImportanceEntry:
    name: str
    period: str
    mda: float


@dataclass
class ImportanceReport:
    entries: list[ImportanceEntry] = field(default_factory=list)

    def as_dict(self) -> dict[str, float]:
        return {e.name: e.mda for e in self.entries}

    def to_csv(self) -> str:
        lines = ["data_point,feature,period,mda"]
        for e in self.entries:
            feat = e.name[: -(len(e.period) + 1)] if e.period else e.name
            lines.append(f"{e.name},{feat},{e.period},{e.mda!r}")
        return "\n".join(lines) + "\n"


def _period(name: str) -> str:
    head, sep, tail = name.rpartition("_T")
    return f"T{tail}" if sep else ""


def mda_importance(f: Forest, X, y=None, seed: int = 0) -> ImportanceReport:
    """Mean decrease in out-of-bag accuracy (percentage points) after permuting each column.

    ``X``/``y`` must be the rows the forest was trained on, in the same order.
    Unscaled: the per-tree decreases are averaged, not divided by their
    standard deviation.
    """
    if isinstance(X, Dataset):
        y = X.y
    X = f._matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise EmptyDataset("no rows")
    if X.shape[0] != f.n_train_rows:
        raise ColumnMismatch(f"forest was trained on {f.n_train_rows} rows, got {X.shape[0]}")
    n_cols = X.shape[1]
    total = np.zeros(n_cols)
    for t, tree in enumerate(f.trees):
        oob = tree.oob_indices
        if oob.size == 0:
            raise NoOobRows(f"tree {t} has no out-of-bag rows")
        Xo, yo = X[oob], y[oob] == ACTIVE
        base = np.mean(tree.vote_active(Xo) == yo)
        used = tree.used_columns()
        for j in range(n_cols):
            if j not in used:
                continue
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(t, j)))
            Xp = Xo.copy()
            Xp[:, j] = rng.permutation(Xo[:, j])
            total[j] += base - np.mean(tree.vote_active(Xp) == yo)
    mda = total / len(f.trees) * 100.0
    entries = [ImportanceEntry(c, _period(c), float(v)) for c, v in zip(f.column_names, mda)]
    entries.sort(key=lambda e: (-e.mda, f.column_names.index(e.name)))
    return ImportanceReport(entries)


# -- serialization -----------------------------------------------------------


def _node_to_dict(tree: DecisionTree, i: int, names: list[str]) -> dict[str, Any]:
    if tree.feature[i] < 0:
        return {"leaf": [int(tree.counts[i, 0]), int(tree.counts[i, 1])]}
    return {
        "column": names[int(tree.feature[i])],
        "threshold": float(tree.threshold[i]),
        "counts": [int(tree.counts[i, 0]), int(tree.counts[i, 1])],
        "left": _node_to_dict(tree, int(tree.left[i]), names),
        "right": _node_to_dict(tree, int(tree.right[i]), names),
    }


def to_dict(f: Forest) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "config": asdict(f.config),
        "column_names": list(f.column_names),
        "class_order": list(f.class_order),
        "n_train_rows": f.n_train_rows,
        "trees": [
            {"oob_indices": t.oob_indices.tolist(), "root": _node_to_dict(t, 0, f.column_names)} for t in f.trees
        ],
    }


def _tree_from_dict(d: dict[str, Any], index: dict[str, int]) -> DecisionTree:
    feature, threshold, left, right, counts = [], [], [], [], []

    def walk(node: dict[str, Any]) -> int:
        i = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if "leaf" in node:
            counts.append(tuple(node["leaf"]))
            return i
        counts.append(tuple(node["counts"]))
        feature[i] = index[node["column"]]
        threshold[i] = float(node["threshold"])
        left[i] = walk(node["left"])
        right[i] = walk(node["right"])
        return i

    walk(d["root"])
    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, 2),
        np.array(d.get("oob_indices", []), dtype=np.int64),
    )


def from_dict(d: dict[str, Any]) -> Forest:
    if d.get("schema") != SCHEMA_VERSION:
        raise ModelError(f"unsupported forest schema {d.get('schema')!r}")
    try:
        names = list(d["column_names"])
        index = {c: i for i, c in enumerate(names)}
        return Forest(
            trees=[_tree_from_dict(t, index) for t in d["trees"]],
            column_names=names,
            config=ForestConfig(**d["config"]),
            n_train_rows=int(d["n_train_rows"]),
            class_order=tuple(d.get("class_order", CLASS_NAMES)),
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed forest: {exc}") from exc


def dumps(f: Forest) -> str:
    return json.dumps(to_dict(f), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> Forest:
    try:
        return from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not JSON: {exc}") from exc

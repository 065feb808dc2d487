"""Correlation pruning of data points.

Columns are clustered by complete linkage on ``1 - |rho|`` (Spearman) and
the tree is cut at ``1 - threshold``. Complete linkage means every pair inside
a cluster satisfies ``|rho| >= threshold``. Each multi-member cluster keeps its
earliest column (canonical order) and drops the rest. Constant columns are
dropped up front.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .errors import ColumnMismatch, TooFewRows
from .stats import average_ranks

DEFAULT_THRESHOLD = 0.7
ZERO_VARIANCE = "zero variance"
# rho is rounded before clustering so that permuting rows (which perturbs the
# last bits of the sums) cannot change merge order.
RHO_DECIMALS = 12


@dataclass
class CorrelationMatrix:
    column_names: list[str]
    rho: np.ndarray
    constant: list[str] = field(default_factory=list)


@dataclass
class PruneReport:
    kept: list[str]
    # removed column -> kept representative, or ZERO_VARIANCE for dropped constants
    removed: dict[str, str]
    threshold: float = DEFAULT_THRESHOLD

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["column", "status", "representative"])
        for c in self.kept:
            w.writerow([c, "kept", ""])
        for c, rep in self.removed.items():
            if rep == ZERO_VARIANCE:
                w.writerow([c, "zero_variance", ""])
            else:
                w.writerow([c, "removed", rep])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, threshold: float = DEFAULT_THRESHOLD) -> "PruneReport":
        kept, removed = [], {}
        for row in csv.DictReader(io.StringIO(text)):
            if row["status"] == "kept":
                kept.append(row["column"])
            elif row["status"] == "zero_variance":
                removed[row["column"]] = ZERO_VARIANCE
            else:
                removed[row["column"]] = row["representative"]
        return cls(kept, removed, threshold)


def _as_matrix(rows, columns: Sequence[str] | None) -> tuple[np.ndarray, list[str]]:
    if isinstance(rows, np.ndarray):
        if columns is None:
            raise ColumnMismatch("column names required with an array")
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(columns):
            raise ColumnMismatch(f"array has {X.shape[-1]} columns, {len(columns)} names given")
        return X, list(columns)
    rows = list(rows)
    if not rows:
        raise TooFewRows("no rows")
    if columns is None:
        columns = list(rows[0].keys())
    colset = set(columns)
    for i, r in enumerate(rows):
        if set(r.keys()) != colset:
            raise ColumnMismatch(f"row {i} has a different column set")
    return np.array([[r[c] for c in columns] for r in rows], dtype=np.float64), list(columns)


def correlation_matrix(rows: np.ndarray | Sequence[Mapping[str, float]], columns: Sequence[str] | None = None) -> CorrelationMatrix:
    """Spearman rho between every pair of columns (average ranks for ties).

    Constant columns get rho = 0 against every other column and are listed in
    ``constant``.
    """
    X, names = _as_matrix(rows, columns)
    if X.shape[0] < 3:
        raise TooFewRows(f"need >= 3 rows, got {X.shape[0]}")
    R = np.column_stack([average_ranks(X[:, j]) for j in range(X.shape[1])]) if X.shape[1] else X
    R = R - R.mean(axis=0)
    norms = np.sqrt((R * R).sum(axis=0))
    const = norms == 0
    safe = np.where(const, 1.0, norms)
    Z = R / safe
    rho = np.clip(Z.T @ Z, -1.0, 1.0)
    rho[const, :] = 0.0
    rho[:, const] = 0.0
    np.fill_diagonal(rho, 1.0)
    return CorrelationMatrix(names, rho, [n for n, c in zip(names, const) if c])


def cluster_and_select(cm: CorrelationMatrix, threshold: float = DEFAULT_THRESHOLD) -> PruneReport:
    names = cm.column_names
    constant = set(cm.constant)
    live = [i for i, n in enumerate(names) if n not in constant]
    removed: dict[str, str] = {n: ZERO_VARIANCE for n in names if n in constant}
    if not live:
        # keep something so downstream models have a column to look at
        if names:
            removed.pop(names[0], None)
            return PruneReport([names[0]], removed, threshold)
        return PruneReport([], removed, threshold)
    if len(live) == 1:
        return PruneReport([names[live[0]]], removed, threshold)

    sub = np.abs(np.round(cm.rho[np.ix_(live, live)], RHO_DECIMALS))
    dist = np.clip(1.0 - sub, 0.0, None)
    np.fill_diagonal(dist, 0.0)
    dist = (dist + dist.T) / 2
    Z = linkage(squareform(dist, checks=False), method="complete")
    labels = fcluster(Z, t=1.0 - threshold, criterion="distance")

    groups: dict[int, list[int]] = {}
    for pos, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(live[pos])
    kept_idx = []
    for members in groups.values():
        members.sort()
        rep = members[0]
        kept_idx.append(rep)
        for other in members[1:]:
            removed[names[other]] = names[rep]
    kept = [names[i] for i in sorted(kept_idx)]
    removed = {n: removed[n] for n in names if n in removed}
    return PruneReport(kept, removed, threshold)


def clusters(report: PruneReport) -> list[list[str]]:
    """Multi-member clusters as lists, representative first."""
    out: dict[str, list[str]] = {}
    for col, rep in report.removed.items():
        if rep != ZERO_VARIANCE:
            out.setdefault(rep, [rep]).append(col)
    return list(out.values())


def fit_prune(X: np.ndarray, columns: Sequence[str], threshold: float = DEFAULT_THRESHOLD) -> PruneReport:
    return cluster_and_select(correlation_matrix(X, columns), threshold)

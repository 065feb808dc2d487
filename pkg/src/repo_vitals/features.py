"""Windowed temporal features.

A scenario (n, m) looks at the last ``n`` months before an anchor, split into
``n/m`` intervals of ``m`` months each. Every interval yields 13 counts, so a
repository becomes a vector of ``13 * n/m`` data points named
``<feature>_T<a>_<b>`` where months ``a..b`` are counted from the start of the
window (interval 1 is the oldest).

A month is a fixed 30-day block counted backwards from the anchor. Interval
membership is half-open ``[start, end)``, except that the newest interval also
contains the anchor instant itself, so the commit that defines the default
anchor is counted.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientHistory, InvalidScenario
from .ingest.models import RepoSnapshot
from .timeutil import SECONDS_PER_DAY, SECONDS_PER_MONTH, epoch

logger = logging.getLogger(__name__)

FEATURES = (
    "forks",
    "open_issues",
    "closed_issues",
    "open_pulls",
    "closed_pulls",
    "merged_pulls",
    "commits",
    "max_days_without_commits",
    "max_contributions_by_developer",
    "new_contributors",
    "distinct_contributors",
    "owner_projects",
    "owner_commits",
)

VALID_LENGTHS = (6, 12, 18, 24)
VALID_INTERVALS = (3, 6, 12)


@dataclass(frozen=True)
class Scenario:
    length_months: int
    interval_months: int

    def __post_init__(self) -> None:
        n, m = self.length_months, self.interval_months
        if n not in VALID_LENGTHS or m not in VALID_INTERVALS or n % m or n < m:
            raise InvalidScenario(f"invalid scenario (n={n}, m={m})")

    @property
    def k(self) -> int:
        return self.length_months // self.interval_months

    @property
    def n_data_points(self) -> int:
        return len(FEATURES) * self.k

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        try:
            n, m = (int(x) for x in text.replace(" ", "").split(","))
        except ValueError as exc:
            raise InvalidScenario(f"scenario must look like 'n,m', got {text!r}") from exc
        return cls(n, m)

    def __str__(self) -> str:
        return f"{self.length_months},{self.interval_months}"


# The ten scenarios, in table order.
SCENARIOS = tuple(
    Scenario(n, m) for n, m in [(6, 3), (6, 6), (12, 3), (12, 6), (12, 12), (18, 3), (18, 6), (24, 3), (24, 6), (24, 12)]
)


@dataclass(frozen=True)
class Interval:
    index: int
    start_month: int
    end_month: int
    start_ts: datetime
    end_ts: datetime

    @property
    def tag(self) -> str:
        return f"T{self.start_month}_{self.end_month}"

    @property
    def days(self) -> int:
        return int((self.end_ts - self.start_ts).total_seconds()) // SECONDS_PER_DAY


def make_intervals(anchor: datetime, scenario: Scenario) -> list[Interval]:
    n, m = scenario.length_months, scenario.interval_months
    out = []
    for i in range(1, scenario.k + 1):
        a, b = (i - 1) * m + 1, i * m
        start = anchor - timedelta(days=30 * (n - a + 1))
        end = anchor - timedelta(days=30 * (n - b))
        out.append(Interval(i, a, b, start, end))
    return out


def max_gap_days(commit_ts: Sequence[datetime], iv: Interval) -> int:
    """Longest stretch without commits inside ``iv``, in whole days (floor).

    The gaps considered are interval start -> first commit, commit -> commit,
    and last commit -> interval end. With no commits the answer is the
    interval length.
    """
    ts = np.array(sorted(epoch(t) for t in commit_ts), dtype=np.int64)
    return _gap_days(ts, epoch(iv.start_ts), epoch(iv.end_ts))


def _gap_days(ts: np.ndarray, start: int, end: int) -> int:
    if ts.size == 0:
        return (end - start) // SECONDS_PER_DAY
    edges = np.concatenate(([start], ts, [end]))
    return int(np.diff(edges).max()) // SECONDS_PER_DAY


@dataclass
class FeatureMatrix:
    repo_id: str
    scenario: Scenario
    intervals: list[Interval]
    values: np.ndarray  # shape (13, k)

    @property
    def names(self) -> list[str]:
        return data_point_names(self.scenario)


@lru_cache(maxsize=None)
def _names(n: int, m: int) -> tuple[str, ...]:
    k = n // m
    return tuple(f"{f}_T{(i - 1) * m + 1}_{i * m}" for f in FEATURES for i in range(1, k + 1))


def data_point_names(scenario: Scenario) -> list[str]:
    """Canonical order: feature row order, then interval index ascending."""
    return list(_names(scenario.length_months, scenario.interval_months))


def scenario_from_columns(columns: Sequence[str]) -> Scenario:
    """Recover the scenario from a full (unpruned) set of data-point names."""
    spans = []
    for c in columns:
        _, sep, tag = c.rpartition("_T")
        a, _, b = tag.partition("_")
        if not sep or not a.isdigit() or not b.isdigit():
            raise InvalidScenario(f"not a data-point name: {c!r}")
        spans.append((int(a), int(b)))
    if not spans:
        raise InvalidScenario("no data-point columns")
    return Scenario(max(b for _, b in spans), spans[0][1] - spans[0][0] + 1)


class _Arrays:
    """Epoch-second arrays derived once per snapshot."""

    def __init__(self, s: RepoSnapshot) -> None:
        self.commit_ts = np.fromiter((epoch(c.timestamp) for c in s.commits), dtype=np.int64, count=len(s.commits))
        authors = [c.author_id for c in s.commits]
        uniq = {a: i for i, a in enumerate(dict.fromkeys(authors))}
        self.commit_author = np.fromiter((uniq[a] for a in authors), dtype=np.int64, count=len(authors))
        self.n_authors = len(uniq)
        first_seen = np.full(self.n_authors, np.iinfo(np.int64).max, dtype=np.int64)
        if len(authors):
            np.minimum.at(first_seen, self.commit_author, self.commit_ts)
        self.author_first = np.sort(first_seen)
        self.fork_ts = np.sort(np.array([epoch(f.created_at) for f in s.forks], dtype=np.int64))
        self.issue_open = np.sort(np.array([epoch(i.opened_at) for i in s.issues], dtype=np.int64))
        self.issue_close = np.sort(np.array([epoch(i.closed_at) for i in s.issues if i.closed_at], dtype=np.int64))
        self.pull_open = np.sort(np.array([epoch(p.opened_at) for p in s.pulls], dtype=np.int64))
        self.pull_close = np.sort(np.array([epoch(p.closed_at) for p in s.pulls if p.closed_at], dtype=np.int64))
        self.pull_merge = np.sort(np.array([epoch(p.merged_at) for p in s.pulls if p.merged_at], dtype=np.int64))


def _count(sorted_ts: np.ndarray, lo: int, hi: int, closed: bool) -> int:
    right = "right" if closed else "left"
    return int(np.searchsorted(sorted_ts, hi, side=right) - np.searchsorted(sorted_ts, lo, side="left"))


def extract_features(s: RepoSnapshot, scenario: Scenario, anchor: datetime | None = None) -> FeatureMatrix:
    """Build the 13 x k feature grid; the anchor defaults to the last commit."""
    if not s.commits:
        raise InsufficientHistory(f"{s.repo_id}: no commits")
    anchor = anchor if anchor is not None else s.commits[-1].timestamp
    arr = _Arrays(s)
    anchor_s = epoch(anchor)
    window_start = anchor_s - scenario.length_months * SECONDS_PER_MONTH
    if arr.commit_ts[0] > window_start:
        span = (anchor_s - arr.commit_ts[0]) / SECONDS_PER_MONTH
        raise InsufficientHistory(
            f"{s.repo_id}: {max(span, 0):.1f} months of history before anchor, scenario needs {scenario.length_months}"
        )

    intervals = make_intervals(anchor, scenario)
    values = np.zeros((len(FEATURES), scenario.k), dtype=np.float64)
    projects = s.owner_stats.projects_created
    owner_commits = s.owner_stats.owner_commit_count
    for j, iv in enumerate(intervals):
        lo, hi = epoch(iv.start_ts), epoch(iv.end_ts)
        closed = j == scenario.k - 1
        c_lo = np.searchsorted(arr.commit_ts, lo, side="left")
        c_hi = np.searchsorted(arr.commit_ts, hi, side="right" if closed else "left")
        ts = arr.commit_ts[c_lo:c_hi]
        who = arr.commit_author[c_lo:c_hi]
        per_dev = np.bincount(who) if who.size else np.zeros(0, dtype=np.int64)
        values[:, j] = (
            _count(arr.fork_ts, lo, hi, closed),
            _count(arr.issue_open, lo, hi, closed),
            _count(arr.issue_close, lo, hi, closed),
            _count(arr.pull_open, lo, hi, closed),
            _count(arr.pull_close, lo, hi, closed),
            _count(arr.pull_merge, lo, hi, closed),
            ts.size,
            _gap_days(ts, lo, hi),
            per_dev.max() if per_dev.size else 0,
            _count(arr.author_first, lo, hi, closed),
            np.count_nonzero(per_dev),
            projects,
            owner_commits,
        )
    return FeatureMatrix(s.repo_id, scenario, intervals, values)


def flatten(mx: FeatureMatrix) -> dict[str, float]:
    """Ordered name -> value mapping in canonical data-point order."""
    return dict(zip(mx.names, mx.values.reshape(-1).tolist()))


class AnchorPolicy(str, Enum):
    LAST_COMMIT = "last_commit"
    OBSERVED = "observed"

    def anchor_for(self, s: RepoSnapshot) -> datetime | None:
        return s.fetched_at if self is AnchorPolicy.OBSERVED else None


LABEL_CODES = {"unmaintained": 0, "active": 1}
CLASS_NAMES = ("unmaintained", "active")


@dataclass
class Dataset:
    """Rows of flattened feature vectors with optional labels.

    ``y`` uses the forest's class order: 0 = unmaintained, 1 = active, -1 = unlabeled.
    """

    repo_ids: list[str]
    columns: list[str]
    X: np.ndarray
    y: np.ndarray
    skipped: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.repo_ids)

    def select_columns(self, columns: Sequence[str]) -> "Dataset":
        index = {c: i for i, c in enumerate(self.columns)}
        idx = [index[c] for c in columns]
        return Dataset(list(self.repo_ids), list(columns), self.X[:, idx], self.y.copy(), dict(self.skipped))

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset([self.repo_ids[i] for i in rows], list(self.columns), self.X[rows], self.y[rows])

    def labeled(self) -> "Dataset":
        return self.subset(np.flatnonzero(self.y >= 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        has_labels = bool((self.y >= 0).any())
        w.writerow(["repo_id", *self.columns, *(["label"] if has_labels else [])])
        for rid, row, lab in zip(self.repo_ids, self.X, self.y):
            cells = [_fmt(v) for v in row]
            if has_labels:
                cells.append(CLASS_NAMES[lab] if lab >= 0 else "unlabeled")
            w.writerow([rid, *cells])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        has_labels = header[-1] == "label"
        columns = header[1:-1] if has_labels else header[1:]
        ids, rows, ys = [], [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1 : 1 + len(columns)]])
            ys.append(LABEL_CODES.get(rec[-1], -1) if has_labels else -1)
        X = np.array(rows, dtype=np.float64).reshape(len(ids), len(columns))
        return cls(ids, columns, X, np.array(ys, dtype=np.int64))


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def vectors_to_matrix(rows: Iterable[Mapping[str, float]], columns: Sequence[str]) -> np.ndarray:
    return np.array([[r[c] for c in columns] for r in rows], dtype=np.float64)


def build_dataset(
    entries: Iterable,
    scenario: Scenario,
    anchor: AnchorPolicy = AnchorPolicy.LAST_COMMIT,
    skip_insufficient: bool = True,
) -> Dataset:
    """Extract features for corpus entries (``CorpusEntry`` or bare snapshots).

    Repositories with too little history are skipped (and listed in
    ``Dataset.skipped``) unless ``skip_insufficient`` is false.
    """
    columns = data_point_names(scenario)
    ids, rows, ys, skipped = [], [], [], {}
    for e in entries:
        s = getattr(e, "snapshot", e)
        label = getattr(e, "label", "unlabeled")
        try:
            mx = extract_features(s, scenario, anchor.anchor_for(s))
        except InsufficientHistory as exc:
            if not skip_insufficient:
                raise
            skipped[s.repo_id] = str(exc)
            logger.info("skipping %s", exc)
            continue
        ids.append(s.repo_id)
        rows.append(mx.values.reshape(-1))
        ys.append(LABEL_CODES.get(label, -1))
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(columns))
    return Dataset(ids, columns, X, np.array(ys, dtype=np.int64), skipped)

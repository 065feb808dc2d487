"""Level of Maintenance Activity (LMA).

For a repository the forest labels active, ``LMA = 2 * (p_active - 0.5) * 100``
maps the vote fraction [0.5, 1] onto [0, 100]. Levels compare the value with
the quartiles of a reference population of active repositories; a value on a
quartile boundary falls into the lower band.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientHistory, TooFewRows, UnmaintainedProject, ZeroVariance
from .features import Scenario, extract_features, flatten
from .forest import Forest, Prediction, predict_proba
from .ingest.models import RepoSnapshot
from .stats import spearman_rho
from .timeutil import format_ts

SERIES_SPACING = timedelta(days=90)
CORE_SHARE = 0.8

UNMAINTAINED = "unmaintained"
NOT_ANALYSED = "not_analysed"
INSUFFICIENT = "insufficient_history"


@dataclass(frozen=True)
class LmaValue:
    value: float
    p_active: float


@dataclass(frozen=True)
class LmaLevel:
    level: str
    color: str


HIGH = LmaLevel("high", "green")
FAIR = LmaLevel("fair", "yellow")
BORDERLINE = LmaLevel("borderline", "orange")
UNMAINTAINED_LEVEL = LmaLevel(UNMAINTAINED, "red")
NOT_ANALYSED_LEVEL = LmaLevel(NOT_ANALYSED, "grey")
LEVELS = (HIGH, FAIR, BORDERLINE, UNMAINTAINED_LEVEL, NOT_ANALYSED_LEVEL)


def lma_from_prediction(pred: Prediction | float) -> LmaValue:
    p = pred.p_active if isinstance(pred, Prediction) else float(pred)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p_active must be in [0, 1], got {p}")
    if p < 0.5:
        raise UnmaintainedProject(f"no LMA for an unmaintained prediction (p_active={p})")
    # 200p - 100 is the same affine map with a single rounding step
    return LmaValue(200 * p - 100, p)


def p_active_from_lma(value: float) -> float:
    return (value + 100) / 200


def level_of(v: LmaValue | float | str | None, quartiles: Sequence[float]) -> LmaLevel:
    """Band for an LMA value, or for the ``unmaintained`` / ``not_analysed`` markers (None = not analysed)."""
    if v is None or v == NOT_ANALYSED:
        return NOT_ANALYSED_LEVEL
    if v == UNMAINTAINED:
        return UNMAINTAINED_LEVEL
    q1, q2, q3 = quartiles
    if not q1 <= q2 <= q3:
        raise ValueError(f"quartiles must be ordered, got {tuple(quartiles)}")
    value = v.value if isinstance(v, LmaValue) else float(v)
    if value > q3:
        return HIGH
    if value > q1:
        return FAIR
    return BORDERLINE


def quartiles_of(values: Iterable[float]) -> tuple[float, float, float]:
    """First, second and third quartile (linear interpolation)."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise TooFewRows("no LMA values to take quartiles of")
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return float(q1), float(q2), float(q3)


def assess(f: Forest, s: RepoSnapshot, scenario: Scenario, anchor: datetime | None = None) -> tuple[Prediction, LmaValue | None]:
    pred = predict_proba(f, flatten(extract_features(s, scenario, anchor)))
    return pred, (lma_from_prediction(pred) if pred.label == "active" else None)


# -- historical series ---------------------------------------------------------


@dataclass(frozen=True)
class LmaPoint:
    date: datetime
    status: str  # active | unmaintained | insufficient_history
    lma: LmaValue | None = None


@dataclass
class LmaSeries:
    repo_id: str
    points: list[LmaPoint]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("repo_id,date,status,p_active,lma\n")
        for pt in self.points:
            p = "" if pt.lma is None else repr(pt.lma.p_active)
            v = "" if pt.lma is None else repr(pt.lma.value)
            buf.write(f"{self.repo_id},{format_ts(pt.date)},{pt.status},{p},{v}\n")
        return buf.getvalue()


def evaluation_dates(end: datetime, count: int) -> list[datetime]:
    """``count`` dates spaced 90 days apart, ending at ``end``, oldest first."""
    return [end - SERIES_SPACING * i for i in range(count - 1, -1, -1)]


def _state_for(states: Sequence[RepoSnapshot], date: datetime) -> RepoSnapshot:
    for s in states:
        if s.fetched_at >= date:
            return s
    return states[-1]


def historical_series(
    states: Sequence[RepoSnapshot] | RepoSnapshot,
    f: Forest,
    scenario: Scenario,
    dates: Sequence[datetime] | None = None,
) -> LmaSeries:
    """LMA (or the unmaintained marker) at a sequence of evaluation dates.

    Without ``dates`` every snapshot state is evaluated at its own fetch time.
    With ``dates``, each date uses the earliest state fetched at or after it.
    Features are anchored at the evaluation date, not at the last commit. A
    date with too little history becomes an ``insufficient_history`` gap.
    """
    if isinstance(states, RepoSnapshot):
        states = [states]
    states = sorted(states, key=lambda s: s.fetched_at)
    if not states:
        raise ValueError("no snapshot states")
    if dates is None:
        dates = [s.fetched_at for s in states]
    dates = sorted(dates)
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValueError("evaluation dates must be distinct")
    points = []
    for d in dates:
        try:
            pred, value = assess(f, _state_for(states, d), scenario, anchor=d)
        except InsufficientHistory:
            points.append(LmaPoint(d, INSUFFICIENT))
            continue
        points.append(LmaPoint(d, pred.label, value))
    return LmaSeries(states[-1].repo_id, points)


def levels_over_time(
    series: Sequence[LmaSeries],
    recompute_quartiles: bool = True,
    quartiles: Sequence[float] | None = None,
) -> dict[str, list[LmaLevel]]:
    """Level per repository and date.

    By default quartiles are recomputed at each date from the active values
    present at that date; with ``recompute_quartiles=False`` the given
    ``quartiles`` (or, if omitted, those of the first date) are used
    throughout. All series must share the same dates.
    """
    if not series:
        return {}
    n_dates = len(series[0].points)
    if any(len(s.points) != n_dates for s in series):
        raise ValueError("series have different date counts")
    per_date = []
    for i in range(n_dates):
        active = [s.points[i].lma.value for s in series if s.points[i].lma is not None]
        per_date.append(quartiles_of(active) if active else None)
    frozen = tuple(quartiles) if quartiles is not None else per_date[0]
    out: dict[str, list[LmaLevel]] = {}
    for s in series:
        levels = []
        for i, pt in enumerate(s.points):
            q = per_date[i] if recompute_quartiles else frozen
            if pt.status == UNMAINTAINED:
                levels.append(UNMAINTAINED_LEVEL)
            elif pt.lma is None or q is None:
                levels.append(NOT_ANALYSED_LEVEL)
            else:
                levels.append(level_of(pt.lma, q))
        out[s.repo_id] = levels
    return out


# -- correlation analysis ------------------------------------------------------


def core_contributors(s: RepoSnapshot | Sequence[str], share: float = CORE_SHARE) -> list[str]:
    """Smallest set of authors jointly responsible for at least ``share`` of the commits.

    Authors are taken greedily by commit count (ties by author id), which is
    optimal for this covering problem.
    """
    authors = [c.author_id for c in s.commits] if isinstance(s, RepoSnapshot) else list(s)
    if not authors:
        return []
    counts = sorted(Counter(authors).items(), key=lambda kv: (-kv[1], kv[0]))
    need = share * len(authors)
    core, covered = [], 0
    for author, n in counts:
        core.append(author)
        covered += n
        if covered >= need:
            break
    return core


def lma_correlations(rows: Sequence[tuple[RepoSnapshot, float]]) -> dict[str, float | None]:
    """Spearman rho between LMA and stars, contributors, core contributors and size.

    ``None`` where a variable is constant across the rows.
    """
    if len(rows) < 3:
        raise TooFewRows("need at least 3 repositories")
    lma = [v for _, v in rows]
    variables: Mapping[str, list[float]] = {
        "stars": [s.star_count for s, _ in rows],
        "contributors": [len({c.author_id for c in s.commits}) for s, _ in rows],
        "core_contributors": [len(core_contributors(s)) for s, _ in rows],
        "size_loc": [s.size_loc for s, _ in rows],
    }
    out: dict[str, float | None] = {}
    for name, xs in variables.items():
        try:
            out[name] = spearman_rho(lma, xs)
        except ZeroVariance:
            out[name] = None
    return out


def badge_payload(
    owner: str,
    repo: str,
    pred: Prediction | None,
    quartiles: Sequence[float],
    model_version: str,
    computed_at: datetime,
) -> dict:
    """Badge dict; ``pred=None`` means the repository could not be analysed."""
    base = {"owner": owner, "repo": repo, "computed_at": format_ts(computed_at), "model_version": model_version}
    if pred is None:
        lvl = NOT_ANALYSED_LEVEL
        return {**base, "label": NOT_ANALYSED, "level": lvl.level, "color": lvl.color}
    if pred.label != "active":
        lvl = UNMAINTAINED_LEVEL
        return {**base, "label": UNMAINTAINED, "level": lvl.level, "color": lvl.color, "p_active": pred.p_active}
    value = lma_from_prediction(pred)
    lvl = level_of(value, quartiles)
    return {
        **base,
        "label": "active",
        "lma": value.value,
        "level": lvl.level,
        "color": lvl.color,
        "p_active": pred.p_active,
    }

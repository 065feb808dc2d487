"""Kaplan-Meier survival over repository lifetimes.

A lifetime runs from the first to the last commit, in 30-day months. A
repository that became unmaintained contributes an event; one still active is
right-censored at its observation time. The product-limit estimate is built
with exact rationals, so without censoring it equals the empirical survival
function exactly.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptySample, NoCommits, TooFewGroups
from .ingest.models import RepoSnapshot
from .stats import EffectSize, TestResult, cliffs_delta, kruskal_wallis, mann_whitney_u
from .timeutil import SECONDS_PER_MONTH

logger = logging.getLogger(__name__)

# duration given to single-commit histories: one day
MIN_DURATION_MONTHS = 1 / 30
GROUP_KEYS = ("account_type", "language", "domain")


@dataclass(frozen=True)
class LifetimeSample:
    repo_id: str
    duration_months: float
    event: bool
    groups: dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not self.duration_months > 0:
            raise ValueError(f"{self.repo_id}: duration must be positive")


def lifetime(s: RepoSnapshot, observed_at: datetime | None = None, unmaintained: bool = True) -> LifetimeSample:
    """Lifetime of one repository.

    Events last from the first to the last commit. Censored lifetimes (still
    active) last from the first commit to ``observed_at``, defaulting to the
    snapshot's fetch time.
    """
    if not s.commits:
        raise NoCommits(f"{s.repo_id}: no commits")
    first = s.commits[0].timestamp
    end = s.commits[-1].timestamp if unmaintained else (observed_at or s.fetched_at)
    months = (end - first).total_seconds() / SECONDS_PER_MONTH
    groups = {
        "account_type": s.owner_kind.value,
        "language": s.primary_language or "unknown",
        "domain": s.domain_label or "unlabeled",
    }
    return LifetimeSample(s.repo_id, max(MIN_DURATION_MONTHS, months), unmaintained, groups)


def lifetimes(entries: Iterable, observed_at: datetime | None = None) -> list[LifetimeSample]:
    """Lifetimes of labeled corpus entries; unmaintained entries are events."""
    out = []
    for e in entries:
        if e.label not in ("active", "unmaintained"):
            continue
        try:
            out.append(lifetime(e.snapshot, observed_at, e.label == "unmaintained"))
        except NoCommits as exc:
            logger.info("skipping %s", exc)
    return out


@dataclass(frozen=True)
class Step:
    t: float
    S: float
    at_risk: int
    events: int


@dataclass
class SurvivalCurve:
    steps: list[Step]

    def at(self, t: float) -> float:
        """S(t): value of the last step at or before ``t``."""
        value = 1.0
        for st in self.steps:
            if st.t > t:
                break
            value = st.S
        return value

    def to_rows(self, group: str = "") -> list[str]:
        return [f"{st.t!r},{st.S!r},{st.at_risk},{st.events},{group}" for st in self.steps]

    def to_csv(self, group: str = "") -> str:
        return "t,S,at_risk,events,group\n" + "".join(r + "\n" for r in self.to_rows(group))


def kaplan_meier(samples: Sequence[LifetimeSample], truncate_at: float | None = None) -> SurvivalCurve:
    """Product-limit estimate; one step at t=0 plus one per distinct event time.

    A censored lifetime equal to an event time is still at risk at that time.
    ``truncate_at`` left-truncates: only lifetimes of at least that length are
    used and S stays 1 until then (survival conditional on reaching it).
    """
    if not samples:
        raise EmptySample("no lifetimes")
    if truncate_at is not None:
        samples = [s for s in samples if s.duration_months >= truncate_at]
        if not samples:
            raise EmptySample(f"no lifetimes of at least {truncate_at} months")
    durations = sorted(samples, key=lambda s: s.duration_months)
    n = len(durations)
    steps = [Step(0.0, 1.0, n, 0)]
    surv = Fraction(1)
    i = 0
    while i < n:
        t = durations[i].duration_months
        j = i
        d = 0
        while j < n and durations[j].duration_months == t:
            d += durations[j].event
            j += 1
        if d:
            at_risk = n - i
            surv *= Fraction(at_risk - d, at_risk)
            steps.append(Step(float(t), float(surv), at_risk, d))
        i = j
    return SurvivalCurve(steps)


@dataclass(frozen=True)
class PairwiseComparison:
    group_a: str
    group_b: str
    mann_whitney: TestResult
    effect: EffectSize


@dataclass
class GroupedSurvival:
    key: str
    curves: dict[str, SurvivalCurve]
    pairwise: list[PairwiseComparison]
    kruskal: TestResult

    def to_csv(self) -> str:
        rows = ["t,S,at_risk,events,group"]
        for g, c in self.curves.items():
            rows.extend(c.to_rows(g))
        return "\n".join(rows) + "\n"

    def comparisons_csv(self) -> str:
        rows = ["group_a,group_b,u,p_value,d,magnitude"]
        for pc in self.pairwise:
            rows.append(
                f"{pc.group_a},{pc.group_b},{pc.mann_whitney.statistic!r},{pc.mann_whitney.p_value!r},"
                f"{pc.effect.d!r},{pc.effect.magnitude}"
            )
        rows.append(f"kruskal_wallis,,{self.kruskal.statistic!r},{self.kruskal.p_value!r},,")
        return "\n".join(rows) + "\n"


def grouped_curves(samples: Sequence[LifetimeSample], key: str, truncate_at: float | None = None) -> GroupedSurvival:
    """One curve per group value, pairwise two-sided Mann-Whitney + Cliff's delta, and Kruskal-Wallis.

    Groups with fewer than two lifetimes are left out.
    """
    if key not in GROUP_KEYS:
        raise ValueError(f"group key must be one of {', '.join(GROUP_KEYS)}")
    by_group: dict[str, list[LifetimeSample]] = {}
    for s in samples:
        by_group.setdefault(s.groups.get(key, "unknown"), []).append(s)
    small = sorted(g for g, members in by_group.items() if len(members) < 2)
    if small:
        logger.info("dropping groups with < 2 lifetimes: %s", ", ".join(small))
    groups = {g: by_group[g] for g in sorted(by_group) if g not in small}
    if len(groups) < 2:
        raise TooFewGroups(f"need >= 2 groups with >= 2 lifetimes by {key}, got {len(groups)}")
    curves = {g: kaplan_meier(members, truncate_at) for g, members in groups.items()}
    durations = {g: [s.duration_months for s in members] for g, members in groups.items()}
    pairwise = [
        PairwiseComparison(a, b, mann_whitney_u(durations[a], durations[b]), cliffs_delta(durations[a], durations[b]))
        for a, b in itertools.combinations(groups, 2)
    ]
    return GroupedSurvival(key, curves, pairwise, kruskal_wallis(list(durations.values())))


def survivability_quartiles(samples: Sequence[LifetimeSample]) -> tuple[list[LifetimeSample], list[LifetimeSample]]:
    """(first quartile, fourth quartile) of lifetimes, ordered by (duration, repo_id)."""
    ordered = sorted(samples, key=lambda s: (s.duration_months, s.repo_id))
    q = len(ordered) // 4
    if q == 0:
        raise EmptySample("need at least 4 lifetimes for quartiles")
    return ordered[:q], ordered[-q:]

"""Snapshot data model: one repository's event history plus metadata."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any

from ..errors import MalformedError
from ..timeutil import format_ts, parse_ts, utc

SCHEMA_VERSION = 1


class OwnerKind(str, Enum):
    USER = "user"
    ORGANIZATION = "organization"


@dataclass(frozen=True)
class CommitEvent:
    author_id: str
    timestamp: datetime


@dataclass(frozen=True)
class IssueEvent:
    opened_at: datetime
    author_id: str
    closed_at: datetime | None = None


@dataclass(frozen=True)
class PullEvent:
    opened_at: datetime
    author_id: str
    closed_at: datetime | None = None
    merged_at: datetime | None = None


@dataclass(frozen=True)
class ForkEvent:
    created_at: datetime


@dataclass(frozen=True)
class OwnerStats:
    # Sampled once at fetch time and replicated across feature intervals.
    projects_created: int = 0
    owner_commit_count: int = 0


@dataclass(frozen=True)
class RepoSnapshot:
    owner_login: str
    repo_name: str
    owner_kind: OwnerKind
    primary_language: str
    fetched_at: datetime
    commits: tuple[CommitEvent, ...] = ()
    issues: tuple[IssueEvent, ...] = ()
    pulls: tuple[PullEvent, ...] = ()
    forks: tuple[ForkEvent, ...] = ()
    releases: tuple[datetime, ...] = ()
    owner_stats: OwnerStats = field(default_factory=OwnerStats)
    repo_files: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()
    homepage_url: str | None = None
    readme_text: str = ""
    domain_label: str | None = None
    star_count: int = 0
    size_loc: int = 0

    @property
    def repo_id(self) -> str:
        return f"{self.owner_login}/{self.repo_name}"

    @property
    def first_commit(self) -> datetime | None:
        return self.commits[0].timestamp if self.commits else None

    @property
    def last_commit(self) -> datetime | None:
        return self.commits[-1].timestamp if self.commits else None


def canonicalize(s: RepoSnapshot) -> RepoSnapshot:
    """Truncate timestamps to UTC seconds and sort every event list."""
    commits = sorted(
        (CommitEvent(c.author_id, utc(c.timestamp)) for c in s.commits),
        key=lambda c: (c.timestamp, c.author_id),
    )
    issues = sorted(
        (IssueEvent(utc(i.opened_at), i.author_id, _opt(i.closed_at)) for i in s.issues),
        key=lambda i: (i.opened_at, i.author_id, i.closed_at is None, i.closed_at or i.opened_at),
    )
    pulls = sorted(
        (
            PullEvent(utc(p.opened_at), p.author_id, _opt(p.closed_at), _opt(p.merged_at))
            for p in s.pulls
        ),
        key=lambda p: (
            p.opened_at,
            p.author_id,
            p.closed_at is None,
            p.closed_at or p.opened_at,
            p.merged_at is None,
            p.merged_at or p.opened_at,
        ),
    )
    return replace(
        s,
        owner_kind=OwnerKind(s.owner_kind),
        fetched_at=utc(s.fetched_at),
        commits=tuple(commits),
        issues=tuple(issues),
        pulls=tuple(pulls),
        forks=tuple(sorted((ForkEvent(utc(f.created_at)) for f in s.forks), key=lambda f: f.created_at)),
        releases=tuple(sorted(utc(r) for r in s.releases)),
        repo_files=tuple(sorted(s.repo_files)),
        labels=tuple(sorted(s.labels)),
    )


def _opt(ts: datetime | None) -> datetime | None:
    return None if ts is None else utc(ts)


def validate(s: RepoSnapshot, source: str = "<snapshot>") -> None:
    """Raise MalformedError naming the offending field when an invariant fails."""

    def bad(fieldname: str, msg: str) -> MalformedError:
        return MalformedError(f"{source}: {fieldname}: {msg}")

    if not s.owner_login or not s.repo_name:
        raise bad("owner_login/repo_name", "must be non-empty")
    if s.star_count < 0:
        raise bad("star_count", "must be >= 0")
    if s.size_loc < 0:
        raise bad("size_loc", "must be >= 0")
    if s.owner_stats.projects_created < 0 or s.owner_stats.owner_commit_count < 0:
        raise bad("owner_stats", "counts must be >= 0")
    limit = s.fetched_at

    prev = None
    for n, c in enumerate(s.commits):
        if c.timestamp > limit:
            raise bad(f"commits[{n}].timestamp", "after fetched_at")
        if prev is not None and c.timestamp < prev:
            raise bad(f"commits[{n}].timestamp", "commits not sorted ascending")
        prev = c.timestamp
    for kind, events in (("issues", s.issues), ("pulls", s.pulls)):
        for n, e in enumerate(events):
            if e.opened_at > limit:
                raise bad(f"{kind}[{n}].opened_at", "after fetched_at")
            if e.closed_at is not None:
                if e.closed_at < e.opened_at:
                    raise bad(f"{kind}[{n}].closed_at", "closed_at < opened_at")
                if e.closed_at > limit:
                    raise bad(f"{kind}[{n}].closed_at", "after fetched_at")
            merged = getattr(e, "merged_at", None)
            if merged is not None:
                if e.closed_at is None:
                    raise bad(f"{kind}[{n}].merged_at", "merged_at without closed_at")
                if merged < e.opened_at or merged > limit:
                    raise bad(f"{kind}[{n}].merged_at", "outside [opened_at, fetched_at]")
    for n, f in enumerate(s.forks):
        if f.created_at > limit:
            raise bad(f"forks[{n}].created_at", "after fetched_at")
    for n, r in enumerate(s.releases):
        if r > limit:
            raise bad(f"releases[{n}]", "after fetched_at")


def _ts_or_none(ts: datetime | None) -> str | None:
    return None if ts is None else format_ts(ts)


def to_dict(s: RepoSnapshot) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "owner_login": s.owner_login,
        "repo_name": s.repo_name,
        "owner_kind": OwnerKind(s.owner_kind).value,
        "primary_language": s.primary_language,
        "domain_label": s.domain_label,
        "star_count": s.star_count,
        "size_loc": s.size_loc,
        "fetched_at": format_ts(s.fetched_at),
        "homepage_url": s.homepage_url,
        "readme_text": s.readme_text,
        "repo_files": list(s.repo_files),
        "labels": list(s.labels),
        "owner_stats": {
            "projects_created": s.owner_stats.projects_created,
            "owner_commit_count": s.owner_stats.owner_commit_count,
        },
        "commits": [[c.author_id, format_ts(c.timestamp)] for c in s.commits],
        "issues": [
            {"opened_at": format_ts(i.opened_at), "closed_at": _ts_or_none(i.closed_at), "author_id": i.author_id}
            for i in s.issues
        ],
        "pulls": [
            {
                "opened_at": format_ts(p.opened_at),
                "closed_at": _ts_or_none(p.closed_at),
                "merged_at": _ts_or_none(p.merged_at),
                "author_id": p.author_id,
            }
            for p in s.pulls
        ],
        "forks": [format_ts(f.created_at) for f in s.forks],
        "releases": [format_ts(r) for r in s.releases],
    }


def from_dict(d: dict[str, Any], source: str = "<snapshot>") -> RepoSnapshot:
    if d.get("schema") != SCHEMA_VERSION:
        raise MalformedError(f"{source}: schema: expected {SCHEMA_VERSION}, got {d.get('schema')!r}")
    try:

        def opt(v: str | None) -> datetime | None:
            return None if v is None else parse_ts(v)

        stats = d.get("owner_stats") or {}
        return RepoSnapshot(
            owner_login=d["owner_login"],
            repo_name=d["repo_name"],
            owner_kind=OwnerKind(d["owner_kind"]),
            primary_language=d.get("primary_language") or "",
            domain_label=d.get("domain_label"),
            star_count=int(d.get("star_count", 0)),
            size_loc=int(d.get("size_loc", 0)),
            fetched_at=parse_ts(d["fetched_at"]),
            homepage_url=d.get("homepage_url"),
            readme_text=d.get("readme_text") or "",
            repo_files=tuple(d.get("repo_files", ())),
            labels=tuple(d.get("labels", ())),
            owner_stats=OwnerStats(
                int(stats.get("projects_created", 0)), int(stats.get("owner_commit_count", 0))
            ),
            commits=tuple(CommitEvent(a, parse_ts(t)) for a, t in d.get("commits", ())),
            issues=tuple(
                IssueEvent(parse_ts(i["opened_at"]), i["author_id"], opt(i.get("closed_at")))
                for i in d.get("issues", ())
            ),
            pulls=tuple(
                PullEvent(
                    parse_ts(p["opened_at"]), p["author_id"], opt(p.get("closed_at")), opt(p.get("merged_at"))
                )
                for p in d.get("pulls", ())
            ),
            forks=tuple(ForkEvent(parse_ts(f)) for f in d.get("forks", ())),
            releases=tuple(parse_ts(r) for r in d.get("releases", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedError(f"{source}: {type(exc).__name__}: {exc}") from exc

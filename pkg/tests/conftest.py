from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from repo_vitals.ingest.models import CommitEvent, OwnerKind, OwnerStats, RepoSnapshot
from repo_vitals.synth import GeneratorConfig, generate_corpus

T0 = datetime(2018, 1, 1, tzinfo=timezone.utc)


def day(n: float) -> datetime:
    return T0 + timedelta(days=n)


def make_snapshot(
    commit_days=(0,),
    authors=None,
    owner: str = "octo",
    name: str = "repo",
    fetched_day: float | None = None,
    **fields,
) -> RepoSnapshot:
    """Snapshot with commits at ``T0 + d`` days; other fields via keywords."""
    authors = authors or ["alice"] * len(commit_days)
    commits = tuple(CommitEvent(a, day(d)) for a, d in zip(authors, commit_days))
    last = max(commit_days) if commit_days else 0
    fields.setdefault("owner_kind", OwnerKind.USER)
    fields.setdefault("primary_language", "Python")
    fields.setdefault("owner_stats", OwnerStats(3, 0))
    return RepoSnapshot(
        owner_login=owner,
        repo_name=name,
        fetched_at=day(fetched_day if fetched_day is not None else last + 1),
        commits=commits,
        **fields,
    )


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(GeneratorConfig(n_repos=60, fraction_unmaintained=0.25, seed=11))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

from .github import GitHubClient, RateGate, fetch_many, fetch_snapshot
from .models import (
    CommitEvent,
    ForkEvent,
    IssueEvent,
    OwnerKind,
    OwnerStats,
    PullEvent,
    RepoSnapshot,
    canonicalize,
    validate,
)
from .store import (
    Corpus,
    CorpusEntry,
    load_corpus,
    load_snapshot,
    read_manifest,
    save_corpus,
    save_snapshot,
    snapshot_history,
    write_manifest,
)

__all__ = [
    "CommitEvent",
    "Corpus",
    "CorpusEntry",
    "ForkEvent",
    "GitHubClient",
    "IssueEvent",
    "OwnerKind",
    "OwnerStats",
    "PullEvent",
    "RateGate",
    "RepoSnapshot",
    "canonicalize",
    "fetch_many",
    "fetch_snapshot",
    "load_corpus",
    "load_snapshot",
    "read_manifest",
    "save_corpus",
    "save_snapshot",
    "snapshot_history",
    "validate",
    "write_manifest",
]

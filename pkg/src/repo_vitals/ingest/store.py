"""Snapshot files and corpus manifests.

Layout of a corpus directory::

    <owner>__<name>.snapshot.json            latest snapshot of a repository
    <owner>__<name>@<YYYYmmddTHHMMSSZ>.snapshot.json
                                             earlier snapshots, never rewritten
    manifest.csv                             owner,name,label
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from ..errors import MalformedError, StorageError
from .models import RepoSnapshot, canonicalize, from_dict, to_dict, validate

logger = logging.getLogger(__name__)

SUFFIX = ".snapshot.json"
MANIFEST = "manifest.csv"
LABELS = ("active", "unmaintained", "unlabeled")


@dataclass
class CorpusEntry:
    snapshot: RepoSnapshot
    label: str = "unlabeled"

    @property
    def repo_id(self) -> str:
        return self.snapshot.repo_id


@dataclass
class Corpus:
    entries: list[CorpusEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[CorpusEntry]:
        return iter(self.entries)

    def labeled(self) -> "Corpus":
        return Corpus([e for e in self.entries if e.label != "unlabeled"])

    def get(self, repo_id: str) -> CorpusEntry | None:
        for e in self.entries:
            if e.repo_id == repo_id:
                return e
        return None


def snapshot_filename(owner: str, name: str) -> str:
    return f"{owner}__{name}{SUFFIX}"


def dumps(s: RepoSnapshot) -> str:
    return json.dumps(to_dict(s), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def save_snapshot(s: RepoSnapshot, directory: str | os.PathLike) -> Path:
    """Write ``s`` to ``<dir>/<owner>__<name>.snapshot.json`` and return the path.

    An existing file for the same repository with a different ``fetched_at`` is
    first preserved under a dated name, so earlier states stay available for
    historical evaluation.
    """
    s = canonicalize(s)
    validate(s, snapshot_filename(s.owner_login, s.repo_name))
    directory = Path(directory)
    path = directory / snapshot_filename(s.owner_login, s.repo_name)
    text = dumps(s)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        if path.exists():
            old = path.read_text(encoding="utf-8")
            if old != text:
                previous = load_snapshot(path)
                if previous.fetched_at != s.fetched_at:
                    stamp = previous.fetched_at.strftime("%Y%m%dT%H%M%SZ")
                    dated = directory / f"{s.owner_login}__{s.repo_name}@{stamp}{SUFFIX}"
                    if not dated.exists():
                        dated.write_text(old, encoding="utf-8")
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def load_snapshot(path: str | os.PathLike) -> RepoSnapshot:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedError(f"{path.name}: invalid JSON: {exc}") from exc
    s = from_dict(raw, path.name)
    validate(s, path.name)
    return s


def snapshot_history(directory: str | os.PathLike, owner: str, name: str) -> list[RepoSnapshot]:
    """All stored states of one repository, oldest first."""
    directory = Path(directory)
    paths = list(directory.glob(f"{owner}__{name}@*{SUFFIX}"))
    current = directory / snapshot_filename(owner, name)
    if current.exists():
        paths.append(current)
    states = [load_snapshot(p) for p in paths]
    return sorted(states, key=lambda s: s.fetched_at)


def write_manifest(labels: dict[str, str], path: str | os.PathLike) -> Path:
    """``labels`` maps ``owner/name`` to a label."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["owner", "name", "label"])
            for repo_id in sorted(labels):
                owner, name = repo_id.split("/", 1)
                w.writerow([owner, name, labels[repo_id]])
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    path = Path(path)
    out: dict[str, str] = {}
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["owner", "name", "label"]:
                raise MalformedError(f"{path.name}: header must be owner,name,label")
            for lineno, row in enumerate(reader, start=2):
                label = (row["label"] or "unlabeled").strip()
                if label not in LABELS:
                    raise MalformedError(f"{path.name}:{lineno}: label: unknown value {label!r}")
                out[f"{row['owner'].strip()}/{row['name'].strip()}"] = label
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return out


def load_corpus(path: str | os.PathLike) -> Corpus:
    """Load every current snapshot in a directory, or those listed by a manifest CSV.

    Repositories absent from the manifest are ``unlabeled``.
    """
    path = Path(path)
    if not path.exists():
        raise StorageError(f"no such file or directory: {path}")
    if path.is_file():
        labels = read_manifest(path)
        directory = path.parent
        files = [directory / snapshot_filename(*rid.split("/", 1)) for rid in sorted(labels)]
        missing = [f.name for f in files if not f.exists()]
        if missing:
            raise StorageError(f"manifest lists repositories without snapshot files: {', '.join(missing)}")
    else:
        directory = path
        manifest = directory / MANIFEST
        labels = read_manifest(manifest) if manifest.exists() else {}
        files = sorted(p for p in directory.glob(f"*{SUFFIX}") if "@" not in p.name)
    entries = []
    for f in files:
        s = load_snapshot(f)
        entries.append(CorpusEntry(s, labels.get(s.repo_id, "unlabeled")))
    entries.sort(key=lambda e: e.repo_id)
    logger.debug("loaded %d snapshots from %s", len(entries), path)
    return Corpus(entries)


def save_corpus(corpus: Corpus, directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    for e in corpus:
        save_snapshot(e.snapshot, directory)
    return write_manifest({e.repo_id: e.label for e in corpus}, directory / MANIFEST)

"""Contribution practices, README deprecation notices, and adoption comparison."""

from __future__ import annotations

import io
import re
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence
from urllib.parse import urlparse

from .errors import EmptySample
from .ingest.models import RepoSnapshot
from .stats import cliffs_delta, mann_whitney_u

FIRST_TIMER_LABELS = frozenset({"help wanted", "good first issue"})
GITHUB_HOSTS = ("github.com", "github.io")


@dataclass(frozen=True)
class PracticeProfile:
    license: bool = False
    home_page: bool = False
    continuous_integration: bool = False
    contributing_guidelines: bool = False
    issue_template: bool = False
    code_of_conduct: bool = False
    pull_request_template: bool = False
    support_file: bool = False
    first_timers_labels: bool = False


PRACTICES = tuple(f.name for f in fields(PracticeProfile))


def _split(path: str) -> tuple[str, str]:
    """(directory, upper-cased basename) with directory '' for the root."""
    path = path.strip("/")
    head, _, base = path.rpartition("/")
    return head.lower(), base.upper()


def _homepage_ok(url: str | None) -> bool:
    if not url or not url.strip():
        return False
    url = url.strip()
    host = (urlparse(url if "://" in url else f"//{url}").hostname or "").lower()
    if not host:
        return False
    return not any(host == h or host.endswith("." + h) for h in GITHUB_HOSTS)


def _label_key(label: str) -> str:
    return re.sub(r"[\s_-]+", " ", label.strip().lower())


def detect_practices(s: RepoSnapshot) -> PracticeProfile:
    """Practices visible from root and ``.github/`` file names, labels and homepage.

    Continuous integration is detected through ``.travis.yml`` only. Template
    names match anywhere (``ISSUE_TEMPLATE`` is often a directory).
    """
    root, dotgithub, anywhere = set(), set(), []
    for p in s.repo_files:
        d, base = _split(p)
        if d == "":
            root.add(base)
        elif d == ".github":
            dotgithub.add(base)
        anywhere.append(p.upper())

    def at(names: set[str], *prefixes: str) -> bool:
        return any(n.startswith(prefixes) for n in names)

    return PracticeProfile(
        license=at(root, "LICENSE", "COPYING"),
        home_page=_homepage_ok(s.homepage_url),
        continuous_integration=".TRAVIS.YML" in root,
        contributing_guidelines=at(root | dotgithub, "CONTRIBUTING"),
        issue_template=any("ISSUE_TEMPLATE" in p for p in anywhere),
        code_of_conduct=at(root | dotgithub, "CODE_OF_CONDUCT"),
        pull_request_template=any("PULL_REQUEST_TEMPLATE" in p for p in anywhere),
        support_file=at(root | dotgithub, "SUPPORT"),
        first_timers_labels=any(_label_key(lb) in FIRST_TIMER_LABELS for lb in s.labels),
    )


# -- README scanning -----------------------------------------------------------


@dataclass(frozen=True)
class SentenceHit:
    phrase: str
    start: int
    end: int


@dataclass(frozen=True)
class DeprecationVerdict:
    sentences_hit: tuple[SentenceHit, ...] = ()

    @property
    def matched(self) -> bool:
        return bool(self.sentences_hit)


def parse_sentences(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#") and line not in out:
            out.append(line)
    return out


@lru_cache(maxsize=None)
def _default_sentences() -> tuple[str, ...]:
    text = resources.files("repo_vitals").joinpath("data/deprecation_sentences.txt").read_text(encoding="utf-8")
    return tuple(parse_sentences(text))


def load_sentences(path: str | Path | None = None) -> list[str]:
    """Phrase list from a file, or the bundled list when ``path`` is None."""
    if path is None:
        return list(_default_sentences())
    return parse_sentences(Path(path).read_text(encoding="utf-8"))


def _pattern(phrase: str) -> re.Pattern:
    # straight and curly apostrophes are interchangeable
    parts = [("['’]" if ch in "'’" else re.escape(ch)) for ch in phrase]
    return re.compile("".join(parts), re.IGNORECASE)


def scan_readme(text: str, sentences: Sequence[str] | None = None) -> DeprecationVerdict:
    """Every case-insensitive occurrence of every phrase, ordered by offset."""
    phrases = _default_sentences() if sentences is None else sentences
    hits = []
    for phrase in phrases:
        for m in _pattern(phrase).finditer(text or ""):
            hits.append(SentenceHit(phrase, m.start(), m.end()))
    hits.sort(key=lambda h: (h.start, h.end, h.phrase))
    return DeprecationVerdict(tuple(hits))


# -- adoption comparison ------------------------------------------------------


@dataclass(frozen=True)
class AdoptionRow:
    practice: str
    share_a: float
    share_b: float
    d: float
    magnitude: str
    p_value: float


@dataclass
class AdoptionTable:
    rows: list[AdoptionRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("practice,share_a,share_b,d,magnitude,p_value\n")
        for r in self.rows:
            buf.write(f"{r.practice},{r.share_a!r},{r.share_b!r},{r.d!r},{r.magnitude},{r.p_value!r}\n")
        return buf.getvalue()


def compare_adoption(group_a: Sequence[PracticeProfile], group_b: Sequence[PracticeProfile]) -> AdoptionTable:
    """Per-practice shares, Cliff's delta and two-sided Mann-Whitney p over the 0/1 indicators."""
    if not group_a or not group_b:
        raise EmptySample("both groups need at least one profile")
    rows = []
    for name in PRACTICES:
        a = [int(getattr(p, name)) for p in group_a]
        b = [int(getattr(p, name)) for p in group_b]
        eff = cliffs_delta(a, b)
        rows.append(
            AdoptionRow(name, sum(a) / len(a), sum(b) / len(b), eff.d, eff.magnitude, mann_whitney_u(a, b).p_value)
        )
    return AdoptionTable(rows)


def profile_dict(p: PracticeProfile) -> dict[str, bool]:
    return asdict(p)

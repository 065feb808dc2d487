"""Deterministic synthetic corpora with planted activity patterns.

Each repository gets ``months_of_history`` 30-day months ending at
``observed_at``. Event counts per month are Poisson with a rate curve chosen by
the repository's profile:

* active repositories are ``steady`` (constant rate) or ``bursty`` (a low base
  rate with occasional high-activity months);
* unmaintained repositories are ``decaying`` (exponential decline after a
  random onset) or ``dead`` (commits stop after month ``k``), with a small
  sporadic tail of commits afterwards.

``noise_level`` is the sigma of a mean-one lognormal factor applied to every
repository's overall rate and to every monthly rate. Every repository starts
with a commit at the first instant of its history, so any anchor at least 24
months in has a full feature window. Repository ``i`` draws from its own
seed, derived from the master seed and ``i``, so the output does not depend on
generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InvalidConfig
from .ingest.models import (
    CommitEvent,
    ForkEvent,
    IssueEvent,
    OwnerKind,
    OwnerStats,
    PullEvent,
    RepoSnapshot,
    canonicalize,
)
from .ingest.store import Corpus, CorpusEntry
from .practices import PRACTICES
from .timeutil import SECONDS_PER_MONTH, from_epoch, epoch

DEFAULT_OBSERVED_AT = datetime(2020, 1, 1, tzinfo=timezone.utc)
ACTIVE_PROFILES = ("steady", "bursty")
UNMAINTAINED_PROFILES = ("decaying", "dead")

LANGUAGES = ("JavaScript", "Python", "Java", "Ruby", "Go", "C++", "PHP", "C")
DOMAINS = (
    "Application software",
    "Documentation",
    "Non-web libraries and frameworks",
    "Software tools",
    "System software",
    "Web libraries and frameworks",
)
# adoption probability per practice: (active, unmaintained)
PRACTICE_RATES = {
    "license": (0.83, 0.73),
    "home_page": (0.65, 0.51),
    "continuous_integration": (0.71, 0.45),
    "contributing_guidelines": (0.44, 0.20),
    "issue_template": (0.08, 0.02),
    "code_of_conduct": (0.13, 0.03),
    "pull_request_template": (0.03, 0.00),
    "support_file": (0.01, 0.01),
    "first_timers_labels": (0.53, 0.31),
}
PRACTICE_FILES = {
    "license": "LICENSE",
    "continuous_integration": ".travis.yml",
    "contributing_guidelines": "CONTRIBUTING.md",
    "issue_template": ".github/ISSUE_TEMPLATE.md",
    "code_of_conduct": "CODE_OF_CONDUCT.md",
    "pull_request_template": ".github/PULL_REQUEST_TEMPLATE.md",
    "support_file": "SUPPORT.md",
}
ORGANIZATION_SHARE = (0.74, 0.37)  # (active, unmaintained)
NOTICES = (
    "This project is deprecated and no longer supported.",
    "This project is no longer under development.",
    "Note: this repository is unmaintained.",
)


@dataclass(frozen=True)
class ActivityProfiles:
    """Rate-curve parameters. Rates are events per 30-day month."""

    commit_rate: float = 12.0
    issue_ratio: float = 0.4  # issues per commit-rate unit
    pull_ratio: float = 0.3
    fork_ratio: float = 0.3
    burst_probability: float = 0.15
    burst_multiplier: float = 4.0
    bursty_base: float = 0.5  # bursty base rate as a fraction of commit_rate
    decay_onset: tuple[int, int] = (18, 30)  # month the decline starts
    half_life_months: float = 3.0
    dead_after: tuple[int, int] = (30, 42)  # k for the dead profile
    tail_rate: float = 0.15  # sporadic commits per month once unmaintained
    final_commit: bool = True  # one sporadic commit in the last 90 days of unmaintained histories
    residual_activity: float = 0.2  # issue/fork rate floor for unmaintained repos, as a fraction


@dataclass(frozen=True)
class GeneratorConfig:
    n_repos: int = 500
    fraction_unmaintained: float = 0.25
    months_of_history: int = 48
    profiles: ActivityProfiles = field(default_factory=ActivityProfiles)
    noise_level: float = 0.3
    seed: int = 0
    observed_at: datetime = DEFAULT_OBSERVED_AT
    notice_probability: float = 0.3  # unmaintained READMEs carrying a deprecation notice

    def validate(self) -> None:
        p = self.profiles
        problems = []
        if self.n_repos < 1:
            problems.append("n_repos must be >= 1")
        if not 0 < self.fraction_unmaintained < 1:
            problems.append("fraction_unmaintained must be in (0, 1)")
        if self.months_of_history < 24:
            problems.append("months_of_history must be >= 24")
        if self.noise_level < 0:
            problems.append("noise_level must be >= 0")
        rates = (p.commit_rate, p.issue_ratio, p.pull_ratio, p.fork_ratio, p.burst_multiplier, p.bursty_base, p.tail_rate)
        if min(rates) < 0 or p.half_life_months <= 0 or not 0 <= p.residual_activity <= 1:
            problems.append("profile rates must be non-negative")
        if not 0 <= p.burst_probability <= 1 or not 0 <= self.notice_probability <= 1:
            problems.append("probabilities must be in [0, 1]")
        for name, (lo, hi) in (("decay_onset", p.decay_onset), ("dead_after", p.dead_after)):
            if not 0 < lo <= hi < self.months_of_history:
                problems.append(f"{name} must satisfy 0 < lo <= hi < months_of_history")
        if problems:
            raise InvalidConfig("; ".join(problems))


def reference_preset(seed: int = 0, **overrides) -> GeneratorConfig:
    """Reference dataset shape: 754 active and 248 unmaintained repositories."""
    return GeneratorConfig(n_repos=1002, fraction_unmaintained=248 / 1002, seed=seed, **overrides)


def _lognormal(rng: np.random.Generator, sigma: float, size=None):
    if sigma == 0:
        return np.ones(size) if size is not None else 1.0
    return np.exp(rng.normal(-sigma * sigma / 2, sigma, size))


def _rate_curve(profile: str, cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Commit rate multiplier per month (1.0 = the nominal commit rate)."""
    p = cfg.profiles
    H = cfg.months_of_history
    months = np.arange(H, dtype=np.float64)
    if profile == "steady":
        return np.ones(H)
    if profile == "bursty":
        bursts = rng.random(H) < p.burst_probability
        return np.where(bursts, p.bursty_base * p.burst_multiplier, p.bursty_base)
    if profile == "decaying":
        onset = rng.integers(p.decay_onset[0], p.decay_onset[1] + 1)
        return np.exp(-math.log(2) * np.clip(months - onset, 0, None) / p.half_life_months)
    if profile == "dead":
        k = rng.integers(p.dead_after[0], p.dead_after[1] + 1)
        return (months < k).astype(np.float64)
    raise ValueError(profile)


def _month_times(rng: np.random.Generator, start: int, counts: np.ndarray) -> np.ndarray:
    """Uniform timestamps inside each month, ``counts[i]`` of them in month ``i``."""
    month = np.repeat(np.arange(counts.size), counts)
    return np.sort(start + month * SECONDS_PER_MONTH + rng.integers(0, SECONDS_PER_MONTH, month.size))


def _closing(rng, opened: np.ndarray, close_p: float, mean_days: float, end: int) -> np.ndarray:
    """Close times (or -1 for still open)."""
    delay = rng.exponential(mean_days * 86_400, opened.size).astype(np.int64) + 60
    closed = (rng.random(opened.size) < close_p) & (opened + delay <= end)
    return np.where(closed, opened + delay, -1)


def generate_repo(index: int, label: str, cfg: GeneratorConfig) -> RepoSnapshot:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed & (2**64 - 1), spawn_key=(index,)))
    p = cfg.profiles
    H = cfg.months_of_history
    active = label == "active"
    cls = 0 if active else 1
    end = epoch(cfg.observed_at)
    start = end - H * SECONDS_PER_MONTH

    profile = rng.choice(ACTIVE_PROFILES if active else UNMAINTAINED_PROFILES)
    curve = _rate_curve(str(profile), cfg, rng)
    scale = p.commit_rate * _lognormal(rng, cfg.noise_level)
    monthly = curve * scale * _lognormal(rng, cfg.noise_level, H)
    if not active:
        monthly = np.maximum(monthly, p.tail_rate)
    commit_counts = rng.poisson(monthly)

    is_org = rng.random() < ORGANIZATION_SHARE[cls]
    owner = f"{'org' if is_org else 'user'}{index:05d}"
    n_devs = 1 + int(rng.poisson(4 if active else 2))
    devs = [f"{owner}" if not is_org else f"dev{index:05d}-0"] + [f"dev{index:05d}-{j}" for j in range(1, n_devs)]
    joined = np.concatenate([[0], rng.integers(0, H, n_devs - 1)])
    weights = 1.0 / np.arange(1, n_devs + 1)

    times = _month_times(rng, start, commit_counts)
    authors = np.empty(times.size, dtype=np.int64)
    month_of = (times - start) // SECONDS_PER_MONTH
    for m in np.unique(month_of):
        sel = month_of == m
        w = np.where(joined <= m, weights, 0.0)
        authors[sel] = rng.choice(n_devs, size=int(sel.sum()), p=w / w.sum())
    times = np.concatenate([[start], times])
    authors = np.concatenate([[0], authors])
    if not active and p.final_commit:
        times = np.append(times, end - rng.integers(1, 90 * 86_400))
        authors = np.append(authors, 0)
    commits = tuple(CommitEvent(devs[a], from_epoch(t)) for a, t in zip(authors.tolist(), times.tolist()))

    floor = 0.0 if active else p.residual_activity
    other = np.maximum(curve, floor) * scale * _lognormal(rng, cfg.noise_level, H)
    issue_open = _month_times(rng, start, rng.poisson(other * p.issue_ratio))
    issue_close = _closing(rng, issue_open, 0.85 if active else 0.5, 20, end)
    pull_open = _month_times(rng, start, rng.poisson(other * p.pull_ratio))
    pull_close = _closing(rng, pull_open, 0.9 if active else 0.5, 10, end)
    merged = (pull_close >= 0) & (rng.random(pull_open.size) < 0.6)
    fork_times = _month_times(rng, start, rng.poisson(np.maximum(curve, 0.5) * scale * p.fork_ratio))

    def who(n):
        return [f"u{index:05d}-{int(x)}" for x in rng.integers(0, 50, n)]

    issues = tuple(
        IssueEvent(from_epoch(o), a, from_epoch(c) if c >= 0 else None)
        for o, c, a in zip(issue_open.tolist(), issue_close.tolist(), who(issue_open.size))
    )
    pulls = tuple(
        PullEvent(from_epoch(o), a, from_epoch(c) if c >= 0 else None, from_epoch(c) if mg else None)
        for o, c, mg, a in zip(pull_open.tolist(), pull_close.tolist(), merged.tolist(), who(pull_open.size))
    )
    forks = tuple(ForkEvent(from_epoch(t)) for t in fork_times.tolist())

    release_months = np.flatnonzero(rng.random(H) < (0.5 * curve if not active else 0.5))
    releases = [start + m * SECONDS_PER_MONTH + int(rng.integers(0, SECONDS_PER_MONTH)) for m in release_months]
    if active:
        releases.append(end - int(rng.integers(1, 30 * 86_400)))

    adopted = {name: rng.random() < PRACTICE_RATES[name][cls] for name in PRACTICES}
    files = ["README.md"] + [f for name, f in PRACTICE_FILES.items() if adopted[name]]
    labels = ["bug", "enhancement"] + (["good first issue" if rng.random() < 0.5 else "help wanted"] if adopted["first_timers_labels"] else [])
    name = f"project{index:05d}"
    if adopted["home_page"]:
        homepage = f"https://{name}.example.org"
    else:
        homepage = f"https://{owner}.github.io/{name}" if rng.random() < 0.3 else None
    readme = f"# {name}\n\nSynthetic repository generated for testing.\n"
    if not active and rng.random() < cfg.notice_probability:
        readme += "\n" + NOTICES[int(rng.integers(0, len(NOTICES)))] + "\n"

    return canonicalize(
        RepoSnapshot(
            owner_login=owner,
            repo_name=name,
            owner_kind=OwnerKind.ORGANIZATION if is_org else OwnerKind.USER,
            primary_language=LANGUAGES[int(rng.integers(0, len(LANGUAGES)))],
            fetched_at=cfg.observed_at,
            commits=commits,
            issues=issues,
            pulls=pulls,
            forks=forks,
            releases=tuple(from_epoch(t) for t in sorted(releases)),
            owner_stats=OwnerStats(
                projects_created=1 + int(rng.poisson(40 if is_org else 10)),
                owner_commit_count=sum(1 for c in commits if c.author_id == owner),
            ),
            repo_files=tuple(sorted(files)),
            labels=tuple(labels),
            homepage_url=homepage,
            readme_text=readme,
            domain_label=DOMAINS[int(rng.integers(0, len(DOMAINS)))],
            star_count=int(rng.lognormal(7, 1)),
            size_loc=int(rng.lognormal(9, 1.2)),
        )
    )


def labels_for(cfg: GeneratorConfig) -> list[str]:
    """Exactly ``round(n * fraction)`` unmaintained labels, placed by a seeded permutation."""
    n_unm = min(cfg.n_repos - 1, max(1, round(cfg.n_repos * cfg.fraction_unmaintained))) if cfg.n_repos > 1 else 0
    order = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed & (2**64 - 1), spawn_key=(2**31,))).permutation(cfg.n_repos)
    labels = ["active"] * cfg.n_repos
    for i in order[:n_unm]:
        labels[int(i)] = "unmaintained"
    return labels


def generate_corpus(cfg: GeneratorConfig) -> Corpus:
    cfg.validate()
    labels = labels_for(cfg)
    return Corpus([CorpusEntry(generate_repo(i, lab, cfg), lab) for i, lab in enumerate(labels)])

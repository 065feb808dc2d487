"""GitHub REST v3 client that assembles a RepoSnapshot.

Paginates list endpoints at 100 items per page, sleeps through primary rate
limits, and retries 5xx / secondary-limit responses with exponential backoff.
Several clients (or threads sharing one client) coordinate through a single
``RateGate``.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable

import httpx

from ..errors import MalformedError, NotFoundError, RateLimitedError, TransportError
from ..timeutil import now, parse_ts
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

logger = logging.getLogger(__name__)

API_URL = "https://api.github.com"
TOKEN_ENV = "REPO_VITALS_TOKEN"
PER_PAGE = 100
MAX_ATTEMPTS = 5
BACKOFF_BASE = 1.0
# Upper bound on a single sleep while waiting for a primary limit reset.
MAX_RESET_WAIT = 3600.0

_NEXT_LINK = re.compile(r'<([^>]+)>;\s*rel="next"')


class RateGate:
    """Shared rate budget. Requests block while the budget is known to be exhausted."""

    def __init__(self, sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.time):
        self._lock = threading.Lock()
        self._blocked_until = 0.0
        self._sleep = sleep
        self._clock = clock

    def wait(self) -> None:
        with self._lock:
            delay = self._blocked_until - self._clock()
        if delay > 0:
            logger.info("rate gate closed, sleeping %.1fs", delay)
            self._sleep(min(delay, MAX_RESET_WAIT))

    def block_until(self, epoch_seconds: float) -> None:
        with self._lock:
            self._blocked_until = max(self._blocked_until, epoch_seconds)

    def sleep(self, seconds: float) -> None:
        self._sleep(seconds)

    def now(self) -> float:
        return self._clock()


class GitHubClient:
    def __init__(
        self,
        token: str | None = None,
        *,
        base_url: str = API_URL,
        transport: httpx.BaseTransport | None = None,
        gate: RateGate | None = None,
        timeout: float = 30.0,
    ) -> None:
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        headers = {"Accept": "application/vnd.github.v3+json", "User-Agent": "repo-vitals"}
        if token:
            headers["Authorization"] = f"token {token}"
        self.gate = gate or RateGate()
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "GitHubClient":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # -- transport ---------------------------------------------------------

    def _request(self, url: str, params: dict[str, Any] | None = None, accept: str | None = None) -> httpx.Response:
        headers = {"Accept": accept} if accept else None
        for attempt in range(MAX_ATTEMPTS):
            self.gate.wait()
            try:
                resp = self._client.get(url, params=params, headers=headers)
            except httpx.TransportError as exc:
                if attempt == MAX_ATTEMPTS - 1:
                    raise TransportError(f"GET {url}: {exc}") from exc
                self.gate.sleep(BACKOFF_BASE * 2**attempt)
                continue

            status = resp.status_code
            if status < 400:
                return resp
            if status == 404:
                raise NotFoundError(f"GET {url}: not found")
            if status in (403, 429):
                remaining = resp.headers.get("X-RateLimit-Remaining")
                retry_after = resp.headers.get("Retry-After")
                if remaining == "0":
                    reset = float(resp.headers.get("X-RateLimit-Reset", "0"))
                    self.gate.block_until(reset)
                    logger.warning("primary rate limit exhausted; reset at %s", reset)
                    if attempt == MAX_ATTEMPTS - 1:
                        break
                    continue
                if retry_after is not None or status == 429 or "secondary rate limit" in resp.text.lower():
                    if attempt == MAX_ATTEMPTS - 1:
                        break
                    wait = float(retry_after) if retry_after else BACKOFF_BASE * 2**attempt
                    self.gate.sleep(wait)
                    continue
                raise NotFoundError(f"GET {url}: forbidden ({status})")
            if status >= 500:
                if attempt == MAX_ATTEMPTS - 1:
                    raise TransportError(f"GET {url}: server error {status}")
                self.gate.sleep(BACKOFF_BASE * 2**attempt)
                continue
            raise TransportError(f"GET {url}: unexpected status {status}")
        raise RateLimitedError(f"GET {url}: rate limit not lifted after {MAX_ATTEMPTS} attempts")

    def get_json(self, url: str, params: dict[str, Any] | None = None) -> Any:
        resp = self._request(url, params)
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedError(f"GET {url}: invalid JSON") from exc

    def paginate(self, url: str, params: dict[str, Any] | None = None) -> Iterable[dict]:
        params = {**(params or {}), "per_page": PER_PAGE}
        next_url: str | None = url
        while next_url:
            resp = self._request(next_url, params)
            try:
                page = resp.json()
            except ValueError as exc:
                raise MalformedError(f"GET {next_url}: invalid JSON") from exc
            if not isinstance(page, list):
                raise MalformedError(f"GET {next_url}: expected a JSON list")
            yield from page
            m = _NEXT_LINK.search(resp.headers.get("Link", ""))
            next_url = m.group(1) if m else None
            # the next link already carries the query string
            params = None

    def _optional_list(self, url: str) -> list[dict]:
        try:
            data = self.get_json(url)
        except NotFoundError:
            return []
        return data if isinstance(data, list) else []

    # -- snapshot ----------------------------------------------------------

    def fetch_snapshot(self, owner: str, name: str) -> RepoSnapshot:
        base = f"/repos/{owner}/{name}"
        repo = self.get_json(base)
        try:
            owner_login = repo["owner"]["login"]
            kind = OwnerKind.ORGANIZATION if repo["owner"]["type"] == "Organization" else OwnerKind.USER
            repo_name = repo["name"]
            commits = [_commit(c) for c in self.paginate(f"{base}/commits")]
            issues = [_issue(i) for i in self.paginate(f"{base}/issues", {"state": "all"}) if "pull_request" not in i]
            pulls = [_pull(p) for p in self.paginate(f"{base}/pulls", {"state": "all"})]
            forks = [ForkEvent(parse_ts(f["created_at"])) for f in self.paginate(f"{base}/forks")]
            releases = [
                parse_ts(r.get("published_at") or r["created_at"]) for r in self.paginate(f"{base}/releases")
            ]
            labels = [lab["name"] for lab in self.paginate(f"{base}/labels")]
            files = [e["path"] for e in self._optional_list(f"{base}/contents/")]
            files += [e["path"] for e in self._optional_list(f"{base}/contents/.github")]
            owner_info = self.get_json(f"/users/{owner_login}")
            projects = int(owner_info.get("public_repos", 0))
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"{owner}/{name}: API payload missing field {exc}") from exc
        try:
            readme = self._request(f"{base}/readme", accept="application/vnd.github.v3.raw").text
        except NotFoundError:
            readme = ""

        owner_commits = Counter(c.author_id for c in commits)[owner_login]
        snapshot = canonicalize(
            RepoSnapshot(
                owner_login=owner_login,
                repo_name=repo_name,
                owner_kind=kind,
                primary_language=repo.get("language") or "",
                star_count=int(repo.get("stargazers_count") or 0),
                # LOC needs a clone; accepted later as an ingested field.
                size_loc=0,
                homepage_url=repo.get("homepage") or None,
                readme_text=readme,
                commits=tuple(commits),
                issues=tuple(issues),
                pulls=tuple(pulls),
                forks=tuple(forks),
                releases=tuple(releases),
                labels=tuple(labels),
                repo_files=tuple(files),
                owner_stats=OwnerStats(projects, owner_commits),
                fetched_at=now(),
            )
        )
        validate(snapshot, f"{owner}/{name}")
        return snapshot


def _commit(c: dict) -> CommitEvent:
    author = (c.get("author") or {}).get("login") or c["commit"]["author"].get("email") or c["commit"]["author"]["name"]
    return CommitEvent(author, parse_ts(c["commit"]["author"]["date"]))


def _issue(i: dict) -> IssueEvent:
    closed = i.get("closed_at")
    return IssueEvent(parse_ts(i["created_at"]), (i.get("user") or {}).get("login", ""), parse_ts(closed) if closed else None)


def _pull(p: dict) -> PullEvent:
    closed, merged = p.get("closed_at"), p.get("merged_at")
    return PullEvent(
        parse_ts(p["created_at"]),
        (p.get("user") or {}).get("login", ""),
        parse_ts(closed) if closed else None,
        parse_ts(merged) if merged else None,
    )


def fetch_snapshot(owner: str, name: str, auth_token: str | None = None, **client_kwargs: Any) -> RepoSnapshot:
    with GitHubClient(auth_token, **client_kwargs) as client:
        return client.fetch_snapshot(owner, name)


def fetch_many(
    repos: Iterable[tuple[str, str]], auth_token: str | None = None, max_workers: int = 4, **client_kwargs: Any
) -> list[RepoSnapshot]:
    """Fetch several repositories concurrently over one client and rate gate."""
    with GitHubClient(auth_token, **client_kwargs) as client:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(lambda r: client.fetch_snapshot(*r), repos))

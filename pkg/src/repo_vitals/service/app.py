"""Read-only HTTP badge service over a pre-trained model bundle.

Snapshots come from the cache's corpus directory; when a fetcher is configured
an unknown repository is fetched from the API and cached. Level quartiles are
recomputed from the cached population of active repositories when at least
four are available, otherwise the bundle's quartiles are used. ``reload()``
builds a new state and swaps it in with a single assignment, so requests
always see one consistent model.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import InsufficientHistory, NoModel, NotFoundError, RateLimitedError, RepoVitalsError, UpstreamError
from ..ingest.models import RepoSnapshot
from ..ingest.store import load_corpus, load_snapshot, save_snapshot, snapshot_filename
from ..lma import badge_payload, lma_from_prediction, quartiles_of
from ..model import ModelBundle
from ..timeutil import now
from .schemas import BadgePayload, ErrorBody, Health

logger = logging.getLogger(__name__)

CACHE_CONTROL = "max-age=86400"
MIN_POPULATION = 4

Fetcher = Callable[[str, str], RepoSnapshot]


def badge_schema() -> dict:
    """The published JSON schema for status payloads."""
    text = resources.files("repo_vitals").joinpath("data/badge.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ServiceState:
    bundle: ModelBundle
    quartiles: tuple[float, float, float]


class BadgeService:
    def __init__(
        self,
        corpus_dir: str | Path,
        model_path: str | Path,
        fetcher: Fetcher | None = None,
        clock: Callable[[], datetime] = now,
        recompute_quartiles: bool = True,
    ) -> None:
        self.corpus_dir = Path(corpus_dir)
        self.model_path = Path(model_path)
        self.fetcher = fetcher
        self.clock = clock
        self.recompute_quartiles = recompute_quartiles
        self.state: ServiceState | None = None
        self._reload_lock = threading.Lock()

    def reload(self) -> ServiceState | None:
        with self._reload_lock:
            try:
                bundle = ModelBundle.load(self.model_path)
            except NoModel:
                logger.warning("no model at %s", self.model_path)
                self.state = None
                return None
            quartiles = bundle.quartiles
            if self.recompute_quartiles and self.corpus_dir.exists():
                values = []
                for e in load_corpus(self.corpus_dir):
                    try:
                        pred = bundle.predict(e.snapshot)
                    except InsufficientHistory:
                        continue
                    if pred.label == "active":
                        values.append(lma_from_prediction(pred).value)
                if len(values) >= MIN_POPULATION:
                    quartiles = quartiles_of(values)
            state = ServiceState(bundle, tuple(quartiles))
            self.state = state
            return state

    def snapshot(self, owner: str, repo: str) -> RepoSnapshot:
        path = self.corpus_dir / snapshot_filename(owner, repo)
        if path.exists():
            return load_snapshot(path)
        if self.fetcher is None:
            raise NotFoundError(f"{owner}/{repo} is not in the cache")
        s = self.fetcher(owner, repo)
        save_snapshot(s, self.corpus_dir)
        return s

    def status(self, owner: str, repo: str) -> dict:
        state = self.state
        if state is None:
            raise NoModel("no model loaded")
        s = self.snapshot(owner, repo)
        try:
            pred = state.bundle.predict(s)
        except InsufficientHistory:
            pred = None
        return badge_payload(owner, repo, pred, state.quartiles, state.bundle.model_version, self.clock())


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(ErrorBody(error=message).model_dump(), status_code=status, headers={"Cache-Control": CACHE_CONTROL})


def create_app(service: BadgeService, load: bool = True) -> FastAPI:
    app = FastAPI(title="repo-vitals badge service", version="1")
    app.state.service = service
    if load:
        service.reload()

    @app.middleware("http")
    async def cache_header(request: Request, call_next):
        response = await call_next(request)
        response.headers["Cache-Control"] = CACHE_CONTROL
        return response

    @app.get("/v1/health", response_model=Health, response_model_exclude_none=True)
    def health() -> Health:
        state = service.state
        if state is None:
            return Health(model_loaded=False)
        return Health(model_loaded=True, model_version=state.bundle.model_version, quartiles=list(state.quartiles))

    @app.get(
        "/v1/status/{owner}/{repo}",
        response_model=BadgePayload,
        response_model_exclude_none=True,
        responses={404: {"model": ErrorBody}, 429: {"model": ErrorBody}, 503: {"model": ErrorBody}},
    )
    def status(owner: str, repo: str):
        try:
            return BadgePayload(**service.status(owner, repo))
        except NoModel as exc:
            return _error(503, str(exc))
        except NotFoundError as exc:
            return _error(404, str(exc))
        except RateLimitedError as exc:
            return _error(429, str(exc))
        except UpstreamError as exc:
            return _error(502, str(exc))
        except RepoVitalsError as exc:
            return _error(500, str(exc))

    return app

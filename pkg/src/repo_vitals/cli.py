"""Command-line interface.

Every subcommand works inside a cache directory (``--cache``, env
``REPO_VITALS_CACHE``, default ``./.repo_vitals``)::

    corpus/            snapshots + manifest.csv (ingest, synth)
    features.csv       extract
    features.meta.json scenario and anchor used by extract
    prune.csv          prune / train
    model.json         train
    importance.csv     train
    evaluation.csv     evaluate

Exit codes: 0 success, 1 usage, 2 data error, 3 upstream/API error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from .errors import DataError, RepoVitalsError, UpstreamError
from .evaluate import METRIC_NAMES, baseline_metrics, run_experiment
from .features import AnchorPolicy, Dataset, Scenario, build_dataset, scenario_from_columns
from .forest import ForestConfig, mda_importance
from .ingest import (
    fetch_many,
    fetch_snapshot,
    load_corpus,
    read_manifest,
    save_corpus,
    save_snapshot,
    snapshot_history,
    write_manifest,
)
from .ingest.store import MANIFEST, load_snapshot, snapshot_filename
from .lma import badge_payload, evaluation_dates, historical_series, level_of
from .model import ModelBundle, train_bundle
from .practices import PRACTICES, compare_adoption, detect_practices, load_sentences, scan_readme
from .prune import DEFAULT_THRESHOLD, fit_prune
from .survival import GROUP_KEYS, grouped_curves, kaplan_meier, lifetimes
from .synth import GeneratorConfig, generate_corpus, reference_preset
from .timeutil import now, parse_ts

logger = logging.getLogger("repo_vitals")

CACHE_ENV = "REPO_VITALS_CACHE"
DEFAULT_CACHE = ".repo_vitals"
DEFAULT_SCENARIO = "24,3"


class UsageError(RepoVitalsError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use underscores or dashes."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip().strip('"')
    return out


class Context:
    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.config = read_config(args.config) if getattr(args, "config", None) else {}
        cache = getattr(args, "cache", None) or self.config.get("cache") or os.environ.get(CACHE_ENV) or DEFAULT_CACHE
        self.cache = Path(cache)
        self.json = bool(getattr(args, "json", False))

    def get(self, name: str, default: Any = None, cast: Callable[[str], Any] = str) -> Any:
        """Command-line value, else config file value, else ``default``."""
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            try:
                return cast(self.config[name])
            except ValueError as exc:
                raise UsageError(f"config {name}: {exc}") from exc
        return default

    @property
    def seed(self) -> int:
        return self.get("seed", 0, int)

    @property
    def corpus_dir(self) -> Path:
        return self.cache / "corpus"

    def path(self, name: str) -> Path:
        return self.cache / name

    def scenario(self) -> Scenario:
        return Scenario.parse(self.get("scenario", DEFAULT_SCENARIO))

    def anchor(self) -> AnchorPolicy:
        return AnchorPolicy(self.get("anchor", AnchorPolicy.LAST_COMMIT.value))

    def forest_config(self) -> ForestConfig:
        depth = self.get("max_depth", None, int)
        return ForestConfig(
            n_trees=self.get("trees", 100, int),
            mtry=self.get("mtry", None, int),
            min_leaf=self.get("min_leaf", 1, int),
            max_depth=depth,
            seed=self.seed,
        )

    def write(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
        return path

    def emit(self, text: str = "", payload: Any = None) -> None:
        if self.json and payload is not None:
            print(json.dumps(payload, indent=2, sort_keys=True))
        elif text:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")

    def load_model(self) -> ModelBundle:
        return ModelBundle.load(self.path("model.json"))


def _split_repo(text: str) -> tuple[str, str]:
    owner, sep, name = text.partition("/")
    if not sep or not owner or not name or "/" in name:
        raise UsageError(f"expected owner/repo, got {text!r}")
    return owner, name


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(ctx: Context) -> int:
    repos = [_split_repo(r) for r in ctx.args.repos]
    label = ctx.args.label
    token = ctx.get("token", None)
    snapshots = fetch_many(repos, token, max_workers=ctx.get("workers", 4, int))
    ctx.corpus_dir.mkdir(parents=True, exist_ok=True)
    manifest = ctx.corpus_dir / MANIFEST
    labels = read_manifest(manifest) if manifest.exists() else {}
    paths = []
    for s in snapshots:
        paths.append(str(save_snapshot(s, ctx.corpus_dir)))
        if label or s.repo_id not in labels:
            labels[s.repo_id] = label or "unlabeled"
    write_manifest(labels, manifest)
    ctx.emit("\n".join(paths), {"snapshots": paths})
    return 0


def cmd_synth(ctx: Context) -> int:
    a = ctx.args
    overrides = {
        k: v
        for k, v in {
            "n_repos": ctx.get("n_repos", None, int),
            "fraction_unmaintained": ctx.get("fraction", None, float),
            "months_of_history": ctx.get("months", None, int),
            "noise_level": ctx.get("noise", None, float),
        }.items()
        if v is not None
    }
    if a.preset == "reference":
        cfg = reference_preset(ctx.seed)
        cfg = replace(cfg, **overrides)
    else:
        cfg = GeneratorConfig(seed=ctx.seed, **overrides)
    out = Path(a.out) if a.out else ctx.corpus_dir
    corpus = generate_corpus(cfg)
    save_corpus(corpus, out)
    n_unm = sum(e.label == "unmaintained" for e in corpus)
    ctx.emit(f"wrote {len(corpus)} snapshots ({n_unm} unmaintained) to {out}", {"repos": len(corpus), "unmaintained": n_unm, "path": str(out)})
    return 0


def _extract(ctx: Context, scenario: Scenario, anchor: AnchorPolicy) -> Dataset:
    ds = build_dataset(load_corpus(ctx.corpus_dir), scenario, anchor)
    for rid, why in ds.skipped.items():
        print(f"skipped {why}", file=sys.stderr)
    return ds


def cmd_extract(ctx: Context) -> int:
    scenario, anchor = ctx.scenario(), ctx.anchor()
    ds = _extract(ctx, scenario, anchor)
    path = ctx.write("features.csv", ds.to_csv())
    ctx.write("features.meta.json", json.dumps({"scenario": str(scenario), "anchor": anchor.value}, sort_keys=True) + "\n")
    ctx.emit(
        f"{len(ds)} rows x {len(ds.columns)} data points -> {path}",
        {"rows": len(ds), "columns": len(ds.columns), "skipped": sorted(ds.skipped), "path": str(path)},
    )
    return 0


def _features(ctx: Context) -> tuple[Dataset, Scenario, AnchorPolicy]:
    """features.csv and its metadata; extracted on the fly when absent."""
    path = ctx.path("features.csv")
    if not path.exists():
        scenario, anchor = ctx.scenario(), ctx.anchor()
        return _extract(ctx, scenario, anchor), scenario, anchor
    ds = Dataset.from_csv(path.read_text(encoding="utf-8"))
    meta_path = ctx.path("features.meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    scenario = Scenario.parse(meta["scenario"]) if "scenario" in meta else scenario_from_columns(ds.columns)
    anchor = AnchorPolicy(meta.get("anchor", AnchorPolicy.LAST_COMMIT.value))
    return ds, scenario, anchor


def cmd_prune(ctx: Context) -> int:
    ds, _, _ = _features(ctx)
    report = fit_prune(ds.X, ds.columns, ctx.get("threshold", DEFAULT_THRESHOLD, float))
    ctx.write("prune.csv", report.to_csv())
    ctx.emit(report.to_csv(), {"kept": report.kept, "removed": report.removed})
    return 0


def cmd_train(ctx: Context) -> int:
    ds, scenario, anchor = _features(ctx)
    threshold = None if ctx.args.no_prune else ctx.get("threshold", DEFAULT_THRESHOLD, float)
    bundle, report = train_bundle(ds, scenario, ctx.forest_config(), threshold, anchor)
    if report is not None:
        ctx.write("prune.csv", report.to_csv())
    path = bundle.save(ctx.path("model.json"))
    labeled = ds.labeled().select_columns(bundle.forest.column_names)
    importance = mda_importance(bundle.forest, labeled, seed=ctx.seed)
    ctx.write("importance.csv", importance.to_csv())
    top = importance.entries[:5]
    lines = [f"model {bundle.model_version} ({len(bundle.forest.column_names)} columns) -> {path}"]
    lines += [f"  {e.name}: MDA {e.mda:.2f}" for e in top]
    ctx.emit(
        "\n".join(lines),
        {"model_version": bundle.model_version, "path": str(path), "columns": bundle.forest.column_names,
         "quartiles": list(bundle.quartiles), "top_importance": {e.name: e.mda for e in top}},
    )
    return 0


def cmd_evaluate(ctx: Context) -> int:
    requested = ctx.get("scenario", None)
    features = ctx.path("features.csv")
    ds = None
    if features.exists():
        ds, scenario, _ = _features(ctx)
        if requested is not None and Scenario.parse(requested) != scenario:
            ds = None
    if ds is None:
        scenario = ctx.scenario()
        ds = _extract(ctx, scenario, ctx.anchor())
    threshold = None if ctx.args.no_prune else ctx.get("threshold", DEFAULT_THRESHOLD, float)
    result = run_experiment(
        ds, scenario, ctx.forest_config(), rounds=ctx.get("rounds", 100, int), k=ctx.get("folds", 5, int),
        seed=ctx.seed, prune_threshold=threshold,
    )
    text = result.to_csv()
    ctx.write("evaluation.csv", text)
    if ctx.args.baseline:
        rows = ["baseline," + ",".join(METRIC_NAMES)]
        payload = {}
        for kind in ("all_unmaintained", "random"):
            m = baseline_metrics(ds.labeled(), kind, seed=ctx.seed)
            rows.append(kind + "," + ",".join("undefined" if v is None else repr(v) for v in m.as_dict().values()))
            payload[kind] = m.as_dict()
        ctx.write("baselines.csv", "\n".join(rows) + "\n")
    ctx.emit(text, {"scenario": str(scenario), "rounds": [m.as_dict() for m in result.rounds], "mean": result.mean.as_dict()})
    return 0


def _cached_snapshot(ctx: Context, owner: str, name: str):
    path = ctx.corpus_dir / snapshot_filename(owner, name)
    if path.exists():
        return load_snapshot(path)
    if getattr(ctx.args, "fetch", False):
        s = fetch_snapshot(owner, name, ctx.get("token", None))
        save_snapshot(s, ctx.corpus_dir)
        return s
    raise DataError(f"{owner}/{name} is not in the cache; run 'ingest {owner}/{name}' or pass --fetch")


def _from_server(ctx: Context, owner: str, name: str) -> dict:
    import httpx

    url = ctx.args.server.rstrip("/") + f"/v1/status/{owner}/{name}"
    try:
        r = httpx.get(url, timeout=30.0)
    except httpx.HTTPError as exc:
        raise UpstreamError(f"cannot reach {ctx.args.server}: {exc}") from exc
    if r.status_code == 200:
        return r.json()
    message = r.json().get("error", r.text) if r.headers.get("content-type", "").startswith("application/json") else r.text
    if r.status_code in (404, 503):
        raise DataError(message)
    raise UpstreamError(f"server answered {r.status_code}: {message}")


def cmd_predict(ctx: Context) -> int:
    owner, name = _split_repo(ctx.args.repo)
    if ctx.args.server:
        payload = _from_server(ctx, owner, name)
        p = payload.get("p_active")
        ctx.emit(f"{owner}/{name} {payload['label']}" + ("" if p is None else f" p_active={p}"), payload)
        return 0
    bundle = ctx.load_model()
    pred = bundle.predict(_cached_snapshot(ctx, owner, name))
    ctx.emit(
        f"{owner}/{name} {pred.label} p_active={pred.p_active}",
        {"owner": owner, "repo": name, "label": pred.label, "p_active": pred.p_active, "model_version": bundle.model_version},
    )
    return 0


def _badge_line(p: dict) -> str:
    lma = f" lma={p['lma']:.1f}" if p.get("lma") is not None else ""
    return f"{p['owner']}/{p['repo']} {p['label']}{lma} level={p['level']} ({p['color']})"


def cmd_lma(ctx: Context) -> int:
    owner, name = _split_repo(ctx.args.repo)
    if ctx.args.server:
        payload = _from_server(ctx, owner, name)
    else:
        bundle = ctx.load_model()
        pred = bundle.predict(_cached_snapshot(ctx, owner, name))
        payload = badge_payload(owner, name, pred, bundle.quartiles, bundle.model_version, now())
    ctx.emit(_badge_line(payload), payload)
    return 0


def cmd_history(ctx: Context) -> int:
    owner, name = _split_repo(ctx.args.repo)
    bundle = ctx.load_model()
    states = snapshot_history(ctx.corpus_dir, owner, name)
    if not states:
        raise DataError(f"{owner}/{name} is not in the cache")
    dates = None
    if len(states) == 1 or ctx.args.points:
        dates = evaluation_dates(states[-1].fetched_at, ctx.args.points or 4)
    series = historical_series(states, bundle.forest, bundle.scenario, dates)
    rows = ["repo_id,date,status,p_active,lma,level,color"]
    for line, pt in zip(series.to_csv().splitlines()[1:], series.points):
        lvl = level_of(pt.lma if pt.lma is not None else ("unmaintained" if pt.status == "unmaintained" else None), bundle.quartiles)
        rows.append(f"{line},{lvl.level},{lvl.color}")
    text = "\n".join(rows) + "\n"
    ctx.emit(text, {"repo_id": series.repo_id, "rows": rows[1:]})
    return 0


def cmd_survival(ctx: Context) -> int:
    observed = ctx.get("observed_at", None)
    samples = lifetimes(load_corpus(ctx.corpus_dir).labeled(), parse_ts(observed) if observed else None)
    if not ctx.args.include_active:
        samples = [s for s in samples if s.event]
    truncate = ctx.get("truncate_at", None, float)
    key = ctx.args.group_by
    if key:
        g = grouped_curves(samples, key, truncate)
        text = g.to_csv()
        ctx.write(f"survival_{key}.csv", text)
        ctx.write(f"survival_{key}_tests.csv", g.comparisons_csv())
        sys.stderr.write(g.comparisons_csv())
    else:
        text = kaplan_meier(samples, truncate).to_csv("all")
        ctx.write("survival.csv", text)
    ctx.emit(text, {"csv": text})
    return 0


def cmd_practices(ctx: Context) -> int:
    corpus = load_corpus(ctx.corpus_dir)
    sentences = load_sentences(ctx.args.sentences) if ctx.args.sentences else None
    if ctx.args.compare:
        active = [detect_practices(e.snapshot) for e in corpus if e.label == "active"]
        unmaintained = [detect_practices(e.snapshot) for e in corpus if e.label == "unmaintained"]
        table = compare_adoption(active, unmaintained)
        text = table.to_csv()
        ctx.write("practices_comparison.csv", text)
        ctx.emit(text, {"rows": [asdict(r) for r in table.rows]})
        return 0
    rows = ["repo_id," + ",".join(PRACTICES) + ",deprecation_notice,notice_phrases"]
    for e in corpus:
        prof = detect_practices(e.snapshot)
        verdict = scan_readme(e.snapshot.readme_text, sentences)
        phrases = ";".join(sorted({h.phrase for h in verdict.sentences_hit}))
        flags = ",".join(str(int(getattr(prof, p))) for p in PRACTICES)
        rows.append(f"{e.repo_id},{flags},{int(verdict.matched)},\"{phrases}\"")
    text = "\n".join(rows) + "\n"
    ctx.write("practices.csv", text)
    ctx.emit(text, {"csv": text})
    return 0


def cmd_serve(ctx: Context) -> int:
    import uvicorn

    from .service import BadgeService, create_app

    fetcher = None
    if ctx.args.fetch:
        token = ctx.get("token", None)
        fetcher = lambda owner, name: fetch_snapshot(owner, name, token)  # noqa: E731
    service = BadgeService(ctx.corpus_dir, ctx.path("model.json"), fetcher)
    app = create_app(service)
    if service.state is None:
        logger.warning("serving without a model; status requests answer 503 until one is trained")
    uvicorn.run(app, host=ctx.get("host", "127.0.0.1"), port=ctx.get("port", 8000, int))
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache", default=argparse.SUPPRESS, help=f"cache directory (env {CACHE_ENV})")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output and errors")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value defaults file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="repo-vitals", description="Repository maintenance analytics.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    def forest_opts(p):
        p.add_argument("--trees", type=int)
        p.add_argument("--mtry", type=int)
        p.add_argument("--min-leaf", dest="min_leaf", type=int)
        p.add_argument("--max-depth", dest="max_depth", type=int)
        p.add_argument("--threshold", type=float, help="pruning |rho| threshold")
        p.add_argument("--no-prune", dest="no_prune", action="store_true")

    p = add("ingest", cmd_ingest, "fetch repositories from the API into the cache")
    p.add_argument("repos", nargs="+", metavar="owner/repo")
    p.add_argument("--label", choices=("active", "unmaintained", "unlabeled"))
    p.add_argument("--token")
    p.add_argument("--workers", type=int)

    p = add("synth", cmd_synth, "generate a synthetic labeled corpus")
    p.add_argument("--n-repos", dest="n_repos", type=int)
    p.add_argument("--fraction", type=float, help="fraction of unmaintained repositories")
    p.add_argument("--months", type=int, help="months of history per repository")
    p.add_argument("--noise", type=float)
    p.add_argument("--preset", choices=("default", "reference"), default="default")
    p.add_argument("--out", help="corpus directory (default: <cache>/corpus)")

    p = add("extract", cmd_extract, "compute windowed feature vectors")
    p.add_argument("--scenario", help="n,m (default 24,3)")
    p.add_argument("--anchor", choices=[a.value for a in AnchorPolicy])

    p = add("prune", cmd_prune, "drop correlated data points")
    p.add_argument("--threshold", type=float)

    p = add("train", cmd_train, "train the forest and write model.json")
    forest_opts(p)

    p = add("evaluate", cmd_evaluate, "repeated stratified cross-validation")
    forest_opts(p)
    p.add_argument("--scenario")
    p.add_argument("--anchor", choices=[a.value for a in AnchorPolicy])
    p.add_argument("--rounds", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--baseline", action="store_true", help="also write baselines.csv")

    for name, func, help_ in (("predict", cmd_predict, "classify one repository"), ("lma", cmd_lma, "maintenance-activity badge")):
        p = add(name, func, help_)
        p.add_argument("repo", metavar="owner/repo")
        p.add_argument("--server", help="ask a running badge service instead of the local model")
        p.add_argument("--fetch", action="store_true", help="fetch from the API when not cached")
        p.add_argument("--token")

    p = add("history", cmd_history, "LMA series at 90-day spacing")
    p.add_argument("repo", metavar="owner/repo")
    p.add_argument("--points", type=int, help="number of evaluation dates ending at the latest snapshot")

    p = add("survival", cmd_survival, "Kaplan-Meier curves over lifetimes")
    p.add_argument("--group-by", dest="group_by", choices=GROUP_KEYS)
    p.add_argument("--truncate-at", dest="truncate_at", type=float, help="left-truncate at this many months")
    p.add_argument("--include-active", dest="include_active", action="store_true", help="add active repositories as censored lifetimes")
    p.add_argument("--observed-at", dest="observed_at", help="censoring time for active repositories")

    p = add("practices", cmd_practices, "contribution practices and README notices")
    p.add_argument("--compare", action="store_true", help="active vs unmaintained adoption table")
    p.add_argument("--sentences", help="phrase list file (default: bundled list)")

    p = add("serve", cmd_serve, "run the badge service")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--fetch", action="store_true", help="fetch unknown repositories from the API")
    p.add_argument("--token")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    as_json = bool(getattr(args, "json", False))
    try:
        return args.func(Context(args))
    except RepoVitalsError as exc:
        code = exc.exit_code
        if as_json:
            print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        # invalid option values that slipped past argparse (e.g. a bad scenario in a config file)
        if as_json:
            print(json.dumps({"error": "UsageError", "message": str(exc), "exit_code": 1}), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

import json
from pathlib import Path

import httpx
import pytest
from fastapi.testclient import TestClient

from badge_fixtures import CLOCK, recent_commits_snapshot, stump_bundle
from conftest import make_snapshot
from repo_vitals.cli import main, read_config
from repo_vitals.ingest.store import load_corpus, save_snapshot
from repo_vitals.service import BadgeService, create_app

ARTIFACTS = ["features.csv", "prune.csv", "model.json", "importance.csv", "evaluation.csv", "baselines.csv"]


def run(cache, *argv):
    return main(["--cache", str(cache), *argv])


def pipeline(cache: Path) -> None:
    assert run(cache, "synth", "--n-repos", "60", "--seed", "7") == 0
    assert run(cache, "extract", "--scenario", "24,3") == 0
    assert run(cache, "prune") == 0
    assert run(cache, "train", "--trees", "20", "--seed", "7") == 0
    assert run(cache, "evaluate", "--scenario", "24,3", "--rounds", "2", "--trees", "10", "--seed", "7", "--baseline") == 0


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    cache = tmp_path_factory.mktemp("cache")
    pipeline(cache)
    return cache


def test_pipeline_artifacts(trained):
    for name in ARTIFACTS:
        assert (trained / name).exists(), name
    lines = (trained / "evaluation.csv").read_text().splitlines()
    assert lines[0] == "round,accuracy,precision,recall,f_measure,kappa,auc"
    assert len(lines) == 4 and lines[-1].startswith("mean,")
    assert (trained / "importance.csv").read_text().startswith("data_point,feature,period,mda\n")


def test_pipeline_is_deterministic(trained, tmp_path):
    pipeline(tmp_path)
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (trained / name).read_bytes(), name


def test_predict_and_lma(trained, capsys):
    repo = list(load_corpus(trained / "corpus"))[0].repo_id
    capsys.readouterr()
    assert run(trained, "predict", repo) == 0
    assert capsys.readouterr().out.startswith(f"{repo} ")
    assert run(trained, "lma", repo, "--json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["label"] in ("active", "unmaintained") and payload["color"] in ("green", "yellow", "orange", "red")


def test_lma_without_model(tmp_path, capsys):
    save_snapshot(recent_commits_snapshot("Hello-World", 10), tmp_path / "corpus")
    assert run(tmp_path, "lma", "octo/Hello-World") == 2
    assert "no model" in capsys.readouterr().err
    assert run(tmp_path, "lma", "octo/Hello-World", "--json") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NoModel" and err["exit_code"] == 2


def test_predict_short_history(tmp_path, capsys):
    stump_bundle().save(tmp_path / "model.json")
    save_snapshot(make_snapshot([0, 30], name="young"), tmp_path / "corpus")
    assert run(tmp_path, "--json", "predict", "octo/young") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "InsufficientHistory"


def test_uncached_repo_is_data_error(tmp_path):
    stump_bundle().save(tmp_path / "model.json")
    assert run(tmp_path, "predict", "nobody/nothing") == 2


@pytest.mark.parametrize("argv", [[], ["predict", "no-slash"], ["evaluate", "--rounds", "x"], ["bogus"]])
def test_usage_errors(tmp_path, argv, capsys):
    try:
        code = run(tmp_path, *argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_server_client(tmp_path, monkeypatch, capsys):
    save_snapshot(recent_commits_snapshot("high", 10), tmp_path / "corpus")
    stump_bundle().save(tmp_path / "model.json")
    client = TestClient(create_app(BadgeService(tmp_path / "corpus", tmp_path / "model.json", clock=lambda: CLOCK, recompute_quartiles=False)))
    monkeypatch.setattr(httpx, "get", lambda url, timeout: client.get(httpx.URL(url).path))
    assert run(tmp_path, "lma", "octo/high", "--server", "http://badge.test") == 0
    assert capsys.readouterr().out.strip() == "octo/high active lma=100.0 level=high (green)"
    assert run(tmp_path, "lma", "none/none", "--server", "http://badge.test") == 2

    def unreachable(url, timeout):
        raise httpx.ConnectError("refused")

    monkeypatch.setattr(httpx, "get", unreachable)
    assert run(tmp_path, "predict", "octo/high", "--server", "http://badge.test") == 3


def test_history(tmp_path, capsys):
    stump_bundle().save(tmp_path / "model.json")
    save_snapshot(recent_commits_snapshot("high", 10), tmp_path / "corpus")
    assert run(tmp_path, "history", "octo/high", "--points", "2") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "repo_id,date,status,p_active,lma,level,color"
    assert len(lines) == 3


def test_survival_and_practices(trained, capsys):
    assert run(trained, "survival", "--group-by", "account_type") == 0
    assert (trained / "survival_account_type.csv").read_text().startswith("t,S,at_risk,events,group\n")
    assert run(trained, "survival", "--include-active") == 0
    assert run(trained, "practices") == 0
    header = (trained / "practices.csv").read_text().splitlines()[0]
    assert header.startswith("repo_id,license,home_page,") and header.endswith(",deprecation_notice,notice_phrases")
    assert run(trained, "practices", "--compare") == 0
    assert (trained / "practices_comparison.csv").read_text().startswith("practice,share_a,share_b,d,magnitude,p_value\n")


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "repo-vitals.conf"
    cfg.write_text(f'# defaults\ncache = "{tmp_path / "c"}"\nseed = 3\nn-repos = 12\n', encoding="utf-8")
    assert read_config(cfg)["n_repos"] == "12"
    assert main(["synth", "--config", str(cfg), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["repos"] == 12
    # the command line wins over the file
    assert main(["synth", "--config", str(cfg), "--n-repos", "8", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["repos"] == 8
    cfg.write_text("no equals sign\n", encoding="utf-8")
    assert main(["synth", "--config", str(cfg)]) == 1


def test_cache_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("REPO_VITALS_CACHE", str(tmp_path))
    assert main(["synth", "--n-repos", "5"]) == 0
    assert len(list((tmp_path / "corpus").glob("*.json"))) == 5

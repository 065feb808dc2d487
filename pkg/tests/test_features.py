from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import day, make_snapshot
from repo_vitals.errors import InsufficientHistory, InvalidScenario
from repo_vitals.features import (
    FEATURES,
    SCENARIOS,
    AnchorPolicy,
    Dataset,
    Scenario,
    build_dataset,
    data_point_names,
    extract_features,
    flatten,
    make_intervals,
    max_gap_days,
    scenario_from_columns,
)
from repo_vitals.ingest import CorpusEntry, ForkEvent, IssueEvent, OwnerStats, PullEvent

TABLE_COUNTS = (26, 13, 52, 26, 13, 78, 39, 104, 52, 26)


def fixture_snapshot():
    return make_snapshot(
        commit_days=(0, 10, 100, 700, 720),
        authors=["alice", "bob", "alice", "carol", "alice"],
        forks=(ForkEvent(day(5)), ForkEvent(day(95))),
        issues=(IssueEvent(day(1), "x", day(91)),),
        pulls=(PullEvent(day(2), "y", day(3), day(3)), PullEvent(day(92), "z", day(95))),
        owner_stats=OwnerStats(3, 5),
    )


class TestScenario:
    def test_table_counts(self):
        assert [s.n_data_points for s in SCENARIOS] == list(TABLE_COUNTS)

    @pytest.mark.parametrize("n,m", [(24, 5), (30, 3), (6, 12), (18, 12)])
    def test_invalid(self, n, m):
        with pytest.raises(InvalidScenario):
            Scenario(n, m)

    def test_parse_and_str(self):
        assert Scenario.parse("24, 3") == Scenario(24, 3)
        assert str(Scenario(12, 6)) == "12,6"
        with pytest.raises(InvalidScenario):
            Scenario.parse("24")

    def test_from_columns(self):
        for sc in SCENARIOS:
            assert scenario_from_columns(data_point_names(sc)) == sc


class TestIntervals:
    def test_24_3(self):
        anchor = day(720)
        ivs = make_intervals(anchor, Scenario(24, 3))
        assert len(ivs) == 8
        assert ivs[0].tag == "T1_3" and ivs[-1].tag == "T22_24"
        assert ivs[-1].end_ts == anchor
        assert ivs[0].start_ts == anchor - timedelta(days=720)
        for a, b in zip(ivs, ivs[1:]):
            assert a.end_ts == b.start_ts
            assert b.start_month == a.end_month + 1

    def test_single_interval(self):
        (iv,) = make_intervals(day(500), Scenario(6, 6))
        assert iv.tag == "T1_6"
        (iv,) = make_intervals(day(500), Scenario(12, 12))
        assert iv.days == 360


class TestMaxGap:
    def iv(self):
        return make_intervals(day(90), Scenario(6, 3))[-1]  # [day 0, day 90)

    def test_two_commits(self):
        assert max_gap_days([day(0), day(30)], self.iv()) == 60

    def test_empty(self):
        assert max_gap_days([], self.iv()) == 90

    def test_daily(self):
        assert max_gap_days([day(d) for d in range(90)], self.iv()) == 1

    def test_floor(self):
        assert max_gap_days([day(0.5), day(89.9)], self.iv()) == 89


class TestExtract:
    def test_hand_computed_grid(self):
        mx = extract_features(fixture_snapshot(), Scenario(24, 3))
        v = {f: mx.values[i] for i, f in enumerate(FEATURES)}
        assert v["commits"].tolist() == [2, 1, 0, 0, 0, 0, 0, 2]
        assert v["max_days_without_commits"].tolist() == [80, 80, 90, 90, 90, 90, 90, 70]
        assert v["new_contributors"].tolist() == [2, 0, 0, 0, 0, 0, 0, 1]
        assert v["distinct_contributors"].tolist() == [2, 1, 0, 0, 0, 0, 0, 2]
        assert v["max_contributions_by_developer"].tolist() == [1, 1, 0, 0, 0, 0, 0, 1]
        assert v["forks"].tolist() == [1, 1, 0, 0, 0, 0, 0, 0]
        assert v["open_issues"].tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
        assert v["closed_issues"].tolist() == [0, 1, 0, 0, 0, 0, 0, 0]  # by close date
        assert v["open_pulls"].tolist() == [1, 1, 0, 0, 0, 0, 0, 0]
        assert v["closed_pulls"].tolist() == [1, 1, 0, 0, 0, 0, 0, 0]
        assert v["merged_pulls"].tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
        assert v["owner_projects"].tolist() == [3] * 8
        assert v["owner_commits"].tolist() == [5] * 8

    def test_boundary_belongs_to_later_interval(self):
        s = make_snapshot(commit_days=(0, 90, 720))
        commits = extract_features(s, Scenario(24, 3)).values[FEATURES.index("commits")]
        assert commits.tolist() == [1, 1, 0, 0, 0, 0, 0, 1]

    def test_explicit_anchor(self):
        s = fixture_snapshot()
        commits = extract_features(s, Scenario(24, 3), anchor=day(810)).values[FEATURES.index("commits")]
        # window [90, 810]: the day-100 commit moves to T1_3
        assert commits.tolist() == [1, 0, 0, 0, 0, 0, 1, 1]

    def test_104_points_and_names(self):
        vec = flatten(extract_features(fixture_snapshot(), Scenario(24, 3)))
        assert len(vec) == 104
        assert next(iter(vec)) == "forks_T1_3"
        assert list(vec)[-1] == "owner_commits_T22_24"

    def test_13_points(self):
        assert len(flatten(extract_features(fixture_snapshot(), Scenario(12, 12)))) == 13

    def test_insufficient_history(self):
        s = make_snapshot(commit_days=(0, 600))  # 20 months
        with pytest.raises(InsufficientHistory):
            extract_features(s, Scenario(24, 3))

    def test_no_commits(self):
        with pytest.raises(InsufficientHistory):
            extract_features(make_snapshot(commit_days=()), Scenario(6, 3))


event_days = st.lists(st.floats(min_value=0, max_value=1000, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(days=event_days, shift=st.integers(-3000, 3000), who=st.lists(st.sampled_from("abcd"), min_size=40, max_size=40))
def test_window_properties(days, shift, who):
    days = sorted(days) + [1000.0]
    s = make_snapshot(commit_days=tuple([0.0] + days), authors=[who[0]] + who[: len(days)] + ["a"])
    sc = Scenario(24, 3)
    anchor = day(1000)
    mx = extract_features(s, sc, anchor)
    commits = mx.values[FEATURES.index("commits")]
    in_window = sum(1 for c in s.commits if anchor - timedelta(days=720) <= c.timestamp <= anchor)
    assert commits.sum() == in_window
    assert (mx.values[FEATURES.index("distinct_contributors")] >= mx.values[FEATURES.index("new_contributors")]).all()
    assert (mx.values >= 0).all() and np.isfinite(mx.values).all()

    # translation invariance
    delta = timedelta(days=shift)
    moved = make_snapshot(
        commit_days=tuple(d + shift for d in [0.0] + days),
        authors=[who[0]] + who[: len(days)] + ["a"],
    )
    assert np.array_equal(extract_features(moved, sc, anchor + delta).values, mx.values)


def test_flatten_injective():
    mx = extract_features(fixture_snapshot(), Scenario(24, 3))
    other = extract_features(fixture_snapshot(), Scenario(24, 3))
    other.values[3, 4] += 1
    a, b = flatten(mx), flatten(other)
    assert sum(a[k] != b[k] for k in a) == 1


class TestDataset:
    def test_build_skips_and_csv_round_trip(self):
        entries = [
            CorpusEntry(fixture_snapshot(), "active"),
            CorpusEntry(make_snapshot(name="short", commit_days=(0, 10)), "unmaintained"),
            CorpusEntry(make_snapshot(name="third", commit_days=(0, 730)), "unlabeled"),
        ]
        ds = build_dataset(entries, Scenario(24, 3))
        assert ds.repo_ids == ["octo/repo", "octo/third"]
        assert list(ds.skipped) == ["octo/short"]
        assert ds.y.tolist() == [1, -1]
        text = ds.to_csv()
        assert text.splitlines()[0].endswith(",label")
        assert text.splitlines()[1].endswith(",active")
        back = Dataset.from_csv(text)
        assert back.repo_ids == ds.repo_ids and back.columns == ds.columns
        assert np.array_equal(back.X, ds.X) and back.y.tolist() == ds.y.tolist()
        assert len(ds.labeled()) == 1

    def test_observed_anchor(self):
        s = make_snapshot(commit_days=(0, 700), fetched_day=800)
        entries = [CorpusEntry(s, "active")]
        last = build_dataset(entries, Scenario(6, 3))
        observed = build_dataset(entries, Scenario(6, 3), AnchorPolicy.OBSERVED)
        col = last.columns.index("commits_T4_6")
        assert last.X[0, col] == 1 and observed.X[0, col] == 0

    def test_strict_mode_raises(self):
        with pytest.raises(InsufficientHistory):
            build_dataset([make_snapshot(commit_days=(0, 10))], Scenario(24, 3), skip_insufficient=False)

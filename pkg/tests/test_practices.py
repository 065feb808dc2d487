import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_snapshot
from repo_vitals.errors import EmptySample
from repo_vitals.practices import (
    PRACTICES,
    PracticeProfile,
    compare_adoption,
    detect_practices,
    load_sentences,
    profile_dict,
    scan_readme,
)
from repo_vitals.stats import cliffs_delta


def detect(files=(), labels=(), homepage=None):
    return detect_practices(make_snapshot([0], repo_files=tuple(files), labels=tuple(labels), homepage_url=homepage))


class TestDetect:
    def test_travis_only(self):
        p = detect([".travis.yml"])
        assert p.continuous_integration
        assert sum(profile_dict(p).values()) == 1

    def test_nothing(self):
        assert detect() == PracticeProfile()

    @pytest.mark.parametrize(
        "url,ok",
        [
            ("https://owner.github.io/proj", False),
            ("https://github.com/owner/proj", False),
            ("https://proj.example.org", True),
            ("proj.dev", True),
            ("", False),
            (None, False),
        ],
    )
    def test_homepage(self, url, ok):
        assert detect(homepage=url).home_page is ok

    @pytest.mark.parametrize("labels", [["Good First Issue"], ["help wanted"], ["good-first-issue"], ["HELP_WANTED"]])
    def test_first_timer_labels(self, labels):
        assert detect(labels=labels).first_timers_labels

    def test_unrelated_labels(self):
        assert not detect(labels=["bug", "first issue"]).first_timers_labels

    def test_file_rules(self):
        p = detect(
            [
                "LICENSE.md",
                ".github/CONTRIBUTING.md",
                ".github/ISSUE_TEMPLATE/bug.md",
                "docs/CODE_OF_CONDUCT.md",
                "pull_request_template.md",
                "SUPPORT.md",
            ]
        )
        assert p.license and p.contributing_guidelines and p.issue_template and p.pull_request_template and p.support_file
        assert not p.code_of_conduct  # only root and .github count
        assert detect(["copying"]).license
        assert not detect(["src/LICENSE"]).license
        assert not detect(["ci/.travis.yml"]).continuous_integration

    def test_deterministic(self, small_corpus):
        for e in list(small_corpus)[:10]:
            assert detect_practices(e.snapshot) == detect_practices(e.snapshot)


class TestReadme:
    def test_deprecated(self):
        v = scan_readme("This project is DEPRECATED.")
        assert v.matched
        assert [(h.phrase, h.start, h.end) for h in v.sentences_hit] == [("deprecated", 16, 26)]

    def test_empty(self):
        v = scan_readme("")
        assert not v.matched and v.sentences_hit == ()

    def test_over_trigger(self):
        v = scan_readme("we deprecated the old API method")
        assert v.matched and v.sentences_hit[0].start == 3

    def test_overlapping_phrases(self):
        v = scan_readme("No longer supported or updated.")
        assert {h.phrase for h in v.sentences_hit} == {"no longer supported or updated", "no longer supported"}

    def test_curly_apostrophe(self):
        assert scan_readme("This library isn’t maintained anymore").matched

    def test_bundled_list(self):
        phrases = load_sentences()
        assert len(phrases) == len(set(phrases)) == 14
        assert "deprecated" in phrases and "no longer supported" in phrases

    def test_custom_list(self, tmp_path):
        f = tmp_path / "phrases.txt"
        f.write_text("# extra\nsunset\n\nSunset\nsunset\n", encoding="utf-8")
        phrases = load_sentences(f)
        assert phrases == ["sunset", "Sunset"]
        assert scan_readme("This API is sunset", phrases).matched
        assert not scan_readme("This is deprecated", phrases).matched

    @given(st.text(max_size=60), st.text(max_size=60))
    def test_concatenation(self, a, b):
        if scan_readme(a).matched or scan_readme(b).matched:
            assert scan_readme(a + b).matched

    @given(st.text(max_size=80))
    def test_matched_iff_hits(self, t):
        v = scan_readme(t)
        assert v.matched == bool(v.sentences_hit)
        for h in v.sentences_hit:
            assert t[h.start : h.end].lower().replace("’", "'") == h.phrase.lower()


def profiles(shares, n, rng):
    out = []
    counts = {name: round(shares.get(name, 0.0) * n) for name in PRACTICES}
    for i in range(n):
        out.append(PracticeProfile(**{name: i < counts[name] for name in PRACTICES}))
    rng.shuffle(out)
    return out


class TestAdoption:
    def test_identical(self):
        g = [PracticeProfile(license=True), PracticeProfile()]
        t = compare_adoption(g, g)
        assert all(r.d == 0 and r.magnitude == "negligible" for r in t.rows)
        assert [r.practice for r in t.rows] == list(PRACTICES)

    def test_ci_example(self):
        rng = np.random.default_rng(0)
        a = profiles({"continuous_integration": 0.71}, 100, rng)
        b = profiles({"continuous_integration": 0.45}, 100, rng)
        row = {r.practice: r for r in compare_adoption(a, b).rows}["continuous_integration"]
        assert (row.share_a, row.share_b) == (0.71, 0.45)
        assert row.d == pytest.approx(0.26) and row.magnitude == "small"
        assert 0 <= row.p_value <= 1

    def test_total_separation(self):
        a = [PracticeProfile(license=True)] * 5
        b = [PracticeProfile()] * 7
        row = compare_adoption(a, b).rows[0]
        assert row.d == 1.0 and row.magnitude == "large"

    @given(st.lists(st.booleans(), min_size=1, max_size=300), st.lists(st.booleans(), min_size=1, max_size=300))
    def test_delta_is_share_difference(self, a, b):
        d = cliffs_delta([int(x) for x in a], [int(x) for x in b]).d
        assert d == pytest.approx(sum(a) / len(a) - sum(b) / len(b), abs=1e-12)

    def test_empty_and_csv(self):
        with pytest.raises(EmptySample):
            compare_adoption([], [PracticeProfile()])
        csv = compare_adoption([PracticeProfile()], [PracticeProfile(license=True)]).to_csv().splitlines()
        assert csv[0] == "practice,share_a,share_b,d,magnitude,p_value"
        assert csv[1].startswith("license,0.0,1.0,-1.0,large,")

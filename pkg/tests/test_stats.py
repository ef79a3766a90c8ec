import pytest

from linkforge.records import header_line
from linkforge.stats import ccdf_table, ccdf_value, scenario_frequencies, stats_report


class _Tagged:
    def __init__(self, lang, scenario):
        self.lang = lang
        self.scenario = scenario


class _Scenario:
    def __init__(self, value):
        self.value = value


def tagged(scenario, lang="en"):
    return _Tagged(lang, _Scenario(scenario))


def test_scenario_frequencies():
    items = (
        [tagged("text_present")] * 3
        + [tagged("missing_mention")] * 1
        + [tagged("missing_sentence")] * 2
        + [tagged("missing_span")] * 1
        + [tagged("missing_section")] * 1
    )
    freqs = scenario_frequencies(items)["en"]
    assert freqs == {
        "text_present": 0.375,
        "missing_mention": 0.125,
        "missing_sentence": 0.25,
        "missing_span": 0.125,
        "missing_section": 0.125,
    }


def test_ccdf_definition():
    values = [2, 5, 5]
    assert ccdf_value(values, 4) == pytest.approx(2 / 3)
    table = dict(ccdf_table(values))
    assert table[4] == pytest.approx(2 / 3)
    assert table[1] == pytest.approx(1.0)
    assert table[5] == pytest.approx(0.0)


def test_empty_file_empty_report(tmp_path):
    path = tmp_path / "empty.events.ndjson"
    path.write_text(header_line("event") + "\n", encoding="utf-8")
    report = stats_report(path)
    assert report["input_kind"] == "event"
    assert report["scenario_frequencies"] == {}


def test_stats_on_fixture_articles(tmp_path, snapshot_a):
    from linkforge.records import write_records

    articles, _ = snapshot_a
    path = tmp_path / "x.articles.ndjson"
    write_records(path, "article", articles)
    report = stats_report(path)
    table = dict(report["candidate_ccdf"])
    assert table[0] == 1.0  # every article has at least one sentence

from __future__ import annotations

import json

import pytest

from conftest import CORPUS
from prose2dp.config import DEFAULT_PROVIDER
from prose2dp.conformance import KINDS
from prose2dp.gateway import Gateway, ReplayMiss, TranscriptStore
from prose2dp.evaluation import (CSV_HEADER, CorpusError, EvalRecord, EvalSettings, Task, load_corpus,
                                 read_csv_report, run_eval, run_task, write_report)
from prose2dp.prompting import TokenBudget


def replay_gateway():
    return Gateway(DEFAULT_PROVIDER, replay=TranscriptStore(CORPUS / "replay.jsonl"), strict=True)


def write_task(directory, name, **data):
    (directory / f"{name}.task.json").write_text(json.dumps(data))


def test_complex_corpus():
    tasks = load_corpus(CORPUS / "complex")
    assert [t.id for t in tasks] == ["firewall", "nat", "tunnel6to4"]
    assert all(t.complexity == "complex" for t in tasks)
    assert len(load_corpus(CORPUS)) == 13


def test_empty_corpus(tmp_path):
    assert load_corpus(tmp_path) == []


def test_duplicate_ids_rejected(tmp_path):
    write_task(tmp_path, "a", id="same", query="q1")
    write_task(tmp_path, "b", id="same", query="q2")
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(tmp_path)


@pytest.mark.parametrize("data", [{"query": ""}, {"query": "q", "complexity": "hard"}, {"id": 3, "query": "q"}])
def test_invalid_tasks_rejected(tmp_path, data):
    write_task(tmp_path, "t", **data)
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_missing_directory(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "nope")


def test_replayed_complex_tasks_match_reference_metrics(full, examples):
    records = run_eval(load_corpus(CORPUS / "complex"), full, examples, replay_gateway(), EvalSettings())
    got = {r.task_id: (r.rule_count, r.loc, r.loc_to_fix_proxy) for r in records}
    assert got == {"firewall": (91, 17, 2), "nat": (97, 39, 0), "tunnel6to4": (74, 15, 4)}
    assert all(r.error == "" and r.token_estimate <= 6000 for r in records)
    nat = next(r for r in records if r.task_id == "nat")
    assert nat.violation_counts["UnusedPredictedRule"] == 4 and nat.violations == 4


def test_runs_are_deterministic_across_parallelism(full, examples):
    corpus = load_corpus(CORPUS)
    serial = run_eval(corpus, full, examples, replay_gateway(), EvalSettings(parallelism=1))
    parallel = run_eval(corpus, full, examples, replay_gateway(), EvalSettings(parallelism=4))
    assert serial == parallel
    assert write_report(serial) == write_report(parallel)
    assert [r.task_id for r in serial] == [t.id for t in corpus]


def test_empty_corpus_gives_no_records(full, examples):
    assert run_eval([], full, examples, replay_gateway(), EvalSettings()) == []


def test_one_failing_task_does_not_touch_the_others(full, examples):
    corpus = load_corpus(CORPUS / "complex")
    good = run_eval(corpus, full, examples, replay_gateway(), EvalSettings())
    broken = [Task("ghost", "a query nobody answered")] + corpus
    records = run_eval(broken, full, examples, replay_gateway(), EvalSettings(parallelism=3))
    assert records[0].error.startswith("ReplayMiss (iteration 0)")
    assert records[1:] == good


def test_budget_error_is_recorded(full, examples):
    rec = run_task(Task("t", "q"), full, examples, replay_gateway(), EvalSettings(budget=TokenBudget(50)))
    assert rec.error.startswith("BudgetError") and rec.token_estimate == 0


def test_strategies_key_records_identically(full, examples):
    class Echo:
        def complete(self, messages):
            return "const int A = 1;\n"

    corpus = load_corpus(CORPUS / "complex")
    naive = EvalSettings(strategy="naive", naive_resources=[("GRAMMAR", (CORPUS.parent / "fixtures" /
                                                                        "lucid_subset.gram").read_text())])
    a = run_eval(corpus, full, examples, Echo(), naive)
    b = run_eval(corpus, full, examples, Echo(), EvalSettings())
    assert [r.task_id for r in a] == [r.task_id for r in b]
    assert all(r.violations == 0 for r in a)
    assert all(r.violation_counts["MissingGrammarSection"] == 1 for r in b)


def test_unknown_strategy():
    with pytest.raises(ValueError):
        EvalSettings(strategy="magic")


def test_csv_round_trip(full, examples):
    records = run_eval(load_corpus(CORPUS / "complex"), full, examples, replay_gateway(), EvalSettings())
    text = write_report(records, "csv")
    assert text.splitlines()[0].split(",") == list(CSV_HEADER)
    assert write_report(read_csv_report(text), "csv") == text
    assert read_csv_report(text) == records


def test_csv_round_trip_with_awkward_error_text():
    rec = EvalRecord("t", "naive", 0, 0, 0, {k: 0 for k in KINDS}, error='ReplayMiss: "x", y\nz')
    text = write_report([rec])
    assert read_csv_report(text) == [rec]


def test_header_only_reports():
    assert write_report([], "csv") == ",".join(CSV_HEADER) + "\n"
    md = write_report([], "markdown")
    assert md.splitlines()[0].startswith("| Task | # of rules | LoC | LoC to fix (proxy) |")
    assert len(md.splitlines()) == 2


def test_markdown_table_layout(full, examples):
    records = run_eval(load_corpus(CORPUS / "complex"), full, examples, replay_gateway(), EvalSettings())
    rows = write_report(records, "md").splitlines()[2:]
    cells = [[c.strip() for c in row.strip("|").split("|")][:4] for row in rows]
    assert cells == [["firewall", "91", "17", "2"], ["nat", "97", "39", "0"], ["tunnel6to4", "74", "15", "4"]]


def test_bad_format_and_bad_csv():
    with pytest.raises(ValueError):
        write_report([], "xml")
    with pytest.raises(ValueError):
        read_csv_report("a,b\n")


def test_replay_miss_surfaces_through_gateway(full, examples):
    with pytest.raises(ReplayMiss):
        replay_gateway().complete((("user", "unknown"),))

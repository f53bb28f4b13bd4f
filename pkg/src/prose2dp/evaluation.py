"""Corpus runs and per-task metric reports (CSV and markdown)."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .conformance import KINDS
from .gateway import GatewayError
from .grammar import Grammar
from .prompting import (BudgetError, FewShotExample, PromptBundle, TokenBudget, build_grammar_prompt,
                        build_naive_prompt)
from .repair import CompletionClient, repair_loop

STRATEGIES = ("naive", "grammar_prompt")
COMPLEXITIES = ("simple", "complex")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    query: str
    complexity: str = "simple"
    notes: str = ""


def _load_task(path: Path) -> Task:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorpusError(f"{path}: cannot read task ({exc})") from None
    if not isinstance(data, dict):
        raise CorpusError(f"{path}: task must be a JSON object")
    tid = data.get("id", path.name[: -len(".task.json")])
    query = data.get("query")
    complexity = data.get("complexity", "simple")
    notes = data.get("notes", "")
    if not isinstance(tid, str) or not tid:
        raise CorpusError(f"{path}: id must be a non-empty string")
    if not isinstance(query, str) or not query.strip():
        raise CorpusError(f"{path}: query must be a non-empty string")
    if complexity not in COMPLEXITIES:
        raise CorpusError(f"{path}: complexity must be one of {COMPLEXITIES}")
    if not isinstance(notes, str):
        raise CorpusError(f"{path}: notes must be a string")
    return Task(tid, query, complexity, notes)


def load_corpus(path: str | Path) -> list[Task]:
    """One task per ``<id>.task.json`` file anywhere under ``path``, sorted by id."""
    path = Path(path)
    if not path.is_dir():
        raise CorpusError(f"{path}: not a directory")
    tasks: dict[str, Path] = {}
    out = []
    for file in sorted(path.rglob("*.task.json")):
        task = _load_task(file)
        if task.id in tasks:
            raise CorpusError(f"duplicate task id {task.id!r} in {tasks[task.id]} and {file}")
        tasks[task.id] = file
        out.append(task)
    return sorted(out, key=lambda t: t.id)


@dataclass(frozen=True)
class EvalRecord:
    task_id: str
    strategy: str
    rule_count: int
    loc: int
    loc_to_fix_proxy: int
    violation_counts: dict = field(default_factory=dict)
    iterations_used: int = 0
    converged: bool = False
    token_estimate: int = 0
    trimmed: int = 0
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def violations(self) -> int:
        return sum(self.violation_counts.values())


@dataclass
class EvalSettings:
    strategy: str = "grammar_prompt"
    budget: TokenBudget = field(default_factory=lambda: TokenBudget(6000))
    max_iters: int = 0
    resend_grammar: bool = False
    parallelism: int | None = None
    naive_resources: Sequence[tuple[str, str]] = ()
    grammar_template: str | None = None
    naive_template: str | None = None
    feedback_template: str | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")


def build_prompt(task: Task, grammar: Grammar, examples: Sequence[FewShotExample],
                 settings: EvalSettings) -> PromptBundle:
    if settings.strategy == "naive":
        return build_naive_prompt(settings.naive_resources, task.query, settings.budget,
                                  settings.naive_template)
    return build_grammar_prompt(grammar, examples, task.query, settings.budget, settings.grammar_template)


def run_task(task: Task, grammar: Grammar, examples: Sequence[FewShotExample], gateway: CompletionClient,
             settings: EvalSettings) -> EvalRecord:
    started = time.perf_counter()
    zero = {k: 0 for k in KINDS}
    bundle = None
    try:
        bundle = build_prompt(task, grammar, examples, settings)
        outcome = repair_loop(grammar, bundle, gateway, settings.max_iters, settings.resend_grammar,
                              settings.feedback_template, require_grammar=settings.strategy != "naive")
    except (GatewayError, BudgetError) as exc:
        where = f" (iteration {exc.iteration})" if getattr(exc, "iteration", None) is not None else ""
        return EvalRecord(task.id, settings.strategy, 0, 0, 0, zero, 0, False,
                          bundle.token_estimate if bundle else 0, len(bundle.trimmed) if bundle else 0,
                          f"{type(exc).__name__}{where}: {exc}", time.perf_counter() - started)
    rep = outcome.final_report
    return EvalRecord(task.id, settings.strategy, rep.predicted_rule_count, rep.program_loc,
                      rep.loc_to_fix_proxy, rep.counts(), outcome.iterations_used, outcome.converged,
                      bundle.token_estimate, len(bundle.trimmed), "", time.perf_counter() - started)


def run_eval(corpus: Sequence[Task], grammar: Grammar, examples: Sequence[FewShotExample],
             gateway: CompletionClient, settings: EvalSettings) -> list[EvalRecord]:
    """Run every task; records come back in corpus order whatever the parallelism."""
    if not corpus:
        return []
    workers = settings.parallelism or getattr(gateway, "max_in_flight", 1)
    if workers <= 1:
        return [run_task(t, grammar, examples, gateway, settings) for t in corpus]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_task, t, grammar, examples, gateway, settings) for t in corpus]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# reports

CSV_HEADER = ("task_id", "strategy", "rule_count", "loc", "loc_to_fix_proxy", *KINDS,
              "iterations_used", "converged", "token_estimate", "trimmed", "error")
MD_HEADER = ("Task", "# of rules", "LoC", "LoC to fix (proxy)", "Strategy", "Violations",
             "Iterations", "Converged", "Prompt tokens", "Error")


def _csv_row(r: EvalRecord) -> list:
    return [r.task_id, r.strategy, r.rule_count, r.loc, r.loc_to_fix_proxy,
            *(r.violation_counts.get(k, 0) for k in KINDS),
            r.iterations_used, "true" if r.converged else "false", r.token_estimate, r.trimmed, r.error]


def _md_cell(value) -> str:
    return str(value).replace("|", "\\|").replace("\n", " ")


def write_report(records: Sequence[EvalRecord], fmt: str = "csv") -> str:
    """Render records as CSV (fixed header) or a markdown table.  Wall time is left out so
    output depends only on the records' metrics."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(_csv_row(r))
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        lines = ["| " + " | ".join(MD_HEADER) + " |", "|" + "---|" * len(MD_HEADER)]
        for r in records:
            cells = [r.task_id, r.rule_count, r.loc, r.loc_to_fix_proxy, r.strategy, r.violations,
                     r.iterations_used, "yes" if r.converged else "no", r.token_estimate, r.error or ""]
            lines.append("| " + " | ".join(_md_cell(c) for c in cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def read_csv_report(text: str) -> list[EvalRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("not a report CSV: header mismatch")
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_HEADER, row))
        out.append(EvalRecord(
            d["task_id"], d["strategy"], int(d["rule_count"]), int(d["loc"]), int(d["loc_to_fix_proxy"]),
            {k: int(d[k]) for k in KINDS}, int(d["iterations_used"]), d["converged"] == "true",
            int(d["token_estimate"]), int(d["trimmed"]), d["error"]))
    return out

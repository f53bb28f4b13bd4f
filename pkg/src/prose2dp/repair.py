"""Conversational repair: feed violations back to the model and keep the best attempt."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .conformance import ConformanceReport, GenerationResponse, Violation, check, extract_sections
from .gateway import GatewayError
from .grammar import Grammar, render_bnf
from .prompting import PromptBundle, default_template, fill


class CompletionClient(Protocol):
    def complete(self, messages: Sequence[tuple[str, str]]) -> str: ...


@dataclass(frozen=True)
class RepairOutcome:
    final_response: GenerationResponse
    final_report: ConformanceReport
    history: tuple[tuple[GenerationResponse, ConformanceReport], ...]
    iterations_used: int
    converged: bool
    conversation: tuple[tuple[str, str], ...] = ()

    @property
    def best_index(self) -> int:
        return max(i for i, (_, rep) in enumerate(self.history) if rep is self.final_report)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "best_attempt": self.best_index,
            "final_report": self.final_report.to_dict(),
            "history": [{"attempt": i, "raw": resp.raw, "report": rep.to_dict()}
                        for i, (resp, rep) in enumerate(self.history)],
            "conversation": [{"role": r, "content": c} for r, c in self.conversation],
        }


def violation_lines(violations: Sequence[Violation]) -> str:
    """One bullet per violation: kind, position, detail."""
    out = []
    for v in violations:
        where = f"{v.section} line {v.line}, col {v.col or 1}" if v.line is not None else "no position"
        out.append(f"- {v.kind} ({where}): {v.detail}")
    return "\n".join(out)


def feedback_message(report: ConformanceReport, grammar: Grammar | None = None,
                     template: str | None = None) -> str:
    template = template or default_template("feedback.txt")
    grammar_part = ""
    if grammar is not None:
        grammar_part = f"\nThe complete grammar again:\n\n[BEGIN RULES]\n{render_bnf(grammar)}[END RULES]\n"
    return fill(template, violations=violation_lines(report.violations), grammar=grammar_part)


def _best(history: Sequence[tuple[GenerationResponse, ConformanceReport]]) -> int:
    # fewest violations, latest on ties
    return min(range(len(history)), key=lambda i: (len(history[i][1].violations), -i))


def repair_loop(full: Grammar, prompt: PromptBundle, gateway: CompletionClient, max_iters: int = 3,
                resend_grammar: bool = False, feedback_template: str | None = None,
                require_grammar: bool = True) -> RepairOutcome:
    """Send ``prompt``, then up to ``max_iters`` feedback rounds until a clean report.

    ``max_iters=0`` is a single attempt with no feedback.  Gateway errors are
    re-raised with an ``iteration`` attribute.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be non-negative")
    messages = list(prompt.messages)
    history: list[tuple[GenerationResponse, ConformanceReport]] = []
    for iteration in range(max_iters + 1):
        try:
            raw = gateway.complete(tuple(messages))
        except GatewayError as exc:
            exc.iteration = iteration
            raise
        resp = extract_sections(raw, expect_grammar=require_grammar)
        report = check(full, resp, require_grammar=require_grammar)
        history.append((resp, report))
        messages.append(("assistant", raw))
        if report.clean or iteration == max_iters:
            break
        messages.append(("user", feedback_message(report, full if resend_grammar else None,
                                                  feedback_template)))
    best = _best(history)
    final_resp, final_report = history[best]
    return RepairOutcome(final_resp, final_report, tuple(history), len(history) - 1,
                         final_report.clean, tuple(messages))

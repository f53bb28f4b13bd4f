"""Prompt assembly under a token budget: grammar prompting and the naive resource dump."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources as _resources
from pathlib import Path
from typing import Sequence

from .grammar import Grammar, render_bnf
from .projection import GrammarSubset, is_sound, project_source

GRAMMAR_MARKER = "BNF grammar rules:"
PROGRAM_MARKER = "program based on the BNF grammar rules:"
BEGIN_RULES = "[BEGIN RULES]"
END_RULES = "[END RULES]"


class BudgetError(ValueError):
    """The fixed part of a prompt alone exceeds the token budget."""


def default_template(name: str) -> str:
    return _resources.files("prose2dp").joinpath("templates", name).read_text(encoding="utf-8")


def fill(template: str, **values: str) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{{" + key + "}}", value)
    return out


@dataclass(frozen=True)
class TokenBudget:
    max_tokens: int
    chars_per_token: Fraction | float | int = 4

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.chars_per_token <= 0:
            raise ValueError("chars_per_token must be positive")


def estimate_tokens(text: str, budget: TokenBudget | None = None) -> int:
    """``ceil(len(text) / chars_per_token)``."""
    ratio = budget.chars_per_token if budget else 4
    ratio = Fraction(str(ratio)) if isinstance(ratio, float) else Fraction(ratio)
    return math.ceil(Fraction(len(text)) / ratio)


@dataclass(frozen=True)
class FewShotExample:
    query: str
    subset: GrammarSubset
    program: str
    id: str = ""

    @classmethod
    def from_program(cls, g: Grammar, query: str, program: str, id: str = "") -> "FewShotExample":
        return cls(query, project_source(g, program), program, id)

    def is_sound(self) -> bool:
        return is_sound(self.subset, self.program)

    def render(self) -> str:
        return (f"query: {self.query}\n\n{GRAMMAR_MARKER}\n{self.subset.render()}\n"
                f"{PROGRAM_MARKER}\n{self.program.rstrip()}\n\n")


def load_examples(directory: str | Path, g: Grammar) -> list[FewShotExample]:
    """Load ``*.json`` example files (``query`` plus a ``program`` file name), sorted by name."""
    directory = Path(directory)
    out = []
    for path in sorted(directory.glob("*.json")):
        data = json.loads(path.read_text(encoding="utf-8"))
        program = (directory / data["program"]).read_text(encoding="utf-8")
        out.append(FewShotExample.from_program(g, data["query"], program, id=path.stem))
    return out


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[tuple[str, str], ...]
    token_estimate: int
    trimmed: tuple[str, ...] = field(default=())

    @property
    def text(self) -> str:
        return "".join(content for _, content in self.messages)

    def to_dict(self) -> dict:
        return {
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "token_estimate": self.token_estimate,
            "trimmed": list(self.trimmed),
        }


def _fit(render, items: Sequence, ids: Sequence[str], budget: TokenBudget) -> PromptBundle:
    fixed = render([])
    if estimate_tokens(fixed, budget) > budget.max_tokens:
        raise BudgetError(
            f"prompt without optional parts needs {estimate_tokens(fixed, budget)} tokens, "
            f"budget is {budget.max_tokens}")
    keep = len(items)
    while True:
        text = render(items[:keep])
        estimate = estimate_tokens(text, budget)
        if estimate <= budget.max_tokens:
            return PromptBundle((("user", text),), estimate, tuple(ids[keep:]))
        keep -= 1


def build_grammar_prompt(g: Grammar, examples: Sequence[FewShotExample], query: str,
                         budget: TokenBudget, template: str | None = None) -> PromptBundle:
    """Instruction header, full grammar, example triplets, then the query.

    Examples are dropped from the end until the prompt fits the budget.
    """
    template = template or default_template("grammar_prompt.txt")
    grammar_text = render_bnf(g)
    ids = [ex.id or str(i) for i, ex in enumerate(examples)]

    def render(chosen):
        return fill(template, grammar=grammar_text,
                    examples="".join(ex.render() for ex in chosen), query=query)

    return _fit(render, list(examples), ids, budget)


def build_naive_prompt(resources: Sequence[tuple[str, str]], query: str, budget: TokenBudget,
                       template: str | None = None) -> PromptBundle:
    """One message with every resource in a labelled section; trailing resources are dropped to fit."""
    template = template or default_template("naive_prompt.txt")

    def render(chosen):
        body = "".join(f"[BEGIN {label}]\n{text.rstrip()}\n[END {label}]\n\n" for label, text in chosen)
        return fill(template, resources=body, query=query)

    return _fit(render, list(resources), [label for label, _ in resources], budget)


def grammar_section(prompt_text: str) -> str:
    """Text between the rules markers of a grammar prompt."""
    start = prompt_text.index(BEGIN_RULES) + len(BEGIN_RULES)
    end = prompt_text.index(END_RULES, start)
    return prompt_text[start:end].strip("\n") + "\n"

"""Check an LLM response (predicted grammar + program) against the full grammar."""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field, replace
from typing import Sequence

from .grammar import (Grammar, GrammarError, Production, Sym, TerminalDef, count_rules, desugar,
                      parse_grammar_lenient, quote, with_productions)
from .lexer import LexError, Lexeme, ParseDiagnostic, line_col, tokenize
from .parser import ParseError, error_lines, parse, used_in_any_derivation

MISSING_GRAMMAR = "MissingGrammarSection"
MISSING_PROGRAM = "MissingProgramSection"
NOT_IN_FULL = "PredictedRuleNotInFull"
FAIL_PREDICTED = "ParseFailUnderPredicted"
FAIL_FULL = "ParseFailUnderFull"
NOT_LICENSED = "LexemeNotLicensed"
UNUSED = "UnusedPredictedRule"
KINDS = (MISSING_GRAMMAR, MISSING_PROGRAM, NOT_IN_FULL, FAIL_PREDICTED, FAIL_FULL, NOT_LICENSED, UNUSED)

# ---------------------------------------------------------------------------
# extraction

_GRAMMAR_MARK = re.compile(r"^[^\w\n]*bnf grammar rules[ \t]*:?[^\w\n]*$", re.I | re.M)
_PROGRAM_MARK = re.compile(r"^[^\w\n]*program based on the bnf grammar rules[ \t]*:?[^\w\n]*$", re.I | re.M)
_FENCE = re.compile(r"^[ \t]*(```|~~~)[^\n`]*$", re.M)


@dataclass(frozen=True)
class GenerationResponse:
    raw: str
    predicted_grammar_text: str | None
    program_text: str | None


def _trim(text: str) -> str | None:
    lines = text.split("\n")
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(line.rstrip() for line in lines) + "\n" if lines else None


def _fenced_blocks(text: str) -> list[str]:
    marks = list(_FENCE.finditer(text))
    blocks = []
    for k in range(0, len(marks), 2):
        start = marks[k].end() + 1
        end = marks[k + 1].start() if k + 1 < len(marks) else len(text)
        blocks.append(text[start:end])
    return blocks


def _unfenced(text: str) -> str:
    """Content of the first fenced block if any, else the text itself."""
    blocks = _fenced_blocks(text)
    return blocks[0] if blocks else text


def _rule_line(line: str) -> bool:
    s = line.strip()
    return "::=" in s or s.startswith("|")


def _grammar_like(text: str) -> bool:
    lines = [l for l in text.splitlines() if l.strip() and not _FENCE.match(l)]
    return bool(lines) and sum(_rule_line(l) for l in lines) * 2 > len(lines)


def _split_leading_rules(text: str) -> tuple[str | None, str | None]:
    """Leading BNF lines as a grammar, the rest as a program."""
    lines = text.split("\n")
    k = 0
    seen_rule = False
    while k < len(lines):
        s = lines[k].strip()
        if _rule_line(lines[k]) or (seen_rule and s in ("[...]", "...")) or (not s) or s.startswith("//"):
            seen_rule = seen_rule or _rule_line(lines[k])
            k += 1
            continue
        break
    if not seen_rule:
        return None, _trim(text)
    return _trim("\n".join(lines[:k])), _trim("\n".join(lines[k:]))


def _split_body(text: str) -> tuple[str | None, str | None]:
    blocks = [b for b in _fenced_blocks(text) if b.strip()]
    if blocks:
        if _grammar_like(blocks[0]):
            return _split_fenced_grammar(blocks)
        return None, _trim(blocks[0])
    return _split_leading_rules(text)


def _split_fenced_grammar(blocks: list[str]) -> tuple[str | None, str | None]:
    grammar, program = _split_leading_rules(blocks[0])
    if program is None and len(blocks) > 1:
        program = _trim(blocks[1])
    return grammar, program


def extract_sections(raw: str, expect_grammar: bool = True) -> GenerationResponse:
    """Find the predicted grammar and the program in a response.

    Marker lines are tried first; without them the first two fenced blocks are
    used, the first counting as the grammar only when it looks like BNF.
    """
    if not expect_grammar:
        return GenerationResponse(raw, None, _trim(_unfenced(raw)))
    marks = sorted([(m.start(), m.end(), "g") for m in _GRAMMAR_MARK.finditer(raw)][:1]
                   + [(m.start(), m.end(), "p") for m in _PROGRAM_MARK.finditer(raw)][:1])
    if not marks:
        grammar, program = _split_body(raw)
        return GenerationResponse(raw, grammar, program)
    sections = {}
    for k, (_, end, tag) in enumerate(marks):
        stop = marks[k + 1][0] if k + 1 < len(marks) else len(raw)
        sections[tag] = raw[end:stop]
    grammar = program = None
    if "g" in sections and "p" in sections:
        grammar = _trim(_unfenced(sections["g"]))
        program = _trim(_unfenced(sections["p"]))
    elif "g" in sections:
        grammar, program = _split_body(sections["g"])
    else:
        before = raw[:marks[0][0]]
        program = _trim(_unfenced(sections["p"]))
        blocks = [b for b in _fenced_blocks(before) if b.strip()]
        candidate = blocks[0] if blocks else before
        if _grammar_like(candidate):
            grammar = _split_leading_rules(candidate)[0]
    return GenerationResponse(raw, grammar, program)


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    line: int | None = None
    col: int | None = None
    section: str | None = None  # "grammar" | "program"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown violation kind {self.kind!r}")

    @property
    def position(self) -> tuple[int, int] | None:
        return None if self.line is None else (self.line, self.col or 1)

    def render(self) -> str:
        where = f" at {self.section} {self.line}:{self.col or 1}" if self.line is not None else ""
        return f"{self.kind}{where}: {self.detail}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "section": self.section, "line": self.line, "col": self.col,
                "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "Violation":
        return cls(d["kind"], d["detail"], d.get("line"), d.get("col"), d.get("section"))


@dataclass(frozen=True)
class ExternalResult:
    command: str
    status: int
    output: str
    lines: tuple[int, ...]


@dataclass(frozen=True)
class ConformanceReport:
    violations: tuple[Violation, ...]
    predicted_rule_count: int
    program_loc: int
    loc_to_fix_proxy: int
    external: ExternalResult | None = field(default=None)

    @property
    def clean(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in KINDS}
        for v in self.violations:
            out[v.kind] += 1
        return out

    def to_dict(self) -> dict:
        d = {
            "violations": [v.to_dict() for v in self.violations],
            "predicted_rule_count": self.predicted_rule_count,
            "program_loc": self.program_loc,
            "loc_to_fix_proxy": self.loc_to_fix_proxy,
        }
        if self.external is not None:
            d["external"] = {"command": self.external.command, "status": self.external.status,
                             "lines": list(self.external.lines), "output": self.external.output}
        return d

    def render(self) -> str:
        head = (f"rules: {self.predicted_rule_count}  LoC: {self.program_loc}  "
                f"LoC to fix (proxy): {self.loc_to_fix_proxy}")
        if not self.violations:
            return head + "\nno violations\n"
        return head + "\n" + "".join(f"- {v.render()}\n" for v in self.violations)


# ---------------------------------------------------------------------------
# checking

_BLOCK_COMMENT = re.compile(r"/\*[\s\S]*?\*/")


def program_loc(program: str) -> int:
    """Lines that are neither blank nor only comments."""
    text = _BLOCK_COMMENT.sub(lambda m: "\n" * m.group(0).count("\n"), program)
    return sum(1 for line in text.splitlines() if line.split("//", 1)[0].strip())


def _canon(sym: Sym, full: Grammar, predicted: Grammar | None) -> tuple[str, str]:
    if sym.kind == "lit":
        return ("lit", sym.name)
    if sym.kind == "nt":
        return ("nt", sym.name)
    source = full if sym.name in full.terminal_map else predicted
    tdef = source.terminal_map.get(sym.name) if source is not None else None
    if tdef is not None and tdef.literals is not None and len(tdef.literals) == 1:
        return ("lit", tdef.literals[0])
    return ("term", sym.name)


def _signature(p: Production, full: Grammar, predicted: Grammar | None):
    return p.lhs, tuple(_canon(s, full, predicted) for s in p.symbols())


def _check_terminal(t: TerminalDef, full: Grammar) -> list[str]:
    ref = full.terminal_map.get(t.name)
    if ref is None:
        return [f"terminal {t.name} is not defined in the full grammar: {t.render()}"]
    if t.pattern is not None:
        if ref.pattern != t.pattern:
            return [f"{t.name} pattern /{t.pattern}/ differs from the full grammar"]
        return []
    problems = []
    for lit in t.literals:
        ok = ref.regex.fullmatch(lit) is not None if ref.pattern is not None else lit in ref.literals
        if not ok:
            problems.append(f"{t.name} ::= {quote(lit)} is not licensed by the full rule {ref.render()}")
    return problems


def _overlay(full: Grammar, predicted: Grammar) -> Grammar:
    """Predicted productions, lexed with predicted terminals layered over the full inventory."""
    mine = predicted.terminal_map
    terminals = [t if t.name not in mine else
                 TerminalDef(t.name, mine[t.name].literals, mine[t.name].pattern, t.index, mine[t.name].line)
                 for t in full.terminals]
    base = len(full.terminals) + len(full.productions)
    for k, t in enumerate(predicted.terminals):
        if t.name not in full.terminal_map:
            terminals.append(TerminalDef(t.name, t.literals, t.pattern, base + k, t.line))
    return with_productions(predicted, predicted.productions, terminals)


def _lex(g: Grammar, program: str) -> tuple[list[Lexeme], list[ParseDiagnostic]]:
    try:
        return tokenize(g, program), []
    except LexError as exc:
        return exc.lexemes, list(exc.diagnostics)


def _eof(program: str) -> tuple[int, int, int]:
    line, col = line_col(program, len(program))
    return line, col, len(program)


def _diag_violation(kind: str, d: ParseDiagnostic, under: str) -> Violation:
    if d.kind == "lex-error":
        detail = f"{d.offending_text!r} is not a lexeme of the {under} grammar"
    elif d.offending_text:
        detail = f"unexpected {d.offending_text!r} under the {under} grammar; expected one of: " \
                 + (", ".join(d.expected) or "nothing")
    else:
        detail = f"unexpected end of program under the {under} grammar; expected one of: " \
                 + (", ".join(d.expected) or "nothing")
    return Violation(kind, detail, d.line, d.col, "program")


def _overlaps(d: ParseDiagnostic, regions: Sequence[tuple[int, int]]) -> bool:
    lo, hi = d.offset, d.offset + max(len(d.offending_text), 1)
    return any(lo < b and a < hi for a, b in regions)


def check(full: Grammar, resp: GenerationResponse, require_grammar: bool = True) -> ConformanceReport:
    """Validate a response; every finding becomes a :class:`Violation`, nothing raises."""
    full = desugar(full)
    violations: list[Violation] = []
    program = resp.program_text
    grammar_text = resp.predicted_grammar_text

    if grammar_text is None and require_grammar:
        violations.append(Violation(MISSING_GRAMMAR, "response has no predicted grammar section"))
    if program is None:
        violations.append(Violation(MISSING_PROGRAM, "response has no program section"))

    # (1) predicted grammar text
    predicted: Grammar | None = None
    if grammar_text is not None:
        lenient = parse_grammar_lenient(grammar_text)
        for err in lenient.errors:
            violations.append(Violation(NOT_IN_FULL, f"unparseable rule: {err.reason}",
                                        err.line, err.col, "grammar"))
        if lenient.grammar is not None:
            try:
                predicted = desugar(lenient.grammar)
            except GrammarError as exc:
                violations.append(Violation(NOT_IN_FULL, f"cannot expand grammar sugar: {exc}",
                                            None, None, "grammar"))

    # (2) every predicted rule must come from the full grammar
    rule_count = 0
    if predicted is not None:
        rule_count = count_rules(predicted)
        known = {_signature(p, full, None) for p in full.productions}
        for p in sorted(predicted.productions, key=lambda p: p.index):
            if _signature(p, full, predicted) not in known:
                violations.append(Violation(NOT_IN_FULL, f"{p.render()} is not a rule of the full grammar",
                                            p.line, 1, "grammar"))
        for t in predicted.terminals:
            for problem in _check_terminal(t, full):
                violations.append(Violation(NOT_IN_FULL, problem, t.line, 1, "grammar"))

    # (3) program under the predicted grammar
    licensed_regions: list[tuple[int, int]] = []
    predicted_lexemes: list[Lexeme] | None = None
    lexing_grammar: Grammar | None = None
    if predicted is not None and program is not None:
        lexing_grammar = _overlay(full, predicted)
        lexemes, lex_diags = _lex(lexing_grammar, program)
        if lex_diags:
            for d in lex_diags:
                violations.append(_diag_violation(NOT_LICENSED, d, "predicted"))
                licensed_regions.append((d.offset, d.offset + len(d.offending_text)))
        else:
            try:
                parse(lexing_grammar, lexemes, eof=_eof(program))
                predicted_lexemes = lexemes
            except ParseError as exc:
                violations.extend(_diag_violation(FAIL_PREDICTED, d, "predicted") for d in exc.diagnostics)

    # (4) program under the full grammar
    full_diags: list[ParseDiagnostic] = []
    if program is not None:
        lexemes, lex_diags = _lex(full, program)
        full_diags.extend(lex_diags)
        for d in lex_diags:
            if not _overlaps(d, licensed_regions):
                violations.append(_diag_violation(NOT_LICENSED, d, "full"))
        try:
            parse(full, lexemes, eof=_eof(program))
        except ParseError as exc:
            full_diags.extend(exc.diagnostics)
            violations.extend(_diag_violation(FAIL_FULL, d, "full") for d in exc.diagnostics)

    # (5) predicted rules the program never exercises
    if predicted_lexemes is not None:
        violations.extend(_unused(lexing_grammar, predicted, predicted_lexemes))

    return ConformanceReport(
        violations=tuple(violations),
        predicted_rule_count=rule_count,
        program_loc=program_loc(program) if program is not None else 0,
        loc_to_fix_proxy=len(error_lines(full_diags)),
    )


def _unused(lexing: Grammar, predicted: Grammar, lexemes: Sequence[Lexeme]) -> list[Violation]:
    used = used_in_any_derivation(lexing, lexemes)
    out = []
    live_terms: set[str] = set()
    for p in sorted(predicted.productions, key=lambda p: p.index):
        if p in used:
            live_terms.update(lexing.terminal_name(s) for s in p.symbols() if s.kind != "nt")
        else:
            out.append(Violation(UNUSED, f"{p.render()} is not used by the program", p.line, 1, "grammar"))
    referenced = {lexing.terminal_name(s) for p in predicted.productions for s in p.symbols() if s.kind != "nt"}
    seen_text: dict[str, set[str]] = {}
    for lex in lexemes:
        seen_text.setdefault(lex.terminal, set()).add(lex.text)
    for t in sorted(predicted.terminals, key=lambda t: t.index):
        if t.name not in referenced:
            out.append(Violation(UNUSED, f"{t.render()} is not referenced by any rule", t.line, 1, "grammar"))
        elif t.name in live_terms and t.literals is not None:
            for lit in t.literals:
                if lit not in seen_text.get(t.name, ()):
                    out.append(Violation(UNUSED, f"{t.name} ::= {quote(lit)} is not used by the program",
                                         t.line, 1, "grammar"))
    return out


def check_text(full: Grammar, raw: str, require_grammar: bool = True) -> ConformanceReport:
    return check(full, extract_sections(raw, expect_grammar=require_grammar), require_grammar)


# ---------------------------------------------------------------------------
# optional external validator (e.g. the real compiler)

_LINE_REF = re.compile(r":(\d+)(?::\d+)?:|\bline (\d+)", re.I)


def run_external_validator(command: str, program_path: str, timeout: float = 120.0) -> ExternalResult:
    """Run ``command`` with the program path appended (or substituted for ``{}``)."""
    argv = shlex.split(command)
    argv = [a.replace("{}", program_path) for a in argv] if any("{}" in a for a in argv) else argv + [program_path]
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    output = proc.stdout + proc.stderr
    lines = set()
    for m in _LINE_REF.finditer(output):
        lines.add(int(m.group(1) or m.group(2)))
    return ExternalResult(command, proc.returncode, output, tuple(sorted(lines)))


def with_external(report: ConformanceReport, result: ExternalResult) -> ConformanceReport:
    """The external verdict overrides the proxy: 0 on success, else its distinct lines (at least 1)."""
    proxy = 0 if result.status == 0 else max(len(result.lines), 1)
    return replace(report, loc_to_fix_proxy=proxy, external=result)

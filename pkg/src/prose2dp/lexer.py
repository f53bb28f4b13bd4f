"""Grammar-blind maximal-munch tokenizer."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .grammar import Grammar, literal_terminal_name


@dataclass(frozen=True)
class Lexeme:
    terminal: str
    text: str
    line: int
    col: int
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end


@dataclass(frozen=True)
class ParseDiagnostic:
    kind: str  # "lex-error" | "parse-error"
    line: int
    col: int
    offending_text: str
    expected: tuple[str, ...] = ()
    offset: int = field(default=0, compare=False)

    @property
    def position(self) -> tuple[int, int]:
        return self.line, self.col

    def message(self) -> str:
        if self.kind == "lex-error":
            return f"{self.line}:{self.col}: cannot tokenize {self.offending_text!r}"
        what = repr(self.offending_text) if self.offending_text else "end of input"
        exp = ", ".join(self.expected) if self.expected else "nothing"
        return f"{self.line}:{self.col}: unexpected {what}; expected one of: {exp}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "line": self.line,
            "col": self.col,
            "offending_text": self.offending_text,
            "expected": list(self.expected),
        }


class SyntaxFailure(Exception):
    """Raised with the diagnostics of a failed tokenize/parse."""

    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = sorted(diagnostics, key=lambda d: (d.offset, d.kind))
        super().__init__("; ".join(d.message() for d in self.diagnostics))


class LexError(SyntaxFailure):
    def __init__(self, diagnostics: list[ParseDiagnostic], lexemes: list[Lexeme]):
        super().__init__(diagnostics)
        self.lexemes = lexemes


def _is_word(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


class _LineIndex:
    def __init__(self, source: str):
        self.starts = [0] + [m.end() for m in re.finditer("\n", source)]

    def position(self, offset: int) -> tuple[int, int]:
        lo, hi = 0, len(self.starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self.starts[lo] + 1


def line_col(source: str, offset: int) -> tuple[int, int]:
    return _LineIndex(source).position(offset)


@dataclass(frozen=True)
class _Candidate:
    terminal: str
    literal: str | None
    regex: re.Pattern | None
    priority: tuple[int, int]  # (0 literal / 1 pattern, declaration index)


class Tokenizer:
    """Tokenizer tables for one grammar.

    Longest match wins; ties prefer literals over patterns, then the lower
    declaration index.  A word-character lexeme may not directly follow another
    word-character lexeme (``0x7F`` is ``0`` plus an unlexable ``x7F``).
    """

    def __init__(self, g: Grammar):
        cands: list[_Candidate] = []
        for t in g.terminals:
            if t.literals is not None:
                cands += [_Candidate(t.name, lit, None, (0, t.index)) for lit in t.literals]
            else:
                cands.append(_Candidate(t.name, None, t.regex, (1, t.index)))
        for text, index in g.inline_literals.items():
            cands.append(_Candidate(literal_terminal_name(text), text, None, (0, index)))
        self.candidates = sorted(cands, key=lambda c: c.priority)
        self.skips = [re.compile(s) for s in g.skip_rules]

    def _skip(self, source: str, pos: int) -> int:
        for rx in self.skips:
            m = rx.match(source, pos)
            if m and m.end() > pos:
                return m.end()
        return pos

    def _best(self, source: str, pos: int) -> tuple[str, int] | None:
        best = None
        for c in self.candidates:
            if c.literal is not None:
                end = pos + len(c.literal) if source.startswith(c.literal, pos) else -1
            else:
                m = c.regex.match(source, pos)
                end = m.end() if m else -1
            if end > pos and (best is None or end > best[1]):
                best = (c.terminal, end)
        return best

    def _ok(self, source: str, pos: int, glued: bool) -> tuple[str, int] | None:
        m = self._best(source, pos)
        if m is None or (glued and _is_word(source[pos])):
            return None
        return m

    def tokenize(self, source: str) -> list[Lexeme]:
        lines = _LineIndex(source)
        lexemes: list[Lexeme] = []
        diags: list[ParseDiagnostic] = []
        pos, n = 0, len(source)
        glued = False  # previous region ended in a word character, no skip since
        while pos < n:
            nxt = self._skip(source, pos)
            if nxt > pos:
                pos, glued = nxt, False
                continue
            m = self._ok(source, pos, glued)
            if m is not None:
                terminal, end = m
                line, col = lines.position(pos)
                lexemes.append(Lexeme(terminal, source[pos:end], line, col, pos, end))
                glued = _is_word(source[end - 1])
                pos = end
                continue
            start = pos
            pos += 1
            while pos < n and self._skip(source, pos) == pos and \
                    self._ok(source, pos, _is_word(source[pos - 1])) is None:
                pos += 1
            line, col = lines.position(start)
            diags.append(ParseDiagnostic("lex-error", line, col, source[start:pos], offset=start))
            glued = _is_word(source[pos - 1])
        if diags:
            raise LexError(diags, lexemes)
        return lexemes


def tokenize(g: Grammar, source: str) -> list[Lexeme]:
    """Tokenize ``source``; raises :class:`LexError` listing every unlexable region."""
    return _cached(g).tokenize(source)


def _cached(g: Grammar) -> Tokenizer:
    # one tokenizer per grammar object; equality ignores declaration order
    tok = g.__dict__.get("_tokenizer")
    if tok is None:
        tok = Tokenizer(g)
        g.__dict__["_tokenizer"] = tok
    return tok

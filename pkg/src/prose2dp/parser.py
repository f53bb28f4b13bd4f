"""Earley recognition, designated-derivation extraction and parse diagnostics.

The designated derivation of an ambiguous input is the one whose preorder
sequence of production declaration indices is lexicographically smallest,
among derivations that never nest a node inside another node with the same
nonterminal and span.  In words: at every choice point the lowest-index
production that still leads to a complete parse wins.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .grammar import Grammar, Production, desugar
from .lexer import LexError, Lexeme, ParseDiagnostic, SyntaxFailure, line_col, tokenize


class ParseError(SyntaxFailure):
    pass


@dataclass(frozen=True)
class ParseTree:
    production: Production
    children: tuple[Union["ParseTree", Lexeme], ...]

    def leaves(self) -> list[Lexeme]:
        out: list[Lexeme] = []
        stack: list = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Lexeme):
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def nodes(self) -> Iterator["ParseTree"]:
        stack: list = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, ParseTree):
                yield node
                stack.extend(reversed(node.children))

    def productions(self) -> list[Production]:
        """Productions applied, preorder, first occurrence only."""
        seen: dict[Production, None] = {}
        for node in self.nodes():
            seen.setdefault(node.production)
        return list(seen)

    def pretty(self, indent: str = "  ") -> str:
        lines: list[str] = []

        def walk(node, depth):
            if isinstance(node, Lexeme):
                lines.append(f"{indent * depth}{node.terminal} {node.text!r}")
            else:
                lines.append(f"{indent * depth}{node.production.render()}")
                for child in node.children:
                    walk(child, depth + 1)

        walk(self, 0)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# compiled grammar


class _Compiled:
    def __init__(self, g: Grammar):
        if g.has_sugar:
            raise ValueError("parser needs a desugared grammar")
        self.grammar = g
        self.prods = sorted(g.productions, key=lambda p: p.index)
        # rhs entries: (is_terminal, name)
        self.rhs = [tuple((s.is_terminal, g.terminal_name(s) if s.is_terminal else s.name)
                          for s in p.rhs) for p in self.prods]
        self.lhs = [p.lhs for p in self.prods]
        self.by_lhs: dict[str, list[int]] = {}
        for pid, p in enumerate(self.prods):
            self.by_lhs.setdefault(p.lhs, []).append(pid)
        self.nullable = self._nullable()
        self.start = g.start

    def _nullable(self) -> set[str]:
        nullable: set[str] = set()
        changed = True
        while changed:
            changed = False
            for pid, rhs in enumerate(self.rhs):
                lhs = self.lhs[pid]
                if lhs not in nullable and all(not t and n in nullable for t, n in rhs):
                    nullable.add(lhs)
                    changed = True
        return nullable


def _compiled(g: Grammar) -> _Compiled:
    c = g.__dict__.get("_earley")
    if c is None:
        c = _Compiled(g)
        g.__dict__["_earley"] = c
    return c


class _ItemSet:
    __slots__ = ("items", "waiting", "complete")

    def __init__(self):
        self.items: set[tuple[int, int, int]] = set()
        self.waiting: dict[str, list[tuple[int, int, int]]] = {}
        # (lhs, origin) pairs completed in this set
        self.complete: set[tuple[str, int]] = set()


class Chart:
    """Immutable Earley chart prefix; :meth:`feed` returns the extended chart."""

    def __init__(self, compiled: _Compiled, sets: tuple[_ItemSet, ...]):
        self._c = compiled
        self.sets = sets

    @classmethod
    def initial(cls, g: Grammar) -> "Chart":
        c = _compiled(g)
        s = _ItemSet()
        _close(c, (), s, [(pid, 0, 0) for pid in c.by_lhs.get(c.start, [])], 0)
        return cls(c, (s,))

    def feed(self, terminal: str) -> "Chart":
        j = len(self.sets)
        s = _ItemSet()
        seeds = [(pid, dot + 1, origin) for pid, dot, origin in self.sets[-1].waiting.get(terminal, [])
                 if self._c.rhs[pid][dot][0]]
        _close(self._c, self.sets, s, seeds, j)
        return Chart(self._c, self.sets + (s,))

    @property
    def dead(self) -> bool:
        return not self.sets[-1].items

    def accepts(self) -> bool:
        return (self._c.start, 0) in self.sets[-1].complete

    def expected(self) -> tuple[str, ...]:
        last = self.sets[-1]
        names = {name for name, items in last.waiting.items()
                 if any(self._c.rhs[pid][dot][0] for pid, dot, _ in items)}
        return tuple(sorted(names))


def _close(c: _Compiled, prior: tuple[_ItemSet, ...], s: _ItemSet,
           seeds: list[tuple[int, int, int]], j: int) -> None:
    agenda: list[tuple[int, int, int]] = []

    def add(item):
        if item not in s.items:
            s.items.add(item)
            agenda.append(item)

    for item in seeds:
        add(item)
    while agenda:
        pid, dot, origin = agenda.pop()
        rhs = c.rhs[pid]
        if dot == len(rhs):
            lhs = c.lhs[pid]
            s.complete.add((lhs, origin))
            source = s if origin == j else prior[origin]
            for w in list(source.waiting.get(lhs, ())):
                if not c.rhs[w[0]][w[1]][0]:
                    add((w[0], w[1] + 1, w[2]))
            continue
        is_term, name = rhs[dot]
        s.waiting.setdefault(name, []).append((pid, dot, origin))
        if is_term:
            continue
        for q in c.by_lhs.get(name, ()):
            add((q, 0, j))
        if name in c.nullable:
            add((pid, dot + 1, origin))


# ---------------------------------------------------------------------------
# tree extraction


class _Forest:
    """Derivable-span index over a finished chart."""

    def __init__(self, c: _Compiled, chart: Chart, lexemes: Sequence[Lexeme]):
        self.c = c
        self.lexemes = lexemes
        self.ends: dict[tuple[str, int], list[int]] = {}
        for j, s in enumerate(chart.sets):
            for lhs, origin in s.complete:
                if origin < j:
                    self.ends.setdefault((lhs, origin), []).append(j)
        for v in self.ends.values():
            v.sort()

    def spans(self, is_term: bool, name: str, k: int, j: int) -> list[int]:
        """Possible end positions (<= j) for a symbol starting at k."""
        if is_term:
            return [k + 1] if k < j and self.lexemes[k].terminal == name else []
        out = [e for e in self.ends.get((name, k), ()) if e <= j]
        if name in self.c.nullable:
            out.insert(0, k)
        return out


class _Designated:
    def __init__(self, forest: _Forest):
        self.f = forest
        self.c = forest.c
        self.node_memo: dict = {}
        self.seq_memo: dict = {}

    def node(self, name: str, i: int, j: int, chain: frozenset):
        """Best (sequence, tree) for nonterminal ``name`` over [i, j] or None."""
        key = (name, i, j, chain)
        if key in self.node_memo:
            return self.node_memo[key]
        self.node_memo[key] = None
        result = None
        if name not in chain:
            inner = chain | {name}
            for pid in self.c.by_lhs.get(name, ()):
                rest = self.seq(pid, 0, i, i, j, inner)
                if rest is not None:
                    seq, children = rest
                    result = ((self.c.prods[pid].index,) + seq,
                              ParseTree(self.c.prods[pid], children))
                    break
        self.node_memo[key] = result
        return result

    def seq(self, pid: int, m: int, k: int, i: int, j: int, chain: frozenset):
        """Best completion of rhs[m:] over [k, j]; the parent spans [i, j]."""
        rhs = self.c.rhs[pid]
        if m == len(rhs):
            return ((), ()) if k == j else None
        key = (pid, m, k, i, j, chain)
        if key in self.seq_memo:
            return self.seq_memo[key]
        self.seq_memo[key] = None
        is_term, name = rhs[m]
        last = m == len(rhs) - 1
        best = None
        for e in self.f.spans(is_term, name, k, j):
            if last and e != j:
                continue
            rest = self.seq(pid, m + 1, e, i, j, chain)
            if rest is None:
                continue
            if is_term:
                head = ((), self.f.lexemes[k])
            else:
                sub = self.node(name, k, e, chain if (k, e) == (i, j) else frozenset())
                if sub is None:
                    continue
                head = sub
            cand = (head[0] + rest[0], (head[1],) + rest[1])
            if best is None or cand[0] < best[0]:
                best = cand
        self.seq_memo[key] = best
        return best


def _deep(fn, *args):
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20000))
    try:
        return fn(*args)
    finally:
        sys.setrecursionlimit(limit)


def _run(g: Grammar, lexemes: Sequence[Lexeme], eof: tuple[int, int, int] | None):
    c = _compiled(g)
    chart = Chart.initial(g)
    for lex in lexemes:
        nxt = chart.feed(lex.terminal)
        if nxt.dead:
            raise ParseError([ParseDiagnostic("parse-error", lex.line, lex.col, lex.text,
                                              chart.expected(), offset=lex.start)])
        chart = nxt
    if not chart.accepts():
        if eof is None:
            if lexemes:
                last = lexemes[-1]
                eof = (last.line, last.col + len(last.text), last.end)
            else:
                eof = (1, 1, 0)
        line, col, offset = eof
        raise ParseError([ParseDiagnostic("parse-error", line, col, "", chart.expected(), offset=offset)])
    return c, chart


def parse(g: Grammar, lexemes: Sequence[Lexeme], eof: tuple[int, int, int] | None = None) -> ParseTree:
    """Parse a lexeme sequence; returns the designated tree or raises :class:`ParseError`.

    ``eof`` is the (line, col, offset) reported for end-of-input failures.
    """
    c, chart = _run(g, lexemes, eof)
    d = _Designated(_Forest(c, chart, lexemes))
    result = _deep(d.node, c.start, 0, len(lexemes), frozenset())
    assert result is not None, "accepted input without a cycle-free derivation"
    return result[1]


def recognize(g: Grammar, terminals: Iterable[str]) -> bool:
    chart = Chart.initial(g)
    for t in terminals:
        chart = chart.feed(t)
        if chart.dead:
            return False
    return chart.accepts()


def used_in_any_derivation(g: Grammar, lexemes: Sequence[Lexeme]) -> set[Production]:
    """Productions that occur in at least one complete derivation of ``lexemes``."""
    c, chart = _run(g, lexemes, None)
    f = _Forest(c, chart, lexemes)
    feasible: dict = {}

    def can(pid, m, k, j):
        rhs = c.rhs[pid]
        if m == len(rhs):
            return k == j
        key = (pid, m, k, j)
        if key not in feasible:
            feasible[key] = False
            feasible[key] = any(can(pid, m + 1, e, j) for e in f.spans(*rhs[m], k, j))
        return feasible[key]

    used: set[int] = set()
    seen: set = set()
    stack = [(c.start, 0, len(lexemes))]

    def visit():
        while stack:
            name, i, j = stack.pop()
            if (name, i, j) in seen:
                continue
            seen.add((name, i, j))
            for pid in c.by_lhs.get(name, ()):
                if not can(pid, 0, i, j):
                    continue
                used.add(pid)
                # walk every feasible split
                frontier = [(0, i)]
                walked = set()
                while frontier:
                    m, k = frontier.pop()
                    if (m, k) in walked or m == len(c.rhs[pid]):
                        continue
                    walked.add((m, k))
                    is_term, sym = c.rhs[pid][m]
                    for e in f.spans(is_term, sym, k, j):
                        if can(pid, m + 1, e, j):
                            if not is_term:
                                stack.append((sym, k, e))
                            frontier.append((m + 1, e))

    visit()
    return {c.prods[pid] for pid in used}


# ---------------------------------------------------------------------------
# source-level helpers


def parse_source(g: Grammar, source: str) -> ParseTree:
    """Tokenize then parse; raises :class:`SyntaxFailure` with merged, sorted diagnostics.

    Parsing still runs over the lexemes that were recognised when tokenizing
    fails, so a single call reports problems from both phases.
    """
    g = desugar(g)
    lex_diags: list[ParseDiagnostic] = []
    try:
        lexemes = tokenize(g, source)
    except LexError as exc:
        lexemes, lex_diags = exc.lexemes, exc.diagnostics
    line, col = line_col(source, len(source))
    try:
        tree = parse(g, lexemes, eof=(line, col, len(source)))
    except ParseError as exc:
        raise SyntaxFailure(lex_diags + exc.diagnostics) from None
    if lex_diags:
        raise SyntaxFailure(lex_diags)
    return tree


def error_lines(diags: Iterable[ParseDiagnostic]) -> list[int]:
    """Sorted distinct source lines carrying at least one diagnostic."""
    return sorted({d.line for d in diags})

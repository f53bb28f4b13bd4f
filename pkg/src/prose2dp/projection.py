"""Specialized grammar subsets: the rules one derivation actually uses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .grammar import Grammar, GrammarError, Production, TerminalDef, render_bnf, with_productions
from .lexer import LexError, SyntaxFailure, tokenize
from .parser import ParseTree, parse_source


class ProjectionError(GrammarError):
    pass


@dataclass(frozen=True)
class GrammarSubset:
    """Productions of ``parent`` plus pattern terminals narrowed to literal sets."""

    parent: Grammar
    productions: tuple[Production, ...]
    terminal_specializations: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @property
    def specializations(self) -> dict[str, tuple[str, ...]]:
        return dict(self.terminal_specializations)

    def to_grammar(self, name: str | None = None) -> Grammar:
        """Materialize as a standalone grammar; keeps parent declaration indices."""
        used = set()
        for p in self.productions:
            for s in p.symbols():
                if s.kind == "term":
                    used.add(s.name)
        specs = self.specializations
        terminals: list[TerminalDef] = []
        for t in self.parent.terminals:
            if t.name not in used:
                continue
            if t.name in specs:
                terminals.append(TerminalDef(t.name, literals=specs[t.name], index=t.index, line=t.line))
            else:
                terminals.append(t)
        return with_productions(self.parent, self.productions, terminals,
                                name=name or f"{self.parent.name}/subset")

    def render(self) -> str:
        return render_bnf(self.to_grammar())

    def without(self, production: Production) -> "GrammarSubset":
        return GrammarSubset(self.parent, tuple(p for p in self.productions if p != production),
                             self.terminal_specializations)

    def check(self) -> list[str]:
        """Invariant violations (empty when the subset is well-formed)."""
        problems = []
        parent_set = set(self.parent.productions)
        for p in self.productions:
            if p not in parent_set:
                problems.append(f"production not in parent: {p.render()}")
        for name, literals in self.terminal_specializations:
            tdef = self.parent.terminal_map.get(name)
            if tdef is None or not tdef.is_pattern:
                problems.append(f"{name} is not a pattern terminal of the parent")
                continue
            for lit in literals:
                try:
                    lexed = tokenize(self.parent, lit)
                except LexError:
                    lexed = []
                if len(lexed) != 1 or lexed[0].terminal != name:
                    problems.append(f"{lit!r} does not lex as {name}")
        return problems


def _subset(parent: Grammar, productions: Iterable[Production],
            specs: Mapping[str, Sequence[str]]) -> GrammarSubset:
    prods = sorted(set(productions), key=lambda p: p.index)
    order = {t.name: t.index for t in parent.terminals}
    spec_items = tuple(sorted(((k, tuple(v)) for k, v in specs.items()), key=lambda kv: order[kv[0]]))
    return GrammarSubset(parent, tuple(prods), spec_items)


def project(g: Grammar, tree: ParseTree) -> GrammarSubset:
    """Rules applied in ``tree`` plus per-terminal literal sets for pattern terminals."""
    by_key = {p: p for p in g.productions}
    used = []
    for p in tree.productions():
        parent_p = by_key.get(p)
        if parent_p is None:
            raise ProjectionError(f"tree uses a production absent from the grammar: {p.render()}")
        used.append(parent_p)
    specs: dict[str, list[str]] = {}
    for leaf in tree.leaves():
        tdef = g.terminal_map.get(leaf.terminal)
        if tdef is not None and tdef.is_pattern:
            texts = specs.setdefault(leaf.terminal, [])
            if leaf.text not in texts:
                texts.append(leaf.text)
    return _subset(g, used, specs)


def project_source(g: Grammar, source: str) -> GrammarSubset:
    return project(g, parse_source(g, source))


def is_sound(sub: GrammarSubset, source: str) -> bool:
    """True iff ``source`` parses under the subset as a standalone grammar."""
    try:
        parse_source(sub.to_grammar(), source)
    except SyntaxFailure:
        return False
    return True


def merge(subs: Sequence[GrammarSubset]) -> GrammarSubset:
    """Union of productions and of literal sets (first-occurrence order)."""
    if not subs:
        raise ProjectionError("nothing to merge")
    parent = subs[0].parent
    if any(s.parent != parent for s in subs[1:]):
        raise ProjectionError("cannot merge subsets of different parent grammars")
    prods: list[Production] = []
    specs: dict[str, list[str]] = {}
    for sub in subs:
        prods.extend(sub.productions)
        for name, literals in sub.terminal_specializations:
            acc = specs.setdefault(name, [])
            acc.extend(x for x in literals if x not in acc)
    return _subset(parent, prods, specs)

"""Grammar model: data types, the ``.gram`` dialect, desugaring and BNF rendering.

The dialect::

    // comment
    %start prog                      (optional; defaults to the first rule)
    %skip /\\s+/                      (optional; replaces the default skip set)
    prog ::= decls
    decls ::= decl decls | decl
    cid ::= ID "." cid | ID
    ID ::= /[A-Za-z_][A-Za-z0-9_]*/
    GLOBAL ::= "global"
    opt ::= A? (B | C)* D+ | ε

Lowercase names are nonterminals, uppercase names are terminals.  A terminal
line holds either one ``/pattern/`` or a set of quoted literals.  A line that
starts with ``|`` continues the alternatives of the previous rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

EPSILON = "ε"
DEFAULT_SKIP = (r"\s+", r"//[^\n]*", r"/\*[\s\S]*?\*/")


class GrammarError(ValueError):
    """Base class for grammar definition problems."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.reason = message
        self.line = line
        self.col = col


class UndefinedSymbolError(GrammarError):
    def __init__(self, names: Sequence[str]):
        super().__init__("undefined symbol(s): " + ", ".join(names))
        self.names = tuple(names)


class DuplicateDefinitionError(GrammarError):
    def __init__(self, names: Sequence[str]):
        super().__init__("duplicate definition(s): " + ", ".join(names))
        self.names = tuple(names)


# ---------------------------------------------------------------------------
# symbols and sugar


@dataclass(frozen=True)
class Sym:
    """A symbol reference: ``nt`` (nonterminal), ``term`` (named terminal) or ``lit`` (inline literal)."""

    kind: str
    name: str

    @property
    def is_terminal(self) -> bool:
        return self.kind != "nt"

    def render(self) -> str:
        return quote(self.name) if self.kind == "lit" else self.name


@dataclass(frozen=True)
class Repeat:
    item: "Item"
    op: str  # one of "?", "*", "+"

    def render(self) -> str:
        return self.item.render() + self.op


@dataclass(frozen=True)
class Group:
    alternatives: tuple[tuple["Item", ...], ...]

    def render(self) -> str:
        return "(" + " | ".join(_render_seq(alt) for alt in self.alternatives) + ")"


Item = Union[Sym, Repeat, Group]


def _render_seq(items: Sequence[Item]) -> str:
    return " ".join(item.render() for item in items) if items else EPSILON


def NT(name: str) -> Sym:
    return Sym("nt", name)


def T(name: str) -> Sym:
    return Sym("term", name)


def L(text: str) -> Sym:
    return Sym("lit", text)


def quote(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    return '"' + out.replace("\n", "\\n").replace("\t", "\\t") + '"'


def literal_terminal_name(text: str) -> str:
    """Name under which an inline literal appears in lexemes and expected sets."""
    return quote(text)


# ---------------------------------------------------------------------------
# core types


@dataclass(frozen=True)
class TerminalDef:
    name: str
    literals: tuple[str, ...] | None = None
    pattern: str | None = None
    index: int = field(default=0, compare=False)
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if (self.literals is None) == (self.pattern is None):
            raise GrammarError(f"terminal {self.name} needs exactly one of literals or pattern")
        if self.literals is not None:
            if not self.literals:
                raise GrammarError(f"terminal {self.name} has an empty literal set")
            if len(set(self.literals)) != len(self.literals):
                raise DuplicateDefinitionError([f"{self.name} literal {quote(x)}" for x in _dupes(self.literals)])
            if any(x == "" for x in self.literals):
                raise GrammarError(f"terminal {self.name} has an empty literal")

    @property
    def is_pattern(self) -> bool:
        return self.pattern is not None

    @cached_property
    def regex(self) -> re.Pattern:
        return re.compile(self.pattern)

    def alternatives(self) -> list[str]:
        if self.pattern is not None:
            return ["/" + self.pattern.replace("/", "\\/") + "/"]
        return [quote(x) for x in self.literals]

    def render(self) -> str:
        return f"{self.name} ::= " + " | ".join(self.alternatives())


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Item, ...]
    index: int = field(default=0, compare=False)
    line: int | None = field(default=None, compare=False)

    @property
    def has_sugar(self) -> bool:
        return any(not isinstance(item, Sym) for item in self.rhs)

    def symbols(self) -> Iterator[Sym]:
        yield from _walk_syms(self.rhs)

    def render_rhs(self) -> str:
        return _render_seq(self.rhs)

    def render(self) -> str:
        return f"{self.lhs} ::= {self.render_rhs()}"

    def __str__(self) -> str:
        return self.render()


def _walk_syms(items: Iterable[Item]) -> Iterator[Sym]:
    for item in items:
        if isinstance(item, Sym):
            yield item
        elif isinstance(item, Repeat):
            yield from _walk_syms([item.item])
        else:
            for alt in item.alternatives:
                yield from _walk_syms(alt)


def _dupes(values: Iterable) -> list:
    seen, out = set(), []
    for v in values:
        if v in seen and v not in out:
            out.append(v)
        seen.add(v)
    return out


@dataclass(frozen=True, eq=False)
class Grammar:
    """An immutable context-free grammar.

    Equality ignores the name and declaration indices: two grammars are equal
    when they share start symbol, skip rules, terminal definitions and, per
    nonterminal, the same ordered alternatives.
    """

    name: str
    start: str
    productions: tuple[Production, ...]
    terminals: tuple[TerminalDef, ...] = ()
    skip_rules: tuple[str, ...] = DEFAULT_SKIP

    def _key(self):
        per_lhs: dict[str, list] = {}
        for p in sorted(self.productions, key=lambda p: p.index):
            per_lhs.setdefault(p.lhs, []).append(p.rhs)
        return (
            self.start,
            tuple(self.skip_rules),
            frozenset(self.terminals),
            tuple(sorted((k, tuple(v)) for k, v in per_lhs.items())),
        )

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @cached_property
    def terminal_map(self) -> dict[str, TerminalDef]:
        return {t.name: t for t in self.terminals}

    @cached_property
    def by_lhs(self) -> dict[str, tuple[Production, ...]]:
        out: dict[str, list[Production]] = {}
        for p in sorted(self.productions, key=lambda p: p.index):
            out.setdefault(p.lhs, []).append(p)
        return {k: tuple(v) for k, v in out.items()}

    @property
    def nonterminals(self) -> list[str]:
        return list(self.by_lhs)

    @cached_property
    def has_sugar(self) -> bool:
        return any(p.has_sugar for p in self.productions)

    @cached_property
    def literal_aliases(self) -> dict[str, str]:
        """Inline literal text -> named single-literal terminal with the same text."""
        out: dict[str, str] = {}
        for t in sorted(self.terminals, key=lambda t: t.index):
            if t.literals is not None and len(t.literals) == 1:
                out.setdefault(t.literals[0], t.name)
        return out

    def terminal_name(self, sym: Sym) -> str:
        """Lexeme-level terminal name a terminal symbol resolves to."""
        if sym.kind == "lit":
            return self.literal_aliases.get(sym.name, literal_terminal_name(sym.name))
        return sym.name

    @cached_property
    def inline_literals(self) -> dict[str, int]:
        """Inline literals not aliased to a named terminal, with first-use index."""
        out: dict[str, int] = {}
        for p in sorted(self.productions, key=lambda p: p.index):
            for s in p.symbols():
                if s.kind == "lit" and s.name not in self.literal_aliases:
                    out.setdefault(s.name, p.index)
        return out

    def referenced_terminals(self) -> list[str]:
        seen: dict[str, None] = {}
        for p in self.productions:
            for s in p.symbols():
                if s.kind == "term":
                    seen.setdefault(s.name)
        return list(seen)


# ---------------------------------------------------------------------------
# dialect parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<assign>::=)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<pattern>/(?:[^/\\\n]|\\.)+/)
  | (?P<eps>ε)
  | (?P<op>[|?*+()])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _unquote(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), "\\" + m.group(1)), body[1:-1])


def _unpattern(body: str) -> str:
    return body[1:-1].replace("\\/", "/")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex_line(text: str, lineno: int, col0: int = 1) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", lineno, col0 + pos)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), lineno, col0 + pos))
        pos = m.end()
    return toks


class _RhsParser:
    """Recursive descent over one rule's right-hand side tokens."""

    def __init__(self, toks: list[_Tok], end: tuple[int, int]):
        self.toks = toks
        self.i = 0
        self.end = end

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, message: str):
        tok = self.peek()
        line, col = (tok.line, tok.col) if tok else self.end
        raise GrammarSyntaxError(message, line, col)

    def alternatives(self, closing: str | None = None) -> list[tuple[Item, ...]]:
        alts = [self.sequence()]
        while (tok := self.peek()) is not None and tok.text == "|":
            self.i += 1
            alts.append(self.sequence())
        tok = self.peek()
        if closing is None and tok is not None:
            self.error(f"unexpected {tok.text!r}")
        return alts

    def sequence(self) -> tuple[Item, ...]:
        items: list[Item] = []
        explicit_eps = False
        while (tok := self.peek()) is not None and tok.text not in ("|", ")"):
            if tok.kind == "eps":
                self.i += 1
                explicit_eps = True
                continue
            items.append(self.postfix())
        if explicit_eps and items:
            self.error("ε mixed with other symbols")
        return tuple(items)

    def postfix(self) -> Item:
        item = self.atom()
        while (tok := self.peek()) is not None and tok.text in ("?", "*", "+"):
            self.i += 1
            item = Repeat(item, tok.text)
        return item

    def atom(self) -> Item:
        tok = self.peek()
        self.i += 1
        if tok.kind == "name":
            return Sym("term" if tok.text[0].isupper() else "nt", tok.text)
        if tok.kind == "string":
            text = _unquote(tok.text)
            if not text:
                self.i -= 1
                self.error("empty literal")
            return L(text)
        if tok.text == "(":
            alts = self.alternatives(closing=")")
            if (close := self.peek()) is None or close.text != ")":
                self.error("missing ')'")
            self.i += 1
            return Group(tuple(alts))
        self.i -= 1
        self.error(f"unexpected {tok.text!r}")
        raise AssertionError  # unreachable


@dataclass
class _RawRule:
    name: str
    line: int
    col: int
    toks: list[_Tok]
    end: tuple[int, int]


def _split_rules(text: str, errors: list | None = None
                 ) -> tuple[list[_RawRule], list[tuple[str, list[_Tok]]]]:
    rules: list[_RawRule] = []
    directives: list[tuple[str, list[_Tok]]] = []

    def fail(exc: GrammarSyntaxError) -> None:
        if errors is None:
            raise exc
        errors.append(exc)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("//"):
            continue
        indent = len(raw) - len(raw.lstrip())
        try:
            if stripped.startswith("%"):
                word = stripped.split()[0]
                rest = raw[indent + len(word):]
                directives.append((word, _lex_line(rest, lineno, indent + len(word) + 1)))
                continue
            toks = _lex_line(raw, lineno)
        except GrammarSyntaxError as exc:
            fail(exc)
            continue
        if not toks:
            continue
        end = (lineno, len(raw) + 1)
        if toks[0].text == "|":
            if not rules:
                fail(GrammarSyntaxError("continuation line without a rule", lineno, toks[0].col))
                continue
            rules[-1].toks.extend(toks)
            rules[-1].end = end
            continue
        if len(toks) < 2 or toks[0].kind != "name" or toks[1].kind != "assign":
            fail(GrammarSyntaxError("expected 'name ::= ...'", lineno, toks[0].col))
            continue
        rules.append(_RawRule(toks[0].text, lineno, toks[0].col, toks[2:], end))
    return rules, directives


def _terminal_from_rule(rule: _RawRule, index: int) -> TerminalDef:
    literals: list[str] = []
    patterns: list[str] = []
    expect_item = True
    for tok in rule.toks:
        if expect_item:
            if tok.kind == "string":
                literals.append(_unquote(tok.text))
            elif tok.kind == "pattern":
                patterns.append(_unpattern(tok.text))
            else:
                raise GrammarSyntaxError(
                    f"terminal {rule.name} alternatives must be quoted literals or one /pattern/",
                    tok.line, tok.col)
            expect_item = False
        elif tok.text == "|":
            expect_item = True
        else:
            raise GrammarSyntaxError(f"expected '|' in terminal {rule.name}", tok.line, tok.col)
    if expect_item:
        raise GrammarSyntaxError(f"terminal {rule.name} has an empty alternative", *rule.end)
    if patterns and (literals or len(patterns) > 1):
        raise GrammarSyntaxError(f"terminal {rule.name} mixes patterns and literals", rule.line, rule.col)
    if patterns:
        try:
            re.compile(patterns[0])
        except re.error as exc:
            raise GrammarSyntaxError(f"bad pattern for {rule.name}: {exc}", rule.line, rule.col) from None
        return TerminalDef(rule.name, pattern=patterns[0], index=index, line=rule.line)
    if len(set(literals)) != len(literals):
        raise DuplicateDefinitionError([f"{rule.name} literal {quote(x)}" for x in _dupes(literals)])
    return TerminalDef(rule.name, literals=tuple(literals), index=index, line=rule.line)


@dataclass
class LenientParse:
    """Result of :func:`parse_grammar_lenient`: what parsed, plus per-line errors."""

    grammar: Grammar | None
    errors: list[GrammarSyntaxError]


def _build(text: str, name: str, lenient: bool) -> tuple[Grammar | None, list[GrammarSyntaxError]]:
    errors: list[GrammarSyntaxError] = []
    rules, directives = _split_rules(text, errors if lenient else None)

    start = None
    skip: list[str] = []
    for word, toks in directives:
        if word == "%start" and len(toks) == 1 and toks[0].kind == "name":
            start = toks[0].text
        elif word == "%skip" and len(toks) == 1 and toks[0].kind == "pattern":
            skip.append(_unpattern(toks[0].text))
        else:
            line = toks[0].line if toks else 0
            exc = GrammarSyntaxError(f"bad directive {word}", line, 1)
            if not lenient:
                raise exc
            errors.append(exc)

    productions: list[Production] = []
    terminals: list[TerminalDef] = []
    seen_terms: dict[str, TerminalDef] = {}
    seen_nts: set[str] = set()
    dup_names: list[str] = []
    index = 0
    for rule in rules:
        try:
            if rule.name[0].isupper():
                tdef = _terminal_from_rule(rule, index)
                if rule.name in seen_terms:
                    if not lenient:
                        dup_names.append(rule.name)
                        continue
                    # merge alternatives of a repeated terminal line
                    old = seen_terms[rule.name]
                    if old.literals is not None and tdef.literals is not None:
                        merged = old.literals + tuple(x for x in tdef.literals if x not in old.literals)
                        new = TerminalDef(old.name, literals=merged, index=old.index, line=old.line)
                        terminals[terminals.index(old)] = new
                        seen_terms[rule.name] = new
                        continue
                    raise GrammarSyntaxError(f"conflicting redefinition of {rule.name}", rule.line, rule.col)
                seen_terms[rule.name] = tdef
                terminals.append(tdef)
                index += 1
                continue
            if rule.name in seen_nts and not lenient:
                dup_names.append(rule.name)
                continue
            seen_nts.add(rule.name)
            alts = _RhsParser(rule.toks, rule.end).alternatives()
        except GrammarError as exc:
            if not lenient:
                raise
            if not isinstance(exc, GrammarSyntaxError):
                exc = GrammarSyntaxError(str(exc), rule.line, rule.col)
            errors.append(exc)
            continue
        for alt in alts:
            prod = Production(rule.name, alt, index=index, line=rule.line)
            if prod in productions:
                if not lenient:
                    dup_names.append(prod.render())
                    continue
                errors.append(GrammarSyntaxError(f"duplicate rule {prod.render()}", rule.line, rule.col))
                continue
            productions.append(prod)
            index += 1
    if dup_names:
        raise DuplicateDefinitionError(dup_names)
    if not productions:
        if lenient:
            return None, errors
        raise GrammarError("no productions")
    grammar = Grammar(
        name=name,
        start=start or productions[0].lhs,
        productions=tuple(productions),
        terminals=tuple(terminals),
        skip_rules=tuple(skip) if skip else DEFAULT_SKIP,
    )
    return grammar, errors


def parse_grammar(text: str, name: str = "grammar") -> Grammar:
    """Parse dialect source into a validated :class:`Grammar`.

    Raises :class:`GrammarSyntaxError`, :class:`UndefinedSymbolError` (listing
    every offender) or :class:`DuplicateDefinitionError`.
    """
    grammar, _ = _build(text, name, lenient=False)
    undefined = [d.symbol for d in validate_grammar(grammar) if d.code == "undefined"]
    if undefined:
        raise UndefinedSymbolError(undefined)
    return grammar


def parse_grammar_lenient(text: str, name: str = "predicted") -> LenientParse:
    """Line-by-line parse that keeps every rule it can and collects the rest as errors.

    Undefined symbols are allowed; repeated rules for one nonterminal are merged.
    """
    grammar, errors = _build(text, name, lenient=True)
    return LenientParse(grammar, errors)


# ---------------------------------------------------------------------------
# desugaring


class _Desugarer:
    def __init__(self, g: Grammar):
        self.used = set(g.by_lhs) | {t.name for t in g.terminals}

    def fresh(self, base: str) -> str:
        name, n = base, 2
        while name in self.used:
            name, n = f"{base}{n}", n + 1
        self.used.add(name)
        return name

    def seq(self, lhs: str, items: Sequence[Item], out: list[tuple[str, tuple[Sym, ...]]]) -> tuple[Sym, ...]:
        return tuple(self.item(lhs, item, out) for item in items)

    def item(self, lhs: str, item: Item, out: list[tuple[str, tuple[Sym, ...]]]) -> Sym:
        if isinstance(item, Sym):
            return item
        if isinstance(item, Group):
            name = self.fresh(f"{lhs}_grp")
            helpers: list[tuple[str, tuple[Sym, ...]]] = []
            alts = [self.seq(lhs, alt, helpers) for alt in item.alternatives]
            out.extend((name, alt) for alt in alts)
            out.extend(helpers)
            return NT(name)
        helpers = []
        inner = self.item(lhs, item.item, helpers)
        name = self.fresh(f"{lhs}_opt" if item.op == "?" else f"{lhs}_rep")
        me = NT(name)
        if item.op == "?":
            out += [(name, (inner,)), (name, ())]
        elif item.op == "*":
            out += [(name, (inner, me)), (name, ())]
        else:
            out += [(name, (inner, me)), (name, (inner,))]
        out.extend(helpers)
        return me


def desugar(g: Grammar) -> Grammar:
    """Rewrite ``?``/``*``/``+``/groups into plain BNF with deterministic helper rules.

    Helpers are named ``<rule>_opt``, ``<rule>_rep``, ``<rule>_grp`` (numbered on
    collision) and inserted right after the production that needed them.
    """
    if not g.has_sugar:
        return g
    d = _Desugarer(g)
    decls = sorted([*g.productions, *g.terminals], key=lambda x: x.index)
    productions: list[Production] = []
    terminals: list[TerminalDef] = []
    index = 0
    for decl in decls:
        if isinstance(decl, TerminalDef):
            terminals.append(TerminalDef(decl.name, decl.literals, decl.pattern, index, decl.line))
            index += 1
            continue
        helpers: list[tuple[str, tuple[Sym, ...]]] = []
        rhs = d.seq(decl.lhs, decl.rhs, helpers)
        for lhs, body in [(decl.lhs, rhs), *helpers]:
            prod = Production(lhs, body, index, decl.line)
            if prod not in productions:
                productions.append(prod)
                index += 1
    return Grammar(g.name, g.start, tuple(productions), tuple(terminals), g.skip_rules)


# ---------------------------------------------------------------------------
# rendering and counting


def _lines(g: Grammar) -> list[tuple[int, str, list[str]]]:
    lines: dict[str, tuple[int, list[str]]] = {}
    for p in sorted(g.productions, key=lambda p: p.index):
        first, alts = lines.setdefault(p.lhs, (p.index, []))
        alts.append(p.render_rhs())
    rows = [(first, lhs, alts) for lhs, (first, alts) in lines.items()]
    rows += [(t.index, t.name, t.alternatives()) for t in g.terminals]
    rows.sort(key=lambda r: r[0])
    return rows


def render_bnf(g: Grammar) -> str:
    """Render a desugared grammar as ``lhs ::= alt1 | alt2`` lines, one per lhs."""
    if g.has_sugar:
        raise GrammarError("render_bnf needs a desugared grammar")
    out = []
    if tuple(g.skip_rules) != DEFAULT_SKIP:
        out += ["%skip /" + s.replace("/", "\\/") + "/" for s in g.skip_rules]
    rows = _lines(g)
    if rows and rows[0][1] != g.start:
        out.append(f"%start {g.start}")
    out += [f"{lhs} ::= " + " | ".join(alts) for _, lhs, alts in rows]
    return "\n".join(out) + "\n" if out else ""


def count_rules(g: Grammar) -> int:
    """Number of alternatives over all lines; ``A ::= B | C`` counts as two."""
    if g.has_sugar:
        raise GrammarError("count_rules needs a desugared grammar")
    return len(g.productions) + sum(len(t.alternatives()) for t in g.terminals)


def count_rules_text(text: str) -> int:
    """Count ``|``-separated alternatives of every ``::=`` line in BNF text."""
    total = 0
    for line in text.splitlines():
        line = line.strip()
        if "::=" not in line or line.startswith("//"):
            continue
        toks = _lex_line(line.split("::=", 1)[1], 0)
        total += 1 + sum(tok.text == "|" for tok in toks)
    return total


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class GrammarDiagnostic:
    severity: str  # "error" | "warning"
    code: str  # "undefined" | "unreachable" | "unproductive"
    symbol: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


def _item_productive(item: Item, productive: set[str]) -> bool:
    if isinstance(item, Sym):
        return item.is_terminal or item.name in productive
    if isinstance(item, Repeat):
        return item.op != "+" or _item_productive(item.item, productive)
    return any(all(_item_productive(x, productive) for x in alt) for alt in item.alternatives)


def productive_nonterminals(g: Grammar) -> set[str]:
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in productive and all(_item_productive(x, productive) for x in p.rhs):
                productive.add(p.lhs)
                changed = True
    return productive


def reachable_symbols(g: Grammar) -> set[str]:
    seen = {g.start}
    stack = [g.start]
    while stack:
        for p in g.by_lhs.get(stack.pop(), ()):
            for s in p.symbols():
                if s.kind == "nt" and s.name not in seen:
                    seen.add(s.name)
                    stack.append(s.name)
    return seen


def validate_grammar(g: Grammar) -> list[GrammarDiagnostic]:
    """Classify undefined symbols (errors), unreachable and unproductive nonterminals (warnings)."""
    diags: list[GrammarDiagnostic] = []
    defined_nt = set(g.by_lhs)
    undefined: dict[str, None] = {}
    if g.start not in defined_nt:
        undefined.setdefault(g.start)
    for p in sorted(g.productions, key=lambda p: p.index):
        for s in p.symbols():
            if s.kind == "nt" and s.name not in defined_nt:
                undefined.setdefault(s.name)
            elif s.kind == "term" and s.name not in g.terminal_map:
                undefined.setdefault(s.name)
    for name in undefined:
        diags.append(GrammarDiagnostic("error", "undefined", name, f"undefined symbol {name}"))
    reachable = reachable_symbols(g)
    for name in g.by_lhs:
        if name not in reachable:
            diags.append(GrammarDiagnostic("warning", "unreachable", name,
                                           f"nonterminal {name} is unreachable from {g.start}"))
    productive = productive_nonterminals(g)
    for name in g.by_lhs:
        if name not in productive:
            diags.append(GrammarDiagnostic("warning", "unproductive", name,
                                           f"nonterminal {name} derives no terminal string"))
    return diags


def with_productions(g: Grammar, productions: Iterable[Production],
                     terminals: Iterable[TerminalDef] | None = None, name: str | None = None) -> Grammar:
    """Copy of ``g`` with replaced productions (and optionally terminals); no validation."""
    return Grammar(
        name or g.name,
        g.start,
        tuple(sorted(productions, key=lambda p: p.index)),
        tuple(g.terminals if terminals is None else terminals),
        g.skip_rules,
    )


def specialize_terminals(g: Grammar, specs: Mapping[str, Sequence[str]]) -> tuple[TerminalDef, ...]:
    out = []
    for t in g.terminals:
        if t.name in specs:
            out.append(TerminalDef(t.name, literals=tuple(specs[t.name]), index=t.index, line=t.line))
        else:
            out.append(t)
    return tuple(out)

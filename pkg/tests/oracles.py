"""Independent brute-force oracles used to check the parser and projection."""

from __future__ import annotations

import itertools
import random
from typing import Iterator

from prose2dp.grammar import Grammar, Group, Repeat, parse_grammar
from prose2dp.lexer import Lexeme

TERMINALS = ("TA", "TB", "TC", "TD")
LITERALS = {"TA": "a", "TB": "b", "TC": "c", "TD": "d"}
NONTERMINALS = ("s", "x", "y", "z")


def bounded_language(g: Grammar, n: int) -> set[tuple[str, ...]]:
    """Terminal-name strings of length <= n derivable from the start symbol (fixpoint)."""
    lang: dict[str, set[tuple[str, ...]]] = {a: set() for a in g.by_lhs}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            acc = {()}
            for sym in p.rhs:
                if sym.is_terminal:
                    opts = {(g.terminal_name(sym),)}
                else:
                    opts = lang.get(sym.name, set())
                acc = {a + b for a in acc for b in opts if len(a) + len(b) <= n}
                if not acc:
                    break
            new = acc - lang[p.lhs]
            if new:
                lang[p.lhs] |= new
                changed = True
    return lang.get(g.start, set())


def bounded_language_ebnf(g: Grammar, n: int) -> set[tuple[str, ...]]:
    """Like :func:`bounded_language` but reads ``? * +`` and groups directly, without desugaring."""
    lang: dict[str, set[tuple[str, ...]]] = {a: set() for a in g.by_lhs}

    def cat(a, b):
        return {x + y for x in a for y in b if len(x) + len(y) <= n}

    def seq(items):
        acc = {()}
        for item in items:
            acc = cat(acc, one(item))
            if not acc:
                break
        return acc

    def star(base):
        acc = {()}
        while True:
            new = acc | cat(acc, base)
            if new == acc:
                return acc
            acc = new

    def one(item):
        if isinstance(item, Repeat):
            base = one(item.item)
            if item.op == "?":
                return base | {()}
            return star(base) if item.op == "*" else cat(base, star(base))
        if isinstance(item, Group):
            return set().union(*(seq(alt) for alt in item.alternatives))
        if item.is_terminal:
            return {(g.terminal_name(item),)}
        return lang.get(item.name, set())

    changed = True
    while changed:
        changed = False
        for p in g.productions:
            new = seq(p.rhs) - lang[p.lhs]
            if new:
                lang[p.lhs] |= new
                changed = True
    return lang.get(g.start, set())


def random_ebnf_grammar(rng: random.Random, max_prods: int = 6, max_terms: int = 3) -> Grammar:
    """Random grammar whose alternatives use ``? * +`` and parenthesized groups."""
    nts = NONTERMINALS[:rng.randint(1, 3)]
    terms = TERMINALS[:rng.randint(1, max_terms)]

    def atom(depth):
        roll = rng.random()
        if roll < 0.2 and depth < 2:
            return "(" + " | ".join(alt(depth + 1) for _ in range(rng.randint(1, 2))) + ")"
        return rng.choice(nts + terms)

    def alt(depth=0):
        items = []
        for _ in range(rng.choice([1, 1, 2, 2, 3])):
            item = atom(depth)
            op = rng.choice(["", "", "", "?", "*", "+"])
            items.append(item + op)
        return " ".join(items)

    rules: dict[str, list[str]] = {}
    lhs_list = list(nts) + [rng.choice(nts) for _ in range(rng.randint(0, max_prods - len(nts)))]
    for lhs in lhs_list:
        a = alt()
        if a not in rules.setdefault(lhs, []):
            rules[lhs].append(a)
    lines = [f"{lhs} ::= " + " | ".join(alts) for lhs, alts in rules.items()]
    lines += [f'{t} ::= "{LITERALS[t]}"' for t in terms]
    return parse_grammar("\n".join(lines) + "\n", name="random_ebnf")


def lexemes(tokens) -> list[Lexeme]:
    """Fake one-character lexemes for a terminal-name sequence."""
    return [Lexeme(t, LITERALS.get(t, t), 1, k + 1, k, k + 1) for k, t in enumerate(tokens)]


def all_strings(alphabet, n: int) -> Iterator[tuple[str, ...]]:
    for k in range(n + 1):
        yield from itertools.product(alphabet, repeat=k)


def random_grammar(rng: random.Random, max_prods: int = 8, max_terms: int = 4) -> Grammar:
    """Small random BNF grammar over literal terminals; every nonterminal used is defined."""
    n_nt = rng.randint(1, 3)
    nts = NONTERMINALS[:n_nt]
    terms = TERMINALS[:rng.randint(1, max_terms)]
    n_prods = rng.randint(n_nt, max_prods)
    lhs_list = list(nts) + [rng.choice(nts) for _ in range(n_prods - n_nt)]
    rules: dict[str, list[str]] = {}
    for lhs in lhs_list:
        length = rng.choice([0, 1, 1, 2, 2, 2, 3, 3])
        rhs = [rng.choice(nts + terms) for _ in range(length)]
        alt = " ".join(rhs) if rhs else "ε"
        if alt not in rules.setdefault(lhs, []):
            rules[lhs].append(alt)
    lines = [f"{lhs} ::= " + " | ".join(alts) for lhs, alts in rules.items()]
    lines += [f'{t} ::= "{LITERALS[t]}"' for t in terms]
    return parse_grammar("\n".join(lines) + "\n", name="random")


def enumerate_trees(g: Grammar, tokens: tuple[str, ...], limit: int = 5000, max_repeat: int = 1,
                    max_steps: int = 200_000):
    """Every derivation of ``tokens`` in which no (A, i, j) node occurs more than
    ``max_repeat`` times on a root path.

    Yields (preorder production indices, used productions) pairs.  With
    ``max_repeat=2`` the union of used productions equals the union over all
    derivations, cyclic ones included: the root path to any node can be made
    repeat-free and the subtree below it too.
    """
    by_lhs = g.by_lhs
    count = 0
    steps = [0]

    def tick():
        steps[0] += 1
        if steps[0] > max_steps:
            raise RuntimeError("oracle step budget exhausted")

    def node(name, i, j, path):
        if path.count((name, i, j)) >= max_repeat:
            return
        inner = path + ((name, i, j),)
        for p in by_lhs.get(name, ()):
            for seq, used in rhs(p.rhs, 0, i, j, inner):
                tick()
                yield (p.index,) + seq, used | {p}

    def rhs(items, m, k, j, path):
        tick()
        if m == len(items):
            if k == j:
                yield (), frozenset()
            return
        sym = items[m]
        if sym.is_terminal:
            if k < j and tokens[k] == g.terminal_name(sym):
                yield from rhs(items, m + 1, k + 1, j, path)
            return
        for e in range(k, j + 1):
            for head, used in node(sym.name, k, e, path):
                for tail, used2 in rhs(items, m + 1, e, j, path):
                    yield head + tail, used | used2

    for item in node(g.start, 0, len(tokens), ()):
        count += 1
        if count > limit:
            raise RuntimeError("too many derivations for the oracle")
        yield item

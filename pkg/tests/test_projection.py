from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import ARRAY_PROGRAM
from oracles import bounded_language, enumerate_trees, lexemes, random_grammar
from prose2dp.grammar import count_rules, parse_grammar
from prose2dp.parser import parse
from prose2dp.projection import GrammarSubset, ProjectionError, is_sound, merge, project, project_source


def test_array_program_projects_to_reference_listing(full, array_subset_text):
    sub = project_source(full, ARRAY_PROGRAM)
    assert sub.render() == array_subset_text
    assert set(sub.render().splitlines()) == set(array_subset_text.splitlines())
    assert count_rules(sub.to_grammar()) == 24


def test_pattern_terminals_narrowed_in_first_occurrence_order(full):
    lines = project_source(full, ARRAY_PROGRAM).render().splitlines()
    assert 'ID ::= "Array" | "t" | "nat_to_port" | "create" | "NUM_PORTS"' in lines
    assert 'NUM ::= "32"' in lines
    assert "cid ::= ID \".\" cid | ID" in lines


def test_single_production_grammar_is_its_own_subset():
    g = parse_grammar('s ::= A B\nA ::= "a"\nB ::= "b"\n')
    sub = project_source(g, "a b")
    assert sub.productions == g.productions
    assert sub.to_grammar().terminals == g.terminals


def test_subset_is_sound_for_its_program(full):
    sub = project_source(full, ARRAY_PROGRAM)
    assert is_sound(sub, ARRAY_PROGRAM)
    assert sub.check() == []


def test_unlisted_identifier_is_rejected(full):
    sub = project_source(full, ARRAY_PROGRAM)
    assert not is_sound(sub, "global Array.t<<32>> foo = Array.create(NUM_PORTS);\n")


def test_removing_any_production_breaks_the_program(full):
    sub = project_source(full, ARRAY_PROGRAM)
    for p in sub.productions:
        assert not is_sound(sub.without(p), ARRAY_PROGRAM), p.render()


def test_merge_is_idempotent_and_unions_literals():
    g = parse_grammar("s ::= ID\nID ::= /[a-z]+/\n")
    a, b = project_source(g, "a"), project_source(g, "b")
    assert merge([a, a]) == a
    assert merge([a, b]).specializations == {"ID": ("a", "b")}
    with pytest.raises(ProjectionError):
        merge([])


def test_merge_rejects_foreign_parents():
    g1 = parse_grammar("s ::= ID\nID ::= /[a-z]+/\n")
    g2 = parse_grammar("s ::= ID ID\nID ::= /[a-z]+/\n")
    with pytest.raises(ProjectionError):
        merge([project_source(g1, "a"), project_source(g2, "a b")])


def test_merged_examples_parse_every_example(examples):
    assert len(examples) >= 20
    merged = merge([ex.subset for ex in examples])
    for ex in examples:
        assert is_sound(merged, ex.program), ex.id


def test_examples_are_sound_and_minimal(examples):
    for ex in examples:
        assert ex.is_sound(), ex.id
        assert ex.subset.check() == [], ex.id
        for p in ex.subset.productions:
            assert not is_sound(ex.subset.without(p), ex.program), (ex.id, p.render())


def test_subset_productions_come_from_parent(examples, full):
    parent = set(full.productions)
    for ex in examples:
        assert set(ex.subset.productions) <= parent


def test_tree_with_foreign_production_is_refused():
    g = parse_grammar('s ::= A\nA ::= "a"\n')
    other = parse_grammar('s ::= A A\nA ::= "a"\n')
    tree = parse(other, lexemes(["A", "A"]))
    with pytest.raises(ProjectionError):
        project(g, tree)


def test_check_flags_literal_that_does_not_lex():
    g = parse_grammar("s ::= ID\nID ::= /[a-z]+/\n")
    bad = GrammarSubset(g, g.productions, (("ID", ("ABC",)),))
    assert bad.check() == ["'ABC' does not lex as ID"]


def _designated_rules(g, tokens):
    best = min(seq for seq, _ in enumerate_trees(g, tokens, limit=20000))
    return {g.productions[i] for i in best}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_projection_equals_rules_of_designated_derivation(seed, pick):
    g = random_grammar(random.Random(seed), max_prods=6, max_terms=3)
    words = sorted(bounded_language(g, 4), key=lambda w: (len(w), w))
    if not words:
        return
    tokens = words[pick % len(words)]
    try:
        expected = _designated_rules(g, tokens)
    except RuntimeError:
        return
    sub = project(g, parse(g, lexemes(tokens)))
    assert set(sub.productions) == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_merge_accepts_both_languages(seed, i, j):
    g = random_grammar(random.Random(seed), max_prods=6, max_terms=3)
    words = sorted(bounded_language(g, 4), key=lambda w: (len(w), w))
    if not words:
        return
    a = project(g, parse(g, lexemes(words[i % len(words)])))
    b = project(g, parse(g, lexemes(words[j % len(words)])))
    m = merge([a, b]).to_grammar()
    lang_m = bounded_language(m, 4)
    assert bounded_language(a.to_grammar(), 4) <= lang_m
    assert bounded_language(b.to_grammar(), 4) <= lang_m


def test_only_pattern_terminals_are_specialized():
    g = parse_grammar('s ::= A ID\nA ::= "a"\nID ::= /[x-z]+/\n')
    sub = project_source(g, "a zz")
    assert sub.specializations == {"ID": ("zz",)}
    assert sub.render() == 's ::= A ID\nA ::= "a"\nID ::= "zz"\n'

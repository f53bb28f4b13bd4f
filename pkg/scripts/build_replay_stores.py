"""Regenerate the synthesized model responses and the committed transcript stores.

Responses are composed from the reference programs in ``corpus/programs``: the
predicted grammar is the projection of a repaired variant of each program (what
the model "meant"), padded with unused full-grammar rules up to a target rule
count, and the program is the unrepaired text.  Stores key each response by the
hash of the exact prompt ``eval`` builds for the task.

Run from the repository root:  python3 scripts/build_replay_stores.py
"""

from __future__ import annotations

import argparse
from pathlib import Path

from prose2dp.conformance import check_text
from prose2dp.config import DEFAULT_PROVIDER
from prose2dp.evaluation import EvalSettings, build_prompt, load_corpus
from prose2dp.gateway import Transcript, TranscriptStore
from prose2dp.grammar import count_rules, count_rules_text, desugar, parse_grammar
from prose2dp.projection import GrammarSubset, _subset, project_source
from prose2dp.prompting import TokenBudget, build_grammar_prompt, load_examples
from prose2dp.repair import feedback_message

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

# (substitutions that turn the answer into something the grammar accepts, target rule count, layout)
COMPLEX = {
    "firewall": ([("0x7F", "127"),
                  ("} else if (proto == 6) {\n        generate forward(dst);\n    }",
                   "} else {\n        if (proto == 6) {\n            generate forward(dst);\n        }\n    }")],
                 91, "fenced"),
    "nat": ([], 97, "plain"),
    "tunnel6to4": ([("0x2002", "8194"), ("0xFFFFFFFF", "4294967295"), ("0xC0586301", "3227018049"),
                    ("embedded_v4 & V4_MASK", "embedded_v4")], 74, "bold"),
}
# rules the model invents on top of the projection
EXTRA_RULES = {"tunnel6to4": [("exp ::= ", " | exp BITAND exp"), ("BITAND ::= ", None)]}


def pad(full, sub: GrammarSubset, target: int) -> GrammarSubset:
    """Add unused full-grammar productions (index order) until the rule count hits ``target``."""
    prods = list(sub.productions)
    specs = sub.specializations

    def count(ps):
        return count_rules(_subset(full, ps, specs).to_grammar())

    current = count(prods)
    for p in full.productions:
        if current == target:
            break
        if p in prods:
            continue
        defined = {q.lhs for q in prods}
        if any(s.kind == "nt" and s.name not in defined for s in p.symbols()):
            continue
        n = count(prods + [p])
        if n <= target:
            prods.append(p)
            current = n
    if current != target:
        raise SystemExit(f"cannot pad to {target} rules (reached {current})")
    return _subset(full, prods, specs)


def add_extra(text: str, extras) -> str:
    lines = text.splitlines()
    for prefix, suffix in extras:
        if suffix is None:
            lines.append(prefix + '"&"')
            continue
        lines = [line + suffix if line.startswith(prefix) else line for line in lines]
    return "\n".join(lines) + "\n"


def layout(kind: str, grammar: str, program: str) -> str:
    if kind == "fenced":
        return (f"BNF grammar rules:\n```\n{grammar}```\n\n"
                f"program based on the BNF grammar rules:\n```lucid\n{program}```\n")
    if kind == "bold":
        return (f"Here is the grammar subset for the tunnel.\n\n**BNF grammar rules:**\n\n{grammar}\n"
                f"**program based on the BNF grammar rules:**\n\n{program}")
    return f"BNF grammar rules:\n{grammar}\nprogram based on the BNF grammar rules:\n\n{program}"


def compose(full) -> dict[str, str]:
    out = {}
    for path in sorted((CORPUS / "programs").glob("*.dpt")):
        tid = path.stem
        program = path.read_text(encoding="utf-8")
        fixes, target, kind = COMPLEX.get(tid, ([], None, "plain"))
        meant = program
        for old, new in fixes:
            assert old in meant, (tid, old)
            meant = meant.replace(old, new)
        sub = project_source(full, meant)
        extra = EXTRA_RULES.get(tid, [])
        if target is not None:
            sub = pad(full, sub, target - len(extra))
        grammar = add_extra(sub.render(), extra) if extra else sub.render()
        if target is not None:
            assert count_rules_text(grammar) == target, (tid, count_rules_text(grammar))
        out[tid] = layout(kind, grammar, program)
    return out


def settings() -> EvalSettings:
    return EvalSettings(strategy="grammar_prompt", budget=TokenBudget(6000), max_iters=0)


def write_store(path: Path, transcripts) -> None:
    path.unlink(missing_ok=True)
    TranscriptStore(path).extend(transcripts)


def repair_fixture(full, examples) -> list[Transcript]:
    query = "a constant mask with the low seven bits set"
    bundle = build_grammar_prompt(full, examples, query, TokenBudget(6000))
    dirty_prog = "const int LOW_BITS = 0x7F;\n"
    clean_prog = "const int LOW_BITS = 127;\n"
    grammar = project_source(full, clean_prog).render()
    dirty = f"BNF grammar rules:\n{grammar}\nprogram based on the BNF grammar rules:\n{dirty_prog}"
    clean = f"BNF grammar rules:\n{grammar}\nprogram based on the BNF grammar rules:\n{clean_prog}"
    report = check_text(full, dirty)
    turn2 = [*bundle.messages, ("assistant", dirty), ("user", feedback_message(report))]
    meta = {"provider": DEFAULT_PROVIDER.provider, "synthesized": True}
    return [Transcript.create(DEFAULT_PROVIDER.model_id, bundle.messages, DEFAULT_PROVIDER.temperature, dirty, meta),
            Transcript.create(DEFAULT_PROVIDER.model_id, turn2, DEFAULT_PROVIDER.temperature, clean, meta)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="only report, write nothing")
    args = ap.parse_args()

    full = desugar(parse_grammar((ROOT / "fixtures" / "lucid_subset.gram").read_text(), "lucid_subset"))
    examples = load_examples(CORPUS / "examples", full)
    responses = compose(full)
    tasks = load_corpus(CORPUS / "complex") + load_corpus(CORPUS / "simple")
    transcripts = []
    meta = {"provider": DEFAULT_PROVIDER.provider, "synthesized": True}
    for task in sorted(tasks, key=lambda t: t.id):
        raw = responses[task.id]
        bundle = build_prompt(task, full, examples, settings())
        transcripts.append(Transcript.create(DEFAULT_PROVIDER.model_id, bundle.messages,
                                             DEFAULT_PROVIDER.temperature, raw, meta))
        rep = check_text(full, raw)
        print(f"{task.id:14} rules={rep.predicted_rule_count:3} loc={rep.program_loc:3} "
              f"fix={rep.loc_to_fix_proxy} violations={len(rep.violations)} tokens={bundle.token_estimate}")
    if args.check:
        return
    for tid, raw in responses.items():
        (CORPUS / "responses" / f"{tid}.txt").write_text(raw, encoding="utf-8")
    write_store(CORPUS / "replay.jsonl", transcripts)
    write_store(ROOT / "tests" / "fixtures" / "repair_store.jsonl", repair_fixture(full, examples))


if __name__ == "__main__":
    main()

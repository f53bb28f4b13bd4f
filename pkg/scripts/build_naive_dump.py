"""Regenerate ``corpus/naive``: the resource dump used by the naive strategy.

The dump stands in for "all documentation we have": a language reference with
one entry per grammar production, each illustrated by the first few example
programs that use it, a walkthrough of the examples with their specialized grammars,
and the full grammar.  Output is deterministic.

Run from the repository root:  python3 scripts/build_naive_dump.py
"""

from __future__ import annotations

import argparse
from pathlib import Path

from prose2dp.grammar import desugar, parse_grammar, render_bnf
from prose2dp.prompting import estimate_tokens, load_examples

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "corpus" / "naive"
PER_ENTRY = 6


def reference(full, examples, per_entry: int) -> str:
    parts = ["# Language reference\n\n",
             f"Each entry gives one grammar production and up to {per_entry} sample programs that need it.\n\n"]
    for p in full.productions:
        users = [ex for ex in examples if p in ex.subset.productions][:per_entry]
        parts.append(f"## {p.lhs} (production {p.index + 1})\n\n    {p.render()}\n\n")
        terms = sorted({s.name for s in p.symbols() if s.kind == "term"})
        if terms:
            defs = [line for line in render_bnf(full).splitlines() if line.split(" ::= ")[0] in terms]
            parts.append("Terminals:\n\n" + "".join(f"    {d}\n" for d in defs) + "\n")
        if not users:
            parts.append("No sample program uses this production.\n\n")
            continue
        for ex in users:
            body = "".join(f"    {line}\n" for line in ex.program.rstrip().splitlines())
            parts.append(f"Sample {ex.id}: {ex.query}\n\n{body}\n")
    return "".join(parts)


def walkthrough(examples) -> str:
    parts = ["# Sample walkthrough\n\n"]
    for ex in examples:
        parts.append(f"## {ex.id}\n\nTask: {ex.query}\n\nRules used:\n\n{ex.subset.render()}\n"
                     f"Program:\n\n{ex.program.rstrip()}\n\n")
    return "".join(parts)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="only report sizes, write nothing")
    args = ap.parse_args()
    full = desugar(parse_grammar((ROOT / "fixtures" / "lucid_subset.gram").read_text(), "lucid_subset"))
    examples = load_examples(ROOT / "corpus" / "examples", full)
    files = {"reference.md": reference(full, examples, PER_ENTRY), "walkthrough.md": walkthrough(examples)}
    total = sum(len(t) for t in files.values()) + len(render_bnf(full))
    for name, text in files.items():
        print(f"{name:16} {len(text):7} chars")
    print(f"{'total + grammar':16} {total:7} chars, ~{estimate_tokens('x' * total)} tokens")
    if args.check:
        return
    OUT.mkdir(exist_ok=True)
    for name, text in files.items():
        (OUT / name).write_text(text, encoding="utf-8")


if __name__ == "__main__":
    main()

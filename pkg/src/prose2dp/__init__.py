"""Grammar prompting for dataplane languages: grammars, projection, prompts, checking and repair."""

from .conformance import ConformanceReport, GenerationResponse, Violation, check, extract_sections
from .grammar import Grammar, count_rules, desugar, parse_grammar, render_bnf
from .parser import ParseTree, parse, parse_source
from .projection import GrammarSubset, project, project_source

__version__ = "0.1.0"

__all__ = [
    "ConformanceReport", "GenerationResponse", "Grammar", "GrammarSubset", "ParseTree", "Violation",
    "check", "count_rules", "desugar", "extract_sections", "parse", "parse_grammar", "parse_source",
    "project", "project_source", "render_bnf",
]

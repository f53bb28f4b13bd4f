"""Command-line entry point: ``prose2dp <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import AppConfig, ConfigError, load_config
from .conformance import check, extract_sections, run_external_validator, with_external
from .evaluation import STRATEGIES, CorpusError, EvalSettings, Task, build_prompt, load_corpus, run_eval, \
    write_report
from .gateway import PROVIDERS, CorruptStoreError, Gateway, GatewayError, TranscriptStore
from .grammar import GrammarError, count_rules, desugar, parse_grammar, render_bnf, validate_grammar
from .lexer import SyntaxFailure
from .projection import project_source
from .prompting import BudgetError, TokenBudget, load_examples
from .repair import repair_loop


class UsageError(Exception):
    pass


DOMAIN_ERRORS = (GrammarError, SyntaxFailure, GatewayError, CorpusError, BudgetError, CorruptStoreError)


def _emit(args, obj: dict, text: str) -> None:
    if args.json:
        print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _config(args) -> AppConfig:
    return load_config(args.config) if args.config else AppConfig()


def _grammar(args, cfg: AppConfig):
    path = getattr(args, "grammar", None) or cfg.grammar_path
    if not path:
        raise UsageError("no grammar given (use --grammar or set 'grammar' in the config)")
    return desugar(parse_grammar(_read(path), name=Path(path).stem))


def _budget(args, cfg: AppConfig) -> TokenBudget:
    try:
        return TokenBudget(args.budget if args.budget is not None else cfg.budget.max_tokens,
                           args.chars_per_token if args.chars_per_token is not None else cfg.budget.chars_per_token)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _examples(args, cfg: AppConfig, g, corpus: Path | None = None):
    path = getattr(args, "examples", None) or cfg.examples_path
    if path is None and corpus is not None and (corpus / "examples").is_dir():
        path = corpus / "examples"
    if path is None:
        return []
    if not Path(path).is_dir():
        raise UsageError(f"examples directory {path} does not exist")
    return load_examples(path, g)


def _resources(args, cfg: AppConfig) -> list[tuple[str, str]]:
    items = [(label, str(p)) for label, p in cfg.naive_resources]
    if args.resource:
        items = []
        for spec in args.resource:
            label, sep, path = spec.partition("=")
            if not sep or not label:
                raise UsageError(f"--resource expects LABEL=PATH, got {spec!r}")
            items.append((label, path))
    return [(label, _read(path)) for label, path in items]


def _settings(args, cfg: AppConfig, default_iters: int | None = None) -> EvalSettings:
    resend = cfg.resend_grammar or getattr(args, "resend_grammar", False)
    max_iters = getattr(args, "max_iters", None)
    if max_iters is None:
        max_iters = cfg.max_iters if default_iters is None else default_iters
    if max_iters < 0:
        raise UsageError("--max-iters must be non-negative")
    return EvalSettings(
        strategy=args.strategy,
        budget=_budget(args, cfg),
        max_iters=max_iters,
        resend_grammar=resend,
        parallelism=getattr(args, "parallelism", None) or cfg.parallelism,
        naive_resources=_resources(args, cfg) if args.strategy == "naive" else (),
        grammar_template=_template_arg(args, "template") or cfg.template("grammar_prompt")
        if args.strategy != "naive" else None,
        naive_template=_template_arg(args, "template") or cfg.template("naive_prompt")
        if args.strategy == "naive" else None,
        feedback_template=_template_arg(args, "feedback_template") or cfg.template("feedback"),
    )


def _template_arg(args, name: str) -> str | None:
    path = getattr(args, name, None)
    return _read(path) if path else None


def _gateway(args, cfg: AppConfig) -> Gateway:
    p = cfg.provider
    overrides = {}
    for flag, key in (("provider", "provider"), ("endpoint", "endpoint"), ("model", "model_id"),
                      ("api_key_env", "auth_env_var"), ("temperature", "temperature")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    try:
        p = replace(p, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    replay = args.replay or cfg.replay_path
    record = args.record or cfg.record_path
    strict = args.strict_replay or cfg.strict_replay
    if strict and not replay:
        raise UsageError("--strict-replay needs --replay")
    return Gateway(p, replay=TranscriptStore(replay) if replay else None,
                   record=TranscriptStore(record) if record else None, strict=strict,
                   max_in_flight=args.max_in_flight or cfg.parallelism)


# ---------------------------------------------------------------------------
# commands


def cmd_grammar_check(args) -> int:
    g = parse_grammar(_read(args.file), name=Path(args.file).stem)
    diags = validate_grammar(g)
    errors = [d for d in diags if d.severity == "error"]
    text = "\n".join(str(d) for d in diags) or "ok"
    _emit(args, {"diagnostics": [vars(d) for d in diags], "ok": not errors,
                 "rule_count": count_rules(desugar(g))}, text)
    return 1 if errors or (args.strict and diags) else 0


def cmd_grammar_render(args) -> int:
    g = desugar(parse_grammar(_read(args.file), name=Path(args.file).stem))
    text = render_bnf(g)
    _emit(args, {"bnf": text, "rule_count": count_rules(g)}, text)
    return 0


def cmd_grammar_count(args) -> int:
    g = desugar(parse_grammar(_read(args.file), name=Path(args.file).stem))
    n = count_rules(g)
    _emit(args, {"rule_count": n, "productions": len(g.productions), "terminals": len(g.terminals)}, str(n))
    return 0


def cmd_project(args) -> int:
    cfg = _config(args)
    g = _grammar(args, cfg)
    sub = project_source(g, _read(args.program))
    text = sub.render()
    _emit(args, {"bnf": text, "rule_count": count_rules(sub.to_grammar()),
                 "productions": [p.render() for p in sub.productions]}, text)
    return 0


def _task_from(args) -> Task:
    query = args.query if args.query is not None else (_read(args.query_file).strip() if args.query_file else None)
    if not query:
        raise UsageError("a query is required (--query or --query-file)")
    return Task("cli", query)


def _bundle(args, cfg: AppConfig):
    g = _grammar(args, cfg)
    settings = _settings(args, cfg)
    examples = _examples(args, cfg, g) if settings.strategy != "naive" else []
    return g, settings, examples, build_prompt(_task_from(args), g, examples, settings)


def cmd_prompt_build(args) -> int:
    cfg = _config(args)
    _, _, _, bundle = _bundle(args, cfg)
    if args.out:
        Path(args.out).write_text(bundle.text, encoding="utf-8")
    if args.json:
        _emit(args, bundle.to_dict(), "")
    elif not args.out:
        sys.stdout.write(bundle.text)
    print(f"token_estimate: {bundle.token_estimate}" +
          (f" (trimmed: {', '.join(bundle.trimmed)})" if bundle.trimmed else ""), file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    cfg = _config(args)
    g, settings, _, bundle = _bundle(args, cfg)
    raw = _gateway(args, cfg).complete(bundle.messages)
    if args.out:
        Path(args.out).write_text(raw, encoding="utf-8")
    naive = settings.strategy == "naive"
    report = check(g, extract_sections(raw, expect_grammar=not naive), require_grammar=not naive)
    _emit(args, {"response": raw, "token_estimate": bundle.token_estimate, "report": report.to_dict()},
          raw if not args.out else report.render())
    return 1 if args.strict and report.violations else 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    g = _grammar(args, cfg)
    raw = _read(args.response)
    resp = extract_sections(raw, expect_grammar=not args.naive)
    report = check(g, resp, require_grammar=not args.naive)
    if args.external_validator:
        if resp.program_text is None:
            raise UsageError("response has no program for the external validator")
        with tempfile.TemporaryDirectory() as tmp:
            prog = Path(tmp) / "program.dpt"
            prog.write_text(resp.program_text, encoding="utf-8")
            report = with_external(report, run_external_validator(args.external_validator, str(prog)))
    _emit(args, report.to_dict(), report.render())
    return 1 if args.strict and report.violations else 0


def cmd_repair(args) -> int:
    cfg = _config(args)
    g, settings, _, bundle = _bundle(args, cfg)
    outcome = repair_loop(g, bundle, _gateway(args, cfg), settings.max_iters, settings.resend_grammar,
                          settings.feedback_template, require_grammar=settings.strategy != "naive")
    history = outcome.to_dict()
    if args.history:
        Path(args.history).write_text(json.dumps(history, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                                      encoding="utf-8")
    text = (f"converged: {'yes' if outcome.converged else 'no'}  iterations: {outcome.iterations_used}  "
            f"best attempt: {outcome.best_index}\n" + outcome.final_report.render()
            + "\n" + (outcome.final_response.program_text or ""))
    _emit(args, history, text)
    return 1 if args.strict and not outcome.converged else 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    g = _grammar(args, cfg)
    corpus_dir = Path(args.corpus)
    corpus = load_corpus(corpus_dir)
    # one attempt per task unless asked otherwise, matching one-shot reporting
    settings = _settings(args, cfg, default_iters=0)
    examples = _examples(args, cfg, g, corpus_dir) if settings.strategy != "naive" else []
    records = run_eval(corpus, g, examples, _gateway(args, cfg), settings)
    out = Path(args.out_dir) if args.out_dir else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    csv_text, md_text = write_report(records, "csv"), write_report(records, "markdown")
    (out / "report.csv").write_text(csv_text, encoding="utf-8")
    (out / "report.md").write_text(md_text, encoding="utf-8")
    _emit(args, {"records": [{**vars(r), "wall_time": round(r.wall_time, 3)} for r in records],
                 "report_csv": str(out / "report.csv"), "report_md": str(out / "report.md")}, md_text)
    return 1 if args.strict and any(r.violations or r.error for r in records) else 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable JSON output")
    p.add_argument("--config", metavar="TOML", help="config file; flags override its values")


def _grammar_flag(p) -> None:
    p.add_argument("--grammar", metavar="FILE", help="full grammar file")


def _prompt_flags(p, query: bool = True) -> None:
    _grammar_flag(p)
    if query:
        p.add_argument("--query", help="natural-language task")
        p.add_argument("--query-file", metavar="FILE", help="read the query from a file")
    p.add_argument("--strategy", choices=STRATEGIES, default="grammar_prompt", help="prompting strategy")
    p.add_argument("--examples", metavar="DIR", help="few-shot example directory")
    p.add_argument("--resource", action="append", metavar="LABEL=PATH",
                   help="naive-prompt resource (repeatable)")
    p.add_argument("--template", metavar="FILE", help="prompt template file")
    p.add_argument("--budget", type=int, metavar="TOKENS", help="prompt token budget")
    p.add_argument("--chars-per-token", type=float, metavar="N", help="token estimator ratio")


def _gateway_flags(p) -> None:
    p.add_argument("--provider", choices=PROVIDERS, help="provider wire format")
    p.add_argument("--endpoint", metavar="URL", help="chat-completion endpoint")
    p.add_argument("--model", metavar="ID", help="model id")
    p.add_argument("--api-key-env", metavar="VAR", help="environment variable holding the API key")
    p.add_argument("--temperature", type=float, metavar="T", help="sampling temperature")
    p.add_argument("--replay", metavar="FILE", help="transcript store to answer from")
    p.add_argument("--record", metavar="FILE", help="append live transcripts to this store")
    p.add_argument("--strict-replay", action="store_true", help="fail on replay misses instead of going live")
    p.add_argument("--max-in-flight", type=int, metavar="N", help="concurrent request limit")


def _repair_flags(p) -> None:
    p.add_argument("--max-iters", type=int, metavar="N",
                   help="feedback rounds after the first attempt (eval default 0, repair default 3)")
    p.add_argument("--resend-grammar", action="store_true", help="include the full grammar in feedback")
    p.add_argument("--feedback-template", metavar="FILE", help="feedback message template")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prose2dp",
                                     description="Grammar-prompted program generation and checking.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    gp = sub.add_parser("grammar", help="inspect a grammar file")
    gsub = gp.add_subparsers(dest="action", metavar="action", required=True)
    p = gsub.add_parser("check", help="report undefined, unreachable and unproductive symbols")
    p.add_argument("file")
    p.add_argument("--strict", action="store_true", help="exit 1 on warnings too")
    _common(p)
    p.set_defaults(func=cmd_grammar_check)
    p = gsub.add_parser("render", help="print the desugared grammar")
    p.add_argument("file")
    _common(p)
    p.set_defaults(func=cmd_grammar_render)
    p = gsub.add_parser("count", help="count rule alternatives")
    p.add_argument("file")
    _common(p)
    p.set_defaults(func=cmd_grammar_count)

    p = sub.add_parser("project", help="specialized grammar of one program")
    p.add_argument("program")
    _grammar_flag(p)
    _common(p)
    p.set_defaults(func=cmd_project)

    pp = sub.add_parser("prompt", help="prompt assembly")
    psub = pp.add_subparsers(dest="action", metavar="action", required=True)
    p = psub.add_parser("build", help="assemble a prompt; token estimate goes to stderr")
    _prompt_flags(p)
    p.add_argument("--out", metavar="FILE", help="write the prompt here")
    _common(p)
    p.set_defaults(func=cmd_prompt_build)

    p = sub.add_parser("generate", help="build a prompt and make one model call")
    _prompt_flags(p)
    _gateway_flags(p)
    p.add_argument("--out", metavar="FILE", help="write the raw response here")
    p.add_argument("--strict", action="store_true", help="exit 1 when the response has violations")
    _common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a response against the full grammar")
    _grammar_flag(p)
    p.add_argument("--response", metavar="FILE", required=True, help="raw model response")
    p.add_argument("--naive", action="store_true", help="response carries a program only")
    p.add_argument("--external-validator", metavar="CMD",
                   help="command run on the program file; its verdict overrides the proxy")
    p.add_argument("--strict", action="store_true", help="exit 1 when violations are present")
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("repair", help="generate with feedback rounds")
    _prompt_flags(p)
    _gateway_flags(p)
    _repair_flags(p)
    p.add_argument("--history", metavar="FILE", help="write the attempt history as JSON")
    p.add_argument("--strict", action="store_true", help="exit 1 when the loop does not converge")
    _common(p)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("eval", help="run a task corpus and write report.csv and report.md")
    p.add_argument("--corpus", metavar="DIR", required=True, help="directory searched recursively for <id>.task.json files")
    _prompt_flags(p, query=False)
    _gateway_flags(p)
    _repair_flags(p)
    p.add_argument("--parallelism", type=int, metavar="N", help="tasks run at once")
    p.add_argument("--out-dir", metavar="DIR", help="report directory (default: current)")
    p.add_argument("--strict", action="store_true", help="exit 1 when any record has violations")
    _common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"prose2dp: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"prose2dp: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

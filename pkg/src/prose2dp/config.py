"""TOML application config; paths are resolved against the config file's directory."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gateway import ProviderConfig
from .prompting import TokenBudget

DEFAULT_PROVIDER = ProviderConfig(endpoint="https://api.openai.com/v1/chat/completions",
                                  model_id="gpt-4", auth_env_var="OPENAI_API_KEY")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    grammar_path: Path | None = None
    examples_path: Path | None = None
    template_paths: dict = field(default_factory=dict)  # grammar_prompt / naive_prompt / feedback
    naive_resources: tuple[tuple[str, Path], ...] = ()
    provider: ProviderConfig = DEFAULT_PROVIDER
    budget: TokenBudget = field(default_factory=lambda: TokenBudget(6000))
    replay_path: Path | None = None
    record_path: Path | None = None
    strict_replay: bool = False
    max_iters: int = 3
    parallelism: int = 2
    resend_grammar: bool = False

    def template(self, name: str) -> str | None:
        path = self.template_paths.get(name)
        return path.read_text(encoding="utf-8") if path else None


_TEMPLATE_KEYS = ("grammar_prompt", "naive_prompt", "feedback")
_TOP_KEYS = {"grammar", "examples", "templates", "naive", "provider", "budget", "replay", "record",
             "max_iters", "parallelism", "resend_grammar"}


def _path(base: Path, value, what: str, must_exist: bool = True) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{what} must be a non-empty path string")
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if must_exist and not p.exists():
        raise ConfigError(f"{what}: {p} does not exist")
    return p


def _int(data: dict, key: str, default: int, lo: int) -> int:
    value = data.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}")
    return value


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    base = path.resolve().parent
    cfg = AppConfig()
    updates: dict = {}
    if "grammar" in data:
        updates["grammar_path"] = _path(base, data["grammar"], "grammar")
    if "examples" in data:
        updates["examples_path"] = _path(base, data["examples"], "examples")
    templates = data.get("templates", {})
    bad = set(templates) - set(_TEMPLATE_KEYS)
    if bad:
        raise ConfigError(f"unknown template names {sorted(bad)}")
    updates["template_paths"] = {k: _path(base, v, f"templates.{k}") for k, v in templates.items()}
    resources = data.get("naive", {}).get("resources", [])
    try:
        updates["naive_resources"] = tuple((r["label"], _path(base, r["path"], f"naive resource {r['label']}"))
                                           for r in resources)
    except (KeyError, TypeError):
        raise ConfigError("naive.resources entries need 'label' and 'path'") from None
    if "provider" in data:
        known = {f.name for f in fields(ProviderConfig)}
        extra = set(data["provider"]) - known
        if extra:
            raise ConfigError(f"unknown provider keys {sorted(extra)}")
        try:
            updates["provider"] = replace(DEFAULT_PROVIDER, **data["provider"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"provider: {exc}") from None
    if "budget" in data:
        b = data["budget"]
        try:
            updates["budget"] = TokenBudget(b.get("max_tokens", 6000), b.get("chars_per_token", 4))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"budget: {exc}") from None
    replay = data.get("replay", {})
    if "path" in replay:
        updates["replay_path"] = _path(base, replay["path"], "replay.path")
    updates["strict_replay"] = bool(replay.get("strict", False))
    if "record" in data:
        updates["record_path"] = _path(base, data["record"].get("path"), "record.path", must_exist=False)
    updates["max_iters"] = _int(data, "max_iters", cfg.max_iters, 0)
    updates["parallelism"] = _int(data, "parallelism", cfg.parallelism, 1)
    updates["resend_grammar"] = bool(data.get("resend_grammar", False))
    return replace(cfg, **updates)

"""Chat-completion client with live HTTP plus record/replay transcript stores."""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence
from urllib.parse import urlparse

import httpx

Messages = Sequence[tuple[str, str]]


class GatewayError(RuntimeError):
    iteration: int | None = None


class AuthMissingError(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body[:500]
        super().__init__(f"provider returned HTTP {status}: {self.body}")


class NetworkError(GatewayError):
    pass


class ReplayMiss(GatewayError):
    def __init__(self, request_hash: str):
        self.request_hash = request_hash
        super().__init__(f"no stored transcript for request {request_hash}")


class CorruptStoreError(ValueError):
    def __init__(self, path: str | Path, index: int, reason: str):
        self.path = str(path)
        self.index = index
        super().__init__(f"{path}: record {index}: {reason}")


PROVIDERS = ("openai", "gemini")


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str
    model_id: str
    auth_env_var: str = "OPENAI_API_KEY"
    provider: str = "openai"
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self):
        url = urlparse(self.endpoint)
        if not (url.scheme in ("http", "https") and url.netloc):
            raise ValueError(f"endpoint must be an absolute http(s) URL: {self.endpoint!r}")
        if self.provider not in PROVIDERS:
            raise ValueError(f"unknown provider {self.provider!r}; expected one of {PROVIDERS}")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


def _norm_messages(messages: Messages) -> list[list[str]]:
    return [[str(role), str(content)] for role, content in messages]


def request_hash(model_id: str, messages: Messages, temperature: float) -> str:
    payload = {"model_id": model_id, "messages": _norm_messages(messages),
               "temperature": float(temperature)}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Transcript:
    request_hash: str
    model_id: str
    temperature: float
    messages: tuple[tuple[str, str], ...]
    response: str
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def create(cls, model_id: str, messages: Messages, temperature: float, response: str,
               metadata: dict | None = None) -> "Transcript":
        msgs = tuple((str(r), str(c)) for r, c in messages)
        return cls(request_hash(model_id, msgs, temperature), model_id, float(temperature),
                   msgs, response, dict(metadata or {}))

    def verify(self) -> bool:
        return self.request_hash == request_hash(self.model_id, self.messages, self.temperature)

    def to_json(self) -> str:
        return json.dumps({
            "request_hash": self.request_hash,
            "request": {"model_id": self.model_id, "temperature": self.temperature,
                        "messages": [{"role": r, "content": c} for r, c in self.messages]},
            "response": self.response,
            "metadata": self.metadata,
        }, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        req = data["request"]
        msgs = tuple((m["role"], m["content"]) for m in req["messages"])
        return cls(data["request_hash"], req["model_id"], float(req["temperature"]), msgs,
                   data["response"], dict(data.get("metadata") or {}))


class TranscriptStore:
    """JSON-lines file of transcripts; appends hold an exclusive advisory lock."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def load(self) -> list[Transcript]:
        if not self.path.exists():
            return []
        out = []
        with self.path.open(encoding="utf-8") as fh:
            for index, line in enumerate(l for l in fh if l.strip()):
                try:
                    t = Transcript.from_dict(json.loads(line))
                except (ValueError, KeyError, TypeError) as exc:
                    raise CorruptStoreError(self.path, index, f"malformed record ({exc})") from None
                if not t.verify():
                    raise CorruptStoreError(self.path, index, "request_hash does not match request")
                out.append(t)
        return out

    def append(self, transcript: Transcript) -> None:
        self.extend([transcript])

    def extend(self, transcripts: Iterable[Transcript]) -> None:
        lines = "".join(t.to_json() + "\n" for t in transcripts)
        if not lines:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(lines)
                fh.flush()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


def _payload(cfg: ProviderConfig, messages: Messages) -> dict:
    if cfg.provider == "gemini":
        system = [c for r, c in messages if r == "system"]
        body = {
            "contents": [{"role": "model" if r == "assistant" else "user", "parts": [{"text": c}]}
                         for r, c in messages if r != "system"],
            "generationConfig": {"temperature": cfg.temperature,
                                 "maxOutputTokens": cfg.max_output_tokens},
        }
        if system:
            body["systemInstruction"] = {"parts": [{"text": "\n\n".join(system)}]}
        return body
    return {
        "model": cfg.model_id,
        "messages": [{"role": r, "content": c} for r, c in messages],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }


def _headers(cfg: ProviderConfig, key: str) -> dict:
    if cfg.provider == "gemini":
        return {"x-goog-api-key": key}
    return {"Authorization": f"Bearer {key}"}


def _extract(cfg: ProviderConfig, data: dict) -> tuple[str, dict]:
    try:
        if cfg.provider == "gemini":
            parts = data["candidates"][0]["content"]["parts"]
            text = "".join(p.get("text", "") for p in parts)
            usage = data.get("usageMetadata") or {}
            tokens = {"prompt_tokens": usage.get("promptTokenCount"),
                      "completion_tokens": usage.get("candidatesTokenCount")}
        else:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage") or {}
            tokens = {"prompt_tokens": usage.get("prompt_tokens"),
                      "completion_tokens": usage.get("completion_tokens")}
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(200, f"unexpected response shape ({exc}): {json.dumps(data)[:300]}") from None
    return text, {k: v for k, v in tokens.items() if v is not None}


class Gateway:
    """Shareable client.

    ``replay`` maps request hashes to stored transcripts; with ``strict`` a miss
    raises instead of going live.  ``record`` receives every live transcript.
    """

    def __init__(self, cfg: ProviderConfig | None, replay: TranscriptStore | None = None,
                 record: TranscriptStore | None = None, strict: bool = False,
                 max_in_flight: int = 2, sleep: Callable[[float], None] = time.sleep,
                 transport: httpx.BaseTransport | None = None):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.cfg = cfg
        self.strict = strict
        self.record = record
        self.max_in_flight = max_in_flight
        self._replay = {t.request_hash: t for t in replay.load()} if replay else {}
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep
        self._transport = transport
        self.live_calls = 0

    @property
    def model_id(self) -> str:
        return self.cfg.model_id if self.cfg else "replay"

    @property
    def temperature(self) -> float:
        return self.cfg.temperature if self.cfg else 0.0

    def hash_for(self, messages: Messages) -> str:
        return request_hash(self.model_id, messages, self.temperature)

    def complete(self, messages: Messages) -> str:
        h = self.hash_for(messages)
        hit = self._replay.get(h)
        if hit is not None:
            return hit.response
        if self.strict or self.cfg is None:
            raise ReplayMiss(h)
        with self._sem:
            text, meta = self._live(messages)
        if self.record is not None:
            meta = {"provider": self.cfg.provider,
                    "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), **meta}
            self.record.append(Transcript.create(self.model_id, messages, self.temperature, text, meta))
        return text

    def _live(self, messages: Messages) -> tuple[str, dict]:
        cfg = self.cfg
        key = os.environ.get(cfg.auth_env_var)
        if not key:
            raise AuthMissingError(f"environment variable {cfg.auth_env_var} is not set")
        self.live_calls += 1
        body = _payload(cfg, messages)
        delay = 1.0
        last: Exception | None = None
        with httpx.Client(timeout=cfg.timeout, transport=self._transport) as client:
            for attempt in range(cfg.max_retries + 1):
                if attempt:
                    self._sleep(delay)
                    delay *= 2
                try:
                    resp = client.post(cfg.endpoint, json=body, headers=_headers(cfg, key))
                except httpx.TransportError as exc:
                    last = NetworkError(f"{type(exc).__name__}: {exc}")
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = ProviderError(resp.status_code, resp.text)
                    continue
                if resp.status_code >= 400:
                    raise ProviderError(resp.status_code, resp.text)
                try:
                    data = resp.json()
                except ValueError:
                    raise ProviderError(resp.status_code, resp.text) from None
                return _extract(cfg, data)
        assert last is not None
        if isinstance(last, NetworkError):
            raise NetworkError(f"gave up after {cfg.max_retries + 1} attempts: {last}")
        raise last

"""Provider-agnostic chat-completion access.

One narrow interface (send a prompt, get text back) with retries, per-provider
rate limiting, a persistent response cache, and deterministic replay/mock
modes so the whole pipeline runs without network access. Cache keys are a
sha256 digest over a canonical UTF-8 JSON encoding of (model, prompt,
decoding), so they are stable across platforms and runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .core import Decoding, TearError

MODE_LIVE = "live"
MODE_REPLAY = "replay"
MODE_MOCK = "mock"


class GatewayError(TearError):
    pass


class ProviderError(GatewayError):
    """A provider call failed after the retry budget was exhausted."""


class AuthError(GatewayError):
    """Credentials for a provider are missing or rejected."""


class ReplayMiss(GatewayError):
    """Replay mode got a request whose key is not in the fixture cache."""


class CacheConflict(GatewayError):
    """An import would overwrite an existing key with a different value."""


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: str
    decoding: Decoding = field(default_factory=Decoding)
    # Free-form label for call-log analysis; never part of the cache key.
    tag: str = ""


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    provenance: str  # live | cache | replay | mock
    latency: float = 0.0
    attempt_count: int = 1


def request_key(request: CompletionRequest) -> str:
    payload = {
        "model": request.model,
        "prompt": request.prompt,
        "temperature": request.decoding.temperature,
        "max_tokens": request.decoding.max_tokens,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """Thread-safe in-memory cache with an append-only JSONL file format."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        with self._lock:
            record = self._entries.get(key)
            return record["response"] if record else None

    def put(self, key: str, request: CompletionRequest, response_text: str) -> None:
        record = {
            "key": key,
            "request": {
                "model": request.model,
                "prompt": request.prompt,
                "temperature": request.decoding.temperature,
                "max_tokens": request.decoding.max_tokens,
            },
            "response": response_text,
            "ts": time.time(),
        }
        with self._lock:
            # First write wins: identical requests must stay deterministic.
            self._entries.setdefault(key, record)

    def export(self, path: Path) -> int:
        with self._lock:
            records = [self._entries[key] for key in sorted(self._entries)]
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        return len(records)

    def import_file(self, path: Path) -> int:
        added = 0
        conflicts = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                key = record["key"]
                with self._lock:
                    existing = self._entries.get(key)
                    if existing is None:
                        self._entries[key] = record
                        added += 1
                    elif existing["response"] != record["response"]:
                        conflicts.append(key)
        if conflicts:
            raise CacheConflict(f"import conflicts on keys: {', '.join(sorted(conflicts))}")
        return added

    @classmethod
    def load(cls, path: Path) -> "ResponseCache":
        cache = cls()
        cache.import_file(path)
        return cache


class _RateLimiter:
    """Sliding-window limiter for requests-per-minute."""

    def __init__(self, rpm: int) -> None:
        self._rpm = rpm
        self._lock = threading.Lock()
        self._stamps: deque[float] = deque()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                while self._stamps and now - self._stamps[0] >= 60.0:
                    self._stamps.popleft()
                if len(self._stamps) < self._rpm:
                    self._stamps.append(now)
                    return
                wait = 60.0 - (now - self._stamps[0])
            time.sleep(min(wait, 0.05))


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    api_key_env: str
    rpm: int = 60


class MockProvider:
    """Scripted provider: a digest->text map, a callable, or both."""

    def __init__(
        self,
        script: Mapping[str, str] | None = None,
        handler: Callable[[CompletionRequest], str] | None = None,
    ) -> None:
        self._script = dict(script or {})
        self._handler = handler
        self.calls: list[CompletionRequest] = []
        self._lock = threading.Lock()

    def send(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(request)
        key = request_key(request)
        if key in self._script:
            return self._script[key]
        if self._handler is not None:
            return self._handler(request)
        raise ProviderError(f"mock provider has no script for key {key[:12]}…")


class HttpChatProvider:
    """OpenAI-style chat-completions adapter; role framing stays in here."""

    def __init__(self, config: ProviderConfig, timeout: float = 60.0) -> None:
        self._config = config
        self._timeout = timeout

    def send(self, request: CompletionRequest) -> str:
        import httpx

        api_key = os.environ.get(self._config.api_key_env, "")
        if not api_key:
            raise AuthError(f"environment variable {self._config.api_key_env} is not set")
        payload = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        }
        url = self._config.base_url.rstrip("/") + "/chat/completions"
        try:
            reply = httpx.post(
                url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self._timeout,
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"request to {url} failed: {exc}") from exc
        if reply.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {reply.status_code})")
        if reply.status_code != 200:
            raise ProviderError(f"provider returned HTTP {reply.status_code}: {reply.text[:200]}")
        body = reply.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {body!r:.200}") from exc


@dataclass(frozen=True)
class CallLogEntry:
    tag: str
    model: str
    key: str
    provenance: str


class Gateway:
    """Front door for all completion traffic.

    Lookup order is cache, then replay fixture, then the live/mock provider;
    live and mock responses are written back to the cache before returning.
    """

    def __init__(
        self,
        mode: str = MODE_MOCK,
        cache: ResponseCache | None = None,
        providers: Mapping[str, object] | None = None,
        model_routes: Mapping[str, str] | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        rate_limits: Mapping[str, int] | None = None,
    ) -> None:
        if mode not in (MODE_LIVE, MODE_REPLAY, MODE_MOCK):
            raise GatewayError(f"unknown gateway mode {mode!r}")
        self.mode = mode
        self.cache = cache if cache is not None else ResponseCache()
        self._providers = dict(providers or {})
        self._model_routes = dict(model_routes or {})
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._limiters = {name: _RateLimiter(rpm) for name, rpm in (rate_limits or {}).items()}
        self._log_lock = threading.Lock()
        self.call_log: list[CallLogEntry] = []

    def _resolve_provider(self, model: str) -> tuple[str, object]:
        name = self._model_routes.get(model)
        if name is None and len(self._providers) == 1:
            name = next(iter(self._providers))
        if name is None or name not in self._providers:
            raise ProviderError(f"no provider configured for model {model!r}")
        return name, self._providers[name]

    def _record(self, request: CompletionRequest, key: str, provenance: str) -> None:
        with self._log_lock:
            self.call_log.append(CallLogEntry(request.tag, request.model, key, provenance))

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = request_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            provenance = MODE_REPLAY if self.mode == MODE_REPLAY else "cache"
            self._record(request, key, provenance)
            return CompletionResponse(text=cached, provenance=provenance, latency=0.0, attempt_count=0)
        if self.mode == MODE_REPLAY:
            raise ReplayMiss(f"no replay fixture for key {key[:12]}… (tag={request.tag or 'untagged'})")

        provider_name, provider = self._resolve_provider(request.model)
        limiter = self._limiters.get(provider_name)
        start = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            if limiter is not None:
                limiter.acquire()
            try:
                text = provider.send(request)  # type: ignore[attr-defined]
            except AuthError:
                raise
            except Exception as exc:
                last_error = exc
                if attempt < self._max_attempts:
                    time.sleep(self._backoff_base * (2 ** (attempt - 1)))
                continue
            self.cache.put(key, request, text)
            provenance = MODE_MOCK if self.mode == MODE_MOCK else MODE_LIVE
            self._record(request, key, provenance)
            return CompletionResponse(
                text=text,
                provenance=provenance,
                latency=time.monotonic() - start,
                attempt_count=attempt,
            )
        raise ProviderError(f"{request.model}: all {self._max_attempts} attempts failed: {last_error}")

    def complete_batch(
        self, requests: list[CompletionRequest], parallelism: int = 1
    ) -> list[CompletionResponse | GatewayError]:
        """Order-preserving batch; failures come back per item, not wholesale."""
        if parallelism < 1:
            raise GatewayError("parallelism must be >= 1")
        results: list[CompletionResponse | GatewayError] = [None] * len(requests)  # type: ignore[list-item]

        def run(index: int) -> None:
            try:
                results[index] = self.complete(requests[index])
            except GatewayError as exc:
                results[index] = exc

        if parallelism == 1:
            for i in range(len(requests)):
                run(i)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                list(pool.map(run, range(len(requests))))
        return results

    def calls_with_tag(self, tag: str) -> list[CallLogEntry]:
        with self._log_lock:
            return [entry for entry in self.call_log if entry.tag == tag]


def export_cache(cache: ResponseCache, path: Path) -> int:
    return cache.export(Path(path))


def import_cache(cache: ResponseCache, path: Path) -> int:
    return cache.import_file(Path(path))

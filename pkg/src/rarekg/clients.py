"""Offline-first clients for the disease-name resolver and an OpenAI-compatible LLM.

Both clients key every request by a SHA-256 of its canonical JSON form and
keep ``{request_hash, response}`` lines in an append-only JSONL file. A hit in
that file never touches the network. Tests pass an ``httpx.MockTransport``
through the ``transport`` argument and count calls on it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import httpx

from .cases import CaseRecord, read_template
from .errors import ClientError, EvaluationError
from .evaluation import MAX_PREDICTIONS, parse_prediction_list
from .kg import ContextBlock, ContextForm, serialize_context
from .ontology import Namespace, TermId, normalize_text

log = logging.getLogger(__name__)

ENV_RESOLVER_URL = "RAREKG_RESOLVER_URL"
ENV_LLM_URL = "RAREKG_LLM_URL"
ENV_LLM_KEY = "RAREKG_LLM_KEY"
DEFAULT_RESOLVER_URL = "https://api-v3.monarchinitiative.org/v3/api"
DIAGNOSE_TEMPLATE = "diagnose_v1.txt"
EXTRACT_TEMPLATE = "extract_v1.txt"


def request_hash(request: dict) -> str:
    blob = json.dumps(request, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RecordStore:
    """Append-only JSONL of ``{request_hash, response}``; the last record per hash wins."""

    def __init__(self, path: Optional[Union[str, Path]] = None) -> None:
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._records: dict[str, object] = {}
        if self.path is not None and self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._records[rec["request_hash"]] = rec["response"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise ClientError("MALFORMED_CACHE", f"{self.path}:{lineno} is not a cache record") from None

    def get(self, key: str) -> Optional[object]:
        with self._lock:
            return self._records.get(key)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._records

    def put(self, key: str, response: object) -> None:
        line = json.dumps({"request_hash": key, "response": response}, sort_keys=True, ensure_ascii=False)
        with self._lock:
            self._records[key] = response
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")


class RateLimiter:
    """Spaces calls at least ``min_interval`` seconds apart."""

    def __init__(
        self,
        min_interval: float = 0.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.min_interval = min_interval
        self._clock, self._sleep = clock, sleep
        self._lock = threading.Lock()
        self._last: Optional[float] = None

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            if self._last is not None and now - self._last < self.min_interval:
                self._sleep(self.min_interval - (now - self._last))
                now = self._clock()
            self._last = now


def _http(transport: Optional[httpx.BaseTransport], timeout: float) -> httpx.Client:
    return httpx.Client(transport=transport, timeout=timeout)


# ---------------------------------------------------------------------------
# resolver


@dataclass(frozen=True)
class ResolverConfig:
    """``enabled=False`` means cache-only: misses resolve to nothing."""

    base_url: str = DEFAULT_RESOLVER_URL
    timeout: float = 10.0
    cache_path: Optional[str] = None
    enabled: bool = True
    min_interval: float = 0.0

    @classmethod
    def from_env(cls, **overrides) -> "ResolverConfig":
        url = os.environ.get(ENV_RESOLVER_URL)
        if url and "base_url" not in overrides:
            overrides["base_url"] = url
        return cls(**overrides)


_ORPHA_XREF = re.compile(r"^(?:ORPHA|Orphanet|ORPHANET)[:_](\d+)$")


def first_orpha_hit(payload: object) -> Optional[TermId]:
    """First search item that is, or cross-references, an Orphanet concept."""
    items = payload.get("items") if isinstance(payload, dict) else None
    if not isinstance(items, list):
        raise ClientError("MALFORMED_RESPONSE", "resolver payload has no 'items' list")
    for item in items:
        if not isinstance(item, dict):
            raise ClientError("MALFORMED_RESPONSE", "resolver item is not an object")
        candidates = [item.get("id", "")] + list(item.get("xref") or [])
        for c in candidates:
            m = _ORPHA_XREF.match(str(c).strip())
            if m:
                return TermId(Namespace.ORPHA, str(int(m.group(1))))
    return None


class EntityResolver:
    """Disease-name to ORPHA resolution against a Monarch-v3-style search API."""

    def __init__(
        self,
        cfg: ResolverConfig,
        transport: Optional[httpx.BaseTransport] = None,
        store: Optional[RecordStore] = None,
    ) -> None:
        self.cfg = cfg
        self.transport = transport
        self.store = store or RecordStore(cfg.cache_path)
        self.limiter = RateLimiter(cfg.min_interval)
        self.network_calls = 0
        self._lock = threading.Lock()

    def _request(self, label: str) -> dict:
        return {
            "kind": "resolve", "url": self.cfg.base_url.rstrip("/") + "/search",
            "params": {"q": normalize_text(label), "category": "biolink:Disease", "limit": 20},
        }

    def resolve(self, label: str) -> Optional[TermId]:
        if not label or not label.strip():
            return None
        req = self._request(label)
        key = request_hash(req)
        cached = self.store.get(key)
        if cached is None:
            if not self.cfg.enabled:
                return None
            cached = self._fetch(req)
            self.store.put(key, cached)
        return first_orpha_hit(cached)

    def _fetch(self, req: dict) -> object:
        self.limiter.wait()
        with self._lock:
            self.network_calls += 1
        try:
            with _http(self.transport, self.cfg.timeout) as client:
                resp = client.get(req["url"], params=req["params"])
        except httpx.HTTPError as exc:
            raise ClientError("REMOTE_UNAVAILABLE", f"resolver request failed: {exc}") from None
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ClientError("REMOTE_UNAVAILABLE", f"resolver returned HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ClientError("MALFORMED_RESPONSE", f"resolver returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError:
            raise ClientError("MALFORMED_RESPONSE", "resolver response is not JSON") from None
        first_orpha_hit(payload)
        return payload


def resolve_remote(cfg: ResolverConfig, label: str, transport: Optional[httpx.BaseTransport] = None) -> Optional[TermId]:
    return EntityResolver(cfg, transport).resolve(label)


# ---------------------------------------------------------------------------
# LLM endpoint


@dataclass(frozen=True)
class LlmEndpointConfig:
    """``replay_only`` forbids network access; a replay miss is then an error."""

    base_url: str = ""
    model: str = ""
    max_tokens: int = 1024
    temperature: float = 0.0
    api_key: Optional[str] = field(default=None, repr=False)
    timeout: float = 60.0
    replay_path: Optional[str] = None
    replay_only: bool = False
    min_interval: float = 0.0

    @classmethod
    def from_env(cls, **overrides) -> "LlmEndpointConfig":
        if "base_url" not in overrides and os.environ.get(ENV_LLM_URL):
            overrides["base_url"] = os.environ[ENV_LLM_URL]
        if "api_key" not in overrides:
            overrides["api_key"] = os.environ.get(ENV_LLM_KEY)
        return cls(**overrides)


class LlmClient:
    def __init__(
        self,
        cfg: LlmEndpointConfig,
        transport: Optional[httpx.BaseTransport] = None,
        store: Optional[RecordStore] = None,
    ) -> None:
        self.cfg = cfg
        self.transport = transport
        self.store = store or RecordStore(cfg.replay_path)
        self.limiter = RateLimiter(cfg.min_interval)
        self.network_calls = 0
        self._lock = threading.Lock()

    def _body(self, prompt: str, temperature: float) -> dict:
        return {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        }

    def complete(self, prompt: str, temperature: Optional[float] = None) -> str:
        body = self._body(prompt, self.cfg.temperature if temperature is None else temperature)
        key = request_hash({"kind": "chat", "body": body})
        cached = self.store.get(key)
        if cached is not None:
            return str(cached)
        if self.cfg.replay_only:
            raise ClientError("REPLAY_MISS", f"no recorded completion for request {key[:12]}", request_hash=key)
        if not self.cfg.base_url:
            raise ClientError("ENDPOINT_UNAVAILABLE", "no LLM endpoint configured")
        text = self._post(body)
        self.store.put(key, text)
        return text

    def _post(self, body: dict) -> str:
        self.limiter.wait()
        with self._lock:
            self.network_calls += 1
        headers = {"Authorization": f"Bearer {self.cfg.api_key}"} if self.cfg.api_key else {}
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        try:
            with _http(self.transport, self.cfg.timeout) as client:
                resp = client.post(url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise ClientError("ENDPOINT_UNAVAILABLE", f"LLM request failed: {exc}") from None
        if resp.status_code != 200:
            raise ClientError("ENDPOINT_UNAVAILABLE", f"LLM endpoint returned HTTP {resp.status_code}")
        try:
            return str(resp.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError):
            raise ClientError("MALFORMED_RESPONSE", "LLM response lacks choices[0].message.content") from None


_SLOT = re.compile(r"\{([a-z_]+)\}")


def fill_template(template: str, /, **values: str) -> str:
    """Substitute ``{name}`` slots in the template only, never inside the values."""
    return _SLOT.sub(lambda m: values[m.group(1)], template)


def case_block(case: CaseRecord) -> str:
    parts = [case.text()] if case.text() else []
    if case.phenotypes:
        parts.append("Phenotypes: " + ", ".join(sorted(str(p) for p in case.phenotypes)))
    if case.variants:
        parts.append("Variants: " + ", ".join(case.variants))
    return "\n".join(parts)


def build_diagnosis_prompt(case: CaseRecord, context: ContextBlock, template: Optional[str] = None) -> str:
    """Clinical record plus the TEXT form of the context block, inserted verbatim."""
    ctx = serialize_context(context, ContextForm.TEXT).decode("utf-8")
    return fill_template(template or read_template(DIAGNOSE_TEMPLATE), case=case_block(case), context=ctx)


def augmented_diagnose(client: LlmClient, case: CaseRecord, context: ContextBlock, template: Optional[str] = None) -> str:
    return client.complete(build_diagnosis_prompt(case, context, template))


def build_extraction_prompt(raw_output: str, template: Optional[str] = None) -> str:
    return fill_template(template or read_template(EXTRACT_TEMPLATE), text=raw_output)


def extract_list_via_llm(client: LlmClient, raw_output: str) -> list[str]:
    """LLM fallback for responses without a recognisable list; always temperature 0."""
    if not raw_output or not raw_output.strip():
        raise ClientError("STILL_UNPARSEABLE", "nothing to extract from an empty response")
    reply = client.complete(build_extraction_prompt(raw_output), temperature=0.0)
    try:
        return [label for _, label in parse_prediction_list(reply, MAX_PREDICTIONS)]
    except EvaluationError:
        raise ClientError("STILL_UNPARSEABLE", "extraction reply has no list either") from None


"""
Chat-completion client.

One wire dialect (OpenAI-compatible chat completions) plus deterministic mock
providers so the benchmark can run offline. Retries and backoff are handled
here rather than by the SDK so every attempt is logged and reported.
"""

import asyncio
import hashlib
import json
import os
import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple

import openai
import structlog

from errors import ConfigurationError, TransportError

logger = structlog.get_logger(__name__)


class ProviderKind(Enum):
    OPENAI_COMPATIBLE = "openai"
    MOCK_GOLD = "mock-gold"
    MOCK_UNIFORM = "mock-uniform"
    MOCK_FIXED = "mock-fixed"
    MOCK_ECHO = "mock-echo"


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind
    endpoint_url: Optional[str] = None
    credential_env_var: Optional[str] = None
    max_parallel: int = 8
    retry_count: int = 3
    retry_backoff: Tuple[float, ...] = (1.0, 2.0, 4.0)
    timeout_seconds: float = 60.0
    seed: int = 0
    letter: str = "A"

    @property
    def is_mock(self) -> bool:
        return self.kind is not ProviderKind.OPENAI_COMPATIBLE

    def describe(self) -> str:
        if self.kind is ProviderKind.MOCK_UNIFORM:
            return f"{self.kind.value}:{self.seed}"
        if self.kind is ProviderKind.MOCK_FIXED:
            return f"{self.kind.value}:{self.letter}"
        if self.kind is ProviderKind.OPENAI_COMPATIBLE:
            return f"{self.kind.value}@{self.endpoint_url}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str, config) -> "ProviderConfig":
        """
        Build a provider from a short spec such as ``openai``, ``mock-gold``,
        ``mock-uniform:7``, ``mock-fixed:B`` or ``mock-echo``.
        """
        name, _, arg = text.strip().partition(":")
        try:
            kind = ProviderKind(name)
        except ValueError:
            raise ConfigurationError(
                f"unknown provider {name!r}; expected one of {', '.join(k.value for k in ProviderKind)}"
            ) from None
        common = dict(
            max_parallel=config.llm_max_parallel,
            retry_count=config.llm_retry_count,
            retry_backoff=tuple(config.llm_retry_backoff),
            timeout_seconds=config.llm_timeout_seconds,
        )
        if kind is ProviderKind.OPENAI_COMPATIBLE:
            return cls(kind, endpoint_url=config.llm_endpoint_url,
                       credential_env_var=config.llm_api_key_env, **common)
        if kind is ProviderKind.MOCK_UNIFORM:
            try:
                seed = int(arg or 0)
            except ValueError:
                raise ConfigurationError(f"mock-uniform seed must be an integer, got {arg!r}") from None
            return cls(kind, seed=seed, **common)
        if kind is ProviderKind.MOCK_FIXED:
            letter = (arg or "A").strip().upper()
            if len(letter) != 1 or not "A" <= letter <= "H":
                raise ConfigurationError(f"mock-fixed letter must be A-H, got {arg!r}")
            return cls(kind, letter=letter, **common)
        return cls(kind, **common)


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    # Side channel for mock providers (gold letter, number of choices); not hashed, never sent.
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def hashed_fields(self) -> Dict[str, Any]:
        return {
            "model_id": self.model_id,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }

    @property
    def request_hash(self) -> str:
        canonical = json.dumps(self.hashed_fields(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ChatResponse:
    text: str
    provider_meta: Dict[str, Any] = field(default_factory=dict)
    from_cache: bool = False
    latency_ms: int = 0


Transport = Callable[[ChatRequest], Awaitable[str]]

TRANSIENT_ERRORS = (
    openai.APIConnectionError,      # includes APITimeoutError
    openai.RateLimitError,
    openai.InternalServerError,
)
AUTH_ERRORS = (openai.AuthenticationError, openai.PermissionDeniedError)

LETTERS = "ABCDEFGH"


class ChatClient:
    """Sends requests to one provider with bounded concurrency and retries."""

    def __init__(self, provider: ProviderConfig, transport: Optional[Transport] = None):
        self.provider = provider
        self._transport = transport
        self._semaphore = asyncio.Semaphore(provider.max_parallel)
        self._openai: Optional[openai.AsyncOpenAI] = None
        self.in_flight = 0
        self.peak_in_flight = 0

    # ==================== Providers ====================

    def _openai_client(self) -> openai.AsyncOpenAI:
        if self._openai is None:
            env_var = self.provider.credential_env_var or "OPENAI_API_KEY"
            api_key = os.getenv(env_var, "").strip()
            if not api_key:
                raise ConfigurationError(f"missing credential: environment variable {env_var} is not set")
            self._openai = openai.AsyncOpenAI(
                api_key=api_key,
                base_url=self.provider.endpoint_url or None,
                timeout=self.provider.timeout_seconds,
                max_retries=0,
            )
        return self._openai

    async def _call_openai(self, request: ChatRequest) -> Tuple[str, Dict[str, Any]]:
        resp = await self._openai_client().chat.completions.create(
            model=request.model_id,
            messages=[
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            temperature=request.temperature,
            max_tokens=request.max_output_tokens,
        )
        text = (resp.choices[0].message.content or "") if resp.choices else ""
        meta = {"model": getattr(resp, "model", request.model_id)}
        if resp.choices and resp.choices[0].finish_reason:
            meta["finish_reason"] = resp.choices[0].finish_reason
        return text, meta

    def _mock_answer(self, request: ChatRequest) -> str:
        kind = self.provider.kind
        n_choices = int(request.metadata.get("n_choices", 4))
        if request.metadata.get("stage") == "knowledge":
            digest = hashlib.sha256(request.user_text.encode("utf-8")).hexdigest()
            return f"Knowledge notes {digest[:16]}: reading follows the chart and period above."
        if kind is ProviderKind.MOCK_FIXED:
            return self.provider.letter
        if kind is ProviderKind.MOCK_GOLD:
            gold = request.metadata.get("gold_letter")
            if not gold:
                raise ConfigurationError("mock-gold needs the gold letter in request metadata")
            return str(gold)
        if kind is ProviderKind.MOCK_UNIFORM:
            rng = random.Random(f"{self.provider.seed}:{request.request_hash}")
            return LETTERS[rng.randrange(n_choices)]
        # chart echo: the answer is a function of the prompt text alone
        digest = hashlib.sha256(request.user_text.encode("utf-8")).hexdigest()
        return f"{LETTERS[int(digest, 16) % n_choices]}\nprompt digest {digest[:16]}"

    async def _send(self, request: ChatRequest) -> Tuple[str, Dict[str, Any]]:
        if self._transport is not None:
            return await self._transport(request), {"provider": "custom"}
        if self.provider.is_mock:
            return self._mock_answer(request), {"provider": self.provider.describe()}
        return await self._call_openai(request)

    # ==================== Completion ====================

    async def complete(self, request: ChatRequest) -> ChatResponse:
        attempts: List[Dict[str, Any]] = []
        backoff = self.provider.retry_backoff or (0.0,)
        total = self.provider.retry_count + 1

        for attempt in range(1, total + 1):
            async with self._semaphore:
                self.in_flight += 1
                self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
                started = time.perf_counter()
                try:
                    text, meta = await self._send(request)
                except AUTH_ERRORS as e:
                    raise ConfigurationError(f"provider rejected credentials: {e}") from None
                except TRANSIENT_ERRORS as e:
                    attempts.append({"attempt": attempt, "error": f"{type(e).__name__}: {e}"})
                    logger.warning("llm_transient_error", model=request.model_id, attempt=attempt, error=str(e))
                except openai.APIError as e:
                    attempts.append({"attempt": attempt, "error": f"{type(e).__name__}: {e}"})
                    raise TransportError(f"provider error for model {request.model_id}", attempts) from None
                else:
                    latency_ms = int((time.perf_counter() - started) * 1000)
                    return ChatResponse(text, meta, from_cache=False, latency_ms=latency_ms)
                finally:
                    self.in_flight -= 1

            if attempt < total:
                await asyncio.sleep(backoff[min(attempt - 1, len(backoff) - 1)])

        raise TransportError(
            f"retries exhausted for model {request.model_id} after {total} attempts", attempts
        )


async def complete(request: ChatRequest, provider: ProviderConfig) -> ChatResponse:
    """One-off completion with a fresh client."""
    return await ChatClient(provider).complete(request)

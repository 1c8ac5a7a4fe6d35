import asyncio
import dataclasses

import httpx
import openai
import pytest

from errors import CacheIntegrityError, ConfigurationError, InputValidationError, TransportError
from llm.cache import ResponseCache, cached_complete
from llm.client import ChatClient, ChatRequest, ChatResponse, ProviderConfig, ProviderKind
from llm.extract import extract_choice

FAST = dict(retry_count=2, retry_backoff=(0.0,))


def _request(**overrides):
    fields = dict(model_id="m", system_text="system", user_text="user", metadata={"n_choices": 4})
    fields.update(overrides)
    return ChatRequest(**fields)


def _api_request():
    return httpx.Request("POST", "https://llm.invalid/v1/chat/completions")


# ==================== Requests ====================

def test_request_hash_covers_sent_fields_only():
    base = _request()
    assert base.request_hash == _request(metadata={"gold_letter": "B"}).request_hash
    for change in (dict(model_id="m2"), dict(system_text="s2"), dict(user_text="u2"),
                   dict(temperature=0.7), dict(max_output_tokens=64)):
        assert _request(**change).request_hash != base.request_hash


def test_provider_specs(config):
    assert ProviderConfig.parse("mock-uniform:7", config).seed == 7
    assert ProviderConfig.parse("mock-fixed:b", config).letter == "B"
    assert ProviderConfig.parse("openai", config).kind is ProviderKind.OPENAI_COMPATIBLE
    for bad in ("mock-fixed:Z", "mock-uniform:x", "claude"):
        with pytest.raises(ConfigurationError):
            ProviderConfig.parse(bad, config)


# ==================== Mock providers ====================

def test_mock_providers_answer_deterministically():
    gold = ChatClient(ProviderConfig(ProviderKind.MOCK_GOLD))
    fixed = ChatClient(ProviderConfig(ProviderKind.MOCK_FIXED, letter="C"))
    uniform = ChatClient(ProviderConfig(ProviderKind.MOCK_UNIFORM, seed=3))
    echo = ChatClient(ProviderConfig(ProviderKind.MOCK_ECHO))

    request = _request(metadata={"n_choices": 4, "gold_letter": "D"})
    assert asyncio.run(gold.complete(request)).text == "D"
    assert asyncio.run(fixed.complete(request)).text == "C"
    first = asyncio.run(uniform.complete(request)).text
    assert first == asyncio.run(uniform.complete(request)).text
    assert first in "ABCD"
    echoed = asyncio.run(echo.complete(request)).text
    assert echoed == asyncio.run(echo.complete(_request(metadata={"n_choices": 4}))).text
    assert echoed != asyncio.run(echo.complete(_request(user_text="another chart"))).text


def test_mock_gold_needs_the_gold_letter():
    with pytest.raises(ConfigurationError):
        asyncio.run(ChatClient(ProviderConfig(ProviderKind.MOCK_GOLD)).complete(_request()))


def test_knowledge_stage_gets_notes():
    client = ChatClient(ProviderConfig(ProviderKind.MOCK_GOLD))
    response = asyncio.run(client.complete(_request(metadata={"stage": "knowledge"})))
    assert response.text.startswith("Knowledge notes")


# ==================== Retries ====================

def test_transient_errors_are_retried():
    calls = []

    async def flaky(request):
        calls.append(request.request_hash)
        if len(calls) < 3:
            raise openai.APIConnectionError(request=_api_request())
        return "B"

    client = ChatClient(ProviderConfig(ProviderKind.OPENAI_COMPATIBLE, **FAST), transport=flaky)
    response = asyncio.run(client.complete(_request()))
    assert response.text == "B"
    assert len(calls) == 3


def test_exhausted_retries_raise_transport_error():
    async def down(request):
        raise openai.APIConnectionError(request=_api_request())

    client = ChatClient(ProviderConfig(ProviderKind.OPENAI_COMPATIBLE, **FAST), transport=down)
    with pytest.raises(TransportError) as info:
        asyncio.run(client.complete(_request()))
    assert len(info.value.attempts) == 3
    assert client.in_flight == 0


def test_rejected_credentials_are_configuration_errors():
    async def denied(request):
        response = httpx.Response(401, request=_api_request())
        raise openai.AuthenticationError("invalid key", response=response, body=None)

    client = ChatClient(ProviderConfig(ProviderKind.OPENAI_COMPATIBLE, **FAST), transport=denied)
    with pytest.raises(ConfigurationError):
        asyncio.run(client.complete(_request()))


def test_missing_credential(monkeypatch):
    monkeypatch.delenv("BAZI_TEST_KEY", raising=False)
    client = ChatClient(ProviderConfig(ProviderKind.OPENAI_COMPATIBLE, credential_env_var="BAZI_TEST_KEY"))
    with pytest.raises(ConfigurationError):
        asyncio.run(client.complete(_request()))


def test_concurrency_is_bounded():
    async def slow(request):
        await asyncio.sleep(0.01)
        return "A"

    client = ChatClient(ProviderConfig(ProviderKind.OPENAI_COMPATIBLE, max_parallel=3), transport=slow)

    async def burst():
        await asyncio.gather(*(client.complete(_request(user_text=f"q{i}")) for i in range(20)))

    asyncio.run(burst())
    assert 1 <= client.peak_in_flight <= 3


# ==================== Cache ====================

def test_cache_hits_and_misses(tmp_path):
    cache = ResponseCache(str(tmp_path))
    client = ChatClient(ProviderConfig(ProviderKind.MOCK_FIXED, letter="B"))
    request = _request(user_text="命主 辛金")

    first = asyncio.run(cached_complete(request, client, cache))
    second = asyncio.run(cached_complete(request, client, cache))
    assert not first.from_cache and second.from_cache
    assert second.text == "B"
    assert cache.stats() == {"hits": 1, "misses": 1}

    warmer = dataclasses.replace(request, temperature=0.5)
    assert not asyncio.run(cached_complete(warmer, client, cache)).from_cache
    assert cache.misses == 2


def test_cache_keeps_utf8_text(tmp_path):
    cache = ResponseCache(str(tmp_path))
    request = _request()
    cache.store(request, ChatResponse("答案 C：伤官格", {"provider": "custom"}))
    loaded = cache.load(request)
    assert loaded.text == "答案 C：伤官格"
    assert loaded.provider_meta == {"provider": "custom"}


def test_corrupt_cache_entry_is_reported(tmp_path):
    cache = ResponseCache(str(tmp_path))
    client = ChatClient(ProviderConfig(ProviderKind.MOCK_FIXED, letter="A"))
    request = _request()
    asyncio.run(cached_complete(request, client, cache))

    path = cache.path_for(request.request_hash)
    path.write_bytes(path.read_bytes()[:20])
    with pytest.raises(CacheIntegrityError):
        cache.load(request)


def test_tampered_cache_text_fails_checksum(tmp_path):
    cache = ResponseCache(str(tmp_path))
    request = _request()
    asyncio.run(cached_complete(request, ChatClient(ProviderConfig(ProviderKind.MOCK_FIXED, letter="A")), cache))
    path = cache.path_for(request.request_hash)
    path.write_text(path.read_text(encoding="utf-8").replace('"text": "A"', '"text": "B"'), encoding="utf-8")
    with pytest.raises(CacheIntegrityError):
        cache.load(request)


# ==================== Extraction ====================

@pytest.mark.parametrize("text,n_choices,expected", [
    ("B", 4, 1),
    ("**C**\nBecause the officer star is strong.", 4, 2),
    ("Answer: D", 4, 3),
    ("Final Answer: (A)", 4, 0),
    ("The best fit is B. The wealth star...", 4, 1),
    ("I would go with D here", 4, 3),
    ("Between A and C, I pick C", 4, 2),
    ("E", 4, None),
    ("H", 8, 7),
    ("no letter here", 4, None),
    ("", 2, None),
])
def test_extract_choice(text, n_choices, expected):
    assert extract_choice(text, n_choices) == expected


def test_extract_choice_bounds():
    for n in (1, 9):
        with pytest.raises(InputValidationError):
            extract_choice("A", n)

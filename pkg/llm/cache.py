"""
On-disk response cache.

One JSON file per request hash holding the request echo, the response text
and a sha256 checksum of both. Entries are written to a temp file and moved
into place, so a reader never sees a half-written entry.
"""

import asyncio
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import structlog

from errors import CacheIntegrityError
from llm.client import ChatClient, ChatRequest, ChatResponse

logger = structlog.get_logger(__name__)

CACHE_FORMAT = "response-cache/v1"


def _checksum(request_echo: Dict[str, Any], text: str) -> str:
    payload = json.dumps({"request": request_echo, "text": text}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: Dict[str, asyncio.Lock] = {}
        self.hits = 0
        self.misses = 0

    def path_for(self, request_hash: str) -> Path:
        return self.directory / f"{request_hash}.json"

    def lock_for(self, request_hash: str) -> asyncio.Lock:
        lock = self._locks.get(request_hash)
        if lock is None:
            lock = self._locks[request_hash] = asyncio.Lock()
        return lock

    def load(self, request: ChatRequest) -> Optional[ChatResponse]:
        """Stored response for the request, or None when absent."""
        path = self.path_for(request.request_hash)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_bytes().decode("utf-8"))
            echo, text, checksum = entry["request"], entry["text"], entry["checksum"]
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise CacheIntegrityError(f"unreadable cache entry {path.name}: {e}") from None
        if not isinstance(text, str) or _checksum(echo, text) != checksum:
            raise CacheIntegrityError(f"checksum mismatch in cache entry {path.name}")
        if echo != request.hashed_fields():
            raise CacheIntegrityError(f"cache entry {path.name} belongs to a different request")
        return ChatResponse(text, dict(entry.get("provider_meta") or {}), from_cache=True, latency_ms=0)

    def store(self, request: ChatRequest, response: ChatResponse) -> None:
        echo = request.hashed_fields()
        entry = {
            "format": CACHE_FORMAT,
            "request_hash": request.request_hash,
            "request": echo,
            "text": response.text,
            "provider_meta": response.provider_meta,
            "checksum": _checksum(echo, response.text),
        }
        path = self.path_for(request.request_hash)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_bytes(json.dumps(entry, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        os.replace(tmp, path)

    def stats(self) -> Dict[str, int]:
        return {"hits": self.hits, "misses": self.misses}


async def cached_complete(request: ChatRequest, client: ChatClient, cache: Optional[ResponseCache]) -> ChatResponse:
    """Serve from the cache when possible, otherwise call the provider and store the answer."""
    if cache is None:
        return await client.complete(request)

    async with cache.lock_for(request.request_hash):
        cached = cache.load(request)
        if cached is not None:
            cache.hits += 1
            logger.debug("cache_hit", request_hash=request.request_hash[:12])
            return cached
        cache.misses += 1
        logger.debug("cache_miss", request_hash=request.request_hash[:12])
        response = await client.complete(request)
        cache.store(request, response)
        return response

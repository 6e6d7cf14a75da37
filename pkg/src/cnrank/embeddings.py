"""Embedding providers for the similarity-based metric.

The HTTP provider posts {"texts": [...]} and expects {"embeddings": [...]}
where each entry is a list of per-token vectors for the corresponding
text. Anything satisfying metrics.EmbeddingProvider plugs in the same way.
"""

from __future__ import annotations

import httpx

from .errors import NetworkError


class HttpEmbeddingProvider:
    def __init__(
        self,
        endpoint: str,
        timeout: float = 60.0,
        batch_size: int = 32,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.batch_size = batch_size
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._cache: dict[str, list[list[float]]] = {}

    def encode(self, text: str) -> list[list[float]]:
        if text not in self._cache:
            self._cache[text] = self.encode_batch([text])[0]
        return self._cache[text]

    def encode_batch(self, texts: list[str]) -> list[list[list[float]]]:
        try:
            response = self._client.post(self.endpoint, json={"texts": texts})
            response.raise_for_status()
            body = response.json()
            return body["embeddings"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise NetworkError(f"embedding request failed: {exc}") from exc

"""Sentence embedding providers: precomputed JSONL files, a seeded hashing
embedder for tests and synthetic data, and a remote HTTP service with an
on-disk cache.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    MalformedJson,
    MissingIndex,
    ProtocolViolation,
    SchemaViolation,
    Transport,
    ZeroVector,
)
from .transcript_io import SentenceSpan

logger = logging.getLogger(__name__)

CACHE_ENV = "DERAIL_CACHE_DIR"
_TOKEN = re.compile(r"\w+")


@dataclass(frozen=True)
class EmbeddingSet:
    transcript_id: str
    mode: str
    vectors: np.ndarray  # (n_sentences, dim)
    provider: str

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _validated(transcript_id: str, mode: str, rows: Sequence[Sequence[float]], provider: str) -> EmbeddingSet:
    if not rows:
        raise MissingIndex(0, transcript_id)
    dim = len(rows[0])
    if dim < 1:
        raise DimensionMismatch(f"{transcript_id}: empty vector at index 0")
    for i, row in enumerate(rows):
        if len(row) != dim:
            raise DimensionMismatch(f"{transcript_id}: index {i} has dimension {len(row)}, expected {dim}")
    vectors = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(vectors)):
        raise SchemaViolation("vector", f"non-finite value in {transcript_id}")
    zero = np.flatnonzero(~np.any(vectors != 0.0, axis=1))
    if zero.size:
        raise ZeroVector(int(zero[0]))
    vectors.setflags(write=False)
    return EmbeddingSet(transcript_id, mode, vectors, provider)


def _parse_lines(lines: Iterable[str]) -> dict[tuple[str, str], dict[int, list[float]]]:
    grouped: dict[tuple[str, str], dict[int, list[float]]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"line {lineno}: {exc}") from exc
        if not isinstance(doc, dict):
            raise SchemaViolation("<root>", f"line {lineno} is not an object")
        tid, index, vector = doc.get("transcript_id"), doc.get("index"), doc.get("vector")
        if not isinstance(tid, str):
            raise SchemaViolation("transcript_id", f"line {lineno}")
        if isinstance(index, bool) or not isinstance(index, int) or index < 0:
            raise SchemaViolation("index", f"line {lineno}")
        if not isinstance(vector, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vector
        ):
            raise SchemaViolation("vector", f"line {lineno}")
        mode = doc.get("mode") or "grammatical"
        slot = grouped.setdefault((tid, mode), {})
        if index in slot:
            raise SchemaViolation("index", f"duplicate index {index} for {tid} (line {lineno})")
        slot[index] = vector
    return grouped


def _assemble(tid: str, mode: str, by_index: dict[int, list[float]], provider: str) -> EmbeddingSet:
    for i in range(len(by_index)):
        if i not in by_index:
            raise MissingIndex(i, tid)
    return _validated(tid, mode, [by_index[i] for i in range(len(by_index))], provider)


def load_embeddings(raw: bytes | str, provider: str = "file") -> EmbeddingSet:
    """Load a JSONL stream holding exactly one transcript's vectors."""
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    grouped = _parse_lines(text.splitlines())
    if len(grouped) != 1:
        raise SchemaViolation("transcript_id", f"expected one transcript, found {len(grouped)}")
    (tid, mode), by_index = next(iter(grouped.items()))
    return _assemble(tid, mode, by_index, provider)


def read_embedding_file(path: str | Path) -> dict[tuple[str, str], EmbeddingSet]:
    """Load every (transcript_id, mode) set from a JSONL file."""
    with open(path, encoding="utf-8") as fh:
        grouped = _parse_lines(fh)
    return {key: _assemble(key[0], key[1], by_index, "file") for key, by_index in sorted(grouped.items())}


def embedding_lines(sets: Iterable[EmbeddingSet]) -> str:
    out = []
    for es in sets:
        for i, row in enumerate(es.vectors):
            out.append(json.dumps({
                "transcript_id": es.transcript_id,
                "mode": es.mode,
                "index": i,
                "vector": [float(v) for v in row],
            }))
    return "".join(line + "\n" for line in out)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@functools.lru_cache(maxsize=200_000)
def token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Unit vector for ``token`` drawn from a PRNG stream keyed by (seed, token)."""
    digest = hashlib.sha256(f"{seed}\x00{token}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def embed_text(text: str, dim: int, seed: int) -> np.ndarray:
    tokens = tokenize(text)
    if not tokens:
        e0 = np.zeros(dim)
        e0[0] = 1.0
        return e0
    v = np.sum([token_vector(t, dim, seed) for t in tokens], axis=0) / len(tokens)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        e0 = np.zeros(dim)
        e0[0] = 1.0
        return e0
    return v / norm


def test_embedder(
    spans: Sequence[SentenceSpan],
    dim: int = 128,
    seed: int = 0,
    transcript_id: str = "",
    mode: str | None = None,
) -> EmbeddingSet:
    """Deterministic bag-of-hashed-tokens sentence embedder."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if mode is None:
        mode = spans[0].source if spans else "grammatical"
    rows = [embed_text(s.text, dim, seed) for s in spans]
    return _validated(transcript_id, mode, rows, f"test(dim={dim},seed={seed})")


test_embedder.__test__ = False  # not a pytest test function


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RemoteEmbedder:
    """Client for ``POST {"model", "inputs"} -> {"vectors"}`` embedding services.

    Vectors are cached per sentence under
    ``<cache_dir>/<provider>/<model>/<sha256(text)>.json``. A transcript's
    vectors are only cached once every batch for it has succeeded.
    """

    endpoint: str
    model: str
    cache_dir: Path | None = None
    provider: str = "remote"
    timeout: float = 30.0
    retries: int = 3
    batch_size: int = 64
    max_in_flight: int = 4
    backoff: float = 0.5
    requests_made: int = 0

    def __post_init__(self):
        if self.cache_dir is None:
            env = os.environ.get(CACHE_ENV)
            self.cache_dir = Path(env) if env else Path("cache")
        self.cache_dir = Path(self.cache_dir)

    def _cache_path(self, text: str) -> Path:
        return self.cache_dir / self.provider / self.model / f"{text_key(text)}.json"

    def _post(self, inputs: list[str]) -> list[list[float]]:
        body = json.dumps({"model": self.model, "inputs": inputs}).encode("utf-8")
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            req = urllib.request.Request(
                self.endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
            )
            self.requests_made += 1
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = resp.read()
            except urllib.error.HTTPError as exc:
                last = exc
                logger.warning("embedding request failed with HTTP %s (attempt %d)", exc.code, attempt + 1)
                continue
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last = exc
                logger.warning("embedding request failed: %s (attempt %d)", exc, attempt + 1)
                continue
            try:
                doc = json.loads(payload)
            except json.JSONDecodeError as exc:
                raise ProtocolViolation(f"response is not JSON: {exc}") from exc
            vectors = doc.get("vectors") if isinstance(doc, dict) else None
            if not isinstance(vectors, list):
                raise ProtocolViolation("response lacks a 'vectors' list")
            if len(vectors) != len(inputs):
                raise ProtocolViolation(f"sent {len(inputs)} inputs, received {len(vectors)} vectors")
            for vec in vectors:
                if not isinstance(vec, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec
                ):
                    raise ProtocolViolation("vectors must be lists of numbers")
            return vectors
        raise Transport(f"giving up after {self.retries + 1} attempts: {last}")

    def fetch(self, spans: Sequence[SentenceSpan], transcript_id: str = "", mode: str | None = None) -> EmbeddingSet:
        if mode is None:
            mode = spans[0].source if spans else "grammatical"
        texts = [s.text for s in spans]
        found: dict[str, list[float]] = {}
        for text in set(texts):
            path = self._cache_path(text)
            if path.exists():
                found[text] = json.loads(path.read_text(encoding="utf-8"))
        missing = sorted({t for t in texts if t not in found})
        batches = [missing[i:i + self.batch_size] for i in range(0, len(missing), self.batch_size)]
        if batches:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._post, batches))
            fresh = {t: v for batch, vecs in zip(batches, results) for t, v in zip(batch, vecs)}
            # validate before touching the cache
            es = _validated(transcript_id, mode, [fresh.get(t, found.get(t)) for t in texts], self.provider)
            for text, vec in sorted(fresh.items()):
                path = self._cache_path(text)
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_text(json.dumps([float(v) for v in vec]), encoding="utf-8")
                os.replace(tmp, path)
            return es
        return _validated(transcript_id, mode, [found[t] for t in texts], self.provider)


def fetch_embeddings(
    spans: Sequence[SentenceSpan],
    endpoint: str,
    model: str,
    timeout: float = 30.0,
    retries: int = 3,
    transcript_id: str = "",
    cache_dir: str | Path | None = None,
) -> EmbeddingSet:
    client = RemoteEmbedder(endpoint, model, Path(cache_dir) if cache_dir else None, timeout=timeout, retries=retries)
    return client.fetch(spans, transcript_id)

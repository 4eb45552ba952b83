"""Sentence-level semantic coherence series and their aggregations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Sequence

import numpy as np

from .embed import EmbeddingSet
from .errors import (
    DimensionMismatch,
    EmptySeries,
    TooFewPairs,
    TooFewSentences,
    TooFewValues,
    ZeroCentroid,
    ZeroMean,
    ZeroVector,
)
from .metrics import spearman
from .pause import raw_gaps
from .transcript_io import Transcript
from .tsfeat import FeatureCatalog, FeatureVector, featurize

Strategy = Literal["sequential", "static_centroid", "cumulative_centroid"]
STRATEGIES: tuple[str, ...] = ("sequential", "static_centroid", "cumulative_centroid")

_ZERO_NORM = 1e-300


@dataclass(frozen=True)
class CoherenceSeries:
    strategy: str
    values: tuple[float, ...]
    aligned_sentence_index: tuple[int, ...]


@dataclass(frozen=True)
class CorrelationReport:
    scope: str
    rho: float
    p: float
    n_pairs: int
    transcript_id: str | None = None


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na, nb = float(a @ a), float(b @ b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector(0 if na == 0.0 else 1)
    # sqrt of the product of squared norms: exactly 1 for identical vectors
    return float(min(1.0, max(-1.0, float(a @ b) / math.sqrt(na * nb))))


def _cos_rows(rows: np.ndarray, refs: np.ndarray) -> np.ndarray:
    sq_r = np.einsum("ij,ij->i", rows, rows)
    sq_c = np.einsum("ij,ij->i", refs, refs)
    if np.any(np.sqrt(sq_c) <= _ZERO_NORM):
        raise ZeroCentroid("centroid is numerically zero")
    sims = np.einsum("ij,ij->i", rows, refs) / np.sqrt(sq_r * sq_c)
    return np.clip(sims, -1.0, 1.0)


def coherence_series(e: EmbeddingSet, strategy: str = "sequential") -> CoherenceSeries:
    v = np.asarray(e.vectors, dtype=float)
    n = v.shape[0]
    if strategy == "sequential":
        if n < 2:
            raise TooFewSentences(strategy, n)
        sims = _cos_rows(v[1:], v[:-1])
        idx = range(1, n)
    elif strategy == "static_centroid":
        if n < 1:
            raise TooFewSentences(strategy, n)
        centroid = v.mean(axis=0)
        sims = _cos_rows(v, np.broadcast_to(centroid, v.shape))
        idx = range(n)
    elif strategy == "cumulative_centroid":
        if n < 2:
            raise TooFewSentences(strategy, n)
        # centroid of sentences 0..i-1 for i = 1..n-1
        running = np.cumsum(v, axis=0)[:-1] / np.arange(1, n)[:, None]
        sims = _cos_rows(v[1:], running)
        idx = range(1, n)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return CoherenceSeries(strategy, tuple(float(s) for s in sims), tuple(idx))


def aggregate_minimum(s: CoherenceSeries) -> float:
    if not s.values:
        raise EmptySeries(f"empty {s.strategy} series")
    return min(s.values)


def aggregate_timeseries(s: CoherenceSeries, cat: FeatureCatalog | None = None) -> FeatureVector:
    return featurize(s.values, cat).prefixed("coh__")


def _pairs(t: Transcript, e: EmbeddingSet) -> tuple[list[float], list[float]]:
    if e.mode != "asr_segment":
        raise ValueError("pause/coherence pairing needs asr_segment embeddings")
    if len(e) != len(t.segments):
        raise DimensionMismatch(
            f"{t.id}: {len(t.segments)} segments but {len(e)} embeddings"
        )
    if len(e) < 2:
        return [], []
    return raw_gaps(t), list(coherence_series(e, "sequential").values)


def pause_coherence_correlation(
    pairs: Iterable[tuple[Transcript, EmbeddingSet]],
    scope: str = "per_transcript",
) -> list[CorrelationReport]:
    """Spearman correlation between the pause preceding each sentence and its
    sequential similarity to the previous sentence.

    ``per_transcript`` yields one report per transcript; ``pooled`` one report
    over the concatenated pairs of the whole corpus.
    """
    reports = []
    pooled_gaps: list[float] = []
    pooled_sims: list[float] = []
    for t, e in pairs:
        gaps, sims = _pairs(t, e)
        if scope == "pooled":
            pooled_gaps += gaps
            pooled_sims += sims
            continue
        if len(gaps) < 3:
            raise TooFewPairs(f"{t.id}: {len(gaps)} aligned pairs")
        rho, p = spearman(gaps, sims)
        reports.append(CorrelationReport(scope, rho, p, len(gaps), t.id))
    if scope == "pooled":
        if len(pooled_gaps) < 3:
            raise TooFewPairs(f"{len(pooled_gaps)} aligned pairs")
        rho, p = spearman(pooled_gaps, pooled_sims)
        reports.append(CorrelationReport(scope, rho, p, len(pooled_gaps)))
    elif scope != "per_transcript":
        raise ValueError(f"unknown scope {scope!r}")
    return reports


def coefficient_of_variation(series_values: Sequence[float]) -> float:
    """Sample standard deviation over mean, as a percentage."""
    x = [float(v) for v in series_values]
    n = len(x)
    if n < 2:
        raise TooFewValues(f"need at least 2 values, got {n}")
    mean = float(sum(map(Fraction, x)) / n)  # exact for constant series
    if mean == 0.0:
        raise ZeroMean("coefficient of variation undefined for zero mean")
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in x) / (n - 1))
    return sd / mean * 100.0


def cv_report(series: Iterable[CoherenceSeries]) -> list[tuple[str, float, int]]:
    """Pooled CV per strategy: ``(strategy, cv_percent, n_values)`` rows."""
    pooled: dict[str, list[float]] = {}
    for s in series:
        pooled.setdefault(s.strategy, []).extend(s.values)
    return [
        (strategy, coefficient_of_variation(pooled[strategy]), len(pooled[strategy]))
        for strategy in STRATEGIES
        if strategy in pooled
    ]

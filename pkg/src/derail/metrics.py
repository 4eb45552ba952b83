"""Evaluation statistics: rank correlation, ROC AUC, weighted kappa,
word/character error rate and the Wilcoxon signed-rank test."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    AllZeroDifferences,
    DegenerateRanks,
    EmptyReference,
    LengthMismatch,
    OutOfRange,
    SingleClass,
)

EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class SeverityThreshold:
    scale: str
    cutoff: float

    def __post_init__(self):
        limits = SCALE_RANGES.get(self.scale)
        if limits and not (limits[0] <= self.cutoff <= limits[1]):
            raise OutOfRange(f"cutoff {self.cutoff} outside {self.scale} range {limits}")


SCALE_RANGES = {"TALD": (0.0, 4.0), "TLC": (0.0, 4.0), "TLI": (0.0, 1.0)}
DEFAULT_CUTOFFS = {"TALD": 3.0, "TLI": 0.75, "TLC": 3.0}


def default_threshold(scale: str | None) -> SeverityThreshold:
    if scale in DEFAULT_CUTOFFS:
        return SeverityThreshold(scale, DEFAULT_CUTOFFS[scale])
    return SeverityThreshold(scale or "other", 3.0)


def rankdata(values: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1, ties receiving the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=float)
    sx = x[order]
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Spearman's rho with mid-ranks and a two-sided t-approximation p-value."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} != {len(y)}")
    n = len(x)
    if n < 3:
        raise DegenerateRanks(f"need at least 3 pairs, got {n}")
    rx, ry = rankdata(x), rankdata(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateRanks("constant input has no rank variance")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return rho, min(1.0, p)


def roc_auc(labels: Sequence[bool], scores: Sequence[float]) -> float:
    """Probability that a positive outscores a negative, ties counting one half."""
    if len(labels) != len(scores):
        raise LengthMismatch(f"{len(labels)} != {len(scores)}")
    lab = np.asarray(labels, dtype=bool)
    n_pos = int(lab.sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"{n_pos} positives, {n_neg} negatives")
    ranks = rankdata(scores)
    # rank sums are half-integers, so the numerator is exact
    u = float(ranks[lab].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def dichotomize(scores: Sequence[float], th: SeverityThreshold) -> list[bool]:
    return [s >= th.cutoff for s in scores]


def quadratic_weighted_kappa(a: Sequence[int], b: Sequence[int], k: int) -> float:
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} != {len(b)}")
    if k < 2:
        raise OutOfRange("need at least 2 categories")
    ra, rb = np.asarray(a, dtype=int), np.asarray(b, dtype=int)
    for r in (ra, rb):
        if r.size and (r.min() < 0 or r.max() > k - 1):
            raise OutOfRange(f"ratings must lie in [0, {k - 1}]")
    n = len(ra)
    observed = np.zeros((k, k))
    np.add.at(observed, (ra, rb), 1.0)
    observed /= n
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    idx = np.arange(k)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2
    denom = float((weights * expected).sum())
    if denom == 0.0:
        # both raters used a single identical category
        return 1.0
    return 1.0 - float((weights * observed).sum()) / denom


_PUNCT = re.compile(r"[^\w\s]")


def normalize_for_wer(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit costs.

    Row-wise dynamic programming; the insertion recurrence along a row is
    resolved with a running minimum so each row is a handful of vector ops.
    """
    vocab: dict = {}
    r = np.array([vocab.setdefault(t, len(vocab)) for t in ref], dtype=np.int64)
    h = np.array([vocab.setdefault(t, len(vocab)) for t in hyp], dtype=np.int64)
    if len(r) == 0:
        return len(h)
    if len(h) == 0:
        return len(r)
    cols = np.arange(len(h) + 1, dtype=np.int64)
    prev = cols.copy()
    for i in range(1, len(r) + 1):
        cand = np.empty_like(prev)
        cand[0] = i
        cand[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (h != r[i - 1]))
        # row[j] = min_k<=j cand[k] + (j - k)
        prev = np.minimum.accumulate(cand - cols) + cols
    return int(prev[-1])


def wer_cer(reference: str, hypothesis: str, level: str = "word") -> float:
    ref, hyp = normalize_for_wer(reference), normalize_for_wer(hypothesis)
    if level == "word":
        ref_units, hyp_units = ref.split(), hyp.split()
    elif level == "char":
        ref_units, hyp_units = list(ref), list(hyp)
    else:
        raise ValueError(f"unknown level {level!r}")
    if not ref_units:
        raise EmptyReference("reference is empty after normalization")
    return edit_distance(ref_units, hyp_units) / len(ref_units)


def _signed_rank_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    """Number of sign assignments giving each value of 2*W+."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(paired_a: Sequence[float], paired_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test; returns ``(W, p)`` with W = min(W+, W-).

    Zero differences are dropped. The p-value is exact (enumerated over sign
    patterns, mid-ranks for ties) up to 25 non-zero pairs, otherwise a normal
    approximation with tie and continuity correction.
    """
    if len(paired_a) != len(paired_b):
        raise LengthMismatch(f"{len(paired_a)} != {len(paired_b)}")
    d = np.asarray(paired_a, dtype=float) - np.asarray(paired_b, dtype=float)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_WILCOXON_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_counts(doubled)
        tail = int(sum(counts[: int(round(2 * w)) + 1]))
        p = 2.0 * tail / 2 ** n
        return w, min(1.0, p)
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return w, min(1.0, 2.0 * float(stats.norm.sf(z)))

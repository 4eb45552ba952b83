"""Pause durations between consecutive utterances and their summary statistics."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from fractions import Fraction

from .transcript_io import Transcript, speech_span

SUMMARY_FIELDS = ("max", "mean", "median", "min", "count", "proportion")


@dataclass(frozen=True)
class PauseSeries:
    gaps: tuple[float, ...]
    raw_gaps: tuple[float, ...]
    span: float
    retained_threshold: float = 0.0


@dataclass(frozen=True)
class PauseSummary:
    max: float
    mean: float
    median: float
    min: float
    count: int
    proportion: float
    degenerate: bool = False

    def as_row(self) -> list[float]:
        return [self.max, self.mean, self.median, self.min, float(self.count), self.proportion]


def raw_gaps(t: Transcript) -> list[float]:
    """Gap before each utterance after the first; overlaps clamp to 0."""
    segs = t.segments
    return [max(0.0, segs[i + 1].start - segs[i].end) for i in range(len(segs) - 1)]


def extract_pauses(t: Transcript, min_pause: float = 0.0) -> PauseSeries:
    if min_pause < 0:
        raise ValueError("min_pause must be non-negative")
    start, end = speech_span(t)
    raw = raw_gaps(t)
    return PauseSeries(
        gaps=tuple(g for g in raw if g > min_pause),
        raw_gaps=tuple(raw),
        span=end - start,
        retained_threshold=min_pause,
    )


def summarize_pauses(p: PauseSeries) -> PauseSummary:
    gaps = p.gaps
    if not gaps:
        return PauseSummary(0.0, 0.0, 0.0, 0.0, 0, 0.0, degenerate=True)
    # exact rational sum, one rounding per statistic
    total = sum(map(Fraction, gaps))
    return PauseSummary(
        max=max(gaps),
        mean=float(total / len(gaps)),
        median=statistics.median(gaps),
        min=min(gaps),
        count=len(gaps),
        proportion=float(total / Fraction(p.span)) if p.span > 0 else 0.0,
    )


def summary_csv_row(transcript_id: str, s: PauseSummary) -> str:
    return ",".join(
        [transcript_id]
        + [f"{v:.6f}" for v in (s.max, s.mean, s.median, s.min)]
        + [str(s.count), f"{s.proportion:.6f}"]
    )


SUMMARY_CSV_HEADER = "transcript_id," + ",".join(SUMMARY_FIELDS)

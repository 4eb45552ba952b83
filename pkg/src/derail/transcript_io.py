"""Time-aligned transcript parsing, speaker filtering and sentence segmentation.

The on-disk format (``v1``) is one JSON object per transcript::

    {"id": "t1", "scale": "TALD", "label": 2.5, "group_id": null,
     "segments": [{"start": 0.0, "end": 1.2, "text": "...", "speaker": "SPEAKER_01"}]}

A corpus is a JSON Lines file holding one such object per line.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Literal

from .errors import (
    EmptyCorpus,
    EmptyTranscript,
    MalformedJson,
    NoMatchingSpeaker,
    SchemaViolation,
)

SentenceMode = Literal["grammatical", "asr_segment"]

KNOWN_SCALES = ("TALD", "TLC", "TLI")

# Lowercased, trailing period removed. Matched against the word that ends in ".".
ABBREVIATIONS = frozenset(
    ["mr", "mrs", "ms", "dr", "prof", "st", "vs", "etc", "e.g", "i.e", "approx", "jr", "sr", "no"]
)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    text: str
    speaker: str | None = None

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Transcript:
    id: str
    segments: tuple[Segment, ...]
    label: float | None = None
    scale: str | None = None
    group_id: str | None = None

    def text(self) -> str:
        return normalize_whitespace(" ".join(s.text for s in self.segments))


@dataclass(frozen=True)
class SentenceSpan:
    index: int
    text: str
    source: SentenceMode
    start: float | None = None
    end: float | None = None


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def _number(seg: dict, key: str, where: str) -> float:
    if key not in seg:
        raise SchemaViolation(key, f"missing in {where}")
    value = seg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(key, f"non-numeric value {value!r} in {where}")
    value = float(value)
    if not math.isfinite(value):
        raise SchemaViolation(key, f"non-finite value in {where}")
    return value


def _optional_str(doc: dict, key: str) -> str | None:
    value = doc.get(key)
    if value is not None and not isinstance(value, str):
        raise SchemaViolation(key, "expected string or null")
    return value


def transcript_from_dict(doc: object) -> Transcript:
    """Validate a decoded v1 document and build a :class:`Transcript`."""
    if not isinstance(doc, dict):
        raise SchemaViolation("<root>", "expected a JSON object")
    tid = doc.get("id")
    if not isinstance(tid, str) or not tid:
        raise SchemaViolation("id", "missing or not a non-empty string")
    raw_segments = doc.get("segments")
    if not isinstance(raw_segments, list):
        raise SchemaViolation("segments", "missing or not a list")

    label = doc.get("label")
    if label is not None:
        if isinstance(label, bool) or not isinstance(label, (int, float)) or not math.isfinite(label):
            raise SchemaViolation("label", "expected finite number or null")
        label = float(label)

    segments = []
    for i, seg in enumerate(raw_segments):
        where = f"segment {i}"
        if not isinstance(seg, dict):
            raise SchemaViolation("segments", f"{where} is not an object")
        start = _number(seg, "start", where)
        end = _number(seg, "end", where)
        if end < start:
            raise SchemaViolation("end", "end < start")
        if start < 0:
            raise SchemaViolation("start", "negative start time")
        text = seg.get("text")
        if not isinstance(text, str):
            raise SchemaViolation("text", f"missing or not a string in {where}")
        if not text.strip():
            raise SchemaViolation("text", f"empty text in {where}")
        speaker = _optional_str(seg, "speaker")
        segments.append((start, end, i, Segment(start, end, text, speaker)))

    if not segments:
        raise EmptyTranscript(f"transcript {tid} has no segments")
    # ties on start: by end, then original file order
    segments.sort(key=lambda item: item[:3])
    return Transcript(
        id=tid,
        segments=tuple(item[3] for item in segments),
        label=label,
        scale=_optional_str(doc, "scale"),
        group_id=_optional_str(doc, "group_id"),
    )


def parse_transcript(raw: bytes | str, schema: str = "v1") -> Transcript:
    if schema != "v1":
        raise ValueError(f"unsupported schema {schema!r}")
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    return transcript_from_dict(doc)


def transcript_to_dict(t: Transcript) -> dict:
    return {
        "id": t.id,
        "scale": t.scale,
        "label": t.label,
        "group_id": t.group_id,
        "segments": [
            {"start": s.start, "end": s.end, "text": s.text, "speaker": s.speaker} for s in t.segments
        ],
    }


def serialize_transcript(t: Transcript) -> str:
    return json.dumps(transcript_to_dict(t), ensure_ascii=False)


def iter_corpus_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, line)`` for every non-blank line of a JSONL file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield lineno, line


def read_corpus(path: str | Path) -> list[Transcript]:
    corpus = []
    seen = set()
    for lineno, line in iter_corpus_lines(path):
        try:
            t = parse_transcript(line)
        except SchemaViolation as exc:
            raise SchemaViolation(exc.field, f"{exc.reason} (line {lineno})") from exc
        except (MalformedJson, EmptyTranscript) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from exc
        if t.id in seen:
            raise SchemaViolation("id", f"duplicate id {t.id!r} (line {lineno})")
        seen.add(t.id)
        corpus.append(t)
    if not corpus:
        raise EmptyCorpus(f"{path} contains no transcripts")
    return corpus


def write_corpus_lines(corpus: Iterable[Transcript]) -> str:
    return "".join(serialize_transcript(t) + "\n" for t in corpus)


def has_speaker_tags(t: Transcript) -> bool:
    return any(s.speaker is not None for s in t.segments)


def filter_speaker(t: Transcript, keep: str) -> Transcript:
    """Keep only the segments spoken by ``keep``.

    Transcripts without any speaker tags are monologues and pass through
    unchanged.
    """
    if not has_speaker_tags(t):
        return t
    kept = tuple(s for s in t.segments if s.speaker == keep)
    if not kept:
        raise NoMatchingSpeaker(f"transcript {t.id} has no segments for speaker {keep!r}")
    return replace(t, segments=kept)


_TERMINAL = re.compile(r"[.?!]")


def _is_abbreviation(text: str, dot_pos: int) -> bool:
    if text[dot_pos] != ".":
        return False
    word_start = text.rfind(" ", 0, dot_pos) + 1
    word = text[word_start:dot_pos].lower()
    return word in ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence split of whitespace-normalized text.

    A sentence ends at ``.``, ``?`` or ``!`` followed by a space and an
    uppercase letter, or by the end of the text. Periods closing one of
    :data:`ABBREVIATIONS` never end a sentence.
    """
    text = normalize_whitespace(text)
    if not text:
        return []
    sentences = []
    begin = 0
    for m in _TERMINAL.finditer(text):
        pos = m.start()
        nxt = pos + 1
        at_end = nxt == len(text)
        if not at_end and not (text[nxt] == " " and nxt + 1 < len(text) and text[nxt + 1].isupper()):
            continue
        if _is_abbreviation(text, pos):
            continue
        sentences.append(text[begin:nxt])
        begin = nxt + 1
    if begin < len(text):
        sentences.append(text[begin:])
    return sentences


def segment_sentences(t: Transcript, mode: SentenceMode = "grammatical") -> list[SentenceSpan]:
    if not t.segments:
        raise EmptyTranscript(f"transcript {t.id} has no segments")
    if mode == "asr_segment":
        return [
            SentenceSpan(i, normalize_whitespace(s.text), "asr_segment", s.start, s.end)
            for i, s in enumerate(t.segments)
        ]
    if mode == "grammatical":
        return [SentenceSpan(i, s, "grammatical") for i, s in enumerate(split_sentences(t.text()))]
    raise ValueError(f"unknown sentence mode {mode!r}")


def speech_span(t: Transcript) -> tuple[float, float]:
    if not t.segments:
        raise EmptyTranscript(f"transcript {t.id} has no segments")
    return min(s.start for s in t.segments), max(s.end for s in t.segments)

"""Synthetic labeled corpora with planted disorganization in pauses and semantics.

Each transcript draws a disorganization level ``d ~ U[0, 1]`` and injects it
through two independent channels:

* pauses: inter-segment gaps are log-normal with log-std
  ``pause_log_std + pause_log_std_slope * d``;
* semantics: every sentence is a bag of ``tokens_per_sentence`` synthetic
  tokens. Consecutive sentences share all but ``drift_tokens`` tokens, except
  at topic jumps (probability ``jump_prob + jump_prob_slope * d``) where a
  fraction ``jump_frac + jump_frac_slope * d`` of the bag is replaced by new
  tokens. Under the hashing test embedder this is a random walk on the unit
  sphere whose jump angle grows with ``d``.

Labels are ``clip(4 d + N(0, label_noise), 0, 4)`` on a pseudo-TALD scale.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .embed import EmbeddingSet, test_embedder
from .errors import InvalidConfig
from .transcript_io import Segment, Transcript, segment_sentences

SCALE = "synthetic"

# independent PRNG streams per transcript
_LEVEL, _PAUSE, _DRIFT, _LABEL = range(4)


@dataclass(frozen=True)
class SynthConfig:
    n_transcripts: int = 120
    min_sentences: int = 15
    max_sentences: int = 30
    dim: int = 128
    seed: int = 0
    tokens_per_sentence: int = 24
    drift_tokens: int = 1
    pause_log_mean: float = -1.0
    pause_log_std: float = 0.3
    pause_log_std_slope: float = 0.9
    jump_prob: float = 0.0
    jump_prob_slope: float = 0.2
    jump_frac: float = 0.2
    jump_frac_slope: float = 0.6
    label_noise: float = 0.3
    fixed_d: float | None = None

    def validate(self) -> "SynthConfig":
        probs = {
            "jump_prob": self.jump_prob,
            "jump_prob + jump_prob_slope": self.jump_prob + self.jump_prob_slope,
            "jump_frac": self.jump_frac,
            "jump_frac + jump_frac_slope": self.jump_frac + self.jump_frac_slope,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise InvalidConfig(f"{name} = {p} outside [0, 1]")
        if self.fixed_d is not None and not 0.0 <= self.fixed_d <= 1.0:
            raise InvalidConfig("fixed_d must lie in [0, 1]")
        if self.dim < 8:
            raise InvalidConfig("dim must be >= 8")
        if self.n_transcripts < 1:
            raise InvalidConfig("n_transcripts must be >= 1")
        if not 2 <= self.min_sentences <= self.max_sentences:
            raise InvalidConfig("need 2 <= min_sentences <= max_sentences")
        if not 0 <= self.drift_tokens < self.tokens_per_sentence:
            raise InvalidConfig("need 0 <= drift_tokens < tokens_per_sentence")
        if self.pause_log_std < 0 or self.pause_log_std + self.pause_log_std_slope < 0:
            raise InvalidConfig("pause log-std must be non-negative")
        if self.label_noise < 0:
            raise InvalidConfig("label_noise must be non-negative")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthCorpus:
    corpus: list[Transcript]
    embeddings: dict[tuple[str, str], EmbeddingSet]
    truth: dict[str, float]


def _stream(cfg: SynthConfig, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, index, stream])


def _sentences(cfg: SynthConfig, index: int, n: int, d: float) -> list[str]:
    rng = _stream(cfg, index, _DRIFT)
    counter = 0

    def fresh(k):
        nonlocal counter
        out = [f"x{index}t{counter + i}" for i in range(k)]
        counter += k
        return out

    p_jump = cfg.jump_prob + cfg.jump_prob_slope * d
    n_jump = int(round((cfg.jump_frac + cfg.jump_frac_slope * d) * cfg.tokens_per_sentence))
    bag = fresh(cfg.tokens_per_sentence)
    bags = [bag]
    for _ in range(n - 1):
        k = n_jump if rng.random() < p_jump else cfg.drift_tokens
        k = max(k, cfg.drift_tokens)
        bag = list(bag)
        for pos, tok in zip(sorted(rng.choice(len(bag), size=k, replace=False)), fresh(k)):
            bag[pos] = tok
        bags.append(bag)
    texts = []
    for b in bags:
        words = list(b)
        words[0] = words[0].capitalize()
        texts.append(" ".join(words) + ".")
    return texts


def _transcript(cfg: SynthConfig, index: int) -> tuple[Transcript, float]:
    level = _stream(cfg, index, _LEVEL)
    d = float(level.uniform(0.0, 1.0)) if cfg.fixed_d is None else float(cfg.fixed_d)
    n = int(level.integers(cfg.min_sentences, cfg.max_sentences + 1))
    texts = _sentences(cfg, index, n, d)

    pauses = _stream(cfg, index, _PAUSE)
    sigma = cfg.pause_log_std + cfg.pause_log_std_slope * d
    gaps = pauses.lognormal(cfg.pause_log_mean, sigma, size=n - 1)
    durations = pauses.uniform(1.0, 4.0, size=n)
    segments = []
    t = 0.0
    for i in range(n):
        if i:
            t += float(gaps[i - 1])
        start = round(t, 6)
        t += float(durations[i])
        end = round(t, 6)
        segments.append(Segment(start, end, texts[i], None))

    label_rng = _stream(cfg, index, _LABEL)
    label = float(np.clip(4.0 * d + label_rng.normal(0.0, cfg.label_noise), 0.0, 4.0))
    tid = f"syn{cfg.seed}_{index:04d}"
    return Transcript(tid, tuple(segments), label=label, scale=SCALE), d


def generate(cfg: SynthConfig = SynthConfig()) -> SynthCorpus:
    cfg.validate()
    corpus, embeddings, truth = [], {}, {}
    for i in range(cfg.n_transcripts):
        t, d = _transcript(cfg, i)
        corpus.append(t)
        truth[t.id] = d
        for mode in ("asr_segment", "grammatical"):
            spans = segment_sentences(t, mode)
            embeddings[(t.id, mode)] = test_embedder(spans, cfg.dim, cfg.seed, t.id, mode)
    return SynthCorpus(corpus, embeddings, truth)


def truth_csv(sc: SynthCorpus) -> str:
    lines = ["transcript_id,d,label"]
    for t in sc.corpus:
        lines.append(f"{t.id},{sc.truth[t.id]!r},{t.label!r}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: SynthConfig, **kw) -> SynthConfig:
    return replace(cfg, **kw)

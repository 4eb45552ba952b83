import math

import numpy as np
import pytest
from scipy import stats

from derail.coherence import aggregate_minimum, coherence_series
from derail.embed import embedding_lines
from derail.errors import InvalidConfig
from derail.metrics import spearman
from derail.pause import raw_gaps
from derail.synth import SynthConfig, generate, truth_csv, with_overrides
from derail.transcript_io import write_corpus_lines


def _bytes(sc):
    return (write_corpus_lines(sc.corpus), embedding_lines(sc.embeddings[k] for k in sorted(sc.embeddings)),
            truth_csv(sc))


def _min_coh(sc, t):
    return aggregate_minimum(coherence_series(sc.embeddings[(t.id, "grammatical")], "sequential"))


def test_deterministic():
    cfg = SynthConfig(n_transcripts=10, seed=3)
    assert _bytes(generate(cfg)) == _bytes(generate(cfg))


def test_distinct_seeds():
    a = generate(SynthConfig(n_transcripts=5, seed=1))
    b = generate(SynthConfig(n_transcripts=5, seed=2))
    assert _bytes(a)[0] != _bytes(b)[0]


def test_transcript_shape():
    cfg = SynthConfig(n_transcripts=20, seed=4)
    sc = generate(cfg)
    for t in sc.corpus:
        assert cfg.min_sentences <= len(t.segments) <= cfg.max_sentences
        assert t.scale == "synthetic" and 0.0 <= t.label <= 4.0
        for s in t.segments:
            assert 1.0 - 1e-6 <= s.end - s.start <= 4.0 + 1e-6
        assert len(sc.embeddings[(t.id, "grammatical")]) == len(t.segments)
        assert sc.embeddings[(t.id, "grammatical")].dim == cfg.dim
        assert 0.0 <= sc.truth[t.id] <= 1.0


def test_zero_disorganization():
    cfg = SynthConfig(n_transcripts=12, seed=5, fixed_d=0.0)
    sc = generate(cfg)
    gaps = []
    for t in sc.corpus:
        s = coherence_series(sc.embeddings[(t.id, "grammatical")], "sequential")
        assert min(s.values) > 0.9
        gaps.extend(raw_gaps(t))
    assert len(gaps) >= 200
    logs = np.log(np.clip(gaps, 1e-300, None))
    # gaps are rounded to microseconds; sample std of 200+ draws is within ~15% of sigma
    assert abs(np.std(logs, ddof=1) - cfg.pause_log_std) < 0.15 * cfg.pause_log_std + 0.02
    assert abs(np.mean(logs) - cfg.pause_log_mean) < 4 * cfg.pause_log_std / math.sqrt(len(logs))


def test_planted_separation():
    lo = generate(SynthConfig(n_transcripts=50, seed=8, fixed_d=0.0))
    hi = generate(SynthConfig(n_transcripts=50, seed=9, fixed_d=1.0))
    coh_lo = [_min_coh(lo, t) for t in lo.corpus]
    coh_hi = [_min_coh(hi, t) for t in hi.corpus]
    assert np.mean(coh_hi) < np.mean(coh_lo)
    assert stats.mannwhitneyu(coh_hi, coh_lo, alternative="less").pvalue < 0.01
    sd_lo = [np.std(raw_gaps(t), ddof=1) for t in lo.corpus]
    sd_hi = [np.std(raw_gaps(t), ddof=1) for t in hi.corpus]
    assert stats.mannwhitneyu(sd_hi, sd_lo, alternative="greater").pvalue < 0.01


def test_monotone_signal_self_test():
    sc = generate(SynthConfig(n_transcripts=200, seed=11))
    d = [sc.truth[t.id] for t in sc.corpus]
    gap_sd = [float(np.std(raw_gaps(t))) for t in sc.corpus]
    neg_coh = [-_min_coh(sc, t) for t in sc.corpus]
    assert spearman(gap_sd, d)[0] >= 0.6
    assert spearman(neg_coh, d)[0] >= 0.6


@pytest.mark.parametrize("kw", [
    {"jump_prob": -0.1},
    {"jump_prob": 0.9, "jump_prob_slope": 0.2},
    {"jump_frac_slope": 0.9},
    {"dim": 4},
    {"fixed_d": 1.5},
    {"n_transcripts": 0},
    {"min_sentences": 1},
    {"min_sentences": 10, "max_sentences": 5},
    {"drift_tokens": 24},
    {"label_noise": -1.0},
])
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        generate(with_overrides(SynthConfig(n_transcripts=2), **kw))

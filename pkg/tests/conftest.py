import numpy as np
import pytest

from derail.transcript_io import Segment, Transcript


def make_transcript(times, tid="t", texts=None, speakers=None, label=None, scale=None, group_id=None):
    segs = []
    for k, (s, e) in enumerate(times):
        text = texts[k] if texts else f"Word{k} here."
        spk = speakers[k] if speakers else None
        segs.append(Segment(float(s), float(e), text, spk))
    return Transcript(tid, tuple(segs), label=label, scale=scale, group_id=group_id)


def random_transcript(rng: np.random.Generator, n_segments: int, tid="r"):
    t = float(rng.uniform(0, 5))
    times = []
    for _ in range(n_segments):
        start = t
        t += float(rng.uniform(0.2, 3.0))
        times.append((start, t))
        t += float(rng.choice([0.0, rng.exponential(0.7)]))
    return make_transcript(times, tid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


FIT_LOG = {"fits": 0}


@pytest.fixture(autouse=True)
def _dual_feasibility_guard(monkeypatch):
    """Every in-process SVR fit must satisfy sum(beta) = 0 and |beta| <= C."""
    import derail.modeling
    import derail.svr

    original = derail.svr.fit_svr

    def checked(*args, **kwargs):
        m = original(*args, **kwargs)
        FIT_LOG["fits"] += 1
        assert abs(float(np.sum(m.beta))) <= 1e-9, f"sum(beta) = {np.sum(m.beta)}"
        assert float(np.max(np.abs(m.beta), initial=0.0)) <= m.C + 1e-12
        return m

    monkeypatch.setattr(derail.svr, "fit_svr", checked)
    monkeypatch.setattr(derail.modeling, "fit_svr", checked)

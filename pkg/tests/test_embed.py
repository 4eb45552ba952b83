import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from derail.embed import (
    RemoteEmbedder,
    embedding_lines,
    load_embeddings,
    read_embedding_file,
    test_embedder,
)
from derail.errors import DimensionMismatch, MissingIndex, ProtocolViolation, Transport, ZeroVector
from derail.transcript_io import SentenceSpan


def spans(*texts, source="grammatical"):
    return [SentenceSpan(i, t, source) for i, t in enumerate(texts)]


def jsonl(rows, tid="t1"):
    return "\n".join(json.dumps({"transcript_id": tid, "index": i, "vector": v}) for i, v in rows)


def test_load_three():
    es = load_embeddings(jsonl([(0, [1, 0, 0, 0]), (1, [0, 1, 0, 0]), (2, [0, 0, 1, 0.5])]))
    assert len(es) == 3 and es.dim == 4
    assert es.mode == "grammatical"
    assert not es.vectors.flags.writeable


def test_missing_index():
    with pytest.raises(MissingIndex) as exc:
        load_embeddings(jsonl([(0, [1, 0]), (2, [0, 1])]))
    assert exc.value.index == 1


def test_zero_vector():
    with pytest.raises(ZeroVector):
        load_embeddings(jsonl([(0, [1, 0]), (1, [0, 0])]))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        load_embeddings(jsonl([(0, [1, 0]), (1, [0, 1, 2])]))


def test_file_roundtrip(tmp_path):
    sets = [test_embedder(spans("A b.", "C d."), 16, 0, "x", "grammatical"),
            test_embedder(spans("A b.", source="asr_segment"), 16, 0, "x", "asr_segment")]
    p = tmp_path / "e.jsonl"
    p.write_text(embedding_lines(sets))
    back = read_embedding_file(p)
    assert set(back) == {("x", "grammatical"), ("x", "asr_segment")}
    assert np.array_equal(back[("x", "grammatical")].vectors, sets[0].vectors)


def test_identical_sentences():
    es = test_embedder(spans("The cat sat.", "the CAT sat"), 64, 3)
    assert np.array_equal(es.vectors[0], es.vectors[1])


def test_deterministic_and_unit():
    a = test_embedder(spans("one two", "three"), 32, 5)
    b = test_embedder(spans("one two", "three"), 32, 5)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert np.allclose(np.linalg.norm(a.vectors, axis=1), 1.0)
    c = test_embedder(spans("one two", "three"), 32, 6)
    assert not np.array_equal(a.vectors, c.vectors)


def test_empty_sentence_basis_vector():
    es = test_embedder(spans("...", "word"), 8, 0)
    assert es.vectors[0].tolist() == [1.0] + [0.0] * 7


def test_disjoint_vocabularies_near_orthogonal():
    rng = np.random.default_rng(0)
    cos = []
    for k in range(1000):
        n1, n2 = rng.integers(1, 12, size=2)
        a = " ".join(f"a{k}w{i}" for i in range(n1))
        b = " ".join(f"b{k}w{i}" for i in range(n2))
        v = test_embedder(spans(a, b), 512, 0).vectors
        cos.append(abs(float(v[0] @ v[1])))
    assert np.mean(cos) < 0.15


class _Service:
    def __init__(self, dim=6, drop_one=False):
        self.dim, self.drop_one, self.calls = dim, drop_one, 0
        svc = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                svc.calls += 1
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                vecs = [test_embedder(spans(t), svc.dim, 1).vectors[0].tolist() for t in body["inputs"]]
                if svc.drop_one:
                    vecs = vecs[:-1]
                data = json.dumps({"vectors": vecs}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/embed"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def service():
    svc = _Service()
    yield svc
    svc.close()


def test_remote_fetch_and_cache(service, tmp_path):
    sp = spans("First one.", "Second one.", "First one.")
    client = RemoteEmbedder(service.url, "m1", tmp_path, batch_size=1)
    es = client.fetch(sp, "t1")
    assert len(es) == 3 and es.dim == 6
    assert np.array_equal(es.vectors[0], es.vectors[2])
    assert len(list((tmp_path / "remote" / "m1").glob("*.json"))) == 2
    assert service.calls == 2

    again = RemoteEmbedder(service.url, "m1", tmp_path)
    es2 = again.fetch(sp, "t1")
    assert again.requests_made == 0 and service.calls == 2
    assert es2.vectors.tobytes() == es.vectors.tobytes()


def test_remote_wrong_count(tmp_path):
    svc = _Service(drop_one=True)
    try:
        client = RemoteEmbedder(svc.url, "m1", tmp_path)
        with pytest.raises(ProtocolViolation):
            client.fetch(spans("A.", "B."), "t1")
        assert not (tmp_path / "remote").exists()
    finally:
        svc.close()


def test_remote_transport_error(tmp_path):
    client = RemoteEmbedder("http://127.0.0.1:9/none", "m", tmp_path, retries=1, backoff=0.0, timeout=1.0)
    with pytest.raises(Transport):
        client.fetch(spans("A."), "t1")
    assert client.requests_made == 2


def test_cache_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DERAIL_CACHE_DIR", str(tmp_path / "c"))
    assert RemoteEmbedder("http://x", "m").cache_dir == tmp_path / "c"

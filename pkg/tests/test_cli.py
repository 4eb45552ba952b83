import json
from pathlib import Path

import pytest

from derail.cli import main
from derail.tsfeat import catalog

from conftest import make_transcript
from derail.transcript_io import write_corpus_lines


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "-o", str(out), "--n-transcripts", "24", "--seed", "3", "--dim", "32"]) == 0
    return out


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_outputs(synth_dir):
    names = {p.name for p in synth_dir.iterdir()}
    assert names == {"corpus.jsonl", "embeddings.jsonl", "truth.csv", "synth_config.json"}
    assert (synth_dir / "truth.csv").read_text().splitlines()[0] == "transcript_id,d,label"
    assert json.loads((synth_dir / "synth_config.json").read_text())["n_transcripts"] == 24


def test_validate(tmp_path, synth_dir, capsys):
    assert main(["validate", str(synth_dir / "corpus.jsonl")]) == 0
    bad = tmp_path / "bad.jsonl"
    good = (synth_dir / "corpus.jsonl").read_text().splitlines()
    bad.write_text(good[0] + "\n" + '{"id": "x", "segments": [{"start": 2, "end": 1, "text": "a"}]}\n')
    capsys.readouterr()
    assert main(["validate", str(bad)]) == 2
    out = capsys.readouterr().out
    assert "line 2: INVALID" in out and "2 records, 1 invalid" in out
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["validate", str(empty)]) == 2
    assert "EmptyCorpus" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "nope.jsonl")]) == 2


def test_featurize_columns(tmp_path, synth_dir):
    out = tmp_path / "f"
    rc = main(["featurize", "--corpus", str(synth_dir / "corpus.jsonl"), "-o", str(out),
               "--set", "features.semantic_grammatical=false", "--set", "features.pause_timeseries=true"])
    assert rc == 0
    summary = (out / "features" / "pause_summary.csv").read_text().splitlines()
    assert len(summary[0].split(",")) == 1 + 6
    ts = (out / "features" / "pause_timeseries.csv").read_text().splitlines()
    assert len(ts[0].split(",")) == 1 + len(catalog(False)) == 54
    manifest = json.loads((out / "features" / "catalog_manifest.json").read_text())
    assert len(manifest["features"]) == len(catalog(False))


def test_missing_embeddings(tmp_path, synth_dir, capsys):
    rc = main(["featurize", "--corpus", str(synth_dir / "corpus.jsonl"), "-o", str(tmp_path / "f"),
               "--embeddings", str(tmp_path / "absent.jsonl")])
    assert rc == 2
    assert "MissingEmbeddings" in capsys.readouterr().err


def test_file_embeddings(tmp_path, synth_dir):
    out = tmp_path / "f"
    rc = main(["featurize", "--corpus", str(synth_dir / "corpus.jsonl"), "-o", str(out),
               "--embeddings", str(synth_dir / "embeddings.jsonl")])
    assert rc == 0
    assert (out / "features" / "semantic_grammatical.csv").exists()


def test_unknown_config_key(tmp_path, synth_dir):
    rc = main(["featurize", "--corpus", str(synth_dir / "corpus.jsonl"), "-o", str(tmp_path / "f"),
               "--set", "svr.nope=1"])
    assert rc == 2


def _eval(out, synth_dir, *extra):
    return main(["eval", "--corpus", str(synth_dir / "corpus.jsonl"), "-o", str(out), *extra])


def test_eval_outputs_and_worker_independence(tmp_path, synth_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _eval(a, synth_dir, "--workers", "1") == 0
    assert _eval(b, synth_dir, "--workers", "2") == 0
    assert _tree(a) == _tree(b)
    preds = sorted(p.name for p in (a / "predictions").iterdir())
    assert preds == ["late_fusion.csv", "pause_summary.csv", "semantic_grammatical.csv"]
    report = json.loads((a / "eval.json").read_text())
    for row in report["results"]:
        assert {"spearman_rho", "auc", "n"} <= set(row) and row["n"] == 24
    for name in ("importance_top10.csv", "importance.svg", "spearman.svg", "effective_config.json"):
        assert (a / name).exists()


def test_compare(tmp_path, synth_dir, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _eval(a, synth_dir) == 0
    assert _eval(b, synth_dir, "--fusion", "early") == 0
    capsys.readouterr()
    assert main(["compare", str(a / "eval.json"), str(a / "eval.json")]) == 1
    assert "AllZeroDifferences" in capsys.readouterr().err
    assert main(["compare", str(a / "eval.json"), str(b / "eval.json")]) == 2
    assert "RecordMismatch" in capsys.readouterr().err


def test_compare_uniformly_better(tmp_path, capsys):
    rows_a = [{"dataset": "d", "model": f"m{i}", "spearman_rho": 0.5 + 0.01 * i} for i in range(24)]
    rows_b = [dict(r, spearman_rho=r["spearman_rho"] - 0.1 - 0.001 * i) for i, r in enumerate(rows_a)]
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    pa.write_text(json.dumps({"results": rows_a}))
    pb.write_text(json.dumps(rows_b))
    assert main(["compare", str(pa), str(pb), "-o", str(tmp_path / "cmp.json")]) == 0
    doc = json.loads((tmp_path / "cmp.json").read_text())
    assert doc["n_pairs"] == 24 and doc["wilcoxon_p"] < 0.05


def _corpus(path, texts):
    lines = [make_transcript([(0.0, 1.0)], tid=tid, texts=[txt], label=float(i))
             for i, (tid, txt) in enumerate(texts.items())]
    path.write_text(write_corpus_lines(lines))
    return path


def test_wer(tmp_path):
    ref = _corpus(tmp_path / "ref.jsonl", {"a": "the cat sat", "b": "hello world", "c": "one two three four"})
    hyp = _corpus(tmp_path / "hyp.jsonl", {"a": "the cat sit", "b": "hello world", "c": "one two three four"})
    assert main(["wer", str(ref), str(ref), "-o", str(tmp_path / "same")]) == 0
    assert json.loads((tmp_path / "same" / "wer.json").read_text())["mean_wer"] == 0.0
    assert main(["wer", str(ref), str(hyp), "-o", str(tmp_path / "w")]) == 0
    rows = (tmp_path / "w" / "wer.csv").read_text().splitlines()
    assert rows[0] == "record_id,wer,cer"
    assert float(rows[1].split(",")[1]) == pytest.approx(1 / 3, abs=1e-15)
    short = _corpus(tmp_path / "short.jsonl", {"a": "the cat sat"})
    assert main(["wer", str(ref), str(short), "-o", str(tmp_path / "x")]) == 2


def test_synth_invalid(tmp_path):
    assert main(["synth", "-o", str(tmp_path / "s"), "--dim", "4"]) == 2
    assert not (tmp_path / "s").exists()

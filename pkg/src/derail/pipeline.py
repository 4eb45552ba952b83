"""End-to-end orchestration behind the CLI subcommands."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coherence as coh
from .config import effective_config_json, enabled_sets
from .embed import EmbeddingSet, RemoteEmbedder, embedding_lines, read_embedding_file, test_embedder
from .errors import (
    DerailError,
    DimensionMismatch,
    EmptyCorpus,
    InputError,
    InvalidConfig,
    MalformedJson,
    MissingEmbeddings,
    MissingGroup,
    MissingSpeaker,
    RecordMismatch,
    SchemaViolation,
    TooFewPairs,
    TooFewSentences,
)
from .metrics import (
    SeverityThreshold,
    default_threshold,
    dichotomize,
    roc_auc,
    spearman,
    wer_cer,
    wilcoxon_signed_rank,
)
from .modeling import (
    SvrParams,
    fit_model,
    fuse_early,
    fuse_late,
    loocv,
    participant_sum,
    permutation_importance,
)
from .pause import SUMMARY_CSV_HEADER, extract_pauses, summarize_pauses, summary_csv_row
from .report import bar_chart_svg, csv_text, dumps_json, write_atomic
from .synth import SynthConfig, generate, truth_csv
from .transcript_io import (
    Transcript,
    filter_speaker,
    has_speaker_tags,
    iter_corpus_lines,
    parse_transcript,
    read_corpus,
    segment_sentences,
    write_corpus_lines,
)
from .tsfeat import FeatureMatrix, catalog, featurize

logger = logging.getLogger(__name__)

PAUSE_SUMMARY_NAMES = (
    "pause__max_duration",
    "pause__mean_duration",
    "pause__median_duration",
    "pause__min_duration",
    "pause__count",
    "pause__proportion",
)
SEMANTIC_MODE = {"semantic_grammatical": "grammatical", "semantic_asr": "asr_segment"}
SEMANTIC_PREFIX = {"semantic_grammatical": "coh__", "semantic_asr": "coh__asr__"}


# ---------------------------------------------------------------- validate

@dataclass
class ValidationReport:
    verdicts: list[tuple[int, str | None, str | None]]  # (line, id, error)

    @property
    def n_invalid(self) -> int:
        return sum(1 for _, _, err in self.verdicts if err)

    def text(self) -> str:
        lines = []
        for lineno, tid, err in self.verdicts:
            lines.append(f"line {lineno}: " + (f"INVALID {err}" if err else f"ok {tid}"))
        lines.append(f"{len(self.verdicts)} records, {self.n_invalid} invalid")
        return "\n".join(lines) + "\n"


def validate_corpus(path: str | Path) -> ValidationReport:
    verdicts = []
    seen = set()
    for lineno, line in iter_corpus_lines(path):
        try:
            t = parse_transcript(line)
        except InputError as exc:
            verdicts.append((lineno, None, f"{type(exc).__name__}: {exc}"))
            continue
        if t.id in seen:
            verdicts.append((lineno, t.id, f"SchemaViolation: duplicate id {t.id!r}"))
            continue
        seen.add(t.id)
        verdicts.append((lineno, t.id, None))
    if not verdicts:
        raise EmptyCorpus(f"{path} contains no transcripts")
    return ValidationReport(verdicts)


# ---------------------------------------------------------------- featurize

def load_participant_corpus(cfg: dict) -> list[Transcript]:
    if not cfg["corpus"]:
        raise InvalidConfig("no corpus configured")
    corpus = read_corpus(cfg["corpus"])
    speaker = cfg["speaker"]
    if speaker is None:
        tagged = [t.id for t in corpus if has_speaker_tags(t)]
        if tagged:
            raise MissingSpeaker(
                f"{len(tagged)} transcripts carry speaker tags (e.g. {tagged[0]}); "
                "set the participant tag with --speaker"
            )
        return corpus
    return [filter_speaker(t, speaker) for t in corpus]


class EmbeddingSource:
    """Resolves (transcript, mode) to an EmbeddingSet per the ``embed`` config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg["embed"]
        self._file: dict[tuple[str, str], EmbeddingSet] | None = None
        self._remote: RemoteEmbedder | None = None
        provider = self.cfg["provider"]
        if provider == "file":
            if not self.cfg["path"]:
                raise MissingEmbeddings("embed.provider=file needs embed.path")
            if not Path(self.cfg["path"]).exists():
                raise MissingEmbeddings(f"embedding file {self.cfg['path']} not found")
            self._file = read_embedding_file(self.cfg["path"])
        elif provider == "remote":
            if not self.cfg["endpoint"] or not self.cfg["model"]:
                raise MissingEmbeddings("embed.provider=remote needs embed.endpoint and embed.model")
            self._remote = RemoteEmbedder(
                self.cfg["endpoint"], self.cfg["model"],
                timeout=float(self.cfg["timeout"]), retries=int(self.cfg["retries"]),
            )

    def get(self, t: Transcript, mode: str) -> EmbeddingSet:
        spans = segment_sentences(t, mode)
        provider = self.cfg["provider"]
        if provider == "test":
            return test_embedder(spans, int(self.cfg["dim"]), int(self.cfg["seed"]), t.id, mode)
        if provider == "remote":
            return self._remote.fetch(spans, t.id, mode)
        es = self._file.get((t.id, mode))
        if es is None:
            raise MissingEmbeddings(f"no {mode} embeddings for {t.id} in {self.cfg['path']}")
        if len(es) != len(spans):
            raise DimensionMismatch(f"{t.id}: {len(spans)} {mode} sentences but {len(es)} embeddings")
        return es


@dataclass
class FeatureRun:
    corpus: list[Transcript]
    blocks: dict[str, FeatureMatrix]
    series: dict[str, list[tuple[str, coh.CoherenceSeries]]]
    embeddings: dict[tuple[str, str], EmbeddingSet]


def _pause_blocks(corpus, cfg, wanted) -> dict[str, FeatureMatrix]:
    ids = [t.id for t in corpus]
    pauses = [extract_pauses(t, cfg["min_pause"]) for t in corpus]
    blocks = {}
    if "pause_summary" in wanted:
        rows = np.array([summarize_pauses(p).as_row() for p in pauses], dtype=float).reshape(len(ids), 6)
        blocks["pause_summary"] = FeatureMatrix(tuple(ids), PAUSE_SUMMARY_NAMES, rows)
    if "pause_timeseries" in wanted:
        cat = catalog(cfg["include_length_dependent"])
        vectors = [featurize(p.gaps, cat).prefixed("pause__") for p in pauses]
        blocks["pause_timeseries"] = FeatureMatrix.from_vectors(ids, vectors)
    return blocks


def _semantic_block(corpus, cfg, name, source, run: FeatureRun) -> FeatureMatrix:
    mode = SEMANTIC_MODE[name]
    prefix = SEMANTIC_PREFIX[name]
    strategy = cfg["coherence"]["strategy"]
    aggregation = cfg["coherence"]["aggregation"]
    cat = catalog(cfg["include_length_dependent"])
    ids, vectors, rows = [], [], []
    for t in corpus:
        es = source.get(t, mode)
        run.embeddings[(t.id, mode)] = es
        for s in coh.STRATEGIES:
            try:
                run.series.setdefault(name, []).append((t.id, coh.coherence_series(es, s)))
            except TooFewSentences:
                pass
        try:
            series = coh.coherence_series(es, strategy)
        except TooFewSentences as exc:
            if aggregation == "minimum":
                raise TooFewSentences(f"{exc.strategy} ({t.id})", exc.n) from exc
            series = coh.CoherenceSeries(strategy, (), ())
        ids.append(t.id)
        if aggregation == "minimum":
            rows.append([coh.aggregate_minimum(series)])
        else:
            vectors.append(featurize(series.values, cat).prefixed(prefix))
    if aggregation == "minimum":
        return FeatureMatrix(tuple(ids), (f"{prefix}minimum_{strategy}",), np.array(rows, dtype=float))
    return FeatureMatrix.from_vectors(ids, vectors)


def compute_features(cfg: dict, corpus: list[Transcript] | None = None) -> FeatureRun:
    corpus = corpus if corpus is not None else load_participant_corpus(cfg)
    wanted = enabled_sets(cfg)
    run = FeatureRun(corpus, {}, {}, {})
    run.blocks.update(_pause_blocks(corpus, cfg, wanted))
    semantic = [n for n in wanted if n in SEMANTIC_MODE]
    if semantic:
        source = EmbeddingSource(cfg)
        for name in semantic:
            run.blocks[name] = _semantic_block(corpus, cfg, name, source, run)
    run.blocks = {name: run.blocks[name] for name in wanted}
    return run


def _pause_coherence_rows(run: FeatureRun) -> list[list]:
    rows = []
    pairs = []
    for t in run.corpus:
        es = run.embeddings.get((t.id, "asr_segment"))
        if es is None:
            continue
        pairs.append((t, es))
        try:
            (rep,) = coh.pause_coherence_correlation([(t, es)], "per_transcript")
            rows.append([t.id, repr(rep.rho), repr(rep.p), rep.n_pairs])
        except TooFewPairs as exc:
            rows.append([t.id, "", "", len(t.segments) - 1])
            logger.info("no pause/coherence correlation for %s: %s", t.id, exc)
    if pairs:
        try:
            (rep,) = coh.pause_coherence_correlation(pairs, "pooled")
            rows.append(["__pooled__", repr(rep.rho), repr(rep.p), rep.n_pairs])
        except TooFewPairs:
            pass
    return rows


def write_features(run: FeatureRun, cfg: dict, out: Path) -> list[Path]:
    written = []
    fdir = out / "features"
    for name, block in run.blocks.items():
        written.append(write_atomic(fdir / f"{name}.csv", block.to_csv()))
    written.append(write_atomic(fdir / "catalog_manifest.json", catalog(cfg["include_length_dependent"]).manifest()))
    if "pause_summary" in run.blocks:
        lines = [SUMMARY_CSV_HEADER] + [
            summary_csv_row(t.id, summarize_pauses(extract_pauses(t, cfg["min_pause"]))) for t in run.corpus
        ]
        written.append(write_atomic(fdir / "pause_summary_table.csv", "\n".join(lines) + "\n"))
    for name, items in run.series.items():
        rows = [
            [tid, s.strategy, idx, repr(v)]
            for tid, s in items
            for idx, v in zip(s.aligned_sentence_index, s.values)
        ]
        written.append(write_atomic(
            fdir / f"coherence_series_{name}.csv",
            csv_text(["transcript_id", "strategy", "sentence_index", "value"], rows),
        ))
        try:
            cv_rows = [[s, repr(cv), n] for s, cv, n in coh.cv_report(s for _, s in items)]
        except DerailError as exc:
            logger.warning("coefficient of variation unavailable: %s", exc)
            cv_rows = []
        written.append(write_atomic(fdir / f"cv_{name}.csv", csv_text(["strategy", "cv_percent", "n_values"], cv_rows)))
    if any(mode == "asr_segment" for _, mode in run.embeddings):
        written.append(write_atomic(
            fdir / "pause_coherence_correlation.csv",
            csv_text(["transcript_id", "rho", "p", "n_pairs"], _pause_coherence_rows(run)),
        ))
    return written


def cmd_featurize(cfg: dict) -> FeatureRun:
    run = compute_features(cfg)
    out = Path(cfg["output"])
    write_features(run, cfg, out)
    write_atomic(out / "effective_config.json", effective_config_json(cfg))
    return run


# ---------------------------------------------------------------- eval

def _threshold(cfg: dict, corpus: list[Transcript]) -> SeverityThreshold:
    th = cfg["threshold"]
    scale = th["scale"] or next((t.scale for t in corpus if t.scale), None)
    if th["cutoff"] is not None:
        return SeverityThreshold(scale or "other", float(th["cutoff"]))
    return default_threshold(scale)


def _svr_params(cfg: dict) -> SvrParams:
    s = cfg["svr"]
    return SvrParams(float(s["C"]), float(s["epsilon"]), s["gamma"], float(s["tol"]), int(s["max_iter"]))


def _metrics_row(dataset, model, ids, preds, labels, th) -> dict:
    y = [labels[i] for i in ids]
    p = [preds[i] for i in ids]
    severe = dichotomize(y, th)
    row = {
        "dataset": dataset,
        "model": model,
        "threshold": {"scale": th.scale, "cutoff": th.cutoff},
        "n": len(ids),
        "n_severe": int(sum(severe)),
        "spearman_rho": None,
        "spearman_p": None,
        "auc": None,
    }
    try:
        row["spearman_rho"], row["spearman_p"] = spearman(p, y)
    except DerailError as exc:
        row["spearman_error"] = f"{type(exc).__name__}: {exc}"
    try:
        row["auc"] = roc_auc(severe, p)
    except DerailError as exc:
        row["auc_error"] = f"{type(exc).__name__}: {exc}"
    return row


def _group_rows(block: FeatureMatrix, groups: dict[str, str]) -> FeatureMatrix:
    order = sorted(set(groups[r] for r in block.ids))
    pos = {g: k for k, g in enumerate(order)}
    values = np.zeros((len(order), len(block.names)))
    for rid, row in zip(block.ids, block.values):
        values[pos[groups[rid]]] += row
    return FeatureMatrix(tuple(order), block.names, values)


@dataclass
class EvalResult:
    report: dict
    predictions: dict[str, dict[str, float]]


def evaluate(cfg: dict, run: FeatureRun | None = None) -> EvalResult:
    run = run or compute_features(cfg)
    corpus = run.corpus
    labels = {t.id: t.label for t in corpus}
    missing = [t.id for t in corpus if t.label is None]
    if missing:
        raise SchemaViolation("label", f"eval needs labels; {len(missing)} missing (e.g. {missing[0]})")
    groups = {t.id: t.group_id for t in corpus}
    aggregate = cfg["aggregate"]
    if aggregate != "none" and any(g is None for g in groups.values()):
        raise MissingGroup(f"aggregate={aggregate} needs a group_id on every record")
    th = _threshold(cfg, corpus)
    params = _svr_params(cfg)
    workers = int(cfg["workers"])
    grouped = cfg["cv"]["grouped"]

    blocks = dict(run.blocks)
    eval_labels = labels
    record_groups: list | None = [groups[t.id] for t in corpus]
    if aggregate == "features":
        blocks = {name: _group_rows(b, groups) for name, b in blocks.items()}
        eval_labels = participant_sum(labels, groups)
        record_groups = None
    if cfg["fusion"]["mode"] == "early":
        blocks["early_fusion"] = fuse_early([blocks[n] for n in enabled_sets(cfg)])

    predictions: dict[str, dict[str, float]] = {}
    for name, block in blocks.items():
        y = np.array([eval_labels[r] for r in block.ids])
        grp = None if record_groups is None else [groups[r] for r in block.ids]
        res = loocv(block.values, y, block.ids, grp, params, grouped=grouped, n_jobs=workers)
        predictions[name] = res.as_dict()
    if cfg["fusion"]["mode"] == "late":
        predictions["late_fusion"] = fuse_late([predictions[n] for n in enabled_sets(cfg)])

    rows = []
    for name, preds in predictions.items():
        if aggregate == "predictions":
            preds = participant_sum(preds, groups)
            y = participant_sum(labels, groups)
        else:
            y = eval_labels
        rows.append(_metrics_row(cfg["dataset"], name, sorted(preds), preds, y, th))

    report = {"dataset": cfg["dataset"], "results": rows}
    imp_set = cfg["importance"]["feature_set"] or (
        "pause_timeseries" if "pause_timeseries" in blocks else next(iter(run.blocks))
    )
    if imp_set not in blocks:
        raise RecordMismatch(f"importance.feature_set {imp_set!r} is not an enabled feature set")
    block = blocks[imp_set]
    y = np.array([eval_labels[r] for r in block.ids])
    model = fit_model(block.values, y, params)
    ranked = permutation_importance(
        model, block.values, y, block.names, int(cfg["importance"]["n_repeats"]), int(cfg["seed"])
    )
    report["importance"] = {
        "feature_set": imp_set,
        "ranked": [{"feature": r.name, "importance": r.importance, "std": r.std} for r in ranked],
    }
    return EvalResult(report, predictions)


def write_eval(result: EvalResult, cfg: dict, out: Path) -> None:
    for name, preds in result.predictions.items():
        rows = [[rid, repr(float(v))] for rid, v in preds.items()]
        write_atomic(out / "predictions" / f"{name}.csv", csv_text(["record_id", "prediction"], rows))
    write_atomic(out / "eval.json", dumps_json({k: v for k, v in result.report.items() if k != "importance"}))
    ranked = result.report["importance"]["ranked"]
    top = ranked[: int(cfg["importance"]["top"])]
    write_atomic(
        out / "importance_all.csv",
        csv_text(["rank", "feature", "importance", "std"],
                 [[k + 1, r["feature"], repr(r["importance"]), repr(r["std"])] for k, r in enumerate(ranked)]),
    )
    write_atomic(
        out / "importance_top10.csv",
        csv_text(["rank", "feature", "importance", "std"],
                 [[k + 1, r["feature"], repr(r["importance"]), repr(r["std"])] for k, r in enumerate(top)]),
    )
    write_atomic(
        out / "importance.svg",
        bar_chart_svg([r["feature"] for r in top], [r["importance"] for r in top],
                      f"Permutation importance ({result.report['importance']['feature_set']})"),
    )
    scored = [r for r in result.report["results"] if r["spearman_rho"] is not None]
    write_atomic(
        out / "spearman.svg",
        bar_chart_svg([r["model"] for r in scored], [r["spearman_rho"] for r in scored],
                      f"LOOCV Spearman rho ({result.report['dataset']})"),
    )


def cmd_eval(cfg: dict) -> EvalResult:
    out = Path(cfg["output"])
    run = compute_features(cfg)
    write_features(run, cfg, out)
    result = evaluate(cfg, run)
    write_eval(result, cfg, out)
    write_atomic(out / "effective_config.json", effective_config_json(cfg))
    return result


# ---------------------------------------------------------------- compare

def _load_results(path: str | Path) -> dict[tuple[str, str], dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc
    rows = doc["results"] if isinstance(doc, dict) and "results" in doc else doc
    if not isinstance(rows, list):
        raise SchemaViolation("results", f"{path}: expected a list of results")
    out = {}
    for r in rows:
        key = (str(r.get("dataset")), str(r.get("model")))
        if key in out:
            raise SchemaViolation("model", f"{path}: duplicate configuration {key}")
        out[key] = r
    return out


def compare_reports(path_a: str | Path, path_b: str | Path, metric: str = "spearman_rho") -> dict:
    """Wilcoxon signed-rank test over configurations present in both reports."""
    a, b = _load_results(path_a), _load_results(path_b)
    if set(a) != set(b):
        raise RecordMismatch(f"configuration sets differ: {sorted(set(a) ^ set(b))[:5]}")
    keys = sorted(a)
    va, vb = [], []
    for k in keys:
        x, y = a[k].get(metric), b[k].get(metric)
        if x is None or y is None:
            raise SchemaViolation(metric, f"missing for configuration {k}")
        va.append(float(x))
        vb.append(float(y))
    w, p = wilcoxon_signed_rank(va, vb)
    return {
        "paired_metric": metric,
        "n_pairs": len(keys),
        "wilcoxon_w": w,
        "wilcoxon_p": p,
        "mean_difference": math.fsum(x - y for x, y in zip(va, vb)) / len(keys),
        "configurations": [{"dataset": k[0], "model": k[1], "a": x, "b": y} for k, x, y in zip(keys, va, vb)],
    }


# ---------------------------------------------------------------- wer

def wer_report(ref_path: str | Path, hyp_path: str | Path) -> tuple[dict, list[list]]:
    refs = {t.id: t for t in read_corpus(ref_path)}
    hyps = {t.id: t for t in read_corpus(hyp_path)}
    if set(refs) != set(hyps):
        raise RecordMismatch(f"record ids differ: {sorted(set(refs) ^ set(hyps))[:5]}")
    rows = []
    wers = {}
    for rid in sorted(refs):
        ref_text, hyp_text = refs[rid].text(), hyps[rid].text()
        w = wer_cer(ref_text, hyp_text, "word")
        c = wer_cer(ref_text, hyp_text, "char")
        wers[rid] = w
        rows.append([rid, repr(w), repr(c)])
    report = {
        "n": len(rows),
        "mean_wer": math.fsum(wers.values()) / len(wers),
        "mean_cer": math.fsum(float(r[2]) for r in rows) / len(rows),
        "wer_label_spearman_rho": None,
        "wer_label_spearman_p": None,
    }
    labeled = [rid for rid in sorted(refs) if refs[rid].label is not None]
    if len(labeled) >= 3:
        try:
            rho, p = spearman([wers[r] for r in labeled], [refs[r].label for r in labeled])
            report["wer_label_spearman_rho"], report["wer_label_spearman_p"] = rho, p
        except DerailError as exc:
            report["wer_label_spearman_error"] = f"{type(exc).__name__}: {exc}"
    return report, rows


# ---------------------------------------------------------------- synth

def cmd_synth(cfg: SynthConfig, out: Path) -> None:
    sc = generate(cfg)
    write_atomic(out / "corpus.jsonl", write_corpus_lines(sc.corpus))
    write_atomic(out / "embeddings.jsonl", embedding_lines(sc.embeddings[k] for k in sorted(sc.embeddings)))
    write_atomic(out / "truth.csv", truth_csv(sc))
    write_atomic(out / "synth_config.json", dumps_json(cfg.as_dict()))

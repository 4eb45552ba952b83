"""Command-line interface: ``derail {validate,featurize,eval,compare,wer,synth}``.

Exit codes: 0 success, 1 runtime error, 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import pipeline
from .config import parse_value, load_config
from .errors import DerailError, InputError
from .report import dumps_json, write_atomic
from .synth import SynthConfig

logger = logging.getLogger("derail")


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline configuration JSON")
    p.add_argument("--corpus", help="transcript corpus (JSON Lines)")
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--speaker", help="participant speaker tag to keep")
    p.add_argument("--embeddings", help="embedding JSONL file (sets embed.provider=file)")
    p.add_argument("--fusion", choices=["none", "early", "late"])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key, e.g. --set svr.C=2 --set features.pause_timeseries=true",
    )


def _pipeline_config(args) -> dict:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = parse_value(value)
    simple = {"corpus": args.corpus, "output": args.output, "speaker": args.speaker,
              "fusion.mode": args.fusion, "seed": args.seed, "workers": args.workers}
    overrides.update({k: v for k, v in simple.items() if v is not None})
    if args.embeddings:
        overrides["embed.provider"] = "file"
        overrides["embed.path"] = args.embeddings
    return load_config(args.config, overrides)


def cmd_validate(args) -> int:
    report = pipeline.validate_corpus(args.corpus)
    sys.stdout.write(report.text())
    return 2 if report.n_invalid else 0


def cmd_featurize(args) -> int:
    cfg = _pipeline_config(args)
    run = pipeline.cmd_featurize(cfg)
    for name, block in run.blocks.items():
        print(f"{name}: {len(block.ids)} records x {len(block.names)} features")
    return 0


def cmd_eval(args) -> int:
    cfg = _pipeline_config(args)
    result = pipeline.cmd_eval(cfg)
    for row in result.report["results"]:
        rho = "n/a" if row["spearman_rho"] is None else f"{row['spearman_rho']:.3f}"
        auc = "n/a" if row["auc"] is None else f"{row['auc']:.3f}"
        print(f"{row['model']:<22} rho={rho} auc={auc} n={row['n']} severe={row['n_severe']}")
    return 0


def cmd_compare(args) -> int:
    report = pipeline.compare_reports(args.report_a, args.report_b, args.metric)
    text = dumps_json(report)
    if args.output:
        write_atomic(args.output, text)
    sys.stdout.write(text)
    return 0


def cmd_wer(args) -> int:
    report, rows = pipeline.wer_report(args.reference, args.hypothesis)
    out = Path(args.output)
    from .report import csv_text

    write_atomic(out / "wer.csv", csv_text(["record_id", "wer", "cer"], rows))
    write_atomic(out / "wer.json", dumps_json(report))
    print(f"mean WER {report['mean_wer']:.4f}  mean CER {report['mean_cer']:.4f}  n={report['n']}")
    return 0


def cmd_synth(args) -> int:
    kw = {}
    for f in fields(SynthConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            kw[f.name] = value
    cfg = SynthConfig(**kw)
    pipeline.cmd_synth(cfg, Path(args.output))
    print(f"wrote {cfg.n_transcripts} transcripts to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="derail", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus against the transcript schema")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("featurize", help="write pause and coherence feature matrices")
    _add_pipeline_options(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("eval", help="LOOCV models, fusion, metrics and importance")
    _add_pipeline_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="Wilcoxon signed-rank test between two eval reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--metric", default="spearman_rho", choices=["spearman_rho", "auc"])
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("wer", help="word/character error rate of hypothesis vs reference corpus")
    p.add_argument("reference")
    p.add_argument("hypothesis")
    p.add_argument("--output", "-o", default="wer_out")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--output", "-o", required=True)
    for f in fields(SynthConfig):
        kind = float if f.type in ("float", "float | None") else int
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (DerailError, OSError) as exc:
        if isinstance(exc, FileNotFoundError) and args.command in ("validate", "wer"):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

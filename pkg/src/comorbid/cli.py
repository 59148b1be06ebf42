"""Command-line surface for the extraction/annotation/evaluation pipeline.

Subcommands: ``index``, ``extract``, ``kappa``, ``gold``, ``train``,
``eval``, ``serve``.  Global flags ``--config``, ``--seed``,
``--lexicon``, ``--mapping`` override the corresponding config values.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .annotation import build_gold, kappa_report, open_store, render_kappa_csv, render_kappa_text
from .config import PipelineConfig, load_config
from .context import default_triggers, load_triggers
from .corpus import ingest_corpus, load_cohort
from .errors import ComorbidError
from .evaluation import evaluate, render_report_csv, render_report_text
from .matcher import build_index, save_index
from .pipeline import (
    eval_instances,
    load_gold,
    load_mentions,
    run_extract,
    train_models,
    write_gold,
    write_mentions,
)
from .terminology import load_lexicon, load_mapping

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for I/O."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="comorbid", description=__doc__)
    parser.add_argument("--config", help="TOML config file (default: $COMORBID_CONFIG)")
    parser.add_argument("--seed", type=int, help="override the configured random seed")
    parser.add_argument("--lexicon", help="override the configured lexicon path")
    parser.add_argument("--mapping", help="override the configured mapping path")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist the match index")
    p.add_argument("--out", required=True, help="output index file")

    p = sub.add_parser("extract", help="extract attributed mentions from the corpus")
    p.add_argument("--corpus", help="override the configured corpus path")
    p.add_argument("--out", required=True, help="output mentions file (JSON lines)")

    p = sub.add_parser("kappa", help="inter-annotator agreement report")
    p.add_argument("--annotations", help="annotation log (default: configured store)")
    p.add_argument("--mentions", help="extracted mentions file (for span checks)")
    p.add_argument(
        "--pairs",
        help="comma-separated annotator pairs a:b (default: all pairs present)",
    )
    p.add_argument("--out", help="also write the CSV report here")

    p = sub.add_parser("gold", help="adjudicate gold instances from annotations")
    p.add_argument("--annotations", help="annotation log (default: configured store)")
    p.add_argument("--mentions", help="extracted mentions file (for span checks)")
    p.add_argument("--out", required=True, help="output gold file (JSON lines)")

    p = sub.add_parser("train", help="train one forest per condition from gold")
    p.add_argument("--gold", required=True, help="gold file from the gold subcommand")
    p.add_argument("--mentions", required=True, help="extracted mentions file")
    p.add_argument("--out-dir", help="model directory (default: configured model_dir)")

    p = sub.add_parser("eval", help="cross-validated per-chapter metrics")
    p.add_argument("--gold", required=True, help="gold file from the gold subcommand")
    p.add_argument("--mentions", required=True, help="extracted mentions file")
    p.add_argument("--k", type=int, help="override the configured fold count")
    p.add_argument("--out-csv", help="write the CSV report here")
    p.add_argument("--out-text", help="write the aligned text report here")
    p.add_argument(
        "--include-irrelevant",
        action="store_true",
        help="keep negated/historic gold instances in the evaluation",
    )

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--port", type=int, help="override the configured port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--mentions", help="pre-extracted mentions file (default: extract now)")
    return parser


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.lexicon is not None:
        config = replace(config, lexicon=Path(args.lexicon))
    if args.mapping is not None:
        config = replace(config, mapping=Path(args.mapping))
    return config


def _load_terminology(config: PipelineConfig):
    config.require("lexicon", "mapping")
    mapping = load_mapping(config.mapping)
    lexicon = load_lexicon(config.lexicon, mapping)
    return mapping, lexicon


def _load_corpus(config: PipelineConfig, corpus_override: str | None = None):
    config = (
        replace(config, corpus=Path(corpus_override)) if corpus_override else config
    )
    config.require("corpus")
    cohort = None
    if config.cohort is not None:
        if config.study_end is None:
            raise ComorbidError("cohort filtering requires cohort.study_end in the config")
        cohort = load_cohort(config.cohort, config.study_end, config.lookback_months)
    corpus = ingest_corpus(config.corpus, cohort)
    if corpus.excluded:
        logger.info("cohort window excluded %d documents", corpus.excluded)
    return corpus


def _triggers(config: PipelineConfig):
    if config.triggers is not None:
        return load_triggers(config.triggers)
    return default_triggers()


def _pairs_for(records, pairs_arg: str | None) -> list[tuple[str, str]]:
    if pairs_arg:
        pairs = []
        for chunk in pairs_arg.split(","):
            left, sep, right = chunk.partition(":")
            if not sep or not left or not right:
                raise ComorbidError(f"bad --pairs entry {chunk!r}; expected a:b")
            pairs.append((left, right))
        return pairs
    annotators = sorted({r.annotator_id for r in records})
    return [(a, b) for i, a in enumerate(annotators) for b in annotators[i + 1 :]]


def _load_annotation_records(config: PipelineConfig, args: argparse.Namespace):
    """Records plus chapter lookup; span-checks against mentions when given."""
    path = Path(args.annotations) if args.annotations else config.annotation_store
    if path is None or not Path(path).exists():
        raise ComorbidError(f"annotation log not found: {path}")
    _, lexicon = _load_terminology(config)
    if args.mentions:
        mentions = load_mentions(args.mentions)
        store = open_store(path, mentions)
        records = store.records()
    else:
        # Trusted log: no mention registry to check spans against.
        from .annotation import record_from_json

        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    records.append(record_from_json(line, lineno=lineno))
    return records, lexicon.chapter_lookup()


def cmd_index(config: PipelineConfig, args: argparse.Namespace) -> int:
    _, lexicon = _load_terminology(config)
    index = build_index(lexicon)
    save_index(index, args.out)
    print(f"indexed {len(index)} patterns -> {args.out}")
    return 0


def cmd_extract(config: PipelineConfig, args: argparse.Namespace) -> int:
    _, lexicon = _load_terminology(config)
    corpus = _load_corpus(config, args.corpus)
    mentions = run_extract(corpus, build_index(lexicon), _triggers(config))
    write_mentions(mentions, args.out)
    print(f"extracted {len(mentions)} mentions from {len(corpus)} documents -> {args.out}")
    return 0


def cmd_kappa(config: PipelineConfig, args: argparse.Namespace) -> int:
    records, chapter_lookup = _load_annotation_records(config, args)
    pairs = _pairs_for(records, args.pairs)
    report = kappa_report(records, pairs, chapter_lookup)
    sys.stdout.write(render_kappa_text(report))
    if args.out:
        Path(args.out).write_text(render_kappa_csv(report), encoding="utf-8")
    return 0


def cmd_gold(config: PipelineConfig, args: argparse.Namespace) -> int:
    records, _ = _load_annotation_records(config, args)
    result = build_gold(records)
    write_gold(result.instances, args.out)
    print(
        f"gold: {len(result.instances)} instances, {result.discarded} disagreements "
        f"discarded, {result.under_annotated} under-annotated -> {args.out}"
    )
    return 0


def cmd_train(config: PipelineConfig, args: argparse.Namespace) -> int:
    gold = load_gold(args.gold)
    mentions = load_mentions(args.mentions)
    instances = eval_instances(gold, mentions)
    out_dir = Path(args.out_dir) if args.out_dir else config.model_dir
    trained, skipped = train_models(
        instances, config.forest, config.seed, out_dir,
        include_irrelevant=config.include_irrelevant,
    )
    for cui, reason in skipped:
        print(f"warning: skipped {cui}: {reason}", file=sys.stderr)
    print(f"trained {len(trained)} models ({len(skipped)} skipped) -> {out_dir}")
    return 0


def cmd_eval(config: PipelineConfig, args: argparse.Namespace) -> int:
    gold = load_gold(args.gold)
    mentions = load_mentions(args.mentions)
    instances = eval_instances(gold, mentions)
    k = args.k if args.k is not None else config.k
    include = args.include_irrelevant or config.include_irrelevant
    report = evaluate(instances, k, config.forest, config.seed, include_irrelevant=include)
    sys.stdout.write(render_report_text(report))
    if args.out_csv:
        Path(args.out_csv).write_text(render_report_csv(report), encoding="utf-8")
    if args.out_text:
        Path(args.out_text).write_text(render_report_text(report), encoding="utf-8")
    return 0


def cmd_serve(config: PipelineConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_app

    _, lexicon = _load_terminology(config)
    corpus = _load_corpus(config)
    if args.mentions:
        mentions = load_mentions(args.mentions)
    else:
        mentions = run_extract(corpus, build_index(lexicon), _triggers(config))
    store = open_store(config.annotation_store, mentions)
    app = build_app(store=store, corpus=corpus, lexicon=lexicon)
    port = args.port if args.port is not None else config.port
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


_COMMANDS = {
    "index": cmd_index,
    "extract": cmd_extract,
    "kappa": cmd_kappa,
    "gold": cmd_gold,
    "train": cmd_train,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = load_config(args.config)
        config = _apply_overrides(config, args)
        return _COMMANDS[args.command](config, args)
    except ComorbidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

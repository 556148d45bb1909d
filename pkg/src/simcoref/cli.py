"""Command-line entry point: preprocess, pretrain, train, evaluate, score."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .corpus import (
    CorpusError,
    Document,
    insert_speakers,
    parse_conll,
    read_jsonlines,
    write_conll,
    write_jsonlines,
)
from .encoder import EncoderConfig
from .learning import (
    CheckpointError,
    Prediction,
    TrainConfig,
    TrainingError,
    checkpoint_train_config,
    load_checkpoint,
    predict,
    pretrain_mentions,
    save_checkpoint,
    train,
)
from .metrics import MetricReport, RecallReport, evaluate_clusters, mention_recall
from .model import CorefModel, ModelConfig

log = logging.getLogger("simcoref")

LOG_ENV = "SIMCOREF_LOG"
MODEL_KEYS = {"dim", "max_segment", "vocab_size", "hidden", "depth"}
TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


class CliError(Exception):
    pass


# ---------------------------------------------------------------- config


def _coerce(value: str):
    lowered = value.strip().lower()
    if lowered in ("none", "null", ""):
        return None
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    return value.strip()


def read_config_file(path: str | Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in MODEL_KEYS | TRAIN_KEYS:
            raise CliError(f"{path}:{lineno}: unknown setting {key!r}")
        values[key] = _coerce(value)
    return values


def gather_settings(args: argparse.Namespace) -> dict:
    settings = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in MODEL_KEYS | TRAIN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def build_train_config(settings: dict, base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    values = {k: v for k, v in settings.items() if k in TRAIN_KEYS}
    if "max_antecedents" in values and values["max_antecedents"] in (0, None):
        values["max_antecedents"] = None
    for key in ("lam", "lr_encoder", "lr_head", "lr_decay"):
        if key in values:
            values[key] = float(values[key])
    try:
        return dataclasses.replace(base, **values)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid training settings: {exc}") from exc


def build_model_config(settings: dict, seed: int) -> ModelConfig:
    enc = {k: settings[k] for k in ("dim", "max_segment", "vocab_size") if k in settings}
    head = {k: settings[k] for k in ("hidden", "depth") if k in settings}
    try:
        return ModelConfig(EncoderConfig(seed=seed, **enc), **head)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid model settings: {exc}") from exc


# ---------------------------------------------------------------- data


def load_documents(path: str | Path, fmt: str = "auto", keep_singletons: bool = False) -> list[Document]:
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path}: no such file")
    if fmt == "auto":
        fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "conll"
    with open(path, encoding="utf-8") as fh:
        try:
            return read_jsonlines(fh) if fmt == "jsonl" else parse_conll(fh, keep_singletons)
        except CorpusError as exc:
            raise CliError(f"{path}: {exc}") from exc


def evaluate(
    model: CorefModel, docs: Sequence[Document], config: TrainConfig
) -> tuple[MetricReport, RecallReport, list[Prediction]]:
    if not docs:
        raise CliError("no documents to evaluate")
    preds = predict(model, docs, config)
    report = evaluate_clusters((d.clusters, p.clusters) for d, p in zip(docs, preds))
    recall = mention_recall([d.gold_mentions for d in docs], [p.proposed for p in preds])
    return report, recall, preds


def render_reports(report: MetricReport, recall: RecallReport | None, fmt: str, name: str = "simcoref") -> str:
    if fmt == "json":
        obj = report.to_dict()
        if recall is not None:
            obj["mention_recall"] = recall.to_dict()
        return json.dumps(obj, indent=2)
    parts = [report.to_table(name)]
    if recall is not None:
        parts.append(recall.to_table(name))
    return "\n\n".join(parts)


# ---------------------------------------------------------------- commands


def cmd_preprocess(args) -> int:
    docs = load_documents(args.input, args.input_format)
    if args.speakers == "on":
        docs = [insert_speakers(d) for d in docs]
    with open(args.output, "w", encoding="utf-8") as fh:
        write_jsonlines(docs, fh)
    tokens = sum(d.n for d in docs)
    clusters = sum(len(d.clusters) for d in docs)
    mentions = sum(len(c) for d in docs for c in d.clusters)
    print(f"docs={len(docs)} tokens={tokens} clusters={clusters} mentions={mentions}")
    return 0


def cmd_pretrain(args) -> int:
    settings = gather_settings(args)
    if args.epochs is not None:
        settings["pretrain_epochs"] = args.epochs
    config = build_train_config(settings)
    docs = load_documents(args.data)
    model_config = build_model_config(settings, config.seed)
    model = pretrain_mentions(docs, config, model_config=model_config)
    save_checkpoint(model, args.out, config)
    log.info("wrote %s", args.out)
    return 0


def cmd_train(args) -> int:
    settings = gather_settings(args)
    if args.epochs is not None:
        settings["epochs"] = args.epochs
    base = checkpoint_train_config(args.init)
    config = build_train_config(settings, base)
    model_config = None
    if MODEL_KEYS & settings.keys():
        stored = load_checkpoint(args.init).config
        model_config = build_model_config(settings, stored.encoder.seed)
    init = load_checkpoint(args.init, model_config)
    docs = load_documents(args.data)
    model = train(docs, config, init)
    save_checkpoint(model, args.out, config)
    log.info("wrote %s", args.out)
    return 0


def cmd_evaluate(args) -> int:
    settings = gather_settings(args)
    config = build_train_config(settings, checkpoint_train_config(args.checkpoint))
    model = load_checkpoint(args.checkpoint)
    docs = load_documents(args.data)
    report, recall, preds = evaluate(model, docs, config)
    if args.predictions:
        predicted = [d.with_clusters(p.clusters) for d, p in zip(docs, preds)]
        with open(args.predictions, "w", encoding="utf-8") as fh:
            if args.predictions.endswith((".jsonl", ".json")):
                write_jsonlines(predicted, fh)
            else:
                write_conll(predicted, fh)
    print(render_reports(report, recall, args.report))
    return 0


def cmd_score(args) -> int:
    gold = {d.doc_key: d for d in load_documents(args.gold, "conll", keep_singletons=True)}
    system = {d.doc_key: d for d in load_documents(args.system, "conll", keep_singletons=True)}
    if not gold:
        raise CliError("no documents to score")
    missing = sorted(gold.keys() ^ system.keys())
    if missing:
        raise CliError("unmatched document keys: " + ", ".join(missing))
    report = evaluate_clusters((gold[k].clusters, system[k].clusters) for k in gold)
    print(render_reports(report, None, args.report))
    return 0


# ---------------------------------------------------------------- parser


def _add_settings(p: argparse.ArgumentParser, model: bool = True) -> None:
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--lam", type=float, help="fraction of tokens kept as candidate mentions")
    p.add_argument("--max-width", dest="max_width", type=int, help="maximum span length L")
    p.add_argument("--max-antecedents", dest="max_antecedents", type=int, help="0 means unlimited")
    if model:
        p.add_argument("--dim", type=int)
        p.add_argument("--max-segment", dest="max_segment", type=int)
        p.add_argument("--vocab-size", dest="vocab_size", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--depth", type=int)


def _add_training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr-encoder", dest="lr_encoder", type=float)
    p.add_argument("--lr-head", dest="lr_head", type=float)
    p.add_argument("--lr-decay", dest="lr_decay", type=float)
    p.add_argument("--detect-scope", dest="detect_scope", choices=["all", "pruned"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simcoref", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="CoNLL-2012 or JSON lines to JSON lines")
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=["auto", "conll", "jsonl"], default="auto")
    p.add_argument("--output", required=True)
    p.add_argument("--speakers", choices=["on", "off"], default="on")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("pretrain", help="pretrain the mention scorer")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_settings(p)
    _add_training(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="joint training from a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--out", required=True)
    _add_settings(p)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run a checkpoint and score its predictions")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", choices=["text", "json"], default="text")
    p.add_argument("--predictions", help="write predicted clusters (.jsonl or CoNLL)")
    _add_settings(p, model=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="score a system CoNLL file against a gold one")
    p.add_argument("--gold", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--report", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "INFO").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "INFO",
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CorpusError, CheckpointError, TrainingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: ask one question, replay a trace, run an evaluation."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import uuid
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .core import Language, Question
from .evaluation import DatasetError, GroupBy, load_dataset, run_eval
from .orchestrator import replay_trace, run_query
from .reader import ReadMode
from .trace import TraceError

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_EXHAUSTED = 2

DEFAULT_CONFIG = "deepsearch.yaml"

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepsearch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="answer one question through the agent pipeline")
    ask.add_argument("question")
    ask.add_argument("--config", default=None, help=f"pipeline config (default ./{DEFAULT_CONFIG})")
    ask.add_argument("--trace", default=None, metavar="OUT.jsonl", help="write the run trace here")
    ask.add_argument("--mode", choices=[m.value for m in ReadMode], default=None)
    ask.add_argument("--max-steps", type=int, default=None)
    ask.add_argument("--max-rounds", type=int, default=None)
    ask.add_argument("--no-fallback", action="store_true", help="disable the direct-answer fallback")

    replay = sub.add_parser("replay", help="validate and summarize a recorded trace")
    replay.add_argument("trace", metavar="TRACE.jsonl")

    evaluate = sub.add_parser("eval", help="run the pipeline over a dataset and score Pass@1")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--config", default=None)
    evaluate.add_argument("--group-by", choices=[g.value for g in GroupBy], default=GroupBy.LANGUAGE.value)
    evaluate.add_argument("--parallel", type=int, default=1)
    evaluate.add_argument("--out", default=None, metavar="DIR")
    return parser


def _load_pipeline_config(path: str | None) -> PipelineConfig:
    resolved = Path(path) if path else Path(DEFAULT_CONFIG)
    if path is None and not resolved.exists():
        raise ConfigError(
            f"no --config given and ./{DEFAULT_CONFIG} does not exist"
        )
    return load_config(resolved)


def _cmd_ask(args: argparse.Namespace) -> int:
    cfg = _load_pipeline_config(args.config)
    if args.mode is not None:
        cfg.reader = dataclasses.replace(cfg.reader, mode=ReadMode(args.mode))
    if args.max_steps is not None:
        cfg.max_steps = args.max_steps
    if args.max_rounds is not None:
        cfg.max_rounds = args.max_rounds
    if args.no_fallback:
        cfg.fallback_enabled = False

    question = Question(id=f"cli-{uuid.uuid4().hex[:8]}", text=args.question, language=Language.OTHER)
    result = run_query(question, cfg, trace_path=args.trace)
    print(result.answer)
    if result.used_fallback:
        print("(answered via direct-reasoning fallback)", file=sys.stderr)
    return EXIT_OK if result.answer else EXIT_EXHAUSTED


def _cmd_replay(args: argparse.Namespace) -> int:
    result = replay_trace(args.trace)
    print(f"answer: {result.answer}")
    print(f"used_fallback: {result.used_fallback}")
    print(f"steps_used: {result.steps_used}")
    print(f"rounds_total: {result.rounds_total}")
    print(f"events: {len(result.trace)}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_pipeline_config(args.config)
    records = load_dataset(args.dataset)
    report, outcomes = run_eval(
        records,
        cfg,
        parallelism=max(1, args.parallel),
        out_dir=args.out,
        group_by=GroupBy(args.group_by),
    )
    print(report.format_table())
    if args.out:
        print(f"report and per-record traces written to {args.out}", file=sys.stderr)
    else:
        print(json.dumps(report.to_json(), ensure_ascii=False))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "ask":
            return _cmd_ask(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "eval":
            return _cmd_eval(args)
        raise AssertionError(f"unknown command {args.command!r}")
    except (ConfigError, DatasetError, TraceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

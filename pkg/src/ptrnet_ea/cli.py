"""Command line interface: ``ptrnet-ea {gen,train,eval,baseline,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .exceptions import PtrNetEAError
from .harness import runner
from .harness.config import load_run_config

log = logging.getLogger("ptrnet_ea")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=None, help="worker processes for population evaluation")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ptrnet-ea", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a TSPSET dataset file")
    gen.add_argument("--n", type=int, help="nodes per instance")
    gen.add_argument("--preset", choices=sorted(runner.PRESETS), help="TSP20/100/500/1000 node counts")
    gen.add_argument("--count", type=int, help="number of instances (default from --scale)")
    gen.add_argument("--scale", choices=sorted(runner.SCALES), default="desk")
    gen.add_argument("--split", choices=("train", "test"), default="train")

    train = sub.add_parser("train", parents=[common], help="train with NCS from a run config")
    train.add_argument("config", help="key = value run config file")
    train.add_argument("--resume", action="store_true", help="continue from the checkpoint in the output directory")
    train.add_argument("--stop-after", type=int, default=None, help="run at most this many iterations, then checkpoint")

    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    ev.add_argument("checkpoint")
    ev.add_argument("dataset")
    ev.add_argument("--mode", choices=("best", "portfolio"), default="best")

    base = sub.add_parser("baseline", parents=[common], help="classical solver report")
    base.add_argument("dataset")
    base.add_argument("--method", choices=("nn", "two_opt", "oracle"), required=True)
    base.add_argument("--start", type=int, default=0, help="start node for nearest neighbour")
    base.add_argument("--max-passes", type=int, default=1000)

    rep = sub.add_parser("report", parents=[common], help="consolidate run directories")
    rep.add_argument("runs", nargs="+", help="run directories")
    return parser


def _cmd_gen(args) -> int:
    if args.n is None and args.preset is None:
        raise PtrNetEAError("gen needs --n or --preset")
    n = args.n if args.n is not None else runner.PRESETS[args.preset]
    count = args.count if args.count is not None else runner.SCALES[args.scale][args.split]
    seed = 0 if args.seed is None else args.seed
    out = args.out or f"tsp{n}_{args.split}_s{seed}.tsp"
    path = runner.generate(n, count, seed, args.split, out)
    log.info("wrote %d instances (n=%d) to %s", count, n, path)
    return 0


def _cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.out is not None:
        cfg = replace(cfg, out_dir=Path(args.out))
    result = runner.run_training(cfg, resume=args.resume, stop_after=args.stop_after)
    rows = result.record.rows
    log.info("iterations=%d best_fitness=%.6f", rows[-1].t + 1 if rows else 0, rows[-1].best_fitness if rows else float("nan"))
    return 0


def _default_report_path(args, stem: str) -> Path:
    return Path(args.out) if args.out else Path(f"{stem}{runner.REPORT_SUFFIX}")


def _cmd_eval(args) -> int:
    out = _default_report_path(args, f"eval_{args.mode}")
    report = runner.evaluate_checkpoint(args.checkpoint, args.dataset, args.mode, out)
    print(f"{args.mode}: {report['mean']:.4f} ± {report['std']:.4f} over {report['count']} instances")
    return 0


def _cmd_baseline(args) -> int:
    out = _default_report_path(args, f"baseline_{args.method}")
    report = runner.run_baseline(args.dataset, args.method, out, start=args.start, max_passes=args.max_passes)
    print(f"{args.method}: {report['mean']:.4f} ± {report['std']:.4f} over {report['count']} instances")
    return 0


def _cmd_report(args) -> int:
    out = args.out or "report"
    result = runner.consolidate(args.runs, out)
    print(json.dumps({"rows": len(result["rows"]), "curves": len(result["curves"]), "out": str(out)}))
    return 0


COMMANDS = {"gen": _cmd_gen, "train": _cmd_train, "eval": _cmd_eval, "baseline": _cmd_baseline, "report": _cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (PtrNetEAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

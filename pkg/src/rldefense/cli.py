"""Command-line entry point.

    rldefense full-pipeline --scenario highway --seed 0 --out artifacts/highway
    rldefense evaluate --config run.cfg --set eval.episodes=20

Output goes to ``--out``; without it, to ``$RD_ARTIFACT_DIR/<scenario>``,
and without that, to ``./artifacts/<scenario>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, RunConfig

log = logging.getLogger("rldefense")

COMMANDS = ("train", "collect", "fit-defenses", "evaluate", "report", "full-pipeline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rldefense", description="Adversarial attack and defense pipeline for a DQN driving agent."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--out", type=Path, help="artifact directory")
    common.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
    common.add_argument("--scenario", choices=("highway", "merge"), help="overrides run.scenario")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override one config key"
    )
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args) -> RunConfig:
    if args.config is None:
        cfg = RunConfig()
    elif not args.config.exists():
        log.warning("config file %s not found; using defaults", args.config)
        cfg = RunConfig()
    else:
        cfg = RunConfig.from_file(args.config)
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not KEY=VALUE", source="--set")
        cfg.set(key.strip(), value)
    if args.seed is not None:
        cfg.set("run.seed", args.seed)
    if args.scenario is not None:
        cfg.set("run.scenario", args.scenario)
    return cfg


def artifact_dir(args, cfg: RunConfig) -> Path:
    if args.out is not None:
        return args.out
    root = os.environ.get("RD_ARTIFACT_DIR")
    return Path(root if root else "artifacts") / cfg.scenario_kind


def _train_progress(episode: int, history) -> None:
    if (episode + 1) % 500 == 0:
        recent = history.returns[-100:]
        log.info("episode %d  SMA(100) %.2f", episode + 1, sum(recent) / len(recent))


def run(args) -> int:
    cfg = load_config(args)
    out = artifact_dir(args, cfg)
    command = args.command
    if command == "train":
        pipeline.cmd_train(cfg, out, progress=_train_progress)
    elif command == "collect":
        pipeline.cmd_collect(cfg, out)
    elif command == "fit-defenses":
        info = pipeline.cmd_fit_defenses(cfg, out)
        mse0, mse1 = info["autoencoder_initial_mse"], info["autoencoder_final_mse"]
        print(f"autoencoder MSE {mse0:.5f} -> {mse1:.5f}; PCA k={info['pca_k']}")
    elif command == "evaluate":
        info = pipeline.cmd_evaluate(cfg, out)
        if "epsilon" in info:
            print(f"epsilon {info['epsilon']:g}, eta {info['eta']:g}")
    elif command == "report":
        print(pipeline.cmd_report(out)["table"], end="")
    else:
        print(pipeline.full_pipeline(cfg, out, progress=_train_progress)["report"]["table"], end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"rldefense: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"rldefense: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

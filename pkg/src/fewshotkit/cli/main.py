"""Few-shot benchmark pipeline: data, pre-training, episodes, evaluation, hardness."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from ..errors import ConfigError, FewShotError, FileFormatError, NumericError
from . import config as cfgmod
from .commands import COMMANDS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_OTHER = 5

log = logging.getLogger("fewshotkit")


HELP = {
    "gen-data": "generate the synthetic dataset and class split",
    "pretrain": "pre-train the backbone on the train or train+val classes",
    "episodes": "mint the episode file for every protocol in the grid",
    "eval": "evaluate every method on every episode file",
    "hardness": "score episode hardness and fit accuracy against it",
    "sweep": "evaluate along one axis (query shot, way or shot)",
}


def build_parser():
    p = argparse.ArgumentParser(prog="fewshotkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    init = sub.add_parser("init-config", help="write a config file with every default")
    init.add_argument("path")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", help="INI run configuration (defaults if omitted)")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="parallel evaluation processes")
        sp.add_argument("--method", action="append", help="restrict to this method (repeatable)")
        sp.add_argument("--episodes-per-protocol", type=int, dest="episodes")
        sp.add_argument("--pool", choices=("train", "train+val"), help="pre-training class pool")
        sp.add_argument("--axis", choices=("query_shot", "way", "shot"), help="sweep axis")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def apply_overrides(cfg, args):
    run = dataclasses.replace(cfg.run)
    if args.seed is not None:
        run.seed = args.seed
    if args.out:
        run.out_dir = args.out
    if args.workers is not None:
        run.workers = args.workers
    ev, sw, sp = cfg.eval, cfg.sweep, cfg.split
    if args.method:
        ev = dataclasses.replace(ev, methods=tuple(args.method))
        sw = dataclasses.replace(sw, methods=tuple(args.method))
    if args.episodes is not None:
        ev = dataclasses.replace(ev, n_episodes=args.episodes)
        sw = dataclasses.replace(sw, n_episodes=args.episodes)
    if args.pool:
        sp = dataclasses.replace(sp, pool=args.pool)
    if args.axis:
        sw = dataclasses.replace(sw, axis=args.axis)
    return dataclasses.replace(cfg, run=run, eval=ev, sweep=sw, split=sp)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "init-config":
            cfgmod.save(args.path, cfgmod.RunConfig())
            return EXIT_OK
        cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
        cfg = apply_overrides(cfg, args)
        man = COMMANDS[args.command](cfg)
        print(f"{args.command}: ok -> {man.path}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FewShotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())

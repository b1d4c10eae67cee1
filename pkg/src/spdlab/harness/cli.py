"""``spd-lab <command> --config FILE [--seed S] [--out DIR] [--single-context]``"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, packaged_config
from .experiments import COMMANDS, run_command
from .io import _jsonable


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spd-lab", description="Sequential social dilemma experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True,
                   help="TOML file, or the name of a bundled config (applepear, gathering, matrix)")
    p.add_argument("--seed", type=int, default=None, help="override the config's root seed")
    p.add_argument("--out", default=None, help="output directory (default: <config out>/<command>)")
    p.add_argument("--single-context", action="store_true",
                   help="run every cell serially in this process")
    return p


def resolve_config_path(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    return packaged_config(value)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(resolve_config_path(args.config))
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out) if args.out else Path(cfg.out) / args.command
        results = run_command(args.command, cfg, out_dir, args.single_context)
    except ConfigError as exc:
        print(f"spd-lab: configuration error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"command": args.command, "out": str(out_dir), "config_hash": cfg.hash(),
                      "seed": cfg.seed}, sort_keys=True))
    print(json.dumps(_jsonable(results), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())

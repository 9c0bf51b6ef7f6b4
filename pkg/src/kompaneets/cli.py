"""``simulate`` command: run a configuration (or a sweep of them) and emit files.

Usage::

    simulate [config.json] [--out DIR] [--preset NAME] [--sweep key=v1,v2,...]

With both a preset and a config file, the file is merged over the preset.
``KOMPANEETS_OUTPUT_ROOT`` overrides the output root when ``--out`` is absent.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path

from .config import PRESETS, deep_merge, load_json, preset_data, set_path, validate_config
from .errors import KompaneetsError
from .scenario import execute

OUTPUT_ROOT_ENV = "KOMPANEETS_OUTPUT_ROOT"

log = logging.getLogger("kompaneets")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_sweep(specs) -> list[tuple[str, list]]:
    """``["scheme.dt=1e-3,1e-4"]`` -> ``[("scheme.dt", [0.001, 0.0001])]``."""
    out = []
    for spec in specs or ():
        key, sep, values = spec.partition("=")
        if not sep or not key or not values:
            raise KompaneetsError(f"bad --sweep {spec!r}; expected key=v1,v2,...")
        out.append((key, [_parse_value(v) for v in values.split(",")]))
    return out


def _run_label(assign) -> str:
    return "_".join(f"{k.replace('.', '-')}={v}" for k, v in assign) or "run"


def expand(data: dict, sweep) -> list[tuple[str, dict]]:
    """Cartesian product of sweep assignments, one validated document each."""
    if not sweep:
        return [("", data)]
    keys = [k for k, _ in sweep]
    runs = []
    for combo in product(*(vals for _, vals in sweep)):
        doc = data
        for k, v in zip(keys, combo):
            doc = set_path(doc, k, v)
        runs.append((_run_label(zip(keys, combo)), doc))
    return runs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--preset", choices=PRESETS, help="start from a shipped preset")
    p.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...",
                   help="dotted config key and comma-separated values; repeatable")
    p.add_argument("--workers", type=int, default=None, help="threads for sweep runs")
    p.add_argument("--schema", action="store_true", help="print the config JSON schema and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args) -> dict:
    data = preset_data(args.preset) if args.preset else {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise KompaneetsError(f"cannot read {args.config}: {exc.strerror}") from None
        data = deep_merge(data, load_json(text))
    if not data:
        raise KompaneetsError("give a config file, a --preset, or both")
    return data


def _out_root(args, cfg) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUTPUT_ROOT_ENV)
    if env:
        return Path(env) / cfg.name
    return Path(cfg.output_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.schema:
        from .config import json_schema
        print(json.dumps(json_schema(), indent=2))
        return 0
    try:
        data = _load(args)
        runs = [(label, validate_config(doc)) for label, doc in expand(data, parse_sweep(args.sweep))]
    except KompaneetsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    root = _out_root(args, runs[0][1])

    def one(item):
        label, cfg = item
        out = root / label if label else root
        try:
            return label, execute(cfg, out)
        except (KompaneetsError, OSError) as exc:
            log.error("%s: %s", label or cfg.name, exc)
            return label, None

    if len(runs) == 1:
        results = [one(runs[0])]
    else:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(one, runs))

    status = 0
    for label, outcome in results:
        if outcome is None:
            status = 1
            continue
        state = "ok" if outcome.status == 0 else f"FAILED ({len(outcome.failures)} audit(s))"
        print(f"{outcome.out_dir}: {state}")
        status = max(status, outcome.status)
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    allocsim <mode> --config cfg.json --out results/ [--seed N] [--trace]
                    [--grid T=1e3,1e4,1e5] [--backend numba|numpy]

Modes: offline, stationary, nonstationary, greedy, segment-plan. A grid
run rebuilds the config's scenario at each requested T and writes one
subdirectory per value. Exit codes: 0 success, 2 configuration problem,
3 offline solve failed to converge, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AllocSimError, NonConvergence, ParseError
from .harness import run_experiment
from .model import (
    SimConfig,
    config_from_document,
    scenario_nonstationary,
    scenario_stationary,
    substream,
)
from .segmentation import segment_time_span, segment_weights, write_plan_csv

COMMANDS = ("offline", "stationary", "nonstationary", "greedy", "segment-plan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allocsim",
        description="Budgeted-allocation simulation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run the {name} mode")
        s.add_argument("--config", required=True, help="config JSON path")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        s.add_argument("--trace", action="store_true",
                       help="also write per-arrival trace.csv and lambda.csv")
        s.add_argument("--grid", default=None, metavar="T=V1,V2,...",
                       help="rerun the config's scenario at several horizons")
        s.add_argument("--backend", choices=("numba", "numpy"), default=None,
                       help="force a compute backend for this run")
    return parser


def _parse_grid(text: str) -> list[int]:
    key, _, values = text.partition("=")
    if key.strip() != "T" or not values:
        raise ParseError(f"--grid expects T=V1,V2,... (got {text!r})")
    try:
        return [int(float(v)) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"bad --grid value in {text!r}: {exc}") from exc


def _rebuild_scenario(config: SimConfig, horizon: int) -> SimConfig:
    info = config.scenario
    if not info:
        raise ParseError(
            "--grid needs a config with scenario provenance "
            "(generated by the scenario builders)"
        )
    if info["kind"] == "stationary":
        return scenario_stationary(T=horizon, seed=config.seed)
    return scenario_nonstationary(
        kind=info["kind"], T=horizon,
        horizon_hours=info["horizon_hours"], seed=config.seed,
    )


def _emit_plan_only(config: SimConfig, out_dir: Path) -> None:
    from .model import NonstationaryArrivals

    model = config.arrivals
    if not isinstance(model, NonstationaryArrivals):
        raise ParseError("segment-plan needs a non-stationary config")
    p = config.params
    plan = segment_time_span(
        model.rate_fns, model.t0, model.t_end, p.epsilon, p.delta, p.d, p.grid_dt
    )
    import numpy as np

    rng = np.random.default_rng(substream(config.seed, "weights"))
    for seg in plan.segments:
        segment_weights(seg, model.rate_fns, rng)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_plan_csv(plan, out_dir / "plan.csv")


def _run_one(config: SimConfig, command: str, out_dir: Path,
             trace_flag: bool, backend: str | None) -> None:
    if command == "segment-plan":
        _emit_plan_only(config, out_dir)
        return
    run_experiment(
        config, command, out_dir=out_dir, trace_flag=trace_flag, backend=backend
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ParseError("config root must be a JSON object")
        if args.seed is not None:
            doc["seed"] = args.seed
        config = config_from_document(doc)
    except FileNotFoundError:
        print(f"config error: {args.config} not found", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON ({exc})", file=sys.stderr)
        return 2
    except AllocSimError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4

    out_root = Path(args.out)
    try:
        if args.grid:
            for horizon in _parse_grid(args.grid):
                cfg = _rebuild_scenario(config, horizon)
                _run_one(cfg, args.command, out_root / f"T_{horizon}",
                         args.trace, args.backend)
        else:
            _run_one(config, args.command, out_root, args.trace, args.backend)
    except NonConvergence as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (AllocSimError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())

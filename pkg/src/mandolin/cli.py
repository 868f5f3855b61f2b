"""Command line: ``mandolin run | sweep-gamma | eval``.

Exit status is 0 on success, 1 for bad input, 2 when a stage fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .grounding import GroundingLimitError
from .pipeline import (
    InputError,
    PipelineConfig,
    StageError,
    evaluate_predictions,
    load_config,
    parse_stages,
    run_pipeline,
    sweep_gamma,
)
from .rdf import NTriplesError

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 1, 2


def _gamma(text: str) -> int:
    return int(float(text))


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="key = value config file")
    p.add_argument("--eta-bar", type=float, help="minimum head coverage")
    p.add_argument("--gamma", type=_gamma, help="Gibbs updates (accepts 1e6)")
    p.add_argument("--tau", type=float, help="prediction threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--stages", help="all, a stage, or a range like mine-infer")
    p.add_argument("--out", type=Path, help="output directory")


def _apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    for attr, value in (("eta_bar", args.eta_bar), ("gamma", args.gamma), ("tau", args.tau),
                        ("seed", args.seed), ("out", args.out)):
        if value is not None:
            setattr(config, attr, value)
    if args.stages is not None:
        config.stages = parse_stages(args.stages)
    return config.validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mandolin", description="MLN link prediction over RDF graphs")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run pipeline stages")
    _add_overrides(run)

    sweep = sub.add_parser("sweep-gamma", help="Hits@10 and runtime over a list of gamma values")
    _add_overrides(sweep)
    sweep.add_argument("--gammas", required=True, help="comma-separated gamma values")
    sweep.add_argument("--repeats", type=int, default=1, help="keep the fastest of this many timings")
    sweep.add_argument("--csv", type=Path, help="output CSV (default <out>/gamma_sweep.csv)")

    ev = sub.add_parser("eval", help="evaluate a scores or predictions file against a split")
    ev.add_argument("--predictions", required=True, type=Path)
    ev.add_argument("--split", required=True, type=Path, help="directory with train.nt, valid.nt, test.nt")
    ev.add_argument("--out", type=Path, help="write report.csv and ranks.tsv here")
    ev.add_argument("--raw", action="store_true", help="unfiltered ranks (diagnostics)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "eval":
            report = evaluate_predictions(args.predictions, args.split, args.out, filtered=not args.raw)
            for name, value in report.rows():
                print(f"{name},{value}")
            return EXIT_OK
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "run":
            manifest = run_pipeline(config)
            print(f"stages {','.join(manifest.stages_run)} done; artifacts in {config.out}")
            return EXIT_OK
        gammas = [_gamma(g) for g in args.gammas.split(",") if g.strip()]
        csv_path = args.csv or Path(config.out) / "gamma_sweep.csv"
        Path(config.out).mkdir(parents=True, exist_ok=True)
        for row in sweep_gamma(config, gammas, args.repeats, csv_path):
            print(f"{row.gamma},{row.hits_at_10},{row.seconds:.4f}")
        return EXIT_OK
    except (InputError, NTriplesError, FileNotFoundError) as e:
        print(f"mandolin: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (StageError, GroundingLimitError) as e:
        print(f"mandolin: {e}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as e:
        print(f"mandolin: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

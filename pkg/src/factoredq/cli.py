"""Command-line interface.

Subcommands::

    factoredq list-games
    factoredq dump-q <game> [--out FILE]
    factoredq run [CONFIG.json] [--output-dir D] [--seed N] [--samples N]
                  [--reps N] [--temperature T] [--methods A,B] [--games X,Y]
                  [--jobs N]
    factoredq plot <run-dir> [--type N] [--out D]
    factoredq curves <run-dir>
    factoredq table <run-dir>

Flags override config-file fields.  The environment variable
``FACTOREDQ_OUTPUT_DIR`` overrides the output root when ``--output-dir`` is
not given.  The exit code is nonzero iff any grid cell errored.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .games import GameId, game_to_json, make_game, true_q_table
from .harness import (
    DEFAULT_METHODS,
    METHODS,
    ExperimentConfig,
    config_from_json,
    emit_run_barplots,
    emit_summary_tables,
    emit_training_curves,
    load_summary_inputs,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factoredq",
        description="Factored action-value benchmark lab for cooperative one-shot games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-games", help="list game ids, sizes, and method labels")

    dump = sub.add_parser("dump-q", help="print a game spec and its exact Q table")
    dump.add_argument("game", choices=[g.value for g in GameId])
    dump.add_argument("--out", default=None, help="write the table as CSV to this file")

    run = sub.add_parser("run", help="execute a (games x methods x seeds) grid")
    run.add_argument("config", nargs="?", default=None, help="JSON experiment config")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--seed", type=int, default=None, help="base seed")
    run.add_argument("--samples", type=int, default=None)
    run.add_argument("--reps", type=int, default=None)
    run.add_argument("--temperature", type=float, default=None)
    run.add_argument("--methods", default=None, help="comma-separated method labels")
    run.add_argument("--games", default=None, help="comma-separated game ids")
    run.add_argument("--jobs", type=int, default=None, help="parallel worker count")

    plot = sub.add_parser("plot", help="emit bar-plot CSV/SVG for archived runs")
    plot.add_argument("run_dir")
    plot.add_argument("--type", type=int, default=None, help="joint type index (Bayesian games)")
    plot.add_argument("--out", default=None, help="output directory (default <run-dir>/plots)")

    curves = sub.add_parser("curves", help="re-emit training-curve files from a run directory")
    curves.add_argument("run_dir")

    table = sub.add_parser("table", help="re-emit the summary table from a run directory")
    table.add_argument("run_dir")
    return parser


def _cmd_list_games() -> int:
    print("games:")
    for gid in GameId:
        spec = make_game(gid)
        shape = f"{spec.type_space_size} types x {spec.num_joint_actions} joint actions"
        print(f"  {gid.value:<26} n={spec.n} |A_i|={spec.actions_per_agent}  ({shape})")
    print("methods:")
    for label, method in METHODS.items():
        marker = "*" if label in DEFAULT_METHODS else " "
        print(f" {marker} {label:<6} scheme={method.scheme.value:<17} rule={method.rule.value}")
    print("(* = in the default grid)")
    return 0


def _cmd_dump_q(game: str, out: str | None) -> int:
    spec = make_game(game)
    table = true_q_table(spec)
    print(game_to_json(spec))
    if out is None:
        for t in range(table.n_types):
            row = " ".join(f"{v:g}" for v in table.values[t])
            print(f"type {t}: {row}")
    else:
        import csv

        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["type_index", "action_index", "q"])
            for t in range(table.n_types):
                for j in range(table.n_actions):
                    writer.writerow([t, j, repr(float(table.values[t, j]))])
        print(f"wrote {table.n_types * table.n_actions} rows to {out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = config_from_json(Path(args.config).read_text())
    else:
        config = ExperimentConfig()
    overrides: dict = {}
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    elif os.environ.get("FACTOREDQ_OUTPUT_DIR"):
        overrides["output_dir"] = os.environ["FACTOREDQ_OUTPUT_DIR"]
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.samples is not None:
        overrides["samples"] = args.samples
    if args.reps is not None:
        overrides["repetitions"] = args.reps
    if args.temperature is not None:
        overrides["temperature"] = args.temperature
    if args.methods is not None:
        overrides["methods"] = tuple(s.strip() for s in args.methods.split(",") if s.strip())
    if args.games is not None:
        overrides["games"] = tuple(s.strip() for s in args.games.split(",") if s.strip())
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    config = dataclasses.replace(config, **overrides)

    outcome = run_experiment(config)
    print(f"completed {len(outcome.results)} runs into {config.output_dir}")
    for skip in outcome.skipped:
        print(f"skipped {skip['game']}/{skip['method']} rep {skip['rep']}: {skip['reason']}")
    for failure in outcome.failed:
        print(
            f"FAILED {failure['game']}/{failure['method']} rep {failure['rep']}: "
            f"{failure['reason']}",
            file=sys.stderr,
        )
    return 1 if outcome.failed else 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-games":
        return _cmd_list_games()
    if args.command == "dump-q":
        return _cmd_dump_q(args.game, args.out)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "plot":
        emitted = emit_run_barplots(args.run_dir, args.out, args.type)
        print(f"emitted {len(emitted)} plot files")
        return 0
    if args.command == "curves":
        results = load_summary_inputs(args.run_dir)
        path = emit_training_curves(results, args.run_dir)
        print(f"emitted curves for {len(results)} runs under {path}")
        return 0
    if args.command == "table":
        results = load_summary_inputs(args.run_dir)
        path = emit_summary_tables(results, args.run_dir)
        print(f"summarised {len(results)} runs into {path}")
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())

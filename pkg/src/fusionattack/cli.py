"""Command-line entry points: single runs and factorial sweeps.

`run` executes one simulation, prints a human-readable summary, and can
dump the per-round record (with full-precision report vectors and the
frozen fusion model alongside) for exact offline replay. `sweep` fans a
(m, tau, seed) grid out across worker threads and writes one CSV row
per cell plus a markdown mean/std summary per (m, tau).

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigDocument, parse_config, parse_config_text
from .errors import ConfigurationError, FusionAttackError
from .fusion import export_model
from .simulator import AggregateRow, RunReport, SweepCell, aggregate_cells, run, sweep

__all__ = ["main"]

SWEEP_CSV_COLUMNS = (
    "m",
    "tau",
    "seed",
    "hit_ratio",
    "attacks_launched",
    "attacks_flipped",
    "attack_rate",
    "surrogate_agreement",
    "fusion_clean_accuracy",
)


def _fmt(value: float | None) -> str:
    """Six significant digits; undefined values serialize as empty fields."""
    if value is None:
        return ""
    return format(float(value), ".6g")


def sweep_csv_text(cells: list[SweepCell]) -> str:
    lines = [",".join(SWEEP_CSV_COLUMNS)]
    for c in cells:
        lines.append(
            ",".join(
                (
                    str(c.m),
                    _fmt(c.tau),
                    str(c.seed),
                    _fmt(c.hit_ratio),
                    str(c.attacks_launched),
                    str(c.attacks_flipped),
                    _fmt(c.attack_rate),
                    _fmt(c.surrogate_agreement),
                    _fmt(c.fusion_clean_accuracy),
                )
            )
        )
    return "\n".join(lines) + "\n"


def aggregate_markdown(rows: list[AggregateRow]) -> str:
    lines = [
        "| m | tau | seeds | hit_ratio (mean ± std) | attack_rate (mean) |",
        "|--:|----:|------:|-----------------------:|-------------------:|",
    ]
    for r in rows:
        if r.mean_hit_ratio is None:
            hit = "undefined"
        else:
            hit = f"{_fmt(r.mean_hit_ratio)} ± {_fmt(r.std_hit_ratio)}"
            if r.n_defined < r.n_seeds:
                hit += f" ({r.n_defined}/{r.n_seeds} defined)"
        lines.append(
            f"| {r.m} | {_fmt(r.tau)} | {r.n_seeds} | {hit} | {_fmt(r.mean_attack_rate)} |"
        )
    return "\n".join(lines) + "\n"


def rounds_csv_text(report: RunReport) -> str:
    """Per-round dump: record fields plus full-precision report vectors.

    Reading coordinates are printed with repr (shortest round-trip)
    precision rather than 6 significant digits: the dump exists so the
    replay oracle can re-fuse every vector and land on bit-identical
    decisions, which rounding would break.
    """
    n = report.clean_report_vectors.shape[1]
    header = [
        "round_id",
        "true_label",
        "clean_decision",
        "attacked_decision",
        "launched",
        "inferred_label",
        "confidence",
        "flipped",
    ]
    header += [f"clean_{i}" for i in range(n)]
    header += [f"attacked_{i}" for i in range(n)]
    lines = [",".join(header)]
    for i, rec in enumerate(report.records):
        row = [
            str(rec.round_id),
            str(int(report.true_labels[i])),
            str(rec.clean_decision),
            str(rec.attacked_decision),
            str(int(rec.launched)),
            str(rec.inferred_label),
            _fmt(rec.confidence),
            str(int(rec.flipped)),
        ]
        row += [repr(float(v)) for v in report.clean_report_vectors[i]]
        row += [repr(float(v)) for v in report.attacked_report_vectors[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def run_summary_text(report: RunReport) -> str:
    cfg = report.config
    rows = [
        ("master_seed", str(cfg.master_seed)),
        (
            "devices",
            f"{cfg.scenario.n_devices} (controlled: {cfg.adversary.n_controlled})",
        ),
        ("confidence_threshold", _fmt(cfg.adversary.confidence_threshold)),
        (
            "rounds",
            f"{cfg.scenario.n_rounds} (observation {cfg.observation_rounds}, "
            f"attack {cfg.attack_rounds})",
        ),
        ("fusion_train_accuracy", _fmt(report.fusion_train_accuracy)),
        ("fusion_clean_accuracy", _fmt(report.fusion_clean_accuracy)),
        (
            "surrogate_agreement",
            "undefined (no controlled devices)"
            if report.surrogate_agreement is None
            else _fmt(report.surrogate_agreement),
        ),
        ("attacks_launched", str(report.attacks_launched)),
        ("attacks_flipped", str(report.attacks_flipped)),
        ("attack_rate", _fmt(report.attack_rate)),
        (
            "hit_ratio",
            "undefined (no attacks launched)"
            if report.hit_ratio is None
            else _fmt(report.hit_ratio),
        ),
    ]
    width = max(len(name) for name, _ in rows)
    lines = ["simulation summary"]
    lines += [f"  {name.ljust(width)}  {value}" for name, value in rows]
    return "\n".join(lines) + "\n"


def _load_document(args: argparse.Namespace) -> ConfigDocument:
    if args.config is None:
        doc = parse_config_text("", source="<defaults>")
    else:
        doc = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigurationError(f"--seed must be a u64, got {args.seed}")
        doc = replace(doc, run=replace(doc.run, master_seed=args.seed))
    return doc


def cmd_run(args: argparse.Namespace) -> int:
    doc = _load_document(args)
    out = args.out or doc.rounds_csv
    if args.dump_rounds and out is None:
        raise ConfigurationError("--dump-rounds requires an output path (--out)")
    report = run(doc.run)
    sys.stdout.write(run_summary_text(report))
    if args.dump_rounds:
        out_path = Path(out)
        out_path.write_text(rounds_csv_text(report))
        model_path = Path(str(out_path) + ".model.txt")
        model_path.write_text(export_model(report.fusion_model))
        sys.stdout.write(f"per-round records: {out_path}\n")
        sys.stdout.write(f"fusion model: {model_path}\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    doc = _load_document(args)
    cells = sweep(
        doc.run,
        list(doc.m_values),
        list(doc.tau_values),
        list(doc.seeds),
        jobs=args.jobs,
    )
    csv_path = Path(args.out or doc.sweep_csv)
    csv_path.write_text(sweep_csv_text(cells))
    md_path = Path(doc.summary_markdown or csv_path.with_suffix(".md"))
    markdown = aggregate_markdown(aggregate_cells(cells))
    md_path.write_text(markdown)
    sys.stdout.write(
        f"swept {len(doc.m_values)} m x {len(doc.tau_values)} tau x "
        f"{len(doc.seeds)} seeds = {len(cells)} runs\n"
    )
    sys.stdout.write(f"rows: {csv_path}\nsummary: {md_path}\n")
    sys.stdout.write(markdown)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusionattack",
        description=(
            "Deterministic simulator of confidence-gated data falsification "
            "against a data-fusion center."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one simulation")
    p_run.add_argument("--config", metavar="PATH", help="JSON config document")
    p_run.add_argument("--seed", type=int, metavar="U64", help="override master_seed")
    p_run.add_argument("--out", metavar="PATH", help="per-round CSV path")
    p_run.add_argument(
        "--dump-rounds",
        action="store_true",
        help="write per-round records and the fusion model for exact replay",
    )
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the configured (m, tau, seed) grid")
    p_sweep.add_argument("--config", metavar="PATH", help="JSON config document")
    p_sweep.add_argument("--seed", type=int, metavar="U64", help="override master_seed")
    p_sweep.add_argument("--out", metavar="PATH", help="sweep CSV path")
    p_sweep.add_argument(
        "--jobs", type=int, default=1, metavar="N", help="worker threads (default 1)"
    )
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FusionAttackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: simulate / separate / summarize.

Exit codes: 0 success, 1 usage error, 2 runtime failure. The default worker
count for simulations comes from the SPECTRAL_ICA_THREADS environment
variable (1 when unset).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import harness
from .whittle import SolverOptions

_THREADS_ENV = "SPECTRAL_ICA_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _default_threads() -> int:
    raw = os.environ.get(_THREADS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectral-ica",
                     description="Blind source separation for sources with mixed spectra")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment")
    sim.add_argument("--config", required=True,
                     help=f"TOML config file or preset name {harness.PRESET_NAMES}")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--threads", type=int, default=_default_threads(),
                     help="worker processes (default: $SPECTRAL_ICA_THREADS or 1)")

    sep = sub.add_parser("separate", help="separate a multichannel CSV")
    sep.add_argument("--input", required=True, help="CSV of mixed signals")
    sep.add_argument("--method", choices=("cica_lsp", "sobi"), default="cica_lsp")
    sep.add_argument("--out", required=True, help="output directory")
    sep.add_argument("--delimiter", default=",")
    sep.add_argument("--rows-are-channels", action="store_true",
                     help="treat CSV rows (not columns) as channels")
    sep.add_argument("--max-iterations", type=int, default=None,
                     help="override the solver's outer iteration cap")

    summ = sub.add_parser("summarize", help="quantile table and boxplot from results.csv")
    summ.add_argument("--results", required=True, help="results.csv from a simulate run")
    summ.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_simulate(args) -> int:
    if args.config in harness.PRESET_NAMES:
        config = harness.builtin_preset(args.config)
    elif Path(args.config).exists():
        config = harness.load_config(args.config)
    else:
        print(f"spectral-ica: error: no such config file or preset: {args.config}",
              file=sys.stderr)
        return 1
    rows = harness.run_experiment(config, out_dir=args.out, threads=args.threads)
    print(harness.format_summary(harness.summarize_rows(rows)))
    failures = [r for r in rows if r.error]
    if failures:
        print(f"{len(failures)} replicate run(s) failed; see results.csv", file=sys.stderr)
    return 0


def _cmd_separate(args) -> int:
    solver = SolverOptions() if args.max_iterations is None else \
        SolverOptions(max_outer_iterations=args.max_iterations)
    channels_as = "rows" if args.rows_are_channels else "columns"
    estimate = harness.separate(args.input, args.method, args.out, solver=solver,
                                delimiter=args.delimiter, channels_as=channels_as)
    print(f"wrote sources.csv, estimate.json, report.txt to {args.out} "
          f"(converged={estimate.converged})")
    return 0


def _cmd_summarize(args) -> int:
    rows = _read_results_csv(args.results)
    table = harness.plot_summary(rows, args.out)
    print(harness.format_summary(table))
    return 0


def _read_results_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) < 5:
                continue
            rows.append(harness.ResultRow(
                method=cells[idx["method"]],
                n_samples=int(cells[idx["T"]]),
                replicate=int(cells[idx["replicate"]]),
                amari=float(cells[idx["amari"]]),
                cor_disc=float(cells[idx["cor_disc"]]),
                runtime_seconds=0.0,
                converged=bool(int(cells[idx["converged"]])),
                error=cells[idx["error"]] if "error" in idx and len(cells) > idx["error"] else "",
            ))
    if not rows:
        raise ValueError(f"{path}: no result rows")
    return rows


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "separate":
            return _cmd_separate(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return 1
    except Exception as exc:
        print(f"spectral-ica: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: declarative Monte-Carlo configs, separation runs, summaries.

Each replicate derives its own seed from (master_seed, T, replicate) through
a SplitMix64 hash, so replicates are independent of each other and of the
execution order; runs are reproducible byte for byte. Wall-clock timings go
to a separate file so the result CSV stays deterministic.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import whittle
from .sobi import sobi as _sobi_fit
from .metrics import amari_distance, correlation_discrepancy
from .signals import (
    HarmonicComponent,
    MixingMatrix,
    MultichannelSeries,
    NoiseSpec,
    SourceSpec,
    center,
    generate_source,
    read_csv,
    write_csv,
)
from .whittle import SolverOptions, UnmixingEstimate, estimate_to_json

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "derive_seed",
    "builtin_preset",
    "PRESET_NAMES",
    "load_config",
    "run_experiment",
    "separate",
    "plot_summary",
    "write_results_csv",
    "summarize_rows",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, *parts: int) -> int:
    """64-bit seed mix of (master_seed, *parts) via chained SplitMix64."""
    h = _splitmix64(master_seed & _MASK64)
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte-Carlo experiment."""

    sources: tuple
    mixing: object  # MixingMatrix for a fixed matrix, or the string "random"
    sample_sizes: tuple
    replicates: int
    methods: tuple = ("cica_lsp", "sobi")
    solver: SolverOptions = field(default_factory=SolverOptions)
    master_seed: int = 0
    random_phases: bool = True
    name: str = "experiment"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.methods:
            raise ValueError("need at least one method")
        unknown = set(self.methods) - {"cica_lsp", "sobi"}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if not (self.mixing == "random" or isinstance(self.mixing, MixingMatrix)):
            raise ValueError("mixing must be a MixingMatrix or 'random'")
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "sample_sizes", tuple(int(t) for t in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class ResultRow:
    method: str
    n_samples: int
    replicate: int
    amari: float
    cor_disc: float
    runtime_seconds: float
    converged: bool
    error: str = ""


# The four-source mixed-spectrum design: three cosines of amplitude 2 per
# source at the frequencies below, plus one noise process each.
_SIM1_OMEGAS = (
    tuple(2.0 * np.pi / 128.0 * j for j in (1, 2, 3)),
    tuple(2.0 * np.pi / 512.0 + 2.0 * np.pi / 64.0 * j for j in (1, 2, 3)),
    tuple(2.0 * np.pi / 64.0 * j for j in (1, 2, 3)),
    tuple(2.0 * np.pi / 128.0 + 2.0 * np.pi / 64.0 * j for j in (1, 2, 3)),
)

_SIM1_NOISES = (
    NoiseSpec.gaussian_white(1.0),
    NoiseSpec.uniform_white(np.sqrt(3.0)),
    NoiseSpec.ar1(0.8),
    NoiseSpec.ma1(0.5),
)

SIM1_MIXING = MixingMatrix(np.array([
    [0.56, 0.58, -0.07, 0.59],
    [-0.41, 0.84, 0.10, 0.34],
    [-0.15, 0.05, 0.75, -0.65],
    [0.53, -0.83, -0.08, 0.13],
]))


def sim1_sources() -> tuple:
    return tuple(
        SourceSpec(
            harmonics=tuple(HarmonicComponent(2.0, w, 0.0) for w in omegas),
            noise=noise,
        )
        for omegas, noise in zip(_SIM1_OMEGAS, _SIM1_NOISES)
    )


PRESET_NAMES = ("sim1_512", "sim1_4096", "sim1_desk")


def builtin_preset(name: str) -> ExperimentConfig:
    """Named experiment presets for the four-source simulation design."""
    base = dict(sources=sim1_sources(), mixing=SIM1_MIXING, master_seed=20240601,
                methods=("cica_lsp", "sobi"))
    if name == "sim1_512":
        return ExperimentConfig(sample_sizes=(512,), replicates=100, name=name, **base)
    if name == "sim1_4096":
        return ExperimentConfig(sample_sizes=(4096,), replicates=100, name=name, **base)
    if name == "sim1_desk":
        return ExperimentConfig(sample_sizes=(512,), replicates=20, name=name, **base)
    raise ValueError(f"unknown preset {name!r}; choose one of {PRESET_NAMES}")


def load_config(path) -> ExperimentConfig:
    """Load an experiment description from a TOML file."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    sources = []
    for src in doc["sources"]:
        noise = NoiseSpec(src["noise"]["kind"], float(src["noise"]["value"]))
        harmonics = tuple(
            HarmonicComponent(float(h["amplitude"]), float(h["frequency"]),
                              float(h.get("phase", 0.0)))
            for h in src.get("harmonics", [])
        )
        sources.append(SourceSpec(harmonics=harmonics, noise=noise))
    mixing_doc = doc.get("mixing", "random")
    mixing = "random" if mixing_doc == "random" else MixingMatrix(np.array(mixing_doc, float))
    solver = SolverOptions(**doc.get("solver", {}))
    return ExperimentConfig(
        sources=tuple(sources),
        mixing=mixing,
        sample_sizes=tuple(doc["sample_sizes"]),
        replicates=int(doc["replicates"]),
        methods=tuple(doc.get("methods", ("cica_lsp", "sobi"))),
        solver=solver,
        master_seed=int(doc.get("master_seed", 0)),
        random_phases=bool(doc.get("random_phases", True)),
        name=str(doc.get("name", Path(path).stem)),
    )


def _replicate_data(config: ExperimentConfig, t_len: int, replicate: int):
    """Sources, mixture and mixing matrix for one replicate, deterministically."""
    mixing = config.mixing
    if mixing == "random":
        rng = np.random.default_rng(derive_seed(config.master_seed, t_len, replicate, 20_000))
        m = len(config.sources)
        while True:
            cand = rng.standard_normal((m, m))
            if np.linalg.cond(cand) < 1e3:
                break
        mixing = MixingMatrix(cand)
    phase_rng = np.random.default_rng(derive_seed(config.master_seed, t_len, replicate, 10_000))
    rows = []
    for j, spec in enumerate(config.sources):
        if config.random_phases and spec.harmonics:
            phases = phase_rng.uniform(-np.pi, np.pi, size=len(spec.harmonics))
            spec = spec.with_phases(phases)
        rows.append(generate_source(spec, t_len, derive_seed(config.master_seed, t_len,
                                                             replicate, j + 1)))
    sources = MultichannelSeries(np.vstack(rows))
    mixture = MultichannelSeries(mixing.entries @ sources.data)
    return sources, mixture, mixing


def run_method(method: str, mixture: MultichannelSeries,
               solver: SolverOptions) -> UnmixingEstimate:
    if method == "cica_lsp":
        return whittle.fit(mixture, solver)
    if method == "sobi":
        return _sobi_fit(mixture)
    raise ValueError(f"unknown method {method!r}")


def _run_replicate(config: ExperimentConfig, t_len: int, replicate: int,
                   estimates_dir: str | None):
    sources, mixture, mixing = _replicate_data(config, t_len, replicate)
    w_true = mixing.inverse()
    rows = []
    for method in config.methods:
        start = time.perf_counter()
        try:
            estimate = run_method(method, mixture, config.solver)
            runtime = time.perf_counter() - start
            amari = amari_distance(estimate.unmixing, w_true)
            s_hat = estimate.unmixing @ center(mixture).data
            record = correlation_discrepancy(s_hat, sources.data)
            if estimates_dir is not None:
                path = Path(estimates_dir) / f"{method}_T{t_len}_rep{replicate}.json"
                path.write_text(estimate_to_json(estimate), encoding="utf-8")
            rows.append(ResultRow(method, t_len, replicate, amari, record.cor_disc,
                                  runtime, estimate.converged))
        except Exception as exc:  # failures become rows, never abort the sweep
            runtime = time.perf_counter() - start
            rows.append(ResultRow(method, t_len, replicate, np.nan, np.nan,
                                  runtime, False, error=str(exc)))
    return rows


def run_experiment(config: ExperimentConfig, out_dir=None, threads: int = 1):
    """Run every (T, replicate, method) cell of the experiment.

    Returns the list of ResultRow sorted by (method, T, replicate). When
    ``out_dir`` is given, writes results.csv, timings.csv, summary.csv and
    one serialized estimate per cell under estimates/.
    """
    estimates_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "estimates").mkdir(parents=True, exist_ok=True)
        estimates_dir = str(out_dir / "estimates")
    tasks = [(t_len, rep) for t_len in config.sample_sizes for rep in range(config.replicates)]
    rows = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_replicate, config, t, r, estimates_dir)
                       for t, r in tasks]
            for fut in futures:
                rows.extend(fut.result())
    else:
        for t_len, rep in tasks:
            rows.extend(_run_replicate(config, t_len, rep, estimates_dir))
    rows.sort(key=lambda row: (row.method, row.n_samples, row.replicate))
    if out_dir is not None:
        write_results_csv(rows, out_dir / "results.csv")
        _write_timings_csv(rows, out_dir / "timings.csv")
        _write_summary_csv(summarize_rows(rows), out_dir / "summary.csv")
    return rows


def write_results_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,T,replicate,amari,cor_disc,converged,error\n")
        for r in rows:
            err = r.error.replace(",", ";").replace("\n", " ")
            fh.write(f"{r.method},{r.n_samples},{r.replicate},{r.amari:.17g},"
                     f"{r.cor_disc:.17g},{int(r.converged)},{err}\n")


def _write_timings_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,T,replicate,runtime_seconds\n")
        for r in rows:
            fh.write(f"{r.method},{r.n_samples},{r.replicate},{r.runtime_seconds:.6f}\n")


def _nearest_rank_quantiles(values) -> tuple:
    """(min, q1, median, q3, max) under the nearest-rank convention."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no values to summarize")

    def q(p):
        return x[int(np.ceil(p * n)) - 1]

    return float(x[0]), float(q(0.25)), float(q(0.5)), float(q(0.75)), float(x[-1])


def summarize_rows(rows):
    """Per-(method, T) five-number summaries of the Amari distance."""
    groups: dict = {}
    for r in rows:
        if np.isfinite(r.amari):
            groups.setdefault((r.method, r.n_samples), []).append(r.amari)
    table = []
    for (method, t_len) in sorted(groups):
        mn, q1, med, q3, mx = _nearest_rank_quantiles(groups[(method, t_len)])
        table.append({"method": method, "T": t_len, "min": mn, "q1": q1,
                      "median": med, "q3": q3, "max": mx})
    return table


def _write_summary_csv(table, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,T,min,q1,median,q3,max\n")
        for row in table:
            fh.write(f"{row['method']},{row['T']},{row['min']:.17g},{row['q1']:.17g},"
                     f"{row['median']:.17g},{row['q3']:.17g},{row['max']:.17g}\n")


def format_summary(table) -> str:
    lines = [f"{'method':<10} {'T':>6} {'min':>9} {'q1':>9} {'median':>9} {'q3':>9} {'max':>9}"]
    for row in table:
        lines.append(f"{row['method']:<10} {row['T']:>6} {row['min']:>9.4f} {row['q1']:>9.4f} "
                     f"{row['median']:>9.4f} {row['q3']:>9.4f} {row['max']:>9.4f}")
    return "\n".join(lines)


def plot_summary(rows, out_dir):
    """Write the quantile table and an SVG boxplot of Amari distances.

    Returns the summary table. Raises on an empty input table.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("empty result table")
    table = summarize_rows(rows)
    if not table:
        raise ValueError("no finite metric values to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_summary_csv(table, out_dir / "boxplot_data.csv")
    (out_dir / "boxplot.svg").write_text(_boxplot_svg(table), encoding="utf-8")
    return table


def _boxplot_svg(table) -> str:
    width, height = 120 + 110 * len(table), 320
    top, bottom, left = 30, 270, 70
    vmax = max(row["max"] for row in table)
    vmin = min(row["min"] for row in table)
    span = (vmax - vmin) or 1.0
    pad = 0.08 * span
    lo, hi = vmin - pad, vmax + pad

    def y(v):
        return bottom - (v - lo) / (hi - lo) * (bottom - top)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{width - 30}" y2="{bottom}" stroke="black"/>',
        f'<text x="12" y="{(top + bottom) / 2}" transform="rotate(-90 12 '
        f'{(top + bottom) / 2})" text-anchor="middle">Amari distance</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        parts.append(f'<line x1="{left - 4}" y1="{y(v):.1f}" x2="{left}" y2="{y(v):.1f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for i, row in enumerate(table):
        cx = left + 60 + 110 * i
        half = 28
        parts += [
            f'<line x1="{cx}" y1="{y(row["min"]):.1f}" x2="{cx}" y2="{y(row["q1"]):.1f}" '
            f'stroke="black"/>',
            f'<line x1="{cx}" y1="{y(row["q3"]):.1f}" x2="{cx}" y2="{y(row["max"]):.1f}" '
            f'stroke="black"/>',
            f'<rect x="{cx - half}" y="{y(row["q3"]):.1f}" width="{2 * half}" '
            f'height="{max(y(row["q1"]) - y(row["q3"]), 0.5):.1f}" fill="#cfd8e8" '
            f'stroke="black"/>',
            f'<line x1="{cx - half}" y1="{y(row["median"]):.1f}" x2="{cx + half}" '
            f'y2="{y(row["median"]):.1f}" stroke="black" stroke-width="2"/>',
            f'<line x1="{cx - half + 8}" y1="{y(row["min"]):.1f}" x2="{cx + half - 8}" '
            f'y2="{y(row["min"]):.1f}" stroke="black"/>',
            f'<line x1="{cx - half + 8}" y1="{y(row["max"]):.1f}" x2="{cx + half - 8}" '
            f'y2="{y(row["max"]):.1f}" stroke="black"/>',
            f'<text x="{cx}" y="{bottom + 18}" text-anchor="middle">{row["method"]}</text>',
            f'<text x="{cx}" y="{bottom + 32}" text-anchor="middle">T={row["T"]}</text>',
        ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def separate(input_path, method: str, out_dir, solver: SolverOptions = None,
             delimiter: str = ",", channels_as: str = "columns"):
    """Separate a CSV of mixed signals; write sources, estimate and report.

    Writes sources.csv (recovered sources, same orientation as the input),
    estimate.json, and report.txt describing the spectral models.
    """
    solver = solver or SolverOptions()
    series = read_csv(input_path, delimiter=delimiter, channels_as=channels_as)
    if series.n_channels < 2:
        raise ValueError(f"need at least 2 channels, got {series.n_channels}")
    estimate = run_method(method, series, solver)
    recovered = MultichannelSeries(estimate.unmixing @ center(series).data)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(recovered, out_dir / "sources.csv", delimiter=delimiter, channels_as=channels_as)
    (out_dir / "estimate.json").write_text(estimate_to_json(estimate), encoding="utf-8")
    (out_dir / "report.txt").write_text(_separation_report(estimate, input_path),
                                        encoding="utf-8")
    return estimate


def _separation_report(estimate: UnmixingEstimate, input_path) -> str:
    lines = [
        f"input: {input_path}",
        f"method: {estimate.method}",
        f"channels: {estimate.unmixing.shape[0]}",
        f"converged: {estimate.converged}",
        f"iterations: {len(estimate.trace)}",
        "",
    ]
    if not estimate.spectral_models:
        lines.append("no per-source spectral models (baseline method)")
    for j, (model, report) in enumerate(zip(estimate.spectral_models, estimate.fit_reports)):
        knots = ", ".join(f"{k:.4f}" for k in model.basis.knots)
        atoms = ", ".join(f"k={k} (mass {m_:.3f})"
                          for k, m_ in zip(model.atoms.indices, model.atoms.masses)) or "none"
        lines.append(f"source {j}: {model.basis.dimension} knots [{knots}]")
        lines.append(f"  atoms: {atoms}")
        if report is not None:
            lines.append(f"  loglik {report.loglik:.6f}  BIC {report.bic:.2f}")
    return "\n".join(lines) + "\n"

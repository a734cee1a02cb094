"""
============================================
04. Monte-Carlo comparison against SOBI
============================================

Run a small replicated experiment comparing the Whittle-likelihood
estimator with the SOBI baseline, summarize the Amari distances with
nearest-rank quantiles, and render the boxplot SVG.
"""

import tempfile
from pathlib import Path

from spectral_ica import ExperimentConfig, plot_summary, run_experiment
from spectral_ica.harness import SIM1_MIXING, format_summary, sim1_sources, summarize_rows

###############################################################################
# Eight replicates at T = 512 keep this demo quick; the builtin presets
# sim1_desk (20 replicates) and sim1_512/sim1_4096 (100 replicates) scale
# the same experiment up. Every replicate derives its own seed from
# (master_seed, T, replicate), so runs are reproducible byte for byte.

config = ExperimentConfig(
    sources=sim1_sources(),
    mixing=SIM1_MIXING,
    sample_sizes=(512,),
    replicates=8,
    methods=("cica_lsp", "sobi"),
    master_seed=20240601,
)
out_dir = Path(tempfile.mkdtemp(prefix="spectral_ica_demo_"))
rows = run_experiment(config, out_dir=out_dir)

###############################################################################
# Per-replicate records: the harness never aborts a sweep; failures would be
# recorded in the row's error column instead.

for row in rows:
    print(f"{row.method:10s} rep {row.replicate}: amari={row.amari:.4f} "
          f"cor_disc={row.cor_disc:.3f} ({row.runtime_seconds:.2f}s)")

###############################################################################
# Five-number summaries (nearest-rank convention) and the SVG boxplot. The
# frequency-domain estimator's median sits well below the second-order
# baseline on this mixed-spectrum design.

table = plot_summary(rows, out_dir)
print()
print(format_summary(summarize_rows(rows)))
print(f"\nwrote {out_dir / 'results.csv'}")
print(f"wrote {out_dir / 'boxplot.svg'}")

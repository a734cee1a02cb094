"""
===================================
03. Blind separation of a mixture
===================================

Full pipeline on one synthetic dataset: whiten, alternate per-source
spectral fits with constrained Newton updates of the rotation, and compare
the recovered unmixing matrix and sources against the ground truth.
"""

import numpy as np

from spectral_ica import (
    SolverOptions,
    amari_distance,
    correlation_discrepancy,
    center,
    fit,
)
from spectral_ica.harness import builtin_preset, _replicate_data

###############################################################################
# One replicate of the benchmark: four mixed-spectrum sources through the
# fixed 4x4 mixing matrix at T = 4096.

config = builtin_preset("sim1_4096")
sources, mixture, mixing = _replicate_data(config, 4096, replicate=0)
w_true = mixing.inverse()

###############################################################################
# Fit. The trace records the penalized objective and the Amari step between
# successive rotations; iteration stops once the step drops below tolerance.

estimate = fit(mixture, SolverOptions(amari_tolerance=1e-6))
print(f"converged: {estimate.converged} after {len(estimate.trace)} outer iterations")
for i, rec in enumerate(estimate.trace):
    if i % 5 == 0 or i == len(estimate.trace) - 1:
        print(f"  iter {i:2d}: objective {rec.objective:9.5f}   amari step {rec.amari_step:.2e}")

###############################################################################
# Quality versus the truth: the Amari distance is invariant to the scale and
# permutation ambiguity inherent to the problem, and the correlation
# discrepancy scores the recovered waveforms directly.

print(f"\nAmari distance to true unmixing: {amari_distance(estimate.unmixing, w_true):.4f}")
recovered = estimate.unmixing @ center(mixture).data
record = correlation_discrepancy(recovered, sources.data)
print("matched |correlation| per source:", np.round(np.diag(record.correlation_matrix), 3))
print(f"correlation discrepancy (off-diagonal sum): {record.cor_disc:.3f}")

###############################################################################
# The per-source spectral models document what drove the separation: each
# recovered source carries its own knots and detected line spectrum.

for j, (model, report) in enumerate(zip(estimate.spectral_models, estimate.fit_reports)):
    atoms = ", ".join(str(k) for k in model.atoms.indices) or "none"
    print(f"source {j}: {model.basis.dimension} knots, atoms at k = {atoms} "
          f"(BIC {report.bic:.1f})")

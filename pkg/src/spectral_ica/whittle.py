"""Whittle-likelihood ICA with log-spline source spectra.

Observations are prewhitened so the unmixing problem reduces to an
orthogonal rotation O. The estimator alternates two steps until the Amari
distance between successive rotations falls below tolerance:

1. refit each source's log-spline spectral model to the periodograms of
   the current source estimates O @ X_whitened;
2. take a Newton-Raphson step on the Lagrange-penalized negative Whittle
   log-likelihood F(O, lambda) = -loglik + lambda' C, where C collects the
   lower triangle of O O' - I.

The final unmixing matrix is the canonicalized product of the rotation and
the inverse covariance square root.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import logspline
from .logspline import select_model
from .metrics import amari_distance
from .signals import MultichannelSeries, center
from .spectral import PeriodogramStack, cross_periodogram

__all__ = [
    "WhiteningTransform",
    "SolverOptions",
    "IterationRecord",
    "UnmixingEstimate",
    "prewhiten",
    "whittle_loglik",
    "derivatives",
    "newton_update",
    "fit",
    "canonicalize",
    "estimate_to_dict",
    "estimate_to_json",
    "unmixing_from_json",
]

_RIDGE = 1e-8
_COND_LIMIT = 1e12
_ORTHO_DRIFT_LIMIT = 0.5


@dataclass(frozen=True)
class WhiteningTransform:
    """Sample covariance and its symmetric inverse square root."""

    covariance: np.ndarray
    root_inverse: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float).copy()
        root = np.asarray(self.root_inverse, dtype=float).copy()
        cov.setflags(write=False)
        root.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "root_inverse", root)


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs for the alternating estimator."""

    amari_tolerance: float = 1e-6
    max_outer_iterations: int = 50
    max_newton_steps_per_outer: int = 1
    step_halving_limit: int = 20
    initializer: str = "identity"  # "identity" | "random_orthogonal"
    init_seed: int = 0

    def __post_init__(self):
        if self.amari_tolerance <= 0 or self.max_outer_iterations <= 0 \
                or self.max_newton_steps_per_outer <= 0 or self.step_halving_limit <= 0:
            raise ValueError("solver options must be positive")
        if self.initializer not in ("identity", "random_orthogonal"):
            raise ValueError(f"unknown initializer {self.initializer!r}")


@dataclass(frozen=True)
class IterationRecord:
    objective: float
    amari_step: float


@dataclass
class UnmixingEstimate:
    """Fitted separation: rotation, multipliers, unmixing matrix, models."""

    rotation: np.ndarray
    lagrange: np.ndarray
    unmixing: np.ndarray
    whitening: WhiteningTransform
    spectral_models: list
    fit_reports: list
    trace: list
    converged: bool
    method: str = "cica_lsp"


def prewhiten(x: MultichannelSeries):
    """Center and whiten: returns (whitened series, transform).

    The whitening matrix is the symmetric inverse square root of the sample
    covariance (eigendecomposition). Raises if the covariance is rank
    deficient, in which case the caller should reduce dimension first.
    """
    x = center(x)
    t_len = x.n_samples
    cov = (x.data @ x.data.T) / t_len
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-10 * evals[-1]:
        raise ValueError(
            "sample covariance is rank deficient; reduce the number of channels "
            f"(eigenvalue ratio {evals[0] / evals[-1]:.3e})"
        )
    root_inverse = (evecs * (1.0 / np.sqrt(evals))) @ evecs.T
    whitened = MultichannelSeries(root_inverse @ x.data, sample_rate=x.sample_rate)
    return whitened, WhiteningTransform(cov, root_inverse)


def _log_density_matrix(models) -> np.ndarray:
    return np.vstack([m.log_density_grid() for m in models])


def _source_periodograms(o: np.ndarray, real_stack: np.ndarray) -> np.ndarray:
    """Periodograms of the rotated channels, shape (M, n_freq)."""
    return np.einsum("ja,kab,jb->jk", o, real_stack, o, optimize=True)


def whittle_loglik(o: np.ndarray, models, stack: PeriodogramStack) -> float:
    """Joint Whittle log-likelihood of rotation ``o`` and per-source spectra.

    Equals -(1/2T) * sum_j sum_k [ I_j(r_k; o) * exp(-g_j(r_k)) + g_j(r_k) ]
    on the positive Fourier grid; the log-determinant term vanishes for
    orthogonal rotations of whitened data.
    """
    o = np.asarray(o, dtype=float)
    m = o.shape[0]
    if o.shape != (m, m) or len(models) != m or stack.n_channels != m:
        raise ValueError("rotation, models and stack disagree on dimension")
    t_len = stack.grid.n_samples
    real_stack = stack.matrices.real
    i_mat = _source_periodograms(o, real_stack)
    g_mat = _log_density_matrix(models)
    w = np.exp(-np.clip(g_mat, -logspline._LOG_DENSITY_BOUND, logspline._LOG_DENSITY_BOUND))
    per_source = np.sum(i_mat * w + g_mat, axis=1)
    # fsum renders the source reduction order-independent (exact permutation
    # invariance of the likelihood under relabeling)
    return -math.fsum(per_source) / (2.0 * t_len)


def _constraint_pairs(m: int):
    return [(j, k) for j in range(m) for k in range(j + 1)]


def _constraint_vector(o: np.ndarray) -> np.ndarray:
    m = o.shape[0]
    resid = o @ o.T - np.eye(m)
    return np.array([resid[j, k] for j, k in _constraint_pairs(m)])


def _lambda_matrix(lam: np.ndarray, m: int) -> np.ndarray:
    """Symmetric multiplier matrix with doubled diagonal (gradient weights)."""
    lam_mat = np.zeros((m, m))
    for idx, (j, k) in enumerate(_constraint_pairs(m)):
        lam_mat[j, k] = lam[idx]
        lam_mat[k, j] = lam[idx]
    return lam_mat + np.diag(np.diag(lam_mat))


def penalized_objective(o: np.ndarray, lam: np.ndarray, models, stack) -> float:
    """F(O, lambda) = -loglik + lambda' C."""
    return -whittle_loglik(o, models, stack) + float(lam @ _constraint_vector(o))


def derivatives(o: np.ndarray, lam: np.ndarray, models, stack: PeriodogramStack):
    """Analytic gradient and Hessian blocks of the penalized objective.

    Returns (grad_o, grad_lam, h1, h2) where grad_o has M^2 entries in
    row-major order, h1 is the M^2 x M^2 Hessian in O, and h2 the
    M^2 x M(M+1)/2 cross block with the multipliers.
    """
    o = np.asarray(o, dtype=float)
    lam = np.asarray(lam, dtype=float)
    m = o.shape[0]
    pairs = _constraint_pairs(m)
    if lam.shape != (len(pairs),):
        raise ValueError(f"lambda must have {len(pairs)} entries, got {lam.shape}")
    t_len = stack.grid.n_samples
    real_stack = stack.matrices.real

    g_mat = _log_density_matrix(models)
    w = np.exp(-np.clip(g_mat, -logspline._LOG_DENSITY_BOUND, logspline._LOG_DENSITY_BOUND))
    # per-source weighted averages of the periodogram matrices
    g_weighted = np.einsum("jk,kab->jab", w, real_stack, optimize=True) / t_len

    lam_mat = _lambda_matrix(lam, m)

    grad_rows = np.einsum("ja,jab->jb", o, g_weighted) + lam_mat @ o
    grad_o = grad_rows.reshape(-1)

    h1 = np.zeros((m * m, m * m))
    for j in range(m):
        h1[j * m:(j + 1) * m, j * m:(j + 1) * m] = g_weighted[j]
    h1 += np.kron(lam_mat, np.eye(m))

    h2 = np.zeros((m * m, len(pairs)))
    for idx, (j, k) in enumerate(pairs):
        block = np.zeros((m, m))
        block[j] += o[k]
        block[k] += o[j]
        h2[:, idx] = block.reshape(-1)

    grad_lam = _constraint_vector(o)
    return grad_o, grad_lam, h1, h2


def _ridge_if_needed(matrix: np.ndarray):
    if np.linalg.cond(matrix) > _COND_LIMIT:
        return matrix + _RIDGE * np.trace(matrix) * np.eye(matrix.shape[0]), True
    return matrix, False


def _tangent_basis(h2: np.ndarray) -> np.ndarray:
    from scipy.linalg import null_space as _null_space

    return _null_space(h2.T)


def _convexify_on_tangent(h1: np.ndarray, z: np.ndarray):
    """Shift H1 so its restriction to the constraint tangent space is PD.

    The multiplier term can make H1 indefinite far from the solution, which
    would turn the Newton direction into an ascent direction; flooring the
    reduced curvature (relative to its largest eigenvalue, so step lengths
    stay sane) keeps the step a descent direction without moving any
    stationary point of the KKT system.
    """
    if z.shape[1] == 0:
        return h1, False, None
    evals, evecs = np.linalg.eigh(z.T @ h1 @ z)
    floor = max(_RIDGE * abs(np.trace(h1)), 1e-4 * evals[-1], 1e-12)
    negative_dir = z @ evecs[:, 0] if evals[0] < 0 else None
    if evals[0] < floor:
        return h1 + (floor - evals[0]) * np.eye(h1.shape[0]), True, negative_dir
    return h1, False, negative_dir


def _kkt_step(grad_o, grad_lam, h1, h2, convexify: bool = False):
    """Newton step on the stationarity system of the penalized objective.

    Block elimination of [[H1, H2], [H2', 0]]; returns
    (delta_o, delta_lam, ridged, negative_curvature_direction).
    """
    ridged0 = False
    negative_dir = None
    if convexify:
        z = _tangent_basis(h2)
        h1, ridged0, negative_dir = _convexify_on_tangent(h1, z)
    h1, ridged1 = _ridge_if_needed(h1)
    x1 = np.linalg.solve(h1, grad_o)
    x2 = np.linalg.solve(h1, h2)
    mmat = h2.T @ x2
    mmat, ridged2 = _ridge_if_needed(mmat)
    m1 = np.linalg.solve(mmat, h2.T @ x1)
    m2 = np.linalg.solve(mmat, grad_lam)
    delta_o = -x1 + x2 @ m1 - x2 @ m2
    delta_lam = -m1 + m2
    return delta_o, delta_lam, (ridged0 or ridged1 or ridged2), negative_dir


def _nearest_orthogonal(o: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(o)
    return u @ vt


def _try_step(o, lam, delta_o, delta_lam, f_old, models, stack, options):
    """Backtracking line search accepting the first non-increasing objective.

    When the search starts on the orthogonal manifold, every candidate is
    re-projected there (polar decomposition), so the search is a retraction
    along the manifold; a zero step leaves the iterate untouched bit for
    bit. Starting from an off-manifold point only badly drifted candidates
    are projected, so the objective comparison stays consistent.
    """
    m = o.shape[0]
    start_drift = np.linalg.norm(o @ o.T - np.eye(m))
    project_at = min(max(1e-12, 2.0 * start_drift), _ORTHO_DRIFT_LIMIT)
    alpha = 1.0
    reprojected = False
    for halvings in range(options.step_halving_limit + 1):
        o_new = o + alpha * delta_o.reshape(m, m)
        lam_new = lam + alpha * delta_lam
        drift = np.linalg.norm(o_new @ o_new.T - np.eye(m))
        if drift > project_at:
            o_new = _nearest_orthogonal(o_new)
            reprojected = True
        f_new = penalized_objective(o_new, lam_new, models, stack)
        if f_new <= f_old:
            return o_new, lam_new, f_new, halvings, reprojected
        alpha *= 0.5
    return None


def _tangent_gradient_direction(o, grad_o, h2):
    """Steepest-descent direction for O projected onto the constraint tangent."""
    q, _ = np.linalg.qr(h2)
    return -(grad_o - q @ (q.T @ grad_o))


def newton_update(o: np.ndarray, lam: np.ndarray, models, stack: PeriodogramStack,
                  options: SolverOptions = SolverOptions()):
    """One constrained Newton-Raphson update of (O, lambda).

    Applies the block-elimination update (with the Hessian ridge-regularized
    whenever its restriction to the constraint tangent space is not positive
    definite), re-projects onto the orthogonal matrices if the candidate
    drifts badly, and halves the step until the penalized objective stops
    increasing. Falls back to a projected-gradient step if the Newton
    direction makes no progress. Returns (o_new, lam_new, info).
    """
    o = np.asarray(o, dtype=float)
    lam = np.asarray(lam, dtype=float)
    grad_o, grad_lam, h1, h2 = derivatives(o, lam, models, stack)
    delta_o, delta_lam, ridged, negative_dir = _kkt_step(grad_o, grad_lam, h1, h2,
                                                         convexify=True)
    # bound the trial length so backtracking can reach descent territory even
    # along nearly flat curvature
    norm = np.linalg.norm(delta_o)
    if norm > 2.0:
        delta_o = delta_o * (2.0 / norm)
        delta_lam = delta_lam * (2.0 / norm)
    f_old = penalized_objective(o, lam, models, stack)

    hit = _try_step(o, lam, delta_o, delta_lam, f_old, models, stack, options)
    if hit is not None:
        o_new, lam_new, f_new, halvings, reprojected = hit
        info = {"objective": f_new, "halvings": halvings, "stalled": False,
                "ridged": ridged, "reprojected": reprojected, "fallback": False}
        return o_new, lam_new, info

    candidates = [_tangent_gradient_direction(o, grad_o, h2)]
    if negative_dir is not None:
        sign = -1.0 if negative_dir @ grad_o > 0 else 1.0
        candidates.append(sign * negative_dir)
    for fallback in candidates:
        hit = _try_step(o, lam, fallback, np.zeros_like(lam), f_old, models, stack, options)
        if hit is not None:
            o_new, lam_new, f_new, halvings, reprojected = hit
            info = {"objective": f_new, "halvings": halvings, "stalled": False,
                    "ridged": ridged, "reprojected": reprojected, "fallback": True}
            return o_new, lam_new, info

    info = {"objective": f_old, "halvings": options.step_halving_limit, "stalled": True,
            "ridged": ridged, "reprojected": False, "fallback": True}
    return o, lam, info


def _initial_rotation(m: int, options: SolverOptions) -> np.ndarray:
    if options.initializer == "identity":
        return np.eye(m)
    rng = np.random.default_rng(options.init_seed)
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def fit(x: MultichannelSeries, options: SolverOptions = SolverOptions()) -> UnmixingEstimate:
    """Estimate the unmixing matrix of a multichannel series.

    Whitens the data, then alternates per-source spectral model selection
    with one-step Newton updates of the rotation until the Amari distance
    between successive rotations drops below tolerance. Returns the
    canonicalized estimate with per-iteration trace records.
    """
    if x.n_channels < 2:
        raise ValueError("need at least 2 channels")
    if x.n_samples < 64:
        raise ValueError("need at least 64 samples")
    whitened, transform = prewhiten(x)
    stack = cross_periodogram(whitened)
    real_stack = stack.matrices.real
    m = x.n_channels
    t_len = x.n_samples

    o = _initial_rotation(m, options)
    lam = np.zeros(m * (m + 1) // 2)
    models: list = [None] * m
    reports: list = [None] * m
    trace: list = []
    converged = False

    for _ in range(options.max_outer_iterations):
        i_mat = np.maximum(_source_periodograms(o, real_stack), 0.0)
        for j in range(m):
            models[j], reports[j] = select_model(i_mat[j], t_len, initial=models[j])
        o_prev = o
        info = {"objective": np.nan}
        for _ in range(options.max_newton_steps_per_outer):
            o, lam, info = newton_update(o, lam, models, stack, options)
            if info["stalled"]:
                break
        step = amari_distance(o, o_prev)
        trace.append(IterationRecord(objective=float(info["objective"]), amari_step=step))
        if step < options.amari_tolerance:
            converged = True
            break

    # the multipliers enforce orthogonality only in the limit; snap any
    # residual drift so downstream invariants hold exactly
    if np.linalg.norm(o @ o.T - np.eye(m)) > 1e-10:
        o = _nearest_orthogonal(o)
    unmixing = canonicalize(o @ transform.root_inverse)
    return UnmixingEstimate(
        rotation=o,
        lagrange=lam,
        unmixing=unmixing,
        whitening=transform,
        spectral_models=list(models),
        fit_reports=list(reports),
        trace=trace,
        converged=converged,
    )


def canonicalize(w: np.ndarray) -> np.ndarray:
    """Resolve sign/scale/permutation ambiguity of an unmixing matrix.

    Rows are scaled to unit norm, sign-flipped so each row's largest-magnitude
    entry is positive, then sorted lexicographically. Idempotent; rows already
    within 1e-12 of unit norm are left unscaled so repeated application is a
    no-op bit for bit.
    """
    w = np.array(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    norms = np.linalg.norm(w, axis=1)
    if np.any(norms < 1e-300):
        raise ValueError("cannot canonicalize a matrix with a zero row")
    for j in range(w.shape[0]):
        if abs(norms[j] - 1.0) > 1e-12:
            w[j] /= norms[j]
        peak = np.argmax(np.abs(w[j]))
        if w[j, peak] < 0:
            w[j] = -w[j]
    order = np.lexsort(w.T[::-1])
    return w[order]


def estimate_to_dict(estimate: UnmixingEstimate) -> dict:
    models = []
    for model, report in zip(estimate.spectral_models, estimate.fit_reports):
        if model is None:
            continue
        bic = None if report is None else report.bic
        models.append(logspline.model_to_dict(model, bic))
    return {
        "W": [[float(v) for v in row] for row in estimate.unmixing],
        "O": [[float(v) for v in row] for row in estimate.rotation],
        "lambda": [float(v) for v in estimate.lagrange],
        "per_source_models": models,
        "iterations": [
            {"objective": rec.objective, "amari_step": rec.amari_step} for rec in estimate.trace
        ],
        "converged": bool(estimate.converged),
    }


def estimate_to_json(estimate: UnmixingEstimate) -> str:
    return json.dumps(estimate_to_dict(estimate), indent=1)


def unmixing_from_json(text: str) -> np.ndarray:
    """Recover the unmixing matrix from a serialized estimate."""
    return np.array(json.loads(text)["W"], dtype=float)

"""Per-source mixed-spectrum model for the log spectral density.

The log mean spectral density on [0, pi] is modelled as

    g(r) = beta_c' B(r)  +  sum_d mass_d * [r == a_d]

where B is a cubic B-spline basis constrained to have zero first and third
derivatives at 0 and pi (the symmetry/periodicity conditions a spectral
density satisfies), and the a_d are Fourier-grid frequencies carrying
nonnegative point masses (line spectrum). Coefficients maximize the
per-source Whittle likelihood; knots and atoms are chosen stepwise by BIC.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import null_space

from .spectral import FourierGrid

__all__ = [
    "SplineBasis",
    "AtomSet",
    "SpectralModel",
    "FitReport",
    "basis_eval",
    "fit_coefficients",
    "select_model",
    "density_eval",
    "model_to_dict",
    "model_from_dict",
]

_LOG_DENSITY_BOUND = 40.0  # overflow guard; inactive at realistic scales
_SPLINE_DEGREE = 3
_MAX_NEWTON_ITER = 100
_GRAD_TOL_PER_FREQ = 1e-8

# construction/design caches keyed by knot tuples; bounded, cleared wholesale
_BASIS_CACHE: dict = {}
_DESIGN_CACHE: dict = {}
_CACHE_LIMIT = 4096


def _cache_put(cache, key, value):
    if len(cache) >= _CACHE_LIMIT:
        cache.clear()
    cache[key] = value


def _build_constrained_basis(knots: tuple) -> tuple:
    """Knot vector and null-space projection for the boundary constraints."""
    cached = _BASIS_CACHE.get(knots)
    if cached is not None:
        return cached
    t = np.concatenate([np.zeros(4), np.asarray(knots, dtype=float), np.full(4, np.pi)])
    n_unconstrained = len(knots) + 4
    rows = []
    for order in (1, 3):
        for x in (0.0, np.pi):
            row = np.empty(n_unconstrained)
            for i in range(n_unconstrained):
                coef = np.zeros(n_unconstrained)
                coef[i] = 1.0
                row[i] = BSpline(t, coef, _SPLINE_DEGREE, extrapolate=True).derivative(order)(x)
            rows.append(row)
    constraint = np.vstack(rows)
    z = null_space(constraint)
    if z.shape[1] != n_unconstrained - 4:
        raise ValueError(f"degenerate knot layout {knots}: constraint matrix lost rank")
    result = (t, z)
    _cache_put(_BASIS_CACHE, knots, result)
    return result


@dataclass(frozen=True)
class SplineBasis:
    """Constrained cubic-spline basis on [0, pi] with interior knots.

    The span is every cubic spline g with breakpoints at the knots and
    g'(0) = g'''(0) = g'(pi) = g'''(pi) = 0; its dimension equals the
    number of knots. Constants always lie in the span.
    """

    knots: tuple

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        if len(knots) < 1:
            raise ValueError("need at least one interior knot")
        arr = np.asarray(knots)
        if not np.all(np.diff(arr) > 0):
            raise ValueError("knots must be strictly increasing")
        if arr[0] <= 0 or arr[-1] >= np.pi:
            raise ValueError("knots must lie strictly inside (0, pi)")
        object.__setattr__(self, "knots", knots)
        _build_constrained_basis(knots)  # fail fast on degenerate layouts

    @property
    def dimension(self) -> int:
        return len(self.knots)

    def design_matrix(self, r: np.ndarray, extrapolate: bool = False) -> np.ndarray:
        """Constrained basis values at each frequency, shape (len(r), dimension)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if not extrapolate and (np.any(r < 0) or np.any(r > np.pi)):
            raise ValueError("frequencies must lie in [0, pi]")
        _, z = _build_constrained_basis(self.knots)
        return self.unconstrained_design(r) @ z

    def unconstrained_design(self, r: np.ndarray) -> np.ndarray:
        """Plain clamped B-spline values before the constraint projection."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        t, _ = _build_constrained_basis(self.knots)
        if r.size and 0.0 <= r.min() and r.max() <= np.pi:
            return BSpline.design_matrix(r, t, _SPLINE_DEGREE).toarray()
        # out-of-domain points (boundary-derivative checks) need the
        # polynomial extension, which design_matrix does not provide
        n_unconstrained = len(self.knots) + 4
        raw = np.empty((r.size, n_unconstrained))
        for i in range(n_unconstrained):
            coef = np.zeros(n_unconstrained)
            coef[i] = 1.0
            raw[:, i] = BSpline(t, coef, _SPLINE_DEGREE, extrapolate=True)(r)
        return raw


def _grid_design(basis: SplineBasis, n_samples: int) -> np.ndarray:
    key = (basis.knots, n_samples)
    cached = _DESIGN_CACHE.get(key)
    if cached is None:
        cached = basis.design_matrix(FourierGrid(n_samples).frequencies)
        cached.setflags(write=False)
        _cache_put(_DESIGN_CACHE, key, cached)
    return cached


def basis_eval(basis: SplineBasis, r: float) -> np.ndarray:
    """Constrained basis vector at one frequency in [0, pi]."""
    return basis.design_matrix(np.array([float(r)]))[0]


@dataclass(frozen=True)
class AtomSet:
    """Line-spectrum atoms: Fourier-grid indices with nonnegative masses."""

    indices: tuple = ()
    masses: np.ndarray = None

    def __post_init__(self):
        indices = tuple(int(k) for k in self.indices)
        if len(set(indices)) != len(indices):
            raise ValueError("atom indices must be distinct")
        if any(k < 1 for k in indices):
            raise ValueError("atom indices must be >= 1")
        masses = np.zeros(len(indices)) if self.masses is None else np.asarray(self.masses, float)
        if masses.shape != (len(indices),):
            raise ValueError("one mass per atom index required")
        if np.any(masses < 0):
            raise ValueError("atom masses must be nonnegative")
        masses = masses.copy()
        masses.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "masses", masses)

    @property
    def count(self) -> int:
        return len(self.indices)

    def frequencies(self, n_samples: int) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(self.indices, dtype=float) / n_samples


@dataclass(frozen=True)
class SpectralModel:
    """Fitted log mean spectral density: spline part plus atoms."""

    basis: SplineBasis
    spline_coefficients: np.ndarray
    atoms: AtomSet
    n_samples: int

    def __post_init__(self):
        beta = np.asarray(self.spline_coefficients, dtype=float).copy()
        if beta.shape != (self.basis.dimension,):
            raise ValueError(
                f"expected {self.basis.dimension} spline coefficients, got {beta.shape}"
            )
        if self.n_samples < 4:
            raise ValueError("n_samples too small")
        if self.atoms.count and max(self.atoms.indices) > self.n_samples // 2:
            raise ValueError("atom index beyond the Fourier grid")
        beta.setflags(write=False)
        object.__setattr__(self, "spline_coefficients", beta)

    def log_density_grid(self) -> np.ndarray:
        """g evaluated at every grid frequency r_k, k = 1..floor(T/2)."""
        g = _grid_design(self.basis, self.n_samples) @ self.spline_coefficients
        if self.atoms.count:
            g = g.copy()
            g[np.asarray(self.atoms.indices) - 1] += self.atoms.masses
        return g

    def log_density_at(self, r) -> np.ndarray:
        """g at arbitrary frequencies; atoms contribute only on grid points."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        g = self.basis.design_matrix(r) @ self.spline_coefficients
        for k, mass in zip(self.atoms.indices, self.atoms.masses):
            a = 2.0 * np.pi * k / self.n_samples
            g[np.abs(r - a) < 1e-12] += mass
        return g


def density_eval(model: SpectralModel, r) -> np.ndarray:
    """Mean spectral density exp(g) at frequencies r (clamped, so finite)."""
    scalar = np.isscalar(r)
    g = model.log_density_at(r)
    out = np.exp(np.clip(g, -_LOG_DENSITY_BOUND, _LOG_DENSITY_BOUND))
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class FitReport:
    """Outcome of one coefficient fit (or of the full model search)."""

    loglik: float
    bic: float
    n_knots: int
    n_atoms: int
    iterations: int
    converged: bool
    ridged: bool = False


def _whittle_terms(periodogram, g):
    """sum_k [ I_k * exp(-g_k) + g_k ] with overflow-guarded exponentials."""
    return float(np.sum(periodogram * np.exp(-np.clip(g, -_LOG_DENSITY_BOUND, _LOG_DENSITY_BOUND)) + g))


def _per_source_loglik(periodogram, g, n_samples):
    return -_whittle_terms(periodogram, g) / (2.0 * n_samples)


def _bic(loglik, n_params, n_samples):
    return -2.0 * n_samples * loglik + n_params * np.log(n_samples // 2)


def _design(basis: SplineBasis, atoms: AtomSet, n_samples: int) -> np.ndarray:
    spline = _grid_design(basis, n_samples)
    if not atoms.count:
        return spline
    n_freq = spline.shape[0]
    cols = np.zeros((n_freq, atoms.count))
    cols[np.asarray(atoms.indices) - 1, np.arange(atoms.count)] = 1.0
    return np.hstack([spline, cols])


def _initial_beta(periodogram, design, n_spline):
    """Constant start for the spline, direct log-ratio start for atoms."""
    mean_i = max(float(np.mean(periodogram)), 1e-290)
    ones = np.ones(design.shape[0])
    beta_c, *_ = np.linalg.lstsq(design[:, :n_spline], np.log(mean_i) * ones, rcond=None)
    beta = np.concatenate([beta_c, np.zeros(design.shape[1] - n_spline)])
    if design.shape[1] > n_spline:
        g0 = design[:, :n_spline] @ beta_c
        for j in range(n_spline, design.shape[1]):
            row = np.argmax(design[:, j])
            beta[j] = max(np.log(max(periodogram[row], 1e-290)) - g0[row], 0.0)
    return beta


def fit_coefficients(periodogram, basis: SplineBasis, atoms: AtomSet, n_samples: int,
                     beta0=None, max_iter: int = _MAX_NEWTON_ITER):
    """Maximize the per-source Whittle likelihood over the coefficients.

    Newton iterations with step halving; atom masses are kept nonnegative by
    projection. Returns the fitted model and a report. A singular Hessian is
    ridge-regularized (1e-8 * trace) and flagged in the report.
    """
    periodogram = np.asarray(periodogram, dtype=float)
    n_freq = n_samples // 2
    if periodogram.shape != (n_freq,):
        raise ValueError(f"expected {n_freq} periodogram values, got {periodogram.shape}")
    if np.any(periodogram < 0):
        raise ValueError("periodogram values must be nonnegative")

    design = _design(basis, atoms, n_samples)
    n_spline = basis.dimension
    n_params = design.shape[1]
    beta = _initial_beta(periodogram, design, n_spline) if beta0 is None else np.asarray(beta0, float).copy()
    if beta.shape != (n_params,):
        raise ValueError(f"beta0 must have length {n_params}")
    beta[n_spline:] = np.maximum(beta[n_spline:], 0.0)

    def objective(b):
        return -_whittle_terms(periodogram, design @ b)

    cur = objective(beta)
    ridged = False
    converged = False
    grad_tol = _GRAD_TOL_PER_FREQ * n_freq
    it = 0
    for it in range(1, max_iter + 1):
        g = design @ beta
        w = periodogram * np.exp(-np.clip(g, -_LOG_DENSITY_BOUND, _LOG_DENSITY_BOUND))
        grad = design.T @ (w - 1.0)
        # KKT residual: active nonnegativity bounds null their inward gradient
        proj = grad.copy()
        at_bound = np.zeros(n_params, dtype=bool)
        at_bound[n_spline:] = beta[n_spline:] <= 0.0
        proj[at_bound & (grad < 0)] = 0.0
        if np.linalg.norm(proj) < grad_tol:
            converged = True
            break
        hess = design.T @ (w[:, None] * design)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            hess = hess + 1e-8 * np.trace(hess) * np.eye(n_params)
            ridged = True
            step = np.linalg.solve(hess, grad)
        alpha = 1.0
        accepted = False
        for _ in range(30):
            cand = beta + alpha * step
            cand[n_spline:] = np.maximum(cand[n_spline:], 0.0)
            val = objective(cand)
            if val >= cur:
                beta, cur = cand, val
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break  # no ascent available from here; treat as converged
    model = SpectralModel(basis, beta[:n_spline], AtomSet(atoms.indices, beta[n_spline:]),
                          n_samples)
    loglik = cur / (2.0 * n_samples)
    report = FitReport(
        loglik=loglik,
        bic=_bic(loglik, n_params, n_samples),
        n_knots=basis.dimension,
        n_atoms=atoms.count,
        iterations=it,
        converged=converged,
        ridged=ridged,
    )
    return model, report


@dataclass(frozen=True)
class _SearchState:
    model: SpectralModel
    report: FitReport


def _refit(periodogram, knots, atom_indices, n_samples, warm: SpectralModel | None):
    basis = SplineBasis(tuple(knots))
    atoms = AtomSet(tuple(atom_indices))
    beta0 = None
    if warm is not None:
        beta0 = _warm_start_vector(periodogram, warm, basis, atoms)
    return fit_coefficients(periodogram, basis, atoms, n_samples, beta0=beta0)


def _warm_start_vector(periodogram, warm: SpectralModel, basis: SplineBasis, atoms: AtomSet):
    n_samples = warm.n_samples
    g_spline = _grid_design(warm.basis, n_samples) @ warm.spline_coefficients
    new_design = _grid_design(basis, n_samples)
    beta_c, *_ = np.linalg.lstsq(new_design, g_spline, rcond=None)
    g_new = new_design @ beta_c
    old = dict(zip(warm.atoms.indices, warm.atoms.masses))
    masses = np.empty(atoms.count)
    for j, k in enumerate(atoms.indices):
        if k in old:
            masses[j] = old[k]
        else:
            masses[j] = max(np.log(max(periodogram[k - 1], 1e-290)) - g_new[k - 1], 0.0)
    return np.concatenate([beta_c, masses])


def _deviance_by_interval(periodogram, g, breakpoints, frequencies):
    safe = np.maximum(periodogram, max(float(np.mean(periodogram)) * 1e-12, 1e-290))
    dev = 2.0 * (periodogram * np.exp(-np.clip(g, -_LOG_DENSITY_BOUND, _LOG_DENSITY_BOUND))
                 + g - 1.0 - np.log(safe))
    which = np.searchsorted(breakpoints[1:-1], frequencies, side="right")
    totals = np.zeros(len(breakpoints) - 1)
    np.add.at(totals, which, dev)
    return totals


def select_model(periodogram, n_samples: int, initial: SpectralModel | None = None):
    """Stepwise BIC search over knot and atom placement.

    Starts from four equally spaced interior knots (or from ``initial``'s
    structure when given), then alternates knot addition at the midpoint of
    the worst-deviance interval, atom addition at the frequency with the
    largest periodogram-to-density ratio past the 1 - 1/T exponential
    quantile, and deletion of whichever knot/atom most improves BIC. A move
    is kept only if BIC drops. Returns the best model encountered.
    """
    periodogram = np.asarray(periodogram, dtype=float)
    n_freq = n_samples // 2
    if n_freq < 16:
        raise ValueError(f"need floor(T/2) >= 16 grid frequencies, got {n_freq}")
    if periodogram.shape != (n_freq,):
        raise ValueError(f"expected {n_freq} periodogram values, got {periodogram.shape}")

    cap = min(30, int(np.ceil(np.sqrt(n_freq))))
    min_sep = 2.0 * (2.0 * np.pi / n_samples)
    atom_threshold = np.log(n_samples)
    frequencies = FourierGrid(n_samples).frequencies

    if initial is None:
        knots = list(np.pi * np.arange(1, 5) / 5.0)
        atom_indices: list = []
        warm = None
    else:
        knots = list(initial.basis.knots)
        atom_indices = list(initial.atoms.indices)
        warm = initial

    model, report = _refit(periodogram, knots, atom_indices, n_samples, warm)
    best = _SearchState(model, report)

    for _ in range(200):
        moved = False

        # (a) knot addition at the midpoint of the worst-deviance interval
        if len(knots) + len(atom_indices) < cap:
            g = model.log_density_grid()
            breaks = np.concatenate([[0.0], knots, [np.pi]])
            totals = _deviance_by_interval(periodogram, g, breaks, frequencies)
            candidate = None
            for idx in np.argsort(totals)[::-1]:
                mid = 0.5 * (breaks[idx] + breaks[idx + 1])
                if mid <= 0.0 or mid >= np.pi:
                    continue
                if all(abs(mid - t) >= min_sep for t in knots):
                    candidate = mid
                    break
            if candidate is not None:
                trial_knots = sorted(knots + [candidate])
                trial, trial_rep = _refit(periodogram, trial_knots, atom_indices,
                                          n_samples, model)
                if trial_rep.bic < report.bic:
                    knots, model, report = trial_knots, trial, trial_rep
                    moved = True

        # (b) atom addition where the periodogram most exceeds the fitted density
        if len(knots) + len(atom_indices) < cap:
            g = model.log_density_grid()
            ratio = periodogram * np.exp(-np.clip(g, -_LOG_DENSITY_BOUND, _LOG_DENSITY_BOUND))
            if atom_indices:
                ratio[np.asarray(atom_indices) - 1] = -np.inf
            k_star = int(np.argmax(ratio)) + 1
            if ratio[k_star - 1] > atom_threshold:
                trial_atoms = sorted(atom_indices + [k_star])
                trial, trial_rep = _refit(periodogram, knots, trial_atoms, n_samples, model)
                if trial_rep.bic < report.bic:
                    atom_indices, model, report = trial_atoms, trial, trial_rep
                    moved = True

        # (c) deletion of the least useful knot or atom
        best_del = None
        if len(knots) > 1:
            for i in range(len(knots)):
                trial_knots = knots[:i] + knots[i + 1:]
                trial, trial_rep = _refit(periodogram, trial_knots, atom_indices,
                                          n_samples, model)
                if best_del is None or trial_rep.bic < best_del[1].bic:
                    best_del = (trial, trial_rep, trial_knots, atom_indices)
        for i in range(len(atom_indices)):
            trial_atoms = atom_indices[:i] + atom_indices[i + 1:]
            trial, trial_rep = _refit(periodogram, knots, trial_atoms, n_samples, model)
            if best_del is None or trial_rep.bic < best_del[1].bic:
                best_del = (trial, trial_rep, knots, trial_atoms)
        if best_del is not None and best_del[1].bic < report.bic:
            model, report = best_del[0], best_del[1]
            knots, atom_indices = list(best_del[2]), list(best_del[3])
            moved = True

        if report.bic < best.report.bic:
            best = _SearchState(model, report)
        if not moved:
            break

    return best.model, best.report


def model_to_dict(model: SpectralModel, bic: float | None = None) -> dict:
    """JSON-ready description: knots, spline coefficients, atoms, T, BIC."""
    return {
        "knots": [float(k) for k in model.basis.knots],
        "beta_c": [float(b) for b in model.spline_coefficients],
        "atoms": [
            {"k": int(k), "frequency": 2.0 * np.pi * k / model.n_samples, "mass": float(m)}
            for k, m in zip(model.atoms.indices, model.atoms.masses)
        ],
        "T": int(model.n_samples),
        "bic": None if bic is None else float(bic),
    }


def model_from_dict(doc: dict) -> SpectralModel:
    basis = SplineBasis(tuple(doc["knots"]))
    atoms = AtomSet(tuple(a["k"] for a in doc["atoms"]),
                    np.array([a["mass"] for a in doc["atoms"]], dtype=float))
    return SpectralModel(basis, np.array(doc["beta_c"], dtype=float), atoms, int(doc["T"]))


def model_to_json(model: SpectralModel, bic: float | None = None) -> str:
    return json.dumps(model_to_dict(model, bic))


def model_from_json(text: str) -> SpectralModel:
    return model_from_dict(json.loads(text))

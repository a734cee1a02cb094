"""Second-order blind identification baseline.

Whitens the observations, forms symmetrized lagged autocovariance matrices
of the whitened data, and jointly diagonalizes them with iterative Givens
rotations (Jacobi sweeps). Separation succeeds when the sources have
distinct autocovariance structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import MultichannelSeries
from .whittle import IterationRecord, UnmixingEstimate, canonicalize, prewhiten

__all__ = ["LagSet", "sobi", "joint_diagonalize"]


@dataclass(frozen=True)
class LagSet:
    """Strictly increasing positive lags for the autocovariance stack."""

    lags: tuple = tuple(range(1, 13))

    def __post_init__(self):
        lags = tuple(int(u) for u in self.lags)
        if not lags:
            raise ValueError("need at least one lag")
        if lags[0] < 1 or any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be strictly increasing positive integers")
        object.__setattr__(self, "lags", lags)


def joint_diagonalize(matrices: np.ndarray, threshold: float = 1e-8, max_sweeps: int = 200):
    """Orthogonal matrix V approximately diagonalizing every input matrix.

    Jacobi-style sweeps of Givens rotations, each chosen to minimize the
    summed squared off-diagonals for its coordinate pair; sweeps stop once
    every rotation sine falls below ``threshold``.

    Returns (v, off_objectives, converged) where off_objectives records the
    off-diagonal objective after each sweep (non-increasing).
    """
    a = np.array(matrices, dtype=float)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got {a.shape}")
    m = a.shape[1]
    v = np.eye(m)
    objectives = []
    converged = False
    for _ in range(max_sweeps):
        max_sin = 0.0
        for p in range(m - 1):
            for q in range(p + 1, m):
                g1 = a[:, p, p] - a[:, q, q]
                g2 = a[:, p, q] + a[:, q, p]
                ton = g1 @ g1 - g2 @ g2
                toff = 2.0 * (g1 @ g2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                c, s = np.cos(theta), np.sin(theta)
                if abs(s) > threshold:
                    rot = np.array([[c, -s], [s, c]])
                    a[:, [p, q], :] = np.einsum("ij,kjl->kil", rot.T, a[:, [p, q], :])
                    a[:, :, [p, q]] = np.einsum("kij,jl->kil", a[:, :, [p, q]], rot)
                    v[:, [p, q]] = v[:, [p, q]] @ rot
                max_sin = max(max_sin, abs(s))
        off = float(np.sum(a**2) - np.sum(np.einsum("kii->ki", a) ** 2))
        objectives.append(off)
        if max_sin < threshold:
            converged = True
            break
    return v, objectives, converged


def _lagged_autocovariances(data: np.ndarray, lags) -> np.ndarray:
    t_len = data.shape[1]
    out = []
    for u in lags:
        c = (data[:, u:] @ data[:, : t_len - u].T) / (t_len - u)
        out.append(0.5 * (c + c.T))
    return np.stack(out)


def sobi(x: MultichannelSeries, lags: LagSet = LagSet(), threshold: float = 1e-8) -> UnmixingEstimate:
    """SOBI unmixing estimate of a multichannel series."""
    if max(lags.lags) >= x.n_samples / 4:
        raise ValueError(f"max lag {max(lags.lags)} must be < T/4 = {x.n_samples / 4}")
    whitened, transform = prewhiten(x)
    cov_stack = _lagged_autocovariances(whitened.data, lags.lags)
    v, objectives, converged = joint_diagonalize(cov_stack, threshold=threshold)
    o = v.T
    m = x.n_channels
    return UnmixingEstimate(
        rotation=o,
        lagrange=np.zeros(m * (m + 1) // 2),
        unmixing=canonicalize(o @ transform.root_inverse),
        whitening=transform,
        spectral_models=[],
        fit_reports=[],
        trace=[IterationRecord(objective=obj, amari_step=np.nan) for obj in objectives],
        converged=converged,
        method="sobi",
    )

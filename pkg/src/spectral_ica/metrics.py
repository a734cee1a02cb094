"""Separation-quality metrics: Amari distance and correlation discrepancy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MetricRecord", "amari_distance", "correlation_discrepancy"]


@dataclass(frozen=True)
class MetricRecord:
    """Per-run evaluation record.

    ``correlation_matrix`` holds absolute correlations between estimated and
    true channels after best-match row reordering; ``cor_disc`` is the sum of
    its off-diagonal entries. ``amari`` is filled in by callers that know the
    true unmixing matrix.
    """

    correlation_matrix: np.ndarray
    cor_disc: float
    amari: float = field(default=np.nan)


def amari_distance(m1: np.ndarray, m2: np.ndarray) -> float:
    """Permutation- and scale-invariant discrepancy between two matrices.

    With a = m1 @ inv(m2), averages (row_sum/row_max - 1) over rows and
    (col_sum/col_max - 1) over columns of |a|. Zero iff m1 @ inv(m2) is a
    scaled permutation.
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if m1.shape != m2.shape or m1.ndim != 2 or m1.shape[0] != m1.shape[1]:
        raise ValueError(f"need two square matrices of equal size, got {m1.shape}, {m2.shape}")
    if np.array_equal(m1, m2):
        return 0.0
    try:
        a = np.abs(m1 @ np.linalg.inv(m2))
    except np.linalg.LinAlgError:
        raise ValueError("second matrix is singular") from None
    m = a.shape[0]
    row = np.sum(a, axis=1) / np.max(a, axis=1) - 1.0
    col = np.sum(a, axis=0) / np.max(a, axis=0) - 1.0
    return float(np.mean(row) + np.mean(col))


def correlation_discrepancy(s_hat: np.ndarray, s_true: np.ndarray) -> MetricRecord:
    """Absolute-correlation match between estimated and true channels.

    Rows of the correlation matrix are greedily reordered by descending best
    match (ties broken by index) so matched pairs land on the diagonal;
    cor_disc sums the remaining off-diagonal entries.
    """
    s_hat = np.asarray(s_hat, dtype=float)
    s_true = np.asarray(s_true, dtype=float)
    if s_hat.shape != s_true.shape or s_hat.ndim != 2:
        raise ValueError(f"shapes must match, got {s_hat.shape} and {s_true.shape}")
    m, t_len = s_hat.shape

    def standardize(x):
        centered = x - x.mean(axis=1, keepdims=True)
        scale = np.sqrt(np.mean(centered**2, axis=1))
        if np.any(scale == 0):
            raise ValueError("zero-variance channel")
        return centered / scale[:, None]

    corr = np.abs(standardize(s_hat) @ standardize(s_true).T) / t_len

    remaining = corr.copy()
    order = np.full(m, -1)
    for _ in range(m):
        i, j = np.unravel_index(np.argmax(remaining), remaining.shape)
        order[j] = i
        remaining[i, :] = -1.0
        remaining[:, j] = -1.0
    reordered = corr[order, :]
    cor_disc = float(np.sum(reordered) - np.trace(reordered))
    return MetricRecord(correlation_matrix=reordered, cor_disc=cor_disc)

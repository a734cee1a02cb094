"""Discrete Fourier transform and second-order cross-periodogram.

All frequency-domain quantities live on the positive Fourier grid
r_k = 2*pi*k/T for k = 1..floor(T/2); the DC term is excluded because the
input is centered (its periodogram is identically zero), and the Nyquist
term (T even) is kept with the same weight as interior frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import MultichannelSeries, center

__all__ = ["FourierGrid", "PeriodogramStack", "dft", "cross_periodogram", "periodogram_to_csv"]


@dataclass(frozen=True)
class FourierGrid:
    """Positive Fourier frequencies 2*pi*k/T, k = 1..floor(T/2)."""

    n_samples: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(1, self.n_samples // 2 + 1)

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * self.indices / self.n_samples

    @property
    def size(self) -> int:
        return self.n_samples // 2


@dataclass(frozen=True)
class PeriodogramStack:
    """One M-by-M Hermitian rank-1 matrix per grid frequency.

    ``matrices[k-1] = d(r_k) d(r_k)^* / (2*pi*T)`` where d is the vector DFT
    of the M channels. Diagonals are the univariate periodograms.
    """

    grid: FourierGrid
    matrices: np.ndarray  # (grid.size, M, M) complex

    def __post_init__(self):
        mats = np.asarray(self.matrices)
        if mats.ndim != 3 or mats.shape[0] != self.grid.size or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"matrices must have shape (n_freq, M, M), got {mats.shape}")
        herm_err = np.max(np.abs(mats - np.conj(np.transpose(mats, (0, 2, 1)))))
        if herm_err > 1e-12 * max(1.0, float(np.max(np.abs(mats)))):
            raise ValueError(f"stack matrices are not Hermitian (max asymmetry {herm_err:.3e})")
        mats = mats.copy()
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def n_channels(self) -> int:
        return self.matrices.shape[1]

    def diagonals(self) -> np.ndarray:
        """Univariate periodograms, shape (M, n_freq)."""
        return np.real(np.einsum("kjj->jk", self.matrices))


def _largest_prime_factor(n: int) -> int:
    largest = 1
    d = 2
    while d * d <= n:
        while n % d == 0:
            largest = d
            n //= d
        d += 1
    return max(largest, n) if n > 1 else largest


def dft(x: np.ndarray, method: str = "auto") -> np.ndarray:
    """DFT coefficients d(r_k) = sum_t x(t) exp(-i r_k t) on the positive grid.

    method="fft" uses the FFT; "direct" the O(T^2) sum; "auto" picks the FFT
    for highly composite lengths and the direct sum otherwise. Both paths
    agree to ~1e-9 relative error.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"dft expects a single channel, got shape {x.shape}")
    t_len = x.size
    if t_len < 2:
        raise ValueError(f"series too short for dft: T={t_len}")
    if method == "auto":
        method = "fft" if _largest_prime_factor(t_len) <= 13 else "direct"
    k = np.arange(1, t_len // 2 + 1)
    if method == "fft":
        return np.fft.fft(x)[k]
    if method == "direct":
        t = np.arange(t_len)
        basis = np.exp(-2j * np.pi * np.outer(k, t) / t_len)
        return basis @ x
    raise ValueError(f"unknown dft method {method!r}")


def cross_periodogram(x: MultichannelSeries | np.ndarray, method: str = "auto") -> PeriodogramStack:
    """Second-order cross-periodogram stack of a multichannel series.

    Channels are centered first if any channel mean exceeds 1e-8 in
    magnitude.
    """
    if isinstance(x, np.ndarray):
        x = MultichannelSeries(x)
    if x.n_samples < 4:
        raise ValueError(f"need at least 4 samples, got {x.n_samples}")
    if np.max(np.abs(x.data.mean(axis=1))) > 1e-8:
        x = center(x)
    t_len = x.n_samples
    d = np.stack([dft(ch, method=method) for ch in x.data])  # (M, n_freq)
    # rank-1 outer products d(r_k) d(r_k)^* scaled by 1/(2 pi T)
    mats = np.einsum("jk,lk->kjl", d, np.conj(d)) / (2.0 * np.pi * t_len)
    return PeriodogramStack(FourierGrid(t_len), mats)


def periodogram_to_csv(stack: PeriodogramStack, path) -> None:
    """Dump a stack to CSV: k, r_k, then Re/Im of the upper-triangle entries."""
    m = stack.n_channels
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    cols = ["k", "r_k"]
    for i, j in pairs:
        cols += [f"re_{i}{j}", f"im_{i}{j}"]
    ks = stack.grid.indices
    rs = stack.grid.frequencies
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for idx in range(stack.grid.size):
            row = [str(ks[idx]), f"{rs[idx]:.17g}"]
            for i, j in pairs:
                v = stack.matrices[idx, i, j]
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            fh.write(",".join(row) + "\n")

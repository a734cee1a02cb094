"""Multichannel time series: data model, mixed-spectrum source generators, CSV I/O.

Sources are built as a sum of sinusoids (line-spectrum part) plus a
stationary noise process (continuous-spectrum part):

    S(t) = sum_p R_p * cos(t * w_p + phi_p) + Y(t),   t = 0..T-1

with Y one of Gaussian/uniform white noise, AR(1) with scaled-t(3)
innovations, or MA(1) with Gaussian innovations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "MultichannelSeries",
    "HarmonicComponent",
    "NoiseSpec",
    "SourceSpec",
    "MixingMatrix",
    "generate_source",
    "mix",
    "center",
    "read_csv",
    "write_csv",
]

# Warm-up samples discarded before AR/MA output; geometric decay makes the
# initialization bias negligible for any stationary coefficient.
_BURN_IN = 512


def _as_readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MultichannelSeries:
    """An M-by-T real matrix of signals, one channel per row.

    Parameters
    ----------
    data : ndarray, shape (n_channels, n_samples)
        Signal values; must be finite.
    sample_rate : float, optional
        Sampling rate in Hz. Metadata only, never used in computations.
    """

    data: np.ndarray
    sample_rate: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"data must be 2-D (channels x samples), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"data must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("data contains non-finite entries")
        if self.sample_rate is not None and not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class HarmonicComponent:
    """One sinusoid: amplitude * cos(t * frequency + phase).

    frequency is in radians per sample and must lie in (0, pi];
    amplitude must be nonnegative; phase in [-pi, pi].
    """

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if not (0.0 < self.frequency <= np.pi):
            raise ValueError(f"frequency must be in (0, pi], got {self.frequency}")
        if not (-np.pi <= self.phase <= np.pi):
            raise ValueError(f"phase must be in [-pi, pi], got {self.phase}")


@dataclass(frozen=True)
class NoiseSpec:
    """Stationary noise process driving the continuous spectrum of a source.

    Use the constructors rather than instantiating directly:

    - ``NoiseSpec.gaussian_white(sigma)``
    - ``NoiseSpec.uniform_white(half_width)``  (uniform on [-h, h])
    - ``NoiseSpec.ar1(coefficient)``  (innovations t(3)/sqrt(3), unit variance)
    - ``NoiseSpec.ma1(coefficient)``  (innovations N(0, 1))
    """

    kind: str
    value: float

    _KINDS = ("gaussian_white", "uniform_white", "ar1", "ma1")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not np.isfinite(self.value):
            raise ValueError("noise parameter must be finite")
        if self.kind in ("gaussian_white", "uniform_white") and self.value < 0:
            raise ValueError(f"{self.kind} scale must be >= 0, got {self.value}")
        if self.kind == "ar1" and not abs(self.value) < 1:
            raise ValueError(f"ar1 coefficient must satisfy |a| < 1, got {self.value}")

    @classmethod
    def gaussian_white(cls, sigma: float = 1.0) -> "NoiseSpec":
        return cls("gaussian_white", sigma)

    @classmethod
    def uniform_white(cls, half_width: float) -> "NoiseSpec":
        return cls("uniform_white", half_width)

    @classmethod
    def ar1(cls, coefficient: float) -> "NoiseSpec":
        return cls("ar1", coefficient)

    @classmethod
    def ma1(cls, coefficient: float) -> "NoiseSpec":
        return cls("ma1", coefficient)


@dataclass(frozen=True)
class SourceSpec:
    """Recipe for one source: a list of harmonics plus a noise process."""

    harmonics: tuple = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec.gaussian_white)

    def __post_init__(self):
        harmonics = tuple(self.harmonics)
        freqs = [h.frequency for h in harmonics]
        if len(set(freqs)) != len(freqs):
            raise ValueError("harmonic frequencies must be distinct within one source")
        object.__setattr__(self, "harmonics", harmonics)

    def with_phases(self, phases) -> "SourceSpec":
        """Copy of this spec with the harmonic phases replaced in order."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape != (len(self.harmonics),):
            raise ValueError(f"expected {len(self.harmonics)} phases, got {phases.shape}")
        new = tuple(replace(h, phase=float(p)) for h, p in zip(self.harmonics, phases))
        return replace(self, harmonics=new)


@dataclass(frozen=True)
class MixingMatrix:
    """Full-rank square matrix mapping sources to observations."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("mixing matrix contains non-finite entries")
        svals = np.linalg.svd(arr, compute_uv=False)
        if svals[-1] <= 1e-12 * max(svals[0], 1.0):
            raise ValueError("mixing matrix is rank deficient (smallest singular value ~ 0)")
        object.__setattr__(self, "entries", _as_readonly(arr))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


def _generate_noise(spec: NoiseSpec, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "gaussian_white":
        return spec.value * rng.standard_normal(n_samples)
    if spec.kind == "uniform_white":
        return rng.uniform(-spec.value, spec.value, size=n_samples)
    if spec.kind == "ar1":
        from scipy.signal import lfilter

        a = spec.value
        eps = rng.standard_t(3, size=n_samples + _BURN_IN) / np.sqrt(3.0)
        y = lfilter([1.0], [1.0, -a], eps)
        return y[_BURN_IN:]
    if spec.kind == "ma1":
        c = spec.value
        eps = rng.standard_normal(n_samples + _BURN_IN + 1)
        y = eps[1:] + c * eps[:-1]
        return y[_BURN_IN:]
    raise AssertionError(f"unreachable noise kind {spec.kind}")


def generate_source(spec: SourceSpec, n_samples: int, seed: int) -> np.ndarray:
    """Generate one source realisation of length ``n_samples``.

    Deterministic given ``(spec, n_samples, seed)``. The sample mean is not
    removed; use :func:`center` separately. AR/MA processes are warmed up
    internally and the warm-up discarded.

    Returns
    -------
    ndarray, shape (n_samples,)
    """
    if n_samples < 8:
        raise ValueError(f"n_samples must be >= 8, got {n_samples}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples, dtype=float)
    out = _generate_noise(spec.noise, n_samples, rng)
    for h in spec.harmonics:
        out = out + h.amplitude * np.cos(t * h.frequency + h.phase)
    return out


def mix(a: MixingMatrix, sources: MultichannelSeries) -> MultichannelSeries:
    """Observed mixture: left-multiply the source matrix by the mixing matrix."""
    if a.size != sources.n_channels:
        raise ValueError(
            f"mixing matrix is {a.size}x{a.size} but sources have {sources.n_channels} channels"
        )
    return MultichannelSeries(a.entries @ sources.data, sample_rate=sources.sample_rate)


def center(series: MultichannelSeries) -> MultichannelSeries:
    """Remove the sample mean from every channel."""
    data = series.data - series.data.mean(axis=1, keepdims=True)
    return MultichannelSeries(data, sample_rate=series.sample_rate)


def write_csv(series: MultichannelSeries, path, delimiter: str = ",",
              channels_as: str = "columns", header: bool = False) -> None:
    """Write a series to CSV with 17 significant digits (lossless round trip).

    channels_as="columns" (default) writes one channel per column;
    "rows" writes one channel per row.
    """
    if channels_as not in ("columns", "rows"):
        raise ValueError("channels_as must be 'columns' or 'rows'")
    table = series.data.T if channels_as == "columns" else series.data
    with open(path, "w", encoding="utf-8") as fh:
        if header and channels_as == "columns":
            fh.write(delimiter.join(f"ch{j}" for j in range(series.n_channels)) + "\n")
        for row in table:
            fh.write(delimiter.join(f"{v:.17g}" for v in row) + "\n")


def read_csv(path, delimiter: str = ",", channels_as: str = "columns") -> MultichannelSeries:
    """Read a rectangular numeric CSV as a MultichannelSeries.

    A single non-numeric first row is treated as a header and skipped.
    Ragged rows or non-numeric cells elsewhere raise a parse error naming
    the offending line.
    """
    if channels_as not in ("columns", "rows"):
        raise ValueError("channels_as must be 'columns' or 'rows'")
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(delimiter)]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header row
                bad = next(c for c in cells if not _is_float(c))
                raise ValueError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} cells, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    data = table.T if channels_as == "columns" else table
    return MultichannelSeries(data)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False

"""Shared test fixtures: canonical source recipes with known properties."""

import numpy as np
import pytest

from spectral_ica.signals import (
    HarmonicComponent,
    MixingMatrix,
    MultichannelSeries,
    NoiseSpec,
    SourceSpec,
    generate_source,
)


@pytest.fixture
def source1_spec():
    """Three amplitude-2 cosines at 2*pi/128*(1,2,3) plus unit Gaussian noise.

    At T=512 the harmonic frequencies sit exactly on Fourier indices 4, 8, 12.
    """
    def make(phases=(0.3, -1.1, 2.0)):
        return SourceSpec(
            harmonics=tuple(
                HarmonicComponent(2.0, 2.0 * np.pi / 128.0 * j, p)
                for j, p in zip((1, 2, 3), phases)
            ),
            noise=NoiseSpec.gaussian_white(1.0),
        )
    return make


@pytest.fixture
def ar_pair():
    """Two AR(1) sources with opposite-signed coefficients (easy to separate)."""
    def make(t_len, seed):
        s1 = generate_source(SourceSpec(noise=NoiseSpec.ar1(0.9)), t_len, seed=seed)
        s2 = generate_source(SourceSpec(noise=NoiseSpec.ar1(-0.9)), t_len, seed=seed + 7919)
        return MultichannelSeries(np.vstack([s1, s2]))
    return make


@pytest.fixture
def benchmark_mixing():
    return MixingMatrix(np.array([
        [0.56, 0.58, -0.07, 0.59],
        [-0.41, 0.84, 0.10, 0.34],
        [-0.15, 0.05, 0.75, -0.65],
        [0.53, -0.83, -0.08, 0.13],
    ]))

import numpy as np
import pytest

from spectral_ica.signals import (
    HarmonicComponent,
    MixingMatrix,
    MultichannelSeries,
    NoiseSpec,
    SourceSpec,
    center,
    generate_source,
    mix,
    read_csv,
    write_csv,
)


class TestTypes:
    def test_series_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            MultichannelSeries(np.array([[1.0, np.nan]]))

    def test_series_shape_properties(self):
        s = MultichannelSeries(np.zeros((3, 10)))
        assert s.n_channels == 3 and s.n_samples == 10

    def test_series_immutable(self):
        s = MultichannelSeries(np.zeros((2, 4)))
        with pytest.raises(ValueError):
            s.data[0, 0] = 1.0

    def test_harmonic_validation(self):
        with pytest.raises(ValueError):
            HarmonicComponent(-1.0, 0.5)
        with pytest.raises(ValueError):
            HarmonicComponent(1.0, 0.0)
        with pytest.raises(ValueError):
            HarmonicComponent(1.0, np.pi + 0.1)

    def test_nonstationary_ar_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec.ar1(1.0)
        with pytest.raises(ValueError):
            NoiseSpec.ar1(-1.2)

    def test_duplicate_harmonic_frequencies_rejected(self):
        with pytest.raises(ValueError):
            SourceSpec(harmonics=(HarmonicComponent(1, 0.5), HarmonicComponent(2, 0.5)))

    def test_rank_deficient_mixing_rejected(self):
        with pytest.raises(ValueError):
            MixingMatrix(np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestGenerateSource:
    def test_white_noise_variance(self):
        spec = SourceSpec(noise=NoiseSpec.gaussian_white(1.0))
        x = generate_source(spec, 512, seed=101)
        assert 0.8 <= np.var(x) <= 1.2

    def test_pure_cosine_values(self):
        spec = SourceSpec(
            harmonics=(HarmonicComponent(2.0, 2.0 * np.pi / 128.0, 0.0),),
            noise=NoiseSpec.gaussian_white(0.0),
        )
        x = generate_source(spec, 128, seed=0)
        assert x[0] == pytest.approx(2.0, abs=1e-12)
        assert x[64] == pytest.approx(-2.0, abs=1e-12)

    def test_harmonic_source_periodogram_peaks(self, source1_spec):
        # brute-force periodogram oracle: top three ordinates must sit at the
        # Fourier indices carrying the harmonics (4, 8, 12 at T=512)
        t_len = 512
        x = generate_source(source1_spec(), t_len, seed=5)
        x = x - x.mean()
        t = np.arange(t_len)
        ks = np.arange(1, t_len // 2 + 1)
        peri = np.array([
            np.abs(np.sum(x * np.exp(-2j * np.pi * k * t / t_len))) ** 2
            for k in ks
        ]) / (2 * np.pi * t_len)
        top3 = set(ks[np.argsort(peri)[-3:]])
        assert top3 == {4, 8, 12}

    def test_deterministic_given_seed(self):
        spec = SourceSpec(noise=NoiseSpec.ar1(0.7))
        a = generate_source(spec, 256, seed=9)
        b = generate_source(spec, 256, seed=9)
        assert np.array_equal(a, b)
        c = generate_source(spec, 256, seed=10)
        assert not np.array_equal(a, c)

    def test_ar1_lag1_autocorrelation(self):
        t_len = 8192
        for coeff in (0.8, -0.6):
            x = generate_source(SourceSpec(noise=NoiseSpec.ar1(coeff)), t_len, seed=3)
            x = x - x.mean()
            rho1 = np.dot(x[1:], x[:-1]) / np.dot(x, x)
            assert abs(rho1 - coeff) < 5.0 / np.sqrt(t_len)

    def test_ma1_variance(self):
        x = generate_source(SourceSpec(noise=NoiseSpec.ma1(0.5)), 16384, seed=4)
        assert np.var(x) == pytest.approx(1.25, rel=0.1)

    def test_harmonic_only_source_periodic(self):
        # both frequencies are Fourier frequencies of T=128, so the overall
        # period divides 128
        spec = SourceSpec(
            harmonics=(HarmonicComponent(1.0, 2 * np.pi * 4 / 128, 0.7),
                       HarmonicComponent(0.5, 2 * np.pi * 6 / 128, -0.2)),
            noise=NoiseSpec.gaussian_white(0.0),
        )
        x = generate_source(spec, 512, seed=0)
        assert np.max(np.abs(x[:128] - x[128:256])) < 1e-9

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            generate_source(SourceSpec(), 4, seed=0)


class TestMixCenter:
    def test_identity_mixing(self):
        s = MultichannelSeries(np.random.default_rng(0).standard_normal((3, 32)))
        x = mix(MixingMatrix(np.eye(3)), s)
        assert np.array_equal(x.data, s.data)

    def test_benchmark_matrix_first_column(self, benchmark_mixing):
        # indicator source on channel 1 reads out the first column
        s = np.zeros((4, 16))
        s[0, 3] = 1.0
        x = mix(benchmark_mixing, MultichannelSeries(s))
        assert np.allclose(x.data[:, 3], [0.56, -0.41, -0.15, 0.53], atol=1e-15)

    def test_mix_unmix_round_trip(self, benchmark_mixing):
        rng = np.random.default_rng(1)
        s = MultichannelSeries(rng.standard_normal((4, 256)))
        x = mix(benchmark_mixing, s)
        back = benchmark_mixing.inverse() @ x.data
        rel = np.linalg.norm(back - s.data) / np.linalg.norm(s.data)
        assert rel < 1e-10

    def test_mix_dimension_mismatch(self, benchmark_mixing):
        with pytest.raises(ValueError):
            mix(benchmark_mixing, MultichannelSeries(np.zeros((3, 8))))

    def test_center_constant_channel(self):
        out = center(MultichannelSeries(np.full((1, 8), 3.7)))
        assert np.all(out.data == 0.0)

    def test_center_already_centered(self):
        rng = np.random.default_rng(2)
        data = rng.standard_normal((2, 64))
        data -= data.mean(axis=1, keepdims=True)
        out = center(MultichannelSeries(data))
        assert np.max(np.abs(out.data - data)) < 1e-15

    def test_center_arithmetic(self):
        out = center(MultichannelSeries(np.array([[1.0, 2.0, 3.0]])))
        assert np.allclose(out.data, [[-1.0, 0.0, 1.0]], atol=1e-15)
        assert abs(out.data.mean()) < 1e-12


class TestCsv:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        s = MultichannelSeries(rng.standard_normal((4, 512)))
        path = tmp_path / "series.csv"
        write_csv(s, path)
        back = read_csv(path)
        assert np.array_equal(back.data, s.data)

    def test_round_trip_rows_orientation(self, tmp_path):
        rng = np.random.default_rng(4)
        s = MultichannelSeries(rng.standard_normal((3, 17)))
        path = tmp_path / "rows.csv"
        write_csv(s, path, channels_as="rows", delimiter=";")
        back = read_csv(path, channels_as="rows", delimiter=";")
        assert np.array_equal(back.data, s.data)

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b\n1,2\n3,4\n")
        out = read_csv(path)
        assert out.data.shape == (2, 2)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="no data rows"):
            read_csv(path)

    def test_text_cell_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ValueError, match="line 2"):
            read_csv(path)

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2\n3,4,5\n")
        with pytest.raises(ValueError, match="line 2"):
            read_csv(path)

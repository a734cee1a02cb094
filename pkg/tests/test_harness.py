import json

import numpy as np
import pytest

from spectral_ica import harness
from spectral_ica.harness import (
    ExperimentConfig,
    builtin_preset,
    derive_seed,
    plot_summary,
    run_experiment,
    separate,
    summarize_rows,
)
from spectral_ica.metrics import amari_distance, correlation_discrepancy
from spectral_ica.signals import (
    MultichannelSeries,
    NoiseSpec,
    SourceSpec,
    center,
    read_csv,
    write_csv,
)
from spectral_ica.whittle import SolverOptions, unmixing_from_json


def small_config(**overrides):
    base = dict(
        sources=(SourceSpec(noise=NoiseSpec.ar1(0.9)), SourceSpec(noise=NoiseSpec.ar1(-0.9))),
        mixing="random",
        sample_sizes=(256,),
        replicates=2,
        methods=("sobi",),
        master_seed=42,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestSeedDerivation:
    def test_deterministic_and_distinct(self):
        a = derive_seed(1, 512, 0)
        assert a == derive_seed(1, 512, 0)
        assert a != derive_seed(1, 512, 1)
        assert a != derive_seed(1, 4096, 0)
        assert a != derive_seed(2, 512, 0)

    def test_64_bit_range(self):
        for parts in [(0,), (1, 2, 3), (2**63, 2**64 - 1)]:
            val = derive_seed(*parts)
            assert 0 <= val < 2**64


class TestPresets:
    def test_sim1_preset_design_values(self):
        config = builtin_preset("sim1_512")
        assert config.sample_sizes == (512,) and config.replicates == 100
        omegas = [tuple(h.frequency for h in s.harmonics) for s in config.sources]
        assert np.allclose(omegas[0], 2 * np.pi / 128 * np.arange(1, 4))
        assert np.allclose(omegas[1], 2 * np.pi / 512 + 2 * np.pi / 64 * np.arange(1, 4))
        assert np.allclose(omegas[2], 2 * np.pi / 64 * np.arange(1, 4))
        assert np.allclose(omegas[3], 2 * np.pi / 128 + 2 * np.pi / 64 * np.arange(1, 4))
        assert all(h.amplitude == 2.0 for s in config.sources for h in s.harmonics)
        kinds = [s.noise.kind for s in config.sources]
        assert kinds == ["gaussian_white", "uniform_white", "ar1", "ma1"]
        assert config.sources[1].noise.value == pytest.approx(np.sqrt(3.0))
        expected = np.array([
            [0.56, 0.58, -0.07, 0.59],
            [-0.41, 0.84, 0.10, 0.34],
            [-0.15, 0.05, 0.75, -0.65],
            [0.53, -0.83, -0.08, 0.13],
        ])
        assert np.array_equal(config.mixing.entries, expected)

    def test_desk_preset_settings(self):
        config = builtin_preset("sim1_desk")
        assert config.replicates == 20 and config.sample_sizes == (512,)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            builtin_preset("sim2")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            small_config(replicates=0)
        with pytest.raises(ValueError):
            small_config(methods=())
        with pytest.raises(ValueError):
            small_config(methods=("jade",))


class TestRunExperiment:
    def test_single_row(self, tmp_path):
        rows = run_experiment(small_config(replicates=1))
        assert len(rows) == 1
        row = rows[0]
        assert row.method == "sobi" and row.n_samples == 256 and row.replicate == 0
        assert np.isfinite(row.amari) and row.error == ""

    def test_rerun_is_byte_identical(self, tmp_path):
        config = small_config()
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        run_experiment(config, out_dir=dir_a)
        run_experiment(config, out_dir=dir_b)
        assert (dir_a / "results.csv").read_bytes() == (dir_b / "results.csv").read_bytes()
        assert (dir_a / "summary.csv").read_bytes() == (dir_b / "summary.csv").read_bytes()

    def test_seed_independence_of_replicates(self):
        config1 = small_config(replicates=1)
        config2 = small_config(replicates=2)
        s1, x1, a1 = harness._replicate_data(config1, 256, 0)
        s2, x2, a2 = harness._replicate_data(config2, 256, 0)
        assert np.array_equal(s1.data, s2.data)
        assert np.array_equal(a1.entries, a2.entries)

    def test_fixed_phases_honoured(self):
        from spectral_ica.signals import HarmonicComponent

        src = SourceSpec(harmonics=(HarmonicComponent(2.0, 2 * np.pi * 8 / 256, 0.25),),
                         noise=NoiseSpec.gaussian_white(0.0))
        config = small_config(sources=(src, src.with_phases([0.25])),
                              random_phases=False, replicates=2)
        s_rep0, _, _ = harness._replicate_data(config, 256, 0)
        s_rep1, _, _ = harness._replicate_data(config, 256, 1)
        # noiseless fixed-phase harmonics are identical across replicates
        assert np.array_equal(s_rep0.data, s_rep1.data)
        assert s_rep0.data[0, 0] == pytest.approx(2.0 * np.cos(0.25), abs=1e-12)

    def test_amari_recomputes_from_serialized_estimate(self, tmp_path):
        config = small_config(replicates=2, methods=("sobi", "cica_lsp"),
                              sample_sizes=(512,))
        rows = run_experiment(config, out_dir=tmp_path)
        for row in rows:
            est_path = tmp_path / "estimates" / f"{row.method}_T{row.n_samples}_rep{row.replicate}.json"
            w_hat = unmixing_from_json(est_path.read_text())
            _, _, mixing = harness._replicate_data(config, row.n_samples, row.replicate)
            assert abs(amari_distance(w_hat, mixing.inverse()) - row.amari) < 1e-12

    def test_failures_recorded_not_raised(self):
        # lag set exceeds T/4 for sobi at T=64 is not constructible here, so
        # force a failure with a rank-deficient fixed mixing via duplicate rows
        config = small_config(sample_sizes=(256,), replicates=1, methods=("sobi",))
        # monkeypatch run_method to raise
        import spectral_ica.harness as hm
        original = hm.run_method
        try:
            def boom(method, mixture, solver):
                raise RuntimeError("synthetic failure")
            hm.run_method = boom
            rows = run_experiment(config)
        finally:
            hm.run_method = original
        assert len(rows) == 1
        assert rows[0].error != "" and not rows[0].converged
        assert np.isnan(rows[0].amari)

    def test_parallel_matches_serial(self, tmp_path):
        config = small_config(replicates=3)
        serial = run_experiment(config, out_dir=tmp_path / "s", threads=1)
        parallel = run_experiment(config, out_dir=tmp_path / "p", threads=2)
        assert [(r.method, r.replicate, r.amari) for r in serial] == \
               [(r.method, r.replicate, r.amari) for r in parallel]
        assert (tmp_path / "s" / "results.csv").read_bytes() == \
               (tmp_path / "p" / "results.csv").read_bytes()


class TestSeparate:
    def test_round_trip_recovers_sources(self, tmp_path):
        config = builtin_preset("sim1_desk")
        sources, mixture, mixing = harness._replicate_data(config, 4096, 0)
        csv_path = tmp_path / "mixture.csv"
        write_csv(mixture, csv_path)
        est = separate(csv_path, "cica_lsp", tmp_path / "out")
        recovered = read_csv(tmp_path / "out" / "sources.csv")
        record = correlation_discrepancy(recovered.data, sources.data)
        assert record.cor_disc < 0.5
        assert (tmp_path / "out" / "estimate.json").exists()
        report = (tmp_path / "out" / "report.txt").read_text()
        assert "atoms" in report and "knots" in report

    def test_sobi_same_schema(self, tmp_path):
        config = small_config()
        _, mixture, _ = harness._replicate_data(config, 256, 0)
        csv_path = tmp_path / "m.csv"
        write_csv(mixture, csv_path)
        separate(csv_path, "sobi", tmp_path / "out")
        doc = json.loads((tmp_path / "out" / "estimate.json").read_text())
        assert set(doc) == {"W", "O", "lambda", "per_source_models", "iterations", "converged"}
        assert doc["per_source_models"] == []
        assert (tmp_path / "out" / "sources.csv").exists()
        assert (tmp_path / "out" / "report.txt").exists()

    def test_malformed_csv_raises(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,nope\n")
        with pytest.raises(ValueError):
            separate(bad, "sobi", tmp_path / "out")

    def test_single_channel_rejected(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("1\n2\n3\n4\n5\n6\n7\n8\n")
        with pytest.raises(ValueError, match="2 channels"):
            separate(p, "sobi", tmp_path / "out")


class TestPlotSummary:
    def test_single_row_quantiles_collapse(self, tmp_path):
        rows = [harness.ResultRow("sobi", 256, 0, 0.5, 1.0, 0.1, True)]
        table = plot_summary(rows, tmp_path)
        assert len(table) == 1
        entry = table[0]
        assert entry["min"] == entry["q1"] == entry["median"] == entry["q3"] == entry["max"] == 0.5

    def test_known_five_values_nearest_rank(self, tmp_path):
        rows = [harness.ResultRow("m", 64, i, float(v), 0.0, 0.0, True)
                for i, v in enumerate([3, 1, 5, 2, 4])]
        table = plot_summary(rows, tmp_path)
        entry = table[0]
        assert (entry["min"], entry["q1"], entry["median"], entry["q3"], entry["max"]) == \
            (1.0, 2.0, 3.0, 4.0, 5.0)

    def test_chart_file_written(self, tmp_path):
        rows = run_experiment(small_config())
        plot_summary(rows, tmp_path)
        svg = (tmp_path / "boxplot.svg").read_text()
        assert svg.startswith("<svg") and len(svg) > 200
        data = (tmp_path / "boxplot_data.csv").read_text().splitlines()
        assert data[0] == "method,T,min,q1,median,q3,max"

    def test_empty_input_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            plot_summary([], tmp_path)

    def test_nan_rows_excluded(self, tmp_path):
        rows = [harness.ResultRow("m", 64, 0, np.nan, np.nan, 0.0, False, "boom"),
                harness.ResultRow("m", 64, 1, 0.25, 0.1, 0.0, True)]
        table = summarize_rows(rows)
        assert table[0]["median"] == 0.25


class TestTomlConfig:
    def test_load_round_trip(self, tmp_path):
        doc = """
name = "tiny"
master_seed = 7
sample_sizes = [256]
replicates = 1
methods = ["sobi"]
random_phases = true
mixing = [[1.0, 0.5], [0.0, 1.0]]

[solver]
max_outer_iterations = 10

[[sources]]
noise = {kind = "ar1", value = 0.9}

[[sources]]
noise = {kind = "gaussian_white", value = 1.0}
harmonics = [{amplitude = 2.0, frequency = 0.7853981633974483}]
"""
        path = tmp_path / "exp.toml"
        path.write_text(doc)
        config = harness.load_config(path)
        assert config.name == "tiny" and config.master_seed == 7
        assert config.solver.max_outer_iterations == 10
        assert config.sources[1].harmonics[0].amplitude == 2.0
        assert config.mixing.entries.shape == (2, 2)
        rows = run_experiment(config)
        assert len(rows) == 1

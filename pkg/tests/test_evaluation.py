import json

import numpy as np
import pytest

from magcast.dataset import FeatureSpec, WindowConfig, WindowSet, assemble_windows
from magcast.evaluation import (
    EvalReport, UndefinedMetricError, comparison_rows, evaluate, pearson, persistence_forecast, r_squared,
    save_report,
)
from magcast.features import fit_scaler, standardize
from magcast.synthetic import N_LAGS, SynthConfig, coefficients_for, generate_synthetic
from magcast.timetable import TimeTable
from oracles import pearson_naive, r2_naive


def windows_from(values, cols=("AE", "Dst"), history=2, lead=3):
    values = np.asarray(values, float)
    t = TimeTable.from_hours(np.arange(len(values)), cols, values)
    return assemble_windows(t, FeatureSpec(cols, cols), WindowConfig(history, lead))


class TestPearson:
    def test_examples(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
        assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0, abs=1e-15)
        assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)

    def test_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert abs(pearson(a, b) - pearson_naive(a, b)) <= 1e-12

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=30), rng.normal(size=30)
        assert pearson(3 * a + 7, 0.5 * b - 2) == pytest.approx(pearson(a, b), abs=1e-12)
        assert pearson(a, b) == pytest.approx(pearson(b, a), abs=1e-15)

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(UndefinedMetricError):
            pearson([1], [1])
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])


class TestRSquared:
    def test_examples(self):
        assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
        assert r_squared([2, 2, 2], [1, 2, 3]) == 0.0
        assert r_squared([1, 2, 4], [1, 2, 3]) == 0.5

    def test_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            p, a = rng.normal(size=n), rng.normal(size=n)
            assert abs(r_squared(p, a) - r2_naive(p, a)) <= 1e-12

    def test_can_be_negative(self):
        assert r_squared([3, 2, 1], [1, 2, 3]) < 0

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            r_squared([1, 2, 3], [5, 5, 5])


class TestPersistence:
    def test_definition(self):
        vals = np.array([[1, 10], [2, 20], [100, -20], [4, 40], [5, 50], [6, 60]])
        ws = windows_from(vals)
        out = persistence_forecast(ws)
        assert out.shape == (1, 3, 2)
        assert out[0].tolist() == [[100, -20]] * 3

    def test_constant_series_exact(self):
        ws = windows_from(np.full((20, 2), 7.0))
        assert np.array_equal(persistence_forecast(ws), ws.targets)

    @pytest.mark.parametrize("preset", ["sw", "sdrn"])
    def test_presets_without_targets(self, preset):
        spec = FeatureSpec.from_preset(preset)
        ws = WindowSet(np.arange(2), np.zeros((2, 3, len(spec.input_columns))), np.zeros((2, 1, 6)),
                       spec.input_columns, spec.target_columns, WindowConfig(2, 1))
        with pytest.raises(ValueError, match="base"):
            persistence_forecast(ws)

    def test_matches_lag_autocorrelation(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(300, 2)).cumsum(axis=0)
        ws = windows_from(raw, history=2, lead=4)
        rep = evaluate(None, ws, None, predictions=np.zeros_like(ws.targets) + rng.normal(size=ws.targets.shape))
        anchors = ws.anchors
        for h in range(1, 5):
            for k in range(2):
                oracle = pearson_naive(raw[anchors, k], raw[anchors + h, k])
                assert abs(rep.persistence_pearson[k, h - 1] - oracle) <= 1e-12


class TestEvaluate:
    def make(self, n=80, seed=0):
        rng = np.random.default_rng(seed)
        raw = TimeTable.from_hours(np.arange(n), ("AE", "Dst"), rng.normal(size=(n, 2)) * [100, 20] + [300, -10])
        scaler = fit_scaler(raw, ("AE", "Dst"))
        ws = assemble_windows(standardize(raw, scaler), FeatureSpec(("AE", "Dst"), ("AE", "Dst")), WindowConfig(2, 3))
        return ws, scaler

    def test_oracle_model(self):
        ws, scaler = self.make()
        rep = evaluate(None, ws, scaler, predictions=ws.targets.copy())
        np.testing.assert_allclose(rep.model_pearson, 1.0, atol=1e-12)
        np.testing.assert_allclose(rep.model_r2, 1.0, atol=1e-12)
        assert rep.n_points == len(ws)

    def test_destandardization_invariance(self):
        ws, scaler = self.make(seed=1)
        pred = ws.targets + np.random.default_rng(1).normal(size=ws.targets.shape)
        phys = evaluate(None, ws, scaler, predictions=pred)
        std = evaluate(None, ws, None, predictions=pred)
        np.testing.assert_allclose(phys.model_pearson, std.model_pearson, atol=1e-12)
        np.testing.assert_allclose(phys.model_r2, std.model_r2, atol=1e-12)
        np.testing.assert_allclose(phys.persistence_pearson, std.persistence_pearson, atol=1e-12)

    def test_empty(self):
        ws, scaler = self.make()
        with pytest.raises(ValueError):
            evaluate(None, ws.take(slice(0, 0)), scaler, predictions=np.zeros((0, 3, 2)))

    def test_report_layout(self, tmp_path):
        ws, scaler = self.make()
        rep = evaluate(None, ws, scaler, predictions=ws.targets * 0.5)
        assert rep.header() == ["hrs", "AE_mnet", "AE_pers", "Dst_mnet", "Dst_pers"]
        lines = rep.format().splitlines()
        assert len(lines) == 4 and lines[1].startswith("1,")
        save_report(rep, tmp_path / "r")
        back = EvalReport.from_json(json.loads((tmp_path / "r.json").read_text()))
        assert back.targets == rep.targets and np.array_equal(back.model_r2, rep.model_r2)
        assert (tmp_path / "r.csv").read_text() == rep.format()

    def test_comparison(self):
        ws, scaler = self.make()
        a = evaluate(None, ws, scaler, predictions=ws.targets)
        header, rows = comparison_rows({"base": a, "sw": a})
        assert header == ["hrs", "AE_base", "AE_sw", "Dst_base", "Dst_sw"]
        assert len(rows) == 3 and rows[0][1] == pytest.approx(1.0)


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(SynthConfig(length=300, seed=4))
        b = generate_synthetic(SynthConfig(length=300, seed=4))
        assert a.equals(b)
        assert not a.equals(generate_synthetic(SynthConfig(length=300, seed=5)))

    def test_noiseless_linear_predictor(self):
        cfg = SynthConfig(length=500, noise_std=0.0, seed=6)
        t = generate_synthetic(cfg)
        d = len(cfg.input_columns)
        x = t.values[:, :d]
        y = t.values[:, d:]
        coef = coefficients_for(cfg)
        lagged = np.hstack([x[N_LAGS - lag:len(x) - lag] for lag in range(1, N_LAGS + 1)])
        pred = lagged @ coef.T
        for k in range(y.shape[1]):
            assert r_squared(pred[:, k], y[N_LAGS:, k]) == pytest.approx(1.0, abs=1e-12)

    def test_ar1_autocorrelation(self):
        cfg = SynthConfig(length=10_000, seed=7)
        t = generate_synthetic(cfg)
        for c in cfg.input_columns:
            v = t.column(c)
            assert abs(pearson(v[:-1], v[1:]) - 0.8) <= 0.05

    def test_signal_to_noise(self):
        t = generate_synthetic(SynthConfig(length=20_000, seed=8))
        # unit-variance signal plus noise 0.2: total variance about 1.04
        assert abs(np.var(t.column("Dst")) - 1.04) < 0.1

    def test_hourly_and_complete(self):
        t = generate_synthetic(SynthConfig(length=50))
        assert len(t) == 50 and np.all(np.diff(t.hours) == 1) and not t.missing.any()

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SynthConfig(noise_std=-1)
        with pytest.raises(ValueError):
            SynthConfig(lag_coefficients=np.zeros((2, 2)))

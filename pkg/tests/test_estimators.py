import io
import math

import numpy as np
import pytest

from mapdyn import phasespace as ps
from mapdyn.estimators import (
    EnsembleRecord,
    EnsembleSeries,
    ObservableSpec,
    initial_electronic_weight,
    population_estimate,
    reduce_ensemble,
    scattering_channels_from_records,
)


class TestPointEstimators:
    def test_pole_weight(self):
        gamma = 0.2
        x = np.array([math.sqrt(2 * (1 + 2 * gamma)), 0.0])
        s = ps.MappingState(x=x, p=np.zeros(2), gamma=gamma)
        assert initial_electronic_weight(s, 0) == pytest.approx(2 * (1 + gamma), abs=1e-14)

    def test_population_sums_to_one_on_sphere(self, rng):
        for F in (2, 3):
            s = ps.sample_constraint_sphere(F, 0.3, rng)
            total = sum(population_estimate(s, n) for n in range(F))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_mean_initial_weight_is_one(self, rng):
        F = 2
        gamma = ps.gamma_star(F)
        x, p = ps.sample_constraint_sphere_batch(F, gamma, rng, 500_000)
        w = F * (0.5 * (x[:, 1] ** 2 + p[:, 1] ** 2) - gamma)
        assert abs(np.mean(w) - 1.0) < 3 * np.std(w) / math.sqrt(w.size)

    def test_mean_initial_weight_weighted_scheme(self, rng):
        scheme = ps.SymmetricPairGamma(0.1, 2)
        total, var = 0.0, 0.0
        n = 400_000
        for branch in range(2):
            gamma, w = ps.draw_gamma(scheme, branch)
            x, p = ps.sample_constraint_sphere_batch(2, gamma, rng, n)
            vals = 2 * (0.5 * (x[:, 0] ** 2 + p[:, 0] ** 2) - gamma)
            total += w * np.mean(vals)
            var += (w * np.std(vals)) ** 2 / n
        assert abs(total - 1.0) < 3 * math.sqrt(var)

    def test_focused_pole(self):
        s = ps.MappingState(x=np.array([math.sqrt(2.0), 0.0]), p=np.zeros(2), gamma=0.0)
        assert population_estimate(s, 0) == pytest.approx(1.0)
        assert population_estimate(s, 1) == pytest.approx(0.0)


class TestReduce:
    def _records(self, n, times, value):
        return [
            EnsembleRecord(times=times, estimates=np.full((times.size, 1), value))
            for _ in range(n)
        ]

    def test_identical_records_zero_stderr(self):
        times = np.linspace(0, 1, 5)
        series = reduce_ensemble(self._records(10, times, 0.7), ObservableSpec("total_population"))
        assert np.all(series.values == pytest.approx(0.7))
        assert np.all(series.stderr == 0.0)

    def test_failed_excluded(self):
        times = np.linspace(0, 1, 3)
        recs = self._records(4, times, 1.0) + [
            EnsembleRecord(times=times, estimates=np.full((3, 1), 99.0), failed=True)
        ]
        series = reduce_ensemble(recs, ObservableSpec("total_population"))
        assert series.n_trajectories == 4
        assert series.n_failed == 1
        assert np.all(series.values == pytest.approx(1.0))

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            reduce_ensemble([], ObservableSpec("populations"))

    def test_weights_enter_mean(self):
        times = np.zeros(1) + np.arange(2.0)
        recs = [
            EnsembleRecord(times=times, estimates=np.full((2, 1), 1.0), weight=2.95),
            EnsembleRecord(times=times, estimates=np.full((2, 1), 1.0), weight=-1.95),
        ]
        series = reduce_ensemble(recs, ObservableSpec("total_population"))
        assert series.values[0, 0] == pytest.approx(0.5)

    def test_mismatched_grid_raises(self):
        r1 = EnsembleRecord(times=np.array([0.0, 1.0]), estimates=np.ones((2, 1)))
        r2 = EnsembleRecord(times=np.array([0.0, 2.0]), estimates=np.ones((2, 1)))
        with pytest.raises(ValueError):
            reduce_ensemble([r1, r2], ObservableSpec("total_population"))


class TestSeriesCsv:
    def test_round_trip(self, tmp_path):
        series = EnsembleSeries(
            times=np.array([0.0, 0.5, 1.0]),
            values=np.array([[1.0, 0.9, 0.8], [0.0, 0.1, 0.2]]),
            stderr=np.full((2, 3), 0.01),
            columns=["pop0", "pop1"],
            n_trajectories=100,
            n_failed=2,
            metadata={"model": "demo", "seed": 7},
        )
        path = tmp_path / "s.csv"
        series.to_csv(path)
        back = EnsembleSeries.from_csv(path)
        assert np.array_equal(back.times, series.times)
        assert np.array_equal(back.values, series.values)
        assert back.columns == series.columns
        assert back.n_trajectories == 100
        assert back.n_failed == 2
        assert back.metadata["model"] == "demo"

    def test_header_format(self):
        series = EnsembleSeries(
            times=np.array([0.0]),
            values=np.array([[1.0]]),
            stderr=np.array([[0.0]]),
            columns=["D_1_0"],
            metadata={"method": "wmm"},
        )
        buf = io.StringIO()
        series.to_csv(buf)
        text = buf.getvalue().splitlines()
        assert text[0].startswith("# ")
        assert text[3] == "t,D_1_0,D_1_0_err"

    def test_validation(self):
        with pytest.raises(ValueError):
            EnsembleSeries(
                times=np.array([0.0, 0.0]),
                values=np.zeros((1, 2)),
                stderr=np.zeros((1, 2)),
                columns=["a"],
            )
        with pytest.raises(ValueError):
            EnsembleSeries(
                times=np.array([0.0, 1.0]),
                values=np.zeros((1, 2)),
                stderr=-np.ones((1, 2)),
                columns=["a"],
            )


class TestChannels:
    def test_sums_and_split(self):
        finals = [
            (3.0, np.array([0.5, 0.5]), 1.0),
            (-2.0, np.array([1.0, 0.0]), 1.0),
            (4.0, np.array([0.0, 1.0]), 1.0),
        ]
        values, stderr, n = scattering_channels_from_records(finals, divide_R=0.0)
        assert n == 3
        assert values.sum() == pytest.approx(1.0)
        assert values[2] == pytest.approx(1.0 / 3.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            scattering_channels_from_records([], 0.0)


class TestObservableSpec:
    def test_columns(self):
        assert ObservableSpec("populations").column_names(3) == ["pop0", "pop1", "pop2"]
        assert ObservableSpec("population_difference", (1, 0)).column_names(2) == ["D_1_0"]
        assert ObservableSpec("scattering_channels").column_names(2) == ["T1", "T2", "R1", "R2"]

    def test_validation(self):
        with pytest.raises(ValueError):
            ObservableSpec("population_difference", (2,)).validate(2)
        with pytest.raises(ValueError):
            ObservableSpec("population_difference", (2, 0)).validate(2)
        with pytest.raises(ValueError):
            ObservableSpec("bogus").validate(2)

    def test_evaluate(self):
        pops = np.array([[0.7, 0.3], [0.2, 0.8]])
        diff = ObservableSpec("population_difference", (1, 0)).evaluate(pops)
        assert diff[:, 0] == pytest.approx([-0.4, 0.6])

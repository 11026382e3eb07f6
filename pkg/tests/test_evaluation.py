import io
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from importcast.errors import BacktestError, InfeasiblePlanError, UsageError
from importcast.evaluation import (BacktestReport, MetricPair, NaiveForecaster, backtest,
                                   compare, mse, plan_cutoffs, rmse)
from importcast.forecasters import LstmForecaster, ProphetForecaster
from importcast.lstm import LstmConfig
from importcast.prophet import ProphetConfig
from importcast.series import MonthStamp, TimeSeries


def ts(values):
    return TimeSeries(MonthStamp(2020, 1), values)


class TestMetrics:
    def test_perfect(self):
        assert mse([1, 2, 3], [1, 2, 3]) == 0.0
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_worked_example(self):
        assert mse([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3, abs=1e-12)
        assert rmse([1, 2, 3], [1, 2, 5]) == pytest.approx(2 / np.sqrt(3), abs=1e-12)

    @given(arrays(float, st.integers(1, 30), elements=st.floats(-1e3, 1e3)), st.floats(-50, 50))
    def test_constant_offset(self, a, d):
        assert mse(a + d, a) == pytest.approx(d * d, rel=1e-9, abs=1e-9)
        assert rmse(a + d, a) == pytest.approx(abs(d), rel=1e-9, abs=1e-6)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        p, a = rng.normal(size=50), rng.normal(size=50)
        perm = rng.permutation(50)
        assert mse(p[perm], a[perm]) == pytest.approx(mse(p, a), rel=1e-14)

    def test_usage_errors(self):
        with pytest.raises(UsageError):
            mse([1, 2], [1])
        with pytest.raises(UsageError):
            mse([], [])

    def test_pair_identity(self):
        m = MetricPair.of([0.0, 3.0], [1.0, 1.0])
        assert m.rmse ** 2 == pytest.approx(m.mse, abs=1e-12)


class TestPlanCutoffs:
    def test_single(self):
        assert plan_cutoffs(60, 1, 3) == [57]

    def test_even_spacing(self):
        cuts = plan_cutoffs(60, 5, 3, 24)
        assert len(cuts) == 5 and cuts[0] >= 24 and cuts[-1] == 57
        assert all(a < b for a, b in zip(cuts, cuts[1:]))
        # span 33 split into steps of 8.25, floored from the end
        assert cuts == [24, 33, 41, 49, 57]

    def test_infeasible_reports_max(self):
        with pytest.raises(InfeasiblePlanError) as err:
            plan_cutoffs(20, 10, 5, 12)
        assert err.value.max_feasible == 4

    def test_no_room(self):
        with pytest.raises(InfeasiblePlanError):
            plan_cutoffs(10, 1, 5, 8)

    @given(st.integers(5, 300), st.integers(1, 40), st.integers(1, 24), st.integers(1, 60))
    def test_properties(self, n, K, h, min_train):
        try:
            cuts = plan_cutoffs(n, K, h, min_train)
        except InfeasiblePlanError as exc:
            assert K > exc.max_feasible
            if exc.max_feasible:
                assert len(plan_cutoffs(n, exc.max_feasible, h, min_train)) == exc.max_feasible
            return
        assert len(cuts) == K
        assert cuts[-1] == n - h and cuts[0] >= min_train
        assert all(a < b for a, b in zip(cuts, cuts[1:]))


class TestBacktest:
    def test_naive_constant(self):
        r = backtest(ts(np.full(30, 4.2)), NaiveForecaster(), 3, 4)
        assert r.aggregate.rmse == 0.0

    def test_naive_hand_enumeration(self):
        r = backtest(ts(np.arange(1.0, 21.0)), NaiveForecaster(), 2, 2)
        assert r.pooled_squared_errors().tolist() == [1.0, 4.0, 1.0, 4.0]
        assert r.aggregate.mse == 2.5
        assert r.check_no_leakage()

    def test_model_sees_only_prefix(self):
        seen = []

        class Spy:
            name = "spy"

            def fit(self, history):
                seen.append(len(history))
                return history.values[-1]

            def forecast(self, state, horizon):
                return np.full(horizon, state)

        s = ts(np.arange(40.0))
        r = backtest(s, Spy(), 4, 3, 10)
        assert seen == r.cutoffs

    def test_fit_failure_names_cutoff(self):
        class Broken:
            name = "broken"

            def fit(self, history):
                if len(history) > 20:
                    raise RuntimeError("boom")
                return 0.0

            def forecast(self, state, horizon):
                return np.zeros(horizon)

        with pytest.raises(BacktestError) as err:
            backtest(ts(np.arange(40.0)), Broken(), 3, 2, 12)
        assert err.value.cutoff > 20 and "broken" in str(err.value)

    def test_aggregate_is_pooled_mean(self):
        rng = np.random.default_rng(1)
        r = backtest(ts(rng.normal(size=50)), NaiveForecaster(), 4, 5)
        per = np.mean([c.metrics.mse for c in r.per_cutoff])
        assert r.aggregate.mse == pytest.approx(per, rel=1e-12)
        assert r.aggregate.mse == pytest.approx(np.mean(r.pooled_squared_errors()), rel=1e-15)

    def test_executor_gives_same_report(self):
        s = ts(np.sin(np.arange(60.0)))
        seq = backtest(s, NaiveForecaster(), 5, 4)
        with ThreadPoolExecutor(4) as pool:
            par = backtest(s, NaiveForecaster(), 5, 4, executor=pool)
        assert seq.to_json() == par.to_json()

    def test_json_roundtrip(self):
        r = backtest(ts(np.arange(1.0, 21.0)), NaiveForecaster(), 2, 2)
        back = BacktestReport.from_dict(json.loads(r.to_json()))
        assert back.to_json() == r.to_json()

    def test_flat_csv(self):
        r = backtest(ts(np.arange(1.0, 21.0)), NaiveForecaster(), 2, 2)
        buf = io.StringIO()
        r.write_flat_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "cutoff,step,forecast,actual,sq_error"
        assert lines[1] == "12,1,12.0,13.0,1.0"
        assert len(lines) == 5


class TestAdapters:
    def test_prophet_adapter_scales_prefix_only(self, trend_seasonal):
        model = ProphetForecaster(ProphetConfig())
        state = model.fit(trend_seasonal.slice(0, 60))
        assert state.scaler.max == trend_seasonal.values[:60].max()
        fc = model.forecast(state, 6)
        assert fc.shape == (6,)
        assert np.sqrt(np.mean((fc - trend_seasonal.values[60:66]) ** 2)) < 100

    def test_logistic_capacity_in_kg(self):
        t = np.arange(48.0)
        y = 5000 / (1 + np.exp(-0.2 * (t - 20))) + 100
        model = ProphetForecaster(ProphetConfig(growth="logistic", capacity=5200.0, n_changepoints=2))
        fc = model.forecast(model.fit(ts(y)), 3)
        assert np.all(fc < 5300)

    def test_lstm_adapter(self, trend_seasonal):
        model = LstmForecaster(LstmConfig(epochs=3, hidden_dim=4, window_len=6, seed=0))
        state = model.fit(trend_seasonal.slice(0, 40))
        assert len(state.loss_history) == 3
        assert model.forecast(state, 4).shape == (4,)


class TestCompare:
    def _report(self, name, errors):
        s = ts(np.arange(1.0, 21.0))
        base = backtest(s, NaiveForecaster(), 2, 2)
        m = MetricPair(errors ** 2, errors)
        return BacktestReport(name, base.horizon, base.cutoffs, base.per_cutoff, m, base.n_points)

    def test_lowest_rmse_wins(self):
        summary = compare([self._report("a", 5.0), self._report("b", 3.0)])
        assert summary.winner == "b"
        assert [r.winner for r in summary.rows] == [False, True]

    def test_tie_by_name(self):
        summary = compare([self._report("zeta", 2.0), self._report("alpha", 2.0)])
        assert summary.winner == "alpha"

    def test_needs_two(self):
        with pytest.raises(UsageError):
            compare([self._report("a", 1.0)])

    def test_mismatched_cutoffs(self):
        s = ts(np.arange(40.0))
        with pytest.raises(UsageError):
            compare([backtest(s, NaiveForecaster(), 2, 2),
                     BacktestReport("x", 2, [10, 20], [], MetricPair(0, 0), 40)])

    def test_csv(self):
        buf = io.StringIO()
        compare([self._report("a", 2.0), self._report("b", 1.0)]).write_csv(buf)
        assert buf.getvalue() == "model,mse,rmse,winner_flag\na,4.0,2.0,0\nb,1.0,1.0,1\n"

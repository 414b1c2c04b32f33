import datetime

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mapvol.errors import DataError, EvaluationError
from mapvol.estimation import FitOptions
from mapvol.evaluation import (LossMatrix, losses, model_confidence_set,
                               oos_forecast_run, stationary_bootstrap_indices)
from mapvol.models import ModelKind, ParamSet, filter_panel
from mapvol.simulation import SimScenario, default_params, simulate_panel


def _loss_matrix(values, names=None, loss="MSE"):
    values = np.asarray(values, dtype=float)
    names = names or tuple(f"M{i}" for i in range(values.shape[1]))
    dates = tuple(datetime.date(2018, 1, 1) + datetime.timedelta(days=i)
                  for i in range(values.shape[0]))
    return LossMatrix(values=values, model_names=names, dates=dates,
                      loss_name=loss, split_index=0)


class TestLosses:
    def test_perfect_forecast(self):
        rv = np.array([1.0, 2.5, 7.0])
        assert_allclose(losses(rv, rv, "MSE"), 0.0)
        assert_allclose(losses(rv, rv, "QLike"), 0.0, atol=1e-15)

    def test_values(self):
        mse = losses(np.array([1.0]), np.array([2.0]), "MSE")
        qlike = losses(np.array([1.0]), np.array([2.0]), "QLike")
        assert mse[0] == pytest.approx(1.0)
        assert qlike[0] == pytest.approx(2.0 - np.log(2.0) - 1.0)

    def test_qlike_minimized_at_perfect_forecast(self):
        rv = np.array([3.0])
        grid = np.linspace(0.5, 10.0, 200)
        values = [losses(np.array([m]), rv, "QLike")[0] for m in grid]
        best = grid[int(np.argmin(values))]
        assert best == pytest.approx(3.0, abs=0.05)
        assert np.all(np.asarray(values) >= 0.0)

    def test_qlike_requires_positive_forecasts(self):
        with pytest.raises(EvaluationError):
            losses(np.array([-1.0]), np.array([1.0]), "QLike")


class TestOosForecastRun:
    def test_fixed_scheme_smoke(self):
        sim = simulate_panel(SimScenario(kind=ModelKind.MAP, T=900, seed=20))
        run = oos_forecast_run([ModelKind.AMEM, ModelKind.XMAP], sim.panel,
                               split=600, fit_options=FitOptions(starts=2),
                               min_eval_days=200)
        assert run.model_names == ("AMEM", "XMAP")
        assert run.forecasts.shape == (300, 2)
        for loss in ("MSE", "QLike"):
            lm = run.loss_matrices[loss]
            assert lm.n_days == 300
            assert np.all(np.isfinite(lm.values))

    def test_one_step_forecasts_use_information_through_t_minus_1(self):
        # the forecast column equals the filter mean over the evaluation days
        sim = simulate_panel(SimScenario(kind=ModelKind.AMEM, T=700, seed=21))
        run = oos_forecast_run([ModelKind.AMEM], sim.panel, split=450,
                               fit_options=FitOptions(starts=2), min_eval_days=200)
        res = run.results["AMEM"]
        from mapvol.panel import center_covariates
        centered = center_covariates(sim.panel, (0, 450))
        fo = filter_panel(ModelKind.AMEM, res.params, sim.panel, centered,
                          init_level=res.init_level)
        assert_allclose(run.forecasts[:, 0], fo.mu[450:700], rtol=0, atol=0)

    def test_min_eval_days_enforced(self):
        sim = simulate_panel(SimScenario(kind=ModelKind.AMEM, T=400, seed=22))
        with pytest.raises(DataError, match="evaluation window"):
            oos_forecast_run([ModelKind.AMEM], sim.panel, split=300,
                             fit_options=FitOptions(starts=1))

    def test_map_family_beats_amem_on_policy_data(self):
        # strong policy effects in the truth: MAP-kind columns dominate AMEM
        params = ParamSet(omega=1.06, alpha=0.15, beta=0.71, gamma=0.12,
                          delta=-3.0, phi=4.0, psi=0.2, theta=8.0)
        sim = simulate_panel(SimScenario(kind=ModelKind.MAP, params=params,
                                         T=2500, seed=23, x_sigma=0.004))
        run = oos_forecast_run([ModelKind.AMEM, ModelKind.MAP], sim.panel,
                               split=2000, fit_options=FitOptions(starts=2),
                               min_eval_days=400)
        means = run.loss_matrices["QLike"].mean_losses()
        assert means["MAP"] < means["AMEM"]


class TestStationaryBootstrap:
    def test_shape_and_range(self):
        rng = np.random.default_rng(0)
        idx = stationary_bootstrap_indices(100, 50, 10.0, rng)
        assert idx.shape == (50, 100)
        assert idx.min() >= 0 and idx.max() < 100

    def test_blocks_continue_circularly(self):
        rng = np.random.default_rng(1)
        idx = stationary_bootstrap_indices(50, 200, 25.0, rng)
        steps = (idx[:, 1:] - idx[:, :-1]) % 50
        # most transitions continue the block (step of 1)
        assert np.mean(steps == 1) > 0.9

    def test_mean_block_length(self):
        rng = np.random.default_rng(2)
        idx = stationary_bootstrap_indices(500, 400, 20.0, rng)
        continues = ((idx[:, 1:] - idx[:, :-1]) % 500) == 1
        # restart probability ~ 1/20 per step
        assert np.mean(~continues) == pytest.approx(0.05, abs=0.01)


class TestModelConfidenceSet:
    def test_identical_columns_full_survival(self):
        rng = np.random.default_rng(3)
        col = rng.uniform(0.5, 1.5, size=300)
        L = _loss_matrix(np.column_stack([col, col, col]))
        result = model_confidence_set(L, level=0.10, replications=500, seed=0)
        assert set(result.survivors) == {"M0", "M1", "M2"}
        assert all(p == 1.0 for p in result.pvalues.values())

    def test_shifted_column_eliminated(self):
        rng = np.random.default_rng(4)
        base = rng.standard_normal((500, 4)) + 5.0
        base[:, 2] += 1.0
        L = _loss_matrix(base)
        result = model_confidence_set(L, level=0.10, replications=2000, seed=1)
        assert "M2" not in result.survivors
        assert result.pvalues["M2"] < 0.01
        assert result.eliminated[0] == "M2"

    def test_nested_sets_by_level(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal((400, 5)) + 2.0
        values[:, 1] += 0.08
        values[:, 3] += 0.04
        L = _loss_matrix(values)
        r10 = model_confidence_set(L, level=0.10, replications=1000, seed=2)
        r25 = model_confidence_set(L, level=0.25, replications=1000, seed=2)
        assert set(r25.survivors) <= set(r10.survivors)

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(6)
        L = _loss_matrix(rng.standard_normal((300, 3)) + 1.5)
        a = model_confidence_set(L, replications=800, seed=9)
        b = model_confidence_set(L, replications=800, seed=9)
        assert a.pvalues == b.pvalues
        assert a.eliminated == b.eliminated

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        values = rng.standard_normal((400, 4)) + 3.0
        values[:, 0] += 0.5  # clearly worst
        L = _loss_matrix(values, names=("A", "B", "C", "D"))
        perm = [2, 0, 3, 1]
        Lp = _loss_matrix(values[:, perm], names=("C", "A", "D", "B"))
        a = model_confidence_set(L, replications=1000, seed=3)
        b = model_confidence_set(Lp, replications=1000, seed=3)
        assert a.eliminated[0] == b.eliminated[0] == "A"
        for name in "ABCD":
            assert a.pvalues[name] == pytest.approx(b.pvalues[name], abs=0.02)

    def test_needs_two_models(self):
        L = _loss_matrix(np.ones((200, 1)))
        with pytest.raises(EvaluationError):
            model_confidence_set(L)

    def test_needs_enough_days(self):
        L = _loss_matrix(np.ones((50, 2)))
        with pytest.raises(EvaluationError, match="days"):
            model_confidence_set(L)

    def test_pvalues_nondecreasing_in_elimination_order(self):
        rng = np.random.default_rng(8)
        values = rng.standard_normal((350, 5)) + 2.0 + 0.05 * np.arange(5)
        L = _loss_matrix(values)
        r = model_confidence_set(L, replications=1000, seed=4)
        ordered = list(r.eliminated) + [r.best]
        pvals = [r.pvalues[name] for name in ordered]
        assert all(a <= b for a, b in zip(pvals, pvals[1:]))


class TestLossConsistency:
    def test_qlike_ranking_matches_true_mean_ranking(self):
        # rank forecasters by empirical QLike vs by the noise-free loss of
        # their conditional-mean paths; agreement across replications
        agree = 0
        reps = 20
        for rep in range(reps):
            sim = simulate_panel(SimScenario(kind=ModelKind.AMEM, T=10_000,
                                             seed=100 + rep))
            true = default_params(ModelKind.AMEM)
            contenders = {
                "truth": true,
                "mild": ParamSet(omega=true.omega * 1.3, alpha=true.alpha * 0.8,
                                 beta=true.beta, gamma=true.gamma, theta=true.theta),
                "bad": ParamSet(omega=true.omega * 3.0, alpha=0.02,
                                beta=0.5, gamma=0.0, theta=true.theta),
            }
            emp = {}
            ideal = {}
            for name, p in contenders.items():
                fo = filter_panel(ModelKind.AMEM, p, sim.panel,
                                  init_level=sim.init_level)
                emp[name] = float(np.mean(losses(fo.mu[1:], sim.panel.rv[1:], "QLike")))
                ratio = sim.truth.mu[1:] / fo.mu[1:]
                ideal[name] = float(np.mean(ratio - np.log(ratio) - 1.0))
            if sorted(emp, key=emp.get) == sorted(ideal, key=ideal.get):
                agree += 1
        assert agree / reps >= 0.9

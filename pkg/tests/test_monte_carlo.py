import sys
import os
import math
import unittest

import numpy as np

# Добавляем родительский каталог в пути импорта
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from basis.cells import CellFunction
from basis.grid import ceil_admissible, grid_build, round_admissible
from estimators.functionals import density_point_estimate
from estimators.influence import EstimatorConfig, estimate_higher, estimate_order1, estimate_order2, estimator_projection
from estimators.oracle import bias_oracle, predicted_bias
from estimators.pipeline import estimate
from harness.runner import ExperimentConfig, run_experiment, summarize
from models.mar import TripletModel, draw_sample, first_order_bias, synthesize_model, truth
from models.preliminary import PreliminaryFit, make_preliminary
from projection.resolution import ResolutionProjection
from ustat.hoeffding import DiscreteMeasure, degenerate_part, hoeffding_variance, kernel_tensor
from ustat.naive import GenericKernel, ustat_naive
from utils.rng import stream

SE_FACTOR = 4.0


def high_propensity_model() -> TripletModel:
    """a = 1.25, b = 0.5, f = 1: дисперсия члена второго порядка пропорциональна k."""
    return TripletModel(1, CellFunction.constant(1, 1.25), CellFunction.constant(1, 0.5),
                        CellFunction.constant(1, 1.0))


def smooth_kernel(order):
    if order == 1:
        return GenericKernel(1, lambda x: np.cos(3.0 * x) + x ** 2)
    if order == 2:
        return GenericKernel(2, lambda x, y: np.cos(2.0 * x) + x * y ** 2)
    return GenericKernel(3, lambda x, y, z: x * y + z ** 2 * x + np.exp(y) * z)


def table_kernel(tensor):
    """Ядро на индексах точек носителя по готовой таблице значений."""
    return GenericKernel(tensor.ndim, lambda *ix: tensor[tuple(np.asarray(i, dtype=np.int64) for i in ix)])


def mean_and_se(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


class TestDegenerateVariance(unittest.TestCase):
    """Дисперсия U-статистик вырожденных ядер по моделированию."""

    @classmethod
    def setUpClass(cls):
        cls.measure = DiscreteMeasure(np.array([0.1, 0.4, 0.9]), np.array([0.2, 0.5, 0.3]))
        cls.indices = DiscreteMeasure(np.arange(3), cls.measure.probs)
        cls.kernels = {m: degenerate_part(smooth_kernel(m), cls.measure) for m in (1, 2, 3)}
        cls.tables = {m: kernel_tensor(k, cls.measure) for m, k in cls.kernels.items()}
        cls.n = 10
        cls.reps = 4000
        cls.draws = {m: [] for m in (1, 2, 3)}
        rng = stream(101, 1)
        for _ in range(cls.reps):
            idx = cls.indices.sample(cls.n, rng)
            for m, table in cls.tables.items():
                cls.draws[m].append(ustat_naive(table_kernel(table), idx))
        cls.draws = {m: np.array(v) for m, v in cls.draws.items()}

    def test_variance_matches_hoeffding(self):
        for m in (1, 2, 3):
            expected = hoeffding_variance(self.kernels[m], self.n, self.measure)
            second, se = mean_and_se(self.draws[m] ** 2)
            self.assertLessEqual(abs(second - expected), SE_FACTOR * se, msg=f"m={m}")

    def test_orthogonal_orders_uncorrelated(self):
        p = self.measure.probs
        exact = float(np.einsum("i,j,i,ij->", p, p, self.tables[1], self.tables[2]))
        self.assertAlmostEqual(exact, 0.0, places=12)
        for low, high in ((1, 2), (2, 3), (1, 3)):
            cross, se = mean_and_se(self.draws[low] * self.draws[high])
            self.assertLessEqual(abs(cross), SE_FACTOR * se, msg=f"порядки {low} и {high}")


class TestConditionalBias(unittest.TestCase):
    """Среднее ошибки при фиксированных предварительных оценках."""

    def test_first_order_bias(self):
        model = synthesize_model(6, 0.3, 0.3, math.inf, level=5)
        fit = make_preliminary("synthetic", model, 200, 0.3, 0.3, 0.3, seed=2)
        chi = truth(model)
        errors = [estimate_order1(draw_sample(model, 200, stream(102, r)), fit).value - chi for r in range(400)]
        mean, se = mean_and_se(errors)
        self.assertLessEqual(abs(mean - first_order_bias(fit, model)), SE_FACTOR * se)

    def test_third_order_bias(self):
        model = synthesize_model(6, 0.3, 0.3, math.inf, level=5)
        fit = make_preliminary("synthetic", model, 100, 0.3, 0.3, 0.3, seed=2)
        config = EstimatorConfig(order=3, k=16)
        projection = estimator_projection(config, fit)
        chi = truth(model)
        errors = [estimate_higher(draw_sample(model, 100, stream(103, r)), fit, config, projection=projection).value
                  - chi for r in range(300)]
        mean, se = mean_and_se(errors)
        self.assertLessEqual(abs(mean - predicted_bias(projection, model, fit, 3)), SE_FACTOR * se)

    def test_second_order_bias_with_true_density(self):
        # ĝ = g: смещение равно -∫ (I-Π)Δa (I-Π)Δb g
        model = synthesize_model(6, 0.3, 0.3, math.inf, level=5)
        synthetic = make_preliminary("synthetic", model, 100, 0.3, 0.3, 0.3, seed=2)
        fit = PreliminaryFit(synthetic.a_hat, synthetic.b_hat, model.g)
        projection = ResolutionProjection.of_size(model.g, 4)
        oracle = bias_oracle(fit, model, projection)
        self.assertAlmostEqual(oracle["second_order"], oracle["projection_remainder"], places=12)
        self.assertNotAlmostEqual(oracle["projection_remainder"], 0.0, places=6)
        chi = truth(model)
        errors = [estimate_order2(draw_sample(model, 100, stream(104, r)), fit, projection).value - chi
                  for r in range(400)]
        mean, se = mean_and_se(errors)
        self.assertLessEqual(abs(mean - oracle["projection_remainder"]), SE_FACTOR * se)

    def test_second_order_unbiased_in_span(self):
        model = synthesize_model(8, 0.5, 0.5, 1.0, level=3)
        synthetic = make_preliminary("synthetic", model, 30, 0.5, 0.5, 0.5, seed=1)
        fit = PreliminaryFit(synthetic.a_hat, synthetic.b_hat, model.g)
        projection = ResolutionProjection.of_size(model.g, 8)
        self.assertNotAlmostEqual(first_order_bias(fit, model), 0.0, places=6)
        chi = truth(model)
        errors = [estimate_order2(draw_sample(model, 60, stream(105, r)), fit, projection).value - chi
                  for r in range(400)]
        mean, se = mean_and_se(errors)
        self.assertLessEqual(abs(mean), SE_FACTOR * se)


class TestTermVariance(unittest.TestCase):
    """Рост дисперсии членов высших порядков с размерностью проекции."""

    @classmethod
    def setUpClass(cls):
        cls.model = high_propensity_model()
        cls.fit = PreliminaryFit.from_model(cls.model)

    def second_terms(self, n, sizes, reps, seed):
        projections = [ResolutionProjection.of_size(self.fit.g_hat, k) for k in sizes]
        terms = np.zeros((reps, len(sizes)))
        linear = np.zeros(reps)
        for r in range(reps):
            sample = draw_sample(self.model, n, stream(seed, r))
            for t, projection in enumerate(projections):
                report = estimate_order2(sample, self.fit, projection)
                terms[r, t] = report.term(2)
            linear[r] = report.linear
        return terms, linear

    def test_doubling_k_doubles_variance(self):
        terms, _ = self.second_terms(100, (256, 512), 1000, 106)
        ratio = np.var(terms[:, 1], ddof=1) / np.var(terms[:, 0], ddof=1)
        self.assertGreaterEqual(ratio, 1.6)
        self.assertLessEqual(ratio, 2.4)

    def test_second_term_dominates_only_for_large_k(self):
        n = 100
        small, large = ceil_admissible(n, 1), round_admissible(n * n, 1)
        self.assertEqual((small, large), (128, 8192))
        terms, linear = self.second_terms(n, (small, large), 300, 107)
        linear_var = np.var(linear, ddof=1)
        self.assertLess(np.var(terms[:, 0], ddof=1), linear_var)
        self.assertGreater(np.var(terms[:, 1], ddof=1), linear_var)

    def test_truncation_reduces_third_term_variance(self):
        n, k = 32, 1024
        grid = grid_build(n, k, 0.2, 0.2, 1, D=0)
        full = EstimatorConfig(order=3, k=k)
        cut = EstimatorConfig(order=3, k=k, truncated=True, grid=grid)
        projection = estimator_projection(full, self.fit)
        terms = np.zeros((150, 2))
        for r in range(terms.shape[0]):
            sample = draw_sample(self.model, n, stream(108, r))
            terms[r, 0] = estimate_higher(sample, self.fit, full, projection=projection).term(3)
            terms[r, 1] = estimate(sample, self.fit, cut).term(3)
        self.assertLessEqual(np.var(terms[:, 1], ddof=1), np.var(terms[:, 0], ddof=1))


class TestRootNRegime(unittest.TestCase):
    """Гладкий случай α = β = 0.6: RMSE убывает как n^{-1/2} при k ~ n."""

    def test_scaled_rmse_stable(self):
        model = synthesize_model(4, 0.6, 0.6, math.inf, level=6)
        chi = truth(model)
        scaled = []
        for n in (100, 400):
            fit = make_preliminary("synthetic", model, n, 0.6, 0.6, 0.6, seed=3)
            config = EstimatorConfig(order=2, k=ceil_admissible(n, 1))
            projection = estimator_projection(config, fit)
            errors = np.array([estimate_order2(draw_sample(model, n, stream(109, n, r)), fit, projection).value - chi
                               for r in range(200)])
            scaled.append(math.sqrt(np.mean(errors ** 2)) * math.sqrt(n))
        ratio = scaled[1] / scaled[0]
        self.assertGreaterEqual(ratio, 0.6)
        self.assertLessEqual(ratio, 1.7)


class TestFittedPreliminary(unittest.TestCase):
    """Оценка с предварительными оценками по независимой выборке."""

    def test_estimate_near_truth(self):
        model = synthesize_model(4, 0.6, 0.6, math.inf, level=6)
        n = 400
        fit = make_preliminary("fitted", model, n, 0.6, 0.6, 0.6, seed=stream(110, 0))
        self.assertEqual(fit.mode, "fitted")
        config = EstimatorConfig(order=2, k=ceil_admissible(n, 1))
        projection = estimator_projection(config, fit)
        chi = truth(model)
        errors = np.array([estimate_order2(draw_sample(model, n, stream(110, 1, r)), fit, projection).value - chi
                           for r in range(100)])
        mean, se = mean_and_se(errors)
        self.assertLessEqual(abs(mean - predicted_bias(projection, model, fit, 2)), SE_FACTOR * se)
        # одна оценка отстоит от истины не больше чем на три своих стандартных отклонения
        self.assertLessEqual(abs(mean), 3.0 * float(np.std(errors, ddof=1)))


class TestSampling(unittest.TestCase):
    """Частоты наблюдений в точной выборке."""

    def test_missingness_frequencies(self):
        model = synthesize_model(3, 0.6, 0.6, math.inf, level=4)
        n = 20000
        sample = draw_sample(model, n, stream(111, 1))
        observed = (model.propensity * model.f).integral()
        responded = (model.propensity * model.b * model.f).integral()
        for got, p in ((np.mean(sample.a), observed), (np.mean(sample.a * sample.y), responded)):
            se = math.sqrt(p * (1.0 - p) / n)
            self.assertLessEqual(abs(float(got) - p), SE_FACTOR * se)


class TestDensityPoint(unittest.TestCase):
    """Оценка плотности в точке для равномерного закона."""

    def test_uniform_mean_is_one(self):
        projection = ResolutionProjection.of_size(CellFunction.constant(1, 1.0), 16)
        values = [density_point_estimate(stream(112, r).uniform(size=(50, 1)), 0.3, projection) for r in range(500)]
        mean, se = mean_and_se(values)
        self.assertLessEqual(abs(mean - 1.0), SE_FACTOR * se)


class TestSummaryErrors(unittest.TestCase):
    """Стандартные ошибки сводки убывают как 1/√R."""

    def test_se_shrinks_with_doubled_replications(self):
        def se_bias(reps):
            config = ExperimentConfig.model_validate({
                "model": {"seed": 3, "alpha": 0.6, "beta": 0.6, "level": 5},
                "estimators": [{"order": 1}],
                "n_grid": [64],
                "replications": reps,
                "base_seed": 113,
            })
            return float(summarize(run_experiment(config, workers=1))["se_bias"].iloc[0])

        ratio = se_bias(400) / se_bias(800)
        self.assertGreaterEqual(ratio, 1.2)
        self.assertLessEqual(ratio, 1.7)


if __name__ == "__main__":
    unittest.main()

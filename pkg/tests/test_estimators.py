import sys
import os
import unittest
import dataclasses

import numpy as np

# Добавляем родительский каталог в пути импорта
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from estimators.influence import (
    EstimatorConfig, estimate_higher, estimate_order1, estimate_order2, estimator_projection,
)
from estimators.oracle import bias_oracle, chain_mean, predicted_bias
from estimators.pipeline import estimate, estimate_cross_fit
from estimators.report import EstimateReport
from models import mar
from models.mar import draw_sample, first_order_bias, synthesize_model, truth
from models.preliminary import PreliminaryFit, make_preliminary, score_functions, score_triple
from projection.resolution import ResolutionProjection
from ustat.chain import ChainKernel
from ustat.naive import GenericKernel, ustat_naive
from utils.errors import ConfigError, OrderError, ProjectionError
from utils.rng import stream


def exact_chain_mean(model, fit, projection, order):
    """Среднее члена порядка order по точному закону наблюдения (перебор носителя)."""
    measure = model.observation_measure()
    support, p = measure.support, measure.probs
    scores = score_triple(support, fit)
    K = projection.kernel_matrix(support.z, support.z)
    left = scores.a_tilde * p
    right = scores.y_tilde * p
    if order == 2:
        return -float(left @ K @ right)
    middle = np.diag(scores.a_bar * p)
    # Центрированная цепь: Ã Π (Ā Π - I) Ỹ
    return float(left @ K @ middle @ K @ right - left @ K @ right)


class TestLinearEstimator(unittest.TestCase):
    """Тесты для оценки первого порядка."""

    def setUp(self):
        self.model = synthesize_model(8, 0.5, 0.5, 1.0, level=3)
        self.fit = make_preliminary("synthetic", self.model, 30, 0.5, 0.5, 0.5, seed=1)

    def test_double_robustness(self):
        measure = self.model.observation_measure()
        support = measure.support
        for fit in (PreliminaryFit(self.model.a, self.fit.b_hat, self.fit.g_hat),
                    PreliminaryFit(self.fit.a_hat, self.model.b, self.fit.g_hat)):
            values = support.a * fit.a_hat(support.z) * (support.y - fit.b_hat(support.z)) + fit.b_hat(support.z)
            self.assertAlmostEqual(float(measure.probs @ values), truth(self.model), places=12)

    def test_expectation_equals_first_order_bias(self):
        measure = self.model.observation_measure()
        support = measure.support
        fit = self.fit
        values = support.a * fit.a_hat(support.z) * (support.y - fit.b_hat(support.z)) + fit.b_hat(support.z)
        self.assertAlmostEqual(float(measure.probs @ values) - truth(self.model),
                               first_order_bias(fit, self.model), places=12)

    def test_sample_mean(self):
        sample = draw_sample(self.model, 40, 3)
        report = estimate_order1(sample, self.fit)
        z = sample.z
        expected = np.mean(sample.a * self.fit.a_hat(z) * (sample.y - self.fit.b_hat(z)) + self.fit.b_hat(z))
        self.assertAlmostEqual(report.value, expected, places=14)
        self.assertEqual(report.order, 1)


class TestHigherOrder(unittest.TestCase):
    """Тесты для оценок второго и более высоких порядков."""

    @classmethod
    def setUpClass(cls):
        cls.model = synthesize_model(8, 0.5, 0.5, 1.0, level=3)
        cls.fit = make_preliminary("synthetic", cls.model, 30, 0.5, 0.5, 0.5, seed=1)
        cls.sample = draw_sample(cls.model, 12, stream(8, 1))
        cls.projection = ResolutionProjection.of_size(cls.fit.g_hat, 4)

    def test_order2_matches_enumeration(self):
        report = estimate_order2(self.sample, self.fit, self.projection)
        proj = self.projection

        def kernel(x1, x2):
            s1, s2 = score_triple(x1, self.fit), score_triple(x2, self.fit)
            return s1.a_tilde * proj.kernel_eval(x1.z, x2.z) * s2.y_tilde

        u = ustat_naive(GenericKernel(2, kernel), self.sample)
        self.assertAlmostEqual(report.term(2), -u, places=12)
        self.assertAlmostEqual(report.value, report.linear - u, places=12)

    def test_term_means_match_exact_expectation(self):
        for order in (2, 3):
            expected = exact_chain_mean(self.model, self.fit, self.projection, order)
            got = chain_mean(self.projection, self.model, self.fit, order)
            self.assertAlmostEqual(got, expected, places=12)

    def test_known_gram_removes_second_order_bias_in_span(self):
        # Ошибки â и b̂ лежат в образе проекции: смещение второго порядка равно нулю
        projection = ResolutionProjection.of_size(mar.projection_weight(1.0, 1.0, self.model.g), 8)
        oracle = bias_oracle(self.fit, self.model, projection)
        self.assertAlmostEqual(oracle["second_order"], 0.0, places=12)
        self.assertAlmostEqual(oracle["projection_remainder"], 0.0, places=12)
        self.assertNotAlmostEqual(oracle["first_order"], 0.0, places=6)

    def test_engines_agree(self):
        for order in (2, 3, 4):
            cells = estimate(self.sample, self.fit, EstimatorConfig(order=order, k=4, engine="cells"))
            dense = estimate(self.sample, self.fit, EstimatorConfig(order=order, k=4, engine="dense"))
            self.assertAlmostEqual(cells.value, dense.value, places=9)

    def test_lower_order_is_truncation(self):
        full = estimate_higher(self.sample, self.fit, EstimatorConfig(order=4, k=4))
        third = estimate_higher(self.sample, self.fit, EstimatorConfig(order=3, k=4))
        self.assertAlmostEqual(full.truncate(3).value, third.value, places=12)
        self.assertEqual(set(full.terms), {2, 3, 4})

    def test_zero_dimension_reduces_to_linear(self):
        report = estimate(self.sample, self.fit, EstimatorConfig(order=2, k=0))
        self.assertEqual(report.term(2), 0.0)
        self.assertAlmostEqual(report.value, estimate_order1(self.sample, self.fit).value)

    def test_diagnostics_with_model(self):
        config = EstimatorConfig(order=3, k=4, gram="known")
        report = estimate(self.sample, self.fit, config, self.model)
        self.assertAlmostEqual(report.diagnostics["truth"], truth(self.model))
        projection = estimator_projection(config, self.fit, self.model)
        self.assertAlmostEqual(report.diagnostics["predicted_bias"],
                               predicted_bias(projection, self.model, self.fit, 3), places=12)
        with self.assertRaises(ConfigError):
            estimate(self.sample, self.fit, config)

    def test_weight_mismatch(self):
        projection = ResolutionProjection.of_size(self.model.g, 4)
        with self.assertRaises(ProjectionError):
            estimate_order2(self.sample, self.fit, projection)

    def test_large_dimension_warning(self):
        small = self.sample[np.arange(3)]
        projection = ResolutionProjection.of_size(self.fit.g_hat, 16)
        with self.assertLogs("estimators.influence", level="WARNING"):
            estimate_order2(small, self.fit, projection)

    def test_weighted_variant(self):
        abar = self.model.a
        config = EstimatorConfig(order=2, k=4, abar=abar, bbar=1.0)
        report = estimate(self.sample, self.fit, config)
        projection = ResolutionProjection.of_size(self.fit.g_hat * abar, 4)
        chain = ChainKernel(2, projection, score_functions(self.fit, abar, 1.0))
        self.assertAlmostEqual(report.term(2), ustat_naive(chain.as_generic(), self.sample), places=12)


class TestConfig(unittest.TestCase):
    """Тесты для параметров оценщика и отчета."""

    def test_validation(self):
        with self.assertRaises(OrderError):
            EstimatorConfig(order=5)
        with self.assertRaises(ConfigError):
            EstimatorConfig(order=2, truncated=True)
        with self.assertRaises(ConfigError):
            EstimatorConfig(order=3, k=8, truncated=True)
        with self.assertRaises(ConfigError):
            EstimatorConfig(order=2, gram="approximate")
        with self.assertRaises(ConfigError):
            EstimatorConfig(order=2, engine="gpu")

    def test_config_is_frozen_dataclass(self):
        config = EstimatorConfig(order=2, k=16, name="m2")
        self.assertTrue(dataclasses.is_dataclass(config))
        with self.assertRaises(dataclasses.FrozenInstanceError):
            config.k = 32
        # имя не участвует в сравнении
        self.assertEqual(config, dataclasses.replace(config, name="other"))
        with self.assertRaises(OrderError):
            dataclasses.replace(config, order=0)

    def test_report(self):
        report = EstimateReport(1.0, {3: 0.25, 2: 0.5})
        self.assertEqual(report.value, 1.75)
        self.assertEqual(report.order, 3)
        self.assertEqual(report.term(4), 0.0)
        self.assertEqual(report.to_dict()["value"], 1.75)


class TestCrossFit(unittest.TestCase):
    """Тесты для оценки с обменом половин выборки."""

    def test_average_of_halves(self):
        model = synthesize_model(8, 0.5, 0.5, 1.0, level=3)
        sample = draw_sample(model, 40, 5)

        def builder(half):
            return make_preliminary("fitted", model, len(half), 0.5, 0.5, 0.5, sample=half)

        config = EstimatorConfig(order=2, k=16)
        report = estimate_cross_fit(sample, config, builder, model)
        first, second = sample[np.arange(20)], sample[np.arange(20, 40)]
        h0 = estimate(second, builder(first), config).value
        h1 = estimate(first, builder(second), config).value
        self.assertAlmostEqual(report.diagnostics["half_0"], h0, places=12)
        self.assertAlmostEqual(report.value, (h0 + h1) / 2.0, places=12)
        self.assertTrue(report.config["cross_fit"])


if __name__ == "__main__":
    unittest.main()

import sys
import os
import shutil
import tempfile
import unittest

import numpy as np

# Добавляем родительский каталог в пути импорта
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from basis.cells import CellFunction
from models import io, mar
from models.mar import (
    HolderFunction, Sample, TripletModel, affine_clamp, a_bounds, b_bounds, constant_model, draw_sample,
    first_order_bias, g_bounds, synthesize_model, truth,
)
from models.preliminary import (
    PreliminaryFit, lemma_residuals, make_preliminary, score_triple, tilde_project,
)
from projection.resolution import ResolutionProjection
from utils.errors import ConfigError, DomainError, ProjectionError
from utils.rng import stream


class TestSample(unittest.TestCase):
    """Тесты для выборки наблюдений."""

    def test_validation(self):
        with self.assertRaises(DomainError):
            Sample(np.array([0.1, 0.2]), np.array([0, 1]), np.array([1, 1]))
        with self.assertRaises(DomainError):
            Sample(np.array([0.1, 0.2]), np.array([0, 2]), np.array([0, 0]))
        with self.assertRaises(DomainError):
            Sample(np.array([0.1, 0.2]), np.array([0, 1, 1]), np.array([0, 0, 0]))

    def test_indexing_and_split(self):
        sample = Sample(np.linspace(0.05, 0.95, 7), np.ones(7), np.zeros(7))
        self.assertEqual(len(sample[3]), 1)
        self.assertEqual(sample.observation(2).a, 1)
        first, second = sample.split(stream(1, 2))
        self.assertEqual((len(first), len(second)), (4, 3))
        merged = np.sort(np.concatenate([first.z[:, 0], second.z[:, 0]]))
        np.testing.assert_allclose(merged, sample.z[:, 0])

    def test_frame_columns(self):
        sample = Sample(np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([1, 0]), np.array([1, 0]))
        frame = sample.to_frame()
        self.assertEqual(list(frame.columns), ["z1", "z2", "a", "y"])
        self.assertEqual(Sample.from_frame(frame).d, 2)


class TestTripletModel(unittest.TestCase):
    """Тесты для истинной модели и ее синтеза."""

    def test_synthesized_model_respects_bands(self):
        for d in (1, 2):
            model = synthesize_model(5, 0.4, 0.8, 1.5, d=d, level=4 if d == 1 else 3)
            self.assertAlmostEqual(model.f.integral(), 1.0, places=12)
            lo, hi = a_bounds(model.eta)
            self.assertTrue(lo - 1e-12 <= model.a.min() and model.a.max() <= hi + 1e-12)
            lo, hi = b_bounds(model.eta)
            self.assertTrue(lo - 1e-12 <= model.b.min() and model.b.max() <= hi + 1e-12)
            lo, hi = g_bounds(model.eta)
            self.assertTrue(lo <= model.g.min() and model.g.max() <= hi)

    def test_synthesis_is_deterministic(self):
        first = synthesize_model(9, 0.5, 0.5, 1.0, level=5)
        second = synthesize_model(9, 0.5, 0.5, 1.0, level=5)
        other = synthesize_model(10, 0.5, 0.5, 1.0, level=5)
        self.assertTrue(first.a.allclose(second.a, atol=0.0))
        self.assertFalse(first.a.allclose(other.a))

    def test_eta_range(self):
        with self.assertRaises(DomainError):
            synthesize_model(1, 0.5, 0.5, 1.0, eta=0.45)
        with self.assertRaises(DomainError):
            TripletModel(1, CellFunction.constant(1, 20.0), CellFunction.constant(1, 0.5),
                         CellFunction.constant(1, 1.0))

    def test_unnormalized_density_rejected(self):
        with self.assertRaises(DomainError):
            TripletModel(1, CellFunction.constant(1, 2.0), CellFunction.constant(1, 0.5),
                         CellFunction.constant(1, 1.5))

    def test_holder_function_decay(self):
        h = HolderFunction(1.0, 1, 6, seed=3)
        self.assertEqual(h.coefs[0], 0.0)
        self.assertAlmostEqual(abs(h.coefs[1]), 1.0)
        self.assertAlmostEqual(abs(h.coefs[-1]), 2.0 ** (-5 * 1.5))
        self.assertEqual(HolderFunction(float("inf"), 1, 6, seed=3).function().sup_norm(), 0.0)
        self.assertAlmostEqual(h.function().integral(), 0.0, places=14)

    def test_affine_clamp(self):
        shape = CellFunction(1, 1, [-4.0, 4.0])
        out, scale = affine_clamp(shape, 0.2, 0.8)
        self.assertAlmostEqual(scale, 0.8 * 0.3 / 4.0)
        self.assertAlmostEqual(out.min(), 0.5 - 0.24)
        flat, _ = affine_clamp(CellFunction.constant(1, 0.0), 0.2, 0.8)
        self.assertEqual(flat.max(), 0.5)
        with self.assertRaises(DomainError):
            affine_clamp(CellFunction(1, 1, [-1e6, 1e6]), 0.2, 0.8)

    def test_truth_and_measure(self):
        model = synthesize_model(4, 0.6, 0.6, 1.0, level=3)
        measure = model.observation_measure()
        support = measure.support
        weighted = float(np.sum(measure.probs * support.y * model.a(support.z)))
        self.assertAlmostEqual(weighted, truth(model), places=12)
        self.assertAlmostEqual(truth(constant_model()), 0.5)

    def test_draw_sample_reproducible(self):
        model = synthesize_model(4, 0.6, 0.6, 1.0, d=2, level=3)
        first = draw_sample(model, 50, 17)
        second = draw_sample(model, 50, 17)
        np.testing.assert_array_equal(first.z, second.z)
        np.testing.assert_array_equal(first.y, second.y)
        self.assertTrue(np.all((first.z >= 0.0) & (first.z < 1.0)))
        self.assertTrue(np.all(first.y <= first.a))


class TestPreliminary(unittest.TestCase):
    """Тесты для предварительных оценок и тильда-параметров."""

    @classmethod
    def setUpClass(cls):
        cls.model = synthesize_model(6, 0.5, 0.5, float("inf"), level=5)

    def test_zero_constants_reproduce_model(self):
        fit = make_preliminary("synthetic", self.model, 100, 0.5, 0.5, 0.5, constants=(0.0, 0.0, 0.0))
        self.assertTrue(fit.a_hat.allclose(self.model.a))
        self.assertTrue(fit.b_hat.allclose(self.model.b))
        self.assertEqual(first_order_bias(fit, self.model), 0.0)

    def test_synthetic_errors_shrink_with_n(self):
        small = make_preliminary("synthetic", self.model, 10, 0.5, 0.5, 0.5, seed=1)
        large = make_preliminary("synthetic", self.model, 10000, 0.5, 0.5, 0.5, seed=1)
        err = lambda fit: (fit.a_hat - self.model.a).norm()
        self.assertLess(err(large), err(small))
        self.assertAlmostEqual(large.meta["rates"]["a"], 10000 ** -0.25)

    def test_aligned_direction(self):
        fit = make_preliminary("synthetic", self.model, 100, 0.5, 0.5, 0.5, direction="aligned", seed=2)
        da = (fit.a_hat - self.model.a).values
        db = (fit.b_hat - self.model.b).values
        self.assertGreater(float(np.dot(da, db)), 0.0)
        with self.assertRaises(DomainError):
            make_preliminary("synthetic", self.model, 100, 0.5, 0.5, 0.5, direction="sideways")

    def test_fitted_estimates_in_bands(self):
        fit = make_preliminary("fitted", self.model, 400, 0.5, 0.5, 0.5, seed=stream(1, 2, 3))
        self.assertEqual(fit.mode, "fitted")
        lo, hi = a_bounds(self.model.eta)
        self.assertTrue(lo - 1e-12 <= fit.a_hat.min() and fit.a_hat.max() <= hi + 1e-12)
        lo, hi = g_bounds(self.model.eta)
        self.assertTrue(lo - 1e-12 <= fit.g_hat.min() and fit.g_hat.max() <= hi + 1e-12)

    def test_fitted_requires_observed_responses(self):
        sample = Sample(np.array([0.1, 0.5, 0.7]), np.zeros(3), np.zeros(3))
        with self.assertRaises(DomainError):
            make_preliminary("fitted", self.model, 3, 0.5, 0.5, 0.5, sample=sample)

    def test_scores(self):
        fit = PreliminaryFit.from_model(constant_model())
        sample = Sample(np.array([0.2, 0.6]), np.array([0, 1]), np.array([0, 1]))
        scores = score_triple(sample, fit, abar=1.0, bbar=2.0)
        np.testing.assert_allclose(scores.y_tilde, [0.0, 0.5])
        np.testing.assert_allclose(scores.a_tilde, [-2.0, 2.0])
        np.testing.assert_allclose(scores.a_bar, [0.0, 2.0])

    def test_tilde_identities(self):
        fit = make_preliminary("synthetic", self.model, 50, 0.5, 0.5, 0.5, seed=3)
        projection = ResolutionProjection.of_size(mar.projection_weight(1.0, 1.0, self.model.g), 8)
        residuals = lemma_residuals(fit, self.model, projection)
        for name, value in residuals.items():
            self.assertLessEqual(value, 1e-9, name)

    def test_tilde_requires_true_weight(self):
        fit = make_preliminary("synthetic", self.model, 50, 0.5, 0.5, 0.5, seed=3)
        projection = ResolutionProjection.of_size(fit.g_hat, 8)
        with self.assertRaises(ProjectionError):
            tilde_project(fit, self.model, projection)


class TestModelIO(unittest.TestCase):
    """Тесты для файлов выборки, модели и предварительных оценок."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_files_round_trip(self):
        model = synthesize_model(4, 0.6, 0.6, 1.0, level=3)
        fit = make_preliminary("synthetic", model, 40, 0.6, 0.6, 0.6, seed=1)
        sample = draw_sample(model, 30, 2)
        io.write_sample(sample, os.path.join(self.tmp, "s.csv"))
        io.save_model(model, os.path.join(self.tmp, "m.json"), seed=4)
        io.save_fit(fit, os.path.join(self.tmp, "f.json"))
        back = io.read_sample(os.path.join(self.tmp, "s.csv"))
        np.testing.assert_array_equal(back.z, sample.z)
        self.assertAlmostEqual(truth(io.load_model(os.path.join(self.tmp, "m.json"))), truth(model), places=14)
        self.assertTrue(io.load_fit(os.path.join(self.tmp, "f.json")).g_hat.allclose(fit.g_hat, atol=0.0))

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            io.load_model(os.path.join(self.tmp, "missing.json"))
        with self.assertRaises(ConfigError):
            io.model_from_json('{"schema_version": 99, "d": 1}')


if __name__ == "__main__":
    unittest.main()

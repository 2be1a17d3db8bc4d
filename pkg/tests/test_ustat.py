import sys
import os
import unittest
from itertools import permutations

import numpy as np

# Добавляем родительский каталог в пути импорта
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from basis.cells import CellFunction
from basis.haar import Basis
from models.mar import draw_sample, synthesize_model
from models.preliminary import make_preliminary, score_functions
from projection.kernels import DenseKernel
from projection.resolution import ResolutionProjection
from projection.weighted import WeightedProjection
from ustat.chain import ChainKernel, distinct_chain_sum, intersect, ustat_chain
from ustat.naive import GenericKernel, ustat_naive
from ustat.partitions import falling_factorial, mobius, set_partitions
from utils.errors import DomainError, OrderError
from utils.rng import stream


class TestPartitions(unittest.TestCase):
    """Тесты для разбиений и коэффициентов Мёбиуса."""

    def test_bell_numbers(self):
        self.assertEqual([len(set_partitions(q)) for q in range(6)], [1, 1, 2, 5, 15, 52])

    def test_mobius_coefficients(self):
        self.assertEqual(mobius(((0,), (1,), (2,))), 1)
        self.assertEqual(mobius(((0, 1), (2,))), -1)
        self.assertEqual(mobius(((0, 1, 2),)), 2)
        self.assertEqual(mobius(((0, 1, 2, 3),)), -6)

    def test_falling_factorial(self):
        self.assertEqual(falling_factorial(5, 3), 60)
        self.assertEqual(falling_factorial(5, 0), 1)


class TestDistinctSums(unittest.TestCase):
    """Тесты сумм цепей по различным индексам."""

    def setUp(self):
        self.rng = stream(5, 1)

    def brute(self, weights, matrices):
        n, q = weights[0].size, len(weights)
        total = 0.0
        for idx in permutations(range(n), q):
            term = np.prod([weights[t][idx[t]] for t in range(q)])
            for t, M in enumerate(matrices):
                term *= M[idx[t], idx[t + 1]]
            total += term
        return total

    def test_distinct_chain_sum_matches_enumeration(self):
        n = 7
        for q in (2, 3, 4):
            weights = [self.rng.normal(size=n) for _ in range(q)]
            matrices = [self.rng.normal(size=(n, n)) for _ in range(q - 1)]
            fast = distinct_chain_sum(weights, [DenseKernel(M) for M in matrices])
            self.assertAlmostEqual(fast, self.brute(weights, matrices), places=8)

    def test_intersect(self):
        self.assertEqual(intersect((0, 8), (4, 16), (2, 8)), (4, 8))


class TestChainStatistics(unittest.TestCase):
    """Тесты быстрого вычисления U-статистик цепных ядер."""

    @classmethod
    def setUpClass(cls):
        cls.model = synthesize_model(3, 0.6, 0.6, float("inf"), d=1, level=4)
        cls.fit = make_preliminary("synthetic", cls.model, 64, 0.6, 0.6, 0.6, seed=4)
        cls.sample = draw_sample(cls.model, 9, stream(3, 9))
        weight = cls.fit.g_hat
        cls.projections = {
            "cells": ResolutionProjection.of_size(weight, 4),
            "dense": WeightedProjection.prefix(Basis(1, 2), 4, weight),
        }
        cls.scores = score_functions(cls.fit)

    def test_fast_path_matches_enumeration(self):
        for name, proj in self.projections.items():
            for order in (2, 3, 4):
                for blocks in (None, ((2, 4),) + ((0, 1),) * (order - 2)):
                    with self.subTest(engine=name, order=order, blocks=blocks):
                        chain = ChainKernel(order, proj, self.scores, blocks)
                        fast = ustat_chain(chain, self.sample)
                        slow = ustat_naive(chain.as_generic(), self.sample)
                        self.assertLessEqual(abs(fast - slow), 1e-10 * max(1.0, abs(slow)))

    def test_uncentered_chain(self):
        proj = self.projections["cells"]
        chain = ChainKernel(3, proj, self.scores, centered=False)
        self.assertEqual(len(chain.expansion()), 1)
        fast = ustat_chain(chain, self.sample)
        slow = ustat_naive(chain.as_generic(), self.sample)
        self.assertAlmostEqual(fast, slow, places=10)

    def test_matrix_and_collapsed_forms_agree(self):
        proj = self.projections["dense"]
        chain = ChainKernel(4, proj, self.scores, ((0, 4), (1, 4), (0, 2)))
        idx = [np.array([0, 1]), np.array([2, 3]), np.array([4, 5]), np.array([6, 7])]
        xs = [self.sample[i] for i in idx]
        np.testing.assert_allclose(chain.evaluate(*xs), chain.evaluate_collapsed(*xs), atol=1e-10)

    def test_expansion_terms(self):
        proj = self.projections["cells"]
        chain = ChainKernel(4, proj, self.scores, ((0, 4), (0, 2), (1, 4)))
        terms = {positions: (coef, edges) for coef, positions, edges in chain.expansion()}
        self.assertEqual(set(terms), {(0, 1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 3)})
        self.assertEqual(terms[(0, 1, 2, 3)][0], -1.0)
        self.assertEqual(terms[(0, 2, 3)][0], 1.0)
        self.assertEqual(terms[(0, 3)], (-1.0, ((1, 2),)))

    def test_disjoint_blocks_drop_terms(self):
        proj = self.projections["cells"]
        chain = ChainKernel(3, proj, self.scores, ((0, 1), (2, 4)))
        self.assertEqual([positions for _, positions, _ in chain.expansion()], [(0, 1, 2)])

    def test_order_limits(self):
        proj = self.projections["cells"]
        with self.assertRaises(OrderError):
            ChainKernel(1, proj, self.scores)
        with self.assertRaises(DomainError):
            ChainKernel(3, proj, self.scores, ((0, 4),))
        with self.assertRaises(DomainError):
            ustat_chain(ChainKernel(4, proj, self.scores), self.sample[np.arange(3)])


class TestNaive(unittest.TestCase):
    """Тесты перебора кортежей."""

    def test_mean_over_ordered_tuples(self):
        x = np.array([1.0, 2.0, 4.0])
        kernel = GenericKernel(2, lambda a, b: a * b)
        # (2 + 4 + 8) * 2 / 6
        self.assertAlmostEqual(ustat_naive(kernel, x), 14.0 / 3.0)

    def test_limits(self):
        kernel = GenericKernel(2, lambda a, b: a * b)
        with self.assertRaises(DomainError):
            ustat_naive(kernel, np.array([1.0]))
        with self.assertRaises(OrderError):
            ustat_naive(kernel, np.arange(100, dtype=float))
        with self.assertRaises(OrderError):
            kernel(np.ones(2))

    def test_constant_kernel_broadcasts(self):
        kernel = GenericKernel(2, lambda a, b: 3.0)
        self.assertEqual(kernel(np.ones(4), np.ones(4)).shape, (4,))


if __name__ == "__main__":
    unittest.main()

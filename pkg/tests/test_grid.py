import sys
import os
import unittest

# Добавляем родительский каталог в пути импорта
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from basis.grid import ceil_admissible, default_D, default_k, grid_build, hyperbola_pairs, round_admissible
from utils.errors import DomainError


class TestDyadicGrid(unittest.TestCase):
    """Тесты для выбора k, D и сеток блоков."""

    def test_round_admissible(self):
        self.assertEqual(round_admissible(40, 1), 32)
        self.assertEqual(round_admissible(100, 1), 128)
        self.assertEqual(round_admissible(100, 2), 64)
        self.assertEqual(round_admissible(0.5, 1), 1)

    def test_default_k(self):
        # n^{2/(2α+2β+1)} = 1024^{2/3} ≈ 101.6 -> 128
        self.assertEqual(default_k(1024, 0.25, 0.25, 1), 128)

    def test_default_D_is_nonnegative(self):
        self.assertEqual(default_D(1000, 2.0, 2.0, 1), 0)
        self.assertGreaterEqual(default_D(1000, 0.2, 0.2, 1), 0)
        with self.assertRaises(DomainError):
            default_D(1, 0.2, 0.2)

    def test_hyperbola_pairs(self):
        pairs = hyperbola_pairs(2, 2, 2)
        self.assertEqual(sorted(pairs), [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)])
        self.assertEqual(len(hyperbola_pairs(3, 3, 6)), 16)

    def test_geometric_grid(self):
        grid = grid_build(64, 1024, 1.0, 1.0, 1, D=3)
        self.assertEqual(grid.k_grid, (64, 128, 256, 512, 1024))
        self.assertEqual(grid.l_grid, grid.k_grid)
        self.assertEqual(grid.R, 4)
        self.assertEqual(grid.k_block(0), (0, 64))
        self.assertEqual(grid.k_block(2), (128, 256))
        self.assertEqual(grid.k_at(-1), 1)
        self.assertEqual(grid.l_at(10), 1024)

    def test_slower_grid_for_smaller_smoothness(self):
        grid = grid_build(64, 1024, 0.5, 1.0, 1, D=3)
        self.assertEqual(grid.k_grid, (64, 256, 1024))
        self.assertGreater(grid.S, grid.R)
        self.assertEqual(grid.l_grid[-1], 1024)

    def test_large_smoothness_has_no_empty_blocks(self):
        grid = grid_build(64, 1024, 50.0, 50.0, 1, D=3)
        self.assertEqual(grid.k_grid, (64, 128, 256, 512, 1024))
        self.assertEqual((grid.R, grid.S), (4, 4))
        for sizes in (grid.k_grid, grid.l_grid):
            self.assertTrue(all(lo < hi for lo, hi in zip(sizes, sizes[1:])))

    def test_k_below_n_rejected(self):
        with self.assertRaises(DomainError):
            grid_build(512, 256, 0.5, 0.5)

    def test_inadmissible_k_rounded(self):
        with self.assertLogs("basis.grid", level="WARNING"):
            grid = grid_build(16, 200, 1.0, 1.0, 1)
        self.assertEqual(grid.k, 256)

    def test_inadmissible_k_equal_to_n_rounded_up(self):
        # k = n = 180 округляется вверх до 256, а не вниз до 128
        with self.assertLogs("basis.grid", level="WARNING"):
            grid = grid_build(180, 180, 1.0, 1.0, 1)
        self.assertEqual(grid.k, 256)
        with self.assertRaises(DomainError):
            grid_build(180, 150, 1.0, 1.0, 1)

    def test_default_k_not_below_n(self):
        self.assertEqual(ceil_admissible(180, 1), 256)
        self.assertEqual(ceil_admissible(256, 1), 256)
        self.assertEqual(ceil_admissible(100, 2), 256)
        self.assertEqual(grid_build(180, alpha=2.0, beta=2.0).k, 256)

    def test_default_cutoff(self):
        grid = grid_build(64, 256, 0.3, 0.3, 1, default_cutoff=True)
        self.assertEqual(grid.D, default_D(64, 0.3, 0.3, 1))
        self.assertIsNone(grid_build(64, 256, 0.3, 0.3, 1).D)
        with self.assertRaises(DomainError):
            grid_build(64, 256, 0.3, 0.3, 1).pairs()

    def test_infinite_smoothness_rejected(self):
        with self.assertRaises(DomainError):
            grid_build(64, 256, float("inf"), 0.3)


if __name__ == "__main__":
    unittest.main()

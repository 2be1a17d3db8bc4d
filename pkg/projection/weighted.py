import logging
from typing import Callable, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from basis.cells import CellFunction, as_points
from basis.haar import Basis, block_indices
from basis.quadrature import QuadratureRule
from config import WEIGHT_FLOOR
from projection.kernels import FeatureKernel
from utils.errors import DomainError, ProjectionError

logger = logging.getLogger(__name__)


def check_weight(weight: CellFunction) -> None:
    """Вес должен быть конечным и отделенным от нуля."""
    if not np.all(np.isfinite(weight.values)):
        raise ProjectionError("Вес проекции содержит нечисловые значения")
    if weight.min() <= WEIGHT_FLOOR:
        raise ProjectionError(f"Вес проекции не отделен от нуля: min w = {weight.min():.3g}")


class WeightedProjection:
    """
    Ортогональная проекция в L2(w) на линейную оболочку базисных функций.

    Ядро Π(z1, z2) = e(z1)^T C^{-1} e(z2), C_ij = ∫ e_i e_j w dν. Разложение
    Холецкого C = L L^T задает признаки ẽ = L^{-1} e, ортонормированные в L2(w)
    методом Грама-Шмидта в порядке индексов; ядро блока (lo, hi] префикса равно
    сумме ẽ_i(z1) ẽ_i(z2) по i из (lo, hi].
    """

    def __init__(self, basis: Basis, indices, weight: CellFunction, rule: QuadratureRule = None):
        if weight.d != basis.d:
            raise DomainError(f"Размерность веса {weight.d} не совпадает с размерностью базиса {basis.d}")
        check_weight(weight)
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        if indices.size and (indices.min() < 1 or indices.max() > basis.K_max):
            raise DomainError(f"Индексы вне диапазона 1..{basis.K_max}")
        level = max(basis.I_max, weight.level)
        if rule is None:
            rule = QuadratureRule(basis.d, level)
        elif rule.level < level:
            raise DomainError(f"Квадратура уровня {rule.level} не точна для уровня {level}")
        self.basis = basis
        self.indices = indices
        self.weight = weight
        self.rule = rule
        self.size = int(indices.size)
        self.is_prefix = bool(np.array_equal(indices, np.arange(1, self.size + 1)))

        self._eq = basis.columns(rule.points, indices)
        self._wq = weight(rule.points) * rule.volumes
        self.gram = self._eq.T @ (self._wq[:, None] * self._eq)
        self.factor = None
        if self.size:
            try:
                self.factor = cholesky(self.gram, lower=True)
            except LinAlgError as e:
                raise ProjectionError(f"Матрица Грама вырождена: {str(e)}")
            if np.min(np.diag(self.factor)) <= np.sqrt(WEIGHT_FLOOR):
                raise ProjectionError("Матрица Грама численно вырождена")
        self._features_q = self._orthonormal(self._eq)

    @classmethod
    def prefix(cls, basis: Basis, k: int, weight: CellFunction, rule: QuadratureRule = None):
        indices = block_indices(basis, 0, k) if k else np.zeros(0, dtype=np.int64)
        return cls(basis, indices, weight, rule)

    @property
    def resolution(self) -> int:
        """Уровень, на котором ядро и вес кусочно-постоянны."""
        return self.rule.level

    def __repr__(self):
        return f"WeightedProjection(size={self.size}, d={self.basis.d}, I_max={self.basis.I_max})"

    def _orthonormal(self, E: np.ndarray) -> np.ndarray:
        if not self.size:
            return np.zeros((E.shape[0], 0))
        return solve_triangular(self.factor, E.T, lower=True).T

    def _range(self, lo: int, hi: int) -> Tuple[int, int]:
        hi = self.size if hi is None else hi
        if not 0 <= lo <= hi <= self.size:
            raise DomainError(f"Блок ({lo}, {hi}] вне диапазона (0, {self.size}]")
        if (lo, hi) != (0, self.size) and not self.is_prefix:
            raise DomainError("Блоки определены только для проекций на префикс")
        return lo, hi

    def features(self, z, lo: int = 0, hi: int = None) -> np.ndarray:
        """Ортонормированные в L2(w) признаки блока (lo, hi], форма (n, hi - lo)."""
        lo, hi = self._range(lo, hi)
        E = self.basis.columns(as_points(z, self.basis.d), self.indices)
        return self._orthonormal(E)[:, lo:hi]

    def kernel_eval(self, z1, z2, lo: int = 0, hi: int = None) -> np.ndarray:
        """
        Значения ядра Π(z1, z2) для пар точек.

        Args:
            z1: Точки (одна точка или массив той же длины, что z2)
            z2: Точки

        Returns:
            Массив значений e(z1)^T C^{-1} e(z2)
        """
        f1 = self.features(z1, lo, hi)
        f2 = self.features(z2, lo, hi)
        return np.sum(f1 * f2, axis=1)

    def kernel_matrix(self, z1, z2, lo: int = 0, hi: int = None) -> np.ndarray:
        return self.features(z1, lo, hi) @ self.features(z2, lo, hi).T

    def project(self, f: Union[CellFunction, Callable]) -> Tuple[np.ndarray, CellFunction]:
        """
        Взвешенная проекция функции.

        Returns:
            Коэффициенты γ = C^{-1} (∫ f e_i w dν)_i и функция Πf на ячейках квадратуры
        """
        if not self.size:
            return np.zeros(0), CellFunction.constant(self.basis.d, 0.0, self.rule.level)
        fq = np.asarray(f(self.rule.points), dtype=float)
        rhs = self._eq.T @ (fq * self._wq)
        gamma = cho_solve((self.factor, True), rhs)
        return gamma, CellFunction(self.basis.d, self.rule.level, self._eq @ gamma)

    def apply_kernel(self, h: CellFunction, lo: int = 0, hi: int = None) -> CellFunction:
        """Интегральный оператор h -> ∫ Π(·, x) h(x) dν(x) для блока (lo, hi]."""
        lo, hi = self._range(lo, hi)
        if h.level > self.rule.level:
            raise DomainError(f"Уровень функции {h.level} выше уровня квадратуры {self.rule.level}")
        phi = self._features_q[:, lo:hi]
        coef = phi.T @ (h(self.rule.points) * self.rule.volumes)
        return CellFunction(self.basis.d, self.rule.level, phi @ coef)

    def sample_kernel(self, z, lo: int = 0, hi: int = None) -> FeatureKernel:
        return FeatureKernel(self.features(z, lo, hi))

    def second_moment(self, density: CellFunction) -> float:
        """∫∫ Π(x1, x2)^2 p(x1) p(x2) dν dν."""
        phi = self._features_q
        M = phi.T @ ((density(self.rule.points) * self.rule.volumes)[:, None] * phi)
        return float(np.sum(M * M))


def build_projection(basis: Basis, indices, w: CellFunction, rule: QuadratureRule = None) -> WeightedProjection:
    """
    Построение взвешенной проекции.

    Args:
        basis: Базис Хаара
        indices: Индексы базисных функций (с единицы)
        w: Вес, отделенный от нуля
        rule: Квадратура (по умолчанию уровня max(I_max, уровень веса))

    Returns:
        WeightedProjection
    """
    return WeightedProjection(basis, indices, w, rule)

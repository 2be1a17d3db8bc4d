"""
Контрольные функционалы: плотность в точке и ∫ p^2 через ядро невзвешенной проекции.
"""
import logging
from typing import NamedTuple

import numpy as np

from basis.cells import CellFunction, as_points
from utils.errors import DomainError, ProjectionError

logger = logging.getLogger(__name__)


def _check_unweighted(projection) -> None:
    w = projection.weight.values
    if not np.allclose(w, 1.0, rtol=0.0, atol=1e-12):
        raise ProjectionError("Оценки плотности требуют невзвешенной проекции (w = 1)")


def _points(sample, d: int) -> np.ndarray:
    return as_points(getattr(sample, "z", sample), d)


def density_point_estimate(sample, point, projection, p_hat: CellFunction = None) -> float:
    """
    Проекционная оценка плотности в точке: P_n Π(point, ·) + ((I - Π) p̂)(point).

    Args:
        sample: Выборка или массив точек
        point: Точка из [0, 1)^d
        projection: Невзвешенная проекция
        p_hat: Предварительная оценка плотности (None - только первый член)
    """
    _check_unweighted(projection)
    d = projection.weight.d
    z = _points(sample, d)
    if z.shape[0] == 0:
        raise DomainError("Пустая выборка")
    x = as_points(point, d)
    value = float(np.mean(projection.kernel_matrix(x, z)[0]))
    if p_hat is not None:
        value += float(p_hat(x)[0] - projection.apply_kernel(p_hat)(x)[0])
    return value


def quadratic_estimate(sample, projection) -> float:
    """
    U_n Π = sum_{i != j} Π(Z_i, Z_j) / (n (n - 1)) - оценка ∫ p^2 при p̂ из образа Π.
    """
    _check_unweighted(projection)
    z = _points(sample, projection.weight.d)
    n = z.shape[0]
    if n < 2:
        raise DomainError(f"Нужно не меньше двух наблюдений, получено {n}")
    K = projection.sample_kernel(z)
    total = float(np.sum(K.matvec(np.ones(n))) - np.sum(K.diag()))
    return total / (n * (n - 1))


class QuadraticVariance(NamedTuple):
    """Дисперсия U_n Π: линейная часть, вырожденная часть и сумма."""
    linear: float
    degenerate: float
    total: float


def quadratic_variance(projection, density: CellFunction, n: int) -> QuadraticVariance:
    """
    Точная дисперсия U_n Π по разложению Хёфдинга.

    U_n Π = θ + (2/n) sum_i h_1(X_i) + U_n h_2, где h_1 = Πp - θ,
    h_2(x1, x2) = Π(x1, x2) - Πp(x1) - Πp(x2) + θ, θ = ∫ (Πp) p.
    Var = 4 Var h_1 / n + P^2 h_2^2 / C(n, 2).
    """
    if n < 2:
        raise DomainError(f"Нужно не меньше двух наблюдений, получено {n}")
    _check_unweighted(projection)
    pp = projection.apply_kernel(density)
    theta = (pp * density).integral()
    var_h1 = (pp * pp * density).integral() - theta ** 2
    second = projection.second_moment(density)
    var_h2 = second - theta ** 2 - 2.0 * var_h1
    linear = 4.0 * var_h1 / n
    degenerate = var_h2 * 2.0 / (n * (n - 1))
    return QuadraticVariance(linear, degenerate, linear + degenerate)

"""
Вырожденная часть ядра, дисперсия вырожденных U-статистик и разложение Хёфдинга.

Все ожидания берутся по дискретной мере наблюдений. Для модели пропусков
такая мера точна: ковариата заменяется серединами ячеек, а (A, YA) при данном Z
принимает три значения.
"""
import logging
from dataclasses import dataclass
from itertools import combinations, permutations, product
from math import comb
from typing import List, Tuple

import numpy as np

from config import DEGENERACY_TOL, DEGENERATE_MAX_ORDER, HOEFFDING_MAX_SPACE
from ustat.naive import GenericKernel
from utils.errors import DegeneracyError, DomainError, OrderError

MASS_TOL = 1e-9

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """
    Конечная мера: точки носителя и их массы.

    support - массив или выборка с индексацией массивом индексов.
    """
    support: object
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if probs.size != len(self.support):
            raise DomainError(f"Число масс {probs.size} не совпадает с размером носителя {len(self.support)}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("Массы меры должны быть конечными и неотрицательными")
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def mass(self) -> float:
        return float(self.probs.sum())

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=n, p=self.probs / self.mass)
        return self.support[idx]


def as_measure(model_or_measure, rule=None) -> DiscreteMeasure:
    """Вероятностная мера модели или сама мера; суммарная масса должна быть равна 1."""
    if isinstance(model_or_measure, DiscreteMeasure):
        measure = model_or_measure
    elif hasattr(model_or_measure, "observation_measure"):
        measure = model_or_measure.observation_measure(rule)
    else:
        raise DomainError(f"Ожидалась модель или дискретная мера, получено {type(model_or_measure).__name__}")
    if abs(measure.mass - 1.0) > MASS_TOL:
        raise DomainError(f"Массы меры в сумме дают {measure.mass:.12g}, а не 1")
    return measure


def _subset_sign(m: int, size: int) -> int:
    return (-1) ** (m - size)


def _partial_mean(kernel: GenericKernel, xs, kept: Tuple[int, ...], measure: DiscreteMeasure) -> np.ndarray:
    """Интеграл ядра по позициям вне kept при фиксированных остальных аргументах."""
    m = kernel.order
    batch = len(xs[0])
    free = [t for t in range(m) if t not in kept]
    if not free:
        return kernel(*xs)
    combos = np.array(list(product(range(measure.size), repeat=len(free))), dtype=np.int64)
    weights = np.prod(measure.probs[combos], axis=1)
    rows_n = batch if kept else 1
    rows = np.repeat(np.arange(rows_n), combos.shape[0])
    cols = np.tile(np.arange(combos.shape[0]), rows_n)
    args = []
    for t in range(m):
        if t in kept:
            args.append(xs[t][rows])
        else:
            args.append(measure.support[combos[cols, free.index(t)]])
    values = kernel(*args).reshape(rows_n, combos.shape[0]) @ weights
    return values if kept else np.full(batch, values[0])


def degenerate_part(kernel: GenericKernel, model, rule=None) -> GenericKernel:
    """
    Вырожденная часть ядра:
        D f(x_1..x_m) = sum_{A ⊆ {1..m}} (-1)^{m-|A|} ∫ f dP(x_i, i ∉ A).

    Args:
        kernel: Ядро порядка m <= 3
        model: Модель (с методом observation_measure) или дискретная мера
        rule: Квадратура для перехода от модели к мере

    Returns:
        Ядро того же порядка с нулевыми условными средними
    """
    measure = as_measure(model, rule)
    m = kernel.order
    if m > DEGENERATE_MAX_ORDER:
        raise OrderError(f"Вырожденная часть поддерживается до порядка {DEGENERATE_MAX_ORDER}, получено {m}")

    def fn(*xs):
        out = np.zeros(len(xs[0]))
        for size in range(m + 1):
            for kept in combinations(range(m), size):
                out = out + _subset_sign(m, size) * _partial_mean(kernel, xs, kept, measure)
        if not np.all(np.isfinite(out)):
            raise DomainError("Ядро приняло нечисловое значение")
        return out

    return GenericKernel(m, fn, kernel.symmetric, name=f"D({kernel.name})")


def kernel_tensor(kernel: GenericKernel, measure: DiscreteMeasure) -> np.ndarray:
    """Значения ядра на всех кортежах точек носителя, форма (N,)*m."""
    m, N = kernel.order, measure.size
    combos = np.array(list(product(range(N), repeat=m)), dtype=np.int64)
    values = kernel(*[measure.support[combos[:, t]] for t in range(m)])
    if not np.all(np.isfinite(values)):
        raise DomainError("Ядро приняло нечисловое значение")
    return np.asarray(values, dtype=float).reshape((N,) * m)


def _contract(tensor: np.ndarray, probs: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * tensor.ndim
    shape[axis] = probs.size
    return (tensor * probs.reshape(shape)).sum(axis=axis, keepdims=True)


def conditional_means(tensor: np.ndarray, probs: np.ndarray) -> float:
    """Наибольшее по модулю условное среднее по одной позиции при фиксированных остальных."""
    worst = 0.0
    for axis in range(tensor.ndim):
        worst = max(worst, float(np.abs(_contract(tensor, probs, axis)).max()))
    return worst


def _symmetrize(tensor: np.ndarray) -> np.ndarray:
    perms = list(permutations(range(tensor.ndim)))
    return sum(np.transpose(tensor, p) for p in perms) / len(perms)


def hoeffding_variance(kernel: GenericKernel, n: int, model, rule=None, tol: float = DEGENERACY_TOL) -> float:
    """
    Дисперсия U-статистики вырожденного ядра: P^m f^2 / C(n, m).

    Несимметричное ядро предварительно симметризуется: U-статистика по
    упорядоченным кортежам у них совпадает.

    Args:
        kernel: Вырожденное ядро
        n: Объем выборки
        model: Модель или дискретная мера
        rule: Квадратура для перехода от модели к мере
        tol: Допуск проверки вырожденности

    Returns:
        Дисперсия
    """
    measure = as_measure(model, rule)
    m = kernel.order
    if n < m:
        raise DomainError(f"Объем выборки {n} меньше порядка {m}")
    tensor = _symmetrize(kernel_tensor(kernel, measure))
    worst = conditional_means(tensor, measure.probs)
    if worst > tol:
        raise DegeneracyError(f"Ядро не вырождено: условное среднее {worst:.3g} > {tol:.1g}")
    second = tensor ** 2
    for axis in reversed(range(m)):
        second = _contract(second, measure.probs, axis)
    return float(second.reshape(-1)[0]) / comb(n, m)


@dataclass(frozen=True, eq=False)
class HoeffdingComponent:
    """Компонента разложения: функция аргументов с номерами positions."""
    positions: Tuple[int, ...]
    table: np.ndarray

    @property
    def order(self) -> int:
        return len(self.positions)

    def expand(self, m: int) -> np.ndarray:
        """Компонента как функция всех m аргументов, форма (N,)*m с единичными осями."""
        N = self.table.shape[0] if self.table.ndim else 1
        shape = [N if t in self.positions else 1 for t in range(m)]
        return self.table.reshape(shape)


def hoeffding_decompose(kernel: GenericKernel, measure: DiscreteMeasure, tol: float = 1e-12) -> List[HoeffdingComponent]:
    """
    Разложение Хёфдинга ядра на конечном пространстве.

    Компонента набора A: f_A = sum_{B ⊆ A} (-1)^{|A|-|B|} E[f | X_B].
    Компоненты в сумме дают f, компоненты разных наборов ортогональны.

    Returns:
        Ненулевые компоненты, упорядоченные по порядку и позициям
    """
    measure = as_measure(measure)
    m, N = kernel.order, measure.size
    if N > HOEFFDING_MAX_SPACE:
        raise DomainError(f"Пространство из {N} точек больше допустимого {HOEFFDING_MAX_SPACE}")
    if m > DEGENERATE_MAX_ORDER:
        raise OrderError(f"Разложение поддерживается до порядка {DEGENERATE_MAX_ORDER}, получено {m}")
    tensor = kernel_tensor(kernel, measure)
    scale = max(1.0, float(np.abs(tensor).max()))

    def conditional(kept: Tuple[int, ...]) -> np.ndarray:
        out = tensor
        for axis in range(m):
            if axis not in kept:
                out = _contract(out, measure.probs, axis)
        return out

    components = []
    for size in range(m + 1):
        for A in combinations(range(m), size):
            full = np.zeros([N if t in A else 1 for t in range(m)])
            for bsize in range(size + 1):
                for B in combinations(A, bsize):
                    full = full + _subset_sign(size, bsize) * conditional(B)
            if np.abs(full).max() <= tol * scale:
                continue
            components.append(HoeffdingComponent(A, full.reshape([N] * size) if size else full.reshape(())))
    return components

import logging
import operator
from dataclasses import dataclass
from typing import Callable

import numpy as np

from utils.errors import DomainError

logger = logging.getLogger(__name__)


def as_points(z, d: int) -> np.ndarray:
    """
    Приведение точек к массиву формы (n, d).

    Args:
        z: Одна точка, массив точек или массив координат при d=1
        d: Размерность пространства

    Returns:
        Массив формы (n, d)
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z.reshape(-1, 1) if d == 1 else z.reshape(1, -1)
    if z.ndim != 2 or z.shape[1] != d:
        raise DomainError(f"Ожидались точки размерности {d}, получен массив формы {z.shape}")
    return z


def cell_ids(z, level: int, d: int = None) -> np.ndarray:
    """
    Номера двоичных ячеек уровня level, содержащих точки.

    Ячейки полуоткрыты, нумерация построчная: (c1, c2) -> c1 * 2^level + c2.

    Args:
        z: Точки из [0, 1)^d
        level: Уровень разбиения
        d: Размерность (по умолчанию определяется по форме z)

    Returns:
        Целочисленный массив номеров ячеек
    """
    if d is None:
        arr = np.asarray(z, dtype=float)
        d = arr.shape[1] if arr.ndim == 2 else 1
    z = as_points(z, d)
    if not np.all(np.isfinite(z)) or np.any(z < 0.0) or np.any(z >= 1.0):
        raise DomainError("Точки должны лежать в единичном кубе [0, 1)^d")
    side = 1 << level
    c = np.floor(z * side).astype(np.int64)
    flat = c[:, 0]
    for t in range(1, d):
        flat = flat * side + c[:, t]
    return flat


def midpoints(d: int, level: int) -> np.ndarray:
    """Середины ячеек уровня level в построчном порядке, форма (2^{level d}, d)."""
    side = 1 << level
    centers = (np.arange(side) + 0.5) / side
    grids = np.meshgrid(*([centers] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


@dataclass(frozen=True, eq=False)
class CellFunction:
    """
    Кусочно-постоянная функция на двоичных ячейках одного уровня.

    Значения хранятся в построчном порядке ячеек. Арифметика между функциями
    разных уровней выполняется на более мелком уровне.
    """
    d: int
    level: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != 1 << (self.level * self.d):
            raise DomainError(
                f"Ожидалось {1 << (self.level * self.d)} значений на уровне {self.level}, получено {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, d: int, value: float, level: int = 0) -> "CellFunction":
        return cls(d, level, np.full(1 << (level * d), float(value)))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], d: int, level: int) -> "CellFunction":
        """Функция по значениям fn в серединах ячеек."""
        return cls(d, level, np.asarray(fn(midpoints(d, level)), dtype=float))

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.level * self.d)

    def __call__(self, z) -> np.ndarray:
        return self.values[cell_ids(z, self.level, self.d)]

    def grid(self) -> np.ndarray:
        return self.values.reshape((self.side,) * self.d)

    def refine(self, level: int) -> "CellFunction":
        """Та же функция, записанная на более мелком уровне."""
        if level < self.level:
            raise DomainError(f"Нельзя уточнить уровень {self.level} до {level}")
        if level == self.level:
            return self
        grid = self.grid()
        factor = 1 << (level - self.level)
        for axis in range(self.d):
            grid = np.repeat(grid, factor, axis=axis)
        return CellFunction(self.d, level, grid.reshape(-1))

    def cell_integrals(self, level: int) -> np.ndarray:
        """Интегралы функции по ячейкам уровня level."""
        if level >= self.level:
            return self.refine(level).values * 2.0 ** (-level * self.d)
        factor = 1 << (self.level - level)
        side = 1 << level
        shape = []
        for _ in range(self.d):
            shape.extend([side, factor])
        blocks = self.grid().reshape(shape)
        sums = blocks.sum(axis=tuple(range(1, 2 * self.d, 2)))
        return sums.reshape(-1) * self.volume

    def coarsen(self, level: int) -> "CellFunction":
        """Средние значения по ячейкам более крупного уровня."""
        return CellFunction(self.d, level, self.cell_integrals(level) * 2.0 ** (level * self.d))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.volume)

    def norm(self, weight: "CellFunction" = None) -> float:
        """Норма в L2(weight)."""
        sq = self * self
        if weight is not None:
            sq = sq * weight
        return float(np.sqrt(max(sq.integral(), 0.0)))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "CellFunction":
        return CellFunction(self.d, self.level, fn(self.values))

    def allclose(self, other: "CellFunction", atol: float = 1e-12) -> bool:
        a, b = _common(self, other)
        return bool(np.allclose(a.values, b.values, rtol=0.0, atol=atol))

    def _binary(self, other, op) -> "CellFunction":
        if isinstance(other, CellFunction):
            a, b = _common(self, other)
            return CellFunction(self.d, a.level, op(a.values, b.values))
        return CellFunction(self.d, self.level, op(self.values, float(other)))

    def _rbinary(self, other, op) -> "CellFunction":
        return CellFunction(self.d, self.level, op(float(other), self.values))

    def __add__(self, other):
        return self._binary(other, operator.add)

    def __radd__(self, other):
        return self._rbinary(other, operator.add)

    def __sub__(self, other):
        return self._binary(other, operator.sub)

    def __rsub__(self, other):
        return self._rbinary(other, operator.sub)

    def __mul__(self, other):
        return self._binary(other, operator.mul)

    def __rmul__(self, other):
        return self._rbinary(other, operator.mul)

    def __truediv__(self, other):
        return self._binary(other, operator.truediv)

    def __rtruediv__(self, other):
        return self._rbinary(other, operator.truediv)

    def __neg__(self):
        return CellFunction(self.d, self.level, -self.values)


def _common(a: CellFunction, b: CellFunction):
    if a.d != b.d:
        raise DomainError(f"Функции разной размерности: {a.d} и {b.d}")
    level = max(a.level, b.level)
    return a.refine(level), b.refine(level)

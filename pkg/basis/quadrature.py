import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from basis.cells import CellFunction, midpoints
from utils.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Правило середин на двоичных ячейках уровня level.

    Точно интегрирует любую функцию, постоянную на ячейках уровня не выше level.
    """
    d: int
    level: int
    points: np.ndarray = field(init=False, repr=False)
    volumes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DomainError(f"Поддерживаются размерности 1 и 2, получено d={self.d}")
        if self.level < 0:
            raise DomainError(f"Уровень квадратуры должен быть неотрицательным: {self.level}")
        pts = midpoints(self.d, self.level)
        vols = np.full(pts.shape[0], 2.0 ** (-self.level * self.d))
        pts.setflags(write=False)
        vols.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "volumes", vols)

    @property
    def size(self) -> int:
        return self.points.shape[0]


Integrand = Union[CellFunction, Callable[[np.ndarray], np.ndarray]]


def integrate(f: Integrand, rule: QuadratureRule) -> float:
    """
    Интеграл функции по правилу середин.

    Args:
        f: Кусочно-постоянная функция или функция от массива точек (N, d)
        rule: Квадратурное правило

    Returns:
        Сумма f(середина) * объем
    """
    if isinstance(f, CellFunction) and f.level > rule.level:
        raise DomainError(f"Уровень функции {f.level} выше уровня квадратуры {rule.level}")
    values = np.asarray(f(rule.points), dtype=float)
    if values.shape != (rule.size,):
        values = np.broadcast_to(values, (rule.size,))
    if not np.all(np.isfinite(values)):
        raise DomainError("Подынтегральная функция приняла нечисловое значение")
    return float(np.sum(values * rule.volumes))

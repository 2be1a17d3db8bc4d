import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from basis.haar import is_admissible
from utils.errors import DomainError

logger = logging.getLogger(__name__)


def round_admissible(x: float, d: int) -> int:
    """Ближайший (в логарифмической шкале) допустимый размер префикса 2^{id}."""
    if x <= 1:
        return 1
    i = max(0, int(round(math.log2(x) / d)))
    return 1 << (i * d)


def ceil_admissible(x: float, d: int) -> int:
    """Наименьший допустимый размер префикса 2^{id}, не меньший x."""
    if x <= 1:
        return 1
    i = max(0, int(math.ceil(math.log2(x) / d - 1e-12)))
    return 1 << (i * d)


def default_k(n: int, alpha: float, beta: float, d: int = 1) -> int:
    """Размерность проекции k ~ n^{2d/(2α+2β+d)}, округленная до допустимого размера."""
    _check_smoothness(alpha, beta)
    return round_admissible(n ** (2.0 * d / (2.0 * alpha + 2.0 * beta + d)), d)


def default_D(n: int, alpha: float, beta: float, d: int = 1) -> int:
    """
    Порог отсечения D из условия 2^{max(1/α,1/β) D} ~ n^{(d-2α-2β)/(d+2α+2β)} / log n.

    Отрицательное решение заменяется нулем.
    """
    _check_smoothness(alpha, beta)
    if n < 2:
        raise DomainError(f"Объем выборки для выбора D должен быть не меньше 2: {n}")
    rhs = n ** ((d - 2.0 * alpha - 2.0 * beta) / (d + 2.0 * alpha + 2.0 * beta)) / math.log(n)
    D = math.log2(rhs) / max(1.0 / alpha, 1.0 / beta)
    return max(0, int(round(D)))


def hyperbola_pairs(R: int, S: int, D: int) -> List[Tuple[int, int]]:
    """Пары блоков (r, s), сохраняемые под гиперболой: r = 0, s = 0 или r + s <= D."""
    return [(r, s) for r in range(R + 1) for s in range(S + 1) if r == 0 or s == 0 or r + s <= D]


def _check_smoothness(alpha: float, beta: float) -> None:
    for name, value in (("alpha", alpha), ("beta", beta)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"Гладкость {name} должна быть положительной и конечной: {value}")


def _geometric_grid(n: int, k: int, smoothness: float, d: int) -> Tuple[int, ...]:
    sizes = [min(round_admissible(n, d), k)]
    r = 1
    while sizes[-1] < k:
        candidate = min(round_admissible(n * 2.0 ** (r / smoothness), d), k)
        # совпадающие соседние размеры дали бы пустые блоки
        if candidate > sizes[-1]:
            sizes.append(candidate)
        r += 1
    return tuple(sizes)


@dataclass(frozen=True)
class DyadicGrid:
    """
    Сетки k_0 <= ... <= k_R = k и l_0 <= ... <= l_S = k для усеченного оценщика.

    Соглашение k_{-1} = l_{-1} = 1 хранится в k_at/l_at; нижний конец блока r = 0
    равен 0, так что блок (0, k_0] содержит и отцовскую функцию.
    """
    n: int
    k: int
    alpha: float
    beta: float
    d: int
    k_grid: Tuple[int, ...]
    l_grid: Tuple[int, ...]
    D: Optional[int] = None

    @property
    def R(self) -> int:
        return len(self.k_grid) - 1

    @property
    def S(self) -> int:
        return len(self.l_grid) - 1

    def k_at(self, r: int) -> int:
        if r <= -1:
            return 1
        return self.k_grid[min(r, self.R)]

    def l_at(self, s: int) -> int:
        if s <= -1:
            return 1
        return self.l_grid[min(s, self.S)]

    def k_block(self, r: int) -> Tuple[int, int]:
        """Блок (k_{r-1}, k_r] с нижним концом 0 при r = 0."""
        return (0 if r == 0 else self.k_grid[r - 1]), self.k_grid[r]

    def l_block(self, s: int) -> Tuple[int, int]:
        return (0 if s == 0 else self.l_grid[s - 1]), self.l_grid[s]

    def pairs(self, D: int = None) -> List[Tuple[int, int]]:
        D = self.D if D is None else D
        if D is None:
            raise DomainError("Порог D не задан")
        return hyperbola_pairs(self.R, self.S, D)


def grid_build(n: int, k: int = None, alpha: float = 1.0, beta: float = 1.0, d: int = 1,
               D: int = None, default_cutoff: bool = False) -> DyadicGrid:
    """
    Построение сеток блоков.

    Args:
        n: Объем выборки
        k: Верхняя размерность (по умолчанию k ~ n^{2d/(2α+2β+d)}, но не меньше n)
        alpha: Гладкость a
        beta: Гладкость b
        d: Размерность
        D: Порог отсечения
        default_cutoff: Вычислить D по правилу выбора, если D не задан

    Returns:
        DyadicGrid
    """
    _check_smoothness(alpha, beta)
    if n < 1:
        raise DomainError(f"Объем выборки должен быть положительным: {n}")
    if k is None:
        k = max(default_k(n, alpha, beta, d), ceil_admissible(n, d))
        logger.info(f"Размерность проекции по умолчанию: k={k} при n={n}")
    if k < n:
        raise DomainError(f"k={k} меньше объема выборки n={n}")
    if not is_admissible(k, d):
        rounded = ceil_admissible(k, d)
        logger.warning(f"k={k} не является допустимым размером, округлено вверх до {rounded}")
        k = rounded
    if D is None and default_cutoff:
        D = default_D(n, alpha, beta, d)
    k_grid = _geometric_grid(n, k, alpha, d)
    l_grid = k_grid if alpha == beta else _geometric_grid(n, k, beta, d)
    if len(set(k_grid)) < len(k_grid) or len(set(l_grid)) < len(l_grid):
        logger.warning(f"Сетки содержат пустые блоки: k={k_grid}, l={l_grid}")
    return DyadicGrid(n=n, k=k, alpha=alpha, beta=beta, d=d, k_grid=k_grid, l_grid=l_grid, D=D)

"""
Тензорный базис Хаара на [0, 1]^d.

Порядок индексов (нумерация с единицы):
    1                       - отцовская функция (константа 1);
    (2^{sd}, 2^{(s+1)d}]     - вейвлеты масштаба s, упорядоченные
                              лексикографически по (v, j), v из {0,1}^d без нуля.

Поэтому префикс (0, 2^{Id}] натягивает ровно функции, постоянные на ячейках уровня I.
"""
import logging
from functools import lru_cache, reduce
from itertools import product
from typing import List, Tuple

import numpy as np

from basis.cells import CellFunction, as_points, cell_ids
from utils.errors import DomainError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def nonzero_directions(d: int) -> Tuple[Tuple[int, ...], ...]:
    """Направления v из {0,1}^d без нулевого, в лексикографическом порядке."""
    return tuple(v for v in product((0, 1), repeat=d) if any(v))


@lru_cache(maxsize=None)
def _sign_tensor(v: Tuple[int, ...]) -> np.ndarray:
    vecs = [np.array([1.0, -1.0]) if vt else np.array([1.0, 1.0]) for vt in v]
    return reduce(np.multiply.outer, vecs)


def is_admissible(size: int, d: int) -> bool:
    """Размер префикса вида 2^{Id} (или 0 для пустого префикса)."""
    if size == 0:
        return True
    if size < 1:
        return False
    bits = size.bit_length() - 1
    return (1 << bits) == size and bits % d == 0


def level_of_size(size: int, d: int) -> int:
    """Уровень I для допустимого размера 2^{Id}."""
    if size < 1 or not is_admissible(size, d):
        raise DomainError(f"Размер {size} не является допустимым размером префикса при d={d}")
    return (size.bit_length() - 1) // d


def _interleave(children: np.ndarray, d: int) -> np.ndarray:
    """(c_1..c_d, δ_1..δ_d) -> сетка следующего уровня с индексом 2c + δ."""
    side = children.shape[0]
    perm = []
    for t in range(d):
        perm.extend([t, d + t])
    return children.transpose(perm).reshape((2 * side,) * d)


def _deinterleave(grid: np.ndarray, d: int) -> np.ndarray:
    """Обратное к _interleave: сетка уровня s+1 -> (c_1..c_d, δ_1..δ_d)."""
    side = grid.shape[0] // 2
    blocks = grid.reshape([x for _ in range(d) for x in (side, 2)])
    perm = [2 * t for t in range(d)] + [2 * t + 1 for t in range(d)]
    return blocks.transpose(perm)


def synthesize(coefs, d: int) -> CellFunction:
    """
    Быстрый синтез: коэффициенты префикса -> значения на ячейках.

    Args:
        coefs: Коэффициенты префикса длины 2^{Ld}
        d: Размерность

    Returns:
        Кусочно-постоянная функция уровня L
    """
    coefs = np.asarray(coefs, dtype=float)
    level = level_of_size(coefs.size, d)
    grid = np.full((1,) * d, coefs[0])
    for s in range(level):
        side = 1 << s
        n_s = 1 << (s * d)
        detail = np.zeros((side,) * d + (2,) * d)
        for vi, v in enumerate(nonzero_directions(d)):
            c = coefs[n_s + vi * n_s:n_s + (vi + 1) * n_s].reshape((side,) * d)
            detail += c[(...,) + (None,) * d] * _sign_tensor(v)
        children = grid[(...,) + (None,) * d] + 2.0 ** (s * d / 2.0) * detail
        grid = _interleave(children, d)
    return CellFunction(d, level, grid.reshape(-1))


def analyze(fn: CellFunction, level: int = None) -> np.ndarray:
    """
    Быстрый анализ: коэффициенты разложения по префиксу (0, 2^{Ld}].

    Для функции уровня не выше L разложение точное.
    """
    d = fn.d
    if level is None:
        level = fn.level
    if level < fn.level:
        raise DomainError(f"Функция уровня {fn.level} не лежит в префиксе уровня {level}")
    grid = fn.refine(level).grid()
    coefs = np.zeros(1 << (level * d))
    detail_axes = tuple(range(d, 2 * d))
    for s in reversed(range(level)):
        n_s = 1 << (s * d)
        blocks = _deinterleave(grid, d)
        vol = 2.0 ** (-(s + 1) * d)
        for vi, v in enumerate(nonzero_directions(d)):
            c = (blocks * _sign_tensor(v)).sum(axis=detail_axes) * vol * 2.0 ** (s * d / 2.0)
            coefs[n_s + vi * n_s:n_s + (vi + 1) * n_s] = c.reshape(-1)
        grid = blocks.mean(axis=detail_axes)
    coefs[0] = grid.reshape(-1)[0]
    return coefs


class Basis:
    """
    Ортонормированный тензорный базис Хаара до уровня I_max.
    """

    def __init__(self, d: int, I_max: int):
        if d not in (1, 2):
            raise DomainError(f"Поддерживаются размерности 1 и 2, получено d={d}")
        if I_max < 0:
            raise DomainError(f"Уровень должен быть неотрицательным: {I_max}")
        self.d = d
        self.I_max = I_max
        self.K_max = 1 << (I_max * d)

    def __repr__(self):
        return f"Basis(d={self.d}, I_max={self.I_max}, K_max={self.K_max})"

    def locate(self, index: int) -> Tuple[int, Tuple[int, ...], Tuple[int, ...]]:
        """
        Масштаб, направление и сдвиг базисной функции.

        Returns:
            Кортеж (s, v, j); для отцовской функции s = -1
        """
        if not 1 <= index <= self.K_max:
            raise DomainError(f"Индекс {index} вне диапазона 1..{self.K_max}")
        pos = index - 1
        if pos == 0:
            return -1, (0,) * self.d, (0,) * self.d
        s = ((pos.bit_length() - 1) // self.d)
        n_s = 1 << (s * self.d)
        offset = pos - n_s
        vi, flat = divmod(offset, n_s)
        side = 1 << s
        j = []
        for _ in range(self.d):
            flat, jt = divmod(flat, side)
            j.append(jt)
        return s, nonzero_directions(self.d)[vi], tuple(reversed(j))

    def design(self, z, count: int = None) -> np.ndarray:
        """
        Матрица значений первых count базисных функций в точках.

        Args:
            z: Точки из [0, 1)^d
            count: Число функций (по умолчанию K_max)

        Returns:
            Массив формы (n, count)
        """
        if count is None:
            count = self.K_max
        if not 0 <= count <= self.K_max:
            raise DomainError(f"Число функций {count} вне диапазона 0..{self.K_max}")
        z = as_points(z, self.d)
        n = z.shape[0]
        E = np.zeros((n, count))
        if count == 0:
            return E
        cell_ids(z, 0, self.d)  # проверка области
        E[:, 0] = 1.0
        rows = np.arange(n)
        for s in range(self.I_max):
            n_s = 1 << (s * self.d)
            if n_s >= count:
                break
            c = np.floor(z * (1 << (s + 1))).astype(np.int64)
            j, delta = c >> 1, c & 1
            flat = j[:, 0]
            for t in range(1, self.d):
                flat = flat * (1 << s) + j[:, t]
            scale = 2.0 ** (s * self.d / 2.0)
            for vi, v in enumerate(nonzero_directions(self.d)):
                val = np.full(n, scale)
                for t, vt in enumerate(v):
                    if vt:
                        val *= 1.0 - 2.0 * delta[:, t]
                col = n_s + vi * n_s + flat
                mask = col < count
                E[rows[mask], col[mask]] = val[mask]
        return E

    def columns(self, z, indices) -> np.ndarray:
        """Значения базисных функций с заданными индексами (с единицы)."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return np.zeros((as_points(z, self.d).shape[0], 0))
        return self.design(z, int(indices.max()))[:, indices - 1]

    def synthesize(self, coefs) -> CellFunction:
        return synthesize(coefs, self.d)

    def analyze(self, fn: CellFunction) -> np.ndarray:
        return analyze(fn, self.I_max)


def basis_eval(basis: Basis, index: int, z) -> np.ndarray:
    """
    Значение базисной функции с индексом index в точках z.

    Args:
        basis: Базис Хаара
        index: Индекс функции, от 1 до K_max
        z: Точка или массив точек из [0, 1)^d

    Returns:
        Массив значений
    """
    s, v, j = basis.locate(index)
    z = as_points(z, basis.d)
    cell_ids(z, 0, basis.d)
    if s < 0:
        return np.ones(z.shape[0])
    scale = 1 << s
    val = np.full(z.shape[0], 2.0 ** (s * basis.d / 2.0))
    for t in range(basis.d):
        x = z[:, t] * scale - j[t]
        inside = (x >= 0.0) & (x < 1.0)
        if v[t]:
            val *= np.where(inside, np.where(x < 0.5, 1.0, -1.0), 0.0)
        else:
            val *= inside
    return val


def block_indices(basis: Basis, lo: int, hi: int) -> np.ndarray:
    """
    Индексы блока (lo, hi] с нумерацией с единицы.

    Args:
        basis: Базис Хаара
        lo: Нижняя граница (0 или допустимый размер префикса)
        hi: Верхняя граница (допустимый размер префикса)

    Returns:
        Массив индексов lo+1..hi
    """
    if not 0 <= lo < hi <= basis.K_max:
        raise DomainError(f"Блок ({lo}, {hi}] вне диапазона (0, {basis.K_max}]")
    if not (is_admissible(lo, basis.d) and is_admissible(hi, basis.d)):
        raise DomainError(f"Границы блока ({lo}, {hi}] не являются допустимыми размерами префиксов")
    return np.arange(lo + 1, hi + 1)


def admissible_sizes(d: int, I_max: int) -> List[int]:
    return [1 << (i * d) for i in range(I_max + 1)]

import logging
from dataclasses import dataclass
from itertools import islice, permutations
from typing import Callable

import numpy as np

from config import NAIVE_BATCH, NAIVE_MAX_N
from ustat.partitions import falling_factorial
from utils.errors import DomainError, OrderError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenericKernel:
    """
    Ядро порядка m, векторизованное по пакетам наблюдений.

    fn получает m пакетов одинаковой длины (массивы или выборки с индексацией)
    и возвращает массив значений ядра.
    """
    order: int
    fn: Callable[..., np.ndarray]
    symmetric: bool = False
    name: str = "kernel"

    def __call__(self, *xs) -> np.ndarray:
        if len(xs) != self.order:
            raise OrderError(f"Ядро порядка {self.order} вызвано с {len(xs)} аргументами")
        values = np.asarray(self.fn(*xs), dtype=float)
        return np.broadcast_to(values, (len(xs[0]),)) if values.ndim == 0 else values


def ustat_naive(kernel: GenericKernel, sample, m: int = None) -> float:
    """
    U-статистика перебором всех упорядоченных кортежей различных индексов.

    Args:
        kernel: Ядро порядка m
        sample: Наблюдения с индексацией массивом индексов
        m: Порядок (по умолчанию порядок ядра)

    Returns:
        Среднее ядра по n(n-1)...(n-m+1) кортежам
    """
    m = kernel.order if m is None else m
    if m != kernel.order:
        raise OrderError(f"Порядок {m} не совпадает с порядком ядра {kernel.order}")
    n = len(sample)
    if n < m:
        raise DomainError(f"Объем выборки {n} меньше порядка {m}")
    if n > NAIVE_MAX_N:
        raise OrderError(f"Перебор ограничен выборками объема не более {NAIVE_MAX_N}, получено {n}")
    tuples = permutations(range(n), m)
    total = 0.0
    while True:
        chunk = np.array(list(islice(tuples, NAIVE_BATCH)), dtype=np.int64)
        if chunk.size == 0:
            break
        total += float(np.sum(kernel(*[sample[chunk[:, t]] for t in range(m)])))
    return total / falling_factorial(n, m)


def check_symmetry(kernel: GenericKernel, sample, rng: np.random.Generator, trials: int = 16,
                   tol: float = 1e-10) -> bool:
    """Выборочная проверка инвариантности ядра относительно перестановок аргументов."""
    n = len(sample)
    for _ in range(trials):
        idx = rng.choice(n, size=kernel.order, replace=n < kernel.order)
        perm = rng.permutation(kernel.order)
        base = kernel(*[sample[idx[t:t + 1]] for t in range(kernel.order)])
        swapped = kernel(*[sample[idx[perm[t]:perm[t] + 1]] for t in range(kernel.order)])
        if not np.allclose(base, swapped, rtol=tol, atol=tol):
            return False
    return True

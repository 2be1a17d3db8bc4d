"""
Разбиения множества и коэффициенты Мёбиуса решетки разбиений.

Сумма по кортежам с попарно различными индексами выражается через суммы
по кортежам, постоянным на блоках разбиения:
    sum_{distinct} = sum_π μ(π) S_π,   μ(π) = prod_B (-1)^{|B|-1} (|B|-1)!
"""
from functools import lru_cache
from math import factorial
from typing import Tuple

Partition = Tuple[Tuple[int, ...], ...]


@lru_cache(maxsize=None)
def set_partitions(q: int) -> Tuple[Partition, ...]:
    """Все разбиения множества {0, ..., q-1}; их число равно числу Белла."""
    if q == 0:
        return ((),)
    out = []
    for part in set_partitions(q - 1):
        for i in range(len(part)):
            out.append(part[:i] + (part[i] + (q - 1,),) + part[i + 1:])
        out.append(part + ((q - 1,),))
    return tuple(out)


def mobius(partition: Partition) -> int:
    coef = 1
    for block in partition:
        size = len(block)
        coef *= (-1) ** (size - 1) * factorial(size - 1)
    return coef


def falling_factorial(n: int, m: int) -> int:
    """n (n-1) ... (n-m+1) - число упорядоченных кортежей из m различных индексов."""
    out = 1
    for i in range(m):
        out *= n - i
    return out

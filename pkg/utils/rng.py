import logging
from typing import Union

import numpy as np

from config import RNG_ALGORITHM

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]


def stream(base_seed: int, *keys: int) -> np.random.Generator:
    """
    Независимый поток случайных чисел для заданного набора ключей.

    Поток (base_seed, i, r) не зависит от порядка выполнения задач,
    поэтому результаты не зависят от числа процессов.

    Args:
        base_seed: Базовое зерно эксперимента
        keys: Ключи потока (индекс объема выборки, номер повторения и т.д.)

    Returns:
        Генератор numpy на основе Philox
    """
    if base_seed < 0 or any(k < 0 for k in keys):
        raise ValueError(f"Зерно и ключи должны быть неотрицательными: {base_seed}, {keys}")
    seq = np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(seq))


def as_generator(seed: SeedLike, *keys: int) -> np.random.Generator:
    """Генератор из зерна либо уже готовый генератор без изменений."""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed), *keys)


__all__ = ["RNG_ALGORITHM", "stream", "as_generator", "SeedLike"]

"""
Цепные ядра и их U-статистики.

Ядро порядка m имеет вид
    sign * Ã_1 ẽ_{B_1}(Z_1)^T (Ā_2 ẽ_{B_1}(Z_2) ẽ_{B_2}(Z_2)^T - I_{B_1,B_2}) ... ẽ_{B_{m-1}}(Z_m) Ỹ_m,
где ẽ - ортонормированные в L2(w) признаки проекции, B_t - блок индексов ребра t,
а I_{B,B'} - единица на пересечении блоков. Раскрытие скобок дает сумму обычных цепей
по подмножествам сохраненных средних позиций; у выброшенной позиции соседние ребра
сливаются в ядро пересечения блоков.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from config import CHAIN_MAX_ORDER
from projection.kernels import SampleKernel, triangle_sum
from ustat.naive import GenericKernel
from ustat.partitions import Partition, falling_factorial, mobius, set_partitions
from utils.errors import DomainError, OrderError

logger = logging.getLogger(__name__)

Block = Tuple[int, int]


@dataclass(frozen=True)
class ChainScores:
    """Весовые переменные цепи: левая (Ã), средняя (Ā) и правая (Ỹ)."""
    left: Callable[[object], np.ndarray]
    middle: Callable[[object], np.ndarray]
    right: Callable[[object], np.ndarray]


def intersect(*blocks: Block) -> Block:
    return max(b[0] for b in blocks), min(b[1] for b in blocks)


@dataclass(frozen=True, eq=False)
class ChainKernel:
    """
    Цепное ядро порядка m с блоками индексов по ребрам.

    Attributes:
        order: Порядок m >= 2
        projection: Проекция с методами features и sample_kernel
        scores: Весовые переменные
        blocks: Блок (lo, hi] для каждого из m-1 ребер
        centered: Вычитать ли средние средних множителей
        sign: Общий знак, по умолчанию (-1)^{m-1}
    """
    order: int
    projection: object
    scores: ChainScores
    blocks: Tuple[Block, ...] = None
    centered: bool = True
    sign: float = None
    _terms: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 2:
            raise OrderError(f"Цепное ядро имеет порядок не ниже 2, получено {self.order}")
        blocks = self.blocks
        if blocks is None:
            blocks = ((0, self.projection.size),) * (self.order - 1)
        blocks = tuple((int(lo), int(hi)) for lo, hi in blocks)
        if len(blocks) != self.order - 1:
            raise DomainError(f"Нужно {self.order - 1} блоков, получено {len(blocks)}")
        object.__setattr__(self, "blocks", blocks)
        if self.sign is None:
            object.__setattr__(self, "sign", float((-1) ** (self.order - 1)))

    def expansion(self) -> List[Tuple[float, Tuple[int, ...], Tuple[Block, ...]]]:
        """
        Раскрытие центрированной цепи в сумму обычных цепей.

        Returns:
            Список (коэффициент, сохраненные позиции, блоки ребер между ними)
        """
        if self._terms is not None:
            return self._terms
        m = self.order
        middles = range(1, m - 1)
        subsets = [tuple(middles)]
        if self.centered:
            subsets = [s for size in range(m - 1) for s in combinations(middles, size)]
        terms = []
        for kept in subsets:
            positions = (0,) + tuple(kept) + (m - 1,)
            edges = []
            for p, q in zip(positions[:-1], positions[1:]):
                edges.append(intersect(*self.blocks[p:q]))
            if any(lo >= hi for lo, hi in edges):
                continue
            coef = self.sign * (-1) ** (m - 2 - len(kept))
            terms.append((coef, positions, tuple(edges)))
        object.__setattr__(self, "_terms", terms)
        return terms

    def _node_scores(self, position: int, x) -> np.ndarray:
        if position == 0:
            return np.asarray(self.scores.left(x), dtype=float)
        if position == self.order - 1:
            return np.asarray(self.scores.right(x), dtype=float)
        return np.asarray(self.scores.middle(x), dtype=float)

    def evaluate(self, *xs) -> np.ndarray:
        """
        Значение ядра в матричной форме через ортонормированные признаки.

        Args:
            xs: m пакетов наблюдений одинаковой длины

        Returns:
            Массив значений ядра
        """
        if len(xs) != self.order:
            raise OrderError(f"Ядро порядка {self.order} вызвано с {len(xs)} аргументами")
        proj = self.projection
        lo, hi = self.blocks[0]
        v = self._node_scores(0, xs[0])[:, None] * proj.features(xs[0].z, lo, hi)
        for t in range(1, self.order - 1):
            prev, nxt = self.blocks[t - 1], self.blocks[t]
            s = np.sum(v * proj.features(xs[t].z, *prev), axis=1) * self._node_scores(t, xs[t])
            new = s[:, None] * proj.features(xs[t].z, *nxt)
            if self.centered:
                new -= _restrict(v, prev, nxt)
            v = new
        lo, hi = self.blocks[-1]
        last = self.order - 1
        out = np.sum(v * proj.features(xs[last].z, lo, hi), axis=1) * self._node_scores(last, xs[last])
        return self.sign * out

    def evaluate_collapsed(self, *xs) -> np.ndarray:
        """Значение ядра через раскрытие по подмножествам и значения ядер проекций."""
        out = np.zeros(len(xs[0]))
        for coef, positions, edges in self.expansion():
            term = np.full(len(xs[0]), coef)
            for p in positions:
                term = term * self._node_scores(p, xs[p])
            for (p, q), (lo, hi) in zip(zip(positions[:-1], positions[1:]), edges):
                term = term * self.projection.kernel_eval(xs[p].z, xs[q].z, lo, hi)
            out += term
        return out

    def as_generic(self) -> GenericKernel:
        return GenericKernel(self.order, self.evaluate, symmetric=False, name="chain")


def _restrict(v: np.ndarray, src: Block, dst: Block) -> np.ndarray:
    """Умножение строк v на I_{src,dst}: перенос общих координат пересечения блоков."""
    out = np.zeros((v.shape[0], dst[1] - dst[0]))
    lo, hi = intersect(src, dst)
    if lo < hi:
        out[:, lo - dst[0]:hi - dst[0]] = v[:, lo - src[0]:hi - src[0]]
    return out


def _partition_sum(weights: Sequence[np.ndarray], kernels: Sequence[SampleKernel],
                   partition: Partition) -> float:
    """Сумма цепи по кортежам, постоянным на блоках разбиения (остальные индексы свободны)."""
    block_of = {}
    for b, block in enumerate(partition):
        for t in block:
            block_of[t] = b
    node_w = [np.ones_like(weights[0]) for _ in partition]
    for t, w in enumerate(weights):
        node_w[block_of[t]] = node_w[block_of[t]] * w
    edges: Dict[Tuple[int, int], SampleKernel] = {}
    for t, K in enumerate(kernels):
        u, v = block_of[t], block_of[t + 1]
        if u == v:
            node_w[u] = node_w[u] * K.diag()
            continue
        key = (min(u, v), max(u, v))
        edges[key] = K if key not in edges else edges[key].hadamard(K)
    if len(edges) == len(partition) - 1:
        return _tree_sum(node_w, edges)
    if len(partition) == 3 and len(edges) == 3:
        return triangle_sum(edges[(0, 1)], edges[(1, 2)], edges[(0, 2)], node_w[0], node_w[1], node_w[2])
    raise OrderError(f"Неподдерживаемая форма графа разбиения {partition}")


def _tree_sum(node_w: List[np.ndarray], edges: Dict[Tuple[int, int], SampleKernel]) -> float:
    adjacency: Dict[int, list] = {b: [] for b in range(len(node_w))}
    for (u, v), K in edges.items():
        adjacency[u].append((v, K))
        adjacency[v].append((u, K))

    def message(node: int, parent: int) -> np.ndarray:
        out = node_w[node]
        for child, K in adjacency[node]:
            if child != parent:
                out = out * K.matvec(message(child, node))
        return out

    return float(np.sum(message(0, -1)))


def distinct_chain_sum(weights: Sequence[np.ndarray], kernels: Sequence[SampleKernel]) -> float:
    """
    Сумма обычной цепи по кортежам попарно различных индексов.

    Args:
        weights: Веса вершин цепи (q массивов длины n)
        kernels: Ядра q-1 ребер

    Returns:
        sum_{i_1..i_q различны} prod w_t[i_t] prod K_t[i_t, i_{t+1}]
    """
    q = len(weights)
    total = 0.0
    for partition in set_partitions(q):
        total += mobius(partition) * _partition_sum(weights, kernels, partition)
    return total


def ustat_chain(chain: ChainKernel, sample) -> float:
    """
    U-статистика цепного ядра через обращение Мёбиуса по разбиениям.

    Args:
        chain: Цепное ядро порядка m <= 4
        sample: Выборка (атрибут z и индексация)

    Returns:
        Среднее ядра по упорядоченным кортежам различных наблюдений
    """
    m = chain.order
    if m > CHAIN_MAX_ORDER:
        raise OrderError(f"Быстрый путь поддерживает порядок не выше {CHAIN_MAX_ORDER}, получено {m}")
    n = len(sample)
    if n < m:
        raise DomainError(f"Объем выборки {n} меньше порядка {m}")
    left = np.asarray(chain.scores.left(sample), dtype=float)
    middle = np.asarray(chain.scores.middle(sample), dtype=float) if m > 2 else None
    right = np.asarray(chain.scores.right(sample), dtype=float)
    cache: Dict[Block, SampleKernel] = {}

    def kernel(block: Block) -> SampleKernel:
        if block not in cache:
            cache[block] = chain.projection.sample_kernel(sample.z, *block)
        return cache[block]

    total = 0.0
    for coef, positions, edges in chain.expansion():
        q = len(positions)
        weights = [left] + [middle] * (q - 2) + [right]
        value = distinct_chain_sum(weights, [kernel(b) for b in edges])
        total += coef * value / falling_factorial(n, q)
    return total

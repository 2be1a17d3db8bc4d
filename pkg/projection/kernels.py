"""
Ядра проекций, суженные на точки выборки.

Каждое ядро K - симметричная матрица n x n, заданная неявно. Для быстрого
вычисления U-статистик нужны четыре операции: умножение на вектор, диагональ,
поэлементное произведение двух ядер и сумма по треугольнику.
"""
import logging
from abc import ABC, abstractmethod
from itertools import product
from typing import Dict, List, Sequence, Tuple

import numpy as np

from basis.cells import CellFunction

logger = logging.getLogger(__name__)


class SampleKernel(ABC):
    """Интерфейс ядра на точках выборки."""

    n: int

    @abstractmethod
    def matvec(self, v: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def diag(self) -> np.ndarray:
        ...

    def hadamard(self, other: "SampleKernel") -> "SampleKernel":
        return DenseKernel(self.dense() * other.dense())

    @abstractmethod
    def dense(self) -> np.ndarray:
        ...


class DenseKernel(SampleKernel):
    """Явная матрица; используется для проверок и как запасной путь."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=float)
        self.n = self.matrix.shape[0]

    def matvec(self, v):
        return self.matrix @ v

    def diag(self):
        return np.diag(self.matrix).copy()

    def dense(self):
        return self.matrix


class FeatureKernel(SampleKernel):
    """
    Ядро малого ранга K = Φ B Φ^T.

    Args:
        phi: Признаки в точках выборки, форма (n, r)
        B: Симметричная матрица r x r (None означает единичную)
    """

    def __init__(self, phi: np.ndarray, B: np.ndarray = None):
        self.phi = np.asarray(phi, dtype=float)
        self.B = None if B is None else np.asarray(B, dtype=float)
        self.n = self.phi.shape[0]

    @property
    def rank(self) -> int:
        return self.phi.shape[1]

    def _B(self) -> np.ndarray:
        return np.eye(self.rank) if self.B is None else self.B

    def matvec(self, v):
        t = self.phi.T @ v
        if self.B is not None:
            t = self.B @ t
        return self.phi @ t

    def diag(self):
        if self.B is None:
            return np.einsum("ij,ij->i", self.phi, self.phi)
        return np.einsum("ij,jk,ik->i", self.phi, self.B, self.phi)

    def hadamard(self, other):
        if isinstance(other, FeatureKernel) and self.rank * other.rank <= self.n:
            phi = (self.phi[:, :, None] * other.phi[:, None, :]).reshape(self.n, -1)
            if self.B is None and other.B is None:
                return FeatureKernel(phi)
            return FeatureKernel(phi, np.kron(self._B(), other._B()))
        return DenseKernel(self.dense() * other.dense())

    def dense(self):
        return self.phi @ self._B() @ self.phi.T


class CellKernel(SampleKernel):
    """
    Линейная комбинация ячеечных ядер:
        K[i, j] = sum_t 1{c_t(i) = c_t(j)} * phi_t[c_t(i)],
    где c_t - номер ячейки уровня level_t.

    Ядро проекции на функции, постоянные на ячейках уровня I, имеет один член
    с phi = 1 / ∫_c w; ядро блока (lo, hi] - разность двух таких членов.
    """

    def __init__(self, d: int, terms: Sequence[Tuple[int, np.ndarray, np.ndarray]], n: int):
        self.d = d
        self.n = n
        merged: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        for level, ids, phi in terms:
            if level in merged:
                merged[level] = (ids, merged[level][1] + phi)
            else:
                merged[level] = (ids, np.asarray(phi, dtype=float))
        self.terms: List[Tuple[int, np.ndarray, np.ndarray]] = [
            (level, ids, phi) for level, (ids, phi) in sorted(merged.items())
        ]

    def matvec(self, v):
        out = np.zeros(self.n)
        for _, ids, phi in self.terms:
            out += phi[ids] * np.bincount(ids, weights=v, minlength=phi.size)[ids]
        return out

    def diag(self):
        out = np.zeros(self.n)
        for _, ids, phi in self.terms:
            out += phi[ids]
        return out

    def hadamard(self, other):
        if not isinstance(other, CellKernel):
            return DenseKernel(self.dense() * other.dense())
        terms = []
        for (l1, ids1, phi1), (l2, ids2, phi2) in product(self.terms, other.terms):
            level = max(l1, l2)
            ids = ids1 if l1 >= l2 else ids2
            phi = (CellFunction(self.d, l1, phi1).refine(level).values
                   * CellFunction(self.d, l2, phi2).refine(level).values)
            terms.append((level, ids, phi))
        return CellKernel(self.d, terms, self.n)

    def dense(self):
        out = np.zeros((self.n, self.n))
        for _, ids, phi in self.terms:
            out += (ids[:, None] == ids[None, :]) * phi[ids][:, None]
        return out


def _term_matvec(term, v):
    _, ids, phi = term
    return phi[ids] * np.bincount(ids, weights=v, minlength=phi.size)[ids]


def triangle_sum(k_ab: SampleKernel, k_bc: SampleKernel, k_ca: SampleKernel,
                 w_a: np.ndarray, w_b: np.ndarray, w_c: np.ndarray) -> float:
    """
    Сумма по всем тройкам индексов (i, j, l), включая совпадающие:
        sum w_a[i] w_b[j] w_c[l] K_ab[i, j] K_bc[j, l] K_ca[l, i].
    """
    kernels = (k_ab, k_bc, k_ca)
    if all(isinstance(k, CellKernel) for k in kernels):
        return _cell_triangle(k_ab, k_bc, k_ca, w_a, w_b, w_c)
    if all(isinstance(k, FeatureKernel) for k in kernels):
        m_ab = k_ab.phi.T @ (w_b[:, None] * k_bc.phi)
        m_bc = k_bc.phi.T @ (w_c[:, None] * k_ca.phi)
        m_ca = k_ca.phi.T @ (w_a[:, None] * k_ab.phi)
        return float(np.trace(k_ab._B() @ m_ab @ k_bc._B() @ m_bc @ k_ca._B() @ m_ca))
    A, B, C = (k.dense() for k in kernels)
    return float(np.einsum("i,j,l,ij,jl,li->", w_a, w_b, w_c, A, B, C))


def _cell_triangle(k_ab, k_bc, k_ca, w_a, w_b, w_c) -> float:
    total = 0.0
    for t_ab, t_bc, t_ca in product(k_ab.terms, k_bc.terms, k_ca.terms):
        levels = (t_ab[0], t_bc[0], t_ca[0])
        closing = int(np.argmin(levels))
        # Самое грубое ребро следует из двух других и превращается в вес вершины
        if closing == 2:
            (e_xy, e_yz, e_zx), (w_x, w_y, w_z) = (t_ab, t_bc, t_ca), (w_a, w_b, w_c)
        elif closing == 0:
            (e_xy, e_yz, e_zx), (w_x, w_y, w_z) = (t_bc, t_ca, t_ab), (w_b, w_c, w_a)
        else:
            (e_xy, e_yz, e_zx), (w_x, w_y, w_z) = (t_ca, t_ab, t_bc), (w_c, w_a, w_b)
        _, ids_zx, phi_zx = e_zx
        w_z = w_z * phi_zx[ids_zx]
        total += float(np.sum(w_y * _term_matvec(e_xy, w_x) * _term_matvec(e_yz, w_z)))
    return total

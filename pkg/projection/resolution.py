import logging
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from basis.cells import CellFunction, as_points, cell_ids
from basis.haar import Basis, level_of_size
from basis.quadrature import QuadratureRule
from projection.kernels import CellKernel
from projection.weighted import WeightedProjection, check_weight
from utils.errors import DomainError

logger = logging.getLogger(__name__)


class ResolutionProjection:
    """
    Взвешенная проекция на функции, постоянные на ячейках уровня I.

    Префикс Хаара (0, 2^{Id}] натягивает именно это пространство, поэтому ядро
    не требует матрицы Грама:
        Π(z1, z2) = 1{c_I(z1) = c_I(z2)} / W_I[c],   W_I[c] = ∫_c w dν.
    Ядро блока (lo, hi] - разность ядер уровней hi и lo.
    """

    def __init__(self, weight: CellFunction, level: Optional[int]):
        check_weight(weight)
        if level is not None and level < 0:
            raise DomainError(f"Уровень проекции должен быть неотрицательным: {level}")
        self.weight = weight
        self.d = weight.d
        self.level = level
        self.size = 0 if level is None else 1 << (level * self.d)
        self._mass: Dict[int, np.ndarray] = {}

    @classmethod
    def of_size(cls, weight: CellFunction, k: int) -> "ResolutionProjection":
        return cls(weight, None if k == 0 else level_of_size(k, weight.d))

    @property
    def resolution(self) -> int:
        return max(self.level or 0, self.weight.level)

    def __repr__(self):
        return f"ResolutionProjection(size={self.size}, d={self.d}, level={self.level})"

    def cell_mass(self, level: int) -> np.ndarray:
        """W_I[c] = ∫_c w dν для ячеек уровня level."""
        if level not in self._mass:
            mass = self.weight.cell_integrals(level)
            mass.setflags(write=False)
            self._mass[level] = mass
        return self._mass[level]

    def _levels(self, lo: int, hi: int = None) -> List[Tuple[int, float]]:
        """Уровни и знаки членов ядра блока (lo, hi]."""
        hi = self.size if hi is None else hi
        if not 0 <= lo <= hi <= self.size:
            raise DomainError(f"Блок ({lo}, {hi}] вне диапазона (0, {self.size}]")
        if lo == hi:
            return []
        out = [(level_of_size(hi, self.d), 1.0)]
        if lo:
            out.append((level_of_size(lo, self.d), -1.0))
        return out

    def kernel_eval(self, z1, z2, lo: int = 0, hi: int = None) -> np.ndarray:
        z1, z2 = as_points(z1, self.d), as_points(z2, self.d)
        n = max(z1.shape[0], z2.shape[0])
        out = np.zeros(n)
        for level, sign in self._levels(lo, hi):
            c1, c2 = cell_ids(z1, level, self.d), cell_ids(z2, level, self.d)
            out += sign * (c1 == c2) / self.cell_mass(level)[c1]
        return out

    def kernel_matrix(self, z1, z2, lo: int = 0, hi: int = None) -> np.ndarray:
        z1, z2 = as_points(z1, self.d), as_points(z2, self.d)
        out = np.zeros((z1.shape[0], z2.shape[0]))
        for level, sign in self._levels(lo, hi):
            c1, c2 = cell_ids(z1, level, self.d), cell_ids(z2, level, self.d)
            out += sign * (c1[:, None] == c2[None, :]) / self.cell_mass(level)[c1][:, None]
        return out

    def apply_kernel(self, h: CellFunction, lo: int = 0, hi: int = None) -> CellFunction:
        """Интегральный оператор h -> ∫ Π(·, x) h(x) dν(x) для блока (lo, hi]."""
        terms = self._levels(lo, hi)
        if not terms:
            return CellFunction.constant(self.d, 0.0)
        top = terms[0][0]
        out = CellFunction.constant(self.d, 0.0, top)
        for level, sign in terms:
            avg = CellFunction(self.d, level, h.cell_integrals(level) / self.cell_mass(level))
            out = out + sign * avg
        return out

    def project(self, f: Union[CellFunction, Callable]) -> Tuple[np.ndarray, CellFunction]:
        """
        Взвешенное среднее по ячейкам уровня I.

        Returns:
            Значения на ячейках (коэффициенты в базисе индикаторов) и функция Πf
        """
        if not self.size:
            return np.zeros(0), CellFunction.constant(self.d, 0.0)
        if not isinstance(f, CellFunction):
            level = max(self.level, self.weight.level)
            f = CellFunction.from_callable(f, self.d, level)
        proj = self.apply_kernel(f * self.weight)
        return proj.values.copy(), proj

    def sample_kernel(self, z, lo: int = 0, hi: int = None) -> CellKernel:
        z = as_points(z, self.d)
        terms = []
        for level, sign in self._levels(lo, hi):
            terms.append((level, cell_ids(z, level, self.d), sign / self.cell_mass(level)))
        return CellKernel(self.d, terms, z.shape[0])

    def second_moment(self, density: CellFunction) -> float:
        """∫∫ Π(x1, x2)^2 p(x1) p(x2) dν dν."""
        if not self.size:
            return 0.0
        P = density.cell_integrals(self.level)
        return float(np.sum((P / self.cell_mass(self.level)) ** 2))

    @cached_property
    def dense(self) -> WeightedProjection:
        """Та же проекция через базис Хаара и матрицу Грама."""
        level = 0 if self.level is None else self.level
        basis = Basis(self.d, level)
        rule = QuadratureRule(self.d, max(level, self.weight.level))
        return WeightedProjection.prefix(basis, self.size, self.weight, rule)

    def features(self, z, lo: int = 0, hi: int = None) -> np.ndarray:
        return self.dense.features(z, lo, hi)

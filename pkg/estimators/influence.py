"""
Оценщики среднего отклика на основе функций влияния высших порядков.

Оценка порядка m равна
    χ̂ = P_n[A â (Y - b̂) + b̂] + sum_{j=2}^m (-1)^{j-1} U_n[центрированная цепь порядка j],
где цепь порядка j - произведение j-1 ядер проекции в L2(ā b̄ ĝ) с весами Ã, Ā, ..., Ā, Ỹ.
Множитель j! ядра сокращается с 1/j! оценщика, а симметризация поглощается
усреднением по упорядоченным кортежам.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from basis.grid import DyadicGrid
from basis.haar import Basis, is_admissible, level_of_size
from config import CHAIN_MAX_ORDER
from models import mar
from models.mar import Sample, TripletModel, Weight
from models.preliminary import PreliminaryFit, score_functions
from projection.resolution import ResolutionProjection
from projection.weighted import WeightedProjection
from estimators.report import EstimateReport
from ustat.chain import Block, ChainKernel, ustat_chain
from utils.errors import ConfigError, DomainError, OrderError, ProjectionError

logger = logging.getLogger(__name__)

GRAM_MODES = ("known", "estimated")
ENGINES = ("cells", "dense")


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Параметры оценщика.

    Attributes:
        order: Порядок m от 1 до 4
        k: Размерность проекции (допустимый размер 2^{Id})
        truncated: Гиперболическое усечение членов порядка j >= 3
        grid: Сетки блоков для усеченного оценщика
        abar: Вес ā
        bbar: Вес b̄
        gram: known - вес ā b̄ g, estimated - вес ā b̄ ĝ
        engine: cells - ядра по ячейкам, dense - матрица Грама и признаки
        cross_fit: Усреднение двух оценок с обменом половин выборки
    """
    order: int = 1
    k: int = 0
    truncated: bool = False
    grid: Optional[DyadicGrid] = None
    abar: Weight = 1.0
    bbar: Weight = 1.0
    gram: str = "estimated"
    engine: str = "cells"
    cross_fit: bool = False
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not 1 <= self.order <= CHAIN_MAX_ORDER:
            raise OrderError(f"Порядок оценщика должен лежать в 1..{CHAIN_MAX_ORDER}, получено {self.order}")
        if self.gram not in GRAM_MODES:
            raise ConfigError(f"Неизвестный режим матрицы Грама: {self.gram}")
        if self.engine not in ENGINES:
            raise ConfigError(f"Неизвестный способ вычисления ядер: {self.engine}")
        if self.k < 0:
            raise ConfigError(f"Размерность проекции должна быть неотрицательной: {self.k}")
        if self.truncated:
            if self.order < 3:
                raise ConfigError("Усеченный оценщик определен для порядков m >= 3")
            if self.grid is None or self.grid.D is None:
                raise ConfigError("Усеченному оценщику нужны сетки блоков и порог D")
            if self.grid.k != self.k:
                raise ConfigError(f"Верхняя размерность сетки {self.grid.k} не совпадает с k={self.k}")

    def describe(self) -> Dict[str, object]:
        out = {"order": self.order, "k": self.k, "truncated": self.truncated, "gram": self.gram,
               "engine": self.engine, "cross_fit": self.cross_fit}
        if self.grid is not None:
            out["D"] = self.grid.D
        return out


def estimator_projection(config: EstimatorConfig, fit: PreliminaryFit, model: TripletModel = None):
    """
    Проекция оценщика: вес ā b̄ g при известной g, иначе ā b̄ ĝ.

    Returns:
        ResolutionProjection или WeightedProjection размерности k
    """
    if config.gram == "known":
        if model is None:
            raise ConfigError("Режим known требует истинной модели")
        density = model.g
    else:
        density = fit.g_hat
    weight = mar.projection_weight(config.abar, config.bbar, density)
    k, d = config.k, fit.d
    if k and not is_admissible(k, d):
        raise DomainError(f"Размерность k={k} не является допустимым размером при d={d}")
    if config.engine == "cells":
        return ResolutionProjection.of_size(weight, k)
    level = level_of_size(k, d) if k else 0
    return WeightedProjection.prefix(Basis(d, level), k, weight)


def _check_weight(projection, fit: PreliminaryFit, abar: Weight, bbar: Weight, density=None) -> None:
    density = fit.g_hat if density is None else density
    expected = mar.projection_weight(abar, bbar, density)
    if not projection.weight.allclose(expected, atol=1e-12):
        raise ProjectionError("Вес проекции не совпадает с ā b̄ ĝ")


def order_term(sample: Sample, fit: PreliminaryFit, projection, order: int,
               blocks: Tuple[Block, ...] = None, abar: Weight = 1.0, bbar: Weight = 1.0) -> float:
    """Член порядка j: (-1)^{j-1} U_n центрированной цепи с блоками blocks."""
    chain = ChainKernel(order, projection, score_functions(fit, abar, bbar), blocks,
                        centered=True, sign=float((-1) ** (order - 1)))
    return ustat_chain(chain, sample)


def estimate_order1(sample: Sample, fit: PreliminaryFit) -> EstimateReport:
    """
    Линейная оценка P_n[A â(Z)(Y - b̂(Z)) + b̂(Z)].

    Постоянные χ(p̂) сокращаются, поэтому ĝ не участвует.
    """
    if len(sample) == 0:
        raise DomainError("Пустая выборка")
    z = sample.z
    b_hat = fit.b_hat(z)
    values = sample.a * fit.a_hat(z) * (sample.y - b_hat) + b_hat
    return EstimateReport(float(np.mean(values)), config={"order": 1})


def estimate_order2(sample: Sample, fit: PreliminaryFit, projection, abar: Weight = 1.0,
                    bbar: Weight = 1.0, density=None) -> EstimateReport:
    """
    Оценка второго порядка: линейный член минус U_n[Ã_1 Π(Z_1, Z_2) Ỹ_2].

    Args:
        sample: Выборка
        fit: Предварительные оценки
        projection: Проекция с весом ā b̄ ĝ (или ā b̄ density)
        density: Плотность, по которой построен вес (по умолчанию ĝ)
    """
    _check_weight(projection, fit, abar, bbar, density)
    n = len(sample)
    if projection.size > n * n:
        logger.warning(f"Размерность проекции {projection.size} больше n^2 = {n * n}")
    report = estimate_order1(sample, fit)
    report.terms[2] = order_term(sample, fit, projection, 2, abar=abar, bbar=bbar)
    report.config.update(order=2, k=projection.size)
    return report


def estimate_higher(sample: Sample, fit: PreliminaryFit, config: EstimatorConfig,
                    model: TripletModel = None, projection=None) -> EstimateReport:
    """
    Оценка порядка m: линейный член и члены j = 2..m через центрированные цепи.

    Args:
        sample: Выборка
        fit: Предварительные оценки
        config: Параметры оценщика
        model: Истинная модель (нужна в режиме known)
        projection: Готовая проекция (иначе строится по config)

    Returns:
        EstimateReport с членами по порядкам
    """
    if config.order > CHAIN_MAX_ORDER:
        raise OrderError(f"Порядок {config.order} не поддерживается")
    if projection is None:
        projection = estimator_projection(config, fit, model)
    report = estimate_order1(sample, fit)
    for j in range(2, config.order + 1):
        report.terms[j] = order_term(sample, fit, projection, j, abar=config.abar, bbar=config.bbar)
    report.config.update(config.describe())
    return report


"""
Выбор оценщика по конфигурации и оценка с обменом половин выборки.
"""
import logging
from typing import Callable

import numpy as np

from estimators.influence import EstimatorConfig, estimate_higher, estimate_order1, estimator_projection
from estimators.oracle import attach_diagnostics
from estimators.report import EstimateReport
from estimators.truncated import estimate_truncated
from models.mar import Sample, TripletModel
from models.preliminary import PreliminaryFit
from utils.errors import DomainError

logger = logging.getLogger(__name__)


def estimate(sample: Sample, fit: PreliminaryFit, config: EstimatorConfig,
             model: TripletModel = None) -> EstimateReport:
    """
    Оценка по конфигурации; при известной модели добавляются предсказания смещения.
    """
    if config.order == 1:
        report = estimate_order1(sample, fit)
        report.config.update(config.describe())
        projection = None
    else:
        projection = estimator_projection(config, fit, model)
        if config.truncated:
            report = estimate_truncated(sample, fit, config, model, projection)
        else:
            report = estimate_higher(sample, fit, config, model, projection)
    if model is not None:
        attach_diagnostics(report, fit, model, config, projection)
    return report


def estimate_cross_fit(sample: Sample, config: EstimatorConfig,
                       fit_builder: Callable[[Sample], PreliminaryFit],
                       model: TripletModel = None) -> EstimateReport:
    """
    Оценка с обменом половин: предварительные оценки по одной половине,
    оценка по другой, затем наоборот; результаты усредняются.

    Args:
        sample: Полная выборка
        config: Параметры оценщика
        fit_builder: Построение предварительных оценок по половине выборки
        model: Истинная модель (для режима known и диагностики)
    """
    n = len(sample)
    if n < 4:
        raise DomainError(f"Для обмена половин нужно не меньше 4 наблюдений, получено {n}")
    first, second = sample[np.arange(n // 2)], sample[np.arange(n // 2, n)]
    reports = []
    for train, test in ((first, second), (second, first)):
        reports.append(estimate(test, fit_builder(train), config, model))
    orders = sorted(set(reports[0].terms) | set(reports[1].terms))
    merged = EstimateReport(
        (reports[0].linear + reports[1].linear) / 2.0,
        {j: (reports[0].term(j) + reports[1].term(j)) / 2.0 for j in orders},
        {"half_0": reports[0].value, "half_1": reports[1].value},
        dict(config.describe(), cross_fit=True),
    )
    return merged

"""
Эмпирические скорости сходимости: наклон log RMSE по log n.
"""
import logging
import math
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats

from config import MIN_RATE_POINTS
from harness.runner import summarize
from utils.errors import DomainError

logger = logging.getLogger(__name__)


class RateFit(NamedTuple):
    slope: float
    intercept: float
    stderr: float
    points: int


def fit_rate(frame: pd.DataFrame, estimator: str = None) -> RateFit:
    """
    Наклон регрессии log RMSE на log n.

    Args:
        frame: Сводка (столбцы n, rmse) или строки результатов (столбцы n, error)
        estimator: Имя оценщика, если в таблице их несколько
    """
    if estimator is not None:
        frame = frame[frame["estimator"] == estimator]
    if "rmse" not in frame.columns:
        frame = summarize(frame)
    elif "estimator" in frame.columns and frame["estimator"].nunique() > 1:
        raise DomainError("В сводке несколько оценщиков, укажите нужный")
    n = frame["n"].to_numpy(dtype=float)
    rmse = frame["rmse"].to_numpy(dtype=float)
    if np.unique(n).size < MIN_RATE_POINTS:
        raise DomainError(f"Для оценки скорости нужно не меньше {MIN_RATE_POINTS} объемов выборки, "
                          f"получено {np.unique(n).size}")
    if np.any(rmse <= 0) or not np.all(np.isfinite(rmse)):
        raise DomainError("RMSE должна быть положительной и конечной во всех ячейках")
    res = stats.linregress(np.log(n), np.log(rmse))
    logger.info(f"Наклон log RMSE: {res.slope:.4f} ± {res.stderr:.4f} по {n.size} точкам")
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), int(n.size))


def minimax_exponent(alpha: float, beta: float, d: int) -> float:
    """Показатель RMSE при (α + β)/2 < d/4: -(2α + 2β)/(2α + 2β + d); иначе -1/2."""
    s = alpha + beta
    if s / 2.0 >= d / 4.0:
        return -0.5
    return -(2.0 * s) / (2.0 * s + d)


def plugin_exponent(alpha: float, beta: float, d: int) -> float:
    """Показатель смещения подстановочной оценки с оптимальными по скорости â и b̂."""
    if math.isinf(alpha) or math.isinf(beta):
        return -0.5
    return max(-(alpha / (2.0 * alpha + d) + beta / (2.0 * beta + d)), -0.5)


def rates_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Наклоны для всех оценщиков сводки."""
    rows = []
    for name, group in summary.groupby("estimator", sort=False):
        fit = fit_rate(group)
        rows.append({"estimator": name, "slope": fit.slope, "stderr": fit.stderr, "points": fit.points})
    return pd.DataFrame(rows)

"""
Точные ожидания членов оценщиков при истинной модели.

Для независимых наблюдений E[Ã | Z] f = (â - a) b̄ g, E[Ỹ | Z] f = (b - b̂) ā g,
E[Ā | Z] f = ā b̄ g, поэтому среднее обычной цепи равно вложенному интегралу
    ∫ u(z_1) Π(z_1, z_2) ρ(z_2) Π(z_2, z_3) ... Π(z_{q-1}, z_q) v(z_q),
который вычисляется справа налево оператором apply_kernel.
"""
import logging
from typing import Dict, Tuple

from basis.cells import CellFunction
from basis.grid import DyadicGrid
from estimators.report import EstimateReport
from estimators.truncated import truncated_chains
from models.mar import TripletModel, Weight, first_order_bias, truth
from models.preliminary import PreliminaryFit
from ustat.chain import Block, ChainKernel

logger = logging.getLogger(__name__)


def _chain_integral(projection, edges: Tuple[Block, ...], u: CellFunction, v: CellFunction,
                    rho: CellFunction) -> float:
    h = v
    for t in reversed(range(len(edges))):
        h = projection.apply_kernel(h, *edges[t])
        if t > 0:
            h = h * rho
    return (u * h).integral()


def chain_mean(projection, model: TripletModel, fit: PreliminaryFit, order: int,
               blocks: Tuple[Block, ...] = None, abar: Weight = 1.0, bbar: Weight = 1.0,
               centered: bool = True) -> float:
    """
    Среднее члена (-1)^{j-1} U_n[цепь] при истинной модели.

    Args:
        projection: Проекция оценщика (вес может быть построен по ĝ)
        model: Истинная модель
        fit: Предварительные оценки
        order: Порядок j >= 2
        blocks: Блоки ребер (по умолчанию все (0, k])
        centered: Центрированная цепь
    """
    u = (fit.a_hat - model.a) * bbar * model.g
    v = (model.b - fit.b_hat) * abar * model.g
    rho = model.g * abar * bbar
    chain = ChainKernel(order, projection, None, blocks, centered, float((-1) ** (order - 1)))
    total = 0.0
    for coef, _, edges in chain.expansion():
        total += coef * _chain_integral(projection, edges, u, v, rho)
    return total


def term_means(projection, model: TripletModel, fit: PreliminaryFit, order: int,
               abar: Weight = 1.0, bbar: Weight = 1.0) -> Dict[int, float]:
    """Средние членов j = 2..order полной оценки."""
    return {j: chain_mean(projection, model, fit, j, abar=abar, bbar=bbar) for j in range(2, order + 1)}


def truncated_term_means(projection, model: TripletModel, fit: PreliminaryFit, grid: DyadicGrid,
                         order: int, abar: Weight = 1.0, bbar: Weight = 1.0) -> Dict[int, float]:
    """Средние членов усеченной оценки: j = 2 полный, j >= 3 по блокам сетки."""
    out = {2: chain_mean(projection, model, fit, 2, abar=abar, bbar=bbar)}
    for j in range(3, order + 1):
        out[j] = sum(chain_mean(projection, model, fit, j, blocks, abar, bbar)
                     for blocks in truncated_chains(grid, j))
    return out


def _prefix_residual(projection, fn: CellFunction, size: int) -> CellFunction:
    """(I - Π^{(0, size]}) fn для проекции в L2(weight проекции)."""
    size = min(size, projection.size)
    return fn - projection.apply_kernel(fn * projection.weight, 0, size)


def bias_oracle(fit: PreliminaryFit, model: TripletModel, projection, grid: DyadicGrid = None,
                D: int = None, abar: Weight = 1.0, bbar: Weight = 1.0) -> Dict[str, float]:
    """
    Вычислимые составляющие смещения.

    first_order:          -∫ (â - a)(b̂ - b) g dν
    projection_remainder: -∫ (I-Π)(â - a)/ā (I-Π)(b̂ - b)/b̄ ā b̄ g dν
    second_order:         точное условное смещение оценки второго порядка
    hyperbola_bound:      sum_{r=1..R} ‖(I-Π^{(0,k_{r-1}]})(â-a)/ā‖ ‖(I-Π^{(0,l_{D-r}]})(b̂-b)/b̄‖ ‖ĝ/g - 1‖

    Все нормы в L2(ā b̄ g). Остаток проекции совпадает с second_order,
    когда проекция построена с весом ā b̄ g.
    """
    w_true = model.g * abar * bbar
    da = (fit.a_hat - model.a) / abar
    db = (fit.b_hat - model.b) / bbar
    ra = _prefix_residual(projection, da, projection.size)
    rb = _prefix_residual(projection, db, projection.size)
    first = first_order_bias(fit, model)
    out = {
        "first_order": first,
        "projection_remainder": -(ra * rb * w_true).integral(),
        "second_order": first + chain_mean(projection, model, fit, 2, abar=abar, bbar=bbar),
    }
    D = grid.D if (grid is not None and D is None) else D
    if grid is not None and D is not None:
        g_err = (fit.g_hat / model.g - 1.0).norm(w_true)
        bound = 0.0
        for r in range(1, grid.R + 1):
            left = _prefix_residual(projection, da, grid.k_at(r - 1)).norm(w_true)
            right = _prefix_residual(projection, db, grid.l_at(D - r)).norm(w_true)
            bound += left * right
        out["hyperbola_bound"] = bound * g_err
    return out


def predicted_bias(projection, model: TripletModel, fit: PreliminaryFit, order: int,
                   grid: DyadicGrid = None, truncated: bool = False,
                   abar: Weight = 1.0, bbar: Weight = 1.0) -> float:
    """Точное условное смещение оценки: смещение первого порядка плюс средние членов."""
    bias = first_order_bias(fit, model)
    if order < 2:
        return bias
    if truncated:
        means = truncated_term_means(projection, model, fit, grid, order, abar, bbar)
    else:
        means = term_means(projection, model, fit, order, abar, bbar)
    return bias + sum(means.values())


def attach_diagnostics(report: EstimateReport, fit: PreliminaryFit, model: TripletModel,
                       config, projection=None) -> EstimateReport:
    """Истинное значение и предсказанное смещение в диагностике отчета."""
    report.diagnostics["truth"] = truth(model)
    report.diagnostics["first_order_bias"] = first_order_bias(fit, model)
    if projection is None or config.order < 2:
        report.diagnostics["predicted_bias"] = report.diagnostics["first_order_bias"]
        return report
    report.diagnostics["predicted_bias"] = predicted_bias(
        projection, model, fit, config.order, config.grid, config.truncated, config.abar, config.bbar)
    return report

"""
Гиперболически усеченный оценщик.

Ядра проекций раскладываются по блокам сеток k и l, и в произведении двух
соседних ядер сохраняются только пары блоков (r, s) с r = 0, s = 0 или r + s <= D.
Компенсирующий член центрирования берется по пересечению блоков, поэтому
усеченное ядро остается вырожденным.

При фиксированном r сохраняемые s образуют отрезок 0..s_max(r), и сумма блоков
l по нему равна префиксу (0, l_{s_max(r)}]; цепь линейна по каждому блоку,
так что сумма по парам сводится к сумме по r.
"""
import logging
from typing import List, Tuple

from basis.grid import DyadicGrid
from estimators.influence import EstimatorConfig, estimate_order1, estimator_projection, order_term
from estimators.report import EstimateReport
from models.mar import Sample, TripletModel
from models.preliminary import PreliminaryFit
from ustat.chain import Block
from utils.errors import ConfigError, OrderError

logger = logging.getLogger(__name__)


def retained_s_max(grid: DyadicGrid, r: int, D: int) -> int:
    """Наибольшее s, сохраняемое в паре с блоком r."""
    if r == 0:
        return grid.S
    return max(0, min(grid.S, D - r))


def _pair_blocks(grid: DyadicGrid, D: int) -> List[Tuple[Block, Block]]:
    out = []
    for r in range(grid.R + 1):
        lo, hi = grid.k_block(r)
        if lo == hi:
            continue
        out.append(((lo, hi), (0, grid.l_at(retained_s_max(grid, r, D)))))
    return out


def truncated_chains(grid: DyadicGrid, order: int, D: int = None) -> List[Tuple[Block, ...]]:
    """
    Блоки ребер цепей, в сумме дающих усеченный член порядка j.

    j = 3: (K_r, L^r), где L^r - объединение сохраняемых блоков l;
    j = 4: (K_r, L^r, (0, k_0]) и ((0, k_0], K_r, L^r) - усечение первой
    и второй пары соседних ядер, остальные ядра обрезаются на k_0 ≈ n.
    """
    D = grid.D if D is None else D
    if D is None:
        raise ConfigError("Порог D не задан")
    pairs = _pair_blocks(grid, D)
    if order == 3:
        return list(pairs)
    if order == 4:
        head = (0, grid.k_at(0))
        return [pair + (head,) for pair in pairs] + [(head,) + pair for pair in pairs]
    raise OrderError(f"Усечение определено для порядков 3 и 4, получено {order}")


def estimate_truncated(sample: Sample, fit: PreliminaryFit, config: EstimatorConfig,
                       model: TripletModel = None, projection=None) -> EstimateReport:
    """
    Усеченная оценка порядка m ∈ {3, 4}.

    Члены j = 1, 2 совпадают с полной оценкой, члены j >= 3 - суммы
    центрированных цепей по блокам из truncated_chains.

    Args:
        sample: Выборка
        fit: Предварительные оценки
        config: Параметры с сеткой блоков и порогом D
        model: Истинная модель (нужна в режиме known)
        projection: Готовая проекция размерности k

    Returns:
        EstimateReport
    """
    if config.order not in (3, 4):
        raise OrderError(f"Усеченный оценщик определен для порядков 3 и 4, получено {config.order}")
    grid = config.grid
    if grid is None or grid.k != config.k:
        raise ConfigError("Сетка блоков не задана или не совпадает с k")
    if projection is None:
        projection = estimator_projection(config, fit, model)
    if projection.size != grid.k:
        raise ConfigError(f"Размерность проекции {projection.size} не совпадает с k={grid.k}")
    report = estimate_order1(sample, fit)
    report.terms[2] = order_term(sample, fit, projection, 2, abar=config.abar, bbar=config.bbar)
    for j in range(3, config.order + 1):
        chains = truncated_chains(grid, j)
        report.terms[j] = sum(order_term(sample, fit, projection, j, blocks, config.abar, config.bbar)
                              for blocks in chains)
    report.config.update(config.describe())
    logger.debug(f"Усеченная оценка: R={grid.R}, S={grid.S}, D={grid.D}, значение {report.value:.6g}")
    return report


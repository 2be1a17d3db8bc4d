"""
Набор проверок точных тождеств: базис, проекции, U-статистики, модель пропусков.

Каждая проверка возвращает CheckResult с наблюдаемой невязкой и допуском.
Функции вызываются через модули (mar.projection_weight, hoeffding.degenerate_part),
чтобы подмена реализации в тестах отражалась на результате.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from basis.cells import CellFunction, midpoints
from basis.grid import grid_build
from basis.haar import Basis, level_of_size
from basis.quadrature import QuadratureRule
from config import (
    CHAIN_RTOL, CHECK_MODELS, CHECK_PAIRS, DEFAULT_SEED, DEGENERACY_TOL, DERIVATIVE_RTOL, PROJECTION_TOL, QUAD_TOL,
)
from estimators.influence import EstimatorConfig
from estimators.oracle import bias_oracle
from estimators.pipeline import estimate
from estimators.truncated import truncated_chains
from models import mar
from models.preliminary import PreliminaryFit, lemma_residuals, make_preliminary, score_functions
from projection.resolution import ResolutionProjection
from projection.weighted import WeightedProjection
from ustat import hoeffding
from ustat.chain import ChainKernel, ustat_chain
from ustat.naive import GenericKernel, ustat_naive
from utils.rng import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.tolerance

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


def _random_weight(d: int, level: int, rng: np.random.Generator) -> CellFunction:
    return CellFunction(d, level, rng.uniform(0.5, 2.0, size=1 << (level * d)))


def check_orthonormality(d: int = 1, level: int = 4) -> CheckResult:
    basis = Basis(d, level)
    rule = QuadratureRule(d, level)
    E = basis.design(rule.points)
    gram = E.T @ (rule.volumes[:, None] * E)
    return CheckResult(f"haar_orthonormality_d{d}", float(np.abs(gram - np.eye(basis.K_max)).max()), QUAD_TOL)


def _l4_norm(fn: CellFunction) -> float:
    return fn.map(lambda v: v ** 4).integral() ** 0.25


def _projection_residuals(basis: Basis, rule: QuadratureRule, rng: np.random.Generator) -> Dict[str, float]:
    """Невязки тождеств ядра для одной случайной пары (вес, префикс)."""
    d, top = basis.d, rule.level
    weight = _random_weight(d, top, rng)
    other = _random_weight(d, top, rng)
    k = int(rng.integers(1, basis.K_max + 1))
    k_cells = 1 << (int(rng.integers(0, basis.I_max + 1)) * d)
    z = rng.uniform(size=(32, d))
    q, wq = rule.points, weight(rule.points) * rule.volumes

    dense = WeightedProjection.prefix(basis, k, weight)
    K_zz = dense.kernel_matrix(z, z)
    K_zq = dense.kernel_matrix(z, q)
    out = {
        "idempotence": float(np.abs((K_zq * wq) @ K_zq.T - K_zz).max()),
        "symmetry": float(np.abs(dense.kernel_matrix(z[::2], z[1::2]) - dense.kernel_matrix(z[1::2], z[::2]).T)
                          .max()),
        "trace": abs(float(np.sum(dense.kernel_eval(q, q) * wq)) - k),
    }

    cells = ResolutionProjection.of_size(weight, k_cells)
    same = WeightedProjection.prefix(basis, k_cells, weight)
    out["resolution_vs_dense"] = float(np.abs(cells.kernel_matrix(z, z) - same.kernel_matrix(z, z)).max())
    unit = WeightedProjection.prefix(basis, k_cells, CellFunction.constant(d, 1.0, top))
    out["unit_diagonal"] = float(np.abs(unit.kernel_eval(z, z) - k_cells).max()) / k_cells

    # Π_v(z, z) <= sup(w / v) Π_w(z, z)
    diag_v = WeightedProjection.prefix(basis, k, other).kernel_eval(z, z)
    diag_w = np.diag(K_zz)
    excess = diag_v - (weight / other).max() * diag_w
    out["diagonal_comparison"] = max(0.0, float(excess.max())) / max(1.0, float(diag_v.max()))

    # ‖Π_w g - Π(w g)‖_2 <= ‖Π_w g‖_4 ‖w - 1‖_4
    g = CellFunction(d, top, rng.normal(size=weight.values.size))
    _, weighted = dense.project(g)
    _, plain = WeightedProjection.prefix(basis, k, CellFunction.constant(d, 1.0, top)).project(weight * g)
    gap = (weighted - plain).norm() - _l4_norm(weighted) * _l4_norm(weight - 1.0)
    out["difference_bound"] = max(0.0, gap)

    # d/dt Π_{w(1+tφ)}(z1, z2) = -∫ Π(z1, z) Π(z, z2) φ(z) w(z) dz
    phi = CellFunction(d, top, rng.uniform(-1.0, 1.0, size=weight.values.size))
    h = 1e-4
    up = WeightedProjection.prefix(basis, k, weight * (1.0 + h * phi)).kernel_matrix(z, z)
    down = WeightedProjection.prefix(basis, k, weight * (1.0 - h * phi)).kernel_matrix(z, z)
    exact = -(K_zq * (phi(q) * wq)) @ K_zq.T
    out["derivative"] = float(np.abs((up - down) / (2.0 * h) - exact).max()) / max(1.0, float(np.abs(exact).max()))
    return out


def check_projection(seed: int, d: int = 1, pairs: int = CHECK_PAIRS) -> List[CheckResult]:
    """
    Тождества ядер проекций на случайных парах (вес, префикс).

    Для каждой пары: идемпотентность, симметрия, след, совпадение клеточного и
    матричного ядра, диагональ 2^{Id} при единичном весе, сравнение диагоналей
    при двух весах, граница разности проекций и производная ядра по весу.
    В результат идет наибольшая невязка по всем парам.
    """
    level = 4 if d == 1 else 2
    basis = Basis(d, level)
    rule = QuadratureRule(d, level + 1)
    worst: Dict[str, float] = {}
    for t in range(pairs):
        for name, value in _projection_residuals(basis, rule, stream(seed, 20, d, t)).items():
            worst[name] = max(worst.get(name, 0.0), value)
    tolerances = {"derivative": DERIVATIVE_RTOL}
    names = {"resolution_vs_dense": f"resolution_vs_dense_d{d}"}
    return [CheckResult(names.get(name, f"projection_{name}_d{d}"), value, tolerances.get(name, PROJECTION_TOL))
            for name, value in worst.items()]


def _test_kernel(order: int) -> GenericKernel:
    def fn(*xs):
        xs = [np.asarray(x, dtype=float) for x in xs]
        out = np.sin(3.0 * xs[0]) + xs[0] * xs[-1] ** 2
        if order == 3:
            out = out + np.exp(xs[1]) * xs[2] - xs[0] * xs[1] * xs[2]
        return out
    return GenericKernel(order, fn, symmetric=False, name=f"test{order}")


def check_degenerate_part(seed: int) -> List[CheckResult]:
    """Условные средние вырожденной части и сумма компонент Хёфдинга."""
    rng = stream(seed, 21)
    measure = hoeffding.DiscreteMeasure(np.array([0.1, 0.45, 0.8, 0.95]), rng.dirichlet(np.ones(4)))
    out = []
    for order in (2, 3):
        kernel = _test_kernel(order)
        tensor = hoeffding.kernel_tensor(hoeffding.degenerate_part(kernel, measure), measure)
        out.append(CheckResult(f"degenerate_part_m{order}",
                               hoeffding.conditional_means(tensor, measure.probs), DEGENERACY_TOL))
        full = hoeffding.kernel_tensor(kernel, measure)
        total = sum(c.expand(order) for c in hoeffding.hoeffding_decompose(kernel, measure))
        out.append(CheckResult(f"hoeffding_reconstruction_m{order}",
                               float(np.abs(np.broadcast_to(total, full.shape) - full).max()), CHAIN_RTOL))
    return out


def _small_model(seed: int) -> mar.TripletModel:
    return mar.synthesize_model(seed, 0.6, 0.6, float("inf"), d=1, level=4)


def check_chains(seed: int, n: int = 10) -> List[CheckResult]:
    """Быстрый путь U-статистики против перебора кортежей для обеих проекций."""
    model = _small_model(seed)
    fit = make_preliminary("synthetic", model, 64, 0.6, 0.6, 0.6, seed=seed)
    sample = mar.draw_sample(model, n, stream(seed, 22))
    weight = mar.projection_weight(1.0, 1.0, fit.g_hat)
    scores = score_functions(fit)
    out = []
    for engine, projection in (("cells", ResolutionProjection.of_size(weight, 4)),
                               ("dense", WeightedProjection.prefix(Basis(1, 2), 4, weight))):
        for order in (2, 3, 4):
            for blocks in (None, ((1, 4),) + ((0, 2),) * (order - 2)):
                chain = ChainKernel(order, projection, scores, blocks)
                fast = ustat_chain(chain, sample)
                slow = ustat_naive(chain.as_generic(), sample)
                rel = abs(fast - slow) / max(1.0, abs(slow))
                tag = "full" if blocks is None else "blocks"
                out.append(CheckResult(f"chain_vs_naive_{engine}_m{order}_{tag}", rel, CHAIN_RTOL))
    return out


def check_lemmas(seed: int, models: int = CHECK_MODELS) -> List[CheckResult]:
    """Тождества условных средних в тильда-параметрах при весе ā b̄ g на нескольких моделях."""
    worst: Dict[str, float] = {}
    for t in range(models):
        model_seed = int(stream(seed, 24, t).integers(1 << 31))
        model = _small_model(model_seed)
        fit = make_preliminary("synthetic", model, 64, 0.6, 0.6, 0.6, seed=model_seed)
        weight = mar.projection_weight(1.0, 1.0, model.g)
        projection = ResolutionProjection.of_size(weight, 8)
        residuals = lemma_residuals(fit, model, projection, points=midpoints(1, 4))
        for name, value in residuals.items():
            worst[name] = max(worst.get(name, 0.0), value)
    return [CheckResult(f"lemma_{name}", value, PROJECTION_TOL) for name, value in worst.items()]


def _conditional_means_at(kernel: GenericKernel, measure: hoeffding.DiscreteMeasure, fixed: np.ndarray) -> float:
    """
    Наибольшее условное среднее ядра по одной позиции, остальные аргументы
    взяты из строк fixed (индексы точек носителя). Делится на масштаб ядра.
    """
    rows, m = fixed.shape
    N = measure.size
    row = np.repeat(np.arange(rows), N)
    col = np.tile(np.arange(N), rows)
    worst, scale = 0.0, 1.0
    for t in range(m):
        args = [measure.support[col] if s == t else measure.support[fixed[row, s]] for s in range(m)]
        values = np.asarray(kernel(*args), dtype=float).reshape(rows, N)
        scale = max(scale, float(np.abs(values).max()))
        worst = max(worst, float(np.abs(values @ measure.probs).max()))
    return worst / scale


def check_truncated_degeneracy(seed: int, n: int = 8, k: int = 32, D: int = 1) -> List[CheckResult]:
    """
    Усеченные ядра порядков 3 и 4 вырождены при законе p̂ = (â, b̂, ĝ).

    ĝ нормируется так, чтобы f̂ = â ĝ была плотностью; условные средние
    считаются точной квадратурой в 8 наборах точек носителя.
    """
    model = _small_model(seed)
    fit = make_preliminary("synthetic", model, 64, 0.6, 0.6, 0.6, seed=seed)
    mass = (fit.a_hat * fit.g_hat).integral()
    fit = PreliminaryFit(fit.a_hat, fit.b_hat, fit.g_hat * (1.0 / mass), mode=fit.mode, eta=fit.eta)
    law = fit.as_model()
    measure = law.observation_measure(law.rule(level_of_size(k, 1)))
    projection = ResolutionProjection.of_size(mar.projection_weight(1.0, 1.0, fit.g_hat), k)
    grid = grid_build(n, k, 0.6, 0.6, 1, D=D)
    scores = score_functions(fit)
    rng = stream(seed, 25)
    out = []
    for order in (3, 4):
        worst = 0.0
        for blocks in truncated_chains(grid, order):
            kernel = ChainKernel(order, projection, scores, blocks).as_generic()
            fixed = rng.integers(0, measure.size, size=(8, order))
            worst = max(worst, _conditional_means_at(kernel, measure, fixed))
        out.append(CheckResult(f"truncated_degeneracy_m{order}", worst, DEGENERACY_TOL))
    return out


def check_double_robustness(seed: int) -> List[CheckResult]:
    """Смещение первого порядка обнуляется при верной â или верной b̂."""
    model = _small_model(seed)
    fit = make_preliminary("synthetic", model, 64, 0.6, 0.6, 0.6, seed=seed)
    exact_a = PreliminaryFit(model.a, fit.b_hat, fit.g_hat, mode="synthetic", eta=fit.eta)
    exact_b = PreliminaryFit(fit.a_hat, model.b, fit.g_hat, mode="synthetic", eta=fit.eta)
    projection = ResolutionProjection.of_size(mar.projection_weight(1.0, 1.0, model.g), 8)
    oracle = bias_oracle(fit, model, projection)
    return [
        CheckResult("first_order_exact_a", abs(mar.first_order_bias(exact_a, model)), QUAD_TOL),
        CheckResult("first_order_exact_b", abs(mar.first_order_bias(exact_b, model)), QUAD_TOL),
        CheckResult("projection_remainder_vs_second_order",
                    abs(oracle["projection_remainder"] - oracle["second_order"]), PROJECTION_TOL),
    ]


def check_truncation(seed: int, n: int = 40) -> CheckResult:
    """Усеченная оценка третьего порядка при D >= R + S совпадает с полной."""
    model = _small_model(seed)
    fit = make_preliminary("synthetic", model, n, 0.6, 0.6, 0.6, seed=seed)
    sample = mar.draw_sample(model, n, stream(seed, 23))
    k = 256
    grid = grid_build(n, k, 0.6, 0.6, 1, D=64, default_cutoff=False)
    full = estimate(sample, fit, EstimatorConfig(order=3, k=k))
    cut = estimate(sample, fit, EstimatorConfig(order=3, k=k, truncated=True, grid=grid))
    return CheckResult("truncation_full_cutoff", abs(full.value - cut.value) / max(1.0, abs(full.value)),
                       CHAIN_RTOL)


CHECKS: List[Callable[[int], object]] = [
    lambda seed: [check_orthonormality(1), check_orthonormality(2, 3)],
    lambda seed: check_projection(seed, 1) + check_projection(seed, 2),
    check_degenerate_part,
    check_chains,
    check_lemmas,
    check_double_robustness,
    lambda seed: [check_truncation(seed)],
    check_truncated_degeneracy,
]


def invariant_suite(seed: int = DEFAULT_SEED) -> List[CheckResult]:
    """
    Все проверки тождеств.

    Returns:
        Список результатов; проверка пройдена, если невязка не больше допуска
    """
    results: List[CheckResult] = []
    for check in CHECKS:
        results.extend(check(seed))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Не пройдены проверки: {', '.join(failed)}")
    else:
        logger.info(f"Пройдено {len(results)} проверок")
    return results

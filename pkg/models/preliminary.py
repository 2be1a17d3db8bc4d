"""
Предварительные оценки (â, b̂, ĝ), весовые переменные и тильда-проекции.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from basis.cells import CellFunction, cell_ids, midpoints
from basis.grid import round_admissible
from basis.haar import Basis, level_of_size
from basis.quadrature import QuadratureRule
from config import MODEL_ETA
from models import mar
from models.mar import Sample, TripletModel, Weight, a_bounds, b_bounds, f_bounds, g_bounds, weight_at
from ustat.chain import ChainScores
from utils.errors import DomainError, ProjectionError
from utils.rng import SeedLike, as_generator

logger = logging.getLogger(__name__)

MODES = ("synthetic", "fitted")
DIRECTIONS = ("independent", "aligned")


@dataclass(frozen=True, eq=False)
class PreliminaryFit:
    """
    Предварительные оценки, построенные по независимой выборке.

    Attributes:
        a_hat: Оценка обратной склонности
        b_hat: Оценка регрессии отклика
        g_hat: Оценка g = f / a
        mode: synthetic или fitted
        eta: Отступ, задающий полосы значений
        meta: Зерна, скорости и фактические множители возмущений
    """
    a_hat: CellFunction
    b_hat: CellFunction
    g_hat: CellFunction
    mode: str = "synthetic"
    eta: float = MODEL_ETA
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"Неизвестный режим предварительной оценки: {self.mode}")
        if not (self.a_hat.d == self.b_hat.d == self.g_hat.d):
            raise DomainError("Оценки разной размерности")

    @property
    def d(self) -> int:
        return self.a_hat.d

    @property
    def f_hat(self) -> CellFunction:
        return self.a_hat * self.g_hat

    @property
    def level(self) -> int:
        return max(self.a_hat.level, self.b_hat.level, self.g_hat.level)

    def as_model(self) -> TripletModel:
        """Тройка p̂ как модель; f̂ = â ĝ не обязана интегрироваться в единицу."""
        return TripletModel(self.d, self.a_hat, self.b_hat, self.f_hat, self.eta, validate=False)

    @classmethod
    def from_model(cls, model: TripletModel, **meta) -> "PreliminaryFit":
        return cls(model.a, model.b, model.g, "synthetic", model.eta, dict(meta))


def _rate(n: int, smoothness: float, d: int) -> float:
    """n^{-s/(2s+d)}; при s = inf показатель равен 1/2."""
    exponent = 0.5 if math.isinf(smoothness) else smoothness / (2.0 * smoothness + d)
    return float(n) ** (-exponent)


def _perturb(base: CellFunction, direction: CellFunction, scale: float,
             bounds: Tuple[float, float], name: str) -> Tuple[CellFunction, float]:
    """base + λ direction с λ <= scale, уменьшенным до попадания в полосу."""
    if scale == 0.0 or direction.sup_norm() == 0.0:
        return base, 0.0
    lo, hi = bounds
    level = max(base.level, direction.level)
    base_v, dir_v = base.refine(level).values, direction.refine(level).values
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(dir_v > 0, (hi - base_v) / dir_v, np.where(dir_v < 0, (lo - base_v) / dir_v, np.inf))
    limit = float(np.max([0.0, np.min(room)]))
    lam = min(scale, limit)
    if lam < scale:
        logger.warning(f"Возмущение {name} уменьшено с {scale:.4g} до {lam:.4g} для попадания в полосу")
    out = base + direction * lam
    return out.map(lambda v: np.clip(v, lo, hi)), lam


def _synthetic(model: TripletModel, n: int, alpha: float, beta: float, gamma: float, seed: int,
               constants: Tuple[float, float, float], direction: str) -> PreliminaryFit:
    d, level, eta = model.d, model.level, model.eta
    c_a, c_b, c_g = constants
    psi_a = mar.HolderFunction(alpha, d, level, seed, (10,)).unit_norm()
    psi_b = psi_a if direction == "aligned" else mar.HolderFunction(beta, d, level, seed, (11,)).unit_norm()
    psi_g = mar.HolderFunction(gamma, d, level, seed, (12,)).unit_norm()
    rates = {"a": _rate(n, alpha, d), "b": _rate(n, beta, d), "g": _rate(n, gamma, d)}
    a_hat, lam_a = _perturb(model.a, psi_a, c_a * rates["a"], a_bounds(eta), "a")
    b_hat, lam_b = _perturb(model.b, psi_b, c_b * rates["b"], b_bounds(eta), "b")
    g_hat, lam_g = _perturb(model.g, psi_g, c_g * rates["g"], g_bounds(eta), "g")
    meta = {"seed": seed, "n": n, "direction": direction, "constants": list(constants),
            "rates": rates, "scales": {"a": lam_a, "b": lam_b, "g": lam_g}}
    return PreliminaryFit(a_hat, b_hat, g_hat, "synthetic", eta, meta)


def _prefix_level(n: int, smoothness: float, d: int) -> int:
    exponent = 0.0 if math.isinf(smoothness) else d / (2.0 * smoothness + d)
    return level_of_size(round_admissible(float(n) ** exponent, d), d)


def _series_fit(sample: Sample, target: np.ndarray, mask: np.ndarray, level: int) -> CellFunction:
    """Регрессия target на префикс Хаара уровня level по наблюдениям mask."""
    basis = Basis(sample.d, level)
    E = basis.design(sample.z[mask])
    reg = LinearRegression(fit_intercept=False)
    reg.fit(E, target[mask].astype(float))
    return basis.synthesize(reg.coef_)


def _fitted(model: TripletModel, n: int, alpha: float, beta: float, gamma: float,
            sample: Sample, rng: np.random.Generator) -> PreliminaryFit:
    d, eta = model.d, model.eta
    if sample is None:
        sample = mar.draw_sample(model, n, rng)
    observed = sample.a == 1
    if not observed.any():
        raise DomainError("Во вспомогательной выборке нет наблюдений с A = 1")
    levels = {"a": _prefix_level(len(sample), alpha, d), "b": _prefix_level(len(sample), beta, d),
              "g": _prefix_level(len(sample), gamma, d)}
    everyone = np.ones(len(sample), dtype=bool)

    pi_hat = _series_fit(sample, sample.a, everyone, levels["a"]).map(lambda v: np.clip(v, *b_bounds(eta)))
    a_hat = 1.0 / pi_hat
    b_hat = _series_fit(sample, sample.y, observed, levels["b"]).map(lambda v: np.clip(v, *b_bounds(eta)))

    lg = levels["g"]
    counts = np.bincount(cell_ids(sample.z, lg, d), minlength=1 << (lg * d))
    f_hat = CellFunction(d, lg, counts / (len(sample) * 2.0 ** (-lg * d))).map(lambda v: np.clip(v, *f_bounds(eta)))
    g_hat = (f_hat / a_hat).map(lambda v: np.clip(v, *g_bounds(eta)))
    meta = {"n": len(sample), "levels": levels, "observed": int(observed.sum())}
    logger.info(f"Предварительные оценки по выборке из {len(sample)} наблюдений, уровни {levels}")
    return PreliminaryFit(a_hat, b_hat, g_hat, "fitted", eta, meta)


def make_preliminary(mode: str, model: TripletModel, n: int, alpha: float, beta: float, gamma: float,
                     seed: SeedLike = 0, constants: Tuple[float, float, float] = (1.0, 1.0, 1.0),
                     direction: str = "independent", sample: Optional[Sample] = None) -> PreliminaryFit:
    """
    Построение предварительных оценок.

    synthetic: â = a + c_a n^{-α/(2α+d)} ψ_a с единичной ψ_a гладкости α (аналогично b̂ и ĝ),
    множитель уменьшается, если оценка выходит из полосы.
    fitted: ряды Хаара размера n^{d/(2δ+d)} по независимой выборке, затем обрезка по полосам.

    Args:
        mode: synthetic или fitted
        model: Истинная модель
        n: Объем выборки, задающий скорость
        alpha: Гладкость a
        beta: Гладкость b
        gamma: Гладкость g
        seed: Зерно (synthetic) или генератор/зерно вспомогательной выборки (fitted)
        constants: Множители (c_a, c_b, c_g)
        direction: independent или aligned (ψ_b = ψ_a)
        sample: Готовая вспомогательная выборка для режима fitted

    Returns:
        PreliminaryFit
    """
    if mode not in MODES:
        raise DomainError(f"Неизвестный режим предварительной оценки: {mode}")
    if direction not in DIRECTIONS:
        raise DomainError(f"Неизвестное направление возмущений: {direction}")
    if n < 1:
        raise DomainError(f"Объем выборки должен быть положительным: {n}")
    if mode == "synthetic":
        if isinstance(seed, np.random.Generator):
            seed = int(seed.integers(0, 2 ** 63 - 1))
        return _synthetic(model, n, alpha, beta, gamma, int(seed), constants, direction)
    return _fitted(model, n, alpha, beta, gamma, sample, as_generator(seed))


def tilde_project(fit: PreliminaryFit, model: TripletModel, projection,
                  abar: Weight = 1.0, bbar: Weight = 1.0) -> Tuple[CellFunction, CellFunction]:
    """
    Тильда-параметры: (ã - â)/ā = Π[(a - â)/ā], (b̃ - b̂)/b̄ = Π[(b - b̂)/b̄].

    Проекция должна быть построена с весом ā b̄ g истинной модели.
    """
    expected = mar.projection_weight(abar, bbar, model.g)
    if not projection.weight.allclose(expected, atol=1e-12):
        raise ProjectionError("Вес проекции не совпадает с ā b̄ g")
    _, pa = projection.project((model.a - fit.a_hat) / abar)
    _, pb = projection.project((model.b - fit.b_hat) / bbar)
    return fit.a_hat + pa * abar, fit.b_hat + pb * bbar


class ScoreTriple(NamedTuple):
    """Весовые переменные наблюдений: Ỹ, Ã и Ā."""
    y_tilde: np.ndarray
    a_tilde: np.ndarray
    a_bar: np.ndarray


def score_triple(sample: Sample, fit: PreliminaryFit, abar: Weight = 1.0, bbar: Weight = 1.0) -> ScoreTriple:
    """
    Ỹ = A (Y - b̂(Z)) ā(Z), Ã = (A â(Z) - 1) b̄(Z), Ā = A ā(Z) b̄(Z).

    При A = 0 отклик не наблюдается, и Ỹ = 0.
    """
    z, A = sample.z, sample.a.astype(float)
    ab, bb = weight_at(abar, z), weight_at(bbar, z)
    y_tilde = A * (sample.y - fit.b_hat(z)) * ab
    a_tilde = (A * fit.a_hat(z) - 1.0) * bb
    return ScoreTriple(y_tilde, a_tilde, A * ab * bb)


def _score(field_name: str, fit: PreliminaryFit, abar: Weight, bbar: Weight, sample: Sample) -> np.ndarray:
    return getattr(score_triple(sample, fit, abar, bbar), field_name)


def score_functions(fit: PreliminaryFit, abar: Weight = 1.0, bbar: Weight = 1.0) -> ChainScores:
    """Весовые переменные цепи: Ã слева, Ā в середине, Ỹ справа."""
    return ChainScores(left=partial(_score, "a_tilde", fit, abar, bbar),
                       middle=partial(_score, "a_bar", fit, abar, bbar),
                       right=partial(_score, "y_tilde", fit, abar, bbar))


def lemma_residuals(fit: PreliminaryFit, model: TripletModel, projection, abar: Weight = 1.0,
                    bbar: Weight = 1.0, points: np.ndarray = None) -> Dict[str, float]:
    """
    Невязки тождеств условных средних в тильда-параметрах.

    a_tilde:  sup_z1 |E Π(z1, Z) Ã|,
    y_tilde:  sup_z3 |E Π(Z, z3) Ỹ|,
    collapse: sup |E Π(z1, Z) Ā Π(Z, z3) - Π(z1, z3)|.
    Ожидания берутся по истинной модели, для fit = (ã, b̃).

    Args:
        fit: Предварительные оценки (переводятся в тильда-параметры)
        model: Истинная модель
        projection: Проекция с весом ā b̄ g
        points: Тестовые точки (по умолчанию середины 16 ячеек)
    """
    d = model.d
    a_t, b_t = tilde_project(fit, model, projection, abar, bbar)
    if points is None:
        points = midpoints(d, 4 // d)
    rho = model.g * abar * bbar
    r_a = projection.apply_kernel((a_t - model.a) * bbar * model.g)
    r_y = projection.apply_kernel((model.b - b_t) * abar * model.g)
    rule = QuadratureRule(d, max(model.level, projection.resolution))
    K = projection.kernel_matrix(points, rule.points)
    collapse = (K * (rho(rule.points) * rule.volumes)) @ K.T - projection.kernel_matrix(points, points)
    return {"a_tilde": float(np.abs(r_a(points)).max()),
            "y_tilde": float(np.abs(r_y(points)).max()),
            "collapse": float(np.abs(collapse).max())}

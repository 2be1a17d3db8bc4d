"""
Модель пропусков MAR: наблюдение X = (YA, A, Z).

Истинное распределение задается тройкой (a, b, f): a = 1 / P(A=1 | Z) - обратная
склонность, b = E(Y | Z) - регрессия отклика, f - плотность ковариаты.
Все функции кусочно-постоянны на двоичных ячейках, поэтому интегралы точны.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from basis.cells import CellFunction
from basis.haar import synthesize
from basis.quadrature import QuadratureRule, integrate
from config import CLAMP_FILL, MIN_CLAMP_SCALE, MODEL_ETA, MODEL_LEVEL
from ustat.hoeffding import DiscreteMeasure
from utils.errors import DomainError
from utils.rng import SeedLike, as_generator, stream

logger = logging.getLogger(__name__)

Weight = Union[float, CellFunction]

BOUND_TOL = 1e-12


class Observation(NamedTuple):
    """Одно наблюдение: ковариата, индикатор A и YA."""
    z: np.ndarray
    a: int
    y: int


@dataclass(frozen=True, eq=False)
class Sample:
    """
    Выборка наблюдений в столбцовом виде.

    Attributes:
        z: Ковариаты, форма (n, d)
        a: Индикаторы наблюдения отклика
        y: Наблюдаемые YA (ноль при a = 0)
    """
    z: np.ndarray
    a: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        a = np.asarray(self.a, dtype=np.int64).reshape(-1)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if not (z.shape[0] == a.size == y.size):
            raise DomainError(f"Столбцы выборки разной длины: {z.shape[0]}, {a.size}, {y.size}")
        if np.any((a != 0) & (a != 1)) or np.any((y != 0) & (y != 1)):
            raise DomainError("Индикаторы A и YA должны принимать значения 0 и 1")
        if np.any(y > a):
            raise DomainError("YA = 1 при A = 0 невозможно")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.a.size

    def __getitem__(self, idx) -> "Sample":
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return Sample(self.z[idx], self.a[idx], self.y[idx])

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def observation(self, i: int) -> Observation:
        return Observation(self.z[i].copy(), int(self.a[i]), int(self.y[i]))

    def split(self, rng: np.random.Generator) -> Tuple["Sample", "Sample"]:
        """Случайное разбиение на две половины (первая не меньше второй)."""
        perm = rng.permutation(len(self))
        half = (len(self) + 1) // 2
        return self[np.sort(perm[:half])], self[np.sort(perm[half:])]

    def to_frame(self) -> pd.DataFrame:
        data = {f"z{t + 1}": self.z[:, t] for t in range(self.d)}
        data["a"] = self.a
        data["y"] = self.y
        return pd.DataFrame(data)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Sample":
        z_cols = [c for c in frame.columns if c.startswith("z")]
        if not z_cols or "a" not in frame.columns or "y" not in frame.columns:
            raise DomainError(f"Ожидались столбцы z1[,z2],a,y, получено {list(frame.columns)}")
        z_cols = sorted(z_cols, key=lambda c: int(c[1:]))
        return cls(frame[z_cols].to_numpy(dtype=float), frame["a"].to_numpy(), frame["y"].to_numpy())


@dataclass(frozen=True, eq=False)
class HolderFunction:
    """
    Функция с вейвлет-коэффициентами θ 2^{-s(α+d/2)} на масштабах s < level.

    Знаки θ = ±1 берутся из потока (seed, *keys); отцовский коэффициент равен нулю,
    так что интеграл функции равен нулю. При α = inf все коэффициенты нулевые.
    """
    alpha: float
    d: int
    level: int
    seed: int
    keys: Tuple[int, ...] = ()
    coefs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"Гладкость должна быть положительной: {self.alpha}")
        size = 1 << (self.level * self.d)
        coefs = np.zeros(size)
        if np.isfinite(self.alpha) and size > 1:
            theta = stream(self.seed, *self.keys).choice([-1.0, 1.0], size=size - 1)
            scales = np.zeros(size - 1)
            for s in range(self.level):
                scales[(1 << (s * self.d)) - 1:(1 << ((s + 1) * self.d)) - 1] = s
            coefs[1:] = theta * 2.0 ** (-scales * (self.alpha + self.d / 2.0))
        coefs.setflags(write=False)
        object.__setattr__(self, "coefs", coefs)

    def function(self) -> CellFunction:
        return synthesize(self.coefs, self.d)

    def unit_norm(self) -> CellFunction:
        """Функция, нормированная в L2; нулевая функция возвращается как есть."""
        fn = self.function()
        norm = fn.norm()
        return fn if norm == 0.0 else fn * (1.0 / norm)


def affine_clamp(shape: CellFunction, lo: float, hi: float, amplitude: float = 1.0) -> Tuple[CellFunction, float]:
    """
    Сжатие функции к середине полосы [lo, hi].

    Результат равен mid + λ shape, где λ = min(amplitude, CLAMP_FILL * halfwidth / sup|shape|).

    Returns:
        Функция и фактический множитель λ
    """
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    sup = shape.sup_norm()
    if sup == 0.0:
        return CellFunction.constant(shape.d, mid, shape.level), amplitude
    scale = min(amplitude, CLAMP_FILL * half / sup)
    if scale < MIN_CLAMP_SCALE * amplitude:
        raise DomainError(f"Сжатие в полосу [{lo:.3g}, {hi:.3g}] вырождает функцию в константу: λ={scale:.3g}")
    if scale < amplitude:
        logger.debug(f"Амплитуда сжата с {amplitude:.3g} до {scale:.3g}")
    return shape * scale + mid, scale


def a_bounds(eta: float) -> Tuple[float, float]:
    return 1.0 / (1.0 - eta), 1.0 / eta


def b_bounds(eta: float) -> Tuple[float, float]:
    return eta, 1.0 - eta


def f_bounds(eta: float) -> Tuple[float, float]:
    return eta, 1.0 / eta


def g_bounds(eta: float) -> Tuple[float, float]:
    return eta * eta, (1.0 - eta) / eta


def _check_band(name: str, fn: CellFunction, bounds: Tuple[float, float]) -> None:
    lo, hi = bounds
    if fn.min() < lo - BOUND_TOL or fn.max() > hi + BOUND_TOL:
        raise DomainError(f"Функция {name} вне полосы [{lo:.4g}, {hi:.4g}]: [{fn.min():.4g}, {fn.max():.4g}]")


@dataclass(frozen=True, eq=False)
class TripletModel:
    """
    Истинное распределение p <-> (a, b, f), g = f / a.

    При validate=True проверяются полосы значений и нормировка ∫ f = 1.
    """
    d: int
    a: CellFunction
    b: CellFunction
    f: CellFunction
    eta: float = MODEL_ETA
    validate: bool = True

    def __post_init__(self):
        for name, fn in (("a", self.a), ("b", self.b), ("f", self.f)):
            if fn.d != self.d:
                raise DomainError(f"Размерность {name} равна {fn.d}, ожидалось {self.d}")
        if not self.validate:
            return
        if not 0.0 < self.eta < 0.5:
            raise DomainError(f"Отступ η должен лежать в (0, 0.5): {self.eta}")
        _check_band("a", self.a, a_bounds(self.eta))
        _check_band("b", self.b, b_bounds(self.eta))
        _check_band("f", self.f, f_bounds(self.eta))
        mass = self.f.integral()
        if abs(mass - 1.0) > BOUND_TOL:
            raise DomainError(f"Плотность f не нормирована: ∫f = {mass:.15g}")

    @property
    def g(self) -> CellFunction:
        return self.f / self.a

    @property
    def propensity(self) -> CellFunction:
        return 1.0 / self.a

    @property
    def level(self) -> int:
        return max(self.a.level, self.b.level, self.f.level)

    def rule(self, level: int = None) -> QuadratureRule:
        return QuadratureRule(self.d, self.level if level is None else max(level, self.level))

    def observation_measure(self, rule: QuadratureRule = None) -> DiscreteMeasure:
        """
        Точный закон X = (YA, A, Z) с ковариатой, замененной серединами ячеек.

        Для каждой ячейки три исхода: (A=0, YA=0), (A=1, YA=0), (A=1, YA=1).
        """
        if rule is None:
            rule = self.rule()
        if rule.level < self.level:
            raise DomainError(f"Квадратура уровня {rule.level} грубее модели уровня {self.level}")
        pts = rule.points
        pi = self.propensity(pts)
        b = self.b(pts)
        mass = self.f(pts) * rule.volumes
        probs = np.stack([(1.0 - pi) * mass, pi * (1.0 - b) * mass, pi * b * mass], axis=1).reshape(-1)
        support = Sample(np.repeat(pts, 3, axis=0), np.tile([0, 1, 1], pts.shape[0]),
                         np.tile([0, 0, 1], pts.shape[0]))
        return DiscreteMeasure(support, probs)


def synthesize_model(seed: int, alpha: float, beta: float, gamma_f: float, d: int = 1,
                     eta: float = MODEL_ETA, level: int = MODEL_LEVEL, amplitude: float = 1.0) -> TripletModel:
    """
    Синтез истинной модели с заданной гладкостью.

    P(A=1 | Z) = 0.5 + λ_a h_a, b = 0.5 + λ_b h_b, f = 1 + λ_f h_f, где h - функции
    с гладкостью α, β, γ_f, сжатые в свои полосы.

    Args:
        seed: Зерно модели
        alpha: Гладкость a
        beta: Гладкость b
        gamma_f: Гладкость f
        d: Размерность
        eta: Отступ от границ, из (0.05, 0.4)
        level: Уровень дискретизации
        amplitude: Множитель функций до сжатия

    Returns:
        TripletModel
    """
    if not 0.05 < eta < 0.4:
        raise DomainError(f"Отступ η должен лежать в (0.05, 0.4): {eta}")
    h_a = HolderFunction(alpha, d, level, seed, (0,)).function()
    h_b = HolderFunction(beta, d, level, seed, (1,)).function()
    h_f = HolderFunction(gamma_f, d, level, seed, (2,)).function()
    pi, _ = affine_clamp(h_a, *b_bounds(eta), amplitude=amplitude)
    b, _ = affine_clamp(h_b, *b_bounds(eta), amplitude=amplitude)
    # Полоса для f симметрична относительно 1: [η, 2 - η] ⊆ [η, 1/η]
    f, _ = affine_clamp(h_f, eta, 2.0 - eta, amplitude=amplitude)
    f = f * (1.0 / f.integral())
    model = TripletModel(d, (1.0 / pi).refine(level), b.refine(level), f.refine(level), eta)
    logger.info(f"Синтезирована модель: α={alpha}, β={beta}, γ_f={gamma_f}, d={d}, уровень {level}")
    return model


def draw_sample(model: TripletModel, n: int, seed: SeedLike) -> Sample:
    """
    Точная выборка из модели.

    Z: ячейка с вероятностью f * объем, затем равномерно внутри ячейки;
    A ~ Bernoulli(1 / a(Z)), Y ~ Bernoulli(b(Z)), наблюдается YA.
    """
    if n < 1:
        raise DomainError(f"Объем выборки должен быть положительным: {n}")
    rng = as_generator(seed)
    level, d = model.level, model.d
    f = model.f.refine(level)
    probs = f.values * f.volume
    cells = rng.choice(probs.size, size=n, p=probs / probs.sum())
    coords = np.stack(np.unravel_index(cells, (1 << level,) * d), axis=1)
    z = (coords + rng.random((n, d))) / (1 << level)
    z = np.minimum(z, np.nextafter(1.0, 0.0))
    a = (rng.random(n) < model.propensity(z)).astype(np.int64)
    y = (rng.random(n) < model.b(z)).astype(np.int64) * a
    return Sample(z, a, y)


def truth(model: TripletModel, rule: QuadratureRule = None) -> float:
    """χ(p) = ∫ a b g dν = ∫ b f dν."""
    return integrate(model.b * model.f, rule or model.rule())


def projection_weight(abar: Weight, bbar: Weight, density: CellFunction) -> CellFunction:
    """Вес проекций ā b̄ g (или ā b̄ ĝ)."""
    return density * abar * bbar


def first_order_bias(fit, model: TripletModel, rule: QuadratureRule = None) -> float:
    """Условное смещение оценки первого порядка: -∫ (â - a)(b̂ - b) g dν."""
    rule = rule or model.rule(max(fit.a_hat.level, fit.b_hat.level))
    return -integrate((fit.a_hat - model.a) * (fit.b_hat - model.b) * model.g, rule)


def weight_at(w: Optional[Weight], z) -> np.ndarray:
    """Значения весовой функции (числа или CellFunction) в точках."""
    if w is None:
        w = 1.0
    if isinstance(w, CellFunction):
        return w(z)
    return np.full(np.asarray(z).shape[0], float(w))


def constant_model(d: int = 1, eta: float = MODEL_ETA, level: int = 0) -> TripletModel:
    """Модель с a = 2, b = 0.5, f = 1."""
    return TripletModel(d, CellFunction.constant(d, 2.0, level), CellFunction.constant(d, 0.5, level),
                        CellFunction.constant(d, 1.0, level), eta)


__all__ = [
    "Observation", "Sample", "HolderFunction", "TripletModel", "affine_clamp",
    "synthesize_model", "draw_sample", "truth", "projection_weight", "first_order_bias",
    "weight_at", "constant_model",
]

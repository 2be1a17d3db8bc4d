"""
Монте-Карло эксперименты: конфигурация, прогон повторений, запись и сводка результатов.
"""
import asyncio
import hashlib
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from basis.grid import ceil_admissible, default_k, grid_build, round_admissible
from config import (
    CSV_FLOAT_FORMAT, DEFAULT_SEED, MIN_RATE_REPLICATIONS, MODEL_ETA, MODEL_LEVEL, RNG_ALGORITHM,
    SCHEMA_VERSION, WORKERS,
)
from estimators.influence import EstimatorConfig
from estimators.pipeline import estimate, estimate_cross_fit
from models.mar import Sample, TripletModel, draw_sample, synthesize_model
from models.preliminary import PreliminaryFit, make_preliminary
from utils.errors import ConfigError, HoifError
from utils.rng import stream

logger = logging.getLogger(__name__)

COLUMNS = ["n", "estimator", "m", "k", "D", "replication", "estimate", "truth", "error",
           "term_1", "term_2", "term_3", "term_4", "predicted_bias"]


def _smoothness(v):
    if v is None or (isinstance(v, str) and v.lower() in ("inf", "infinity")):
        return math.inf
    return v


class ModelSpec(BaseModel):
    """Параметры истинной модели; гладкость inf задается строкой "inf"."""
    seed: int = Field(default=1, ge=0)
    alpha: float = Field(gt=0)
    beta: float = Field(gt=0)
    gamma_f: float = Field(default=math.inf, gt=0)
    d: int = Field(default=1, ge=1, le=2)
    eta: float = Field(default=MODEL_ETA, gt=0.05, lt=0.4)
    level: int = Field(default=MODEL_LEVEL, ge=0)
    amplitude: float = Field(default=1.0, gt=0)

    @field_validator("alpha", "beta", "gamma_f", mode="before")
    @classmethod
    def _infinite(cls, v):
        return _smoothness(v)

    @property
    def gamma_eff(self) -> float:
        """Гладкость g = f / a не выше гладкости a."""
        return min(self.gamma_f, self.alpha)

    def build(self) -> TripletModel:
        return _cached_model(self.model_dump_json())


@lru_cache(maxsize=8)
def _cached_model(spec_json: str) -> TripletModel:
    spec = ModelSpec.model_validate_json(spec_json)
    return synthesize_model(spec.seed, spec.alpha, spec.beta, spec.gamma_f, spec.d, spec.eta,
                            spec.level, spec.amplitude)


class PreliminarySpec(BaseModel):
    """Способ построения предварительных оценок."""
    mode: Literal["synthetic", "fitted", "truth"] = "synthetic"
    constants: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    gamma: Optional[float] = None
    direction: Literal["independent", "aligned"] = "independent"
    seed: int = Field(default=0, ge=0)
    n_aux: Optional[int] = Field(default=None, ge=1)

    @field_validator("gamma", mode="before")
    @classmethod
    def _infinite(cls, v):
        return v if v is None else _smoothness(v)


class EstimatorSpec(BaseModel):
    """
    Оценщик эксперимента.

    k задается явно, степенью объема выборки (k = n^k_power) или по правилу n^{2d/(2α+2β+d)}.
    """
    name: str = ""
    order: int = Field(default=1, ge=1, le=4)
    k: Optional[int] = Field(default=None, ge=0)
    k_power: Optional[float] = Field(default=None, ge=0)
    truncated: bool = False
    D: Optional[int] = Field(default=None, ge=0)
    gram: Literal["known", "estimated"] = "estimated"
    engine: Literal["cells", "dense"] = "cells"
    cross_fit: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.truncated and self.order < 3:
            raise ValueError("Усеченный оценщик определен для порядков m >= 3")
        if not self.name:
            self.name = f"m{self.order}{'t' if self.truncated else ''}{'x' if self.cross_fit else ''}"
        return self

    def build(self, n: int, model: ModelSpec) -> EstimatorConfig:
        d = model.d
        if self.order == 1:
            return EstimatorConfig(order=1, name=self.name, cross_fit=self.cross_fit)
        if self.k is not None:
            k = self.k
        elif self.k_power is not None:
            k = round_admissible(float(n) ** self.k_power, d)
        else:
            k = max(default_k(n, model.alpha, model.beta, d), ceil_admissible(n, d))
        grid = None
        if self.truncated:
            grid = grid_build(n, k, model.alpha, model.beta, d, self.D, default_cutoff=self.D is None)
            k = grid.k
        return EstimatorConfig(order=self.order, k=k, truncated=self.truncated, grid=grid, gram=self.gram,
                               engine=self.engine, cross_fit=self.cross_fit, name=self.name)


class ExperimentConfig(BaseModel):
    schema_version: int = SCHEMA_VERSION
    model: ModelSpec
    preliminary: PreliminarySpec = Field(default_factory=PreliminarySpec)
    estimators: List[EstimatorSpec] = Field(min_length=1)
    n_grid: List[int] = Field(min_length=1)
    replications: int = Field(ge=1)
    rate_run: bool = False
    base_seed: int = Field(default=DEFAULT_SEED, ge=0)
    output: Optional[str] = None

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"Неподдерживаемая версия схемы: {v}")
        return v

    @field_validator("n_grid")
    @classmethod
    def _increasing(cls, v):
        if any(n < 2 for n in v):
            raise ValueError("Объемы выборок должны быть не меньше 2")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"Сетка объемов должна строго возрастать: {v}")
        return v

    @model_validator(mode="after")
    def _rate_replications(self):
        if self.rate_run and self.replications < MIN_RATE_REPLICATIONS:
            raise ValueError(f"Для оценки скорости нужно не меньше {MIN_RATE_REPLICATIONS} повторений")
        if self.preliminary.mode != "fitted" and any(e.cross_fit for e in self.estimators):
            raise ValueError("Обмен половин выборки требует режима fitted")
        return self

    def digest(self) -> str:
        payload = self.model_dump_json(exclude={"output"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def load_config(path: str) -> ExperimentConfig:
    """Чтение конфигурации эксперимента из JSON."""
    if not os.path.exists(path):
        raise ConfigError(f"Файл конфигурации не найден: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"Некорректная конфигурация {path}: {str(e)}")


@dataclass
class ResultRow:
    n: int
    estimator: str
    m: int
    k: int
    D: int
    replication: int
    estimate: float
    truth: float
    error: float
    term_1: float
    term_2: float
    term_3: float
    term_4: float
    predicted_bias: float
    wall_time: float = 0.0


@lru_cache(maxsize=64)
def _synthetic_fit(config_json: str, n: int) -> PreliminaryFit:
    config = ExperimentConfig.model_validate_json(config_json)
    spec, prelim = config.model, config.preliminary
    gamma = spec.gamma_eff if prelim.gamma is None else prelim.gamma
    return make_preliminary("synthetic", spec.build(), n, spec.alpha, spec.beta, gamma,
                            prelim.seed, prelim.constants, prelim.direction)


def _fit_for(config: ExperimentConfig, config_json: str, model: TripletModel, i: int, n: int, r: int):
    prelim, spec = config.preliminary, config.model
    if prelim.mode == "truth":
        return PreliminaryFit.from_model(model)
    if prelim.mode == "synthetic":
        return _synthetic_fit(config_json, n)
    gamma = spec.gamma_eff if prelim.gamma is None else prelim.gamma
    return make_preliminary("fitted", model, prelim.n_aux or n, spec.alpha, spec.beta, gamma,
                            stream(config.base_seed, i, r, 1))


def replicate(config_json: str, i: int, r: int) -> List[ResultRow]:
    """
    Одно повторение: выборка из потока (base_seed, i, r) и все оценщики.

    Функция чистая при фиксированной конфигурации, поэтому ее можно выполнять
    в отдельных процессах в любом порядке.
    """
    config = ExperimentConfig.model_validate_json(config_json)
    spec, prelim = config.model, config.preliminary
    n = config.n_grid[i]
    model = spec.build()
    sample = draw_sample(model, n, stream(config.base_seed, i, r))
    fit = None if all(e.cross_fit for e in config.estimators) else _fit_for(config, config_json, model, i, n, r)
    gamma = spec.gamma_eff if prelim.gamma is None else prelim.gamma
    rows = []
    for est in config.estimators:
        est_config = est.build(n, spec)
        started = time.perf_counter()
        if est.cross_fit:
            def builder(half: Sample) -> PreliminaryFit:
                return make_preliminary("fitted", model, len(half), spec.alpha, spec.beta, gamma, sample=half)
            report = estimate_cross_fit(sample, est_config, builder, model)
        else:
            report = estimate(sample, fit, est_config, model)
        elapsed = time.perf_counter() - started
        truth_value = report.diagnostics["truth"]
        rows.append(ResultRow(
            n=n, estimator=est.name, m=est_config.order, k=est_config.k,
            D=-1 if est_config.grid is None else int(est_config.grid.D),
            replication=r, estimate=report.value, truth=truth_value, error=report.value - truth_value,
            term_1=report.term(1), term_2=report.term(2), term_3=report.term(3), term_4=report.term(4),
            predicted_bias=report.diagnostics.get("predicted_bias", float("nan")), wall_time=elapsed,
        ))
    return rows


def _tasks(config: ExperimentConfig) -> List[Tuple[int, int]]:
    return [(i, r) for i in range(len(config.n_grid)) for r in range(config.replications)]


def _to_frame(config: ExperimentConfig, results: List[List[ResultRow]]) -> pd.DataFrame:
    order = {e.name: idx for idx, e in enumerate(config.estimators)}
    rows = [asdict(row) for batch in results for row in batch]
    frame = pd.DataFrame(rows, columns=COLUMNS + ["wall_time"])
    frame["_est"] = frame["estimator"].map(order)
    frame = frame.sort_values(["n", "_est", "replication"], kind="stable").drop(columns="_est")
    return frame.reset_index(drop=True)


async def run_experiment_async(config: ExperimentConfig, workers: int = WORKERS) -> pd.DataFrame:
    """
    Прогон эксперимента в пуле процессов.

    Результаты собираются в порядке постановки задач, поэтому таблица
    не зависит от числа процессов.
    """
    config_json = config.model_dump_json()
    tasks = _tasks(config)
    logger.info(f"Эксперимент: {len(tasks)} повторений, {len(config.estimators)} оценщиков, {workers} процессов")
    if workers <= 1:
        results = [replicate(config_json, i, r) for i, r in tasks]
    else:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [loop.run_in_executor(pool, replicate, config_json, i, r) for i, r in tasks]
            results = await asyncio.gather(*futures)
    return _to_frame(config, list(results))


def run_experiment(config: ExperimentConfig, workers: int = WORKERS, out: str = None) -> pd.DataFrame:
    """
    Прогон эксперимента и запись результатов.

    Args:
        config: Конфигурация
        workers: Число процессов (1 - без пула)
        out: Путь к CSV (по умолчанию config.output; None - без записи)

    Returns:
        Таблица строк результатов
    """
    frame = asyncio.run(run_experiment_async(config, workers))
    out = out or config.output
    if out:
        write_results(frame, out, config)
        write_summary(summarize(frame), out)
    return frame


def _header(config: ExperimentConfig) -> List[str]:
    return [
        f"# hoif results schema_version={SCHEMA_VERSION}",
        f"# rng={RNG_ALGORITHM} base_seed={config.base_seed}",
        f"# config_sha256={config.digest()}",
    ]


def write_results(frame: pd.DataFrame, path: str, config: ExperimentConfig) -> None:
    """
    CSV с заголовком из строк '#', фиксированным порядком столбцов и 17 значащими цифрами.

    Время выполнения пишется в отдельный файл <path>.timing.csv, чтобы основной
    файл был побайтно воспроизводим.
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(_header(config)) + "\n")
            frame.to_csv(fh, index=False, columns=COLUMNS, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        if "wall_time" in frame.columns:
            frame[["n", "estimator", "replication", "wall_time"]].to_csv(
                f"{path}.timing.csv", index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ConfigError(f"Не удалось записать результаты в {path}: {str(e)}")
    logger.info(f"Записано {len(frame)} строк в {path}")


def read_results(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise ConfigError(f"Файл результатов не найден: {path}")
    return pd.read_csv(path, comment="#")


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Сводка по ячейкам (n, оценщик): смещение, SD, RMSE и их стандартные ошибки.

    SE смещения - SD/√R, SE для SD - SD/√(2(R-1)), SE для RMSE - по дельта-методу
    из дисперсии квадратов ошибок.
    """
    def cell(group: pd.DataFrame) -> pd.Series:
        e = group["error"].to_numpy(dtype=float)
        R = e.size
        sd = float(np.std(e, ddof=1)) if R > 1 else float("nan")
        rmse = float(np.sqrt(np.mean(e ** 2)))
        sq_sd = float(np.std(e ** 2, ddof=1)) if R > 1 else float("nan")
        return pd.Series({
            "m": int(group["m"].iloc[0]), "k": int(group["k"].iloc[0]), "D": int(group["D"].iloc[0]),
            "replications": R,
            "bias": float(np.mean(e)), "se_bias": sd / math.sqrt(R),
            "sd": sd, "se_sd": sd / math.sqrt(2.0 * (R - 1)) if R > 1 else float("nan"),
            "rmse": rmse, "se_rmse": sq_sd / (2.0 * rmse * math.sqrt(R)) if rmse > 0 else float("nan"),
            "predicted_bias": float(group["predicted_bias"].mean()),
        })

    keys = ["n", "estimator"]
    rows = []
    for (n, name), group in frame.groupby(keys, sort=False):
        rows.append(pd.concat([pd.Series({"n": n, "estimator": name}), cell(group)]))
    return pd.DataFrame(rows).reset_index(drop=True)


def write_summary(summary: pd.DataFrame, path: str) -> None:
    """Сводка в CSV и в файл для gnuplot (столбцы через пробел, заголовок за '#')."""
    summary.to_csv(f"{path}.summary.csv", index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    with open(f"{path}.summary.dat", "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + " ".join(summary.columns) + "\n")
        summary.to_csv(fh, sep=" ", header=False, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


__all__ = [
    "ModelSpec", "PreliminarySpec", "EstimatorSpec", "ExperimentConfig", "ResultRow", "COLUMNS",
    "load_config", "replicate", "run_experiment", "run_experiment_async", "write_results",
    "read_results", "summarize", "write_summary", "HoifError",
]

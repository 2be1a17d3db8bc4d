"""
Обмен данными: выборка в CSV (z1[,z2],a,y), модель и предварительные оценки в JSON.
"""
import logging
import os
from typing import Any, Dict, List, Literal

import pandas as pd
from pydantic import BaseModel, Field, field_validator

from basis.cells import CellFunction
from config import CSV_FLOAT_FORMAT, MODEL_ETA, SCHEMA_VERSION
from models.mar import Sample, TripletModel
from models.preliminary import PreliminaryFit
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


class CellFunctionSchema(BaseModel):
    """Значения кусочно-постоянной функции на ячейках одного уровня."""
    d: int = Field(ge=1, le=2)
    level: int = Field(ge=0)
    values: List[float]

    @classmethod
    def of(cls, fn: CellFunction) -> "CellFunctionSchema":
        return cls(d=fn.d, level=fn.level, values=fn.values.tolist())

    def build(self) -> CellFunction:
        return CellFunction(self.d, self.level, self.values)


class TripletModelSchema(BaseModel):
    schema_version: int = SCHEMA_VERSION
    d: int = Field(ge=1, le=2)
    eta: float = MODEL_ETA
    a: CellFunctionSchema
    b: CellFunctionSchema
    f: CellFunctionSchema
    meta: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"Неподдерживаемая версия схемы: {v}")
        return v


class PreliminaryFitSchema(BaseModel):
    schema_version: int = SCHEMA_VERSION
    mode: Literal["synthetic", "fitted"] = "synthetic"
    eta: float = MODEL_ETA
    a_hat: CellFunctionSchema
    b_hat: CellFunctionSchema
    g_hat: CellFunctionSchema
    meta: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"Неподдерживаемая версия схемы: {v}")
        return v


def write_sample(sample: Sample, path: str) -> None:
    sample.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Выборка из {len(sample)} наблюдений записана в {path}")


def read_sample(path: str) -> Sample:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise ConfigError(f"Не удалось прочитать выборку {path}: {str(e)}")
    return Sample.from_frame(frame)


def model_to_json(model: TripletModel, **meta) -> str:
    schema = TripletModelSchema(d=model.d, eta=model.eta, a=CellFunctionSchema.of(model.a),
                                b=CellFunctionSchema.of(model.b), f=CellFunctionSchema.of(model.f), meta=meta)
    return schema.model_dump_json(indent=2)


def model_from_json(text: str) -> TripletModel:
    try:
        schema = TripletModelSchema.model_validate_json(text)
    except ValueError as e:
        raise ConfigError(f"Некорректное описание модели: {str(e)}")
    return TripletModel(schema.d, schema.a.build(), schema.b.build(), schema.f.build(), schema.eta)


def fit_to_json(fit: PreliminaryFit) -> str:
    schema = PreliminaryFitSchema(mode=fit.mode, eta=fit.eta, a_hat=CellFunctionSchema.of(fit.a_hat),
                                  b_hat=CellFunctionSchema.of(fit.b_hat), g_hat=CellFunctionSchema.of(fit.g_hat),
                                  meta=fit.meta)
    return schema.model_dump_json(indent=2)


def fit_from_json(text: str) -> PreliminaryFit:
    try:
        schema = PreliminaryFitSchema.model_validate_json(text)
    except ValueError as e:
        raise ConfigError(f"Некорректное описание предварительных оценок: {str(e)}")
    return PreliminaryFit(schema.a_hat.build(), schema.b_hat.build(), schema.g_hat.build(),
                          schema.mode, schema.eta, dict(schema.meta))


def _read_text(path: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"Файл не найден: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def save_model(model: TripletModel, path: str, **meta) -> None:
    _write_text(path, model_to_json(model, **meta))


def load_model(path: str) -> TripletModel:
    return model_from_json(_read_text(path))


def save_fit(fit: PreliminaryFit, path: str) -> None:
    _write_text(path, fit_to_json(fit))


def load_fit(path: str) -> PreliminaryFit:
    return fit_from_json(_read_text(path))

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class EstimateReport:
    """
    Результат оценивания.

    Attributes:
        linear: Линейный член P_n[A â (Y - b̂) + b̂]
        terms: Члены порядков j >= 2 (уже деленные на j!)
        diagnostics: Предсказанное условное смещение и прочие величины из квадратур
        config: Параметры оценщика
    """
    linear: float
    terms: Dict[int, float] = field(default_factory=dict)
    diagnostics: Dict[str, float] = field(default_factory=dict)
    config: Dict[str, object] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def value(self) -> float:
        return self.linear + sum(self.terms[j] for j in sorted(self.terms))

    @property
    def order(self) -> int:
        return max(self.terms, default=1)

    def term(self, j: int) -> float:
        if j == 1:
            return self.linear
        return self.terms.get(j, 0.0)

    def truncate(self, m: int) -> "EstimateReport":
        """Отчет оценщика меньшего порядка: члены выше m отбрасываются."""
        return EstimateReport(self.linear, {j: t for j, t in self.terms.items() if j <= m},
                              dict(self.diagnostics), dict(self.config, order=m), self.seed)

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["value"] = self.value
        return out

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

from models.config import METHODS


class SlotValue(NamedTuple):
    sentence_id: int
    slot: str
    value: str


@dataclass(frozen=True)
class PrfScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other: "PrfScore") -> "PrfScore":
        return PrfScore(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
        }


@dataclass
class RunRecord:
    method: str
    fraction: float
    repeat: int
    score: PrfScore
    per_slot: Dict[str, PrfScore] = field(default_factory=dict)

    @property
    def key(self) -> Tuple[int, float, int]:
        return (METHODS.index(self.method), self.fraction, self.repeat)


@dataclass
class SummaryRow:
    method: str
    fraction: float
    runs: int
    precision: float
    recall: float
    f1: float


@dataclass
class ExperimentReport:
    runs: List[RunRecord] = field(default_factory=list)
    seed: int = 0
    test_size: int = 0

    def add(self, record: RunRecord):
        self.runs.append(record)
        self.runs.sort(key=lambda r: r.key)

    def summary(self) -> List[SummaryRow]:
        """Médias aritméticas por (método, fração) dos valores por execução"""
        groups: Dict[Tuple[str, float], List[RunRecord]] = {}
        for run in self.runs:
            groups.setdefault((run.method, run.fraction), []).append(run)
        rows = []
        for (method, fraction), runs in groups.items():
            n = len(runs)
            rows.append(SummaryRow(
                method, fraction, n,
                sum(r.score.precision for r in runs) / n,
                sum(r.score.recall for r in runs) / n,
                sum(r.score.f1 for r in runs) / n,
            ))
        return rows

    def mean_f1(self, method: str, fraction: float) -> float:
        for row in self.summary():
            if row.method == method and row.fraction == fraction:
                return row.f1
        raise KeyError((method, fraction))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_size": self.test_size,
            "runs": [
                {"method": r.method, "fraction": r.fraction, "repeat": r.repeat, **r.score.to_dict()}
                for r in self.runs
            ],
            "summary": [row.__dict__.copy() for row in self.summary()],
        }

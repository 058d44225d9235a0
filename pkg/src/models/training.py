from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from errors import ContractError
from models.crf_model import CrfModel


@dataclass
class RoundReport:
    outer_index: int
    objective: float
    changed_fraction: float
    timings: Dict[str, float] = field(default_factory=dict)

    def record(self, method: str) -> str:
        """Linha key=value para o log de rodadas"""
        stages = " ".join(f"t_{name}={seconds:.3f}s" for name, seconds in self.timings.items())
        return (
            f"{method} round={self.outer_index} objective={self.objective:.10g} "
            f"changed={self.changed_fraction:.6f} {stages}"
        ).rstrip()


@dataclass
class IterationState:
    """Λ_n e os rótulos decodificados do conjunto não rotulado na rodada n"""
    model: CrfModel
    decoded_unlabeled: List[Tuple[int, ...]]
    outer_index: int
    report: RoundReport

    def check_lengths(self, lengths: List[int]):
        if [len(d) for d in self.decoded_unlabeled] != list(lengths):
            raise ContractError(f"rodada {self.outer_index}: rótulos decodificados não batem com as sentenças")

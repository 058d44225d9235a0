"""L-BFGS em lote para as funções objetivo supervisionada e mista (rotulado + decodificado)."""
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import ContractError, NumericalError
from models.config import OptimizerConfig
from models.corpus import AlignedSentence
from models.crf_model import CrfModel
from services.crf import batch_objective, encode, extend_model

logger = logging.getLogger(__name__)

ValueAndGradient = Callable[[np.ndarray], Tuple[float, np.ndarray]]

_CURVATURE_EPS = 1e-10


@dataclass
class LbfgsResult:
    x: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    line_search_failed: bool = False
    stalled: bool = False
    trace: List[float] = field(default_factory=list)


def _check_finite(value: float, gradient: np.ndarray, iteration: int):
    if not math.isfinite(value) or not np.all(np.isfinite(gradient)):
        raise NumericalError(f"NaN/Inf na avaliação da função objetivo (iteração {iteration})")


def _two_loop(gradient: np.ndarray, pairs) -> np.ndarray:
    q = gradient.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= s.dot(y) / y.dot(y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return -q


def lbfgs(fun: ValueAndGradient, x0: np.ndarray, config: OptimizerConfig = OptimizerConfig()) -> LbfgsResult:
    """Minimiza fun a partir de x0; passos aceitos nunca aumentam o valor.

    Para quando |g|∞ <= grad_tolerance ou quando o valor cai menos que
    stall_delta (relativo) ao longo de stall_period iterações."""
    x = np.array(x0, dtype=np.float64)
    value, gradient = fun(x)
    _check_finite(value, gradient, 0)
    pairs = deque(maxlen=config.memory)
    trace = [float(value)]
    line_search_failed = False
    stalled = False
    iteration = 0

    while True:
        grad_norm = float(np.max(np.abs(gradient))) if gradient.size else 0.0
        if grad_norm <= config.grad_tolerance:
            break
        if iteration >= config.max_iterations:
            break
        iteration += 1

        direction = _two_loop(gradient, pairs)
        if float(gradient.dot(direction)) >= 0:
            pairs.clear()
            direction = -gradient
        if not pairs:
            # sem curvatura ainda: passo unitário mede no máximo 1 em norma
            direction = direction / max(1.0, float(np.linalg.norm(direction)))
        slope = float(gradient.dot(direction))

        step = 1.0
        accepted = False
        for _ in range(config.max_line_search_steps):
            candidate = x + step * direction
            new_value, new_gradient = fun(candidate)
            _check_finite(new_value, new_gradient, iteration)
            if new_value <= value + config.armijo_c1 * step * slope:
                accepted = True
                break
            step *= config.backtrack_shrink

        if not accepted:
            line_search_failed = True
            logger.warning(f"⚠️ Busca linear falhou na iteração {iteration}; mantendo o melhor ponto")
            break

        s = candidate - x
        y = new_gradient - gradient
        sy = float(s.dot(y))
        if sy > _CURVATURE_EPS:
            pairs.append((s, y, 1.0 / sy))
        x, value, gradient = candidate, new_value, new_gradient
        trace.append(float(value))
        logger.debug(
            f"lbfgs iteration={iteration} objective={value:.10g} "
            f"grad_inf={float(np.max(np.abs(gradient))):.3e} step={step:.3g}"
        )
        if config.stall_delta > 0 and len(trace) > config.stall_period:
            earlier = trace[-1 - config.stall_period]
            if (earlier - value) / max(abs(value), 1.0) < config.stall_delta:
                stalled = True
                break

    grad_norm = float(np.max(np.abs(gradient))) if gradient.size else 0.0
    return LbfgsResult(
        x=x,
        value=float(value),
        gradient_norm=grad_norm,
        iterations=iteration,
        converged=grad_norm <= config.grad_tolerance or stalled,
        line_search_failed=line_search_failed,
        stalled=stalled,
        trace=trace,
    )


@dataclass
class TrainingObjective:
    """NLL rotulada + eta * NLL do não rotulado decodificado + gamma * ||Λ||²"""
    labeled: Sequence[AlignedSentence]
    unlabeled_decoded: Sequence[AlignedSentence] = ()
    gamma: float = 0.01
    eta: float = 0.1

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.eta)) or self.gamma < 0 or self.eta < 0:
            raise ContractError(f"gamma e eta devem ser finitos e >= 0 (gamma={self.gamma}, eta={self.eta})")
        if any(not s.is_labeled for s in self.labeled):
            raise ContractError("sentenças rotuladas sem rótulos na função objetivo")
        if any(not s.is_labeled for s in self.unlabeled_decoded):
            raise ContractError("sentenças não rotuladas precisam dos rótulos decodificados")

    @property
    def sentences(self) -> List[AlignedSentence]:
        return list(self.labeled) + list(self.unlabeled_decoded)

    def bind(self, model: CrfModel) -> ValueAndGradient:
        """Codifica os lotes uma vez e devolve w -> (valor, gradiente)"""
        parts = []
        if self.labeled:
            parts.append((encode(self.labeled, model), [s.labels for s in self.labeled], 1.0))
        if self.unlabeled_decoded and self.eta > 0:
            parts.append(
                (encode(self.unlabeled_decoded, model), [s.labels for s in self.unlabeled_decoded], self.eta)
            )
        gamma = self.gamma

        def fun(weights: np.ndarray) -> Tuple[float, np.ndarray]:
            current = model.with_weights(weights)
            value = gamma * float(weights.dot(weights))
            gradient = 2.0 * gamma * weights
            for batch, labels, weight in parts:
                v, g = batch_objective(batch, labels, current, weight)
                value += v
                gradient = gradient + g
            return value, gradient

        return fun

    def value(self, model: CrfModel) -> float:
        return self.bind(model)(model.weights)[0]


def fit(
    objective: TrainingObjective, initial: CrfModel, config: OptimizerConfig = OptimizerConfig()
) -> Tuple[CrfModel, LbfgsResult]:
    model = extend_model(initial, objective.sentences)
    result = lbfgs(objective.bind(model), model.weights, config)
    logger.info(
        f"✅ L-BFGS: {result.iterations} iterações, objetivo {result.value:.6g}, "
        f"|g|∞ {result.gradient_norm:.2e}{' (estagnado)' if result.stalled else ''}"
        f"{' (busca linear falhou)' if result.line_search_failed else ''}"
    )
    return model.with_weights(result.x), result


def minimize(
    objective: TrainingObjective, initial: CrfModel, config: Optional[OptimizerConfig] = None
) -> CrfModel:
    return fit(objective, initial, config or OptimizerConfig())[0]

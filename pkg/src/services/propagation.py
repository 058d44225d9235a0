"""Propagação de rótulos por Modified Adsorption sobre o grafo de trigramas.

Iteração de Jacobi das equações normais do objetivo quadrático
  μ1 Σ s_v ||Y_v - Ŷ_v||² + μ2 tr(ŶᵀLŶ) + μ3 ||Ŷ - R||²
com L o Laplaciano não normalizado. Cada varredura lê um Ŷ congelado e escreve
um buffer novo; a normalização só acontece na leitura final.
"""
import logging
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from errors import ContractError, NumericalError
from models.config import MadConfig
from models.graph import NodeDistributions, TrigramGraph

logger = logging.getLogger(__name__)

SweepCallback = Callable[[int, np.ndarray, float], None]
Distributions = Union[np.ndarray, Mapping[int, np.ndarray]]


def uniform_distribution(n_labels: int) -> np.ndarray:
    return np.full(n_labels, 1.0 / n_labels)


def _rows(values: Distributions, n_nodes: int, n_labels: int, what: str, required=None) -> tuple:
    table = np.zeros((n_nodes, n_labels))
    present = np.zeros(n_nodes, dtype=bool)
    items = enumerate(values) if isinstance(values, np.ndarray) else values.items()
    for node_id, row in items:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (n_labels,):
            raise ContractError(f"{what} do nó {node_id} com {row.shape[0]} rótulos, esperados {n_labels}")
        table[node_id] = row
        present[node_id] = True
    if required is not None:
        missing = np.flatnonzero(required & ~present)
        if missing.size:
            raise ContractError(f"{what} ausente para os nós {missing[:5].tolist()}")
    return table, present


def seed_graph(
    graph: TrigramGraph,
    averaged_marginals: Distributions,
    empirical: Distributions,
    uniform_prior: Sequence[float],
) -> NodeDistributions:
    """Y = q em todos os nós; R = r nos nós rotulados e o prior uniforme nos demais; Ŷ começa em Y"""
    n = len(graph)
    prior_row = np.asarray(uniform_prior, dtype=np.float64)
    L = prior_row.shape[0]
    every = np.ones(n, dtype=bool)
    labeled = np.array([node.is_labeled for node in graph.nodes], dtype=bool)

    seed, _ = _rows(averaged_marginals, n, L, "q", required=every)
    r_table, has_r = _rows(empirical, n, L, "r", required=labeled)
    prior = np.where(has_r[:, None], r_table, prior_row[None, :])
    return NodeDistributions(seed=seed, prior=prior, current=seed.copy(), seeded=every)


def _terms(graph: TrigramGraph, dist: NodeDistributions, config: MadConfig):
    s = dist.seeded.astype(np.float64)
    fixed = config.mu1 * s[:, None] * dist.seed + config.mu3 * dist.prior
    denominator = config.mu1 * s + config.mu2 * graph.degrees + config.mu3
    return fixed, denominator


def objective_value(graph: TrigramGraph, dist: NodeDistributions, config: MadConfig) -> float:
    current = dist.current
    s = dist.seeded.astype(np.float64)
    seed_term = float(np.sum(s[:, None] * (dist.seed - current) ** 2))
    smooth_term = float(np.sum(current * (graph.laplacian() @ current))) if len(graph) else 0.0
    prior_term = float(np.sum((current - dist.prior) ** 2))
    return config.mu1 * seed_term + config.mu2 * smooth_term + config.mu3 * prior_term


def read_out(current: np.ndarray) -> np.ndarray:
    totals = current.sum(axis=1, keepdims=True)
    L = current.shape[1]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, current / safe, 1.0 / L)


def propagate(
    graph: TrigramGraph,
    distributions: NodeDistributions,
    config: MadConfig = MadConfig(),
    on_sweep: Optional[SweepCallback] = None,
) -> np.ndarray:
    """q̂ por nó, linhas normalizadas"""
    if distributions.n_nodes != len(graph):
        raise ContractError(f"{distributions.n_nodes} distribuições para {len(graph)} nós")
    if len(graph) == 0:
        return np.zeros((0, distributions.n_labels))

    fixed, denominator = _terms(graph, distributions, config)
    active = denominator > 0
    current = distributions.current.copy()
    trace = logger.isEnabledFor(logging.DEBUG)

    for sweep in range(1, config.max_sweeps + 1):
        numerator = fixed + config.mu2 * (graph.weights @ current)
        updated = np.where(active[:, None], numerator / np.where(active, denominator, 1.0)[:, None], current)
        if not np.all(np.isfinite(updated)):
            raise NumericalError(f"propagação divergiu na varredura {sweep}")
        delta = float(np.max(np.abs(updated - current)))
        current = updated
        if on_sweep is not None:
            on_sweep(sweep, current, delta)
        if trace:
            objective = objective_value(graph, distributions.with_current(current), config)
            logger.debug(f"mad sweep={sweep} objective={objective:.10g} delta={delta:.3e}")
        if delta < config.convergence_eps:
            break

    return read_out(current)

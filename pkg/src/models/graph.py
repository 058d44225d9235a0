from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from errors import ContractError


class TrigramKey(NamedTuple):
    w1: str
    w2: str
    w3: str

    def __str__(self):
        return f"{self.w1} {self.w2} {self.w3}"


@dataclass
class TrigramNode:
    key: TrigramKey
    occurrences: List[Tuple[int, int]] = field(default_factory=list)
    is_labeled: bool = False

    @property
    def count(self) -> int:
        return len(self.occurrences)


@dataclass
class PmiTable:
    """Vetores PMI esparsos, uma linha por nó, colunas no vocabulário de features de contexto"""
    matrix: sp.csr_matrix
    features: List[str]

    def vector(self, node_id: int) -> Dict[str, float]:
        row = self.matrix.getrow(node_id)
        return {self.features[j]: float(v) for j, v in zip(row.indices, row.data)}


class TrigramGraph:
    """Grafo k-NN simétrico sobre tipos de trigramas; pesos em [0,1]"""

    def __init__(self, nodes: Sequence[TrigramNode], weights: sp.spmatrix, k: int):
        weights = sp.csr_matrix(weights, dtype=np.float64)
        n = len(nodes)
        if weights.shape != (n, n):
            raise ContractError(f"matriz de pesos {weights.shape} para {n} nós")
        if any(node.count < 1 for node in nodes):
            raise ContractError("todo nó precisa de ao menos uma ocorrência")
        weights.eliminate_zeros()
        weights.sort_indices()
        self.nodes: List[TrigramNode] = list(nodes)
        self.weights = weights
        self.k = k
        self._center: Optional[Dict[Tuple[int, int], int]] = None

    @classmethod
    def empty(cls, k: int = 0) -> "TrigramGraph":
        return cls([], sp.csr_matrix((0, 0)), k)

    def __len__(self):
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(sp.triu(self.weights, k=1).nnz)

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def neighbors(self, node_id: int) -> List[Tuple[int, float]]:
        start, end = self.weights.indptr[node_id], self.weights.indptr[node_id + 1]
        return [(int(j), float(w)) for j, w in zip(self.weights.indices[start:end], self.weights.data[start:end])]

    def edges(self) -> Iterator[Tuple[int, int, float]]:
        """Arestas não direcionadas, u < v, em ordem"""
        upper = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        for i in order:
            yield int(upper.row[i]), int(upper.col[i]), float(upper.data[i])

    def is_symmetric(self) -> bool:
        diff = self.weights - self.weights.T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) == 0.0

    def center_index(self) -> Dict[Tuple[int, int], int]:
        """(sentença, posição central) -> id do nó"""
        if self._center is None:
            self._center = {occ: i for i, node in enumerate(self.nodes) for occ in node.occurrences}
        return self._center

    def laplacian(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(self.degrees) - self.weights)

    def __repr__(self):
        return f"<TrigramGraph nodes={len(self)} edges={self.n_edges} k={self.k}>"


@dataclass
class NodeDistributions:
    """Semente Y, prior R e estimativa corrente Ŷ, uma linha por nó"""
    seed: np.ndarray
    prior: np.ndarray
    current: np.ndarray
    seeded: np.ndarray

    def __post_init__(self):
        shapes = {self.seed.shape, self.prior.shape, self.current.shape}
        if len(shapes) != 1 or self.seeded.shape != self.seed.shape[:1]:
            raise ContractError("dimensões inconsistentes em NodeDistributions")
        for name, table, rows in (("seed", self.seed, self.seeded), ("prior", self.prior, slice(None))):
            block = table[rows]
            if np.any(block < 0) or np.any(np.abs(block.sum(axis=1) - 1.0) > 1e-9):
                raise ContractError(f"linhas de {name} devem ser distribuições de probabilidade")
        if np.any(self.current < 0) or not np.all(np.isfinite(self.current)):
            raise ContractError("Ŷ deve ser finito e não negativo")

    @property
    def n_nodes(self) -> int:
        return self.seed.shape[0]

    @property
    def n_labels(self) -> int:
        return self.seed.shape[1]

    def with_current(self, current: np.ndarray) -> "NodeDistributions":
        return NodeDistributions(self.seed, self.prior, current, self.seeded)


@dataclass
class GraphDump:
    """Conteúdo de um arquivo de dump do grafo"""
    keys: List[TrigramKey]
    counts: List[int]
    labeled: List[bool]
    weights: sp.csr_matrix

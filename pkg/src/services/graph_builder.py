"""Grafo de similaridade entre trigramas: contextos de 5 palavras, PMI, cosseno e k-NN."""
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from errors import ConfigError, ContractError, DataError
from models.corpus import AlignedSentence, Lexicon
from models.graph import GraphDump, PmiTable, TrigramGraph, TrigramKey, TrigramNode

logger = logging.getLogger(__name__)

PAD = 2
_BLOCK_ROWS = 512


def padded_surfaces(sentence: AlignedSentence, lexicon: Lexicon) -> List[str]:
    dummy = [lexicon.dummy_boundary] * PAD
    return dummy + list(sentence.surfaces) + dummy


def center_context(sentence: AlignedSentence, position: int, lexicon: Lexicon) -> List[str]:
    """Janela x1..x5 centrada na posição; as bordas leem o símbolo de preenchimento"""
    padded = padded_surfaces(sentence, lexicon)
    return padded[position:position + 2 * PAD + 1]


def extract_trigrams(corpus: Sequence[AlignedSentence], lexicon: Lexicon) -> List[TrigramNode]:
    """Um nó por tipo de trigrama sem preenchimento; ocorrências como (sentença, centro)"""
    nodes: "OrderedDict[TrigramKey, TrigramNode]" = OrderedDict()
    dummy = lexicon.dummy_boundary
    for s_id, sentence in enumerate(corpus):
        words = sentence.surfaces
        for center in range(1, len(words) - 1):
            key = TrigramKey(words[center - 1], words[center], words[center + 1])
            if dummy in key:
                continue
            node = nodes.get(key)
            if node is None:
                node = nodes[key] = TrigramNode(key)
            node.occurrences.append((s_id, center))
            node.is_labeled = node.is_labeled or sentence.is_labeled
    return list(nodes.values())


def extract_context_features(context: Sequence[str], lexicon: Lexicon) -> List[str]:
    if len(context) != 2 * PAD + 1:
        raise ContractError(f"contexto deve ter 5 posições, recebido {len(context)}")
    x1, x2, x3, x4, x5 = context
    features = [
        f"ctx={x1} {x2} {x3} {x4} {x5}",
        f"left={x1} {x2}",
        f"right={x4} {x5}",
        f"center={x3}",
    ]
    if lexicon.is_class(x3):
        features.append("center_is_class")
    if lexicon.is_preposition(x3):
        features.append("center_is_prep")
    if lexicon.is_preposition(x2):
        features.append("left_is_prep")
    return features


def occurrence_features(
    nodes: Sequence[TrigramNode], corpus: Sequence[AlignedSentence], lexicon: Lexicon
) -> List[List[List[str]]]:
    return [
        [extract_context_features(center_context(corpus[s], c, lexicon), lexicon) for s, c in node.occurrences]
        for node in nodes
    ]


def count_matrix(features_per_node: Sequence[Sequence[Sequence[str]]]) -> Tuple[sp.csr_matrix, List[str]]:
    """c(t,f): ocorrências de t que exibem f"""
    vocabulary: Dict[str, int] = {}
    rows, cols = [], []
    for t, occurrences in enumerate(features_per_node):
        for features in occurrences:
            for f in set(features):
                rows.append(t)
                cols.append(vocabulary.setdefault(f, len(vocabulary)))
    counts = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(features_per_node), len(vocabulary))
    )
    counts.sum_duplicates()
    names = [None] * len(vocabulary)
    for f, j in vocabulary.items():
        names[j] = f
    return counts, names


def pmi_from_counts(counts: sp.spmatrix, occurrences: Sequence[float]) -> sp.csr_matrix:
    """log(c(t,f) N / (c(t) c(f))) nas entradas com c(t,f) > 0; N é o total de eventos"""
    counts = sp.csr_matrix(counts, dtype=np.float64)
    counts.eliminate_zeros()
    occurrences = np.asarray(occurrences, dtype=np.float64)
    total = counts.sum()
    feature_totals = np.asarray(counts.sum(axis=0)).ravel()
    coo = counts.tocoo()
    values = np.log(coo.data * total / (occurrences[coo.row] * feature_totals[coo.col]))
    return sp.csr_matrix((values, (coo.row, coo.col)), shape=counts.shape)


def compute_pmi(
    nodes: Sequence[TrigramNode], features_per_node: Sequence[Sequence[Sequence[str]]]
) -> PmiTable:
    if not nodes:
        raise ContractError("compute_pmi exige ao menos um nó")
    counts, names = count_matrix(features_per_node)
    matrix = pmi_from_counts(counts, [node.count for node in nodes])
    return PmiTable(matrix, names)


def cosine_similarity(u: Mapping[str, float], v: Mapping[str, float]) -> float:
    if not u and not v:
        raise ContractError("cosseno indefinido para dois vetores vazios")
    norm_u = np.sqrt(sum(x * x for x in u.values()))
    norm_v = np.sqrt(sum(x * x for x in v.values()))
    if norm_u == 0 or norm_v == 0:
        return 0.0
    small, large = (u, v) if len(u) <= len(v) else (v, u)
    dot = sum(x * large[f] for f, x in small.items() if f in large)
    return float(np.clip(dot / (norm_u * norm_v), -1.0, 1.0))


def _row_normalized(matrix: sp.csr_matrix) -> sp.csr_matrix:
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.csr_matrix(sp.diags(scale) @ matrix)


def build_knn(nodes: Sequence[TrigramNode], pmi: PmiTable, k: int) -> TrigramGraph:
    """k vizinhos de maior cosseno por nó (empates pelo menor id), união simétrica, só pesos > 0"""
    n = len(nodes)
    if k < 1:
        raise ConfigError(f"k deve ser >= 1 (recebido {k})")
    if k >= n:
        raise ConfigError(f"k={k} deve ser menor que o número de nós ({n})")

    unit = _row_normalized(pmi.matrix)
    rows, cols, vals = [], [], []
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        block = (unit[start:stop] @ unit.T).toarray()
        block[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        order = np.argsort(-block, axis=1, kind="stable")[:, :k]
        for r in range(stop - start):
            for j in order[r]:
                sim = block[r, j]
                if sim > 0:
                    rows.append(start + r)
                    cols.append(int(j))
                    vals.append(min(float(sim), 1.0))

    directed = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    weights = directed.maximum(directed.T)
    graph = TrigramGraph(nodes, weights, k)
    logger.info(f"🔍 Grafo k-NN: {n} nós, {graph.n_edges} arestas, k={k}")
    return graph


def build_graph(corpus: Sequence[AlignedSentence], lexicon: Lexicon, k: int) -> TrigramGraph:
    """Pipeline completo: trigramas, features de contexto, PMI e k-NN"""
    nodes = extract_trigrams(corpus, lexicon)
    if k < 1:
        raise ConfigError(f"k deve ser >= 1 (recebido {k})")
    if k >= len(nodes):
        raise ConfigError(f"k={k} deve ser menor que o número de nós ({len(nodes)})")
    if len(nodes) < 2:
        logger.warning(f"⚠️ Apenas {len(nodes)} trigramas válidos; grafo vazio")
        return TrigramGraph(nodes, sp.csr_matrix((len(nodes), len(nodes))), k)
    pmi = compute_pmi(nodes, occurrence_features(nodes, corpus, lexicon))
    return build_knn(nodes, pmi, k)


def format_graph(graph: TrigramGraph) -> str:
    lines = ["# nodes"]
    for i, node in enumerate(graph.nodes):
        lines.append(f"{i}\t{node.key}\t{node.count}\t{int(node.is_labeled)}")
    lines.append("# edges")
    coo = graph.weights.tocoo()
    for i in np.lexsort((coo.col, coo.row)):
        lines.append(f"{coo.row[i]}\t{coo.col[i]}\t{coo.data[i]:.17g}")
    return "\n".join(lines) + "\n"


def dump_graph(graph: TrigramGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_graph(graph), encoding="utf-8")
    logger.info(f"💾 Grafo salvo em {path}")
    return path


def load_graph_dump(path: Union[str, Path]) -> GraphDump:
    path = Path(path)
    keys, counts, labeled = [], [], []
    rows, cols, vals = [], [], []
    section = None
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line in ("# nodes", "# edges"):
            section = line[2:]
            continue
        fields = line.split("\t")
        try:
            if section == "nodes" and len(fields) == 4:
                if int(fields[0]) != len(keys):
                    raise ValueError("ids de nós fora de ordem")
                keys.append(TrigramKey(*fields[1].split(" ")))
                counts.append(int(fields[2]))
                labeled.append(fields[3] == "1")
            elif section == "edges" and len(fields) == 3:
                rows.append(int(fields[0]))
                cols.append(int(fields[1]))
                vals.append(float(fields[2]))
            else:
                raise ValueError(f"linha inesperada: {line!r}")
        except (TypeError, ValueError) as e:
            raise DataError(f"{path}:{line_number}: {e}")
    n = len(keys)
    weights = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return GraphDump(keys, counts, labeled, weights)

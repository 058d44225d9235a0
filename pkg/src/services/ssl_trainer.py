"""Treinamento semi-supervisionado de CRF guiado pelo grafo, mais os baselines supervisionado e auto-treinado."""
import logging
import time
from contextlib import contextmanager
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, EmptyCorpusError
from models.config import OptimizerConfig, SslConfig
from models.corpus import AlignedSentence, LabelAlphabet, Lexicon
from models.crf_model import DEFAULT_TEMPLATES, CrfModel, FeatureTemplate, MarginalTable
from models.graph import TrigramGraph
from models.training import IterationState, RoundReport
from services import crf
from services.graph_builder import build_knn, compute_pmi, extract_trigrams, occurrence_features
from services.optimizer import TrainingObjective, fit
from services.propagation import propagate, seed_graph, uniform_distribution

logger = logging.getLogger(__name__)


def train_supervised(
    labeled: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    gamma: float = 0.01,
    config: Optional[OptimizerConfig] = None,
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
) -> CrfModel:
    model, _ = _train_supervised(labeled, alphabet, gamma, config or OptimizerConfig(), templates)
    return model


def _train_supervised(labeled, alphabet, gamma, config, templates):
    if not labeled:
        raise EmptyCorpusError("treinamento supervisionado exige ao menos uma sentença rotulada")
    initial = crf.build_model(labeled, alphabet, templates)
    return fit(TrainingObjective(labeled, (), gamma=gamma, eta=0.0), initial, config)


def compute_empirical_distribution(
    corpus: Sequence[AlignedSentence], graph: TrigramGraph, n_labels: int
) -> Dict[int, np.ndarray]:
    """r por nó: frequência relativa dos rótulos-ouro do centro nas ocorrências rotuladas"""
    empirical = {}
    for node_id, node in enumerate(graph.nodes):
        counts = np.zeros(n_labels)
        for s_id, position in node.occurrences:
            sentence = corpus[s_id]
            if sentence.is_labeled:
                counts[sentence.labels[position]] += 1
        if counts.sum() > 0:
            empirical[node_id] = counts / counts.sum()
    return empirical


def average_marginals(
    marginal_tables: Mapping[int, MarginalTable],
    graph: TrigramGraph,
    empirical: Mapping[int, np.ndarray],
) -> Dict[int, np.ndarray]:
    """q por nó: média das marginais do centro nas ocorrências não rotuladas; q = r sem elas"""
    averaged = {}
    for node_id, node in enumerate(graph.nodes):
        rows = [marginal_tables[s].node[p] for s, p in node.occurrences if s in marginal_tables]
        if rows:
            averaged[node_id] = np.mean(rows, axis=0)
        elif node_id in empirical:
            averaged[node_id] = np.asarray(empirical[node_id], dtype=np.float64)
    return averaged


def interpolate(p: np.ndarray, q_hat: Optional[np.ndarray], alpha: float) -> np.ndarray:
    """α p + (1 - α) q̂; sem trigrama centrado na posição, p̂ = p"""
    p = np.asarray(p, dtype=np.float64)
    if q_hat is None:
        return p.copy()
    return alpha * p + (1.0 - alpha) * np.asarray(q_hat, dtype=np.float64)


def interpolate_sentence(
    table: MarginalTable,
    sentence_id: int,
    centers: Mapping[Tuple[int, int], int],
    q_hat: np.ndarray,
    alpha: float,
) -> np.ndarray:
    rows = []
    for position, p in enumerate(table.node):
        node_id = centers.get((sentence_id, position))
        rows.append(interpolate(p, None if node_id is None else q_hat[node_id], alpha))
    return np.vstack(rows)


def changed_fraction(previous: Sequence[Sequence[int]], current: Sequence[Sequence[int]]) -> float:
    total = sum(len(y) for y in current)
    if total == 0:
        return 0.0
    changed = sum(int(np.sum(np.asarray(a) != np.asarray(b))) for a, b in zip(previous, current))
    return changed / total


class SslTrainer:
    """Laço externo: marginais, média por trigrama, propagação, interpolação,
    Viterbi restrito e retreino a partir de Λ_n. O histórico guarda uma
    IterationState por rodada, com a rodada 0 sendo o modelo supervisionado.

    O Viterbi restrito soma a log p̂ a dependência entre vizinhos das
    marginais (pair_scores), não as transições cruas; com α = 1 a
    decodificação coincide com o Viterbi do próprio CRF."""

    method = "ssl"

    def __init__(
        self,
        alphabet: LabelAlphabet,
        lexicon: Optional[Lexicon] = None,
        config: Optional[SslConfig] = None,
        templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
    ):
        self.alphabet = alphabet
        self.lexicon = lexicon or Lexicon()
        self.config = config or SslConfig()
        self.templates = tuple(templates)
        self.history: List[IterationState] = []
        self.graph: Optional[TrigramGraph] = None
        self._timings: Dict[str, float] = {}
        self._lengths: List[int] = []

    @contextmanager
    def _stage(self, name: str):
        start = time.perf_counter()
        yield
        self._timings[name] = self._timings.get(name, 0.0) + time.perf_counter() - start

    def _record(self, model, decoded, index, objective, changed) -> IterationState:
        report = RoundReport(index, float(objective), float(changed), dict(self._timings))
        state = IterationState(model, [tuple(d) for d in decoded], index, report)
        state.check_lengths(self._lengths)
        self.history.append(state)
        self._timings = {}
        logger.info(report.record(self.method))
        return state

    def _initial(self, labeled, unlabeled) -> Tuple[CrfModel, List[List[int]]]:
        cfg = self.config
        self._lengths = [len(s) for s in unlabeled]
        with self._stage("train"):
            model, result = _train_supervised(labeled, self.alphabet, cfg.gamma, cfg.optimizer, self.templates)
        with self._stage("decode"):
            decoded = crf.decode(model, unlabeled)
        self._record(model, decoded, 0, result.value, 0.0)
        return model, decoded

    def _retrain(self, labeled, unlabeled, decoded, model) -> Tuple[CrfModel, float]:
        cfg = self.config
        decoded_sentences = [s.with_labels(y) for s, y in zip(unlabeled, decoded)]
        objective = TrainingObjective(labeled, decoded_sentences, gamma=cfg.gamma, eta=cfg.eta)
        with self._stage("train"):
            model, result = fit(objective, model, cfg.optimizer)
        return model, result.value

    def run(self, labeled: Sequence[AlignedSentence], unlabeled: Sequence[AlignedSentence]) -> CrfModel:
        cfg = self.config
        self.history = []
        labeled, unlabeled = list(labeled), [s.unlabeled() for s in unlabeled]
        model, previous = self._initial(labeled, unlabeled)
        if not unlabeled:
            return model

        corpus = labeled + unlabeled
        offset = len(labeled)
        with self._stage("graph"):
            graph = self._build_graph(corpus)
        if graph is None:
            return model
        self.graph = graph
        centers = graph.center_index()
        empirical = compute_empirical_distribution(corpus, graph, len(self.alphabet))
        prior = uniform_distribution(len(self.alphabet))
        model = crf.extend_model(model, unlabeled)

        for n in range(1, cfg.max_outer_iterations + 1):
            with self._stage("marginals"):
                tables = crf.marginals(model, unlabeled)
                q = average_marginals({offset + i: t for i, t in enumerate(tables)}, graph, empirical)
            with self._stage("propagate"):
                q_hat = propagate(graph, seed_graph(graph, q, empirical, prior), cfg.mad)
            with self._stage("decode"):
                decoded = [
                    crf.constrained_viterbi(
                        interpolate_sentence(table, offset + i, centers, q_hat, cfg.alpha), table.pair_scores, model
                    )
                    for i, table in enumerate(tables)
                ]
            model, objective = self._retrain(labeled, unlabeled, decoded, model)
            changed = changed_fraction(previous, decoded)
            self._record(model, decoded, n, objective, changed)
            previous = decoded
            if changed < cfg.convergence_threshold:
                logger.info(f"✅ Convergiu na rodada {n} (fração alterada {changed:.6f})")
                break
        return model

    def _build_graph(self, corpus: List[AlignedSentence]) -> Optional[TrigramGraph]:
        nodes = extract_trigrams(corpus, self.lexicon)
        if len(nodes) < 2:
            logger.warning(f"⚠️ Grafo sem trigramas suficientes ({len(nodes)} nós); usando o modelo supervisionado")
            return None
        k = self.config.knn_k
        if k >= len(nodes):
            k = len(nodes) - 1
            logger.warning(f"⚠️ k={self.config.knn_k} excede os nós disponíveis; usando k={k}")
        pmi = compute_pmi(nodes, occurrence_features(nodes, corpus, self.lexicon))
        return build_knn(nodes, pmi, k)


class SelfTrainer(SslTrainer):
    """O mesmo laço sem grafo, propagação nem interpolação: rótulos duros do Viterbi"""

    method = "selftrain"

    def run(self, labeled: Sequence[AlignedSentence], unlabeled: Sequence[AlignedSentence]) -> CrfModel:
        cfg = self.config
        self.history = []
        labeled, unlabeled = list(labeled), [s.unlabeled() for s in unlabeled]
        model, decoded = self._initial(labeled, unlabeled)
        if not unlabeled:
            return model

        for n in range(1, cfg.max_outer_iterations + 1):
            model, objective = self._retrain(labeled, unlabeled, decoded, model)
            with self._stage("decode"):
                redecoded = crf.decode(model, unlabeled)
            changed = changed_fraction(decoded, redecoded)
            self._record(model, decoded, n, objective, changed)
            decoded = redecoded
            if changed < cfg.convergence_threshold:
                logger.info(f"✅ Auto-treino convergiu na rodada {n} (fração alterada {changed:.6f})")
                break
        return model


def run_ssl(
    labeled: Sequence[AlignedSentence],
    unlabeled: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    lexicon: Optional[Lexicon] = None,
    config: Optional[SslConfig] = None,
) -> CrfModel:
    return SslTrainer(alphabet, lexicon, config).run(labeled, unlabeled)


def self_train(
    labeled: Sequence[AlignedSentence],
    unlabeled: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    config: Optional[SslConfig] = None,
) -> CrfModel:
    return SelfTrainer(alphabet, None, config).run(labeled, unlabeled)


def train_method(
    method: str,
    labeled: Sequence[AlignedSentence],
    unlabeled: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    lexicon: Optional[Lexicon] = None,
    config: Optional[SslConfig] = None,
) -> CrfModel:
    config = config or SslConfig()
    if method == "supervised":
        return train_supervised(labeled, alphabet, config.gamma, config.optimizer)
    if method == "selftrain":
        return self_train(labeled, unlabeled, alphabet, config)
    if method == "ssl":
        return run_ssl(labeled, unlabeled, alphabet, lexicon, config)
    raise ConfigError(f"método desconhecido: {method}")

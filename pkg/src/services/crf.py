"""CRF de cadeia linear: features na janela [0,+2], forward-backward, Viterbi e verossimilhança."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from errors import ContractError, DataError, NumericalError
from models.corpus import AlignedSentence, LabelAlphabet, Token
from models.crf_model import (
    BIGRAM,
    DEFAULT_TEMPLATES,
    IS_CLASS,
    IS_PREPOSITION,
    LABEL_BIGRAM,
    UNIGRAM,
    CrfModel,
    FeatureIndex,
    FeatureTemplate,
    MarginalTable,
)

logger = logging.getLogger(__name__)

BOUNDARY = "__END__"
MARGINAL_FLOOR = 1e-12
NORMALIZATION_TOLERANCE = 1e-6
MODEL_HEADER = "#slotcrf-model v1"


def _token_at(tokens: Sequence[Token], i: int) -> Optional[Token]:
    return tokens[i] if 0 <= i < len(tokens) else None


def _fmt_offset(o: int) -> str:
    return f"+{o}" if o >= 0 else str(o)


def instantiate_features(
    tokens: Sequence[Token], position: int, templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES
) -> List[str]:
    """Atributos observados na posição; offsets fora da sentença leem o símbolo de borda"""
    if not 0 <= position < len(tokens):
        raise ContractError(f"posição {position} fora da sentença de {len(tokens)} tokens")
    features = []
    for template in templates:
        if template.kind == LABEL_BIGRAM:
            continue
        if template.kind == UNIGRAM:
            for o in template.offsets:
                tok = _token_at(tokens, position + o)
                features.append(f"U[{_fmt_offset(o)}]={tok.surface if tok else BOUNDARY}")
        elif template.kind == BIGRAM:
            words = []
            for o in template.offsets:
                tok = _token_at(tokens, position + o)
                words.append(tok.surface if tok else BOUNDARY)
            features.append(f"B[{','.join(_fmt_offset(o) for o in template.offsets)}]={'/'.join(words)}")
        else:
            prefix = "C" if template.kind == IS_CLASS else "P"
            for o in template.offsets:
                tok = _token_at(tokens, position + o)
                fired = tok is not None and (tok.is_class if template.kind == IS_CLASS else tok.is_preposition)
                if fired:
                    features.append(f"{prefix}[{_fmt_offset(o)}]")
    return features


def sentence_attributes(sentence: AlignedSentence, templates: Sequence[FeatureTemplate]) -> List[List[str]]:
    return [instantiate_features(sentence.tokens, t, templates) for t in range(len(sentence))]


def build_model(
    sentences: Sequence[AlignedSentence],
    alphabet: LabelAlphabet,
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
) -> CrfModel:
    """Modelo com pesos zero cujo índice cobre todos os atributos das sentenças"""
    index = FeatureIndex(alphabet.labels)
    for sentence in sentences:
        for attrs in sentence_attributes(sentence, templates):
            for attr in attrs:
                index.add_attribute(attr)
    return CrfModel.zeros(index, alphabet, templates)


def extend_model(model: CrfModel, sentences: Sequence[AlignedSentence]) -> CrfModel:
    new_attrs = []
    seen = set()
    for sentence in sentences:
        for attrs in sentence_attributes(sentence, model.templates):
            for attr in attrs:
                if model.feature_index.attribute_id(attr) < 0 and attr not in seen:
                    seen.add(attr)
                    new_attrs.append(attr)
    if not new_attrs:
        return model
    logger.debug(f"índice estendido com {len(new_attrs)} atributos")
    return model.extended(new_attrs)


@dataclass
class EncodedBatch:
    """Sentenças codificadas contra um índice: matriz esparsa posições x atributos"""
    features: sp.csr_matrix
    lengths: np.ndarray
    offsets: np.ndarray
    n_attributes: int

    @property
    def n_sentences(self) -> int:
        return len(self.lengths)

    def groups(self) -> Dict[int, np.ndarray]:
        """Sentenças agrupadas por comprimento para o forward-backward vetorizado"""
        out: Dict[int, List[int]] = {}
        for i, n in enumerate(self.lengths):
            out.setdefault(int(n), []).append(i)
        return {n: np.array(ids) for n, ids in sorted(out.items())}


def encode(sentences: Sequence[AlignedSentence], model: CrfModel) -> EncodedBatch:
    index = model.feature_index
    rows, cols = [], []
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    if np.any(lengths == 0):
        raise ContractError("sentenças vazias não podem ser codificadas")
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    for s_id, sentence in enumerate(sentences):
        for t, attrs in enumerate(sentence_attributes(sentence, model.templates)):
            row = offsets[s_id] + t
            for attr in attrs:
                a = index.attribute_id(attr)
                if a >= 0:
                    rows.append(row)
                    cols.append(a)
    data = np.ones(len(rows))
    X = sp.csr_matrix((data, (rows, cols)), shape=(int(offsets[-1]), index.n_attributes))
    X.sum_duplicates()
    return EncodedBatch(X, lengths, offsets, index.n_attributes)


def _check_batch(batch: EncodedBatch, model: CrfModel):
    if batch.n_attributes != model.feature_index.n_attributes:
        raise ContractError("lote codificado com outro índice de features")


def score_tables(sentence: AlignedSentence, model: CrfModel) -> Tuple[np.ndarray, np.ndarray]:
    """Potenciais em log: node[t, y] = soma dos pesos unários disparados; transições L x L"""
    batch = encode([sentence], model)
    node = np.asarray(batch.features @ model.unary)
    return node, model.transitions.copy()


def _forward_backward_batch(node: np.ndarray, trans: np.ndarray):
    """node: (B, T, L). Devolve alpha, beta, log_z em espaço log."""
    B, T, L = node.shape
    alpha = np.empty_like(node)
    beta = np.zeros_like(node)
    alpha[:, 0] = node[:, 0]
    for t in range(1, T):
        alpha[:, t] = node[:, t] + logsumexp(alpha[:, t - 1, :, None] + trans[None], axis=1)
    for t in range(T - 2, -1, -1):
        beta[:, t] = logsumexp(trans[None] + (node[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    log_z = logsumexp(alpha[:, T - 1], axis=1)
    return alpha, beta, log_z


def _node_marginals(alpha, beta, log_z) -> np.ndarray:
    marg = np.exp(alpha + beta - log_z[:, None, None])
    return marg / marg.sum(axis=2, keepdims=True)


def _pair_scores(node, trans, alpha, beta, log_z) -> np.ndarray:
    """log P(i, j) - log p_{t-1}(i) - log p_t(j), (B, T-1, L, L); somado às log-marginais
    de cada posição, reproduz log p(y|x) exatamente"""
    return (
        trans[None, None]
        + (node[:, 1:] - alpha[:, 1:])[:, :, None, :]
        - beta[:, :-1, :, None]
        + log_z[:, None, None, None]
    )


def forward_backward(node_scores: np.ndarray, transition_scores: np.ndarray) -> MarginalTable:
    node = np.asarray(node_scores, dtype=np.float64)
    trans = np.asarray(transition_scores, dtype=np.float64)
    if not (np.all(np.isfinite(node)) and np.all(np.isfinite(trans))):
        raise NumericalError("potenciais não finitos no forward-backward")
    alpha, beta, log_z = _forward_backward_batch(node[None], trans)
    pair = _pair_scores(node[None], trans, alpha, beta, log_z)
    return MarginalTable(_node_marginals(alpha, beta, log_z)[0], float(log_z[0]), pair[0])


def viterbi(node_scores: np.ndarray, transition_scores: np.ndarray) -> List[int]:
    """Caminho de maior escore; empates vão para o menor id de rótulo.
    As transições são (L, L), ou (T-1, L, L) quando variam por posição."""
    node = np.asarray(node_scores, dtype=np.float64)
    trans = np.asarray(transition_scores, dtype=np.float64)
    T, L = node.shape
    if trans.ndim == 3 and trans.shape[0] != T - 1:
        raise ContractError(f"transições para {trans.shape[0] + 1} posições, sentença com {T}")
    delta = node[0].copy()
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        step = trans if trans.ndim == 2 else trans[t - 1]
        scores = delta[:, None] + step + node[t][None, :]
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(L)]
    path = [int(np.argmax(delta))]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    return path


def constrained_viterbi(
    interpolated_marginals: np.ndarray, transition_scores: np.ndarray, model: Optional[CrfModel] = None
) -> List[int]:
    """Viterbi sobre log p̂(y_t) + transições, (L, L) do modelo ou (T-1, L, L) de pair_scores"""
    p_hat = np.asarray(interpolated_marginals, dtype=np.float64)
    if model is not None and p_hat.shape[1] != model.n_labels:
        raise ContractError(f"marginais com {p_hat.shape[1]} rótulos, modelo com {model.n_labels}")
    if np.any(p_hat < 0) or np.any(np.abs(p_hat.sum(axis=1) - 1.0) > NORMALIZATION_TOLERANCE):
        raise ContractError("linhas de marginais interpoladas não normalizadas")
    return viterbi(np.log(np.maximum(p_hat, MARGINAL_FLOOR)), transition_scores)


def _batch_scores(batch: EncodedBatch, model: CrfModel) -> np.ndarray:
    return np.asarray(batch.features @ model.unary)


def _gather(flat: np.ndarray, batch: EncodedBatch, ids: np.ndarray, n: int) -> np.ndarray:
    rows = batch.offsets[ids][:, None] + np.arange(n)[None, :]
    return flat[rows]


def batch_marginals(batch: EncodedBatch, model: CrfModel) -> List[MarginalTable]:
    _check_batch(batch, model)
    flat = _batch_scores(batch, model)
    trans = model.transitions
    tables: List[Optional[MarginalTable]] = [None] * batch.n_sentences
    for n, ids in batch.groups().items():
        node = _gather(flat, batch, ids, n)
        alpha, beta, log_z = _forward_backward_batch(node, trans)
        marg = _node_marginals(alpha, beta, log_z)
        pair = _pair_scores(node, trans, alpha, beta, log_z)
        for k, s_id in enumerate(ids):
            tables[s_id] = MarginalTable(marg[k], float(log_z[k]), pair[k])
    return tables


def marginals(model: CrfModel, sentences: Sequence[AlignedSentence]) -> List[MarginalTable]:
    if not sentences:
        return []
    return batch_marginals(encode(sentences, model), model)


def batch_decode(batch: EncodedBatch, model: CrfModel) -> List[List[int]]:
    _check_batch(batch, model)
    flat = _batch_scores(batch, model)
    trans = model.transitions
    return [viterbi(flat[batch.offsets[i]:batch.offsets[i + 1]], trans) for i in range(batch.n_sentences)]


def decode(model: CrfModel, sentences: Sequence[AlignedSentence]) -> List[List[int]]:
    if not sentences:
        return []
    return batch_decode(encode(sentences, model), model)


def batch_objective(
    batch: EncodedBatch, labels: Sequence[Sequence[int]], model: CrfModel, weight: float = 1.0
) -> Tuple[float, np.ndarray]:
    """-weight * soma log p(y|x) e seu gradiente (contagens esperadas - empíricas)"""
    _check_batch(batch, model)
    L = model.n_labels
    gradient = np.zeros(len(model.weights))
    if weight == 0.0 or batch.n_sentences == 0:
        return 0.0, gradient

    y_flat = np.concatenate([np.asarray(y, dtype=np.int64) for y in labels])
    if y_flat.shape[0] != batch.features.shape[0]:
        raise ContractError("rótulos não cobrem todas as posições do lote")
    if np.any(y_flat < 0) or np.any(y_flat >= L):
        raise ContractError("id de rótulo fora do alfabeto do modelo")

    flat = _batch_scores(batch, model)
    trans = model.transitions
    node_residual = np.zeros_like(flat)
    trans_grad = np.zeros((L, L))
    log_likelihood = 0.0

    for n, ids in batch.groups().items():
        node = _gather(flat, batch, ids, n)
        gold = _gather(y_flat, batch, ids, n)
        alpha, beta, log_z = _forward_backward_batch(node, trans)
        marg = _node_marginals(alpha, beta, log_z)

        rows = np.arange(len(ids))[:, None]
        gold_score = node[rows, np.arange(n)[None, :], gold].sum(axis=1)
        if n > 1:
            gold_score += trans[gold[:, :-1], gold[:, 1:]].sum(axis=1)
            pair = (
                alpha[:, :-1, :, None] + trans[None, None] + (node[:, 1:] + beta[:, 1:])[:, :, None, :]
                - log_z[:, None, None, None]
            )
            trans_grad += np.exp(pair).sum(axis=(0, 1))
            np.add.at(trans_grad, (gold[:, :-1].ravel(), gold[:, 1:].ravel()), -1.0)
        log_likelihood += float(np.sum(gold_score - log_z))

        onehot = np.zeros_like(marg)
        np.put_along_axis(onehot, gold[:, :, None], 1.0, axis=2)
        positions = batch.offsets[ids][:, None] + np.arange(n)[None, :]
        node_residual[positions.ravel()] = (marg - onehot).reshape(-1, L)

    unary_grad = np.asarray(batch.features.T @ node_residual)
    gradient[: L * L] = trans_grad.ravel()
    gradient[L * L:] = unary_grad.ravel()
    objective = -weight * log_likelihood
    gradient *= weight
    if not np.isfinite(objective) or not np.all(np.isfinite(gradient)):
        raise NumericalError("NaN/Inf na verossimilhança ou no gradiente")
    return objective, gradient


def log_likelihood_and_gradient(
    batch: Sequence[AlignedSentence], model: CrfModel, weight: float = 1.0
) -> Tuple[float, np.ndarray]:
    """Termo de dados da função objetivo; o regularizador é somado uma única vez pelo otimizador"""
    if weight < 0:
        raise ContractError("peso do lote deve ser >= 0")
    if any(not s.is_labeled for s in batch):
        raise ContractError("todas as sentenças do lote precisam de rótulos")
    if not batch:
        return 0.0, np.zeros(len(model.weights))
    return batch_objective(encode(batch, model), [s.labels for s in batch], model, weight)


def save_model(model: CrfModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    index = model.feature_index
    lines = [
        MODEL_HEADER,
        "#templates\t" + "\t".join(t.spec() for t in model.templates),
        "#labels\t" + "\t".join(model.alphabet.labels),
        "#attributes\t" + str(index.n_attributes),
    ]
    lines += [f"{index.name(i)}\t{w:.17g}" for i, w in enumerate(model.weights)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"💾 Modelo salvo em {path} ({len(model.weights)} features)")
    return path


def load_model(path: Union[str, Path]) -> CrfModel:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    if not lines or lines[0] != MODEL_HEADER:
        raise DataError(f"{path}: cabeçalho de modelo ausente ou versão desconhecida")
    header = {}
    body_start = 1
    while body_start < len(lines) and lines[body_start].startswith("#"):
        key, *values = lines[body_start].split("\t")
        header[key] = values
        body_start += 1
    try:
        templates = tuple(FeatureTemplate.parse(t) for t in header["#templates"])
        labels = header["#labels"]
    except KeyError as e:
        raise DataError(f"{path}: cabeçalho incompleto ({e})")
    if not labels or labels[0] != "O":
        raise DataError(f"{path}: alfabeto deve começar por O")
    alphabet = LabelAlphabet(labels[1:])
    L = len(labels)

    entries = [line.split("\t") for line in lines[body_start:] if line]
    # atributos na ordem em que aparecem (layout transições, depois atributo*L+rótulo)
    index = FeatureIndex(alphabet.labels)
    for entry in entries[L * L:: L]:
        index.add_attribute(entry[0].rpartition("=>")[0])
    if len(entries) != len(index) or any(len(e) != 2 for e in entries):
        raise DataError(f"{path}: {len(entries)} pesos para {len(index)} features")
    weights = np.zeros(len(index))
    try:
        for name, value in entries:
            weights[index.lookup(name)] = float(value)
    except (ContractError, ValueError) as e:
        raise DataError(f"{path}: {e}")
    return CrfModel(weights, index, alphabet, templates)

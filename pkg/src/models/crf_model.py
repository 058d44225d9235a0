from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import ContractError
from models.corpus import LabelAlphabet

UNIGRAM = "unigram"
BIGRAM = "bigram"
IS_CLASS = "is_class"
IS_PREPOSITION = "is_preposition"
LABEL_BIGRAM = "label_bigram"

TEMPLATE_KINDS = (UNIGRAM, BIGRAM, IS_CLASS, IS_PREPOSITION, LABEL_BIGRAM)

WINDOW = (0, 2)

_FEATURE_SEP = "=>"
_TRANSITION_PREFIX = "T:"


@dataclass(frozen=True)
class FeatureTemplate:
    kind: str
    offsets: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        if self.kind not in TEMPLATE_KINDS:
            raise ContractError(f"tipo de template desconhecido: {self.kind}")
        if any(not WINDOW[0] <= o <= WINDOW[1] for o in self.offsets):
            raise ContractError(f"offset fora da janela [0,+2]: {self.offsets}")
        if self.kind == LABEL_BIGRAM and self.offsets:
            raise ContractError("label_bigram não usa offsets")
        if self.kind == BIGRAM and len(self.offsets) != 2:
            raise ContractError("bigram exige exatamente dois offsets")
        if self.kind in (UNIGRAM, IS_CLASS, IS_PREPOSITION) and not self.offsets:
            raise ContractError(f"{self.kind} exige ao menos um offset")

    def spec(self) -> str:
        return f"{self.kind}:{','.join(str(o) for o in self.offsets)}"

    @classmethod
    def parse(cls, text: str) -> "FeatureTemplate":
        kind, _, offsets = text.partition(":")
        return cls(kind, tuple(int(o) for o in offsets.split(",") if o))


DEFAULT_TEMPLATES: Tuple[FeatureTemplate, ...] = (
    FeatureTemplate(UNIGRAM, (0, 1, 2)),
    FeatureTemplate(BIGRAM, (0, 1)),
    FeatureTemplate(BIGRAM, (1, 2)),
    FeatureTemplate(IS_CLASS, (0, 1, 2)),
    FeatureTemplate(IS_PREPOSITION, (0, 1, 2)),
    FeatureTemplate(LABEL_BIGRAM),
)


def validate_templates(templates: Sequence[FeatureTemplate]) -> Tuple[FeatureTemplate, ...]:
    n_transitions = sum(1 for t in templates if t.kind == LABEL_BIGRAM)
    if n_transitions != 1:
        raise ContractError(f"exatamente um template label_bigram é exigido (encontrados {n_transitions})")
    return tuple(templates)


class FeatureIndex:
    """Bijeção string de feature <-> id.

    Layout do vetor de pesos: primeiro as L*L transições, depois cada
    atributo observado conjugado com cada rótulo (atributo * L + rótulo).
    Atributos novos entram no fim, então ids existentes nunca mudam.
    """

    def __init__(self, labels: Sequence[str], attributes: Iterable[str] = ()):
        self.labels: Tuple[str, ...] = tuple(labels)
        self._label_ids = {label: i for i, label in enumerate(self.labels)}
        self.attributes: List[str] = []
        self._attr_ids: Dict[str, int] = {}
        for attr in attributes:
            self.add_attribute(attr)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_transitions(self) -> int:
        return self.n_labels * self.n_labels

    def __len__(self):
        return self.n_transitions + self.n_attributes * self.n_labels

    def add_attribute(self, attr: str) -> int:
        if attr not in self._attr_ids:
            self._attr_ids[attr] = len(self.attributes)
            self.attributes.append(attr)
        return self._attr_ids[attr]

    def attribute_id(self, attr: str) -> int:
        return self._attr_ids.get(attr, -1)

    def copy(self) -> "FeatureIndex":
        return FeatureIndex(self.labels, self.attributes)

    def name(self, feature_id: int) -> str:
        L = self.n_labels
        if not 0 <= feature_id < len(self):
            raise ContractError(f"feature id fora do índice: {feature_id}")
        if feature_id < self.n_transitions:
            prev, cur = divmod(feature_id, L)
            return f"{_TRANSITION_PREFIX}{self.labels[prev]}{_FEATURE_SEP}{self.labels[cur]}"
        attr, label = divmod(feature_id - self.n_transitions, L)
        return f"{self.attributes[attr]}{_FEATURE_SEP}{self.labels[label]}"

    def lookup(self, name: str) -> int:
        head, sep, label = name.rpartition(_FEATURE_SEP)
        if not sep or label not in self._label_ids:
            raise ContractError(f"feature mal formada: {name!r}")
        y = self._label_ids[label]
        if head.startswith(_TRANSITION_PREFIX) and head[len(_TRANSITION_PREFIX):] in self._label_ids:
            return self._label_ids[head[len(_TRANSITION_PREFIX):]] * self.n_labels + y
        attr = self._attr_ids.get(head)
        if attr is None:
            raise ContractError(f"feature desconhecida: {name!r}")
        return self.n_transitions + attr * self.n_labels + y


class CrfModel:
    """Pesos Λ sobre as features instanciadas, com alfabeto e templates que as geraram"""

    def __init__(
        self,
        weights: np.ndarray,
        index: FeatureIndex,
        alphabet: LabelAlphabet,
        templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
    ):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(index),):
            raise ContractError(f"vetor de pesos {weights.shape} incompatível com índice de {len(index)} features")
        if tuple(alphabet.labels) != index.labels:
            raise ContractError("alfabeto e índice de features divergem")
        self.weights = weights
        self.feature_index = index
        self.alphabet = alphabet
        self.templates = validate_templates(templates)

    @classmethod
    def zeros(cls, index: FeatureIndex, alphabet: LabelAlphabet, templates=DEFAULT_TEMPLATES) -> "CrfModel":
        return cls(np.zeros(len(index)), index, alphabet, templates)

    @property
    def n_labels(self) -> int:
        return self.feature_index.n_labels

    @property
    def transitions(self) -> np.ndarray:
        L = self.n_labels
        return self.weights[: L * L].reshape(L, L)

    @property
    def unary(self) -> np.ndarray:
        L = self.n_labels
        return self.weights[L * L:].reshape(-1, L)

    def with_weights(self, weights: np.ndarray) -> "CrfModel":
        return CrfModel(np.array(weights, dtype=np.float64), self.feature_index, self.alphabet, self.templates)

    def extended(self, attributes: Iterable[str]) -> "CrfModel":
        """Novo modelo cujo índice cobre também os atributos dados (pesos novos em zero)"""
        index = self.feature_index.copy()
        for attr in attributes:
            index.add_attribute(attr)
        weights = np.zeros(len(index))
        weights[: len(self.weights)] = self.weights
        return CrfModel(weights, index, self.alphabet, self.templates)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)))

    def __repr__(self):
        return f"<CrfModel labels={self.n_labels} attributes={self.feature_index.n_attributes}>"


@dataclass
class MarginalTable:
    """Marginais por posição e, em pair_scores, log P(y_{t-1}, y_t) - log p(y_{t-1}) - log p(y_t)
    em (T-1, L, L): a dependência entre rótulos vizinhos que o CRF impõe à posteriori"""

    node: np.ndarray
    sentence_log_z: float
    pair_scores: Optional[np.ndarray] = None

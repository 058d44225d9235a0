from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from errors import ContractError

NULL_LABEL = "O"
DEFAULT_DUMMY = "__DUMMY__"


@dataclass(frozen=True)
class Token:
    surface: str
    is_class: bool = False
    is_preposition: bool = False

    def __post_init__(self):
        if not self.surface or any(c in self.surface for c in (" ", "\t", "\n", "\r")):
            raise ContractError(f"token inválido: {self.surface!r}")
        if self.is_class and self.is_preposition:
            raise ContractError(f"token {self.surface!r} não pode ser classe e preposição")


@dataclass(frozen=True)
class AlignedSentence:
    tokens: Tuple[Token, ...]
    labels: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.tokens):
            raise ContractError(
                f"sentença com {len(self.tokens)} tokens e {len(self.labels)} rótulos"
            )

    def __len__(self):
        return len(self.tokens)

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    @property
    def surfaces(self) -> Tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def with_labels(self, labels: Optional[Iterable[int]]) -> "AlignedSentence":
        return AlignedSentence(self.tokens, None if labels is None else tuple(int(y) for y in labels))

    def unlabeled(self) -> "AlignedSentence":
        return AlignedSentence(self.tokens, None)


class LabelAlphabet:
    """Bijeção entre rótulos e índices densos; "O" sempre no índice 0"""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: List[str] = [NULL_LABEL]
        self._index: Dict[str, int] = {NULL_LABEL: 0}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        if label not in self._index:
            self._index[label] = len(self._labels)
            self._labels.append(label)
        return self._index[label]

    def lookup(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ContractError(f"rótulo desconhecido: {label}")

    def name(self, label_id: int) -> str:
        if not 0 <= label_id < len(self._labels):
            raise ContractError(f"id de rótulo inválido: {label_id}")
        return self._labels[label_id]

    def copy(self) -> "LabelAlphabet":
        return LabelAlphabet(self._labels[1:])

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __len__(self):
        return len(self._labels)

    def __eq__(self, other):
        return isinstance(other, LabelAlphabet) and self._labels == other._labels

    def __repr__(self):
        return f"<LabelAlphabet {self._labels}>"


@dataclass(frozen=True)
class Lexicon:
    """Palavras de classe, preposições e o símbolo de preenchimento das bordas.

    class_map associa palavras brutas ao nome da classe (dallas -> city_name);
    na carga do corpus a palavra é substituída pelo nome da classe.
    """
    class_words: FrozenSet[str] = frozenset()
    prepositions: FrozenSet[str] = frozenset()
    dummy_boundary: str = DEFAULT_DUMMY
    class_map: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "class_words", frozenset(self.class_words) | frozenset(self.class_map.values()))
        object.__setattr__(self, "prepositions", frozenset(self.prepositions))
        if self.dummy_boundary in self.class_words or self.dummy_boundary in self.prepositions:
            raise ContractError(f"símbolo de borda {self.dummy_boundary!r} não pode estar no léxico")
        overlap = self.class_words & self.prepositions
        if overlap:
            raise ContractError(f"palavras ao mesmo tempo classe e preposição: {sorted(overlap)}")

    def is_class(self, surface: str) -> bool:
        return surface in self.class_words

    def is_preposition(self, surface: str) -> bool:
        return surface in self.prepositions

    def canonical(self, surface: str) -> str:
        return self.class_map.get(surface, surface)

    def make_token(self, surface: str) -> Token:
        surface = self.canonical(surface)
        return Token(surface, self.is_class(surface), self.is_preposition(surface))


@dataclass(frozen=True)
class SplitSpec:
    labeled_fraction: float
    rng_seed: int = 0
    repeat_index: int = 0


@dataclass(frozen=True)
class CorpusSplit:
    """Partição rotulada/não rotulada; o ouro da parte não rotulada fica guardado à parte"""
    labeled: Tuple[AlignedSentence, ...]
    unlabeled: Tuple[AlignedSentence, ...]
    hidden_gold: Tuple[Tuple[int, ...], ...]
    labeled_indices: Tuple[int, ...] = ()
    unlabeled_indices: Tuple[int, ...] = ()

    def restored_unlabeled(self) -> List[AlignedSentence]:
        return [s.with_labels(gold) for s, gold in zip(self.unlabeled, self.hidden_gold)]

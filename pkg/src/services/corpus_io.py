import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import (
    AlignmentError,
    ConfigError,
    ContractError,
    CorpusParseError,
    CorpusStructureError,
    EmptyCorpusError,
)
from models.corpus import AlignedSentence, CorpusSplit, LabelAlphabet, Lexicon, SplitSpec, Token

logger = logging.getLogger(__name__)

_FORBIDDEN = (" ", "\r")


def load_corpus(
    path: Union[str, Path],
    alphabet: Optional[LabelAlphabet] = None,
    lexicon: Optional[Lexicon] = None,
) -> Tuple[List[AlignedSentence], LabelAlphabet]:
    """Lê um corpus no formato token<TAB>rótulo, uma linha em branco entre sentenças"""
    path = Path(path)
    lexicon = lexicon or Lexicon()
    alphabet = alphabet.copy() if alphabet is not None else LabelAlphabet()
    text = path.read_text(encoding="utf-8")

    sentences: List[AlignedSentence] = []
    block: List[Tuple[int, List[str]]] = []

    def flush():
        if not block:
            return
        arities = {len(fields) for _, fields in block}
        if len(arities) > 1:
            raise CorpusStructureError(
                f"{path}:{block[0][0]}: sentença mistura linhas rotuladas e não rotuladas"
            )
        tokens = tuple(lexicon.make_token(fields[0]) for _, fields in block)
        labels = None
        if arities == {2}:
            labels = tuple(alphabet.add(fields[1]) for _, fields in block)
        sentences.append(AlignedSentence(tokens, labels))
        block.clear()

    for line_number, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            flush()
            continue
        fields = line.split("\t")
        if len(fields) > 2:
            raise CorpusParseError(path, line_number, f"esperados 1 ou 2 campos, encontrados {len(fields)}")
        if any(not f or any(c in f for c in _FORBIDDEN) for f in fields):
            raise CorpusParseError(path, line_number, f"token ou rótulo inválido: {line!r}")
        block.append((line_number, fields))
    flush()

    if not sentences:
        raise EmptyCorpusError(f"corpus vazio: {path}")

    labeled = sum(1 for s in sentences if s.is_labeled)
    logger.info(f"📋 Corpus {path.name}: {len(sentences)} sentenças ({labeled} rotuladas), {len(alphabet)} rótulos")
    return sentences, alphabet


def format_corpus(sentences: Sequence[AlignedSentence], alphabet: LabelAlphabet) -> str:
    blocks = []
    for sentence in sentences:
        if sentence.labels is None:
            lines = [t.surface for t in sentence.tokens]
        else:
            lines = [f"{t.surface}\t{alphabet.name(y)}" for t, y in zip(sentence.tokens, sentence.labels)]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def save_corpus(sentences: Sequence[AlignedSentence], alphabet: LabelAlphabet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_corpus(sentences, alphabet), encoding="utf-8")
    logger.info(f"💾 Corpus salvo em {path} ({len(sentences)} sentenças)")
    return path


def load_lexicon(path: Union[str, Path]) -> Lexicon:
    """Seções [classes] e [prepositions]; em [classes], 'palavra' ou 'palavra<TAB>classe'"""
    path = Path(path)
    section = None
    class_words, prepositions, class_map = set(), set(), {}
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("classes", "prepositions"):
                raise CorpusParseError(path, line_number, f"seção desconhecida [{section}]")
            continue
        if section is None:
            raise CorpusParseError(path, line_number, "entrada fora de seção")
        fields = line.split()
        if section == "classes" and len(fields) == 2:
            class_map[fields[0]] = fields[1]
        elif len(fields) == 1:
            (class_words if section == "classes" else prepositions).add(fields[0])
        else:
            raise CorpusParseError(path, line_number, f"entrada inválida: {line!r}")
    lexicon = Lexicon(frozenset(class_words), frozenset(prepositions), class_map=class_map)
    logger.info(f"📋 Léxico {path.name}: {len(lexicon.class_words)} classes, {len(lexicon.prepositions)} preposições")
    return lexicon


def save_lexicon(lexicon: Lexicon, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["[classes]"]
    lines += sorted(lexicon.class_words)
    lines += [f"{word}\t{cls}" for word, cls in sorted(lexicon.class_map.items())]
    lines += ["", "[prepositions]"]
    lines += sorted(lexicon.prepositions)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def strip_labels(
    sentences: Sequence[AlignedSentence],
) -> Tuple[List[AlignedSentence], List[Optional[Tuple[int, ...]]]]:
    return [s.unlabeled() for s in sentences], [s.labels for s in sentences]


def restore_labels(
    sentences: Sequence[AlignedSentence], gold: Sequence[Optional[Sequence[int]]]
) -> List[AlignedSentence]:
    if len(sentences) != len(gold):
        raise ContractError(f"{len(sentences)} sentenças para {len(gold)} sequências de rótulos")
    return [s.with_labels(y) for s, y in zip(sentences, gold)]


def split_corpus(corpus: Sequence[AlignedSentence], spec: SplitSpec) -> CorpusSplit:
    """Sorteia a fração rotulada; a parte não rotulada perde os rótulos mas guarda o ouro"""
    if not 0.0 < spec.labeled_fraction <= 1.0:
        raise ConfigError(f"labeled_fraction fora de (0,1]: {spec.labeled_fraction}")
    if any(not s.is_labeled for s in corpus):
        raise ContractError("split_corpus exige um corpus totalmente rotulado")

    n = len(corpus)
    n_labeled = int(np.floor(spec.labeled_fraction * n + 0.5))
    rng = np.random.default_rng([int(spec.rng_seed), int(spec.repeat_index)])
    order = rng.permutation(n)
    labeled_idx = sorted(int(i) for i in order[:n_labeled])
    unlabeled_idx = sorted(int(i) for i in order[n_labeled:])

    stripped, gold = strip_labels([corpus[i] for i in unlabeled_idx])
    return CorpusSplit(
        labeled=tuple(corpus[i] for i in labeled_idx),
        unlabeled=tuple(stripped),
        hidden_gold=tuple(gold),
        labeled_indices=tuple(labeled_idx),
        unlabeled_indices=tuple(unlabeled_idx),
    )


def holdout_split(
    corpus: Sequence[AlignedSentence], test_fraction: float, seed: int
) -> Tuple[List[AlignedSentence], List[AlignedSentence]]:
    """Separação treino/teste estável pela semente; o teste nunca entra no treino"""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction fora de (0,1): {test_fraction}")
    n = len(corpus)
    n_test = int(np.floor(test_fraction * n + 0.5))
    order = np.random.default_rng([int(seed), 0x7E57]).permutation(n)
    test_idx = set(int(i) for i in order[:n_test])
    train = [s for i, s in enumerate(corpus) if i not in test_idx]
    test = [s for i, s in enumerate(corpus) if i in test_idx]
    return train, test


def monotone_align(
    tokens: Sequence[Union[Token, str]],
    slot_sequence: Iterable[Tuple[str, str]],
    alphabet: LabelAlphabet,
) -> List[int]:
    """Alinhamento monótono: cada valor recebe seu slot, da esquerda para a direita"""
    surfaces = [t.surface if isinstance(t, Token) else t for t in tokens]
    labels = [0] * len(surfaces)
    cursor = 0
    for slot, value in slot_sequence:
        if slot not in alphabet:
            raise AlignmentError(slot, "rótulo fora do alfabeto")
        try:
            position = surfaces.index(value, cursor)
        except ValueError:
            raise AlignmentError(slot, f"valor {value!r} ausente ou fora de ordem")
        labels[position] = alphabet.lookup(slot)
        cursor = position + 1
    return labels

"""Gramática probabilística de reservas de voo para gerar corpora sintéticos rotulados.

A gramática é fixa e versionada: qualquer mudança aqui altera os corpora
gerados e, portanto, os valores de referência dos experimentos.

Cada valor de slot é decidido pela palavra de classe e pela palavra seguinte:
a origem vem sempre antes de um conector de rota ou de um ponto de partida,
o destino nunca. Os pontos de partida e as áreas de chegada formam uma cauda
longa de palavras raras, vistas poucas vezes numa amostra rotulada pequena.
"""
import logging
import re
from itertools import product
from typing import List, Mapping, Sequence, Tuple

import numpy as np

from errors import ConfigError
from models.corpus import AlignedSentence, LabelAlphabet, Lexicon
from services.corpus_io import monotone_align

logger = logging.getLogger(__name__)

GRAMMAR_VERSION = 2

SLOT_ORDER = ("FROMLOC", "TOLOC", "STOPLOC", "DATE", "RETURN_DATE", "TIME", "AIRLINE", "FARE_CLASS")

CLASS_WORDS = ("city_name", "day_name", "period_name", "time_value", "airline_name", "class_type")

PREPOSITIONS = ("from", "to", "between", "on", "in", "via", "at", "with", "for", "into", "of", "around")

DEPARTURE_POINTS = tuple(
    f"{side}_{place}"
    for side, place in product(
        ("north", "south", "east", "west", "main", "old", "new", "upper"),
        ("terminal", "gate", "field", "station", "pier", "concourse", "wing", "hall", "plaza", "yard"),
    )
)

ARRIVAL_AREAS = tuple(
    f"{part}_{area}"
    for part, area in product(
        ("downtown", "uptown", "midtown", "harbor", "central", "lower", "inner", "outer"),
        ("district", "quarter", "side", "center", "square", "park", "bay", "heights", "village", "market"),
    )
)

# {DEP} e {ARR} sorteiam uma palavra da cauda; com "?", só às vezes
TAILS: Mapping[str, Tuple[Tuple[str, ...], float]] = {
    "DEP": (DEPARTURE_POINTS, 0.65),
    "ARR": (ARRIVAL_AREAS, 0.25),
}

# {SLOT:classe} marca um valor de slot
OPENERS = (
    ("i want to fly", 2.0),
    ("i would like to fly", 1.0),
    ("i need a flight", 1.0),
    ("show me flights", 2.0),
    ("list flights", 1.0),
    ("what flights are there", 1.0),
    ("give me the flights", 1.0),
    ("are there any flights", 1.0),
    ("find me a flight", 1.0),
    ("i want to go", 1.0),
)

ROUTES = (
    ("from {FROMLOC:city_name} {DEP?} to {TOLOC:city_name} {ARR?}", 4.5),
    ("to {TOLOC:city_name} {ARR} from {FROMLOC:city_name} {DEP}", 2.0),
    ("to {TOLOC:city_name} {ARR?}", 1.5),
    ("going to {TOLOC:city_name} {ARR?}", 0.5),
    ("from {FROMLOC:city_name} {DEP}", 0.3),
    ("between {FROMLOC:city_name} and {TOLOC:city_name} {ARR?}", 1.0),
    ("leaving {FROMLOC:city_name} arriving in {TOLOC:city_name} {ARR?}", 0.5),
    ("out of {FROMLOC:city_name} into {TOLOC:city_name} {ARR?}", 0.5),
)

MODIFIERS = (
    ("on {DATE:day_name}", 3.0),
    ("departing on {DATE:day_name}", 1.0),
    ("for {DATE:day_name}", 1.0),
    ("with a {RETURN_DATE:day_name} return", 1.0),
    ("plus a {RETURN_DATE:day_name} return flight", 0.5),
    ("in the {TIME:period_name}", 2.0),
    ("at {TIME:time_value}", 1.0),
    ("around {TIME:time_value}", 0.5),
    ("on {AIRLINE:airline_name}", 1.0),
    ("with {AIRLINE:airline_name}", 1.0),
    ("flying {AIRLINE:airline_name}", 0.5),
    ("in {FARE_CLASS:class_type} class", 1.0),
    ("with a stop in {STOPLOC:city_name} en route", 0.7),
    ("via {STOPLOC:city_name} en route", 0.5),
)

CLOSERS = (
    ("", 5.0),
    ("please", 1.0),
    ("thanks", 0.5),
    ("if possible", 0.5),
)

MODIFIER_COUNT_WEIGHTS = (1.0, 2.0, 1.5)

_SLOT = re.compile(r"\{([A-Z_]+):([a-z_]+)\}")
_TAIL = re.compile(r"\{([A-Z]+)(\??)\}")


def synthetic_lexicon() -> Lexicon:
    return Lexicon(frozenset(CLASS_WORDS), frozenset(PREPOSITIONS))


def _pick(rng: np.random.Generator, options: Sequence[Tuple[str, float]]) -> str:
    weights = np.array([w for _, w in options], dtype=float)
    return options[int(rng.choice(len(options), p=weights / weights.sum()))][0]


def _expand(template: str, rng: np.random.Generator) -> Tuple[List[str], List[Tuple[str, str]]]:
    words, slots = [], []
    for piece in template.split():
        slot = _SLOT.fullmatch(piece)
        tail = _TAIL.fullmatch(piece)
        if slot:
            name, cls = slot.groups()
            words.append(cls)
            slots.append((name, cls))
        elif tail:
            vocabulary, rate = TAILS[tail.group(1)]
            if not tail.group(2) or rng.random() < rate:
                words.append(vocabulary[int(rng.integers(len(vocabulary)))])
        else:
            words.append(piece)
    return words, slots


def derive_sentence(rng: np.random.Generator) -> Tuple[List[str], List[Tuple[str, str]]]:
    """Uma derivação: abertura, rota, 0-2 modificadores distintos e fechamento"""
    parts = [_pick(rng, OPENERS), _pick(rng, ROUTES)]
    weights = np.array(MODIFIER_COUNT_WEIGHTS)
    n_modifiers = int(rng.choice(len(weights), p=weights / weights.sum()))
    if n_modifiers:
        mod_weights = np.array([w for _, w in MODIFIERS])
        chosen = rng.choice(len(MODIFIERS), size=n_modifiers, replace=False, p=mod_weights / mod_weights.sum())
        parts.extend(MODIFIERS[int(i)][0] for i in chosen)
    closer = _pick(rng, CLOSERS)
    if closer:
        parts.append(closer)

    words, slots = [], []
    for part in parts:
        w, s = _expand(part, rng)
        words.extend(w)
        slots.extend(s)
    return words, slots


def generate_synthetic(
    grammar_seed: int, n_sentences: int
) -> Tuple[List[AlignedSentence], LabelAlphabet, Lexicon]:
    if n_sentences < 1:
        raise ConfigError(f"n_sentences deve ser >= 1 (recebido {n_sentences})")

    rng = np.random.default_rng(int(grammar_seed))
    derivations = [derive_sentence(rng) for _ in range(n_sentences)]

    emitted = {slot for _, slots in derivations for slot, _ in slots}
    alphabet = LabelAlphabet(slot for slot in SLOT_ORDER if slot in emitted)
    lexicon = synthetic_lexicon()

    sentences = []
    for words, slots in derivations:
        tokens = tuple(lexicon.make_token(w) for w in words)
        labels = monotone_align(tokens, slots, alphabet)
        sentences.append(AlignedSentence(tokens, tuple(labels)))

    logger.info(
        f"🔍 Corpus sintético v{GRAMMAR_VERSION}: {n_sentences} sentenças, "
        f"semente {grammar_seed}, {len(alphabet)} rótulos"
    )
    return sentences, alphabet, lexicon

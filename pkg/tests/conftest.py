import logging

import pytest

from models.corpus import AlignedSentence, LabelAlphabet, Lexicon
from services.synthetic import generate_synthetic

LEXICON = Lexicon(
    class_words=frozenset({"city_name", "day_name", "period_name"}),
    prepositions=frozenset({"from", "to", "on", "in"}),
)

TINY = [
    (["from", "city_name", "to", "city_name"], ["O", "FROMLOC", "O", "TOLOC"]),
    (["to", "city_name", "on", "day_name"], ["O", "TOLOC", "O", "DATE"]),
    (["flights", "from", "city_name"], ["O", "O", "FROMLOC"]),
    (["show", "flights", "to", "city_name", "in", "the", "period_name"], ["O", "O", "O", "TOLOC", "O", "O", "O"]),
]


def sentence(words, labels=None, alphabet=None, lexicon=LEXICON) -> AlignedSentence:
    tokens = tuple(lexicon.make_token(w) for w in words)
    ids = None if labels is None else tuple(alphabet.add(label) for label in labels)
    return AlignedSentence(tokens, ids)


@pytest.fixture
def lexicon():
    return LEXICON


@pytest.fixture
def make_sentence():
    return sentence


@pytest.fixture
def tiny_corpus():
    alphabet = LabelAlphabet()
    sentences = [sentence(words, labels, alphabet) for words, labels in TINY]
    return sentences, alphabet


@pytest.fixture(scope="session")
def synthetic_small():
    return generate_synthetic(7, 150)


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    monkeypatch.setenv("SLOTCRF_PROGRESS", "0")
    logging.getLogger().setLevel(logging.INFO)

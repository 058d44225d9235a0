import pytest

from errors import AlignmentError, ConfigError, ContractError, CorpusParseError, CorpusStructureError, EmptyCorpusError
from models.corpus import LabelAlphabet, Lexicon, SplitSpec, Token
from services.corpus_io import (
    format_corpus,
    holdout_split,
    load_corpus,
    load_lexicon,
    monotone_align,
    restore_labels,
    save_corpus,
    save_lexicon,
    split_corpus,
    strip_labels,
)


def write(tmp_path, text, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCorpus:
    def test_labeled_and_unlabeled_sentences(self, tmp_path, lexicon):
        path = write(tmp_path, "from\tO\ncity_name\tFROMLOC\n\n\nshow\nflights\n")
        sentences, alphabet = load_corpus(path, lexicon=lexicon)
        assert len(sentences) == 2
        assert sentences[0].labels == (0, alphabet.lookup("FROMLOC"))
        assert sentences[0].tokens[0].is_preposition
        assert sentences[0].tokens[1].is_class
        assert not sentences[1].is_labeled
        assert alphabet.labels == ("O", "FROMLOC")

    def test_class_map_replaces_surface(self, tmp_path):
        lexicon = Lexicon(frozenset(), frozenset({"to"}), class_map={"boston": "city_name"})
        sentences, _ = load_corpus(write(tmp_path, "to\tO\nboston\tTOLOC\n"), lexicon=lexicon)
        assert sentences[0].surfaces == ("to", "city_name")
        assert sentences[0].tokens[1].is_class

    def test_existing_alphabet_is_not_mutated(self, tmp_path):
        alphabet = LabelAlphabet(["TOLOC"])
        _, extended = load_corpus(write(tmp_path, "a\tDATE\n"), alphabet)
        assert "DATE" in extended
        assert "DATE" not in alphabet

    def test_crlf_tolerated(self, tmp_path):
        sentences, _ = load_corpus(write(tmp_path, "a\tO\r\nb\tO\r\n"))
        assert sentences[0].surfaces == ("a", "b")

    def test_too_many_fields_reports_line(self, tmp_path):
        with pytest.raises(CorpusParseError) as info:
            load_corpus(write(tmp_path, "a\tO\nb\tO\textra\n"))
        assert info.value.line_number == 2

    def test_space_in_token(self, tmp_path):
        with pytest.raises(CorpusParseError):
            load_corpus(write(tmp_path, "new york\tO\n"))

    def test_mixed_sentence(self, tmp_path):
        with pytest.raises(CorpusStructureError):
            load_corpus(write(tmp_path, "a\tO\nb\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyCorpusError):
            load_corpus(write(tmp_path, "\n\n"))

    def test_save_then_load_keeps_content(self, tmp_path, tiny_corpus):
        sentences, alphabet = tiny_corpus
        path = save_corpus(sentences + [sentences[0].unlabeled()], alphabet, tmp_path / "out" / "c.tsv")
        loaded, loaded_alphabet = load_corpus(path, alphabet)
        assert [s.surfaces for s in loaded] == [s.surfaces for s in sentences + [sentences[0]]]
        assert [s.labels for s in loaded[:-1]] == [s.labels for s in sentences]
        assert loaded[-1].labels is None
        assert format_corpus(loaded, loaded_alphabet) == path.read_text()


class TestLexicon:
    def test_sections(self, tmp_path):
        path = write(tmp_path, "# léxico\n[classes]\ncity_name\ndallas\tcity_name\n\n[prepositions]\nto\n", "lex.txt")
        lexicon = load_lexicon(path)
        assert lexicon.class_words == frozenset({"city_name"})
        assert lexicon.class_map == {"dallas": "city_name"}
        assert lexicon.prepositions == frozenset({"to"})
        assert lexicon.make_token("dallas") == Token("city_name", is_class=True)

    def test_save_and_load(self, tmp_path, lexicon):
        assert load_lexicon(save_lexicon(lexicon, tmp_path / "lex.txt")) == lexicon

    def test_unknown_section(self, tmp_path):
        with pytest.raises(CorpusParseError):
            load_lexicon(write(tmp_path, "[verbs]\nfly\n", "lex.txt"))

    def test_entry_outside_section(self, tmp_path):
        with pytest.raises(CorpusParseError):
            load_lexicon(write(tmp_path, "city_name\n", "lex.txt"))

    def test_class_and_preposition_overlap(self):
        with pytest.raises(ContractError):
            Lexicon(frozenset({"to"}), frozenset({"to"}))


class TestSplits:
    def test_split_is_deterministic_partition(self, synthetic_small):
        sentences, _, _ = synthetic_small
        spec = SplitSpec(0.1, rng_seed=1, repeat_index=3)
        split = split_corpus(sentences, spec)
        assert len(split.labeled) == 15
        assert set(split.labeled_indices) | set(split.unlabeled_indices) == set(range(len(sentences)))
        assert not set(split.labeled_indices) & set(split.unlabeled_indices)
        assert all(not s.is_labeled for s in split.unlabeled)
        assert split.restored_unlabeled() == [sentences[i] for i in split.unlabeled_indices]
        assert split_corpus(sentences, spec) == split

    def test_strip_and_restore(self, tiny_corpus):
        sentences, _ = tiny_corpus
        stripped, gold = strip_labels(sentences)
        assert all(not s.is_labeled for s in stripped)
        assert restore_labels(stripped, gold) == list(sentences)
        with pytest.raises(ContractError):
            restore_labels(stripped, gold[:-1])

    def test_repeats_differ(self, synthetic_small):
        sentences, _, _ = synthetic_small
        a = split_corpus(sentences, SplitSpec(0.2, 1, 0))
        b = split_corpus(sentences, SplitSpec(0.2, 1, 1))
        assert a.labeled_indices != b.labeled_indices

    def test_full_fraction(self, tiny_corpus):
        sentences, _ = tiny_corpus
        split = split_corpus(sentences, SplitSpec(1.0))
        assert list(split.labeled) == sentences
        assert split.unlabeled == ()

    def test_fraction_out_of_range(self, tiny_corpus):
        sentences, _ = tiny_corpus
        with pytest.raises(ConfigError):
            split_corpus(sentences, SplitSpec(0.0))

    def test_holdout_never_overlaps(self, synthetic_small):
        sentences, _, _ = synthetic_small
        train, test = holdout_split(sentences, 0.2, seed=4)
        assert len(test) == 30 and len(train) == 120
        assert holdout_split(sentences, 0.2, seed=4) == (train, test)
        assert not {id(s) for s in train} & {id(s) for s in test}


class TestAlign:
    def test_left_to_right(self):
        alphabet = LabelAlphabet(["FROMLOC", "TOLOC"])
        tokens = ["from", "city_name", "to", "city_name"]
        labels = monotone_align(tokens, [("FROMLOC", "city_name"), ("TOLOC", "city_name")], alphabet)
        assert labels == [0, 1, 0, 2]

    def test_value_out_of_order(self):
        alphabet = LabelAlphabet(["FROMLOC", "TOLOC"])
        with pytest.raises(AlignmentError) as info:
            monotone_align(["to", "city_name"], [("TOLOC", "city_name"), ("FROMLOC", "city_name")], alphabet)
        assert info.value.slot == "FROMLOC"

    def test_unknown_slot(self):
        with pytest.raises(AlignmentError):
            monotone_align(["a"], [("DATE", "a")], LabelAlphabet())

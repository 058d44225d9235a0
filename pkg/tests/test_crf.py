import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import logsumexp

from errors import ContractError, DataError, NumericalError
from models.corpus import AlignedSentence, LabelAlphabet, Token
from models.crf_model import DEFAULT_TEMPLATES, CrfModel, FeatureIndex, FeatureTemplate
from services import crf


def brute_force(node, trans):
    T, L = node.shape
    paths = list(itertools.product(range(L), repeat=T))
    scores = np.array([
        sum(node[t, y[t]] for t in range(T)) + sum(trans[y[t - 1], y[t]] for t in range(1, T))
        for y in paths
    ])
    log_z = logsumexp(scores)
    probs = np.exp(scores - log_z)
    marg = np.zeros((T, L))
    for p, y in zip(probs, paths):
        for t in range(T):
            marg[t, y[t]] += p
    return log_z, marg, list(paths[int(np.argmax(scores))]), scores, paths


class TestFeatures:
    def test_window_features_with_boundary(self):
        tokens = [Token("to", is_preposition=True), Token("city_name", is_class=True)]
        assert crf.instantiate_features(tokens, 0) == [
            "U[+0]=to",
            "U[+1]=city_name",
            "U[+2]=__END__",
            "B[+0,+1]=to/city_name",
            "B[+1,+2]=city_name/__END__",
            "C[+1]",
            "P[+0]",
        ]

    def test_boolean_features_only_when_true(self):
        tokens = [Token("show"), Token("me"), Token("flights")]
        feats = crf.instantiate_features(tokens, 0)
        assert not any(f.startswith(("C[", "P[")) for f in feats)

    def test_position_out_of_range(self):
        with pytest.raises(ContractError):
            crf.instantiate_features([Token("a")], 1)

    def test_template_validation(self):
        with pytest.raises(ContractError):
            FeatureTemplate("unigram", (3,))
        with pytest.raises(ContractError):
            FeatureTemplate("unigram", (-1,))
        with pytest.raises(ContractError):
            CrfModel.zeros(FeatureIndex(["O"]), LabelAlphabet(), DEFAULT_TEMPLATES[:-1])

    def test_template_spec_round_trip(self):
        for template in DEFAULT_TEMPLATES:
            assert FeatureTemplate.parse(template.spec()) == template


class TestFeatureIndex:
    def test_layout_transitions_first(self):
        index = FeatureIndex(["O", "A"], ["x", "y"])
        assert len(index) == 4 + 2 * 2
        assert index.name(0) == "T:O=>O"
        assert index.name(3) == "T:A=>A"
        assert index.name(4) == "x=>O"
        assert index.lookup("y=>A") == 4 + 1 * 2 + 1

    def test_extension_is_append_only(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences[:2], alphabet)
        rng = np.random.default_rng(0)
        model = model.with_weights(rng.normal(size=len(model.weights)))
        names = [model.feature_index.name(i) for i in range(len(model.weights))]

        extended = crf.extend_model(model, sentences[2:])
        assert len(extended.weights) > len(model.weights)
        assert_allclose(extended.weights[: len(model.weights)], model.weights)
        assert all(extended.feature_index.lookup(n) == i for i, n in enumerate(names))
        assert np.all(extended.weights[len(model.weights):] == 0)


class TestInferenceOracle:
    def test_against_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(220):
            T = int(rng.integers(1, 6))
            L = int(rng.integers(1, 5))
            node = rng.normal(scale=2.0, size=(T, L))
            trans = rng.normal(scale=2.0, size=(L, L))
            log_z, marg, best, _, _ = brute_force(node, trans)

            table = crf.forward_backward(node, trans)
            assert table.sentence_log_z == pytest.approx(log_z, abs=1e-9)
            assert_allclose(table.node, marg, atol=1e-9)
            assert crf.viterbi(node, trans) == best

    def test_constrained_viterbi_against_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(220):
            T = int(rng.integers(1, 6))
            L = int(rng.integers(1, 5))
            p_hat = rng.dirichlet(np.ones(L), size=T)
            trans = rng.normal(size=(L, L))
            _, _, best, _, _ = brute_force(np.log(np.maximum(p_hat, 1e-12)), trans)
            assert crf.constrained_viterbi(p_hat, trans) == best

    def test_pair_scores_rebuild_sequence_probability(self):
        rng = np.random.default_rng(11)
        for _ in range(120):
            T = int(rng.integers(1, 6))
            L = int(rng.integers(1, 5))
            node = rng.normal(scale=2.0, size=(T, L))
            trans = rng.normal(scale=2.0, size=(L, L))
            log_z, _, _, scores, paths = brute_force(node, trans)

            table = crf.forward_backward(node, trans)
            assert table.pair_scores.shape == (T - 1, L, L)
            for y, s in zip(paths, scores):
                rebuilt = sum(np.log(table.node[t, y[t]]) for t in range(T))
                rebuilt += sum(table.pair_scores[t - 1, y[t - 1], y[t]] for t in range(1, T))
                assert rebuilt == pytest.approx(s - log_z, abs=1e-8)

    def test_constrained_viterbi_on_exact_marginals_matches_viterbi(self):
        rng = np.random.default_rng(12)
        for _ in range(150):
            T = int(rng.integers(1, 7))
            L = int(rng.integers(1, 5))
            node = rng.normal(size=(T, L))
            trans = rng.normal(size=(L, L))
            table = crf.forward_backward(node, trans)
            assert crf.constrained_viterbi(table.node, table.pair_scores) == crf.viterbi(node, trans)

    def test_positional_transitions_need_one_matrix_per_step(self):
        with pytest.raises(ContractError):
            crf.viterbi(np.zeros((3, 2)), np.zeros((3, 2, 2)))

    def test_viterbi_tie_goes_to_lowest_label(self):
        assert crf.viterbi(np.zeros((3, 3)), np.zeros((3, 3))) == [0, 0, 0]

    def test_constrained_viterbi_rejects_unnormalized_rows(self):
        with pytest.raises(ContractError):
            crf.constrained_viterbi(np.array([[0.5, 0.6]]), np.zeros((2, 2)))
        with pytest.raises(ContractError):
            crf.constrained_viterbi(np.array([[1.2, -0.2]]), np.zeros((2, 2)))

    def test_constrained_viterbi_handles_zero_probabilities(self):
        p_hat = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert crf.constrained_viterbi(p_hat, np.zeros((2, 2))) == [0, 1]

    def test_marginals_rows_sum_to_one(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences, alphabet)
        model = model.with_weights(np.random.default_rng(1).normal(size=len(model.weights)))
        for table in crf.marginals(model, sentences):
            assert_allclose(table.node.sum(axis=1), 1.0, atol=1e-12)

    def test_batched_marginals_match_single_sentence(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences, alphabet)
        model = model.with_weights(np.random.default_rng(2).normal(size=len(model.weights)))
        for s, table in zip(sentences, crf.marginals(model, sentences)):
            single = crf.forward_backward(*crf.score_tables(s, model))
            assert_allclose(table.node, single.node, atol=1e-12)
            assert_allclose(table.pair_scores, single.pair_scores, atol=1e-9)
            assert table.sentence_log_z == pytest.approx(single.sentence_log_z)


def random_problem(rng, n_sentences=4):
    vocab = ["a", "b", "c", "to", "city_name"]
    alphabet = LabelAlphabet(["X", "Y"])
    sentences = []
    for _ in range(n_sentences):
        T = int(rng.integers(1, 5))
        words = rng.choice(vocab, size=T)
        tokens = tuple(
            Token(str(w), is_class=(w == "city_name"), is_preposition=(w == "to")) for w in words
        )
        labels = tuple(int(y) for y in rng.integers(0, len(alphabet), size=T))
        sentences.append(AlignedSentence(tokens, labels))
    model = crf.build_model(sentences, alphabet)
    return sentences, model.with_weights(rng.normal(scale=0.5, size=len(model.weights)))


class TestLikelihood:
    def test_matches_brute_force_log_probability(self):
        rng = np.random.default_rng(3)
        sentences, model = random_problem(rng)
        expected = 0.0
        for s in sentences:
            node, trans = crf.score_tables(s, model)
            log_z, _, _, scores, paths = brute_force(node, trans)
            expected -= scores[paths.index(tuple(s.labels))] - log_z
        value, _ = crf.log_likelihood_and_gradient(sentences, model)
        assert value == pytest.approx(expected, abs=1e-9)

    def test_gradient_against_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            sentences, model = random_problem(rng)
            batch = crf.encode(sentences, model)
            labels = [s.labels for s in sentences]

            def f(w):
                return crf.batch_objective(batch, labels, model.with_weights(w), 1.0)[0]

            _, analytic = crf.batch_objective(batch, labels, model, 1.0)
            numeric = np.zeros_like(analytic)
            eps = 1e-5
            for i in range(len(model.weights)):
                step = np.zeros_like(model.weights)
                step[i] = eps
                numeric[i] = (f(model.weights + step) - f(model.weights - step)) / (2 * eps)
            scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
            assert np.linalg.norm(analytic - numeric) / scale < 1e-6

    def test_weight_scales_value_and_gradient(self):
        sentences, model = random_problem(np.random.default_rng(5))
        v1, g1 = crf.log_likelihood_and_gradient(sentences, model, 1.0)
        v3, g3 = crf.log_likelihood_and_gradient(sentences, model, 3.0)
        assert v3 == pytest.approx(3 * v1)
        assert_allclose(g3, 3 * g1)

    def test_requires_labels(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences, alphabet)
        with pytest.raises(ContractError):
            crf.log_likelihood_and_gradient([sentences[0].unlabeled()], model)

    def test_nan_weights_abort(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences, alphabet)
        weights = model.weights.copy()
        weights[0] = np.nan
        with pytest.raises(NumericalError):
            crf.log_likelihood_and_gradient(sentences, model.with_weights(weights))


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = crf.build_model(sentences, alphabet)
        model = model.with_weights(np.random.default_rng(9).normal(size=len(model.weights)) / 3)
        path = crf.save_model(model, tmp_path / "model.txt")

        loaded = crf.load_model(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.alphabet == model.alphabet
        assert loaded.templates == model.templates
        assert loaded.feature_index.attributes == model.feature_index.attributes
        assert crf.decode(loaded, sentences) == crf.decode(model, sentences)

    def test_header_is_versioned(self, tmp_path, tiny_corpus):
        sentences, alphabet = tiny_corpus
        path = crf.save_model(crf.build_model(sentences, alphabet), tmp_path / "m.txt")
        lines = path.read_text().splitlines()
        assert lines[0] == "#slotcrf-model v1"
        assert lines[1].startswith("#templates\t")
        assert lines[2] == "#labels\t" + "\t".join(alphabet.labels)

    def test_rejects_unknown_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("#other-format\n")
        with pytest.raises(DataError):
            crf.load_model(path)


class TestHandValues:
    def test_single_token_uniform_model(self):
        alphabet = LabelAlphabet(["A"])
        sentence = AlignedSentence((Token("a"),), (1,))
        model = crf.build_model([sentence], alphabet)
        value, gradient = crf.log_likelihood_and_gradient([sentence], model, 2.0)
        assert value == pytest.approx(2.0 * np.log(2))
        index = model.feature_index
        assert gradient[index.lookup("U[+0]=a=>A")] == pytest.approx(2.0 * (0.5 - 1.0))
        assert gradient[index.lookup("U[+0]=a=>O")] == pytest.approx(2.0 * 0.5)

    def test_zero_weight_vanishes(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        value, gradient = crf.log_likelihood_and_gradient(sentences, crf.build_model(sentences, alphabet), 0.0)
        assert value == 0.0
        assert not gradient.any()

    def test_shift_at_one_position_changes_nothing(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            node = rng.normal(size=(4, 3))
            trans = rng.normal(size=(3, 3))
            shifted = node.copy()
            shifted[int(rng.integers(0, 4))] += rng.normal() * 5
            assert_allclose(crf.forward_backward(shifted, trans).node, crf.forward_backward(node, trans).node, atol=1e-12)
            assert crf.viterbi(shifted, trans) == crf.viterbi(node, trans)

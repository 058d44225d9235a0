import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import ContractError, NumericalError
from models.config import OptimizerConfig
from services import crf
from services.optimizer import TrainingObjective, fit, lbfgs, minimize


def quadratic(a):
    def fun(x):
        d = x - a
        return float(d.dot(d)), 2 * d
    return fun


class TestLbfgs:
    def test_quadratic_converges_to_optimum(self):
        a = np.array([1.5, -2.0, 0.25, 4.0])
        result = lbfgs(quadratic(a), np.zeros(4), OptimizerConfig(grad_tolerance=1e-9, stall_delta=0.0))
        assert_allclose(result.x, a, atol=1e-6)
        assert result.iterations <= 25
        assert result.converged

    def test_ill_conditioned_quadratic(self):
        scales = np.array([1.0, 10.0, 100.0])
        a = np.array([1.0, -1.0, 2.0])

        def fun(x):
            d = x - a
            return float(np.sum(scales * d * d)), 2 * scales * d

        result = lbfgs(fun, np.zeros(3), OptimizerConfig(grad_tolerance=1e-8, stall_delta=0.0))
        assert_allclose(result.x, a, atol=1e-6)

    def test_accepted_steps_never_increase(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(6, 6))
        H = A @ A.T + np.eye(6)
        b = rng.normal(size=6)

        def fun(x):
            return float(0.5 * x @ H @ x - b @ x), H @ x - b

        result = lbfgs(fun, rng.normal(size=6))
        assert all(later <= earlier for earlier, later in zip(result.trace, result.trace[1:]))

    def test_first_trial_step_has_unit_length(self):
        seen = []
        a = np.full(3, 1000.0)

        def fun(x):
            seen.append(x.copy())
            d = x - a
            return float(0.5 * d.dot(d)), d

        lbfgs(fun, np.zeros(3), OptimizerConfig(max_iterations=1))
        assert np.linalg.norm(seen[1] - seen[0]) == pytest.approx(1.0)

    def test_stalled_descent_stops_early(self):
        def fun(x):
            e = float(np.exp(-x[0]))
            return 1.0 + e, np.array([-e])

        config = OptimizerConfig(grad_tolerance=1e-300, max_iterations=500)
        result = lbfgs(fun, np.zeros(1), config)
        assert result.stalled and result.converged
        assert result.iterations < 500
        assert not lbfgs(fun, np.zeros(1), config.model_copy(update={"stall_delta": 0.0})).stalled

    def test_nan_aborts_with_iteration(self):
        def fun(x):
            return float("nan"), np.zeros_like(x)

        with pytest.raises(NumericalError, match="iteração 0"):
            lbfgs(fun, np.zeros(2))

    def test_line_search_failure_keeps_best_point(self, caplog):
        # gradiente que aponta para o lado errado: nenhum passo satisfaz Armijo
        def fun(x):
            return float(x.sum()), -np.ones_like(x)

        x0 = np.zeros(3)
        result = lbfgs(fun, x0, OptimizerConfig(max_line_search_steps=5))
        assert result.line_search_failed
        assert not result.converged
        assert_allclose(result.x, x0)
        assert "Busca linear falhou" in caplog.text


class TestTrainingObjective:
    def test_eta_zero_matches_supervised_objective(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        labeled, decoded = sentences[:2], sentences[2:]
        model = crf.extend_model(crf.build_model(labeled, alphabet), decoded)
        model = model.with_weights(np.random.default_rng(4).normal(size=len(model.weights)))

        mixed = TrainingObjective(labeled, decoded, gamma=0.01, eta=0.0).bind(model)(model.weights)
        plain = TrainingObjective(labeled, (), gamma=0.01, eta=0.0).bind(model)(model.weights)
        assert mixed[0] == plain[0]
        assert np.array_equal(mixed[1], plain[1])

    def test_eta_zero_and_empty_unlabeled_give_identical_traces(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        labeled, decoded = sentences[:2], sentences[2:]
        initial = crf.extend_model(crf.build_model(labeled, alphabet), decoded)

        _, with_decoded = fit(TrainingObjective(labeled, decoded, gamma=0.1, eta=0.0), initial)
        _, without = fit(TrainingObjective(labeled, (), gamma=0.1, eta=0.0), initial)
        assert with_decoded.trace == without.trace

    def test_total_includes_regularizer_and_eta(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        labeled, decoded = sentences[:2], sentences[2:]
        model = crf.extend_model(crf.build_model(labeled, alphabet), decoded)
        model = model.with_weights(np.random.default_rng(8).normal(size=len(model.weights)))

        value = TrainingObjective(labeled, decoded, gamma=0.5, eta=0.3).value(model)
        lab, _ = crf.log_likelihood_and_gradient(labeled, model)
        unl, _ = crf.log_likelihood_and_gradient(decoded, model)
        reg = 0.5 * float(model.weights.dot(model.weights))
        assert value == pytest.approx(lab + 0.3 * unl + reg)

    def test_large_gamma_gives_near_zero_weights(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        model = minimize(TrainingObjective(sentences, (), gamma=1e6, eta=0.0), crf.build_model(sentences, alphabet))
        assert np.max(np.abs(model.weights)) < 1e-3

    def test_result_not_worse_than_initial(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        objective = TrainingObjective(sentences, (), gamma=0.01, eta=0.0)
        initial = crf.build_model(sentences, alphabet)
        trained = minimize(objective, initial)
        assert objective.value(trained) <= objective.value(initial)

    def test_convex_problem_from_two_starts(self, tiny_corpus):
        sentences, alphabet = tiny_corpus
        objective = TrainingObjective(sentences, (), gamma=0.1, eta=0.0)
        initial = crf.build_model(sentences, alphabet)
        other = initial.with_weights(np.random.default_rng(3).normal(size=len(initial.weights)))
        config = OptimizerConfig(grad_tolerance=1e-7, max_iterations=500, stall_delta=0.0)

        a = objective.value(minimize(objective, initial, config))
        b = objective.value(minimize(objective, other, config))
        assert abs(a - b) <= 1e-4 * max(abs(a), abs(b))

    def test_unlabeled_must_carry_labels(self, tiny_corpus):
        sentences, _ = tiny_corpus
        with pytest.raises(ContractError):
            TrainingObjective(sentences[:1], [sentences[1].unlabeled()])

    def test_negative_rates_rejected(self, tiny_corpus):
        sentences, _ = tiny_corpus
        with pytest.raises(ContractError):
            TrainingObjective(sentences, (), gamma=-1.0)

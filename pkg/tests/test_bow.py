"""Tests for bag-of-words features, Multinomial Naive Bayes and linear SVM."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_doc, separable_fixture
from ppkmsent.bow import (
    MODEL_MAGIC,
    BowVocab,
    SvmConfig,
    SvmModel,
    build_vocab,
    hinge_objective,
    load_model,
    mnb_predict,
    mnb_train,
    save_model,
    svm_predict,
    svm_train,
    vectorize,
)
from ppkmsent.errors import CheckpointFormatError, MissingClassError
from ppkmsent.preprocess import SentimentLabel

NEG, NEU, POS = (
    SentimentLabel.NEGATIVE,
    SentimentLabel.NEUTRAL,
    SentimentLabel.POSITIVE,
)


def three_class_docs():
    return [
        make_doc(["ppkm", "rugi"], NEG, "d0"),
        make_doc(["ppkm", "berlaku"], NEU, "d1"),
        make_doc(["ppkm", "bagus"], POS, "d2"),
    ]


class TestBuildVocab:
    def test_document_frequency_counts_documents_not_tokens(self):
        docs = [
            make_doc(["ppkm", "ppkm", "jakarta"], doc_id="a"),
            make_doc(["ppkm"], doc_id="b"),
        ]
        vocab = build_vocab(docs)
        idx = vocab.token_to_index["ppkm"]
        assert vocab.document_frequency[idx] == 2
        assert vocab.num_documents == 2

    def test_index_order_by_count_then_lexicographic(self):
        docs = [
            make_doc(["b", "b", "a", "c"], doc_id="a"),
            make_doc(["a", "c"], doc_id="b"),
        ]
        vocab = build_vocab(docs)
        # counts: a=2, b=2, c=2 -> all tie, lexicographic
        assert vocab.tokens_in_index_order() == ["a", "b", "c"]
        docs.append(make_doc(["b"], doc_id="c"))
        vocab = build_vocab(docs)
        # now b=3 leads
        assert vocab.tokens_in_index_order() == ["b", "a", "c"]

    def test_indices_are_dense(self):
        vocab = build_vocab([make_doc(["x", "y", "z"], doc_id="a")])
        assert sorted(vocab.token_to_index.values()) == list(range(vocab.size))

    def test_min_count_drops_hapax_tokens(self):
        docs = [
            make_doc(["ppkm", "unik"], doc_id="a"),
            make_doc(["ppkm"], doc_id="b"),
        ]
        vocab = build_vocab(docs, min_count=2)
        assert vocab.tokens_in_index_order() == ["ppkm"]

    def test_validation(self):
        with pytest.raises(ValueError, match="empty"):
            build_vocab([])
        with pytest.raises(ValueError, match="min_count"):
            build_vocab([make_doc(["x"], doc_id="a")], min_count=0)

    def test_order_invariant_under_document_permutation(self):
        docs = [
            make_doc(["ppkm", "jakarta"], doc_id="a"),
            make_doc(["jakarta"], doc_id="b"),
            make_doc(["ppkm", "covid19"], doc_id="c"),
        ]
        forward = build_vocab(docs)
        backward = build_vocab(list(reversed(docs)))
        assert forward == backward
        assert all(
            df <= forward.num_documents for df in forward.document_frequency
        )


class TestVectorize:
    def test_oov_only_document_is_a_zero_vector(self):
        vocab = build_vocab([make_doc(["ppkm"], doc_id="a")])
        assert vectorize(make_doc(["asing"], doc_id="b"), vocab) == {}

    def test_tf_counts(self):
        vocab = build_vocab([make_doc(["ppkm", "jakarta"], doc_id="a")])
        row = vectorize(make_doc(["ppkm", "ppkm"], doc_id="b"), vocab, mode="tf")
        assert row == {vocab.token_to_index["ppkm"]: 2.0}

    def test_tfidf_matches_hand_computed_formula(self):
        docs = [
            make_doc(["ppkm", "jakarta"], doc_id="a"),
            make_doc(["ppkm"], doc_id="b"),
            make_doc(["ppkm", "bali"], doc_id="c"),
        ]
        vocab = build_vocab(docs)
        row = vectorize(
            make_doc(["ppkm", "ppkm", "jakarta"], doc_id="q"), vocab, mode="tfidf"
        )
        n = 3
        w_ppkm = 2.0 * (math.log((1 + n) / (1 + 3)) + 1.0)
        w_jakarta = 1.0 * (math.log((1 + n) / (1 + 1)) + 1.0)
        norm = math.sqrt(w_ppkm**2 + w_jakarta**2)
        assert row[vocab.token_to_index["ppkm"]] == pytest.approx(w_ppkm / norm, abs=1e-12)
        assert row[vocab.token_to_index["jakarta"]] == pytest.approx(
            w_jakarta / norm, abs=1e-12
        )

    def test_tfidf_rows_have_unit_norm(self):
        docs = three_class_docs()
        vocab = build_vocab(docs)
        for doc in docs:
            row = vectorize(doc, vocab, mode="tfidf")
            assert math.sqrt(sum(v * v for v in row.values())) == pytest.approx(1.0)

    def test_unsupported_mode(self):
        vocab = build_vocab([make_doc(["x"], doc_id="a")])
        with pytest.raises(ValueError, match="feature mode"):
            vectorize(make_doc(["x"], doc_id="b"), vocab, mode="binary")


def fraction_mnb_scores(train, vocab, alpha, tokens):
    """Independent Bayes computation in exact rational arithmetic."""
    n = len(train)
    v = vocab.size
    scores = []
    for c in range(3):
        class_docs = [d for d in train if int(d.label) == c]
        prior = Fraction(len(class_docs), n)
        token_counts = {}
        total = 0
        for doc in class_docs:
            for token in doc.tokens:
                if token in vocab.token_to_index:
                    token_counts[token] = token_counts.get(token, 0) + 1
                    total += 1
        score = math.log(prior)
        for token in tokens:
            if token not in vocab.token_to_index:
                continue
            score += math.log(
                Fraction(token_counts.get(token, 0) + alpha, total + alpha * v)
            )
        scores.append(score)
    return scores


class TestMnb:
    def test_balanced_corpus_has_uniform_priors(self):
        docs = [
            make_doc(["a"], NEG, "d0"),
            make_doc(["b"], NEG, "d1"),
            make_doc(["c"], NEU, "d2"),
            make_doc(["d"], NEU, "d3"),
            make_doc(["e"], POS, "d4"),
            make_doc(["f"], POS, "d5"),
        ]
        model = mnb_train(docs, build_vocab(docs))
        assert np.allclose(model.class_log_prior, math.log(1 / 3), atol=1e-12)

    def test_prior_and_likelihood_rows_normalize(self):
        docs = three_class_docs() + [make_doc(["ppkm", "rugi", "rugi"], NEG, "d3")]
        model = mnb_train(docs, build_vocab(docs))
        assert np.exp(model.class_log_prior).sum() == pytest.approx(1.0, abs=1e-9)
        row_sums = np.exp(model.token_log_likelihood).sum(axis=1)
        assert np.allclose(row_sums, 1.0, atol=1e-9)

    def test_single_token_vocabulary_gives_zero_log_likelihood(self):
        # vocabulary from one single-token document: V=1, count=1, total=1,
        # so the smoothed likelihood is ln((1+1)/(1+1)) = 0 exactly
        vocab = build_vocab([make_doc(["ppkm"], NEG, "seed")])
        assert vocab.size == 1
        train = [
            make_doc(["ppkm"], NEG, "d0"),
            make_doc(["tenang"], NEU, "d1"),
            make_doc(["bagus"], POS, "d2"),
        ]
        model = mnb_train(train, vocab, alpha=1.0)
        idx = vocab.token_to_index["ppkm"]
        assert model.token_log_likelihood[int(NEG), idx] == 0.0

    def test_training_needs_every_class(self):
        docs = [make_doc(["a"], NEG, "d0"), make_doc(["b"], POS, "d1")]
        with pytest.raises(MissingClassError, match="NEUTRAL"):
            mnb_train(docs, build_vocab(docs))

    def test_validation(self):
        docs = three_class_docs()
        vocab = build_vocab(docs)
        with pytest.raises(ValueError, match="empty"):
            mnb_train([], vocab)
        with pytest.raises(ValueError, match="alpha"):
            mnb_train(docs, vocab, alpha=0.0)
        with pytest.raises(ValueError, match="unlabeled"):
            mnb_train(docs + [make_doc(["x"], None, "u")], vocab)

    def test_matches_exact_bayes_oracle_on_random_small_corpora(self):
        rng = random.Random(0)
        worst = 0.0
        for _ in range(50):
            n_docs = rng.randint(3, 10)
            universe = [f"w{i}" for i in range(rng.randint(1, 6))]
            docs = []
            for i in range(n_docs):
                label = SentimentLabel(i % 3) if i < 3 else SentimentLabel(rng.randrange(3))
                tokens = [rng.choice(universe) for _ in range(rng.randint(0, 6))]
                docs.append(make_doc(tokens, label, f"d{i}"))
            vocab = build_vocab(docs)
            model = mnb_train(docs, vocab, alpha=1.0)
            for _ in range(5):
                probe = [
                    rng.choice(universe + ["oov-token"])
                    for _ in range(rng.randint(0, 5))
                ]
                _, scores = mnb_predict(make_doc(probe, None, "probe"), model, vocab)
                oracle = fraction_mnb_scores(docs, vocab, 1, probe)
                worst = max(worst, float(np.max(np.abs(scores - np.array(oracle)))))
        assert worst < 1e-9

    def test_empty_document_falls_back_to_priors(self):
        docs = three_class_docs() + [make_doc(["ppkm", "lagi"], NEG, "d3")]
        vocab = build_vocab(docs)
        model = mnb_train(docs, vocab)
        label, scores = mnb_predict(make_doc([], None, "empty"), model, vocab)
        assert np.array_equal(scores, model.class_log_prior)
        assert label is NEG  # NEG has the largest prior (2 of 4 documents)

    def test_class_exclusive_token_wins(self):
        docs = three_class_docs()
        vocab = build_vocab(docs)
        model = mnb_train(docs, vocab)
        label, _ = mnb_predict(make_doc(["bagus", "bagus"], None, "q"), model, vocab)
        assert label is POS

    def test_exact_tie_breaks_to_lowest_label_code(self):
        docs = [
            make_doc(["t"], NEG, "d0"),
            make_doc(["t"], NEU, "d1"),
            make_doc(["t"], POS, "d2"),
        ]
        vocab = build_vocab(docs)
        model = mnb_train(docs, vocab)
        label, scores = mnb_predict(make_doc(["t"], None, "q"), model, vocab)
        assert scores[0] == scores[1] == scores[2]
        assert label is NEG

    def test_parameters_invariant_under_training_order(self):
        docs = three_class_docs() + [make_doc(["rugi", "parah"], NEG, "d3")]
        vocab = build_vocab(docs)
        a = mnb_train(docs, vocab)
        b = mnb_train(list(reversed(docs)), vocab)
        assert np.array_equal(a.class_log_prior, b.class_log_prior)
        assert np.array_equal(a.token_log_likelihood, b.token_log_likelihood)


class TestSvm:
    def train_fixture(self, **overrides):
        docs = separable_fixture()
        vocab = build_vocab(docs)
        defaults = dict(
            regularization_lambda=0.01, epochs=50, seed=0, feature_mode="tf"
        )
        defaults.update(overrides)
        return docs, vocab, svm_train(docs, vocab, SvmConfig(**defaults))

    def test_separable_fixture_reaches_full_training_accuracy(self):
        docs, vocab, model = self.train_fixture()
        correct = sum(
            1 for d in docs if svm_predict(d, model, vocab)[0] is d.label
        )
        assert correct == len(docs)

    def test_doubling_lambda_never_increases_weight_norm(self):
        norms = []
        for lam in (0.01, 0.02, 0.04, 0.08):
            _, _, model = self.train_fixture(regularization_lambda=lam)
            norms.append(float(np.linalg.norm(model.weights)))
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_same_seed_reproduces_weights_exactly(self):
        _, _, a = self.train_fixture()
        _, _, b = self.train_fixture()
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.biases, b.biases)

    def test_mean_final_objective_improves_over_twenty_seeds(self):
        docs = separable_fixture()
        vocab = build_vocab(docs)
        initials, finals = [], []
        for seed in range(20):
            model = svm_train(
                docs,
                vocab,
                SvmConfig(
                    regularization_lambda=0.05,
                    epochs=10,
                    seed=seed,
                    feature_mode="tf",
                ),
            )
            initials.append(np.mean(model.initial_objective))
            finals.append(np.mean(model.final_objective))
        assert np.mean(finals) < np.mean(initials)

    def test_huge_lambda_collapses_weights_and_margins(self):
        # every update step scales as 1/lambda, so at huge lambda the
        # separator degenerates: weights and margins both vanish
        docs, vocab, small_lambda = self.train_fixture(regularization_lambda=0.01)
        _, _, huge_lambda = self.train_fixture(regularization_lambda=1e6)
        small_norm = float(np.linalg.norm(small_lambda.weights))
        huge_norm = float(np.linalg.norm(huge_lambda.weights))
        assert huge_norm < 1e-3
        assert huge_norm < 1e-4 * small_norm
        for doc in docs:
            _, margins = svm_predict(doc, huge_lambda, vocab)
            assert float(np.max(np.abs(margins))) < 1e-3

    def test_zero_vector_input_yields_bias_argmax(self):
        _, vocab, model = self.train_fixture()
        label, margins = svm_predict(make_doc(["asing"], None, "q"), model, vocab)
        assert np.array_equal(margins, model.biases)
        assert label is SentimentLabel(int(np.argmax(model.biases)))

    def test_held_out_points_deep_in_each_class_region(self):
        _, vocab, model = self.train_fixture()
        assert svm_predict(make_doc(["fa"] * 6, None, "qn"), model, vocab)[0] is NEG
        assert svm_predict(make_doc(["fb"] * 6, None, "qp"), model, vocab)[0] is POS

    def test_scaled_input_keeps_argmax_when_biases_are_zero(self):
        vocab = build_vocab([make_doc(["fa", "fb"], doc_id="basis")])
        weights = np.array([[2.0, -1.0], [0.5, 0.5], [-1.0, 2.0]])
        model = SvmModel(
            weights=weights,
            biases=np.zeros(3),
            regularization_lambda=0.01,
            feature_mode="tf",
        )
        base = make_doc(["fa", "fa", "fb"], None, "x")
        scaled = make_doc(["fa", "fa", "fb"] * 5, None, "kx")
        label_x, margins_x = svm_predict(base, model, vocab)
        label_kx, margins_kx = svm_predict(scaled, model, vocab)
        assert label_x is label_kx
        assert np.allclose(margins_kx, 5.0 * margins_x)

    def test_training_order_permutation_keeps_fixture_predictions(self):
        docs = separable_fixture()
        vocab = build_vocab(docs)
        config = SvmConfig(regularization_lambda=0.01, epochs=50, seed=0, feature_mode="tf")
        shuffled = list(docs)
        random.Random(3).shuffle(shuffled)
        a = svm_train(docs, vocab, config)
        b = svm_train(shuffled, vocab, config)
        probes = [
            make_doc(["fa"] * 4, None, "qa"),
            make_doc(["fb"] * 4, None, "qb"),
            make_doc(["fa", "fb"], None, "qc"),
        ]
        for probe in probes:
            assert svm_predict(probe, a, vocab)[0] is svm_predict(probe, b, vocab)[0]

    def test_single_class_training_rejected(self):
        docs = [make_doc(["a"], NEG, "d0"), make_doc(["b"], NEG, "d1")]
        with pytest.raises(MissingClassError, match="2 classes"):
            svm_train(docs, build_vocab(docs), SvmConfig())

    def test_two_classes_are_enough(self):
        docs = [make_doc(["fa"] * 3, NEG, "d0"), make_doc(["fb"] * 3, POS, "d1")]
        model = svm_train(docs, build_vocab(docs), SvmConfig(feature_mode="tf"))
        assert model.weights.shape == (3, 2)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="lambda"):
            SvmConfig(regularization_lambda=0.0)
        with pytest.raises(ValueError, match="epochs"):
            SvmConfig(epochs=0)
        with pytest.raises(ValueError, match="feature mode"):
            SvmConfig(feature_mode="hash")

    def test_hinge_objective_at_zero_weights_is_mean_hinge(self):
        rows = [{0: 1.0}, {1: 2.0}]
        ys = np.array([1.0, -1.0])
        assert hinge_objective(np.zeros(2), 0.0, rows, ys, 0.5) == pytest.approx(1.0)


class TestModelPersistence:
    def test_mnb_round_trip(self, tmp_path):
        docs = three_class_docs()
        vocab = build_vocab(docs)
        model = mnb_train(docs, vocab, alpha=0.5)
        path = tmp_path / "mnb.json"
        save_model(model, vocab, path)
        loaded, loaded_vocab = load_model(path)
        assert np.array_equal(loaded.class_log_prior, model.class_log_prior)
        assert np.array_equal(loaded.token_log_likelihood, model.token_log_likelihood)
        assert loaded.smoothing_alpha == 0.5
        assert loaded_vocab == vocab
        probe = make_doc(["ppkm", "bagus"], None, "q")
        assert mnb_predict(probe, loaded, loaded_vocab)[0] is (
            mnb_predict(probe, model, vocab)[0]
        )

    def test_svm_round_trip(self, tmp_path):
        docs = separable_fixture()
        vocab = build_vocab(docs)
        model = svm_train(
            docs, vocab, SvmConfig(regularization_lambda=0.05, epochs=5, feature_mode="tfidf")
        )
        path = tmp_path / "svm.json"
        save_model(model, vocab, path)
        loaded, loaded_vocab = load_model(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert np.array_equal(loaded.biases, model.biases)
        assert loaded.feature_mode == "tfidf"
        assert loaded.initial_objective == model.initial_objective
        assert loaded.final_objective == model.final_objective
        assert loaded_vocab == vocab

    def test_magic_and_version_guards(self, tmp_path):
        docs = three_class_docs()
        vocab = build_vocab(docs)
        model = mnb_train(docs, vocab)
        path = tmp_path / "model.json"
        save_model(model, vocab, path)

        import json

        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["magic"] == MODEL_MAGIC

        for patch in ({"magic": "other"}, {"version": 9999}, {"kind": "forest"}):
            broken = dict(payload)
            broken.update(patch)
            path.write_text(json.dumps(broken), encoding="utf-8")
            with pytest.raises(CheckpointFormatError):
                load_model(path)

    def test_unsupported_model_type_rejected(self, tmp_path):
        vocab = build_vocab([make_doc(["x"], doc_id="a")])
        with pytest.raises(TypeError, match="unsupported model"):
            save_model(object(), vocab, tmp_path / "bad.json")

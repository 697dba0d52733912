"""Bag-of-words baselines: Multinomial Naive Bayes and a linear SVM.

Features are unigram counts over a training-split vocabulary.  MNB uses raw
counts with Laplace smoothing; the SVM trains three one-vs-rest hinge-loss
separators by Pegasos-style stochastic subgradient descent on tf-idf
features.  Ties at prediction time break toward the lowest label code
(Negative < Neutral < Positive) so argmax is total.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ppkmsent.errors import CheckpointFormatError, MissingClassError
from ppkmsent.preprocess import Document, SentimentLabel

MODEL_MAGIC = "ppkmsent/bow-model"
MODEL_VERSION = 1

NUM_CLASSES = 3


@dataclass(frozen=True)
class BowVocab:
    """Dense token index over the training split.

    Indices run 0..V-1 ordered by descending corpus frequency, ties broken
    lexicographically.
    """

    token_to_index: dict[str, int]
    document_frequency: tuple[int, ...]
    num_documents: int

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def tokens_in_index_order(self) -> list[str]:
        return sorted(self.token_to_index, key=self.token_to_index.__getitem__)


def build_vocab(documents: list[Document], min_count: int = 1) -> BowVocab:
    """Count tokens over the training documents and assign dense indices."""
    if not documents:
        raise ValueError("cannot build a vocabulary from an empty training set")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    totals: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for doc in documents:
        totals.update(doc.tokens)
        doc_freq.update(set(doc.tokens))
    kept = [t for t, c in totals.items() if c >= min_count]
    kept.sort(key=lambda t: (-totals[t], t))
    token_to_index = {t: i for i, t in enumerate(kept)}
    return BowVocab(
        token_to_index=token_to_index,
        document_frequency=tuple(doc_freq[t] for t in kept),
        num_documents=len(documents),
    )


def vectorize(document: Document, vocab: BowVocab, mode: str = "tf") -> dict[int, float]:
    """Sparse feature vector {index: value}; OOV tokens are ignored.

    "tf" gives raw counts.  "tfidf" multiplies counts by
    ln((1+N)/(1+df)) + 1 and L2-normalizes the result.
    """
    if mode not in ("tf", "tfidf"):
        raise ValueError(f"unsupported feature mode: {mode!r}")
    counts: dict[int, float] = {}
    for token in document.tokens:
        idx = vocab.token_to_index.get(token)
        if idx is not None:
            counts[idx] = counts.get(idx, 0.0) + 1.0
    if mode == "tf" or not counts:
        return counts
    n = vocab.num_documents
    weighted = {
        idx: count * (math.log((1 + n) / (1 + vocab.document_frequency[idx])) + 1.0)
        for idx, count in counts.items()
    }
    norm = math.sqrt(sum(v * v for v in weighted.values()))
    return {idx: v / norm for idx, v in weighted.items()}


def _require_all_classes(train: list[Document], need_all: bool = True) -> set[SentimentLabel]:
    present = set()
    for doc in train:
        if doc.label is None:
            raise ValueError(f"unlabeled training document: {doc.id!r}")
        present.add(doc.label)
    if need_all and len(present) < NUM_CLASSES:
        missing = [lbl.name for lbl in SentimentLabel if lbl not in present]
        raise MissingClassError(f"classes absent from training data: {missing}")
    return present


# ---------------------------------------------------------------------------
# Multinomial Naive Bayes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MnbModel:
    class_log_prior: np.ndarray  # (3,)
    token_log_likelihood: np.ndarray  # (3, V)
    smoothing_alpha: float


def mnb_train(train: list[Document], vocab: BowVocab, alpha: float = 1.0) -> MnbModel:
    """Fit smoothed multinomial likelihoods.

    prior_c = ln(N_c / N); likelihood_ct = ln((count_ct + alpha) /
    (total_c + alpha * V)) where total_c sums vocabulary-token counts in
    class c, so each class row exp-sums to 1.
    """
    if not train:
        raise ValueError("empty training set")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    _require_all_classes(train)
    v = vocab.size
    class_counts = np.zeros(NUM_CLASSES)
    token_counts = np.zeros((NUM_CLASSES, v))
    for doc in train:
        c = int(doc.label)
        class_counts[c] += 1
        for token in doc.tokens:
            idx = vocab.token_to_index.get(token)
            if idx is not None:
                token_counts[c, idx] += 1
    class_log_prior = np.log(class_counts / len(train))
    if v == 0:
        token_log_likelihood = np.zeros((NUM_CLASSES, 0))
    else:
        totals = token_counts.sum(axis=1, keepdims=True)
        token_log_likelihood = np.log((token_counts + alpha) / (totals + alpha * v))
    return MnbModel(
        class_log_prior=class_log_prior,
        token_log_likelihood=token_log_likelihood,
        smoothing_alpha=float(alpha),
    )


def mnb_predict(
    document: Document, model: MnbModel, vocab: BowVocab
) -> tuple[SentimentLabel, np.ndarray]:
    """Argmax of prior + sum of count-weighted log likelihoods."""
    scores = model.class_log_prior.copy()
    for idx, count in vectorize(document, vocab, mode="tf").items():
        scores += count * model.token_log_likelihood[:, idx]
    return SentimentLabel(int(np.argmax(scores))), scores


# ---------------------------------------------------------------------------
# Linear SVM (one-vs-rest Pegasos)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SvmConfig:
    regularization_lambda: float = 0.01
    epochs: int = 50
    seed: int = 0
    feature_mode: str = "tfidf"

    def __post_init__(self):
        if self.regularization_lambda <= 0:
            raise ValueError("regularization_lambda must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.feature_mode not in ("tf", "tfidf"):
            raise ValueError(f"unsupported feature mode: {self.feature_mode!r}")


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray  # (3, V)
    biases: np.ndarray  # (3,)
    regularization_lambda: float
    feature_mode: str
    initial_objective: tuple[float, ...] = field(default=())
    final_objective: tuple[float, ...] = field(default=())


def hinge_objective(
    w: np.ndarray, b: float, rows: list[dict[int, float]], ys: np.ndarray, lam: float
) -> float:
    """lam/2 * ||w||^2 + mean hinge loss over the given rows."""
    total = 0.0
    for row, y in zip(rows, ys):
        margin = y * (sum(w[i] * v for i, v in row.items()) + b)
        total += max(0.0, 1.0 - margin)
    return 0.5 * lam * float(w @ w) + total / len(rows)


def svm_train(train: list[Document], vocab: BowVocab, config: SvmConfig) -> SvmModel:
    """Train three one-vs-rest hinge separators with step size 1/(lambda*t).

    The bias is updated on margin violations but never shrunk by the
    regularizer.  Because every update step scales as 1/lambda, very large
    lambda drives both weights and margins toward zero.  Deterministic for
    a fixed seed.
    """
    present = _require_all_classes(train, need_all=False)
    if len(present) < 2:
        raise MissingClassError("SVM training needs at least 2 classes present")
    rows = [vectorize(doc, vocab, mode=config.feature_mode) for doc in train]
    labels = np.array([int(doc.label) for doc in train])
    lam = config.regularization_lambda
    v = vocab.size

    weights = np.zeros((NUM_CLASSES, v))
    biases = np.zeros(NUM_CLASSES)
    initial_obj = []
    final_obj = []
    class_seeds = np.random.SeedSequence(config.seed).spawn(NUM_CLASSES)
    for c in range(NUM_CLASSES):
        rng = np.random.default_rng(class_seeds[c])
        ys = np.where(labels == c, 1.0, -1.0)
        w = np.zeros(v)
        b = 0.0
        initial_obj.append(hinge_objective(w, b, rows, ys, lam))
        t = 0
        for _ in range(config.epochs):
            for idx in rng.permutation(len(rows)):
                t += 1
                eta = 1.0 / (lam * t)
                row = rows[idx]
                y = ys[idx]
                margin = y * (sum(w[i] * value for i, value in row.items()) + b)
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    for i, value in row.items():
                        w[i] += eta * y * value
                    b += eta * y
        weights[c] = w
        biases[c] = b
        final_obj.append(hinge_objective(w, b, rows, ys, lam))

    return SvmModel(
        weights=weights,
        biases=biases,
        regularization_lambda=lam,
        feature_mode=config.feature_mode,
        initial_objective=tuple(initial_obj),
        final_objective=tuple(final_obj),
    )


def svm_predict(
    document: Document, model: SvmModel, vocab: BowVocab
) -> tuple[SentimentLabel, np.ndarray]:
    """Argmax of per-class margins w_c . x + b_c."""
    row = vectorize(document, vocab, mode=model.feature_mode)
    margins = model.biases.copy()
    for idx, value in row.items():
        margins += value * model.weights[:, idx]
    return SentimentLabel(int(np.argmax(margins))), margins


# ---------------------------------------------------------------------------
# Persistence (versioned JSON container)
# ---------------------------------------------------------------------------


def _vocab_to_payload(vocab: BowVocab) -> dict:
    return {
        "tokens": vocab.tokens_in_index_order(),
        "document_frequency": list(vocab.document_frequency),
        "num_documents": vocab.num_documents,
    }


def _vocab_from_payload(payload: dict) -> BowVocab:
    tokens = payload["tokens"]
    return BowVocab(
        token_to_index={t: i for i, t in enumerate(tokens)},
        document_frequency=tuple(payload["document_frequency"]),
        num_documents=payload["num_documents"],
    )


def save_model(model, vocab: BowVocab, path: str | Path) -> None:
    """Write an MNB or SVM model with its vocabulary as versioned JSON."""
    if isinstance(model, MnbModel):
        payload = {
            "kind": "mnb",
            "class_log_prior": model.class_log_prior.tolist(),
            "token_log_likelihood": model.token_log_likelihood.tolist(),
            "smoothing_alpha": model.smoothing_alpha,
        }
    elif isinstance(model, SvmModel):
        payload = {
            "kind": "svm",
            "weights": model.weights.tolist(),
            "biases": model.biases.tolist(),
            "regularization_lambda": model.regularization_lambda,
            "feature_mode": model.feature_mode,
            "initial_objective": list(model.initial_objective),
            "final_objective": list(model.final_objective),
        }
    else:
        raise TypeError(f"unsupported model type: {type(model).__name__}")
    payload["magic"] = MODEL_MAGIC
    payload["version"] = MODEL_VERSION
    payload["vocab"] = _vocab_to_payload(vocab)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=1)
        handle.write("\n")


def load_model(path: str | Path):
    """Load (model, vocab) from a container written by save_model."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("magic") != MODEL_MAGIC:
        raise CheckpointFormatError(f"{path}: not a ppkmsent bow model file")
    if payload.get("version") != MODEL_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported model version {payload.get('version')!r}"
        )
    vocab = _vocab_from_payload(payload["vocab"])
    if payload["kind"] == "mnb":
        model = MnbModel(
            class_log_prior=np.array(payload["class_log_prior"]),
            token_log_likelihood=np.array(payload["token_log_likelihood"]),
            smoothing_alpha=payload["smoothing_alpha"],
        )
    elif payload["kind"] == "svm":
        model = SvmModel(
            weights=np.array(payload["weights"]),
            biases=np.array(payload["biases"]),
            regularization_lambda=payload["regularization_lambda"],
            feature_mode=payload["feature_mode"],
            initial_objective=tuple(payload.get("initial_objective", ())),
            final_objective=tuple(payload.get("final_objective", ())),
        )
    else:
        raise CheckpointFormatError(f"{path}: unknown model kind {payload['kind']!r}")
    return model, vocab

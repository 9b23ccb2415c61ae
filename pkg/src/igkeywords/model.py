"""Small differentiable multilabel text classifier in plain numpy.

Architecture: subword embedding lookup -> mean pooling -> one hidden
layer (tanh by default) -> per-class logits.  The backward pass is
written out by hand so that gradients with respect to the input token
embeddings are exact and cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Corpus, Document, ValidationError


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 0.01
    batch_size: int = 32
    d: int = 16
    h: int = 32
    weight_init_scale: float = 0.1
    optimizer: str = "adam"  # "sgd" or "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    decision_threshold: float = 0.5
    activation: str = "tanh"  # "tanh" or "identity"
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.d, self.h) <= 0:
            raise ValidationError("epochs, batch_size, d, h must be positive")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValidationError("decision_threshold must lie in (0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in ("tanh", "identity"):
            raise ValidationError(f"unknown activation {self.activation!r}")


@dataclass
class ModelParams:
    embedding: np.ndarray       # [vocab+1, d]; last row is the unknown piece
    hidden_weights: np.ndarray  # [d, h]
    hidden_bias: np.ndarray     # [h]
    output_weights: np.ndarray  # [h, C]
    output_bias: np.ndarray     # [C]
    vocab: dict[str, int]
    activation: str = "tanh"

    @property
    def unk_index(self) -> int:
        return len(self.vocab)

    @property
    def num_classes(self) -> int:
        return self.output_bias.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.hidden_weights.shape[0], self.hidden_weights.shape[1],
                self.num_classes)

    def copy(self) -> "ModelParams":
        return ModelParams(self.embedding.copy(), self.hidden_weights.copy(),
                           self.hidden_bias.copy(), self.output_weights.copy(),
                           self.output_bias.copy(), dict(self.vocab),
                           self.activation)


@dataclass
class ForwardTrace:
    input_embeddings: np.ndarray  # [T, d]
    pooled: np.ndarray            # [d]
    hidden_pre: np.ndarray        # [h]
    hidden_post: np.ndarray       # [h]
    logits: np.ndarray            # [C]


def build_vocab(corpus: Corpus) -> dict[str, int]:
    """Map each subword piece in the corpus to a contiguous index."""
    pieces = sorted({p for doc in corpus.documents for p, _ in doc.subwords})
    return {p: i for i, p in enumerate(pieces)}


def init_model(vocab: dict[str, int], num_classes: int,
               config: TrainConfig) -> ModelParams:
    """Uniform weights in [-scale, scale], zero biases; seeded."""
    if not vocab:
        raise ValidationError("vocabulary must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed & (2**64 - 1)))
    s = config.weight_init_scale
    def uniform(*shape):
        return rng.uniform(-s, s, size=shape)
    return ModelParams(
        embedding=uniform(len(vocab) + 1, config.d),
        hidden_weights=uniform(config.d, config.h),
        hidden_bias=np.zeros(config.h),
        output_weights=uniform(config.h, num_classes),
        output_bias=np.zeros(num_classes),
        vocab=dict(vocab),
        activation=config.activation,
    )


def token_ids(params: ModelParams, doc: Document) -> np.ndarray:
    unk = params.unk_index
    return np.array([params.vocab.get(p, unk) for p, _ in doc.subwords],
                    dtype=np.intp)


def _activate(params: ModelParams, pre: np.ndarray) -> np.ndarray:
    return np.tanh(pre) if params.activation == "tanh" else pre


def _activation_grad(params: ModelParams, post: np.ndarray) -> np.ndarray:
    if params.activation == "tanh":
        return 1.0 - post ** 2
    return np.ones_like(post)


def forward_from_embeddings(params: ModelParams, inputs: np.ndarray):
    """Forward pass from an explicit [T, d] input-embedding matrix."""
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValidationError("inputs must be a non-empty [T, d] matrix")
    pooled = inputs.mean(axis=0)
    hidden_pre = pooled @ params.hidden_weights + params.hidden_bias
    hidden_post = _activate(params, hidden_pre)
    logits = hidden_post @ params.output_weights + params.output_bias
    trace = ForwardTrace(inputs, pooled, hidden_pre, hidden_post, logits)
    return logits, trace


def forward(params: ModelParams, doc: Document):
    if not doc.subwords:
        raise ValidationError(f"document {doc.id!r} has no subwords")
    inputs = params.embedding[token_ids(params, doc)]
    return forward_from_embeddings(params, inputs)


def pooled_logit_gradients(params: ModelParams, pooled_batch: np.ndarray,
                           class_index: int) -> np.ndarray:
    """d(logit_c)/d(pooled) for a [B, d] batch of pooled vectors."""
    hidden_post = _activate(params,
                            pooled_batch @ params.hidden_weights
                            + params.hidden_bias)
    d_pre = _activation_grad(params, hidden_post) \
        * params.output_weights[:, class_index]
    return d_pre @ params.hidden_weights.T


def input_gradients_from_embeddings(params: ModelParams, inputs: np.ndarray,
                                    class_index: int) -> np.ndarray:
    """Exact d(logit_c)/d(inputs), shape [T, d].

    Mean pooling makes the gradient identical across token positions up
    to the 1/T factor.
    """
    n_tokens = inputs.shape[0]
    d_pooled = pooled_logit_gradients(params, inputs.mean(axis=0)[None, :],
                                      class_index)[0]
    return np.tile(d_pooled / n_tokens, (n_tokens, 1))


def input_gradients(params: ModelParams, doc: Document,
                    class_index: int) -> np.ndarray:
    if not 0 <= class_index < params.num_classes:
        raise ValidationError(f"class index {class_index} out of range")
    if not doc.subwords:
        raise ValidationError(f"document {doc.id!r} has no subwords")
    inputs = params.embedding[token_ids(params, doc)]
    return input_gradients_from_embeddings(params, inputs, class_index)


def probabilities(params: ModelParams, doc: Document) -> np.ndarray:
    logits, _ = forward(params, doc)
    return 1.0 / (1.0 + np.exp(-logits))


def predict(params: ModelParams, doc: Document, label_space,
            threshold: float = 0.5) -> set[str]:
    """Classes whose sigmoid probability is >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    probs = probabilities(params, doc)
    return {label_space.classes[i] for i in np.flatnonzero(probs >= threshold)}


def _bce_from_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    # stable: max(z,0) - z*y + log(1 + exp(-|z|))
    per_cell = (np.maximum(logits, 0.0) - logits * targets
                + np.log1p(np.exp(-np.abs(logits))))
    return float(per_cell.mean())


def _prepare_docs(params: ModelParams, corpus: Corpus):
    """Concatenated token ids + offsets for fast batched pooling."""
    ids, offsets, lengths, targets = [], [], [], []
    classes = corpus.label_space.classes
    pos = 0
    for doc in corpus.documents:
        t = token_ids(params, doc)
        if t.size == 0:
            raise ValidationError(f"document {doc.id!r} has no subwords")
        offsets.append(pos)
        lengths.append(t.size)
        ids.append(t)
        pos += t.size
        targets.append([1.0 if c in doc.labels else 0.0 for c in classes])
    return (np.concatenate(ids), np.array(offsets, dtype=np.intp),
            np.array(lengths, dtype=float), np.array(targets))


def batch_loss_and_grads(params: ModelParams, all_ids, offsets, lengths,
                         targets, batch: np.ndarray):
    """Mean BCE over a batch of documents plus gradients for every weight."""
    n_batch = batch.size
    pooled = np.empty((n_batch, params.embedding.shape[1]))
    spans = []
    for row, b in enumerate(batch):
        span = all_ids[offsets[b]:offsets[b] + int(lengths[b])]
        spans.append(span)
        pooled[row] = params.embedding[span].mean(axis=0)

    hidden_pre = pooled @ params.hidden_weights + params.hidden_bias
    hidden_post = _activate(params, hidden_pre)
    logits = hidden_post @ params.output_weights + params.output_bias
    y = targets[batch]
    loss = _bce_from_logits(logits, y)

    n_cells = logits.size
    probs = 1.0 / (1.0 + np.exp(-logits))
    d_logits = (probs - y) / n_cells
    d_w_out = hidden_post.T @ d_logits
    d_b_out = d_logits.sum(axis=0)
    d_post = d_logits @ params.output_weights.T
    d_pre = d_post * _activation_grad(params, hidden_post)
    d_w_hid = pooled.T @ d_pre
    d_b_hid = d_pre.sum(axis=0)
    d_pooled = d_pre @ params.hidden_weights.T

    d_emb = np.zeros_like(params.embedding)
    for row, span in enumerate(spans):
        np.add.at(d_emb, span, d_pooled[row] / span.size)

    grads = {"embedding": d_emb, "hidden_weights": d_w_hid,
             "hidden_bias": d_b_hid, "output_weights": d_w_out,
             "output_bias": d_b_out}
    return loss, grads


_PARAM_NAMES = ("embedding", "hidden_weights", "hidden_bias",
                "output_weights", "output_bias")


def train(params: ModelParams, train_corpus: Corpus,
          config: TrainConfig) -> ModelParams:
    """Minimize mean per-class BCE with seeded shuffling; returns new params."""
    if not train_corpus.documents:
        raise ValidationError("training corpus is empty")
    params = params.copy()
    all_ids, offsets, lengths, targets = _prepare_docs(params, train_corpus)
    n_docs = len(train_corpus.documents)
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed & (2**64 - 1), 1]))

    if config.optimizer == "adam":
        m_state = {k: np.zeros_like(getattr(params, k)) for k in _PARAM_NAMES}
        v_state = {k: np.zeros_like(getattr(params, k)) for k in _PARAM_NAMES}
        step = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n_docs)
        for start in range(0, n_docs, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = batch_loss_and_grads(
                params, all_ids, offsets, lengths, targets, batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1} "
                    f"(learning_rate={config.learning_rate})")
            if config.optimizer == "sgd":
                for k in _PARAM_NAMES:
                    getattr(params, k)[...] -= config.learning_rate * grads[k]
            else:
                step += 1
                b1, b2 = config.adam_beta1, config.adam_beta2
                for k in _PARAM_NAMES:
                    m_state[k] = b1 * m_state[k] + (1 - b1) * grads[k]
                    v_state[k] = b2 * v_state[k] + (1 - b2) * grads[k] ** 2
                    m_hat = m_state[k] / (1 - b1 ** step)
                    v_hat = v_state[k] / (1 - b2 ** step)
                    getattr(params, k)[...] -= (
                        config.learning_rate * m_hat
                        / (np.sqrt(v_hat) + config.adam_eps))
    return params


def corpus_loss(params: ModelParams, corpus: Corpus) -> float:
    """Mean BCE over a whole corpus (evaluation only)."""
    all_ids, offsets, lengths, targets = _prepare_docs(params, corpus)
    loss, _ = batch_loss_and_grads(params, all_ids, offsets, lengths, targets,
                                   np.arange(len(corpus.documents)))
    return loss


def save_params(params: ModelParams, path) -> None:
    """Versioned checkpoint: arrays + vocab in one .npz file."""
    np.savez(path, format_version=1,
             embedding=params.embedding,
             hidden_weights=params.hidden_weights,
             hidden_bias=params.hidden_bias,
             output_weights=params.output_weights,
             output_bias=params.output_bias,
             activation=params.activation,
             vocab_json=json.dumps(params.vocab))


def load_params(path) -> ModelParams:
    data = np.load(path, allow_pickle=False)
    if int(data["format_version"]) != 1:
        raise ValidationError(f"unsupported checkpoint version in {path}")
    return ModelParams(
        embedding=data["embedding"],
        hidden_weights=data["hidden_weights"],
        hidden_bias=data["hidden_bias"],
        output_weights=data["output_weights"],
        output_bias=data["output_bias"],
        vocab=json.loads(str(data["vocab_json"])),
        activation=str(data["activation"]))

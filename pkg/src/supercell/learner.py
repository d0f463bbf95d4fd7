"""Subword-embedding multi-head classifier, trained from scratch in numpy.

The model maps a feature sentence to one class per head: one head per
target key attribute (domain values, NULL, COPY(i), WILDCARD), one head per
cell slot (target attributes plus NULL), and one aggregation-mode head.
Tokens embed as the mean of their character n-gram bucket rows, so a token
and its one-edit or renamed variant land on overlapping buckets; the
encoder is either a mean-pooled projection or a bidirectional gated
recurrent network. All gradients are analytic and verified against central
finite differences.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .canon import CanonKind, DictionaryStore, SynonymDictionary
from .core import (
    AGG_MODES,
    FeatureSentence,
    KeyDomain,
    LabelSpace,
    SuperCell,
    TargetPosition,
    TargetSchema,
    discard_position,
    render_feature,
)
from .mapping import LabeledSample, resolve_position


class EmptyEvalSet(ValueError):
    pass


class DegenerateVocabulary(ValueError):
    """A head with a single class; it degenerates to a constant predictor."""


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """Deterministic, platform-independent 64-bit string hash."""
    acc = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        acc = ((acc ^ byte) * _FNV_PRIME) & _U64
    return acc


class SubwordVocab:
    """Character n-gram hashing for tokens.

    Each token contributes the n-grams (sizes ``ngram_min..ngram_max``) of
    "<token>" with boundary markers, plus one whole-token bucket, all hashed
    into ``bucket_count`` buckets. Every token therefore maps to at least
    one bucket and out-of-vocabulary tokens need no special handling.
    """

    def __init__(self, bucket_count: int = 2**15, ngram_min: int = 3, ngram_max: int = 5):
        self.bucket_count = bucket_count
        self.ngram_min = ngram_min
        self.ngram_max = ngram_max
        self._cache: dict[str, np.ndarray] = {}

    def ngrams(self, token: str) -> list[str]:
        wrapped = f"<{token}>"
        out = [wrapped]
        for n in range(self.ngram_min, self.ngram_max + 1):
            if len(wrapped) >= n:
                out.extend(wrapped[i : i + n] for i in range(len(wrapped) - n + 1))
        return out

    def buckets(self, token: str) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is None:
            cached = np.array(
                [fnv1a64(g) % self.bucket_count for g in self.ngrams(token)],
                dtype=np.int64,
            )
            self._cache[token] = cached
        return cached


@dataclass
class TrainConfig:
    """Architecture and optimization knobs; the seed fixes every output."""

    encoder: str = "recurrent"  # recurrent | pooled
    embed_dim: int = 64
    hidden: int = 64
    bucket_count: int = 2**15
    ngram_min: int = 3
    ngram_max: int = 5
    max_copy: int = 6
    max_width: int = 4
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 40
    seed: int = 0
    dtype: str = "float32"

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "TrainConfig":
        return TrainConfig(**obj)


@dataclass
class ModelParams:
    """Trained parameters plus everything needed to predict afresh:
    the schema-derived label space, per-slot canonicalization kinds for COPY
    resolution, and the synonym dictionaries those kinds reference."""

    config: TrainConfig
    schema: TargetSchema
    key_kinds: list[CanonKind]
    arrays: dict[str, np.ndarray]
    dictionaries: dict[str, list[list[str]]] = field(default_factory=dict)
    opt_state: dict | None = None

    def __post_init__(self) -> None:
        self.vocab = SubwordVocab(
            self.config.bucket_count, self.config.ngram_min, self.config.ngram_max
        )
        self.space = LabelSpace(self.schema, self.config.max_copy, self.config.max_width)

    def dictionary_store(self) -> DictionaryStore:
        return {
            name: SynonymDictionary(name, groups)
            for name, groups in self.dictionaries.items()
        }

    @property
    def head_sizes(self) -> list[int]:
        return self.space.head_sizes

    def finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays.values())

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": 1,
            "config": self.config.to_dict(),
            "schema": self.schema.to_dict(),
            "key_kinds": [k.render() for k in self.key_kinds],
            "dictionaries": self.dictionaries,
        }
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                     **self.arrays)

    @staticmethod
    def load(path: str | Path) -> "ModelParams":
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
        version = meta.get("format_version")
        if version != 1:
            raise ValueError(f"unsupported model file format_version {version!r}")
        return ModelParams(
            config=TrainConfig.from_dict(meta["config"]),
            schema=TargetSchema.from_dict(meta["schema"]),
            key_kinds=[CanonKind.parse(k) for k in meta["key_kinds"]],
            arrays=arrays,
            dictionaries=meta.get("dictionaries", {}),
        )


def init_params(
    config: TrainConfig,
    schema: TargetSchema,
    key_kinds: list[CanonKind] | None = None,
    dictionaries: dict[str, list[list[str]]] | None = None,
) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    d, h = config.embed_dim, config.hidden
    arrays: dict[str, np.ndarray] = {}

    def norm(*shape: int, scale: float) -> np.ndarray:
        return (rng.standard_normal(shape) * scale).astype(dtype)

    arrays["E"] = norm(config.bucket_count, d, scale=0.1)
    if config.encoder == "pooled":
        arrays["W1"] = norm(d, h, scale=1.0 / np.sqrt(d))
        arrays["b1"] = np.zeros(h, dtype=dtype)
        h_total = h
    elif config.encoder == "recurrent":
        for direction in ("f", "b"):
            arrays[f"W{direction}"] = norm(d, 3 * h, scale=1.0 / np.sqrt(d))
            arrays[f"U{direction}"] = norm(h, 3 * h, scale=1.0 / np.sqrt(h))
            arrays[f"bias{direction}"] = np.zeros(3 * h, dtype=dtype)
        h_total = 2 * h
    else:
        raise ValueError(f"unknown encoder {config.encoder!r}")

    space = LabelSpace(schema, config.max_copy, config.max_width)
    for i, size in enumerate(space.head_sizes):
        arrays[f"head{i}_W"] = norm(h_total, size, scale=1.0 / np.sqrt(h_total))
        arrays[f"head{i}_b"] = np.zeros(size, dtype=dtype)

    kinds = key_kinds or [CanonKind("none")] * schema.q
    return ModelParams(config, schema, list(kinds), arrays, dict(dictionaries or {}))


@dataclass
class EncodedSample:
    """A feature sentence flattened to bucket ids, plus label head targets."""

    bucket_ids: np.ndarray  # all buckets of all tokens, concatenated
    token_starts: np.ndarray  # start offset of each token in bucket_ids
    n_tokens: int
    targets: np.ndarray | None  # one class id per head, or None at predict time
    width: int = 0


def encode_sentence(sentence: FeatureSentence, vocab: SubwordVocab) -> tuple[np.ndarray, np.ndarray]:
    parts = [vocab.buckets(tok) for tok in sentence.tokens]
    counts = np.array([len(p) for p in parts], dtype=np.int64)
    starts = np.zeros(len(parts), dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    return np.concatenate(parts), starts


def encode_samples(
    samples: list[LabeledSample], params: ModelParams
) -> list[EncodedSample]:
    out = []
    n_heads = len(params.head_sizes)
    q = params.schema.q
    for sample in samples:
        bucket_ids, starts = encode_sentence(sample.feature, params.vocab)
        label = params.space.render(sample.label)
        targets = np.zeros(n_heads, dtype=np.int64)
        targets[:q] = label.key_ids
        attr_ids = list(label.attr_ids) + [0] * (params.config.max_width - len(label.attr_ids))
        targets[q : q + params.config.max_width] = attr_ids
        targets[-1] = label.agg_id
        out.append(
            EncodedSample(bucket_ids, starts, len(sample.feature.tokens), targets,
                          width=len(sample.label.attributes))
        )
    return out


def embed_sentence(sentence: FeatureSentence, params: ModelParams) -> np.ndarray:
    """Token vectors: each is the mean of the token's subword bucket rows."""
    E = params.arrays["E"]
    vectors = np.empty((len(sentence.tokens), E.shape[1]), dtype=E.dtype)
    for i, token in enumerate(sentence.tokens):
        vectors[i] = E[params.vocab.buckets(token)].mean(axis=0)
    return vectors


def _embed_batch(batch: list[EncodedSample], params: ModelParams):
    """Stack a batch into (X, mask) with a cache for the embedding backward."""
    E = params.arrays["E"]
    dtype = E.dtype
    B = len(batch)
    T = max(s.n_tokens for s in batch)
    d = E.shape[1]

    all_buckets = np.concatenate([s.bucket_ids for s in batch])
    lengths = np.concatenate(
        [np.diff(np.append(s.token_starts, len(s.bucket_ids))) for s in batch]
    )
    starts = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    token_vecs = np.add.reduceat(E[all_buckets], starts, axis=0) / lengths[:, None].astype(dtype)

    X = np.zeros((B, T, d), dtype=dtype)
    mask = np.zeros((B, T), dtype=dtype)
    rows = np.concatenate([np.full(s.n_tokens, i, dtype=np.int64) for i, s in enumerate(batch)])
    cols = np.concatenate([np.arange(s.n_tokens, dtype=np.int64) for s in batch])
    X[rows, cols] = token_vecs
    mask[rows, cols] = 1.0
    cache = {"all_buckets": all_buckets, "lengths": lengths, "rows": rows, "cols": cols}
    return X, mask, cache


def _embed_backward(dX: np.ndarray, cache: dict, grads: dict, params: ModelParams) -> None:
    dtok = dX[cache["rows"], cache["cols"]]
    contrib = np.repeat(dtok / cache["lengths"][:, None], cache["lengths"], axis=0)
    np.add.at(grads["E"], cache["all_buckets"], contrib)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gru_scan(X: np.ndarray, mask: np.ndarray, W, U, bias, reverse: bool):
    """Gated recurrent scan over one direction; returns final state + cache."""
    B, T, _ = X.shape
    h_size = U.shape[0]
    h = np.zeros((B, h_size), dtype=X.dtype)
    steps = []
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        x_t = X[:, t]
        m_t = mask[:, t][:, None]
        gx = x_t @ W + bias
        gh = h @ U
        z = _sigmoid(gx[:, :h_size] + gh[:, :h_size])
        r = _sigmoid(gx[:, h_size : 2 * h_size] + gh[:, h_size : 2 * h_size])
        ghn = gh[:, 2 * h_size :]
        n = np.tanh(gx[:, 2 * h_size :] + r * ghn)
        h_new = (1.0 - z) * n + z * h
        h_next = m_t * h_new + (1.0 - m_t) * h
        steps.append({"t": t, "h_prev": h, "z": z, "r": r, "n": n, "ghn": ghn, "m": m_t})
        h = h_next
    return h, steps


def _gru_backward(dh, steps, X, W, U, grads_W, grads_U, grads_b, dX):
    h_size = U.shape[0]
    for step in reversed(steps):
        t, h_prev, z, r, n, ghn, m = (
            step["t"], step["h_prev"], step["z"], step["r"], step["n"], step["ghn"], step["m"],
        )
        dh_eff = dh * m
        dh_skip = dh * (1.0 - m)
        dz = dh_eff * (h_prev - n)
        dn = dh_eff * (1.0 - z)
        dh_prev = dh_eff * z
        da_n = dn * (1.0 - n * n)
        dr = da_n * ghn
        dghn = da_n * r
        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        dgx = np.concatenate([da_z, da_r, da_n], axis=1)
        dgh = np.concatenate([da_z, da_r, dghn], axis=1)
        x_t = X[:, t]
        grads_W += x_t.T @ dgx
        grads_b += dgx.sum(axis=0)
        grads_U += h_prev.T @ dgh
        dX[:, t] += dgx @ W.T
        dh = dh_prev + dgh @ U.T + dh_skip
    return dh


def forward(
    sentence_or_batch, params: ModelParams, return_cache: bool = False
):
    """Per-head logits for one feature sentence or a prepared batch."""
    if isinstance(sentence_or_batch, FeatureSentence):
        bucket_ids, starts = encode_sentence(sentence_or_batch, params.vocab)
        batch = [EncodedSample(bucket_ids, starts, len(sentence_or_batch.tokens), None)]
        logits, _ = _forward_batch(batch, params)
        return [l[0] for l in logits]
    logits, cache = _forward_batch(sentence_or_batch, params)
    return (logits, cache) if return_cache else logits


def _forward_batch(batch: list[EncodedSample], params: ModelParams):
    X, mask, embed_cache = _embed_batch(batch, params)
    arrays = params.arrays
    cache: dict = {"X": X, "mask": mask, "embed": embed_cache}
    if params.config.encoder == "pooled":
        denom = mask.sum(axis=1, keepdims=True)
        xbar = (X * mask[:, :, None]).sum(axis=1) / denom
        pre = xbar @ arrays["W1"] + arrays["b1"]
        H = np.tanh(pre)
        cache.update({"xbar": xbar, "H": H, "denom": denom})
    else:
        hf, steps_f = _gru_scan(X, mask, arrays["Wf"], arrays["Uf"], arrays["biasf"], reverse=False)
        hb, steps_b = _gru_scan(X, mask, arrays["Wb"], arrays["Ub"], arrays["biasb"], reverse=True)
        H = np.concatenate([hf, hb], axis=1)
        cache.update({"H": H, "steps_f": steps_f, "steps_b": steps_b})
    logits = [
        H @ arrays[f"head{i}_W"] + arrays[f"head{i}_b"]
        for i in range(len(params.head_sizes))
    ]
    cache["logits"] = logits
    return logits, cache


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def loss_and_grads(
    batch: list[EncodedSample], params: ModelParams
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean over the batch of the summed per-head cross-entropies, with
    analytic gradients for every parameter (including through the scan)."""
    logits, cache = _forward_batch(batch, params)
    arrays = params.arrays
    B = len(batch)
    targets = np.stack([s.targets for s in batch])
    grads = {k: np.zeros_like(v) for k, v in arrays.items()}

    loss = 0.0
    H = cache["H"]
    dH = np.zeros_like(H)
    for i, head_logits in enumerate(logits):
        probs = _softmax(head_logits)
        idx = targets[:, i]
        picked = probs[np.arange(B), idx]
        loss += float(-np.log(np.maximum(picked, 1e-12)).sum()) / B
        dlogits = probs.copy()
        dlogits[np.arange(B), idx] -= 1.0
        dlogits /= B
        grads[f"head{i}_W"] += H.T @ dlogits
        grads[f"head{i}_b"] += dlogits.sum(axis=0)
        dH += dlogits @ arrays[f"head{i}_W"].T

    X, mask = cache["X"], cache["mask"]
    dX = np.zeros_like(X)
    if params.config.encoder == "pooled":
        dpre = dH * (1.0 - cache["H"] ** 2)
        grads["W1"] += cache["xbar"].T @ dpre
        grads["b1"] += dpre.sum(axis=0)
        dxbar = dpre @ arrays["W1"].T
        dX += (dxbar[:, None, :] / cache["denom"][:, :, None]) * mask[:, :, None]
    else:
        h = arrays["Uf"].shape[0]
        _gru_backward(dH[:, :h], cache["steps_f"], X, arrays["Wf"], arrays["Uf"],
                      grads["Wf"], grads["Uf"], grads["biasf"], dX)
        _gru_backward(dH[:, h:], cache["steps_b"], X, arrays["Wb"], arrays["Ub"],
                      grads["Wb"], grads["Ub"], grads["biasb"], dX)
    _embed_backward(dX, cache["embed"], grads, params)
    return loss, grads


def _adam_step(params: ModelParams, grads: dict, lr: float) -> None:
    state = params.opt_state
    if state is None:
        state = params.opt_state = {
            "t": 0,
            "m": {k: np.zeros_like(v) for k, v in params.arrays.items()},
            "v": {k: np.zeros_like(v) for k, v in params.arrays.items()},
        }
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    state["t"] += 1
    t = state["t"]
    for key, grad in grads.items():
        m = state["m"][key]
        v = state["v"][key]
        m *= beta1
        m += (1 - beta1) * grad
        v *= beta2
        v += (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        params.arrays[key] -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(
            params.arrays[key].dtype
        )


@dataclass
class CurvePoint:
    epoch: int
    loss: float
    train_acc: float


def loss_curve_csv(curve: list[CurvePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "loss", "train_acc"])
    for point in curve:
        writer.writerow([point.epoch, f"{point.loss:.6f}", f"{point.train_acc:.6f}"])
    return buf.getvalue()


def train(
    samples: list[LabeledSample],
    config: TrainConfig,
    schema: TargetSchema,
    key_kinds: list[CanonKind] | None = None,
    dictionaries: dict[str, list[list[str]]] | None = None,
) -> tuple[ModelParams, list[CurvePoint]]:
    """Adam-trained model; (seed, data, config) fully determine the result.

    Single-class heads carry zero gradient and act as constant predictors,
    which is the intended degenerate-vocabulary behavior.
    """
    if not samples:
        raise EmptyEvalSet("no training samples")
    params = init_params(config, schema, key_kinds, dictionaries)
    encoded = encode_samples(samples, params)
    rng = np.random.default_rng(config.seed + 101)
    curve: list[CurvePoint] = []
    n = len(encoded)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            batch = [encoded[i] for i in order[start : start + config.batch_size]]
            loss, grads = loss_and_grads(batch, params)
            _adam_step(params, grads, config.learning_rate)
            total_loss += loss
            n_batches += 1
        acc = _accuracy_encoded(encoded, params)
        curve.append(CurvePoint(epoch, total_loss / max(n_batches, 1), acc))
        if not params.finite():
            raise FloatingPointError(f"non-finite parameters after epoch {epoch}")
    return params, curve


def _argmax_heads(batch: list[EncodedSample], params: ModelParams) -> np.ndarray:
    logits = forward(batch, params)
    return np.stack([l.argmax(axis=1) for l in logits], axis=1)


def _accuracy_encoded(encoded: list[EncodedSample], params: ModelParams, chunk: int = 512) -> float:
    if not encoded:
        raise EmptyEvalSet("no evaluation samples")
    q = params.schema.q
    correct = 0
    for start in range(0, len(encoded), chunk):
        part = encoded[start : start + chunk]
        pred = _argmax_heads(part, params)
        targets = np.stack([s.targets for s in part])
        widths = np.array([s.width for s in part])
        for row in range(len(part)):
            w = widths[row]
            keep = list(range(q)) + list(range(q, q + w)) + [pred.shape[1] - 1]
            correct += int((pred[row, keep] == targets[row, keep]).all())
    return correct / len(encoded)


def accuracy(samples: list[LabeledSample], params: ModelParams) -> float:
    """Fraction of samples whose every head (all key components, all
    attribute slots within the cell's width, and the aggregation mode)
    matches the label."""
    if not samples:
        raise EmptyEvalSet("no evaluation samples")
    return _accuracy_encoded(encode_samples(samples, params), params)


@dataclass
class Prediction:
    position: TargetPosition
    probabilities: list[np.ndarray]
    confidence: float
    copy_out_of_range: int = 0


def predict(cell: SuperCell, params: ModelParams) -> Prediction:
    """Argmax position for one super cell, with COPY markers resolved
    against the cell's canonically ordered keys. An out-of-range COPY
    component degrades to NULL and is counted on the prediction."""
    return predict_cells([cell], params)[0]


def predict_cells(cells: list[SuperCell], params: ModelParams, chunk: int = 512) -> list[Prediction]:
    dictionaries = params.dictionary_store()
    q = params.schema.q
    out: list[Prediction] = []
    for start in range(0, len(cells), chunk):
        part = cells[start : start + chunk]
        batch = []
        for cell in part:
            bucket_ids, starts = encode_sentence(render_feature(cell), params.vocab)
            batch.append(
                EncodedSample(bucket_ids, starts, len(starts), None, width=cell.width)
            )
        logits = forward(batch, params)
        probs = [_softmax(l) for l in logits]
        for row, cell in enumerate(part):
            w = min(cell.width, params.config.max_width)
            head_ids = list(range(q)) + list(range(q, q + w)) + [len(logits) - 1]
            row_probs = [probs[i][row] for i in head_ids]
            choices = [int(p.argmax()) for p in row_probs]
            confidence = float(np.prod([p[c] for p, c in zip(row_probs, choices)]))
            keys = tuple(params.space.key_vocabs[s][choices[s]] for s in range(q))
            attrs = tuple(
                params.space.attr_vocab[choices[q + j]] for j in range(w)
            )
            if all(a is None for a in attrs):
                position = discard_position(q, w)
                degraded = 0
            else:
                raw = TargetPosition(keys, attrs, AGG_MODES[choices[-1]])
                position, degraded = resolve_position(
                    raw, cell, params.key_kinds, dictionaries
                )
            out.append(Prediction(position, row_probs, confidence, degraded))
    return out


def integrate_predictions(
    cells: list[SuperCell], params: ModelParams, schema: TargetSchema | None = None
):
    """Assemble predictions for a corpus into a target table.

    A mispredicted aggregation mode that conflicts with an existing cell is
    skipped and counted rather than aborting the run; a handful of wrong
    cells is the tolerable failure mode here."""
    from .assemble import AggModeConflict, TargetTable

    table = TargetTable(schema or params.schema)
    for cell, prediction in zip(cells, predict_cells(cells, params)):
        try:
            table.apply(cell, prediction.position)
        except AggModeConflict:
            table.report.cells_skipped += cell.width
    return table


def gradient_check(encoder: str = "pooled", seed: int = 0, eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients
    on a random tiny model; near-zero pairs fall under an absolute 1e-6
    tolerance and count as zero error."""
    rng = np.random.default_rng(seed)
    schema = TargetSchema(
        attributes=("k1", "a", "b"),
        key_attributes=("k1",),
        key_domains={"k1": KeyDomain(("x", "y"), False)},
    )
    config = TrainConfig(
        encoder=encoder, embed_dim=2, hidden=3, bucket_count=23,
        max_copy=2, max_width=2, seed=seed, dtype="float64",
    )
    params = init_params(config, schema)
    for key in params.arrays:
        params.arrays[key] = rng.standard_normal(params.arrays[key].shape) * 0.5

    sentences = []
    words = ["alpha", "beta", "gamma", "delta", "ep"]
    for _ in range(3):
        n = int(rng.integers(2, 6))
        toks = tuple(words[int(rng.integers(len(words)))] for _ in range(n))
        sentences.append(FeatureSentence(toks, ("VAL",) * n))
    batch = []
    n_heads = len(params.head_sizes)
    for sentence in sentences:
        bucket_ids, starts = encode_sentence(sentence, params.vocab)
        targets = np.array(
            [int(rng.integers(k)) for k in params.head_sizes], dtype=np.int64
        )
        batch.append(EncodedSample(bucket_ids, starts, len(sentence.tokens), targets))

    _, grads = loss_and_grads(batch, params)
    max_err = 0.0
    for key, array in params.arrays.items():
        flat = array.reshape(-1)
        grad_flat = grads[key].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            loss_plus, _ = loss_and_grads(batch, params)
            flat[idx] = original - eps
            loss_minus, _ = loss_and_grads(batch, params)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2 * eps)
            analytic = grad_flat[idx]
            denom = max(abs(numeric), abs(analytic))
            if denom < 1e-6:
                continue
            max_err = max(max_err, abs(numeric - analytic) / denom)
    return max_err

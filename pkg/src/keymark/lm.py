"""Language model layer.

A provider is anything with a vocabulary size and a deterministic
``next_dist(prefix)`` returning a probability vector over the vocabulary.
The built-in provider is an order-r Markov model with additive smoothing,
trained on a token corpus (byte-level by default, so any file works as a
corpus without an external tokenizer).

Also home to ``watermark_potential``, the average-surprise functional that
upper-bounds how detectable a watermark in a given text can be.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import (
    CorruptFile,
    EmptyCorpus,
    EmptySequence,
    ModelMissing,
    NegativeEntry,
    SumNotOne,
    WrongLength,
)

SUM_TOLERANCE = 1e-9


def validate_distribution(probs, vocab_size=None):
    """Check that ``probs`` is a probability vector and return it as float64.

    Entries must be nonnegative and sum to 1 within ``SUM_TOLERANCE``.
    Negative zeros are normalized to plain zeros. If ``vocab_size`` is given
    the length must match it.
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise WrongLength(f"expected a nonempty 1-d vector, got shape {arr.shape}")
    if vocab_size is not None and arr.shape[0] != vocab_size:
        raise WrongLength(f"expected length {vocab_size}, got {arr.shape[0]}")
    if np.any(arr < 0.0):
        raise NegativeEntry("distribution has a negative entry")
    # adding +0.0 turns -0.0 into 0.0 and leaves every other value bit-identical
    arr = arr + 0.0
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise SumNotOne(f"entries sum to {total!r}, not 1")
    return arr


@runtime_checkable
class LanguageModelProvider(Protocol):
    """Next-token distribution source: deterministic given the prefix."""

    vocab_size: int

    def next_dist(self, prefix) -> np.ndarray: ...


@dataclass(frozen=True)
class MarkovModel:
    """Order-r Markov model with additive smoothing.

    ``counts`` maps a context tuple (length 0..order) to an integer count
    vector of length ``vocab_size``. Prediction uses the longest context
    available: shorter prefixes back off to their own length, and a context
    never seen in training falls through to pure smoothing (uniform). The
    smoothed probabilities are (count + smoothing) / (total + smoothing * N),
    which keeps every token's probability strictly positive.

    Treat instances as immutable; ``next_dist`` is a pure function of
    (prefix, counts).
    """

    order: int
    vocab_size: int
    smoothing: float
    counts: dict

    def next_dist(self, prefix) -> np.ndarray:
        depth = min(self.order, len(prefix))
        if depth:
            context = tuple(int(t) for t in prefix[len(prefix) - depth:])
        else:
            context = ()
        vec = self.counts.get(context)
        if vec is None:
            vec = _ZERO_CACHE.setdefault(self.vocab_size, np.zeros(self.vocab_size, dtype=np.int64))
        total = int(vec.sum())
        return (vec + self.smoothing) / (total + self.smoothing * self.vocab_size)

    def save(self, path):
        payload = {
            "format": "keymark-markov",
            "version": 1,
            "order": self.order,
            "vocab_size": self.vocab_size,
            "smoothing": self.smoothing,
            "counts": {
                ",".join(str(t) for t in ctx): vec.tolist() for ctx, vec in self.counts.items()
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)


_ZERO_CACHE: dict = {}


def markov_train(corpus, order, smoothing=1.0, vocab_size=256) -> MarkovModel:
    """Count all windows of length 1..order+1 in ``corpus`` into a MarkovModel.

    Contexts of every length up to ``order`` are populated so short prefixes
    back off to real statistics rather than to pure smoothing.
    """
    tokens = np.asarray(corpus, dtype=np.int64)
    if tokens.ndim != 1 or tokens.shape[0] == 0:
        raise EmptyCorpus("corpus must be a nonempty token sequence")
    if order < 0:
        raise ValueError("order must be >= 0")
    if smoothing <= 0:
        raise ValueError("smoothing must be > 0")
    if tokens.min() < 0 or tokens.max() >= vocab_size:
        raise WrongLength(f"corpus tokens must lie in [0, {vocab_size})")

    counts: dict = {}
    seq = [int(t) for t in tokens]
    for depth in range(order + 1):
        for i in range(depth, len(seq)):
            ctx = tuple(seq[i - depth:i])
            vec = counts.get(ctx)
            if vec is None:
                vec = np.zeros(vocab_size, dtype=np.int64)
                counts[ctx] = vec
            vec[seq[i]] += 1
    return MarkovModel(order=order, vocab_size=vocab_size, smoothing=float(smoothing), counts=counts)


def demo_corpus_path() -> str:
    """Path of the small bundled English text used by examples and tests."""
    return str(Path(__file__).parent / "data" / "demo_corpus.txt")


def load_model(path) -> MarkovModel:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise ModelMissing(str(exc)) from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"not a model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != "keymark-markov":
        raise CorruptFile("not a keymark model file")
    if payload.get("version") != 1:
        raise CorruptFile(f"unsupported model version {payload.get('version')!r}")
    try:
        counts = {}
        for ctx_str, vec in payload["counts"].items():
            ctx = tuple(int(t) for t in ctx_str.split(",")) if ctx_str else ()
            counts[ctx] = np.asarray(vec, dtype=np.int64)
        return MarkovModel(
            order=int(payload["order"]),
            vocab_size=int(payload["vocab_size"]),
            smoothing=float(payload["smoothing"]),
            counts=counts,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptFile(f"malformed model file: {exc}") from exc


def watermark_potential(model: LanguageModelProvider, tokens, prompt=()) -> float:
    """Average surprise of ``tokens`` under ``model``: 1 - mean p(token | prefix).

    0 for text a deterministic model forces, approaching 1 - 1/N for text a
    near-uniform model happens to emit. Higher values leave more room for a
    watermark signal. ``prompt`` conditions the model but is not scored.
    """
    seq = [int(t) for t in tokens]
    if not seq:
        raise EmptySequence("watermark_potential needs at least one token")
    prefix = [int(t) for t in prompt]
    total = 0.0
    for tok in seq:
        total += float(model.next_dist(prefix)[tok])
        prefix.append(tok)
    return 1.0 - total / len(seq)


def sample_text(model: LanguageModelProvider, m, rng, prompt=()) -> np.ndarray:
    """Ordinary (unwatermarked) autoregressive sampling of ``m`` tokens."""
    if m < 1:
        raise ValueError("m must be >= 1")
    prefix = [int(t) for t in prompt]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        probs = model.next_dist(prefix)
        cdf = np.cumsum(probs)
        tok = int(np.searchsorted(cdf, rng.random(), side="right"))
        tok = min(tok, model.vocab_size - 1)
        out[i] = tok
        prefix.append(tok)
    return out

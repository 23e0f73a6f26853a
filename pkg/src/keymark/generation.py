"""Watermarked generation.

``generate`` walks the model autoregressively and replaces sampling with a
decoder call against the shared key: step i (0-indexed) consumes key element
i mod n, so a key of length n is reused cyclically. The prompt conditions
the model but consumes no key elements and is not part of the output.

``shift_generate`` draws a uniformly random rotation of the key before
generating. Different calls therefore produce different texts from one key,
while the detector, whose statistic is rotation invariant, needs no change
at all. The shift is deliberately not returned.

``generate_hash`` is the keyless baseline: each step's element is derived
from a hash of the trailing window of context (see decoders module).
"""

from dataclasses import dataclass

import numpy as np

from .decoders import exp_decode, hash_seeded_element, its_decode
from .errors import VocabMismatch
from .keys import ITS, KeySequence, key_rotate
from .lm import LanguageModelProvider


@dataclass(frozen=True)
class GenerationRequest:
    """A generation job: how many tokens, from what prompt, with which key."""

    m: int
    prompt: tuple
    kind: str
    key: KeySequence | None = None


def _decode(kind, elem, probs):
    if kind == ITS:
        return its_decode(elem, probs)
    return exp_decode(elem, probs)


def generate(key: KeySequence, m, model: LanguageModelProvider, prompt=()) -> np.ndarray:
    """Generate exactly ``m`` watermarked tokens."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if model.vocab_size != key.vocab_size:
        raise VocabMismatch(f"model vocab {model.vocab_size} != key vocab {key.vocab_size}")
    prefix = [int(t) for t in prompt]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        probs = model.next_dist(prefix)
        tok = _decode(key.kind, key.element(i % key.n), probs)
        out[i] = tok
        prefix.append(tok)
    return out


def shift_generate(key: KeySequence, m, model: LanguageModelProvider, prompt, rng) -> np.ndarray:
    """Generate from the key rotated by a uniform random shift."""
    shift = int(rng.integers(key.n))
    return generate(key_rotate(key, shift), m, model, prompt)


def generate_hash(model: LanguageModelProvider, m, window, salt, kind, prompt=()) -> np.ndarray:
    """Keyless hash-chained generation (the degeneration-prone baseline)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    prefix = [int(t) for t in prompt]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        probs = model.next_dist(prefix)
        elem = hash_seeded_element(prefix, window, salt, kind, model.vocab_size)
        tok = _decode(kind, elem, probs)
        out[i] = tok
        prefix.append(tok)
    return out

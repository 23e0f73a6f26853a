"""Corruption attacks for robustness evaluation.

Counts derive from the fraction as round(fraction * len), positions are
drawn without replacement, and replacement/insertion tokens are uniform
over the full vocabulary (a substitution may therefore reproduce the
original token; that collision costs O(1/N) signal and is accepted).
All attacks are pure given the generator state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds, WouldEmpty


@dataclass(frozen=True)
class AttackSpec:
    """Declarative attack description for config files."""

    kind: str  # substitute | insert | delete | crop
    fraction: float = 0.0
    start: int | None = None  # crop only
    length: int | None = None


def _count(fraction, size):
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    return int(round(fraction * size))


def substitute_attack(tokens, fraction, vocab_size, rng) -> np.ndarray:
    """Replace round(fraction * len) positions with uniform random tokens."""
    y = np.asarray(tokens, dtype=np.int64).copy()
    count = _count(fraction, y.shape[0])
    if count:
        pos = rng.choice(y.shape[0], size=count, replace=False)
        y[pos] = rng.integers(0, vocab_size, size=count)
    return y


def insert_attack(tokens, fraction, vocab_size, rng) -> np.ndarray:
    """Insert round(fraction * len) uniform tokens at uniform positions.

    The original sequence stays a subsequence of the output.
    """
    out = [int(t) for t in np.asarray(tokens, dtype=np.int64)]
    count = _count(fraction, len(out))
    for _ in range(count):
        pos = int(rng.integers(0, len(out) + 1))
        out.insert(pos, int(rng.integers(0, vocab_size)))
    return np.asarray(out, dtype=np.int64)


def delete_attack(tokens, fraction, rng) -> np.ndarray:
    """Remove round(fraction * len) positions; output is a subsequence."""
    y = np.asarray(tokens, dtype=np.int64)
    count = _count(fraction, y.shape[0])
    if count >= y.shape[0]:
        raise WouldEmpty("deletion would remove every token")
    if not count:
        return y.copy()
    pos = rng.choice(y.shape[0], size=count, replace=False)
    keep = np.ones(y.shape[0], dtype=bool)
    keep[pos] = False
    return y[keep]


def crop(tokens, start, length) -> np.ndarray:
    """Contiguous substring of ``length`` tokens starting at ``start``."""
    y = np.asarray(tokens, dtype=np.int64)
    if length < 1:
        raise OutOfBounds("crop length must be >= 1")
    if start < 0 or start + length > y.shape[0]:
        raise OutOfBounds(
            f"crop [{start}, {start + length}) outside sequence of length {y.shape[0]}"
        )
    return y[start:start + length].copy()

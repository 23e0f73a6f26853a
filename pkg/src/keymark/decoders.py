"""Distortion-free decoders.

A decoder deterministically maps (key element, next-token distribution) to a
token such that, marginalizing over a random key element, the chosen token is
distributed exactly according to the distribution. Two constructions:

* inverse transform sampling (``its``): order tokens by the key's shared
  permutation, take the token whose half-open CDF interval [lo, hi) contains
  the key's uniform u. Interval widths equal token probabilities, so
  zero-mass tokens occupy empty intervals and can never be selected. The
  boundary u >= 1 (probability zero, but the function must be total) maps to
  the last positive-mass token in permuted order.
* exponential minimum sampling (``exp``): among tokens with positive mass,
  take the argmin of -log(value_token) / prob_token. Exact cost ties (also
  probability zero) break toward the smaller token index.

``hash_seeded_element`` is the keyless baseline: it derives an element not
from the shared key but from a PRNG seeded with salt + sum of the trailing
window of tokens, which is what makes its output collapse into loops when
the recent window recurs.

All functions here are pure and safe for unrestricted concurrent use.
"""

import numpy as np

from .errors import AllZeroMass
from .keys import (
    COMPONENT_CLAMP,
    EXP,
    ITS,
    ExpKeyElement,
    ItsKeyElement,
    KindMismatch,
    permutation_sample,
)


def its_decode(elem: ItsKeyElement, mu) -> int:
    """Token whose permuted-CDF interval [lo, hi) contains ``elem.u``."""
    probs = np.asarray(mu, dtype=np.float64)
    inverse = elem.perm.inverse
    ordered = probs[inverse]
    positive = np.flatnonzero(ordered > 0)
    if positive.size == 0:
        raise AllZeroMass("distribution has no positive entry")
    cdf = np.cumsum(ordered)
    # first rank with cdf strictly above u, i.e. the interval containing u;
    # empty intervals (zero-mass tokens) are skipped automatically
    rank = int(np.searchsorted(cdf, elem.u, side="right"))
    last = int(positive[-1])
    if rank > last:
        rank = last
    return int(inverse[rank])


def exp_decode(elem: ExpKeyElement, mu) -> int:
    """Argmin over positive-mass tokens of -log(value) / probability."""
    probs = np.asarray(mu, dtype=np.float64)
    mask = probs > 0
    if not mask.any():
        raise AllZeroMass("distribution has no positive entry")
    costs = np.where(mask, -np.log(elem.values) / np.where(mask, probs, 1.0), np.inf)
    return int(np.argmin(costs))  # first occurrence: ties go to the smaller token


def its_decode_batch(u, inverse, mu) -> np.ndarray:
    """Vectorized its_decode: B decodes of one distribution.

    ``u`` has shape (B,); ``inverse`` is either one shared rank-to-token
    vector (N,) or a per-decode matrix (B, N). Matches the scalar decoder
    exactly, decode by decode.
    """
    probs = np.asarray(mu, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    inverse = np.asarray(inverse)
    ordered = probs[inverse]  # (N,) or (B, N)
    if ordered.ndim == 1:
        ordered = np.broadcast_to(ordered, (u.shape[0], ordered.shape[0]))
        inverse = np.broadcast_to(inverse, ordered.shape)
    if not (ordered[0] > 0).any():
        raise AllZeroMass("distribution has no positive entry")
    cdf = np.cumsum(ordered, axis=1)
    rank = np.sum(cdf <= u[:, None], axis=1)
    positive = ordered > 0
    last = ordered.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    rank = np.minimum(rank, last)
    return inverse[np.arange(u.shape[0]), rank]


def exp_decode_batch(values, mu) -> np.ndarray:
    """Vectorized exp_decode over rows of ``values`` (shape (B, N))."""
    probs = np.asarray(mu, dtype=np.float64)
    mask = probs > 0
    if not mask.any():
        raise AllZeroMass("distribution has no positive entry")
    safe = np.where(mask, probs, 1.0)
    costs = np.where(mask, -np.log(values) / safe, np.inf)
    return np.argmin(costs, axis=1)


def hash_seeded_element(prev_tokens, window, salt, kind, vocab_size):
    """Key element derived from the trailing token window instead of a key.

    The PRNG is seeded with salt + sum(last ``window`` tokens); identical
    windows therefore yield identical elements, which is the degeneration
    mechanism this baseline exists to demonstrate. Fewer than ``window``
    tokens of history contribute just their sum.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    recent = [int(t) for t in prev_tokens][-window:]
    seed_value = (int(salt) + sum(recent)) & 0xFFFFFFFFFFFFFFFF
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_value)))
    if kind == ITS:
        return ItsKeyElement(u=float(rng.random()), perm=permutation_sample(vocab_size, rng))
    if kind == EXP:
        vals = np.clip(rng.random(vocab_size), COMPONENT_CLAMP, 1.0 - COMPONENT_CLAMP)
        return ExpKeyElement(values=vals)
    raise KindMismatch(f"unknown key kind {kind!r}")

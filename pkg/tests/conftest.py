import numpy as np
import pytest

from keymark.alignment import TestStatisticConfig, test_statistic
from keymark.keys import EXP, ITS, KeySequence, Permutation

# library names that happen to match pytest's collection patterns
test_statistic.__test__ = False
TestStatisticConfig.__test__ = False


def make_its_key(us, vocab_size=2, order=None, seed=None):
    """Explicit ITS key from literal uniforms.

    order, when given, lists tokens in rank order (the visit order of the
    shared permutation). Default is the identity.
    """
    inv = np.arange(vocab_size) if order is None else np.asarray(order)
    fwd = np.argsort(inv)
    us = np.asarray(us, dtype=np.float64)
    return KeySequence(kind=ITS, n=len(us), vocab_size=vocab_size,
                       u=us, perm=Permutation(forward=fwd, inverse=inv),
                       values=None, seed=seed)


def make_exp_key(rows, seed=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    return KeySequence(kind=EXP, n=rows.shape[0], vocab_size=rows.shape[1],
                       u=None, perm=None, values=rows, seed=seed)


class FixedModel:
    """Model emitting one constant next-token distribution."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.vocab_size = self.probs.size

    def next_dist(self, prefix):
        return self.probs


@pytest.fixture
def rng():
    return np.random.default_rng(0xA5A5)

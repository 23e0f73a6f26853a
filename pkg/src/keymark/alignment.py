"""Alignment costs and the block-sliding test statistic.

Detection scores a text against key material through an alignment cost:
lower cost means the text looks more like it was produced with that key.
Four per-position cost families exist (a theoretical and an empirically
stronger practical variant for each decoder kind), each summed over aligned
(token, element) pairs. On top of those, a simple Levenshtein relaxation
allows skipping tokens or key elements at penalty ``gamma`` per skip, which
buys robustness against insertions and deletions.

The test statistic is the minimum cost over every length-k text block and
every circular key offset. Rotating the key only relabels the offsets, so
the statistic is exactly rotation invariant, which is what makes
shifted-key generation detectable with no extra work.

Cost conventions (tokens 0-indexed, ranks 0-indexed):

* ``its_theory``:   -sum (u_i - 1/2) * (eta(rank_i) - 1/2)
* ``its_practice``:  sum |u_i - eta(rank_i)|
* ``exp_theory``:   -sum log value_{i, y_i}          (always positive)
* ``exp_practice``:  sum log(1 - value_{i, y_i})     (always negative)

where eta(rank) = rank / (N - 1) on the key's shared permutation ranks.

Complexity: plain-cost statistics cost O(m*n) for the default single-block
case (k = |y|) and O(m*n*k) worst case otherwise; Levenshtein statistics
cost O(m*n*k^2). The (block, offset) grid is evaluated with vectorized
batch reductions and a deterministic min (ties broken by smallest (i, j)
lexicographically), so results never depend on evaluation order.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import KindMismatch, LengthMismatch, RankOutOfRange, TextTooShort
from .keys import EXP, ITS, KeySequence

ITS_THEORY = "its_theory"
ITS_PRACTICE = "its_practice"
EXP_THEORY = "exp_theory"
EXP_PRACTICE = "exp_practice"
FAMILIES = (ITS_THEORY, ITS_PRACTICE, EXP_THEORY, EXP_PRACTICE)


@dataclass(frozen=True)
class AlignmentCostSpec:
    """Which per-position cost to use, optionally Levenshtein-relaxed.

    ``edit=False`` aligns position i with key element i of the block;
    ``edit=True`` runs the skip-tolerant dynamic program with per-skip
    penalty ``gamma``.
    """

    family: str
    edit: bool = False
    gamma: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KindMismatch(f"unknown cost family {self.family!r}")
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")


@dataclass(frozen=True)
class TestStatisticConfig:
    cost: AlignmentCostSpec
    block_size: int | None = None  # None means k = |y|


def eta(rank, vocab_size) -> float:
    """Normalized rank in [0, 1]: rank / (N - 1), with 0 for N = 1."""
    if not 0 <= rank < vocab_size:
        raise RankOutOfRange(f"rank {rank} outside [0, {vocab_size})")
    if vocab_size == 1:
        return 0.0
    return rank / (vocab_size - 1)


def c0(vocab_size) -> float:
    """Variance of the normalized rank of a uniformly random token.

    Closed form (N + 1) / (12 (N - 1)); tends to 1/12 for large N. This is
    the per-token scale of the theoretical ITS cost gap between matched and
    unmatched keys.
    """
    if vocab_size < 2:
        raise ValueError("c0 needs vocab_size >= 2")
    return (vocab_size + 1) / (12.0 * (vocab_size - 1))


def _require_kind(key: KeySequence, family):
    wants = ITS if family in (ITS_THEORY, ITS_PRACTICE) else EXP
    if key.kind != wants:
        raise KindMismatch(f"cost family {family} needs a {wants} key, got {key.kind}")


def _paired_costs(tokens, key: KeySequence, family) -> np.ndarray:
    """Per-position costs pairing token i with key element i (length L)."""
    y = np.asarray(tokens, dtype=np.int64)
    if key.kind == ITS:
        ranks = key.perm.forward[y]
        e = ranks / (key.vocab_size - 1)
        if family == ITS_THEORY:
            return -((key.u - 0.5) * (e - 0.5))
        return np.abs(key.u - e)
    sel = key.values[np.arange(y.shape[0]), y]
    if family == EXP_THEORY:
        return -np.log(sel)
    return np.log1p(-sel)


def _position_cost_matrix(tokens, key: KeySequence, family) -> np.ndarray:
    """All-pairs cost matrix: entry [i, c] scores token i against element c."""
    y = np.asarray(tokens, dtype=np.int64)
    if key.kind == ITS:
        ranks = key.perm.forward[y]
        e = ranks / (key.vocab_size - 1)
        if family == ITS_THEORY:
            return -((key.u[None, :] - 0.5) * (e[:, None] - 0.5))
        return np.abs(key.u[None, :] - e[:, None])
    picked = key.values[:, y].T  # (|y|, n)
    if family == EXP_THEORY:
        return -np.log(picked)
    return np.log1p(-picked)


def _aligned_cost(tokens, elements: KeySequence, family) -> float:
    if len(tokens) != elements.n:
        raise LengthMismatch(f"{len(tokens)} tokens vs {elements.n} key elements")
    _require_kind(elements, family)
    return float(np.sum(_paired_costs(tokens, elements, family)))


def its_cost_theory(tokens, elements: KeySequence) -> float:
    """Negative covariance cost between uniforms and normalized ranks."""
    return _aligned_cost(tokens, elements, ITS_THEORY)


def its_cost_practice(tokens, elements: KeySequence) -> float:
    """Sum of absolute deviations |u_i - eta(rank_i)|."""
    return _aligned_cost(tokens, elements, ITS_PRACTICE)


def exp_cost_theory(tokens, elements: KeySequence) -> float:
    """-sum log of the selected components; small when they are near 1."""
    return _aligned_cost(tokens, elements, EXP_THEORY)


def exp_cost_practice(tokens, elements: KeySequence) -> float:
    """sum log(1 - selected component); more negative near 1."""
    return _aligned_cost(tokens, elements, EXP_PRACTICE)


def aligned_cost(tokens, elements: KeySequence, family) -> float:
    """Dispatch on ``family``; the four named costs are fixed aliases."""
    return _aligned_cost(tokens, elements, family)


def levenshtein_cost(tokens, elements: KeySequence, family, gamma) -> float:
    """Skip-tolerant alignment cost.

    Value of the recursion
        d(y, x) = min( d(y[1:], x[1:]) + d0(y[0], x[0]),
                       d(y, x[1:]) + gamma,
                       d(y[1:], x) + gamma )
    with d(empty, x) = gamma * |x| and d(y, empty) = gamma * |y|, computed
    bottom-up over the (|y|+1) x (|x|+1) suffix table. Token and element
    sequences may differ in length.
    """
    _require_kind(elements, family)
    y = np.asarray(tokens, dtype=np.int64)
    ly, lx = y.shape[0], elements.n
    M = _position_cost_matrix(y, elements, family) if ly else None
    D = np.empty((ly + 1, lx + 1), dtype=np.float64)
    D[ly, :] = gamma * np.arange(lx, -1, -1)
    D[:, lx] = gamma * np.arange(ly, -1, -1)
    for a in range(ly - 1, -1, -1):
        row = M[a]
        for b in range(lx - 1, -1, -1):
            D[a, b] = min(D[a + 1, b + 1] + row[b], D[a, b + 1] + gamma, D[a + 1, b] + gamma)
    return float(D[0, 0])


def edit_distance(tokens, other) -> int:
    """Minimum number of insert/delete operations turning one sequence into
    the other (a substitution counts as delete + insert, i.e. 2)."""
    a = [int(t) for t in tokens]
    b = [int(t) for t in other]
    la, lb = len(a), len(b)
    D = np.empty((la + 1, lb + 1), dtype=np.int64)
    D[la, :] = lb - np.arange(lb + 1)
    D[:, lb] = la - np.arange(la + 1)
    for i in range(la - 1, -1, -1):
        for j in range(lb - 1, -1, -1):
            keep = D[i + 1, j + 1] + (0 if a[i] == b[j] else 2)
            D[i, j] = min(keep, D[i + 1, j] + 1, D[i, j + 1] + 1)
    return int(D[0, 0])


def _lex_argmin(d_hat, n):
    """Min of the (block, offset-column) value grid plus its smallest (i, j).

    ``d_hat[i, o]`` is the cost of text block i against key offset
    j = (i + o) mod n; ties resolve to the lexicographically smallest (i, j)
    no matter how the grid was filled in.
    """
    value = float(d_hat.min())
    ii, oo = np.nonzero(d_hat == value)
    jj = (ii + oo) % n
    pick = np.lexsort((jj, ii))[0]
    return value, (int(ii[pick]), int(jj[pick]))


def _statistic_plain(y, key, family, k):
    m, n = y.shape[0], key.n
    M = _position_cost_matrix(y, key, family)
    # B[l, o] = M[l, (o + l) % n]: after this shear, block (i, j) is a
    # straight column sum over rows i..i+k-1 at column (j - i) % n, so a key
    # rotation only permutes columns and cannot change any sum bit-for-bit
    col = (np.arange(n)[None, :] + np.arange(m)[:, None]) % n
    B = np.take_along_axis(M, col, axis=1)
    if k == m:
        d_hat = B.sum(axis=0)[None, :]
    else:
        d_hat = sliding_window_view(B, k, axis=0).sum(axis=2)
    return _lex_argmin(d_hat, n)


def _statistic_edit(y, key, family, k, gamma):
    m, n = y.shape[0], key.n
    M = _position_cost_matrix(y, key, family)
    shifted_cols = (np.arange(n)[:, None] + np.arange(k)[None, :]) % n  # (n, k): (j, b) -> key index
    edge = gamma * np.arange(k, -1, -1)
    best_val, best_ij = np.inf, (0, 0)
    for i in range(m - k + 1):
        rows = M[i:i + k]  # (k, n)
        # M0[j, a, b] = d0(y[i+a], element[(j+b) % n])
        M0 = rows[:, shifted_cols].transpose(1, 0, 2)
        D = np.empty((n, k + 1, k + 1), dtype=np.float64)
        D[:, k, :] = edge
        D[:, :, k] = edge
        for s in range(2 * k - 2, -1, -1):
            a = np.arange(max(0, s - (k - 1)), min(k - 1, s) + 1)
            b = s - a
            step = np.minimum(D[:, a + 1, b + 1] + M0[:, a, b], D[:, a, b + 1] + gamma)
            D[:, a, b] = np.minimum(step, D[:, a + 1, b] + gamma)
        vals = D[:, 0, 0]
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_ij = float(vals[j]), (i, j)
    return best_val, best_ij


def test_statistic(tokens, key: KeySequence, cfg: TestStatisticConfig):
    """Minimum configured cost over all text blocks and circular key offsets.

    Returns (value, (i, j)): the best block start i in the text and key
    offset j, both 0-indexed. Requires |tokens| >= block size.
    """
    y = np.asarray(tokens, dtype=np.int64)
    m = y.shape[0]
    k = cfg.block_size if cfg.block_size is not None else m
    if k < 1:
        raise TextTooShort("block size must be >= 1")
    if m < k:
        raise TextTooShort(f"text length {m} is below block size {k}")
    _require_kind(key, cfg.cost.family)
    if cfg.cost.edit:
        return _statistic_edit(y, key, cfg.cost.family, k, float(cfg.cost.gamma))
    return _statistic_plain(y, key, cfg.cost.family, k)

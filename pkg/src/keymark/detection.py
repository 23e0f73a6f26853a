"""Watermark detection.

Permutation-test mode: the observed statistic is ranked against T
statistics recomputed under fresh keys drawn from the key distribution
(for ITS keys both the uniforms and the permutation are redrawn). The
plug-in p-value (1 + #{resampled <= observed}) / (T + 1) is exactly uniform
on {1/(T+1), ..., 1} when the text is independent of the key; ties count as
<= which only makes the p-value conservative.

Reference mode trades exactness for speed: a reference distribution of T
null statistics is built once from a stream of key-independent texts, then
each detection costs a single statistic evaluation. The reference formula
is kept exactly as specified, p = (1/T) * #{observed < reference_t},
including its inverted orientation (an observed statistic smaller than all
reference values, i.e. the most watermark-like outcome, yields p = 1). The
report's ``mode`` field says which convention produced the number; consumers
that want small-means-suspicious semantics in reference mode should read
1 - p_value. Mismatched configurations are refused by hash comparison, since
a p-value computed under the wrong cost family would be meaningless.

Resampling contract: the T resample statistics are mutually independent and
are derived from T child streams split off the caller's generator up front,
so any evaluation order (or a parallel pool) produces identical results.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .alignment import TestStatisticConfig, test_statistic
from .errors import ConfigMismatch, CorruptFile, InsufficientTexts
from .keys import KeySequence, sample_key

DEFAULT_RESAMPLES = 99  # desk-scale default; harnesses may push this higher
DEFAULT_MIN_PROMPT = 50

_REF_MAGIC = b"WMR1"


@dataclass(frozen=True)
class DetectReport:
    """Machine-readable detection outcome."""

    p_value: float
    statistic: float
    argmin_block: tuple
    resamples: int
    mode: str  # "permutation" or "reference"
    config: dict

    def as_dict(self) -> dict:
        return {
            "p_value": self.p_value,
            "statistic": self.statistic,
            "argmin_block": list(self.argmin_block),
            "resamples": self.resamples,
            "mode": self.mode,
            "config": dict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def _config_echo(key: KeySequence, cfg: TestStatisticConfig) -> dict:
    return {
        "kind": key.kind,
        "n": key.n,
        "vocab_size": key.vocab_size,
        "family": cfg.cost.family,
        "edit": cfg.cost.edit,
        "gamma": cfg.cost.gamma,
        "block_size": cfg.block_size,
    }


def config_hash(key_kind, n, vocab_size, cfg: TestStatisticConfig, m) -> str:
    """Canonical digest of everything a reference distribution depends on."""
    text = "|".join(
        [
            "keymark-ref", "1", str(key_kind), str(int(n)), str(int(vocab_size)),
            cfg.cost.family, str(int(cfg.cost.edit)), repr(float(cfg.cost.gamma)),
            "full" if cfg.block_size is None else str(int(cfg.block_size)),
            str(int(m)),
        ]
    )
    return hashlib.sha256(text.encode()).hexdigest()


def permutation_p_value(observed, resampled) -> float:
    """(1 + #{resampled <= observed}) / (T + 1)."""
    arr = np.asarray(resampled, dtype=np.float64)
    return float((1 + int(np.sum(arr <= observed))) / (arr.shape[0] + 1))


def reference_p_value(observed, reference_stats) -> float:
    """(1/T) * #{observed < reference_t}, orientation as specified."""
    arr = np.asarray(reference_stats, dtype=np.float64)
    return float(np.sum(observed < arr) / arr.shape[0])


def resample_statistics(tokens, key: KeySequence, cfg: TestStatisticConfig, T, rng) -> np.ndarray:
    """The T null statistics, one per child stream of ``rng``.

    Statistic t depends only on child stream t, so the vector is identical
    no matter how or where the entries are computed.
    """
    children = rng.spawn(T)
    out = np.empty(T, dtype=np.float64)
    for t in range(T):
        fresh = sample_key(key.kind, key.n, key.vocab_size, children[t])
        out[t] = test_statistic(tokens, fresh, cfg)[0]
    return out


def detect(tokens, key: KeySequence, cfg: TestStatisticConfig, T, rng) -> DetectReport:
    """Permutation-test detection with T fresh-key resamples."""
    if T < 1:
        raise ValueError("T must be >= 1")
    value, argmin = test_statistic(tokens, key, cfg)
    null_stats = resample_statistics(tokens, key, cfg, T, rng)
    return DetectReport(
        p_value=permutation_p_value(value, null_stats),
        statistic=float(value),
        argmin_block=argmin,
        resamples=T,
        mode="permutation",
        config=_config_echo(key, cfg),
    )


@dataclass(frozen=True)
class ReferenceDistribution:
    """Frozen, sorted null statistics for single-evaluation detection."""

    stats: np.ndarray  # sorted ascending, float64
    m: int
    config_digest: str
    echo: dict | None = None

    @property
    def T(self) -> int:
        return int(self.stats.shape[0])


def build_reference(
    T, m, key_kind, n, vocab_size, cfg: TestStatisticConfig, texts,
    min_prompt=DEFAULT_MIN_PROMPT, rng=None,
) -> ReferenceDistribution:
    """Collect T null statistics from a stream of key-independent texts.

    Texts no longer than min_prompt + m are skipped; each usable text
    contributes the statistic of its last m tokens against a fresh key.
    """
    if T < 1 or m < 1:
        raise ValueError("need T >= 1 and m >= 1")
    if rng is None:
        rng = np.random.default_rng()
    stats = []
    for text in texts:
        arr = np.asarray(text, dtype=np.int64)
        if arr.shape[0] <= min_prompt + m:
            continue
        fresh = sample_key(key_kind, n, vocab_size, rng)
        stats.append(test_statistic(arr[-m:], fresh, cfg)[0])
        if len(stats) == T:
            break
    if len(stats) < T:
        raise InsufficientTexts(
            f"stream yielded {len(stats)} usable texts, need {T} "
            f"(texts must be longer than min_prompt + m = {min_prompt + m} tokens)")
    digest = config_hash(key_kind, n, vocab_size, cfg, m)
    echo = {"kind": key_kind, "n": int(n), "vocab_size": int(vocab_size), "m": int(m)}
    return ReferenceDistribution(
        stats=np.sort(np.asarray(stats, dtype=np.float64)),
        m=int(m), config_digest=digest, echo=echo,
    )


def detect_with_reference(tokens, key: KeySequence, cfg: TestStatisticConfig,
                          ref: ReferenceDistribution) -> DetectReport:
    """Single-evaluation detection against a frozen reference distribution."""
    expected = config_hash(key.kind, key.n, key.vocab_size, cfg, ref.m)
    if expected != ref.config_digest:
        raise ConfigMismatch("reference was built under a different configuration")
    arr = np.asarray(tokens, dtype=np.int64)
    if arr.shape[0] > ref.m:
        raise ConfigMismatch(f"text length {arr.shape[0]} exceeds reference length {ref.m}")
    value, argmin = test_statistic(arr, key, cfg)
    return DetectReport(
        p_value=reference_p_value(value, ref.stats),
        statistic=float(value),
        argmin_block=argmin,
        resamples=ref.T,
        mode="reference",
        config=_config_echo(key, cfg),
    )


def save_reference(ref: ReferenceDistribution, path):
    import struct

    digest = bytes.fromhex(ref.config_digest)
    head = _REF_MAGIC + struct.pack("<QQ", ref.T, ref.m) + digest
    with open(path, "wb") as fh:
        fh.write(head + ref.stats.astype("<f8").tobytes())


def load_reference(path) -> ReferenceDistribution:
    import struct

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != _REF_MAGIC:
        raise CorruptFile("missing reference magic header")
    if len(blob) < 52:
        raise CorruptFile("truncated reference header")
    T, m = struct.unpack("<QQ", blob[4:20])
    digest = blob[20:52].hex()
    want = 52 + 8 * T
    if len(blob) != want:
        raise CorruptFile(f"expected {want} bytes, found {len(blob)}")
    stats = np.frombuffer(blob, dtype="<f8", count=T, offset=52).copy()
    if np.any(np.diff(stats) < 0):
        raise CorruptFile("reference statistics are not sorted")
    return ReferenceDistribution(stats=stats, m=int(m), config_digest=digest)

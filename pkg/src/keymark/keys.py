"""Watermark key material.

A key sequence is the shared secret that couples the generator and the
detector. Two kinds exist:

* ``its``: n scalar uniforms plus ONE token permutation shared by every
  element (generator and detector must agree on the ordering, so the
  permutation is part of the key, not per-element).
* ``exp``: n independent vectors of per-token uniforms, one value per
  vocabulary entry, clamped away from {0, 1} so logarithms stay finite.

Reproducibility contract: ``key_generate`` derives one PRNG substream per key
element index from numpy's SeedSequence, namely PCG64 seeded with
``SeedSequence(entropy=seed, spawn_key=(i,))`` for element i, and for the ITS
permutation ``spawn_key=(n,)`` (one past the last element). Identical
(kind, n, vocab_size, seed) therefore reproduce the key bit-for-bit on any
platform, and elements can be regenerated independently.

Key file layout (all integers little-endian):

    offset 0  4 bytes  magic b"WMK1" (b"WMK" + one version digit)
    offset 4  1 byte   kind: 0 = its, 1 = exp
    offset 5  1 byte   flags: bit 0 set when a seed is recorded
    offset 6  8 bytes  n (uint64)
    offset 14 8 bytes  vocab_size (uint64)
    [offset 22 8 bytes seed (uint64), only when flags bit 0 is set]
    payload, its: n float64 uniforms, then vocab_size uint32 rank-to-token
    payload, exp: n * vocab_size float64, row-major

Any missing or trailing bytes raise CorruptFile; a "WMK" magic with a
different version digit raises VersionMismatch; an unknown kind byte raises
KindMismatch.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFile, InvalidSize, KindMismatch, VersionMismatch

ITS = "its"
EXP = "exp"
KINDS = (ITS, EXP)

# keeps log(x) and log1p(-x) finite for every stored component
COMPONENT_CLAMP = 1e-12

_MAGIC = b"WMK1"
_KIND_CODE = {ITS: 0, EXP: 1}
_KIND_NAME = {0: ITS, 1: EXP}


@dataclass(frozen=True)
class Permutation:
    """A token ordering: forward[token] = rank, inverse[rank] = token."""

    forward: np.ndarray
    inverse: np.ndarray

    @property
    def size(self) -> int:
        return int(self.forward.shape[0])


def permutation_from_inverse(inverse) -> Permutation:
    inv = np.asarray(inverse, dtype=np.int64)
    fwd = np.argsort(inv, kind="stable")
    return Permutation(forward=fwd, inverse=inv)


def permutation_sample(vocab_size, rng) -> Permutation:
    """Uniformly random permutation of ``vocab_size`` tokens (Fisher-Yates)."""
    if vocab_size < 1:
        raise InvalidSize("vocab_size must be >= 1")
    return permutation_from_inverse(rng.permutation(vocab_size))


@dataclass(frozen=True)
class ItsKeyElement:
    u: float
    perm: Permutation


@dataclass(frozen=True)
class ExpKeyElement:
    values: np.ndarray  # one uniform per token, inside (0, 1)


@dataclass(frozen=True)
class KeySequence:
    """Shared watermark key: n elements over a fixed vocabulary.

    ITS keys store ``u`` (shape (n,)) and the shared ``perm``; EXP keys store
    ``values`` (shape (n, vocab_size)). Immutable; safe to share across
    concurrent workers.
    """

    kind: str
    n: int
    vocab_size: int
    u: np.ndarray | None = None
    perm: Permutation | None = None
    values: np.ndarray | None = None
    seed: int | None = None

    def element(self, i):
        i = int(i) % self.n
        if self.kind == ITS:
            return ItsKeyElement(u=float(self.u[i]), perm=self.perm)
        return ExpKeyElement(values=self.values[i])

    @property
    def elements(self):
        return [self.element(i) for i in range(self.n)]


def _substream(seed, index):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def key_generate(kind, n, vocab_size, seed) -> KeySequence:
    """Deterministically generate a fresh key from a 64-bit seed.

    Element i draws from its own substream (see module docstring), so the
    same arguments always rebuild the identical key.
    """
    if kind not in KINDS:
        raise KindMismatch(f"unknown key kind {kind!r}")
    if n < 1 or vocab_size < 2:
        raise InvalidSize("need n >= 1 and vocab_size >= 2")
    seed = int(seed)
    if kind == ITS:
        u = np.empty(n, dtype=np.float64)
        for i in range(n):
            u[i] = _substream(seed, i).random()
        perm = permutation_sample(vocab_size, _substream(seed, n))
        return KeySequence(kind=ITS, n=n, vocab_size=vocab_size, u=u, perm=perm, seed=seed)
    values = np.empty((n, vocab_size), dtype=np.float64)
    for i in range(n):
        values[i] = _substream(seed, i).random(vocab_size)
    np.clip(values, COMPONENT_CLAMP, 1.0 - COMPONENT_CLAMP, out=values)
    return KeySequence(kind=EXP, n=n, vocab_size=vocab_size, values=values, seed=seed)


def sample_key(kind, n, vocab_size, rng) -> KeySequence:
    """Draw a key directly from the key distribution using ``rng``.

    Same distribution as ``key_generate`` but consumes the caller's stream;
    this is what detection uses for its resampled null keys (both the
    uniforms and, for ITS, the permutation are redrawn).
    """
    if kind not in KINDS:
        raise KindMismatch(f"unknown key kind {kind!r}")
    if n < 1 or vocab_size < 2:
        raise InvalidSize("need n >= 1 and vocab_size >= 2")
    if kind == ITS:
        return KeySequence(
            kind=ITS,
            n=n,
            vocab_size=vocab_size,
            u=rng.random(n),
            perm=permutation_sample(vocab_size, rng),
        )
    values = rng.random((n, vocab_size))
    np.clip(values, COMPONENT_CLAMP, 1.0 - COMPONENT_CLAMP, out=values)
    return KeySequence(kind=EXP, n=n, vocab_size=vocab_size, values=values)


def key_subsequence(key: KeySequence, start, length) -> KeySequence:
    """Circular slice of ``length`` elements beginning at ``start`` (mod n)."""
    if not 0 <= start < key.n:
        raise InvalidSize(f"start must be in [0, {key.n})")
    if length < 1:
        raise InvalidSize("length must be >= 1")
    idx = (start + np.arange(length)) % key.n
    if key.kind == ITS:
        return KeySequence(
            kind=ITS,
            n=length,
            vocab_size=key.vocab_size,
            u=key.u[idx],
            perm=key.perm,
        )
    return KeySequence(kind=EXP, n=length, vocab_size=key.vocab_size, values=key.values[idx])


def key_rotate(key: KeySequence, shift) -> KeySequence:
    """The same key starting ``shift`` elements later (a pure rotation)."""
    return key_subsequence(key, int(shift) % key.n, key.n)


def key_serialize(key: KeySequence) -> bytes:
    flags = 1 if key.seed is not None else 0
    head = _MAGIC + struct.pack("<BB", _KIND_CODE[key.kind], flags)
    head += struct.pack("<QQ", key.n, key.vocab_size)
    if key.seed is not None:
        head += struct.pack("<Q", int(key.seed) & 0xFFFFFFFFFFFFFFFF)
    if key.kind == ITS:
        payload = key.u.astype("<f8").tobytes()
        payload += key.perm.inverse.astype("<u4").tobytes()
    else:
        payload = np.ascontiguousarray(key.values).astype("<f8").tobytes()
    return head + payload


def key_deserialize(blob: bytes) -> KeySequence:
    if len(blob) < 4 or blob[:3] != b"WMK":
        raise CorruptFile("missing WMK magic header")
    if blob[3:4] != _MAGIC[3:4]:
        raise VersionMismatch(f"unsupported key file version {blob[3:4]!r}")
    if len(blob) < 22:
        raise CorruptFile("truncated key header")
    kind_code, flags = struct.unpack("<BB", blob[4:6])
    if kind_code not in _KIND_NAME:
        raise KindMismatch(f"unknown kind byte {kind_code}")
    kind = _KIND_NAME[kind_code]
    n, vocab_size = struct.unpack("<QQ", blob[6:22])
    off = 22
    seed = None
    if flags & 1:
        if len(blob) < off + 8:
            raise CorruptFile("truncated key header (seed)")
        (seed,) = struct.unpack("<Q", blob[off:off + 8])
        off += 8
    if n < 1 or vocab_size < 2:
        raise CorruptFile(f"implausible key dimensions n={n}, vocab={vocab_size}")
    if kind == ITS:
        want = 8 * n + 4 * vocab_size
        if len(blob) - off != want:
            raise CorruptFile(f"expected {want} payload bytes, found {len(blob) - off}")
        u = np.frombuffer(blob, dtype="<f8", count=n, offset=off).copy()
        inv = np.frombuffer(blob, dtype="<u4", count=vocab_size, offset=off + 8 * n)
        inv = inv.astype(np.int64)
        if np.any(np.sort(inv) != np.arange(vocab_size)):
            raise CorruptFile("stored permutation is not a bijection")
        return KeySequence(
            kind=ITS, n=int(n), vocab_size=int(vocab_size),
            u=u, perm=permutation_from_inverse(inv), seed=seed,
        )
    want = 8 * n * vocab_size
    if len(blob) - off != want:
        raise CorruptFile(f"expected {want} payload bytes, found {len(blob) - off}")
    values = np.frombuffer(blob, dtype="<f8", count=n * vocab_size, offset=off)
    values = values.reshape(n, vocab_size).copy()
    return KeySequence(kind=EXP, n=int(n), vocab_size=int(vocab_size), values=values, seed=seed)


def save_key(key: KeySequence, path):
    with open(path, "wb") as fh:
        fh.write(key_serialize(key))


def load_key(path) -> KeySequence:
    with open(path, "rb") as fh:
        return key_deserialize(fh.read())

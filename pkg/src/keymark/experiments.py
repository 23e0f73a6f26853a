"""Sweep harness: median p-values over grids of text length, key length,
and corruption fraction, with bootstrap error bars.

Five watermark variants are runnable:

    its       plain ITS decoding, absolute-deviation cost
    its-edit  same decoding, Levenshtein-relaxed cost (default gamma 0.4)
    exp       plain EXP decoding, log(1 - value) cost
    exp-edit  same decoding, Levenshtein-relaxed cost (default gamma 0.0)
    exp-hash  keyless hash-chained baseline

For the keyed variants each sample draws a fresh key, generates m tokens,
optionally corrupts them, and detects with the permutation test. After an
insertion attack the detector receives the first m tokens; other attacks
detect on whatever the attack returned. Watermark potential is measured on
the uncorrupted generation.

The hash baseline has no key to resample, so the harness scores the text
against elements recomputed from the text's own trailing windows under the
true salt and calibrates with T fresh salts through the same plug-in
p-value formula. That is harness plumbing, not part of the library's
detection contract.

Config file schema (JSON object; all keys optional unless noted):

    variant      required, one of the five names above
    model        path to a model file (or pass a model object to run_sweep)
    m            list of text lengths, default [50]
    n            list of key lengths, default [256]
    attack       null | "substitute" | "insert" | "delete"
    fractions    list of corruption fractions, default [0.0]
    samples      samples per grid cell, default 100
    T            permutation-test resamples, default 99
    gamma        edit penalty; null picks the variant default
    bootstrap    bootstrap resamples for the median's SD, default 200
    seed         integer master seed, default 0
    block_size   null means k = text length
    hash_window  window for exp-hash, default 1

Determinism: cell c uses streams derived only from (seed, c), and each
sample within a cell gets its own child stream, so results are
bit-identical for a given config no matter how cells are scheduled.
Output: CSV with columns (variant, m, n, attack, fraction, median_p,
boot_sd, mean_alpha, seconds) and a JSON-record stream with one object per
cell carrying the same fields.
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .alignment import AlignmentCostSpec, EXP_PRACTICE, ITS_PRACTICE, TestStatisticConfig
from .attacks import delete_attack, insert_attack, substitute_attack
from .decoders import hash_seeded_element
from .detection import detect, permutation_p_value
from .errors import ConfigInvalid, ModelMissing, TooFewValues
from .generation import generate, generate_hash
from .keys import EXP, ITS, sample_key
from .lm import load_model, watermark_potential

# variant -> (key kind, cost family, edit?, default gamma)
VARIANTS = {
    "its": (ITS, ITS_PRACTICE, False, 0.0),
    "its-edit": (ITS, ITS_PRACTICE, True, 0.4),
    "exp": (EXP, EXP_PRACTICE, False, 0.0),
    "exp-edit": (EXP, EXP_PRACTICE, True, 0.0),
    "exp-hash": (EXP, EXP_PRACTICE, False, 0.0),
}

_SWEEP_ATTACKS = ("substitute", "insert", "delete")


@dataclass(frozen=True)
class SweepConfig:
    variant: str
    model_path: str | None = None
    m_values: tuple = (50,)
    n_values: tuple = (256,)
    attack: str | None = None
    fractions: tuple = (0.0,)
    samples_per_cell: int = 100
    T: int = 99
    gamma: float | None = None
    bootstrap: int = 200
    seed: int = 0
    block_size: int | None = None
    hash_window: int = 1

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigInvalid(f"unknown variant {self.variant!r}")
        if self.attack is not None and self.attack not in _SWEEP_ATTACKS:
            raise ConfigInvalid(f"sweep attack must be one of {_SWEEP_ATTACKS}, got {self.attack!r}")
        if not self.m_values or any(m < 1 for m in self.m_values):
            raise ConfigInvalid("m grid values must be positive")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ConfigInvalid("n grid values must be positive")
        if not self.fractions or any(not 0.0 <= f <= 1.0 for f in self.fractions):
            raise ConfigInvalid("fractions must lie in [0, 1]")
        if self.samples_per_cell < 1 or self.T < 1 or self.bootstrap < 1:
            raise ConfigInvalid("samples, T, and bootstrap must be positive")
        if self.hash_window < 1:
            raise ConfigInvalid("hash_window must be >= 1")

    def effective_gamma(self) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        return VARIANTS[self.variant][3]


_SCHEMA_KEYS = {
    "variant": "variant",
    "model": "model_path",
    "m": "m_values",
    "n": "n_values",
    "attack": "attack",
    "fractions": "fractions",
    "samples": "samples_per_cell",
    "T": "T",
    "gamma": "gamma",
    "bootstrap": "bootstrap",
    "seed": "seed",
    "block_size": "block_size",
    "hash_window": "hash_window",
}


def sweep_config_from_dict(raw: dict) -> SweepConfig:
    unknown = set(raw) - set(_SCHEMA_KEYS)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    if "variant" not in raw:
        raise ConfigInvalid("config must name a variant")
    kwargs = {}
    for key, attr in _SCHEMA_KEYS.items():
        if key in raw and raw[key] is not None:
            value = raw[key]
            if attr in ("m_values", "n_values", "fractions"):
                value = tuple(value)
            kwargs[attr] = value
    cfg = SweepConfig(**kwargs)
    cfg.validate()
    return cfg


def load_sweep_config(path) -> SweepConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    return sweep_config_from_dict(raw)


@dataclass(frozen=True)
class CellResult:
    variant: str
    m: int
    n: int
    attack: str | None
    fraction: float
    median_p: float
    boot_sd: float
    mean_alpha: float
    seconds: float
    p_values: tuple = field(repr=False, default=())

    def row(self) -> dict:
        return {
            "variant": self.variant,
            "m": self.m,
            "n": self.n,
            "attack": self.attack or "",
            "fraction": self.fraction,
            "median_p": self.median_p,
            "boot_sd": self.boot_sd,
            "mean_alpha": self.mean_alpha,
            "seconds": self.seconds,
        }


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    cells: tuple

    def cell(self, m, n, fraction=None) -> CellResult:
        for c in self.cells:
            if c.m == m and c.n == n and (fraction is None or c.fraction == fraction):
                return c
        raise KeyError(f"no cell for m={m}, n={n}, fraction={fraction}")

    def write_csv(self, path):
        fields = ["variant", "m", "n", "attack", "fraction",
                  "median_p", "boot_sd", "mean_alpha", "seconds"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for c in self.cells:
                writer.writerow(c.row())

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for c in self.cells:
                fh.write(json.dumps(c.row()) + "\n")


def bootstrap_sd(values, B, rng) -> float:
    """SD of the median across B bootstrap resamples (with replacement)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise TooFewValues("need at least two values to bootstrap")
    if B < 1:
        raise ValueError("B must be >= 1")
    idx = rng.integers(0, arr.shape[0], size=(B, arr.shape[0]))
    medians = np.median(arr[idx], axis=1)
    return float(medians.std())


def _apply_attack(tokens, attack, fraction, vocab_size, m, rng):
    if attack is None or fraction == 0.0:
        # zero-fraction attacks consume no randomness, so matched seeds give
        # byte-identical downstream results either way
        if attack == "substitute":
            return substitute_attack(tokens, fraction, vocab_size, rng)
        if attack == "insert":
            return insert_attack(tokens, fraction, vocab_size, rng)
        if attack == "delete":
            return delete_attack(tokens, fraction, rng)
        return tokens
    if attack == "substitute":
        return substitute_attack(tokens, fraction, vocab_size, rng)
    if attack == "insert":
        # detector sees the original text length, as in the insertion protocol
        return insert_attack(tokens, fraction, vocab_size, rng)[:m]
    if attack == "delete":
        return delete_attack(tokens, fraction, rng)
    raise ConfigInvalid(f"unknown attack {attack!r}")


def hash_statistic(tokens, window, salt, vocab_size) -> float:
    """Alignment score of a text against its own hash-derived elements."""
    total = 0.0
    seq = [int(t) for t in tokens]
    for i, tok in enumerate(seq):
        elem = hash_seeded_element(seq[:i], window, salt, EXP, vocab_size)
        total += float(np.log1p(-elem.values[tok]))
    return total


def run_sweep(cfg: SweepConfig, model=None) -> SweepResult:
    """Execute every grid cell of ``cfg`` and aggregate per-cell results."""
    cfg.validate()
    if model is None:
        if cfg.model_path is None:
            raise ModelMissing("config names no model file and no model object was passed")
        model = load_model(cfg.model_path)
    kind, family, edit, _ = VARIANTS[cfg.variant]
    gamma = cfg.effective_gamma()
    grid = [
        (m, n, f)
        for m in cfg.m_values
        for n in cfg.n_values
        for f in cfg.fractions
    ]
    cells = []
    for cell_index, (m, n, fraction) in enumerate(grid):
        start = time.perf_counter()
        cell_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(cell_index,)))
        )
        children = cell_rng.spawn(cfg.samples_per_cell)
        ps, alphas = [], []
        for child in children:
            if cfg.variant == "exp-hash":
                salt = int(child.integers(1 << 62))
                y = generate_hash(model, m, cfg.hash_window, salt, EXP)
                alphas.append(watermark_potential(model, y))
                attacked = _apply_attack(y, cfg.attack, fraction, model.vocab_size, m, child)
                observed = hash_statistic(attacked, cfg.hash_window, salt, model.vocab_size)
                null_stats = [
                    hash_statistic(attacked, cfg.hash_window, int(s), model.vocab_size)
                    for s in child.integers(1 << 62, size=cfg.T)
                ]
                ps.append(permutation_p_value(observed, null_stats))
                continue
            key = sample_key(kind, n, model.vocab_size, child)
            y = generate(key, m, model)
            alphas.append(watermark_potential(model, y))
            attacked = _apply_attack(y, cfg.attack, fraction, model.vocab_size, m, child)
            stat_cfg = TestStatisticConfig(
                cost=AlignmentCostSpec(family=family, edit=edit, gamma=gamma),
                block_size=cfg.block_size,
            )
            ps.append(detect(attacked, key, stat_cfg, cfg.T, child).p_value)
        cells.append(
            CellResult(
                variant=cfg.variant,
                m=m,
                n=n,
                attack=cfg.attack,
                fraction=fraction,
                median_p=float(np.median(ps)),
                boot_sd=bootstrap_sd(ps, cfg.bootstrap, cell_rng) if len(ps) > 1 else 0.0,
                mean_alpha=float(np.mean(alphas)),
                seconds=time.perf_counter() - start,
                p_values=tuple(ps),
            )
        )
    return SweepResult(config=cfg, cells=tuple(cells))

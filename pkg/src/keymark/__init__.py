"""Distortion-free keyed watermarking for token sequences.

The package plants a watermark by coupling each sampling step to one element
of a secret key sequence, in a way that leaves the per-step token distribution
untouched. Detection aligns a suspect text against the key with a family of
soft alignment costs and turns the best alignment score into a p-value by
resampling fresh keys.
"""

from .alignment import (
    EXP_PRACTICE,
    EXP_THEORY,
    ITS_PRACTICE,
    ITS_THEORY,
    AlignmentCostSpec,
    TestStatisticConfig,
    aligned_cost,
    c0,
    edit_distance,
    eta,
    exp_cost_practice,
    exp_cost_theory,
    its_cost_practice,
    its_cost_theory,
    levenshtein_cost,
    test_statistic,
)
from .attacks import AttackSpec, crop, delete_attack, insert_attack, substitute_attack
from .decoders import exp_decode, hash_seeded_element, its_decode
from .detection import (
    DetectReport,
    ReferenceDistribution,
    build_reference,
    detect,
    detect_with_reference,
    load_reference,
    permutation_p_value,
    reference_p_value,
    save_reference,
)
from .errors import KeymarkError
from .experiments import SweepConfig, bootstrap_sd, load_sweep_config, run_sweep
from .generation import generate, generate_hash, shift_generate
from .keys import (
    EXP,
    ITS,
    KeySequence,
    key_generate,
    key_rotate,
    key_subsequence,
    load_key,
    sample_key,
    save_key,
)
from .lm import (
    MarkovModel,
    demo_corpus_path,
    load_model,
    markov_train,
    sample_text,
    validate_distribution,
    watermark_potential,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentCostSpec",
    "AttackSpec",
    "DetectReport",
    "EXP",
    "EXP_PRACTICE",
    "EXP_THEORY",
    "ITS",
    "ITS_PRACTICE",
    "ITS_THEORY",
    "KeySequence",
    "KeymarkError",
    "MarkovModel",
    "ReferenceDistribution",
    "SweepConfig",
    "TestStatisticConfig",
    "aligned_cost",
    "bootstrap_sd",
    "build_reference",
    "c0",
    "crop",
    "delete_attack",
    "demo_corpus_path",
    "detect",
    "detect_with_reference",
    "edit_distance",
    "eta",
    "exp_cost_practice",
    "exp_cost_theory",
    "exp_decode",
    "generate",
    "generate_hash",
    "hash_seeded_element",
    "insert_attack",
    "its_cost_practice",
    "its_cost_theory",
    "its_decode",
    "key_generate",
    "key_rotate",
    "key_subsequence",
    "levenshtein_cost",
    "load_key",
    "load_model",
    "load_reference",
    "load_sweep_config",
    "markov_train",
    "permutation_p_value",
    "reference_p_value",
    "run_sweep",
    "sample_key",
    "sample_text",
    "save_key",
    "save_reference",
    "shift_generate",
    "substitute_attack",
    "test_statistic",
    "validate_distribution",
    "watermark_potential",
]

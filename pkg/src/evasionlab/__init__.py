"""Desk-scale harness for single-shot append-based evasion of byte-level
malware detectors, built entirely on benign and synthetic corpora.

Pipeline: generate a synthetic corpus, train a byte language model on the
benign files and a gated convolutional detector on both classes, then run
append-attack strategies against the budgeted black-box oracle and report
per-category evasion rates with significance tests.
"""

from .attacks import (ALL_STRATEGIES, AttackOutcome, BenignPool,
                      benign_append_attack, enhanced_benign_append_attack,
                      lm_guided_attack, random_append_attack, rnn_style_lm_attack)
from .binfile import (BinarySample, PerturbedSample, append_payload, parse_sample,
                      read_sample, verify_integrity)
from .bytelm import (ByteLanguageModel, LMConfig, SamplerConfig, TokenSequence,
                     detokenize, lm_forward, lm_gradients, lm_loss, tokenize)
from .detector import DetectionOracle, DetectorConfig, GatedConvDetector
from .harness import (CategoryLabel, CorpusManifest, EvasionReport,
                      SyntheticCorpusSpec, evasion_rate, generate_synthetic_corpus,
                      paired_t_test, run_experiment)
from .threat import (MAX_APPEND_BYTES, QueryBudget, ThreatModel, Verdict,
                     single_shot_profile)

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES", "AttackOutcome", "BenignPool", "benign_append_attack",
    "enhanced_benign_append_attack", "lm_guided_attack", "random_append_attack",
    "rnn_style_lm_attack",
    "BinarySample", "PerturbedSample", "append_payload", "parse_sample",
    "read_sample", "verify_integrity",
    "ByteLanguageModel", "LMConfig", "SamplerConfig", "TokenSequence",
    "detokenize", "lm_forward", "lm_gradients", "lm_loss", "tokenize",
    "DetectionOracle", "DetectorConfig", "GatedConvDetector",
    "CategoryLabel", "CorpusManifest", "EvasionReport", "SyntheticCorpusSpec",
    "evasion_rate", "generate_synthetic_corpus", "paired_t_test", "run_experiment",
    "MAX_APPEND_BYTES", "QueryBudget", "ThreatModel", "Verdict", "single_shot_profile",
    "__version__",
]

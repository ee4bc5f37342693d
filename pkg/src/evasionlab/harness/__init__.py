from .categories import CATEGORY_NAMES, CategoryLabel, check_category
from .corpus import (LABEL_BENIGN, LABEL_MALICIOUS, MANIFEST_NAME, CorpusManifest,
                     ManifestEntry, SyntheticCorpusSpec, byte_histogram,
                     class_histogram_divergence, generate_synthetic_corpus,
                     load_binary_samples)
from .experiment import StrategyRun, child_seed, run_experiment
from .report import (EvasionReport, read_outcomes_jsonl, recount_from_outcomes,
                     render_table, summarize_cell, write_outcomes_jsonl)
from .stats import SignificanceResult, evasion_rate, paired_t_test

__all__ = [
    "CATEGORY_NAMES", "CategoryLabel", "check_category",
    "LABEL_BENIGN", "LABEL_MALICIOUS", "MANIFEST_NAME", "CorpusManifest",
    "ManifestEntry", "SyntheticCorpusSpec", "byte_histogram",
    "class_histogram_divergence", "generate_synthetic_corpus", "load_binary_samples",
    "StrategyRun", "child_seed", "run_experiment",
    "EvasionReport", "read_outcomes_jsonl", "recount_from_outcomes", "render_table",
    "summarize_cell", "write_outcomes_jsonl",
    "SignificanceResult", "evasion_rate", "paired_t_test",
]

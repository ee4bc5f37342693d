"""Experiment orchestration: strategies x categories, aggregation, significance.

One top-level attack seed is expanded into a per-run child seed (recorded
in the report); within a run, per-sample randomness is additionally bound
to sample content. Attacks run over every malicious sample the detector
initially classifies as malicious; samples it already misses are excluded
from the population and reported separately.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..attacks import (ALL_STRATEGIES, BENIGN_APPEND, ENHANCED_BENIGN_APPEND,
                       LM_GUIDED, RANDOM_APPEND, RNN_STYLE_LM, AttackOutcome,
                       BenignPool, benign_append_attack,
                       enhanced_benign_append_attack, incompatible_outcome,
                       lm_guided_attack, random_append_attack, rnn_style_lm_attack)
from ..binfile import BinarySample
from ..bytelm import ByteLanguageModel, SamplerConfig
from ..detector import DetectionOracle, GatedConvDetector
from ..errors import EmptyManifestError, MissingCheckpointError
from ..threat import SCORE_FEEDBACK, QueryBudget, ThreatModel
from .categories import CATEGORY_NAMES
from .corpus import LABEL_BENIGN, LABEL_MALICIOUS, CorpusManifest, load_binary_samples
from .report import (REPORT_FORMAT_VERSION, TOTAL_KEY, EvasionReport,
                     summarize_cell, write_outcomes_jsonl)
from .stats import paired_t_test


@dataclass(frozen=True)
class StrategyRun:
    """One report column: a strategy executed under a threat model."""

    label: str
    strategy: str
    threat_model: ThreatModel

    def __post_init__(self) -> None:
        if self.strategy not in ALL_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


def child_seed(attack_seed: int, label: str) -> int:
    """Stable per-run seed expanded from the top-level attack seed."""
    tag = zlib.crc32(label.encode("utf-8"))
    return int(np.random.SeedSequence((int(attack_seed), tag)).generate_state(1)[0])


def _normalize_runs(strategies: Sequence, base: ThreatModel) -> list[StrategyRun]:
    runs: list[StrategyRun] = []
    for item in strategies:
        if isinstance(item, StrategyRun):
            runs.append(item)
        else:
            runs.append(StrategyRun(label=str(item), strategy=str(item), threat_model=base))
    labels = [r.label for r in runs]
    if len(labels) != len(set(labels)):
        raise ValueError("strategy run labels must be unique")
    return runs


def _chunked(seq: list, size: int | None):
    if not size or size <= 0 or size >= len(seq):
        yield seq
        return
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def run_experiment(
    manifest: CorpusManifest,
    root,
    detector: GatedConvDetector,
    threat_model: ThreatModel,
    strategies: Sequence,
    lm: ByteLanguageModel | None = None,
    rnn_lm: ByteLanguageModel | None = None,
    sampler: SamplerConfig | None = None,
    rnn_sampler: SamplerConfig | None = None,
    attack_seed: int = 0,
    enhanced_chunk_bytes: int = 1024,
    enhanced_candidates: int = 8,
    generation_chunk: int | None = None,
    fingerprints: dict | None = None,
    out_dir=None,
) -> EvasionReport:
    """Run every strategy over the manifest's malicious samples and build
    the per-category / total evasion report.

    Returns the report; when ``out_dir`` is given also writes
    ``outcomes.jsonl``, ``report.json`` and ``report.csv`` there.
    """
    runs = _normalize_runs(strategies, threat_model)
    if not manifest.malicious():
        raise EmptyManifestError("manifest holds no malicious entries")

    malicious = sorted(load_binary_samples(manifest, root, LABEL_MALICIOUS),
                       key=lambda s: (s.category, s.sample_id))
    benign = sorted(load_binary_samples(manifest, root, LABEL_BENIGN),
                    key=lambda s: s.sample_id) if manifest.benign() else []

    # attacked population: only samples the detector flags in the first place
    scores = detector.decision_scores([s.data for s in malicious])
    included = [s for s, sc in zip(malicious, scores) if sc >= detector.threshold_]
    excluded: dict[str, int] = {}
    for s, sc in zip(malicious, scores):
        if sc < detector.threshold_:
            excluded[s.category] = excluded.get(s.category, 0) + 1

    sampler = sampler or SamplerConfig()
    rnn_sampler = rnn_sampler or sampler
    seeds_record: dict[str, int] = {}
    all_rows: list[tuple[str, str, AttackOutcome]] = []
    run_summaries: dict[str, dict] = {}

    for run in runs:
        seed = child_seed(attack_seed, run.label)
        seeds_record[run.label] = seed
        outcomes = _execute_run(run, included, benign, detector, seed,
                                lm, rnn_lm, sampler, rnn_sampler,
                                enhanced_chunk_bytes, enhanced_candidates,
                                generation_chunk)
        by_cat: dict[str, list[AttackOutcome]] = {}
        for sample, outcome in zip(included, outcomes):
            by_cat.setdefault(sample.category, []).append(outcome)
            all_rows.append((run.label, sample.category, outcome))
        cells = {cat: summarize_cell(outs, len(outs)) for cat, outs in sorted(by_cat.items())}
        run_summaries[run.label] = {
            "strategy": run.strategy,
            "threat_model": run.threat_model.to_dict(),
            "sampler": (sampler.to_dict() if run.strategy == LM_GUIDED
                        else rnn_sampler.to_dict() if run.strategy == RNN_STYLE_LM
                        else None),
            "cells": cells,
            TOTAL_KEY: summarize_cell(outcomes, len(outcomes)),
        }
        if run_summaries[run.label]["sampler"] is not None:
            run_summaries[run.label]["sampler"]["seed"] = seed

    report_data = {
        "format_version": REPORT_FORMAT_VERSION,
        "threat_model": threat_model.to_dict(),
        "append_cap_convention": "10 KB read as 10*1024 bytes, inclusive",
        "detector": {
            "max_input_bytes": detector.config_.max_input_bytes,
            "threshold": detector.threshold_,
        },
        "population": {
            "attacked": len(included),
            "excluded_initially_benign": dict(sorted(excluded.items())),
            "excluded_total": int(sum(excluded.values())),
        },
        "seeds": {"attack_seed": int(attack_seed), "per_run": seeds_record},
        "enhanced": {"chunk_bytes": enhanced_chunk_bytes,
                     "candidates_per_round": enhanced_candidates},
        "runs": run_summaries,
        "significance": _significance(run_summaries),
        "fingerprints": dict(fingerprints or {},
                             manifest_sha256=_manifest_digest(manifest)),
    }
    report = EvasionReport(data=report_data)
    if out_dir is not None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_outcomes_jsonl(out / "outcomes.jsonl", all_rows)
        report.write_json(out / "report.json")
        report.write_csv(out / "report.csv")
    return report


def _execute_run(run: StrategyRun, samples: list[BinarySample],
                 benign: list[BinarySample], detector: GatedConvDetector,
                 seed: int, lm, rnn_lm, sampler: SamplerConfig,
                 rnn_sampler: SamplerConfig, chunk_bytes: int, candidates: int,
                 generation_chunk: int | None) -> list[AttackOutcome]:
    oracle = DetectionOracle(detector, run.threat_model)
    fresh = lambda: QueryBudget.fresh(run.threat_model.max_queries)  # noqa: E731

    if run.strategy == RANDOM_APPEND:
        return [random_append_attack(s, run.threat_model, fresh(), oracle, seed)
                for s in samples]

    if run.strategy == BENIGN_APPEND:
        pool = BenignPool(samples=tuple(benign), seed=seed)
        pool.require_nonempty()
        return [benign_append_attack(s, pool, run.threat_model, fresh(), oracle)
                for s in samples]

    if run.strategy == ENHANCED_BENIGN_APPEND:
        if run.threat_model.feedback != SCORE_FEEDBACK or run.threat_model.max_queries < 2:
            return [incompatible_outcome(s.sample_id, ENHANCED_BENIGN_APPEND)
                    for s in samples]
        pool = BenignPool(samples=tuple(benign), seed=seed)
        pool.require_nonempty()
        return [enhanced_benign_append_attack(s, pool, run.threat_model, fresh(), oracle,
                                              chunk_bytes=chunk_bytes,
                                              candidates_per_round=candidates)
                for s in samples]

    if run.strategy in (LM_GUIDED, RNN_STYLE_LM):
        model = lm if run.strategy == LM_GUIDED else rnn_lm
        if model is None:
            raise MissingCheckpointError(f"strategy {run.strategy} needs a trained LM")
        base_sampler = sampler if run.strategy == LM_GUIDED else rnn_sampler
        run_sampler = replace(base_sampler, seed=seed)
        attack = lm_guided_attack if run.strategy == LM_GUIDED else rnn_style_lm_attack
        planned = 2 * (run_sampler.max_payload_bytes // 2)
        payloads: list[bytes | None] = [None] * len(samples)
        if planned <= run.threat_model.max_append_bytes and samples:
            payloads = []
            for part in _chunked(samples, generation_chunk):
                payloads.extend(model.generate_batch([s.data for s in part], run_sampler))
        return [attack(s, model, run_sampler, run.threat_model, fresh(), oracle,
                       payload=payloads[i])
                for i, s in enumerate(samples)]

    raise ValueError(f"unknown strategy {run.strategy!r}")


def _significance(run_summaries: dict[str, dict]) -> dict:
    """Paired t-tests of the LM-guided run against every other run, over
    categories where both populations are non-empty."""
    lm_labels = [lab for lab, summary in run_summaries.items()
                 if summary["strategy"] == LM_GUIDED]
    if not lm_labels:
        return {}
    lm_label = sorted(lm_labels)[0]
    lm_cells = run_summaries[lm_label]["cells"]
    out: dict[str, dict] = {}
    for label, summary in sorted(run_summaries.items()):
        if label == lm_label:
            continue
        cats = [c for c in CATEGORY_NAMES
                if lm_cells.get(c, {}).get("n", 0) >= 1
                and summary["cells"].get(c, {}).get("n", 0) >= 1]
        key = f"{lm_label}_vs_{label}"
        if len(cats) < 2:
            out[key] = {"pairs": len(cats), "degenerate": True}
            continue
        a = [lm_cells[c]["rate"] for c in cats]
        b = [summary["cells"][c]["rate"] for c in cats]
        try:
            result = paired_t_test(a, b)
        except Exception:
            out[key] = {"pairs": len(cats), "degenerate": True}
            continue
        out[key] = dict(result.to_dict(), degenerate=False)
    return out


def _manifest_digest(manifest: CorpusManifest) -> str:
    canon = json.dumps(manifest.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(canon).hexdigest()

"""Append-based evasion strategies mediated by the budgeted oracle.

Five strategies share one execution skeleton: build a payload, append it
at end of file under the threat-model cap, statically verify integrity,
and query the oracle. Threat-model violations (oversized payload,
exhausted budget, feedback the model does not grant) surface as an
``aborted`` reason on the outcome rather than a silent degradation.

Payload randomness is derived from (seed, sample content), so outcomes
are reproducible bit-for-bit and never depend on which other samples are
attacked in the same run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .binfile import BinarySample, append_payload, verify_integrity
from .bytelm import ByteLanguageModel, SamplerConfig
from .detector import DetectionOracle
from .errors import (BudgetExhaustedError, EmptyPoolError,
                     IncompatibleThreatModelError, PayloadTooLargeError)
from .threat import SCORE_FEEDBACK, QueryBudget, ThreatModel
from .validation import spawn_rng

RANDOM_APPEND = "random_append"
BENIGN_APPEND = "benign_append"
ENHANCED_BENIGN_APPEND = "enhanced_benign_append"
RNN_STYLE_LM = "rnn_style_lm"
LM_GUIDED = "lm_guided"

ALL_STRATEGIES = (RANDOM_APPEND, BENIGN_APPEND, ENHANCED_BENIGN_APPEND,
                  RNN_STYLE_LM, LM_GUIDED)

ABORT_PAYLOAD_TOO_LARGE = "payload_too_large"
ABORT_BUDGET_EXHAUSTED = "budget_exhausted"
ABORT_INCOMPATIBLE = "incompatible_threat_model"


@dataclass(frozen=True)
class AttackOutcome:
    """One attacked sample: evasion / functionality flags plus accounting."""

    sample_id: str
    strategy: str
    evaded: bool
    functional: bool
    queries_used: int
    payload_bytes: int
    aborted: str | None = None

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "strategy": self.strategy,
            "evaded": self.evaded,
            "functional": self.functional,
            "queries_used": self.queries_used,
            "payload_bytes": self.payload_bytes,
            "aborted": self.aborted,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "AttackOutcome":
        return cls(**{k: row[k] for k in (
            "sample_id", "strategy", "evaded", "functional",
            "queries_used", "payload_bytes", "aborted")})


@dataclass(frozen=True)
class BenignPool:
    """Benign samples that donate byte sections to append strategies."""

    samples: tuple[BinarySample, ...]
    seed: int = 0

    def require_nonempty(self) -> None:
        if not self.samples:
            raise EmptyPoolError("benign pool is empty")


def append_and_query(sample: BinarySample, payload: bytes, strategy: str,
                     model: ThreatModel, budget: QueryBudget,
                     oracle: DetectionOracle) -> AttackOutcome:
    """Shared tail of every strategy: append, verify, single oracle query."""
    start = budget.consumed
    try:
        perturbed = append_payload(sample, payload, model)
    except PayloadTooLargeError:
        return AttackOutcome(sample.sample_id, strategy, evaded=False, functional=False,
                             queries_used=0, payload_bytes=len(payload),
                             aborted=ABORT_PAYLOAD_TOO_LARGE)
    functional = verify_integrity(perturbed)
    try:
        verdict, budget = oracle.query(perturbed.combined, budget)
    except BudgetExhaustedError:
        return AttackOutcome(sample.sample_id, strategy, evaded=False, functional=functional,
                             queries_used=budget.consumed - start,
                             payload_bytes=len(payload), aborted=ABORT_BUDGET_EXHAUSTED)
    return AttackOutcome(sample.sample_id, strategy, evaded=not verdict.is_malicious,
                         functional=functional, queries_used=budget.consumed - start,
                         payload_bytes=len(payload), aborted=None)


def random_append_attack(sample: BinarySample, model: ThreatModel, budget: QueryBudget,
                         oracle: DetectionOracle, seed: int = 0) -> AttackOutcome:
    """Uniform random bytes filling the whole append budget, one query."""
    rng = spawn_rng(seed, sample.data)
    payload = rng.integers(0, 256, model.max_append_bytes, dtype="uint8").tobytes()
    return append_and_query(sample, payload, RANDOM_APPEND, model, budget, oracle)


def _draw_benign_slice(pool: BenignPool, rng, length: int) -> bytes:
    donor = pool.samples[int(rng.integers(0, len(pool.samples)))].data
    take = min(length, len(donor))
    start = int(rng.integers(0, len(donor) - take + 1))
    return donor[start:start + take]


def benign_append_attack(sample: BinarySample, pool: BenignPool, model: ThreatModel,
                         budget: QueryBudget, oracle: DetectionOracle) -> AttackOutcome:
    """A verbatim contiguous slice of one benign file, one query."""
    pool.require_nonempty()
    rng = spawn_rng(pool.seed, sample.data)
    payload = _draw_benign_slice(pool, rng, model.max_append_bytes)
    return append_and_query(sample, payload, BENIGN_APPEND, model, budget, oracle)


def enhanced_benign_append_attack(sample: BinarySample, pool: BenignPool,
                                  model: ThreatModel, budget: QueryBudget,
                                  oracle: DetectionOracle, chunk_bytes: int = 1024,
                                  candidates_per_round: int = 8) -> AttackOutcome:
    """Greedy score-guided growth: per round, append the candidate benign
    chunk that lowers the detector score the most.

    Requires score feedback and at least two queries; under the strict
    single-shot profile this strategy is structurally incompatible.
    """
    if model.feedback != SCORE_FEEDBACK or model.max_queries < 2:
        raise IncompatibleThreatModelError(
            "enhanced benign append needs score_feedback and max_queries >= 2")
    pool.require_nonempty()
    if chunk_bytes < 1 or candidates_per_round < 1:
        raise ValueError("chunk_bytes and candidates_per_round must be >= 1")

    rng = spawn_rng(pool.seed, sample.data)
    start = budget.consumed
    payload = b""
    while True:
        space = model.max_append_bytes - len(payload)
        if space <= 0 or budget.remaining == 0:
            break
        scored: list[tuple[float, bytes]] = []
        for _ in range(candidates_per_round):
            if budget.remaining == 0:
                break
            candidate = _draw_benign_slice(pool, rng, min(chunk_bytes, space))
            perturbed = append_payload(sample, payload + candidate, model)
            verdict, budget = oracle.query(perturbed.combined, budget)
            if verdict.score is None and verdict.is_malicious:
                raise IncompatibleThreatModelError("oracle returned no score; its "
                                                   "threat model disagrees with the attack's")
            if not verdict.is_malicious:
                return AttackOutcome(sample.sample_id, ENHANCED_BENIGN_APPEND,
                                     evaded=True, functional=verify_integrity(perturbed),
                                     queries_used=budget.consumed - start,
                                     payload_bytes=len(payload) + len(candidate),
                                     aborted=None)
            scored.append((float(verdict.score), candidate))
        if not scored:
            break
        payload += min(scored, key=lambda pair: pair[0])[1]

    perturbed = append_payload(sample, payload, model)
    return AttackOutcome(sample.sample_id, ENHANCED_BENIGN_APPEND, evaded=False,
                         functional=verify_integrity(perturbed),
                         queries_used=budget.consumed - start,
                         payload_bytes=len(payload), aborted=None)


def _lm_attack(sample: BinarySample, lm: ByteLanguageModel, sampler: SamplerConfig,
               model: ThreatModel, budget: QueryBudget, oracle: DetectionOracle,
               strategy: str, payload: bytes | None) -> AttackOutcome:
    planned = 2 * (sampler.max_payload_bytes // 2)
    if planned > model.max_append_bytes:
        return AttackOutcome(sample.sample_id, strategy, evaded=False, functional=False,
                             queries_used=0, payload_bytes=planned,
                             aborted=ABORT_PAYLOAD_TOO_LARGE)
    if payload is None:
        payload = lm.generate(sample.data, sampler)
    return append_and_query(sample, payload, strategy, model, budget, oracle)


def lm_guided_attack(sample: BinarySample, lm: ByteLanguageModel, sampler: SamplerConfig,
                     model: ThreatModel, budget: QueryBudget, oracle: DetectionOracle,
                     payload: bytes | None = None) -> AttackOutcome:
    """File-conditioned payload from the trained LM, then exactly one query.

    ``payload`` short-circuits generation when the caller has already
    produced it in a batch; the bytes are identical either way.
    """
    return _lm_attack(sample, lm, sampler, model, budget, oracle, LM_GUIDED, payload)


def rnn_style_lm_attack(sample: BinarySample, small_lm: ByteLanguageModel,
                        sampler: SamplerConfig, model: ThreatModel, budget: QueryBudget,
                        oracle: DetectionOracle, payload: bytes | None = None) -> AttackOutcome:
    """Same contract as :func:`lm_guided_attack`, driven by a deliberately
    weaker single-block generator standing in for recurrent baselines."""
    return _lm_attack(sample, small_lm, sampler, model, budget, oracle, RNN_STYLE_LM, payload)


def incompatible_outcome(sample_id: str, strategy: str) -> AttackOutcome:
    """Row recorded when a strategy cannot run under the threat model."""
    return AttackOutcome(sample_id, strategy, evaded=False, functional=True,
                         queries_used=0, payload_bytes=0, aborted=ABORT_INCOMPATIBLE)

"""Threat-model contracts: query budgets, feedback modes, append caps.

The strict profile is single shot: one oracle query per sample, boolean
verdict only, appended bytes capped at 10 KB. The cap is interpreted as
10 * 1024 = 10240 bytes, inclusive (binary-KB convention; the most
permissive reading at KB granularity). Reports echo this convention so
results stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BudgetExhaustedError

BOOLEAN_ONLY = "boolean_only"
SCORE_FEEDBACK = "score_feedback"
FEEDBACK_MODES = (BOOLEAN_ONLY, SCORE_FEEDBACK)

#: Inclusive append cap for the strict profile: 10 binary KB.
MAX_APPEND_BYTES = 10 * 1024


@dataclass(frozen=True)
class ThreatModel:
    """Enforceable attack constraints.

    max_queries: detector interactions allowed per attacked sample.
    max_append_bytes: inclusive cap on appended payload size.
    feedback: ``boolean_only`` (verdict carries no score) or
        ``score_feedback`` (raw score exposed; only the enhanced benign
        append benchmark is allowed to use it).
    """

    max_queries: int = 1
    max_append_bytes: int = MAX_APPEND_BYTES
    feedback: str = BOOLEAN_ONLY

    def __post_init__(self) -> None:
        if self.max_queries < 1:
            raise ValueError("max_queries must be >= 1")
        if self.max_append_bytes < 0:
            raise ValueError("max_append_bytes must be >= 0")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"feedback must be one of {FEEDBACK_MODES}")

    def to_dict(self) -> dict:
        return {
            "max_queries": self.max_queries,
            "max_append_bytes": self.max_append_bytes,
            "feedback": self.feedback,
        }


def single_shot_profile() -> ThreatModel:
    """The strict profile: one boolean query, 10240-byte append cap."""
    return ThreatModel(max_queries=1, max_append_bytes=MAX_APPEND_BYTES, feedback=BOOLEAN_ONLY)


@dataclass(frozen=True)
class QueryBudget:
    """Immutable query counter; ``spend`` returns the decremented budget.

    Invariant: ``remaining + consumed`` equals the initial allowance for
    every budget derived from the same :meth:`fresh` call.
    """

    remaining: int
    consumed: int = 0

    def __post_init__(self) -> None:
        if self.remaining < 0 or self.consumed < 0:
            raise ValueError("budget counters must be non-negative")

    @classmethod
    def fresh(cls, max_queries: int) -> "QueryBudget":
        return cls(remaining=max_queries, consumed=0)

    def spend(self) -> "QueryBudget":
        if self.remaining < 1:
            raise BudgetExhaustedError(
                f"query budget exhausted after {self.consumed} queries"
            )
        return QueryBudget(remaining=self.remaining - 1, consumed=self.consumed + 1)


@dataclass(frozen=True)
class Verdict:
    """Oracle answer. ``score`` is present only under score_feedback."""

    is_malicious: bool
    score: float | None = None

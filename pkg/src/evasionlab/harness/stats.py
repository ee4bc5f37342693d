"""Evasion-rate arithmetic and paired significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as scipy_stats

from ..attacks import AttackOutcome
from ..errors import DegenerateInputError, ZeroDenominatorError


def evasion_rate(outcomes: Sequence[AttackOutcome], n: int) -> float:
    """|evasive AND functional| / n over the attacked population.

    ``n`` is the population size the attack was granted (outcomes may be
    fewer, never more).
    """
    if n < 1:
        raise ZeroDenominatorError("evasion rate needs n >= 1")
    if len(outcomes) > n:
        raise ValueError(f"{len(outcomes)} outcomes exceed population n={n}")
    hits = sum(1 for o in outcomes if o.evaded and o.functional)
    return hits / n


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    pairs: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "pairs": self.pairs}


def paired_t_test(rates_a: Sequence[float], rates_b: Sequence[float]) -> SignificanceResult:
    """Two-sided paired t-test on per-category rate differences.

    Zero-variance differences (including identical inputs) are degenerate:
    the statistic is undefined, so the caller gets an explicit error
    instead of an arbitrary p-value.
    """
    a = np.asarray(rates_a, dtype=np.float64)
    b = np.asarray(rates_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("rate vectors must be 1-D and the same length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diffs = a - b
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        raise DegenerateInputError("paired differences have zero variance")
    t = float(diffs.mean() / (sd / math.sqrt(n)))
    p = float(2.0 * scipy_stats.t.sf(abs(t), df=n - 1))
    return SignificanceResult(statistic=t, p_value=p, pairs=n)

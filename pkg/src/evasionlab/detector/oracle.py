"""Budgeted black-box oracle: the only detector surface attacks may use.

Every query spends exactly one unit of budget. Under ``boolean_only``
feedback the verdict structurally carries no score field value, so no
attack path can leak confidence information the threat model forbids.
"""

from __future__ import annotations

from ..threat import SCORE_FEEDBACK, QueryBudget, ThreatModel, Verdict
from .estimator import GatedConvDetector


class DetectionOracle:
    def __init__(self, detector: GatedConvDetector, threat_model: ThreatModel):
        detector._check_fitted()
        self.detector = detector
        self.threat_model = threat_model

    def query(self, data, budget: QueryBudget) -> tuple[Verdict, QueryBudget]:
        """Classify ``data``, spending one query; raises BudgetExhaustedError
        when nothing remains."""
        spent = budget.spend()
        score = self.detector.score_bytes(data)
        is_malicious = bool(score >= self.detector.threshold_)
        if self.threat_model.feedback == SCORE_FEEDBACK:
            return Verdict(is_malicious=is_malicious, score=float(score)), spent
        return Verdict(is_malicious=is_malicious), spent

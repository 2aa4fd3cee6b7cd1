"""Propensity-score cohort matching on age and gender with balance auditing.

Scores are logistic-regression probabilities of belonging to the AD group;
matching is greedy 1:1 nearest-neighbor on the score without replacement,
with a caliper of 0.2 standard deviations of the logit scores. Balance is
audited with standardized mean differences for the covariates, their
squares, and the two-way interaction, against the 0.1 / 0.15 thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .models import fit_logistic

SMD_COVARIATE_THRESHOLD = 0.1
SMD_INTERACTION_THRESHOLD = 0.15


@dataclass
class CohortMember:
    id: str
    age: float
    gender: int            # 0/1
    treated: bool          # AD group

    def __post_init__(self):
        if self.age <= 0:
            raise DataError(f"{self.id}: age must be positive, got {self.age}")


@dataclass
class MatchedPair:
    treated_id: str
    control_id: str
    score_distance: float


@dataclass
class BalanceEntry:
    term: str
    smd: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.smd < self.threshold


@dataclass
class BalanceReport:
    entries: list[BalanceEntry]

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def as_rows(self) -> list[tuple[str, float, float, str]]:
        return [(e.term, e.smd, e.threshold, "pass" if e.passed else "FAIL")
                for e in self.entries]


def propensity_scores(members: list[CohortMember]) -> np.ndarray:
    """P(treated | age, gender) from a logistic fit over the cohort."""
    if not any(m.treated for m in members) or not any(not m.treated for m in members):
        raise DataError("cohort needs both treated and control members")
    X = np.array([[m.age, m.gender] for m in members], dtype=np.float64)
    t = np.array([1.0 if m.treated else 0.0 for m in members])
    model = fit_logistic(X, t)
    if model.separable:
        raise NumericalError("propensity model met perfect separation; "
                             "scores of 0/1 cannot be matched")
    return model.predict_proba(X)


def match_pairs(members: list[CohortMember], scores: np.ndarray,
                caliper: float | None = None, seed: int = 0) -> list[MatchedPair]:
    """Greedy 1:1 nearest-neighbor matching on the propensity score.

    Treated members are visited in seeded random order; each takes its
    nearest unused control. Pairs farther apart than the caliper (default
    0.2 * std of the logit scores) are discarded.
    """
    scores = np.asarray(scores, dtype=np.float64)
    treated_idx = [i for i, m in enumerate(members) if m.treated]
    control_idx = [i for i, m in enumerate(members) if not m.treated]
    if not control_idx:
        raise DataError("control pool is empty")
    if not treated_idx:
        raise DataError("no treated members to match")
    if caliper is None:
        clipped = np.clip(scores, 1e-12, 1.0 - 1e-12)
        logits = np.log(clipped / (1.0 - clipped))
        caliper = 0.2 * float(logits.std())

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(treated_idx))
    available = np.ones(len(control_idx), dtype=bool)
    control_scores = scores[control_idx]
    pairs: list[MatchedPair] = []
    for k in order:
        ti = treated_idx[k]
        dist = np.abs(control_scores - scores[ti])
        dist[~available] = np.inf
        j = int(np.argmin(dist))
        if not np.isfinite(dist[j]) or dist[j] > caliper:
            continue
        available[j] = False
        pairs.append(MatchedPair(treated_id=members[ti].id,
                                 control_id=members[control_idx[j]].id,
                                 score_distance=float(dist[j])))
    if not pairs:
        raise DataError("no pairs satisfied the caliper")
    return pairs


def _smd(treated: np.ndarray, control: np.ndarray) -> float:
    """|mean_t - mean_c| / sqrt((var_t + var_c)/2); 0 when both groups are
    constant and equal, +inf when constant but different."""
    diff = abs(treated.mean() - control.mean())
    pooled = (treated.var(ddof=1) + control.var(ddof=1)) / 2.0
    if pooled <= 0:
        return 0.0 if diff == 0 else np.inf
    return float(diff / np.sqrt(pooled))


def balance_report(members: list[CohortMember],
                   pairs: list[MatchedPair] | None = None) -> BalanceReport:
    """SMDs for age, gender, their squares, and the interaction.

    With ``pairs`` given, only matched members are audited; otherwise the
    whole cohort is.
    """
    if pairs is not None:
        keep = {p.treated_id for p in pairs} | {p.control_id for p in pairs}
        members = [m for m in members if m.id in keep]
    treated = [m for m in members if m.treated]
    control = [m for m in members if not m.treated]
    if not treated or not control:
        raise DataError("balance report needs non-empty matched groups")

    def cols(group: list[CohortMember]) -> dict[str, np.ndarray]:
        age = np.array([m.age for m in group], dtype=np.float64)
        gender = np.array([m.gender for m in group], dtype=np.float64)
        return {"age": age, "gender": gender, "age^2": age * age,
                "gender^2": gender * gender, "age*gender": age * gender}

    ct, cc = cols(treated), cols(control)
    entries = []
    for term in ("age", "gender"):
        entries.append(BalanceEntry(term, _smd(ct[term], cc[term]),
                                    SMD_COVARIATE_THRESHOLD))
    for term in ("age^2", "gender^2", "age*gender"):
        entries.append(BalanceEntry(term, _smd(ct[term], cc[term]),
                                    SMD_INTERACTION_THRESHOLD))
    return BalanceReport(entries=entries)

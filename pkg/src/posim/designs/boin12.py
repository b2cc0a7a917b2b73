"""Utility-based dose optimisation over toxicity and efficacy.

Escalation moves are constrained by interval-design toxicity
boundaries; among moves that remain admissible (not too toxic, not
futile), the design picks the dose with the highest rank-based
desirability, a Beta posterior tail probability of the standardised
joint-utility pseudo-responses.  The trial targets an optimal
biological dose rather than the maximum tolerated dose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from posim.designs.base import (
    Action,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
    beta_tail_above,
    isotonic_posterior_means,
)
from posim.errors import DesignRuntimeError


@dataclass(frozen=True)
class UtilityWeights:
    """Joint-outcome utilities on a 0..100 scale.

    One weight per (efficacy, toxicity) combination; the default scores
    a response without toxicity at 100 and no response with toxicity
    at 0.
    """

    eff_no_tox: float = 100.0
    eff_tox: float = 60.0
    no_eff_no_tox: float = 40.0
    no_eff_tox: float = 0.0

    def __post_init__(self) -> None:
        weights = (self.eff_no_tox, self.eff_tox, self.no_eff_no_tox, self.no_eff_tox)
        if any(w < 0.0 for w in weights):
            raise ValueError("utility weights must be non-negative")
        if max(weights) <= 0.0:
            raise ValueError("at least one utility weight must be positive")

    @property
    def scale(self) -> float:
        """Value of the best outcome, used to standardise utilities to [0, 1]."""
        return max(self.eff_no_tox, self.eff_tox, self.no_eff_no_tox, self.no_eff_tox)


@dataclass(frozen=True)
class Boin12Config:
    """Configuration for the utility-based optimisation design.

    Args:
        tox_limit: Highest acceptable toxicity rate.
        eff_limit: Lowest acceptable efficacy rate.
        safety_threshold: Posterior confidence at which a dose is ruled
            out as overly toxic.
        futility_threshold: Posterior confidence at which a dose is
            ruled out as inefficacious.
        utility_weights: Joint-outcome utilities.
        utility_benchmark: Utility value (on the weight scale) that a
            dose should beat; the desirability of a dose is the
            posterior probability that its mean utility exceeds this.
        max_n: Maximum number of patients.
        cohort_size: Patients treated between successive decisions.
        stop_at_n_on_dose: Stop early and select once the dose chosen
            for the next cohort already has this many patients.
        start_dose: 1-based starting dose.
    """

    tox_limit: float = 0.35
    eff_limit: float = 0.25
    safety_threshold: float = 0.95
    futility_threshold: float = 0.90
    utility_weights: UtilityWeights = field(default_factory=UtilityWeights)
    utility_benchmark: float = 60.0
    max_n: int = 36
    cohort_size: int = 3
    stop_at_n_on_dose: int = 12
    start_dose: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.tox_limit < 1.0:
            raise ValueError("tox_limit must lie strictly inside (0, 1)")
        if not 0.0 < self.eff_limit < 1.0:
            raise ValueError("eff_limit must lie strictly inside (0, 1)")
        if not 0.0 < self.safety_threshold <= 1.0:
            raise ValueError("safety_threshold must lie inside (0, 1]")
        if not 0.0 < self.futility_threshold <= 1.0:
            raise ValueError("futility_threshold must lie inside (0, 1]")
        if not 0.0 < self.utility_benchmark < self.utility_weights.scale:
            raise ValueError(
                "utility_benchmark must lie between 0 and the best outcome's weight"
            )
        if self.max_n < 1 or self.cohort_size < 1:
            raise ValueError("max_n and cohort_size must be positive")
        if self.stop_at_n_on_dose < 1:
            raise ValueError("stop_at_n_on_dose must be positive")
        if self.start_dose < 1:
            raise ValueError("start_dose must be at least 1")


@lru_cache(maxsize=None)
def escalation_boundaries(tox_limit: float) -> tuple[float, float]:
    """Empirical-rate boundaries (escalate below, de-escalate at or above).

    Derived from the standard interval-design error-minimising
    thresholds with the over- and under-dosing rates placed at 0.6 and
    1.4 times the limit.
    """
    phi, phi1, phi2 = tox_limit, 0.6 * tox_limit, 1.4 * tox_limit
    lam_e = math.log((1.0 - phi1) / (1.0 - phi)) / math.log(
        phi * (1.0 - phi1) / (phi1 * (1.0 - phi))
    )
    lam_d = math.log((1.0 - phi) / (1.0 - phi2)) / math.log(
        phi2 * (1.0 - phi) / (phi * (1.0 - phi2))
    )
    return lam_e, lam_d


def boin12_admissible(
    data: ObservedData,
    tox_limit: float,
    eff_limit: float,
    safety_threshold: float,
    futility_threshold: float,
) -> set[int]:
    """Doses that are neither overly toxic nor futile.

    Safety is monotone: once a dose is ruled out as too toxic, every
    higher dose is ruled out with it.  Futility is assessed per dose.
    Untried doses are evaluated on the prior alone.
    """
    admissible: set[int] = set()
    unsafe = False
    for dose in range(1, data.n_doses + 1):
        n, tox, eff = data.tallies(dose)
        if not unsafe and beta_tail_above(tox, n, tox_limit) >= safety_threshold:
            unsafe = True
        if unsafe:
            continue
        p_futile = 1.0 - beta_tail_above(eff, n, eff_limit)
        if p_futile >= futility_threshold:
            continue
        admissible.add(dose)
    return admissible


def pseudo_utility(weights: UtilityWeights, data: ObservedData, dose: int) -> float:
    """Total standardised utility of the patients treated at ``dose``.

    Each patient contributes their joint-outcome weight divided by the
    best outcome's weight, giving a quasi-binomial response count in
    [0, n].
    """
    eff_only, eff_tox, none_only, none_tox = data.joint_outcome_counts(dose)
    total = (
        weights.eff_no_tox * eff_only
        + weights.eff_tox * eff_tox
        + weights.no_eff_no_tox * none_only
        + weights.no_eff_tox * none_tox
    )
    return total / weights.scale


def desirability(config: Boin12Config, data: ObservedData, dose: int) -> float:
    """Rank-based desirability of ``dose``.

    The pseudo-responses are treated as quasi-binomial data with a
    uniform prior, and the desirability is the posterior probability
    that the dose's standardised mean utility exceeds the standardised
    benchmark.  Untried doses are scored on the prior alone.
    """
    n = data.n_at[dose - 1]
    x = pseudo_utility(config.utility_weights, data, dose) if n else 0.0
    benchmark = config.utility_benchmark / config.utility_weights.scale
    return beta_tail_above(x, n, benchmark)


def _best_by_desirability(
    config: Boin12Config, data: ObservedData, doses: list[int]
) -> int:
    best = doses[0]
    best_score = desirability(config, data, best)
    for dose in doses[1:]:
        score = desirability(config, data, dose)
        if score > best_score + 1e-12:
            best, best_score = dose, score
    return best


def _estimated_mtd(config: Boin12Config, data: ObservedData) -> int | None:
    """Tried dose whose monotone-adjusted toxicity is closest to the limit."""
    tried = [d for d in range(1, data.n_doses + 1) if data.n_at[d - 1] > 0]
    if not tried:
        return None
    means = isotonic_posterior_means(
        [data.tox_at[d - 1] for d in tried], [data.n_at[d - 1] for d in tried]
    )
    best, best_gap = tried[0], abs(means[0] - config.tox_limit)
    for i, dose in enumerate(tried[1:], start=1):
        gap = abs(means[i] - config.tox_limit)
        if gap < best_gap - 1e-12:
            best, best_gap = dose, gap
    return best


def _select_boin12(
    config: Boin12Config, data: ObservedData, admissible: set[int]
) -> Action:
    """Select the most desirable admissible dose at or below the MTD."""
    mtd = _estimated_mtd(config, data)
    if mtd is None:
        return StopNoSelection("no dose was tried")
    pool = sorted(d for d in admissible if d <= mtd and data.n_at[d - 1] > 0)
    if not pool:
        return StopNoSelection("no admissible dose at or below the estimated MTD")
    return StopAndSelect(_best_by_desirability(config, data, pool))


def decide_boin12(config: Boin12Config, data: ObservedData) -> Action:
    """One decision of the utility-based optimisation design."""
    if not data.has_efficacy:
        raise DesignRuntimeError(
            "utility-based design needs an efficacy endpoint in the data"
        )
    if data.total_n == 0:
        if config.start_dose > data.n_doses:
            raise DesignRuntimeError("start_dose outside the dataset's dose range")
        return TreatNextCohortAt(config.start_dose)

    admissible = boin12_admissible(
        data,
        config.tox_limit,
        config.eff_limit,
        config.safety_threshold,
        config.futility_threshold,
    )
    if not admissible:
        return StopNoSelection("no admissible dose remains")
    if data.total_n >= config.max_n:
        return _select_boin12(config, data, admissible)

    current = data.current_dose
    n, tox, _ = data.tallies(current)
    lam_e, lam_d = escalation_boundaries(config.tox_limit)
    rate = tox / n
    if rate >= lam_d:
        candidates = [current - 1] if current > 1 else [current]
    elif rate <= lam_e:
        candidates = [current, current + 1] if current < data.n_doses else [current]
    else:
        candidates = [current - 1, current] if current > 1 else [current]
    allowed = [d for d in candidates if d in admissible]
    if not allowed:
        # Every local move is ruled out.  De-escalating further to the
        # nearest admissible dose is allowed; jumping more than one
        # level upward is not, so if nothing admissible remains at or
        # below current + 1 the trial stops.
        below = [d for d in admissible if d <= current]
        if not below:
            return StopNoSelection("no admissible dose within one level")
        allowed = [max(below)]
    nxt = _best_by_desirability(config, data, allowed)
    if data.n_at[nxt - 1] >= config.stop_at_n_on_dose:
        return _select_boin12(config, data, admissible)
    return TreatNextCohortAt(nxt)

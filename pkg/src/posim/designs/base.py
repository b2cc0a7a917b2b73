"""Shared decision-interface types and Bayesian helpers for designs.

Every design consumes the same ``ObservedData`` accumulator and returns
one of three actions, so the trial runner can drive any design without
knowing which rules produced the decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import betainc

from posim.errors import DesignRuntimeError


@dataclass(frozen=True)
class TreatNextCohortAt:
    """Treat the next cohort at ``dose`` (1-based)."""

    dose: int


@dataclass(frozen=True)
class StopAndSelect:
    """Stop the trial and select ``dose`` (1-based)."""

    dose: int


@dataclass(frozen=True)
class StopNoSelection:
    """Stop the trial without selecting any dose."""

    reason: str


Action = TreatNextCohortAt | StopAndSelect | StopNoSelection


@dataclass(frozen=True)
class AssignmentRecord:
    """One treated patient: dose given and binary outcomes observed."""

    patient: int
    dose: int
    tox: int
    eff: int | None


@dataclass
class ObservedData:
    """Accumulated dose assignments and outcomes of one running trial.

    Doses are 1-based.  ``records`` preserves enrolment order; the tally
    vectors are kept in sync so designs that only need per-dose counts
    avoid rescanning the records.
    """

    n_doses: int
    has_efficacy: bool
    records: list[AssignmentRecord] = field(default_factory=list)
    n_at: list[int] = field(init=False)
    tox_at: list[int] = field(init=False)
    eff_at: list[int] = field(init=False)

    def __post_init__(self) -> None:
        if self.n_doses < 1:
            raise ValueError("need at least one dose level")
        self.n_at = [0] * self.n_doses
        self.tox_at = [0] * self.n_doses
        self.eff_at = [0] * self.n_doses
        records, self.records = list(self.records), []
        for rec in records:
            self.add(rec.patient, rec.dose, rec.tox, rec.eff)

    def add(self, patient: int, dose: int, tox: int, eff: int | None) -> None:
        """Record one treated patient."""
        if not 1 <= dose <= self.n_doses:
            raise ValueError(f"dose {dose} outside 1..{self.n_doses}")
        if tox not in (0, 1):
            raise ValueError("tox outcome must be 0 or 1")
        if self.has_efficacy:
            if eff not in (0, 1):
                raise ValueError("efficacy outcome must be 0 or 1")
        elif eff is not None:
            raise ValueError("efficacy outcome recorded without an efficacy endpoint")
        self.records.append(AssignmentRecord(patient, dose, tox, eff))
        self.n_at[dose - 1] += 1
        self.tox_at[dose - 1] += tox
        if self.has_efficacy:
            self.eff_at[dose - 1] += eff

    @property
    def total_n(self) -> int:
        return len(self.records)

    @property
    def current_dose(self) -> int | None:
        """Dose of the most recently treated patient, or None if empty."""
        return self.records[-1].dose if self.records else None

    def tallies(self, dose: int) -> tuple[int, int, int]:
        """(patients, toxicities, responses) observed at ``dose``."""
        i = dose - 1
        return self.n_at[i], self.tox_at[i], self.eff_at[i]

    def joint_outcome_counts(self, dose: int) -> tuple[int, int, int, int]:
        """Joint (efficacy, toxicity) outcome counts at ``dose``.

        Returns counts of (response without toxicity, response with
        toxicity, no response without toxicity, no response with
        toxicity).  Requires the efficacy endpoint.
        """
        if not self.has_efficacy:
            raise DesignRuntimeError("joint outcome counts need an efficacy endpoint")
        eff_only = eff_tox = none_only = none_tox = 0
        for rec in self.records:
            if rec.dose != dose:
                continue
            if rec.eff and rec.tox:
                eff_tox += 1
            elif rec.eff:
                eff_only += 1
            elif rec.tox:
                none_tox += 1
            else:
                none_only += 1
        return eff_only, eff_tox, none_only, none_tox


@lru_cache(maxsize=None)
def beta_tail_above(events: float, n: float, cut: float) -> float:
    """P(p > cut) under the Beta(1 + events, 1 + n - events) posterior.

    The posterior arises from a uniform prior and ``events`` successes
    in ``n`` trials; fractional events are allowed for quasi-binomial
    pseudo-responses.
    """
    return float(1.0 - betainc(1.0 + events, 1.0 + n - events, cut))


@lru_cache(maxsize=None)
def beta_interval_mass(events: int, n: int, lo: float, hi: float) -> float:
    """Posterior mass of (lo, hi) under Beta(1 + events, 1 + n - events)."""
    a, b = 1.0 + events, 1.0 + n - events
    return float(betainc(a, b, hi) - betainc(a, b, lo))


def dose_exclusion(n: int, tox_events: int, limit: float, confidence: float) -> bool:
    """Whether a dose is excluded as overly toxic.

    True when the posterior probability that the dose's toxicity rate
    exceeds ``limit`` reaches ``confidence``, under a uniform prior on
    the rate.
    """
    if n < 0 or not 0 <= tox_events <= n:
        raise ValueError("need 0 <= tox_events <= n")
    if not 0.0 < limit < 1.0:
        raise ValueError("toxicity limit must lie inside (0, 1)")
    if not 0.0 < confidence <= 1.0:
        raise ValueError("confidence must lie inside (0, 1]")
    return beta_tail_above(tox_events, n, limit) >= confidence


def isotonic_posterior_means(
    events: list[int], counts: list[int]
) -> np.ndarray:
    """Monotone-adjusted posterior mean event rates across doses.

    Posterior means (1 + events) / (2 + counts) under per-dose uniform
    priors are pooled by weighted isotonic regression, with per-dose
    sample sizes as weights, so the fitted rates are non-decreasing in
    dose.  All counts must be positive (only tried doses have data to
    pool).
    """
    counts_arr = np.asarray(counts, dtype=np.float64)
    events_arr = np.asarray(events, dtype=np.float64)
    if counts_arr.size == 0 or np.any(counts_arr <= 0):
        raise ValueError("isotonic pooling needs positive counts at every dose")
    means = (1.0 + events_arr) / (2.0 + counts_arr)
    return np.asarray(isotonic_regression(means, weights=counts_arr).x)

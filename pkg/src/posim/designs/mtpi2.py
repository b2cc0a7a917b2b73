"""Interval-based escalation with unit-probability-mass comparisons.

The unit interval is tiled with subintervals of the width of the
equivalence interval around the target toxicity rate (the flanking
tiles are clipped at 0 and 1).  Each decision finds the tile with the
highest posterior probability mass per unit width under a Beta
posterior for the current dose's toxicity rate and moves in the
direction that tile indicates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

from posim.designs.base import (
    Action,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
    beta_interval_mass,
    dose_exclusion,
    isotonic_posterior_means,
)
from posim.errors import DesignRuntimeError


class IntervalDecision(enum.Enum):
    ESCALATE = "escalate"
    STAY = "stay"
    DEESCALATE = "deescalate"


@dataclass(frozen=True)
class Mtpi2Config:
    """Configuration for the interval-based toxicity design.

    Args:
        target: Target toxicity rate.
        margin_below: Width of the equivalence interval below the target.
        margin_above: Width of the equivalence interval above the target.
        exclusion_threshold: Posterior confidence at which a dose (and
            everything above it) is excluded as overly toxic.
        max_n: Maximum number of patients.
        cohort_size: Patients treated between successive decisions.
        start_dose: 1-based starting dose.
    """

    target: float
    margin_below: float = 0.05
    margin_above: float = 0.05
    exclusion_threshold: float = 0.95
    max_n: int = 30
    cohort_size: int = 3
    start_dose: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.target < 1.0:
            raise ValueError("target must lie strictly inside (0, 1)")
        if self.margin_below <= 0.0 or self.margin_above <= 0.0:
            raise ValueError("equivalence margins must be positive")
        if self.target - self.margin_below <= 0.0:
            raise ValueError("equivalence interval extends to or below 0")
        if self.target + self.margin_above >= 1.0:
            raise ValueError("equivalence interval extends to or above 1")
        if not 0.0 < self.exclusion_threshold <= 1.0:
            raise ValueError("exclusion_threshold must lie inside (0, 1]")
        if self.max_n < 1 or self.cohort_size < 1:
            raise ValueError("max_n and cohort_size must be positive")
        if self.start_dose < 1:
            raise ValueError("start_dose must be at least 1")


@lru_cache(maxsize=None)
def interval_tiling(
    target: float, margin_below: float, margin_above: float
) -> tuple[tuple[float, float, int], ...]:
    """Tiles of the unit interval anchored on the equivalence interval.

    Returns (lo, hi, position) triples ordered from 0 to 1, where
    position is negative below the equivalence interval, zero on it,
    and positive above; the outermost tiles are clipped at 0 and 1.
    """
    width = margin_below + margin_above
    tiles: list[tuple[float, float, int]] = [
        (target - margin_below, target + margin_above, 0)
    ]
    position = 0
    hi = target - margin_below
    while hi > 1e-12:
        position -= 1
        lo_edge = hi - width
        tiles.insert(0, (0.0 if lo_edge < 1e-12 else lo_edge, hi, position))
        hi -= width
    position = 0
    lo = target + margin_above
    while lo < 1.0 - 1e-12:
        position += 1
        hi_edge = lo + width
        tiles.append((lo, 1.0 if hi_edge > 1.0 - 1e-12 else hi_edge, position))
        lo += width
    return tuple(tiles)


@lru_cache(maxsize=None)
def mtpi2_decision(
    target: float,
    margin_below: float,
    margin_above: float,
    n: int,
    tox: int,
) -> IntervalDecision:
    """Direction indicated by the maximum unit-probability-mass tile.

    The posterior for the current dose's toxicity rate is
    Beta(1 + tox, 1 + n - tox); each tile's mass is divided by its
    width.  A tie between tiles resolves toward the higher-toxicity
    tile, which moves the trial toward the lower dose.
    """
    if n < 1 or not 0 <= tox <= n:
        raise ValueError("need n >= 1 and 0 <= tox <= n")
    best_tile = None
    best_upm = -1.0
    for lo, hi, position in reversed(
        interval_tiling(target, margin_below, margin_above)
    ):
        upm = beta_interval_mass(tox, n, lo, hi) / (hi - lo)
        if upm > best_upm + 1e-12:
            best_upm = upm
            best_tile = position
    if best_tile < 0:
        return IntervalDecision.ESCALATE
    if best_tile == 0:
        return IntervalDecision.STAY
    return IntervalDecision.DEESCALATE


def _lowest_excluded(config: Mtpi2Config, data: ObservedData) -> int | None:
    """Lowest dose meeting the exclusion rule; doses above it inherit it."""
    for dose in range(1, data.n_doses + 1):
        n, tox, _ = data.tallies(dose)
        if n > 0 and dose_exclusion(n, tox, config.target, config.exclusion_threshold):
            return dose
    return None


def _select_mtpi2(config: Mtpi2Config, data: ObservedData, cutoff: int) -> Action:
    """Final selection among tried doses below the exclusion cutoff."""
    tried = [d for d in range(1, cutoff) if data.n_at[d - 1] > 0]
    if not tried:
        return StopNoSelection("no admissible dose was tried")
    means = isotonic_posterior_means(
        [data.tox_at[d - 1] for d in tried], [data.n_at[d - 1] for d in tried]
    )
    best = tried[0]
    best_gap = abs(means[0] - config.target)
    for i, dose in enumerate(tried[1:], start=1):
        gap = abs(means[i] - config.target)
        if gap < best_gap - 1e-12:
            best, best_gap = dose, gap
    return StopAndSelect(best)


def decide_mtpi2(config: Mtpi2Config, data: ObservedData) -> Action:
    """One decision of the interval-based design."""
    if data.total_n == 0:
        if config.start_dose > data.n_doses:
            raise DesignRuntimeError("start_dose outside the dataset's dose range")
        return TreatNextCohortAt(config.start_dose)
    excluded_from = _lowest_excluded(config, data)
    if excluded_from == 1:
        return StopNoSelection("lowest dose exceeds the toxicity target")
    cutoff = excluded_from if excluded_from is not None else data.n_doses + 1
    if data.total_n >= config.max_n:
        return _select_mtpi2(config, data, cutoff)

    current = data.current_dose
    if current >= cutoff:
        # The current dose itself is now excluded; step below the cutoff.
        return TreatNextCohortAt(cutoff - 1)
    n, tox, _ = data.tallies(current)
    decision = mtpi2_decision(
        config.target, config.margin_below, config.margin_above, n, tox
    )
    if decision is IntervalDecision.ESCALATE:
        nxt = min(current + 1, data.n_doses, cutoff - 1)
    elif decision is IntervalDecision.STAY:
        nxt = current
    else:
        nxt = max(current - 1, 1)
    return TreatNextCohortAt(nxt)

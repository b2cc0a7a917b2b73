"""Rule-based designs: the classical 3+3 and a fixed-script design.

The scripted design follows a predetermined dose sequence regardless of
outcomes, which makes hand-checkable trial trajectories easy to build
in tests and worked examples.
"""

from __future__ import annotations

from dataclasses import dataclass

from posim.designs.base import (
    Action,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
)
from posim.errors import DesignRuntimeError


@dataclass(frozen=True)
class ThreePlusThreeConfig:
    """Configuration for the classical 3+3 escalation rules.

    Cohorts of three; a dose is expanded to six on one toxicity, the
    trial de-escalates or stops on two or more.  The selected dose is
    the highest tried dose with at most one toxicity in six (or in
    three when the dose was never expanded).
    """

    n_doses: int
    start_dose: int = 1

    def __post_init__(self) -> None:
        if self.n_doses < 1:
            raise ValueError("need at least one dose level")
        if not 1 <= self.start_dose <= self.n_doses:
            raise ValueError("start_dose outside the dose range")

    @property
    def cohort_size(self) -> int:
        return 3

    @property
    def max_n(self) -> int:
        return 6 * self.n_doses


def _deescalate_three_plus_three(data: ObservedData, below: int) -> Action:
    """Walk down from ``below``: select a full acceptable dose, expand a
    half-sampled one, otherwise keep descending."""
    for dose in range(below - 1, 0, -1):
        n, tox, _ = data.tallies(dose)
        if n >= 6:
            if tox <= 1:
                return StopAndSelect(dose)
            continue
        if n == 3 and tox <= 1:
            return TreatNextCohortAt(dose)
    return StopNoSelection("no dose met the 3+3 acceptance rule")


def decide_three_plus_three(config: ThreePlusThreeConfig, data: ObservedData) -> Action:
    """One decision of the classical 3+3 rules."""
    if data.n_doses != config.n_doses:
        raise DesignRuntimeError(
            f"data covers {data.n_doses} doses, config has {config.n_doses}"
        )
    if data.total_n == 0:
        return TreatNextCohortAt(config.start_dose)
    current = data.current_dose
    n, tox, _ = data.tallies(current)
    if n == 3:
        if tox == 0:
            if current == config.n_doses:
                return StopAndSelect(current)
            n_next, _, _ = data.tallies(current + 1)
            if n_next > 0:
                # Already visited above and came back down: expand here.
                return TreatNextCohortAt(current)
            return TreatNextCohortAt(current + 1)
        if tox == 1:
            return TreatNextCohortAt(current)
        return _deescalate_three_plus_three(data, current)
    if n >= 6:
        if tox <= 1:
            if current == config.n_doses:
                return StopAndSelect(current)
            n_next, _, _ = data.tallies(current + 1)
            if n_next > 0:
                return StopAndSelect(current)
            return TreatNextCohortAt(current + 1)
        return _deescalate_three_plus_three(data, current)
    raise DesignRuntimeError(f"3+3 rules saw an impossible tally n={n} at dose {current}")


@dataclass(frozen=True)
class ScriptedConfig:
    """A fixed dose path, mainly for worked examples and tests.

    Args:
        doses: 1-based dose for each successive cohort.
        cohort_size: Patients per cohort.
        n_doses: Number of dose levels in the trial.
        final_selection: Dose selected after the script runs out, or
            None to stop without selection.
    """

    doses: tuple[int, ...]
    cohort_size: int
    n_doses: int
    final_selection: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "doses", tuple(int(d) for d in self.doses))
        if not self.doses:
            raise ValueError("script needs at least one cohort")
        if self.cohort_size < 1:
            raise ValueError("cohort_size must be positive")
        if self.n_doses < 1:
            raise ValueError("need at least one dose level")
        if any(not 1 <= d <= self.n_doses for d in self.doses):
            raise ValueError("scripted dose outside the dose range")
        if self.final_selection is not None and not (
            1 <= self.final_selection <= self.n_doses
        ):
            raise ValueError("final_selection outside the dose range")

    @property
    def max_n(self) -> int:
        return len(self.doses) * self.cohort_size


def decide_scripted(config: ScriptedConfig, data: ObservedData) -> Action:
    """Treat the next cohort at the scripted dose, then stop."""
    if data.n_doses != config.n_doses:
        raise DesignRuntimeError(
            f"data covers {data.n_doses} doses, config has {config.n_doses}"
        )
    if data.total_n % config.cohort_size != 0:
        raise DesignRuntimeError("observed data is not aligned with the script")
    cohort = data.total_n // config.cohort_size
    if cohort < len(config.doses):
        return TreatNextCohortAt(config.doses[cohort])
    if config.final_selection is None:
        return StopNoSelection("script exhausted")
    return StopAndSelect(config.final_selection)

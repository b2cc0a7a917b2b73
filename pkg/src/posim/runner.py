"""Replay an escalation design over pre-generated potential outcomes.

Because every patient's outcome at every dose is fixed before the trial
starts, running two designs over the same dataset exposes them to
identical patients, and per-trial performance indicators can be paired.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass

from posim.designs import (
    Boin12Config,
    CrmConfig,
    DesignConfig,
    Mtpi2Config,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
    decide,
    design_n_doses,
    needs_efficacy,
)
from posim.errors import DesignRuntimeError
from posim.po import PoDataset, Scenario, generate_dataset


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one simulated trial.

    Args:
        design_id: Caller-chosen label of the design run.
        trial_index: Index of the potential-outcome dataset used.
        selected: 1-based selected dose, or None if the trial stopped
            without selection.
        stop_reason: Explanation when no dose was selected.
        n_treated: Number of patients actually enrolled.
        doses_given: Dose of each treated patient, in enrolment order.
        tox_seen: Toxicity outcome of each treated patient.
        eff_seen: Efficacy outcome of each treated patient, or None for
            toxicity-only trials.
        n_at: Patients treated per dose.
        tox_at: Toxicities observed per dose.
        eff_at: Responses observed per dose (zeros without efficacy).
    """

    design_id: str
    trial_index: int
    selected: int | None
    stop_reason: str | None
    n_treated: int
    doses_given: tuple[int, ...]
    tox_seen: tuple[int, ...]
    eff_seen: tuple[int, ...] | None
    n_at: tuple[int, ...]
    tox_at: tuple[int, ...]
    eff_at: tuple[int, ...]

    @property
    def assignments(self) -> tuple[tuple[int, int], ...]:
        """Chronological (patient, dose) pairs."""
        return tuple(enumerate(self.doses_given))

    @property
    def final(self) -> StopAndSelect | StopNoSelection:
        """The stop action that ended the trial."""
        if self.selected is not None:
            return StopAndSelect(self.selected)
        return StopNoSelection(self.stop_reason or "")


@dataclass(frozen=True)
class SelectionIndicator:
    """Per-trial selection indicator for one design on one dataset."""

    design_id: str
    trial_index: int
    correct: int


def run_trial(config: DesignConfig, dataset: PoDataset, design_id: str) -> TrialResult:
    """Drive one design over one dataset until it stops.

    Patients are consumed in dataset order; a cohort is truncated when
    the dataset runs out, after which the design makes one final
    decision on the complete data.
    """
    declared = design_n_doses(config)
    if declared is not None and declared != dataset.n_doses:
        raise DesignRuntimeError(
            f"design expects {declared} doses, dataset has {dataset.n_doses}"
        )
    if needs_efficacy(config) and dataset.eff_po is None:
        raise DesignRuntimeError(
            "design needs an efficacy endpoint, dataset has none"
        )
    data = ObservedData(
        n_doses=dataset.n_doses, has_efficacy=dataset.eff_po is not None
    )
    cohort_size = getattr(config, "cohort_size")
    next_patient = 0
    while True:
        action = decide(config, data)
        if isinstance(action, (StopAndSelect, StopNoSelection)):
            break
        assert isinstance(action, TreatNextCohortAt)
        take = min(cohort_size, dataset.n_patients - next_patient)
        if take == 0:
            # Patients exhausted before the design chose to stop: ask it
            # once more for a terminal decision on the full data.
            action = _terminal_action(config, data)
            break
        for _ in range(take):
            tox, eff = dataset.outcome(next_patient, action.dose)
            data.add(next_patient, action.dose, tox, eff)
            next_patient += 1

    if isinstance(action, StopAndSelect):
        selected, reason = action.dose, None
    else:
        selected, reason = None, action.reason
    eff_seen = (
        tuple(rec.eff for rec in data.records) if data.has_efficacy else None
    )
    return TrialResult(
        design_id=design_id,
        trial_index=dataset.trial_index,
        selected=selected,
        stop_reason=reason,
        n_treated=data.total_n,
        doses_given=tuple(rec.dose for rec in data.records),
        tox_seen=tuple(rec.tox for rec in data.records),
        eff_seen=eff_seen,
        n_at=tuple(data.n_at),
        tox_at=tuple(data.tox_at),
        eff_at=tuple(data.eff_at),
    )


def _terminal_action(config: DesignConfig, data: ObservedData) -> StopAndSelect | StopNoSelection:
    """Force a stop decision once no further patients can be treated.

    Adaptive designs are re-asked with their sample-size cap lowered to
    the data actually collected, which turns the decision into their
    usual end-of-trial selection; rule-based designs simply stop.
    """
    if data.total_n > 0 and isinstance(config, (CrmConfig, Mtpi2Config, Boin12Config)):
        capped = dataclasses.replace(config, max_n=data.total_n)
        action = decide(capped, data)
        assert isinstance(action, (StopAndSelect, StopNoSelection))
        return action
    return StopNoSelection("patients exhausted before the design stopped")


def score_selection(result: TrialResult, true_target_dose: int | None) -> SelectionIndicator:
    """Binary indicator of whether the trial selected the true target.

    A trial that stopped without selection scores 0; if the scenario has
    no correct dose (``true_target_dose`` None), selecting nothing
    scores 1 and selecting any dose scores 0.
    """
    if true_target_dose is None:
        correct = int(result.selected is None)
    else:
        correct = int(result.selected == true_target_dose)
    return SelectionIndicator(
        design_id=result.design_id,
        trial_index=result.trial_index,
        correct=correct,
    )


def run_batch(
    config: DesignConfig,
    scenario: Scenario,
    trial_indices: Iterable[int],
    design_id: str,
    datasets: Mapping[int, PoDataset] | Callable[[int], PoDataset] | None = None,
) -> list[TrialResult]:
    """Run one design over a set of trials, sorted by trial index.

    Datasets are generated from the scenario unless ``datasets``
    supplies them (a mapping or a loader callable); supplied datasets
    must match the scenario's seed material so results stay tied to the
    scenario they claim to represent.
    """
    results = []
    for trial_index in sorted(set(trial_indices)):
        if datasets is None:
            dataset = generate_dataset(scenario, trial_index)
        elif callable(datasets):
            dataset = datasets(trial_index)
        else:
            dataset = datasets[trial_index]
        if dataset.master_seed != scenario.master_seed:
            raise DesignRuntimeError(
                f"dataset for trial {trial_index} carries master_seed "
                f"{dataset.master_seed}, scenario has {scenario.master_seed}"
            )
        if dataset.trial_index != trial_index:
            raise DesignRuntimeError(
                f"dataset claims trial {dataset.trial_index}, expected {trial_index}"
            )
        results.append(run_trial(config, dataset, design_id))
    return results

"""Shared fixtures: a hand-checkable worked example and two reference scenarios.

The worked example is a ten-patient toxicity PO matrix small enough to
verify by eye.  Each patient's latent uniform is chosen so the threshold
rule reproduces a known 10x5 outcome matrix, and a fixed dosing script
over that matrix yields known observed tallies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from posim.po import DoseCurve, PoDataset, Scenario, dataset_from_latents

# Latent uniforms paired with the 10x5 outcome matrix they imply under
# the curve below (row i is patient i's outcome at doses 1..5).
TEN_PATIENT_CURVE = (0.10, 0.20, 0.22, 0.35, 0.50)
TEN_PATIENT_U = (0.05, 0.15, 0.45, 0.9, 0.8, 0.3, 0.7, 0.6, 0.95, 0.21)
TEN_PATIENT_MATRIX = (
    (1, 1, 1, 1, 1),
    (0, 1, 1, 1, 1),
    (0, 0, 0, 0, 1),
    (0, 0, 0, 0, 0),
    (0, 0, 0, 0, 0),
    (0, 0, 0, 1, 1),
    (0, 0, 0, 0, 0),
    (0, 0, 0, 0, 0),
    (0, 0, 0, 0, 0),
    (0, 0, 1, 1, 1),
)
# A fixed script (cohorts of two) and the tallies it must observe on the
# matrix above: dose 1 sees patients 1-4, doses 2-4 two patients each.
TEN_PATIENT_SCRIPT = (1, 1, 2, 3, 4)
TEN_PATIENT_COHORT = 2
TEN_PATIENT_TALLIES = {1: (4, 1), 2: (2, 0), 3: (2, 0), 4: (2, 1)}


@dataclass(frozen=True)
class WorkedExample:
    curve: DoseCurve
    dataset: PoDataset
    matrix: np.ndarray
    script: tuple[int, ...]
    cohort_size: int
    tallies: dict[int, tuple[int, int]]


@pytest.fixture(scope="session")
def worked_example() -> WorkedExample:
    curve = DoseCurve(TEN_PATIENT_CURVE)
    dataset = dataset_from_latents(
        master_seed=0,
        trial_index=0,
        tox_curve=curve,
        eff_curve=None,
        rho=0.0,
        u_tox=np.array(TEN_PATIENT_U),
    )
    return WorkedExample(
        curve=curve,
        dataset=dataset,
        matrix=np.array(TEN_PATIENT_MATRIX, dtype=np.uint8),
        script=TEN_PATIENT_SCRIPT,
        cohort_size=TEN_PATIENT_COHORT,
        tallies=TEN_PATIENT_TALLIES,
    )


# Reference scenario with co-primary endpoints: five doses, utility
# targets dose 2 (highest mean utility at or below the MTD).
PHASE12_TOX = (0.05, 0.10, 0.15, 0.18, 0.45)
PHASE12_EFF = (0.40, 0.50, 0.52, 0.53, 0.53)
PHASE12_OBD = 2

# Reference toxicity-only scenario: four doses, target rate 0.30, the
# highest dose is the MTD.
PHASE1_TOX = (0.01, 0.05, 0.15, 0.30)
PHASE1_TARGET = 0.30
PHASE1_MTD = 4


def phase12_scenario(
    n_trials: int, master_seed: int = 20240601, rho: float = 0.0
) -> Scenario:
    return Scenario(
        tox_curve=DoseCurve(PHASE12_TOX),
        eff_curve=DoseCurve(PHASE12_EFF, monotone=False),
        rho=rho,
        max_n=36,
        cohort_size=3,
        n_trials=n_trials,
        master_seed=master_seed,
    )


def phase1_scenario(n_trials: int, master_seed: int = 20240602) -> Scenario:
    return Scenario(
        tox_curve=DoseCurve(PHASE1_TOX),
        eff_curve=None,
        rho=0.0,
        max_n=30,
        cohort_size=3,
        n_trials=n_trials,
        master_seed=master_seed,
    )

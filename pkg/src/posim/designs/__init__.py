"""Adaptive escalation designs sharing one decision interface.

Each design maps accumulated ``ObservedData`` to an ``Action``;
``decide`` dispatches on the configuration type so callers never need
to know which design they are driving.
"""

from __future__ import annotations

from dataclasses import asdict
from typing import Union

from posim.designs.base import (
    Action,
    AssignmentRecord,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
    beta_interval_mass,
    beta_tail_above,
    dose_exclusion,
    isotonic_posterior_means,
)
from posim.designs.boin12 import (
    Boin12Config,
    UtilityWeights,
    boin12_admissible,
    decide_boin12,
    desirability,
    escalation_boundaries,
    pseudo_utility,
)
from posim.designs.crm import CrmConfig, crm_posterior, crm_stop_rule, decide_crm
from posim.designs.mtpi2 import (
    IntervalDecision,
    Mtpi2Config,
    decide_mtpi2,
    interval_tiling,
    mtpi2_decision,
)
from posim.designs.rulebased import (
    ScriptedConfig,
    ThreePlusThreeConfig,
    decide_scripted,
    decide_three_plus_three,
)
from posim.errors import DesignRuntimeError

DesignConfig = Union[
    CrmConfig, Mtpi2Config, Boin12Config, ThreePlusThreeConfig, ScriptedConfig
]

_DISPATCH = {
    CrmConfig: decide_crm,
    Mtpi2Config: decide_mtpi2,
    Boin12Config: decide_boin12,
    ThreePlusThreeConfig: decide_three_plus_three,
    ScriptedConfig: decide_scripted,
}

_KIND = {
    CrmConfig: "crm",
    Mtpi2Config: "mtpi2",
    Boin12Config: "boin12",
    ThreePlusThreeConfig: "three_plus_three",
    ScriptedConfig: "scripted",
}


def decide(config: DesignConfig, data: ObservedData) -> Action:
    """Next action of the design given the data observed so far."""
    try:
        rule = _DISPATCH[type(config)]
    except KeyError:
        raise DesignRuntimeError(f"unknown design config {type(config).__name__}")
    return rule(config, data)


def design_kind(config: DesignConfig) -> str:
    """Short machine-readable name of the design family."""
    return _KIND[type(config)]


def needs_efficacy(config: DesignConfig) -> bool:
    """Whether the design reads the efficacy endpoint."""
    return isinstance(config, Boin12Config)


def design_n_doses(config: DesignConfig) -> int | None:
    """Number of dose levels the config commits to, if any.

    Interval-based and utility-based designs adapt to whatever dose
    range the data covers, so they return None.
    """
    if isinstance(config, CrmConfig):
        return config.n_doses
    if isinstance(config, (ThreePlusThreeConfig, ScriptedConfig)):
        return config.n_doses
    return None


def describe(config: DesignConfig) -> dict:
    """Flat parameter dictionary for audit output."""
    info: dict = {"kind": design_kind(config)}
    info.update(asdict(config))
    return info


__all__ = [
    "Action",
    "AssignmentRecord",
    "ObservedData",
    "TreatNextCohortAt",
    "StopAndSelect",
    "StopNoSelection",
    "DesignConfig",
    "CrmConfig",
    "Mtpi2Config",
    "Boin12Config",
    "UtilityWeights",
    "ThreePlusThreeConfig",
    "ScriptedConfig",
    "IntervalDecision",
    "decide",
    "design_kind",
    "design_n_doses",
    "needs_efficacy",
    "describe",
    "decide_crm",
    "decide_mtpi2",
    "decide_boin12",
    "decide_three_plus_three",
    "decide_scripted",
    "crm_posterior",
    "crm_stop_rule",
    "mtpi2_decision",
    "interval_tiling",
    "dose_exclusion",
    "boin12_admissible",
    "desirability",
    "pseudo_utility",
    "escalation_boundaries",
    "beta_tail_above",
    "beta_interval_mass",
    "isotonic_posterior_means",
]

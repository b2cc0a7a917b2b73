"""One-parameter continual reassessment method with a safety stop.

The dose-toxicity model is the empiric (power) model: the toxicity
probability at dose ``d`` is ``skeleton[d] ** exp(beta)`` with a normal
prior on ``beta``.  Posterior summaries are computed by trapezoid
quadrature on a fixed grid, which keeps every decision deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from posim.designs.base import (
    Action,
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
)
from posim.errors import DesignRuntimeError

_BETA_LO = -10.0
_BETA_HI = 10.0
_BETA_POINTS = 2001


@dataclass(frozen=True)
class CrmConfig:
    """Configuration for the one-parameter power-model design.

    Args:
        skeleton: Prior guess of the toxicity probability at each dose,
            strictly increasing, entries inside (0, 1).
        target: Target toxicity rate defining the maximum tolerated dose.
        prior_sd: Standard deviation of the normal prior on the model
            exponent.
        stop_tox_threshold: Stop the trial without selection when the
            posterior probability that the lowest dose's toxicity rate
            exceeds ``target`` is above this value.
        max_n: Maximum number of patients.
        cohort_size: Patients treated between successive decisions.
        start_dose: 1-based starting dose.
    """

    skeleton: tuple[float, ...]
    target: float
    prior_sd: float = 1.34
    stop_tox_threshold: float = 0.90
    max_n: int = 30
    cohort_size: int = 3
    start_dose: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "skeleton", tuple(float(p) for p in self.skeleton)
        )
        if len(self.skeleton) < 1:
            raise ValueError("skeleton needs at least one dose")
        if any(not 0.0 < p < 1.0 for p in self.skeleton):
            raise ValueError("skeleton entries must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(self.skeleton, self.skeleton[1:])):
            raise ValueError("skeleton must be strictly increasing")
        if not 0.0 < self.target < 1.0:
            raise ValueError("target must lie strictly inside (0, 1)")
        if self.prior_sd <= 0.0:
            raise ValueError("prior_sd must be positive")
        if not 0.0 < self.stop_tox_threshold <= 1.0:
            raise ValueError("stop_tox_threshold must lie inside (0, 1]")
        if self.max_n < 1 or self.cohort_size < 1:
            raise ValueError("max_n and cohort_size must be positive")
        if not 1 <= self.start_dose <= len(self.skeleton):
            raise ValueError("start_dose outside the skeleton")

    @property
    def n_doses(self) -> int:
        return len(self.skeleton)


@lru_cache(maxsize=None)
def _model_grid(
    skeleton: tuple[float, ...], prior_sd: float, points: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fixed quadrature grid for the posterior over the model exponent.

    Returns the grid, per-grid-point log toxicity probabilities and
    their complements (points x doses), and the unnormalised log prior.
    The log probability at dose d is exp(beta) * log(skeleton[d]),
    evaluated in log space to stay finite for extreme exponents.
    """
    beta = np.linspace(_BETA_LO, _BETA_HI, points)
    log_skeleton = np.log(np.asarray(skeleton, dtype=np.float64))
    log_p = np.exp(beta)[:, None] * log_skeleton[None, :]
    log_q = np.log(-np.expm1(log_p))
    log_prior = -0.5 * (beta / prior_sd) ** 2
    return beta, log_p, log_q, log_prior


@lru_cache(maxsize=None)
def _posterior_summaries(
    skeleton: tuple[float, ...],
    prior_sd: float,
    target: float,
    n: tuple[int, ...],
    tox: tuple[int, ...],
    points: int = _BETA_POINTS,
) -> tuple[tuple[float, ...], float]:
    """Posterior toxicity means per dose and P(lowest-dose rate > target)."""
    beta, log_p, log_q, log_prior = _model_grid(skeleton, prior_sd, points)
    n_arr = np.asarray(n, dtype=np.float64)
    tox_arr = np.asarray(tox, dtype=np.float64)
    log_post = log_prior + log_p @ tox_arr + log_q @ (n_arr - tox_arr)
    density = np.exp(log_post - log_post.max())
    norm = np.trapezoid(density, beta)
    means = np.trapezoid(density[:, None] * np.exp(log_p), beta, axis=0) / norm

    # The lowest dose's rate exceeds the target exactly when the
    # exponent is below log(log(target) / log(skeleton[0])); integrate
    # the density up to that cut, splitting the straddling grid cell so
    # the result is continuous in the cut position.
    cut = math.log(math.log(target) / math.log(skeleton[0]))
    if cut <= beta[0]:
        p_low_toxic = 0.0
    elif cut >= beta[-1]:
        p_low_toxic = 1.0
    else:
        k = int(np.searchsorted(beta, cut, side="right")) - 1
        mass = np.trapezoid(density[: k + 1], beta[: k + 1])
        frac = (cut - beta[k]) / (beta[k + 1] - beta[k])
        density_at_cut = density[k] + (density[k + 1] - density[k]) * frac
        mass += 0.5 * (density[k] + density_at_cut) * (cut - beta[k])
        p_low_toxic = float(mass / norm)
    return tuple(float(m) for m in means), p_low_toxic


def _tallies(config: CrmConfig, data: ObservedData) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if data.n_doses != config.n_doses:
        raise DesignRuntimeError(
            f"data covers {data.n_doses} doses, config has {config.n_doses}"
        )
    return tuple(data.n_at), tuple(data.tox_at)


def crm_posterior(
    config: CrmConfig, data: ObservedData, grid_points: int = _BETA_POINTS
) -> np.ndarray:
    """Posterior mean toxicity probability at each dose.

    ``grid_points`` refines the quadrature grid; richer grids must agree
    with the default to well within decision-relevant precision.
    """
    n, tox = _tallies(config, data)
    means, _ = _posterior_summaries(
        config.skeleton, config.prior_sd, config.target, n, tox, grid_points
    )
    return np.asarray(means)


def crm_stop_rule(
    config: CrmConfig, data: ObservedData, grid_points: int = _BETA_POINTS
) -> bool:
    """Whether the lowest dose is already too toxic to continue."""
    n, tox = _tallies(config, data)
    _, p_low_toxic = _posterior_summaries(
        config.skeleton, config.prior_sd, config.target, n, tox, grid_points
    )
    return p_low_toxic > config.stop_tox_threshold


def _closest_to_target(means: np.ndarray, target: float, doses: list[int]) -> int:
    """Dose among ``doses`` whose mean is closest to target, ties low."""
    best = doses[0]
    best_gap = abs(means[best - 1] - target)
    for dose in doses[1:]:
        gap = abs(means[dose - 1] - target)
        if gap < best_gap - 1e-12:
            best, best_gap = dose, gap
    return best


def decide_crm(config: CrmConfig, data: ObservedData) -> Action:
    """One decision of the power-model design.

    Escalation is capped at one level above the highest dose tried so
    far, and the recommended dose never exceeds the current dose plus
    one.
    """
    if data.total_n == 0:
        return TreatNextCohortAt(config.start_dose)
    if crm_stop_rule(config, data):
        return StopNoSelection("lowest dose exceeds the toxicity target")
    means = crm_posterior(config, data)
    tried = [d for d in range(1, config.n_doses + 1) if data.n_at[d - 1] > 0]
    if data.total_n >= config.max_n:
        return StopAndSelect(_closest_to_target(means, config.target, tried))
    best = _closest_to_target(
        means, config.target, list(range(1, config.n_doses + 1))
    )
    ceiling = min(data.current_dose + 1, max(tried) + 1, config.n_doses)
    return TreatNextCohortAt(min(best, ceiling))

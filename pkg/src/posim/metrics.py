"""Monte Carlo estimators for paired and independent design contrasts.

All variances are sample variances (denominator n - 1), and all Monte
Carlo standard errors are for means over ``n_sim`` simulated trials.
Pairing two designs over identical potential-outcome datasets leaves
the point estimate of the contrast unchanged but removes the shared
between-trial variation from its Monte Carlo error.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from posim.runner import SelectionIndicator


def estimate_psi(indicators: Sequence[int] | np.ndarray) -> tuple[float, float]:
    """Mean selection probability and its Monte Carlo standard error.

    The MCSE is the square root of the sample variance (denominator
    n - 1) divided by the number of trials.
    """
    arr = np.asarray(indicators, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need a flat vector of at least two indicators")
    psi = float(arr.mean())
    mcse = math.sqrt(float(arr.var(ddof=1)) / arr.size)
    return psi, mcse


def var_delta_covariance(
    x: Sequence[int] | np.ndarray, y: Sequence[int] | np.ndarray
) -> float:
    """Variance of the paired mean difference via the covariance identity.

    Var(mean(x) - mean(y)) = (Var(x) + Var(y) - 2 Cov(x, y)) / n for
    aligned per-trial indicators x and y.
    """
    x_arr, y_arr = _aligned(x, y)
    cov = np.cov(x_arr, y_arr, ddof=1)
    return float((cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1]) / x_arr.size)


def var_delta_difference(
    x: Sequence[int] | np.ndarray, y: Sequence[int] | np.ndarray
) -> float:
    """Variance of the paired mean difference via per-trial differences.

    Algebraically identical to :func:`var_delta_covariance`; computing
    both ways guards estimator implementations against each other.
    """
    x_arr, y_arr = _aligned(x, y)
    return float((x_arr - y_arr).var(ddof=1) / x_arr.size)


def indicator_correlation(
    x: Sequence[int] | np.ndarray, y: Sequence[int] | np.ndarray
) -> float | None:
    """Pearson correlation of paired indicators, None when degenerate."""
    x_arr, y_arr = _aligned(x, y)
    cov = np.cov(x_arr, y_arr, ddof=1)
    denom = math.sqrt(float(cov[0, 0]) * float(cov[1, 1]))
    if denom == 0.0:
        return None
    return float(cov[0, 1]) / denom


def relative_efficiency(mcse_independent: float, mcse_paired: float) -> float:
    """Factor by which pairing shrinks the required number of trials.

    Matching a paired contrast's precision with independent replications
    needs (mcse_independent / mcse_paired) ** 2 times as many trials.
    """
    if mcse_paired <= 0.0 or mcse_independent < 0.0:
        raise ValueError("standard errors must be positive")
    return (mcse_independent / mcse_paired) ** 2


def _aligned(x, y) -> tuple[np.ndarray, np.ndarray]:
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if x_arr.shape != y_arr.shape or x_arr.ndim != 1:
        raise ValueError("paired indicator vectors must be flat and equally long")
    if x_arr.size < 2:
        raise ValueError("need at least two paired trials")
    return x_arr, y_arr


@dataclass(frozen=True)
class PairedIndicators:
    """Aligned per-trial selection indicators of two designs.

    Both vectors are ordered by ``trial_indices``; position i of each
    vector refers to the same potential-outcome dataset.
    """

    design_a: str
    design_b: str
    trial_indices: tuple[int, ...]
    a: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.trial_indices) == len(self.a) == len(self.b)):
            raise ValueError("indicator vectors must align with trial indices")
        if len(self.trial_indices) != len(set(self.trial_indices)):
            raise ValueError("duplicate trial indices")
        if any(v not in (0, 1) for v in self.a + self.b):
            raise ValueError("indicators must be 0 or 1")

    @classmethod
    def from_indicators(
        cls,
        indicators_a: Iterable[SelectionIndicator],
        indicators_b: Iterable[SelectionIndicator],
    ) -> "PairedIndicators":
        """Pair two indicator lists by trial index.

        Both lists must cover exactly the same trials.
        """
        by_trial_a = {ind.trial_index: ind for ind in indicators_a}
        by_trial_b = {ind.trial_index: ind for ind in indicators_b}
        if set(by_trial_a) != set(by_trial_b):
            raise ValueError("designs were run on different trial sets")
        if not by_trial_a:
            raise ValueError("no trials to pair")
        order = sorted(by_trial_a)
        any_a = by_trial_a[order[0]]
        any_b = by_trial_b[order[0]]
        return cls(
            design_a=any_a.design_id,
            design_b=any_b.design_id,
            trial_indices=tuple(order),
            a=tuple(by_trial_a[t].correct for t in order),
            b=tuple(by_trial_b[t].correct for t in order),
        )

    @property
    def n_sim(self) -> int:
        return len(self.trial_indices)


@dataclass(frozen=True)
class ComparisonSummary:
    """Headline numbers of one two-design comparison.

    ``mode`` is "paired" when both designs ran on identical datasets
    and "independent" when each used its own datasets.  In independent
    mode the covariance term of the contrast variance is structurally
    zero, the difference-form variance does not apply, and the
    indicator correlation is undefined.  ``rel_efficiency`` is filled
    only when both a paired and an independent run of the same contrast
    are available to compare.
    """

    design_a: str
    design_b: str
    mode: str
    n_sim: int
    psi_a: float
    mcse_a: float
    psi_b: float
    mcse_b: float
    delta: float
    var_delta_cov: float
    var_delta_diff: float | None
    mcse_delta: float
    corr: float | None
    rel_efficiency: float | None = None


def summarize_paired(paired: PairedIndicators) -> ComparisonSummary:
    """Summary of a paired comparison over common datasets."""
    psi_a, mcse_a = estimate_psi(paired.a)
    psi_b, mcse_b = estimate_psi(paired.b)
    var_cov = var_delta_covariance(paired.a, paired.b)
    var_diff = var_delta_difference(paired.a, paired.b)
    return ComparisonSummary(
        design_a=paired.design_a,
        design_b=paired.design_b,
        mode="paired",
        n_sim=paired.n_sim,
        psi_a=psi_a,
        mcse_a=mcse_a,
        psi_b=psi_b,
        mcse_b=mcse_b,
        delta=psi_a - psi_b,
        var_delta_cov=var_cov,
        var_delta_diff=var_diff,
        mcse_delta=math.sqrt(var_diff),
        corr=indicator_correlation(paired.a, paired.b),
    )


def summarize_independent(
    design_a: str,
    design_b: str,
    a: Sequence[int] | np.ndarray,
    b: Sequence[int] | np.ndarray,
) -> ComparisonSummary:
    """Summary of a comparison over disjoint dataset replications.

    The two runs need not use the same number of trials; the contrast's
    variance is the zero-covariance form, summing the per-design mean
    variances.
    """
    psi_a, mcse_a = estimate_psi(a)
    psi_b, mcse_b = estimate_psi(b)
    var_cov = mcse_a**2 + mcse_b**2
    return ComparisonSummary(
        design_a=design_a,
        design_b=design_b,
        mode="independent",
        n_sim=min(len(a), len(b)),
        psi_a=psi_a,
        mcse_a=mcse_a,
        psi_b=psi_b,
        mcse_b=mcse_b,
        delta=psi_a - psi_b,
        var_delta_cov=var_cov,
        var_delta_diff=None,
        mcse_delta=math.sqrt(var_cov),
        corr=None,
    )


def convergence_series(
    paired: PairedIndicators, checkpoint: int = 1000
) -> list[tuple[int, float, float, float, float]]:
    """Running paired estimates every ``checkpoint`` trials.

    Returns (n, psi_a, psi_b, delta, mcse_delta) rows at n = checkpoint,
    2*checkpoint, ... and always at the full trial count, where the row
    equals the full-sample statistics exactly.
    """
    if checkpoint < 1:
        raise ValueError("checkpoint cadence must be a positive integer")
    n_sim = paired.n_sim
    points = [n for n in range(checkpoint, n_sim, checkpoint) if n >= 2]
    points.append(n_sim)
    a = np.asarray(paired.a, dtype=np.float64)
    b = np.asarray(paired.b, dtype=np.float64)
    out = []
    for n in points:
        psi_a = float(a[:n].mean())
        psi_b = float(b[:n].mean())
        mcse = math.sqrt(var_delta_difference(a[:n], b[:n]))
        out.append((n, psi_a, psi_b, psi_a - psi_b, mcse))
    return out

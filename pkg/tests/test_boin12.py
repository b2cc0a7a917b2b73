"""Utility-based design: boundaries, admissibility, desirability, moves.

Boundary values are checked against the standard interval-design
tables; desirability against adaptive quadrature of the quasi-binomial
posterior.
"""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from posim.designs.base import (
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
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
from posim.errors import DesignRuntimeError


def config(**kw) -> Boin12Config:
    return Boin12Config(**kw)


def observed(cells: list[tuple[int, int, int, int]]) -> ObservedData:
    """Build data from per-dose joint counts.

    ``cells[d]`` is (eff_no_tox, eff_tox, no_eff_no_tox, no_eff_tox)
    at dose d+1; enrolment order follows dose order.
    """
    data = ObservedData(n_doses=len(cells), has_efficacy=True)
    patient = 0
    for dose, (eff_only, eff_tox, none_only, none_tox) in enumerate(cells, start=1):
        for tox, eff, count in (
            (0, 1, eff_only),
            (1, 1, eff_tox),
            (0, 0, none_only),
            (1, 0, none_tox),
        ):
            for _ in range(count):
                data.add(patient, dose, tox, eff)
                patient += 1
    return data


# ---------------------------------------------------------------------------
# escalation boundaries


def test_boundaries_match_published_tables():
    lam_e, lam_d = escalation_boundaries(0.30)
    assert lam_e == pytest.approx(0.2365, abs=1e-4)
    assert lam_d == pytest.approx(0.3585, abs=1e-4)
    lam_e, lam_d = escalation_boundaries(0.35)
    assert lam_e == pytest.approx(0.2763, abs=1e-4)
    assert lam_d == pytest.approx(0.4189, abs=1e-4)


@given(phi=st.floats(min_value=0.1, max_value=0.6))
def test_boundaries_are_likelihood_crossings(phi):
    # lam_e equates the Bernoulli log-likelihoods under rates 0.6*phi
    # and phi; lam_d under phi and 1.4*phi
    lam_e, lam_d = escalation_boundaries(phi)
    assert 0.0 < lam_e < phi < lam_d < 1.0

    def loglik(rate, lam):
        return lam * math.log(rate) + (1 - lam) * math.log(1 - rate)

    assert loglik(0.6 * phi, lam_e) == pytest.approx(loglik(phi, lam_e), abs=1e-12)
    assert loglik(phi, lam_d) == pytest.approx(loglik(1.4 * phi, lam_d), abs=1e-12)


# ---------------------------------------------------------------------------
# admissibility


def test_admissibility_safety_is_monotone():
    # 3/3 toxicities at dose 2: it and every higher dose are ruled out
    data = observed([(2, 0, 1, 0), (0, 3, 0, 0), (0, 0, 0, 0)])
    admissible = boin12_admissible(data, 0.35, 0.25, 0.95, 0.90)
    assert admissible == {1}


def test_admissibility_futility_is_per_dose():
    # 0/9 responses at dose 1: futile (posterior P(eff < 0.25) = 0.944);
    # dose 2 untried stays in on the prior
    data = observed([(0, 0, 9, 0), (0, 0, 0, 0)])
    admissible = boin12_admissible(data, 0.35, 0.25, 0.95, 0.90)
    assert admissible == {2}
    # 0/6 responses is not yet futile (0.867 < 0.90)
    data = observed([(0, 0, 6, 0), (0, 0, 0, 0)])
    admissible = boin12_admissible(data, 0.35, 0.25, 0.95, 0.90)
    assert admissible == {1, 2}


def test_admissibility_untried_doses_pass_on_prior():
    data = ObservedData(n_doses=3, has_efficacy=True)
    assert boin12_admissible(data, 0.35, 0.25, 0.95, 0.90) == {1, 2, 3}


@settings(max_examples=60)
@given(
    cells=st.lists(
        st.tuples(
            st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)
        ),
        min_size=1,
        max_size=4,
    )
)
def test_stricter_thresholds_admit_a_subset(cells):
    # lowering both confidence thresholds can only remove doses
    data = observed(cells)
    loose = boin12_admissible(data, 0.35, 0.25, 0.95, 0.90)
    strict = boin12_admissible(data, 0.35, 0.25, 0.85, 0.80)
    assert strict <= loose


# ---------------------------------------------------------------------------
# utility and desirability


def test_pseudo_utility_hand_values():
    weights = UtilityWeights()
    # 1 response-no-tox, 1 response-tox, 1 neither, 1 tox-only at dose 1
    data = observed([(1, 1, 1, 1)])
    # (100 + 60 + 40 + 0) / 100
    assert pseudo_utility(weights, data, 1) == pytest.approx(2.0, abs=1e-15)
    data = observed([(3, 0, 0, 0)])
    assert pseudo_utility(weights, data, 1) == pytest.approx(3.0, abs=1e-15)
    data = observed([(0, 0, 0, 3)])
    assert pseudo_utility(weights, data, 1) == pytest.approx(0.0, abs=1e-15)


def test_pseudo_utility_respects_custom_weights():
    weights = UtilityWeights(80.0, 30.0, 50.0, 10.0)
    data = observed([(1, 1, 1, 1)])
    assert pseudo_utility(weights, data, 1) == pytest.approx(
        (80 + 30 + 50 + 10) / 80, abs=1e-15
    )


@pytest.mark.parametrize(
    "cell",
    [(2, 0, 1, 0), (1, 1, 1, 0), (0, 0, 3, 0), (3, 2, 1, 0), (0, 1, 2, 3)],
)
def test_desirability_matches_quadrature_oracle(cell):
    cfg = config()
    data = observed([cell])
    n = sum(cell)
    x = pseudo_utility(cfg.utility_weights, data, 1)
    benchmark = cfg.utility_benchmark / cfg.utility_weights.scale

    norm, _ = quad(lambda t: t**x * (1 - t) ** (n - x), 0, 1)
    tail, _ = quad(lambda t: t**x * (1 - t) ** (n - x), benchmark, 1)
    assert desirability(cfg, data, 1) == pytest.approx(tail / norm, rel=1e-9)


def test_desirability_of_untried_dose_is_prior_tail():
    cfg = config()
    data = ObservedData(n_doses=2, has_efficacy=True)
    # uniform prior: P(p > 0.6) = 0.4
    assert desirability(cfg, data, 2) == pytest.approx(0.4, abs=1e-12)


def test_desirability_increases_with_better_outcomes():
    cfg = config()
    worse = observed([(0, 0, 3, 0)])
    better = observed([(3, 0, 0, 0)])
    assert desirability(cfg, better, 1) > desirability(cfg, worse, 1)


# ---------------------------------------------------------------------------
# decisions


def test_first_cohort_at_start_dose():
    data = ObservedData(n_doses=3, has_efficacy=True)
    assert decide_boin12(config(), data) == TreatNextCohortAt(1)


def test_requires_efficacy_endpoint():
    data = ObservedData(n_doses=3, has_efficacy=False)
    with pytest.raises(DesignRuntimeError):
        decide_boin12(config(), data)


def test_safe_dose_escalates_to_untried_neighbour():
    # 0/3 toxicity at dose 1 with weak efficacy: the untried dose 2
    # carries prior desirability 0.4; dose 1's posterior desirability
    # after 3 utility-0.4 patients is lower, so the trial escalates
    data = observed([(0, 0, 3, 0), (0, 0, 0, 0)])
    cfg = config()
    assert desirability(cfg, data, 2) > desirability(cfg, data, 1)
    assert decide_boin12(cfg, data) == TreatNextCohortAt(2)


def test_high_rate_deescalates():
    # 3/3 toxicities at dose 2 (rate 1 >= lam_d): move down to dose 1
    data = observed([(2, 0, 1, 0), (0, 3, 0, 0)])
    assert decide_boin12(config(), data) == TreatNextCohortAt(1)


def test_moves_never_skip_levels_upward():
    # even when a higher dose is far more desirable, candidates stay
    # within one level of the current dose
    data = observed([(0, 0, 3, 0), (0, 0, 0, 0), (0, 0, 0, 0)])
    action = decide_boin12(config(), data)
    assert isinstance(action, TreatNextCohortAt)
    assert action.dose <= 2


@settings(max_examples=60, deadline=None)
@given(
    cells=st.lists(
        st.tuples(
            st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)
        ),
        min_size=1,
        max_size=4,
    )
)
def test_next_dose_is_admissible_and_within_one_level(cells):
    data = observed(cells)
    if data.total_n == 0:
        return
    cfg = config(max_n=200, stop_at_n_on_dose=200)
    action = decide_boin12(cfg, data)
    if isinstance(action, TreatNextCohortAt):
        assert action.dose <= data.current_dose + 1
        admissible = boin12_admissible(data, 0.35, 0.25, 0.95, 0.90)
        assert action.dose in admissible


def test_no_admissible_dose_stops_without_selection():
    # lowest dose already unsafe rules out the whole ladder
    data = observed([(0, 3, 0, 0), (0, 0, 0, 0)])
    action = decide_boin12(config(), data)
    assert isinstance(action, StopNoSelection)


def test_stop_once_chosen_dose_is_saturated():
    # dose 1 is the only dose and already carries 12 patients
    data = observed([(6, 2, 4, 0)])
    action = decide_boin12(config(), data)
    assert isinstance(action, (StopAndSelect, StopNoSelection))
    assert action == StopAndSelect(1)


def test_selection_at_max_n_prefers_desirable_admissible():
    cfg = config(max_n=6)
    # dose 2 carries one toxicity (monotone-adjusted rate closest to
    # the 0.35 limit, so it is the estimated MTD) and clearly better
    # responses, so it out-scores dose 1
    data = observed([(1, 0, 2, 0), (2, 1, 0, 0)])
    assert desirability(cfg, data, 2) > desirability(cfg, data, 1)
    assert decide_boin12(cfg, data) == StopAndSelect(2)


def test_selection_mtd_tie_resolves_to_lower_dose():
    cfg = config(max_n=9)
    # equal adjusted toxicity at doses 1 and 2 ties the MTD estimate;
    # the conservative tie-break caps the pool at dose 1, so dose 2's
    # higher desirability cannot win
    data = observed([(1, 0, 2, 0), (3, 0, 0, 0), (0, 0, 0, 3)])
    assert desirability(cfg, data, 2) > desirability(cfg, data, 1)
    assert decide_boin12(cfg, data) == StopAndSelect(1)


def test_selection_respects_estimated_mtd():
    # heavy toxicity at dose 2 caps the selection pool at dose 1 even
    # though dose 2 had better responses
    cfg = config(max_n=9)
    data = observed([(1, 0, 5, 0), (1, 2, 0, 0)])
    action = decide_boin12(cfg, data)
    assert action == StopAndSelect(1)


def test_config_validation():
    with pytest.raises(ValueError):
        config(tox_limit=0.0)
    with pytest.raises(ValueError):
        config(eff_limit=1.0)
    with pytest.raises(ValueError):
        config(utility_benchmark=150.0)
    with pytest.raises(ValueError):
        config(stop_at_n_on_dose=0)
    with pytest.raises(ValueError):
        UtilityWeights(-1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        UtilityWeights(0.0, 0.0, 0.0, 0.0)

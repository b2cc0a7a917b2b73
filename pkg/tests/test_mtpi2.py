"""Interval-based design: tiling geometry, decision table, exclusion.

The decision oracle below rebuilds the unit-probability-mass rule from
scratch: tiles found by direct arithmetic, Beta masses by the
binomial-sum identity, argmax by linear scan.  It shares no code with
the implementation.
"""

from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from posim.designs.base import (
    ObservedData,
    StopAndSelect,
    StopNoSelection,
    TreatNextCohortAt,
)
from posim.designs.mtpi2 import (
    IntervalDecision,
    Mtpi2Config,
    decide_mtpi2,
    interval_tiling,
    mtpi2_decision,
)

TARGET, MB, MA = 0.30, 0.05, 0.05


def config(**kw) -> Mtpi2Config:
    base = dict(target=TARGET, max_n=30, cohort_size=3)
    base.update(kw)
    return Mtpi2Config(**base)


def observed(n_at: list[int], tox_at: list[int], order: list[int] | None = None):
    """Build observed data; ``order`` fixes the current (last) dose."""
    data = ObservedData(n_doses=len(n_at), has_efficacy=False)
    doses = order if order is not None else [
        d for d in range(1, len(n_at) + 1) for _ in range(n_at[d - 1])
    ]
    remaining_tox = list(tox_at)
    patient = 0
    for dose in doses:
        tox = 1 if remaining_tox[dose - 1] > 0 else 0
        remaining_tox[dose - 1] -= tox
        data.add(patient, dose, tox, None)
        patient += 1
    return data


def beta_cdf_oracle(a: int, b: int, x: Fraction) -> Fraction:
    n = a + b - 1
    return sum(
        Fraction(math.comb(n, k)) * x**k * (1 - x) ** (n - k)
        for k in range(a, n + 1)
    )


def decision_oracle(target: Fraction, mb: Fraction, ma: Fraction, n: int, tox: int):
    """Rebuild tiling and UPM argmax in exact rational arithmetic."""
    width = mb + ma
    # tile edges descending from the equivalence interval to 0
    edges = []
    lo = target - mb
    while lo > 0:
        edges.append(lo)
        lo -= width
    edges = [Fraction(0)] + sorted(edges)
    hi = target + ma
    while hi < 1:
        edges.append(hi)
        hi += width
    edges.append(Fraction(1))
    tiles = list(zip(edges, edges[1:]))
    a, b = 1 + tox, 1 + n - tox
    best_upm, best_mid = None, None
    for lo, hi in tiles:
        upm = (beta_cdf_oracle(a, b, hi) - beta_cdf_oracle(a, b, lo)) / (hi - lo)
        # ties resolve toward the higher-toxicity tile
        if best_upm is None or upm > best_upm or upm == best_upm:
            best_upm, best_mid = upm, (lo + hi) / 2
    if best_mid < target - mb:
        return IntervalDecision.ESCALATE
    if best_mid > target + ma:
        return IntervalDecision.DEESCALATE
    return IntervalDecision.STAY


# ---------------------------------------------------------------------------
# tiling geometry


def test_tiling_structure_for_default_target():
    tiles = interval_tiling(TARGET, MB, MA)
    assert tiles == (
        (0.0, pytest.approx(0.05), -3),
        (pytest.approx(0.05), pytest.approx(0.15), -2),
        (pytest.approx(0.15), pytest.approx(0.25), -1),
        (pytest.approx(0.25), pytest.approx(0.35), 0),
        (pytest.approx(0.35), pytest.approx(0.45), 1),
        (pytest.approx(0.45), pytest.approx(0.55), 2),
        (pytest.approx(0.55), pytest.approx(0.65), 3),
        (pytest.approx(0.65), pytest.approx(0.75), 4),
        (pytest.approx(0.75), pytest.approx(0.85), 5),
        (pytest.approx(0.85), pytest.approx(0.95), 6),
        (pytest.approx(0.95), 1.0, 7),
    )


@given(
    target=st.floats(min_value=0.1, max_value=0.9),
    mb=st.floats(min_value=0.01, max_value=0.09),
    ma=st.floats(min_value=0.01, max_value=0.09),
)
def test_tiling_covers_unit_interval(target, mb, ma):
    if target - mb <= 0.0 or target + ma >= 1.0:
        return
    tiles = interval_tiling(target, mb, ma)
    assert tiles[0][0] == 0.0
    assert tiles[-1][1] == 1.0
    for (_, hi_prev, _), (lo, _, _) in zip(tiles, tiles[1:]):
        assert hi_prev == pytest.approx(lo, abs=1e-12)
    inner = [t for t in tiles if t[2] == 0]
    assert len(inner) == 1
    assert inner[0][0] == pytest.approx(target - mb, abs=1e-12)
    assert inner[0][1] == pytest.approx(target + ma, abs=1e-12)
    positions = [t[2] for t in tiles]
    assert positions == sorted(positions)


# ---------------------------------------------------------------------------
# decision table


def test_decision_hand_cases():
    assert mtpi2_decision(TARGET, MB, MA, 3, 0) is IntervalDecision.ESCALATE
    assert mtpi2_decision(TARGET, MB, MA, 3, 1) is IntervalDecision.STAY
    assert mtpi2_decision(TARGET, MB, MA, 3, 2) is IntervalDecision.DEESCALATE
    assert mtpi2_decision(TARGET, MB, MA, 3, 3) is IntervalDecision.DEESCALATE


def test_decision_table_matches_oracle_exhaustively():
    target, mb, ma = Fraction(3, 10), Fraction(1, 20), Fraction(1, 20)
    for n in range(1, 31):
        for tox in range(n + 1):
            expected = decision_oracle(target, mb, ma, n, tox)
            got = mtpi2_decision(TARGET, MB, MA, n, tox)
            assert got is expected, f"n={n} tox={tox}: {got} != {expected}"


def test_decision_table_asymmetric_margins():
    target, mb, ma = Fraction(1, 4), Fraction(1, 10), Fraction(1, 20)
    for n in range(1, 19):
        for tox in range(n + 1):
            expected = decision_oracle(target, mb, ma, n, tox)
            got = mtpi2_decision(0.25, 0.10, 0.05, n, tox)
            assert got is expected, f"n={n} tox={tox}: {got} != {expected}"


def test_decision_mirror_symmetry_at_half():
    # with a symmetric tiling around 0.5, swapping events and
    # non-events must mirror escalate and de-escalate
    for n in range(1, 25):
        for tox in range(n + 1):
            fwd = mtpi2_decision(0.5, 0.05, 0.05, n, tox)
            rev = mtpi2_decision(0.5, 0.05, 0.05, n, n - tox)
            if fwd is IntervalDecision.ESCALATE:
                assert rev is IntervalDecision.DEESCALATE
            elif fwd is IntervalDecision.DEESCALATE:
                assert rev is IntervalDecision.ESCALATE
            else:
                assert rev is IntervalDecision.STAY


def test_decision_monotone_in_toxicities():
    rank = {
        IntervalDecision.ESCALATE: 0,
        IntervalDecision.STAY: 1,
        IntervalDecision.DEESCALATE: 2,
    }
    for n in range(1, 31):
        decisions = [mtpi2_decision(TARGET, MB, MA, n, t) for t in range(n + 1)]
        ranks = [rank[d] for d in decisions]
        assert ranks == sorted(ranks), f"non-monotone at n={n}"


def test_decision_validation():
    with pytest.raises(ValueError):
        mtpi2_decision(TARGET, MB, MA, 0, 0)
    with pytest.raises(ValueError):
        mtpi2_decision(TARGET, MB, MA, 3, 4)


# ---------------------------------------------------------------------------
# trial decisions


def test_first_cohort_at_start_dose():
    data = ObservedData(n_doses=4, has_efficacy=False)
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(1)


def test_escalate_stay_deescalate_moves():
    assert decide_mtpi2(config(), observed([3, 0, 0], [0, 0, 0])) == (
        TreatNextCohortAt(2)
    )
    assert decide_mtpi2(config(), observed([3, 0, 0], [1, 0, 0])) == (
        TreatNextCohortAt(1)
    )
    data = observed([3, 3, 0], [0, 2, 0])
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(1)


def test_escalation_clips_at_top_dose():
    data = observed([3, 3, 3], [0, 0, 0])
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(3)


def test_deescalation_clips_at_bottom_dose():
    data = observed([3, 0, 0], [2, 0, 0])
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(1)


def test_exclusion_blocks_escalation():
    # dose 2 excluded (3/3), current dose 1 wants to escalate but may not
    data = observed([3, 3, 0], [0, 3, 0], order=[2, 2, 2, 1, 1, 1])
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(1)


def test_exclusion_at_lowest_dose_stops_trial():
    action = decide_mtpi2(config(), observed([3, 0, 0], [3, 0, 0]))
    assert isinstance(action, StopNoSelection)


def test_current_dose_excluded_steps_below():
    # 4/6 at dose 3 excludes it while the trial sits there
    data = observed([3, 3, 6], [0, 0, 4])
    assert decide_mtpi2(config(), data) == TreatNextCohortAt(2)


def test_selection_uses_isotonic_means_closest_to_target():
    cfg = config(max_n=12)
    data = observed([3, 6, 3], [0, 1, 1])
    action = decide_mtpi2(cfg, data)
    # isotonic means: (1/5, 2/8, 2/5) = (0.2, 0.25, 0.4); dose 2 is
    # uniquely closest to the 0.3 target
    assert action == StopAndSelect(2)


def test_selection_tie_breaks_low():
    cfg = config(max_n=6)
    data = observed([3, 3], [0, 1])
    action = decide_mtpi2(cfg, data)
    # posterior means (0.2, 0.4) sit symmetrically around the target;
    # the tie resolves to the lower dose
    assert action == StopAndSelect(1)


def test_selection_excludes_unsafe_doses():
    cfg = config(max_n=12)
    data = observed([3, 6, 3], [0, 1, 3])
    action = decide_mtpi2(cfg, data)
    # dose 3 is excluded (3/3); means at 1 and 2 are (0.2, 0.25), so
    # dose 2 wins
    assert action == StopAndSelect(2)


def test_selection_with_no_admissible_dose():
    cfg = config(max_n=3)
    action = decide_mtpi2(cfg, observed([3, 0, 0], [3, 0, 0]))
    assert isinstance(action, StopNoSelection)


def test_config_validation():
    with pytest.raises(ValueError):
        config(target=0.04)  # interval would cross zero
    with pytest.raises(ValueError):
        config(target=0.97)
    with pytest.raises(ValueError):
        config(margin_below=0.0)
    with pytest.raises(ValueError):
        config(exclusion_threshold=1.5)

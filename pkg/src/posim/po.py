"""Potential-outcome generation for simulated dose-finding trials.

Every virtual patient carries a latent toxicity uniform (and, for trials
with an efficacy endpoint, a correlated efficacy uniform).  Comparing a
latent uniform against the true dose-response curve yields the patient's
binary outcome at every dose level before any design decisions are made,
so competing designs can be replayed over identical patients.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

TOX_ENDPOINT = 0
EFF_ENDPOINT = 1

_MAX_SEED = 2**64
_MAX_TRIAL_INDEX = 2**62
# Smallest/largest doubles inside the open unit interval, used to keep
# generated uniforms away from the endpoints where the threshold rule
# and the probit transform degenerate.
_U_LO = np.nextafter(0.0, 1.0)
_U_HI = np.nextafter(1.0, 0.0)

_FORMAT_TAG = "posim-po-dataset v1"


@dataclass(frozen=True)
class DoseCurve:
    """True per-dose event probabilities for one endpoint.

    Args:
        probs: Probability of the event at each dose level, ordered from
            lowest to highest dose.
        monotone: Whether the curve is required to be non-decreasing in
            dose.  Toxicity curves must be monotone; efficacy curves may
            take any shape (for example umbrella-shaped).
    """

    probs: tuple[float, ...]
    monotone: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.probs) == 0:
            raise ValueError("dose curve needs at least one dose level")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"dose curve entry {p} outside [0, 1]")
        if self.monotone and any(
            b < a for a, b in zip(self.probs, self.probs[1:])
        ):
            raise ValueError("monotone dose curve must be non-decreasing")

    def __len__(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


@dataclass(frozen=True)
class LatentPatient:
    """Latent draws that determine one patient's outcomes at every dose."""

    u_tox: float
    u_eff: float | None = None
    theta_tox: float | None = None
    theta_eff: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.u_tox < 1.0:
            raise ValueError("u_tox must lie strictly inside (0, 1)")
        if self.u_eff is not None and not 0.0 < self.u_eff < 1.0:
            raise ValueError("u_eff must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation configuration.

    Args:
        tox_curve: Monotone true toxicity curve.
        eff_curve: True efficacy curve, or None for toxicity-only trials.
        rho: Latent Gaussian correlation between the toxicity and
            efficacy uniforms of a patient.
        max_n: Number of patients pre-generated per trial (the trial's
            maximum sample size).
        cohort_size: Default cohort size for designs run on this scenario.
        n_trials: Number of independent trials in the simulation batch.
        master_seed: Root seed; together with a trial index it fully
            determines every latent draw.
    """

    tox_curve: DoseCurve
    eff_curve: DoseCurve | None
    rho: float
    max_n: int
    cohort_size: int
    n_trials: int
    master_seed: int

    def __post_init__(self) -> None:
        if not self.tox_curve.monotone:
            raise ValueError("toxicity curve must be tagged monotone")
        if self.eff_curve is not None and len(self.eff_curve) != len(self.tox_curve):
            raise ValueError("toxicity and efficacy curves must cover the same doses")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"correlation rho={self.rho} outside [-1, 1]")
        if self.eff_curve is None and self.rho != 0.0:
            raise ValueError("rho is meaningless without an efficacy curve")
        if self.max_n < 1:
            raise ValueError("max_n must be at least 1")
        if self.cohort_size < 1:
            raise ValueError("cohort_size must be at least 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not 0 <= self.master_seed < _MAX_SEED:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    @property
    def n_doses(self) -> int:
        return len(self.tox_curve)


def derive_patient_stream(
    master_seed: int, trial_index: int, endpoint: int = TOX_ENDPOINT
) -> np.random.Generator:
    """Return the random stream for one trial and endpoint.

    The stream is a counter-based generator keyed on the identifiers, so
    the draw at position ``i`` is a pure function of
    ``(master_seed, trial_index, i, endpoint)``: patient ``i`` always
    reads position ``i``, regardless of how many other trials were
    generated before, after, or in parallel.
    """
    if not 0 <= master_seed < _MAX_SEED:
        raise ValueError("master_seed must fit in an unsigned 64-bit integer")
    if not 0 <= trial_index < _MAX_TRIAL_INDEX:
        raise ValueError(f"trial_index {trial_index} out of range")
    if endpoint not in (TOX_ENDPOINT, EFF_ENDPOINT):
        raise ValueError(f"unknown endpoint code {endpoint}")
    key = np.array(
        [master_seed, (np.uint64(endpoint) << np.uint64(62)) | np.uint64(trial_index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _latent_arrays(
    scenario: Scenario, trial_index: int
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None, np.ndarray | None]:
    """Vectorised latent draws for all max_n patients of one trial."""
    n = scenario.max_n
    if scenario.eff_curve is None:
        stream = derive_patient_stream(scenario.master_seed, trial_index, TOX_ENDPOINT)
        u_tox = np.clip(stream.random(n), _U_LO, _U_HI)
        return u_tox, None, None, None

    tox_stream = derive_patient_stream(scenario.master_seed, trial_index, TOX_ENDPOINT)
    eff_stream = derive_patient_stream(scenario.master_seed, trial_index, EFF_ENDPOINT)
    # Inverse-CDF normals: patient i's draw consumes exactly the i-th
    # word of its stream, so each latent is a pure function of
    # (master_seed, trial_index, patient, endpoint).
    theta_tox = ndtri(np.clip(tox_stream.random(n), _U_LO, _U_HI))
    z2 = ndtri(np.clip(eff_stream.random(n), _U_LO, _U_HI))
    theta_eff = scenario.rho * theta_tox + math.sqrt(1.0 - scenario.rho**2) * z2
    u_tox = np.clip(ndtr(theta_tox), _U_LO, _U_HI)
    u_eff = np.clip(ndtr(theta_eff), _U_LO, _U_HI)
    return u_tox, u_eff, theta_tox, theta_eff


def generate_latents(scenario: Scenario, trial_index: int) -> list[LatentPatient]:
    """Generate the latent draws for every patient of one trial.

    With an efficacy curve present, each patient receives a pair of
    standard normals with correlation ``scenario.rho`` (a Gaussian
    copula); the probit transform of each coordinate is the patient's
    uniform for that endpoint, so both uniforms are marginally uniform
    while sharing the requested dependence.
    """
    u_tox, u_eff, theta_tox, theta_eff = _latent_arrays(scenario, trial_index)
    if u_eff is None:
        return [LatentPatient(u_tox=float(u)) for u in u_tox]
    return [
        LatentPatient(
            u_tox=float(u_tox[i]),
            u_eff=float(u_eff[i]),
            theta_tox=float(theta_tox[i]),
            theta_eff=float(theta_eff[i]),
        )
        for i in range(len(u_tox))
    ]


def generate_tox_po(u_tox: float, curve: DoseCurve) -> np.ndarray:
    """Toxicity potential outcomes of one patient at every dose.

    The outcome at dose ``d`` is 1 exactly when the true toxicity
    probability at ``d`` is at least the patient's latent uniform, so a
    monotone curve yields a monotone non-decreasing outcome row.
    """
    if not curve.monotone:
        raise ValueError("toxicity potential outcomes need a monotone curve")
    if not 0.0 < u_tox < 1.0:
        raise ValueError("u_tox must lie strictly inside (0, 1)")
    return (curve.as_array() >= u_tox).astype(np.uint8)


def generate_eff_po(u_eff: float, curve: DoseCurve) -> np.ndarray:
    """Efficacy potential outcomes of one patient at every dose.

    Same threshold rule as for toxicity, but the curve may have any
    shape, so the row need not be monotone.
    """
    if not 0.0 < u_eff < 1.0:
        raise ValueError("u_eff must lie strictly inside (0, 1)")
    return (curve.as_array() >= u_eff).astype(np.uint8)


def _po_matrix(u: np.ndarray, curve: DoseCurve) -> np.ndarray:
    return (curve.as_array()[None, :] >= u[:, None]).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class PoDataset:
    """All potential outcomes for the patients of one simulated trial.

    Rows are patients in enrolment order, columns are dose levels.  The
    matrices are fully determined by the latent uniforms and the true
    curves; the ``fingerprint`` digest binds the matrices to the scenario
    and seed material that produced them.

    The latent normals ``theta_tox``/``theta_eff`` are generation
    by-products kept for diagnostics.  They are not part of the
    serialised identity of the dataset and are absent after a round trip
    through :mod:`posim.po_io`.
    """

    master_seed: int
    trial_index: int
    tox_curve: DoseCurve
    eff_curve: DoseCurve | None
    rho: float
    u_tox: np.ndarray
    u_eff: np.ndarray | None
    tox_po: np.ndarray
    eff_po: np.ndarray | None
    theta_tox: np.ndarray | None = None
    theta_eff: np.ndarray | None = None
    fingerprint: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        u_tox = np.asarray(self.u_tox, dtype=np.float64)
        tox_po = np.asarray(self.tox_po, dtype=np.uint8)
        object.__setattr__(self, "u_tox", u_tox)
        object.__setattr__(self, "tox_po", tox_po)
        if self.u_eff is not None:
            object.__setattr__(self, "u_eff", np.asarray(self.u_eff, dtype=np.float64))
        if self.eff_po is not None:
            object.__setattr__(self, "eff_po", np.asarray(self.eff_po, dtype=np.uint8))
        if self.theta_tox is not None:
            object.__setattr__(
                self, "theta_tox", np.asarray(self.theta_tox, dtype=np.float64)
            )
        if self.theta_eff is not None:
            object.__setattr__(
                self, "theta_eff", np.asarray(self.theta_eff, dtype=np.float64)
            )
        self._validate()
        object.__setattr__(self, "fingerprint", dataset_fingerprint(self))
        for arr in (
            self.u_tox,
            self.u_eff,
            self.tox_po,
            self.eff_po,
            self.theta_tox,
            self.theta_eff,
        ):
            if arr is not None:
                arr.setflags(write=False)

    def _validate(self) -> None:
        n, d = self.tox_po.shape if self.tox_po.ndim == 2 else (-1, -1)
        if n < 0:
            raise ValueError("tox_po must be a 2-d matrix")
        if len(self.tox_curve) != d:
            raise ValueError("tox_po width does not match the toxicity curve")
        if self.u_tox.shape != (n,):
            raise ValueError("u_tox length does not match tox_po")
        if not 0 <= self.master_seed < _MAX_SEED:
            raise ValueError("master_seed out of range")
        if not 0 <= self.trial_index < _MAX_TRIAL_INDEX:
            raise ValueError("trial_index out of range")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho outside [-1, 1]")
        if np.any(self.u_tox <= 0.0) or np.any(self.u_tox >= 1.0):
            raise ValueError("u_tox values must lie strictly inside (0, 1)")
        expected_tox = _po_matrix(self.u_tox, self.tox_curve)
        if not np.array_equal(self.tox_po, expected_tox):
            raise ValueError("tox_po is inconsistent with the threshold rule")
        if (self.eff_po is None) != (self.eff_curve is None) or (
            self.eff_po is None
        ) != (self.u_eff is None):
            raise ValueError("efficacy fields must all be present or all absent")
        if self.eff_po is not None:
            if self.eff_po.shape != (n, len(self.eff_curve)):
                raise ValueError("eff_po shape does not match")
            if len(self.eff_curve) != d:
                raise ValueError("efficacy curve width does not match")
            if self.u_eff.shape != (n,):
                raise ValueError("u_eff length does not match eff_po")
            if np.any(self.u_eff <= 0.0) or np.any(self.u_eff >= 1.0):
                raise ValueError("u_eff values must lie strictly inside (0, 1)")
            expected_eff = _po_matrix(self.u_eff, self.eff_curve)
            if not np.array_equal(self.eff_po, expected_eff):
                raise ValueError("eff_po is inconsistent with the threshold rule")

    @property
    def n_patients(self) -> int:
        return self.tox_po.shape[0]

    @property
    def n_doses(self) -> int:
        return self.tox_po.shape[1]

    @property
    def patients(self) -> list[LatentPatient]:
        if self.u_eff is None:
            return [LatentPatient(u_tox=float(u)) for u in self.u_tox]
        return [
            LatentPatient(
                u_tox=float(self.u_tox[i]),
                u_eff=float(self.u_eff[i]),
                theta_tox=None if self.theta_tox is None else float(self.theta_tox[i]),
                theta_eff=None if self.theta_eff is None else float(self.theta_eff[i]),
            )
            for i in range(self.n_patients)
        ]

    def outcome(self, patient: int, dose: int) -> tuple[int, int | None]:
        """Observed (toxicity, efficacy) if ``patient`` is treated at ``dose``.

        Patients are 0-based stream positions; doses are 1-based,
        matching design decisions.
        """
        if not 0 <= patient < self.n_patients:
            raise ValueError(f"patient {patient} outside 0..{self.n_patients - 1}")
        if not 1 <= dose <= self.n_doses:
            raise ValueError(f"dose {dose} outside 1..{self.n_doses}")
        tox = int(self.tox_po[patient, dose - 1])
        eff = None if self.eff_po is None else int(self.eff_po[patient, dose - 1])
        return tox, eff

    def content_equals(self, other: "PoDataset") -> bool:
        """Equality over the serialised identity (latent normals excluded)."""
        return self.fingerprint == other.fingerprint and canonical_lines(
            self
        ) == canonical_lines(other)


def canonical_lines(dataset: PoDataset) -> list[str]:
    """Canonical text form of a dataset, excluding the fingerprint line.

    Floats are rendered with ``repr`` so parsing them back yields the
    same double, which makes the digest a function of the stored values
    rather than of any particular formatting.
    """
    eff_curve = (
        "-"
        if dataset.eff_curve is None
        else " ".join(repr(float(p)) for p in dataset.eff_curve.probs)
    )
    lines = [
        _FORMAT_TAG,
        f"master_seed: {dataset.master_seed}",
        f"trial_index: {dataset.trial_index}",
        f"doses: {dataset.n_doses}",
        f"patients: {dataset.n_patients}",
        "tox_curve: " + " ".join(repr(float(p)) for p in dataset.tox_curve.probs),
        f"eff_curve: {eff_curve}",
        f"rho: {float(dataset.rho)!r}",
    ]
    has_eff = dataset.eff_po is not None
    for i in range(dataset.n_patients):
        tox_bits = "".join(map(str, dataset.tox_po[i].tolist()))
        if has_eff:
            u_eff = repr(float(dataset.u_eff[i]))
            eff_bits = "".join(map(str, dataset.eff_po[i].tolist()))
        else:
            u_eff = "-"
            eff_bits = "-"
        lines.append(
            f"{i} {float(dataset.u_tox[i])!r} {u_eff} {tox_bits} {eff_bits}"
        )
    return lines


def dataset_fingerprint(dataset: PoDataset) -> str:
    """SHA-256 digest of the canonical content of a dataset."""
    payload = "\n".join(canonical_lines(dataset)).encode("ascii")
    return hashlib.sha256(payload).hexdigest()


def dataset_from_latents(
    master_seed: int,
    trial_index: int,
    tox_curve: DoseCurve,
    eff_curve: DoseCurve | None,
    rho: float,
    u_tox: np.ndarray,
    u_eff: np.ndarray | None = None,
    theta_tox: np.ndarray | None = None,
    theta_eff: np.ndarray | None = None,
) -> PoDataset:
    """Build a dataset by applying the threshold rule to given latents."""
    u_tox = np.asarray(u_tox, dtype=np.float64)
    tox_po = _po_matrix(u_tox, tox_curve)
    eff_po = None
    if eff_curve is not None:
        if u_eff is None:
            raise ValueError("u_eff is required when an efficacy curve is present")
        u_eff = np.asarray(u_eff, dtype=np.float64)
        eff_po = _po_matrix(u_eff, eff_curve)
    elif u_eff is not None:
        raise ValueError("u_eff given without an efficacy curve")
    return PoDataset(
        master_seed=master_seed,
        trial_index=trial_index,
        tox_curve=tox_curve,
        eff_curve=eff_curve,
        rho=rho,
        u_tox=u_tox,
        u_eff=u_eff,
        tox_po=tox_po,
        eff_po=eff_po,
        theta_tox=theta_tox,
        theta_eff=theta_eff,
    )


def generate_dataset(scenario: Scenario, trial_index: int) -> PoDataset:
    """Generate the full potential-outcome dataset for one trial."""
    u_tox, u_eff, theta_tox, theta_eff = _latent_arrays(scenario, trial_index)
    return dataset_from_latents(
        master_seed=scenario.master_seed,
        trial_index=trial_index,
        tox_curve=scenario.tox_curve,
        eff_curve=scenario.eff_curve,
        rho=scenario.rho,
        u_tox=u_tox,
        u_eff=u_eff,
        theta_tox=theta_tox,
        theta_eff=theta_eff,
    )

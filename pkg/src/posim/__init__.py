"""Potential-outcome simulation for dose-finding trial designs.

The package pre-simulates every patient's binary outcome at every dose
(a potential-outcome dataset), replays competing adaptive escalation
designs over identical datasets, and reports paired performance
contrasts whose Monte Carlo error is far smaller than independent
replication would give at the same number of simulated trials.
"""

from posim.errors import (
    ConfigError,
    DesignRuntimeError,
    FingerprintError,
    PosimError,
)
from posim.po import (
    DoseCurve,
    LatentPatient,
    PoDataset,
    Scenario,
    derive_patient_stream,
    generate_dataset,
    generate_eff_po,
    generate_latents,
    generate_tox_po,
)
from posim.po_io import (
    deserialize_dataset,
    read_dataset,
    serialize_dataset,
    write_dataset,
)
from posim.runner import (
    SelectionIndicator,
    TrialResult,
    run_batch,
    run_trial,
    score_selection,
)
from posim.metrics import (
    ComparisonSummary,
    PairedIndicators,
    convergence_series,
    estimate_psi,
    indicator_correlation,
    relative_efficiency,
    summarize_independent,
    summarize_paired,
    var_delta_covariance,
    var_delta_difference,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DesignRuntimeError",
    "FingerprintError",
    "PosimError",
    "DoseCurve",
    "LatentPatient",
    "PoDataset",
    "Scenario",
    "derive_patient_stream",
    "generate_dataset",
    "generate_eff_po",
    "generate_latents",
    "generate_tox_po",
    "deserialize_dataset",
    "read_dataset",
    "serialize_dataset",
    "write_dataset",
    "SelectionIndicator",
    "TrialResult",
    "run_batch",
    "run_trial",
    "score_selection",
    "ComparisonSummary",
    "PairedIndicators",
    "convergence_series",
    "estimate_psi",
    "indicator_correlation",
    "relative_efficiency",
    "summarize_independent",
    "summarize_paired",
    "var_delta_covariance",
    "var_delta_difference",
    "__version__",
]

"""Run manifests: one file describing a complete simulation study.

Manifests are YAML mappings with three sections: ``scenario`` (the true
curves and trial sizes), ``designs`` (a list of design configurations,
each with a unique id), and optional ``dataset``/``output`` sections
controlling where datasets come from and where results go.  Unknown
keys are rejected so that typos fail loudly instead of silently running
with defaults.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from posim.designs import (
    Boin12Config,
    CrmConfig,
    DesignConfig,
    Mtpi2Config,
    ScriptedConfig,
    ThreePlusThreeConfig,
    UtilityWeights,
    describe,
)
from posim.errors import ConfigError
from posim.po import DoseCurve, Scenario

GENERATE = "generate"
LOAD = "load"


@dataclass(frozen=True)
class DesignSpec:
    """One design entry of a manifest: a unique id plus its config."""

    design_id: str
    config: DesignConfig


@dataclass(frozen=True)
class RunManifest:
    """Everything a simulation run needs, with defaults applied."""

    scenario: Scenario
    true_target_dose: int | None
    designs: tuple[DesignSpec, ...]
    dataset_source: str
    dataset_dir: Path | None
    output_dir: Path
    checkpoint: int

    def design(self, design_id: str) -> DesignSpec:
        for spec in self.designs:
            if spec.design_id == design_id:
                return spec
        known = ", ".join(spec.design_id for spec in self.designs)
        raise ConfigError(f"unknown design id '{design_id}' (have: {known})")


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required key '{key}' in {context}")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in {context}; allowed: {sorted(allowed)}"
        )


def _as_mapping(value, context: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{context} must be a mapping")
    return value


def _curve(value, monotone: bool, context: str) -> DoseCurve:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{context} must be a non-empty list of probabilities")
    try:
        return DoseCurve(tuple(float(v) for v in value), monotone=monotone)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {context}: {exc}") from exc


def _scenario(mapping: dict) -> tuple[Scenario, int | None]:
    mapping = _as_mapping(mapping, "scenario")
    _reject_unknown(
        mapping,
        {
            "tox_curve",
            "eff_curve",
            "rho",
            "max_n",
            "cohort_size",
            "n_trials",
            "master_seed",
            "true_target_dose",
        },
        "scenario",
    )
    tox_curve = _curve(_require(mapping, "tox_curve", "scenario"), True, "tox_curve")
    eff_curve = (
        _curve(mapping["eff_curve"], False, "eff_curve")
        if mapping.get("eff_curve") is not None
        else None
    )
    try:
        scenario = Scenario(
            tox_curve=tox_curve,
            eff_curve=eff_curve,
            rho=float(mapping.get("rho", 0.0)),
            max_n=int(_require(mapping, "max_n", "scenario")),
            cohort_size=int(mapping.get("cohort_size", 3)),
            n_trials=int(_require(mapping, "n_trials", "scenario")),
            master_seed=int(_require(mapping, "master_seed", "scenario")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario: {exc}") from exc
    target = mapping.get("true_target_dose")
    if target is not None:
        target = int(target)
        if not 1 <= target <= scenario.n_doses:
            raise ConfigError(
                f"true_target_dose {target} outside 1..{scenario.n_doses}"
            )
    return scenario, target


def _utility_weights(value, context: str) -> UtilityWeights:
    mapping = _as_mapping(value, context)
    allowed = {"eff_no_tox", "eff_tox", "no_eff_no_tox", "no_eff_tox"}
    _reject_unknown(mapping, allowed, context)
    defaults = UtilityWeights()
    try:
        return UtilityWeights(
            **{key: float(mapping.get(key, getattr(defaults, key))) for key in allowed}
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {context}: {exc}") from exc


_COMMON_KEYS = {"id", "kind"}


def _design_config(kind: str, mapping: dict, scenario: Scenario, context: str) -> DesignConfig:
    max_n = int(mapping.get("max_n", scenario.max_n))
    cohort = int(mapping.get("cohort_size", scenario.cohort_size))
    start = int(mapping.get("start_dose", 1))
    try:
        if kind == "crm":
            _reject_unknown(
                mapping,
                _COMMON_KEYS
                | {
                    "skeleton",
                    "target",
                    "prior_sd",
                    "stop_tox_threshold",
                    "max_n",
                    "cohort_size",
                    "start_dose",
                },
                context,
            )
            skeleton = _require(mapping, "skeleton", context)
            if not isinstance(skeleton, (list, tuple)):
                raise ConfigError(f"skeleton must be a list in {context}")
            return CrmConfig(
                skeleton=tuple(float(v) for v in skeleton),
                target=float(_require(mapping, "target", context)),
                prior_sd=float(mapping.get("prior_sd", 1.34)),
                stop_tox_threshold=float(mapping.get("stop_tox_threshold", 0.90)),
                max_n=max_n,
                cohort_size=cohort,
                start_dose=start,
            )
        if kind == "mtpi2":
            _reject_unknown(
                mapping,
                _COMMON_KEYS
                | {
                    "target",
                    "margin_below",
                    "margin_above",
                    "exclusion_threshold",
                    "max_n",
                    "cohort_size",
                    "start_dose",
                },
                context,
            )
            return Mtpi2Config(
                target=float(_require(mapping, "target", context)),
                margin_below=float(mapping.get("margin_below", 0.05)),
                margin_above=float(mapping.get("margin_above", 0.05)),
                exclusion_threshold=float(mapping.get("exclusion_threshold", 0.95)),
                max_n=max_n,
                cohort_size=cohort,
                start_dose=start,
            )
        if kind == "boin12":
            _reject_unknown(
                mapping,
                _COMMON_KEYS
                | {
                    "tox_limit",
                    "eff_limit",
                    "safety_threshold",
                    "futility_threshold",
                    "utility_weights",
                    "utility_benchmark",
                    "max_n",
                    "cohort_size",
                    "stop_at_n_on_dose",
                    "start_dose",
                },
                context,
            )
            weights = (
                _utility_weights(mapping["utility_weights"], f"{context}.utility_weights")
                if "utility_weights" in mapping
                else UtilityWeights()
            )
            return Boin12Config(
                tox_limit=float(mapping.get("tox_limit", 0.35)),
                eff_limit=float(mapping.get("eff_limit", 0.25)),
                safety_threshold=float(mapping.get("safety_threshold", 0.95)),
                futility_threshold=float(mapping.get("futility_threshold", 0.90)),
                utility_weights=weights,
                utility_benchmark=float(mapping.get("utility_benchmark", 60.0)),
                max_n=max_n,
                cohort_size=cohort,
                stop_at_n_on_dose=int(mapping.get("stop_at_n_on_dose", 12)),
                start_dose=start,
            )
        if kind == "three_plus_three":
            _reject_unknown(
                mapping, _COMMON_KEYS | {"n_doses", "start_dose"}, context
            )
            return ThreePlusThreeConfig(
                n_doses=int(mapping.get("n_doses", scenario.n_doses)),
                start_dose=start,
            )
        if kind == "scripted":
            _reject_unknown(
                mapping,
                _COMMON_KEYS
                | {"doses", "cohort_size", "n_doses", "final_selection"},
                context,
            )
            doses = _require(mapping, "doses", context)
            if not isinstance(doses, (list, tuple)):
                raise ConfigError(f"doses must be a list in {context}")
            final = mapping.get("final_selection")
            return ScriptedConfig(
                doses=tuple(int(d) for d in doses),
                cohort_size=cohort,
                n_doses=int(mapping.get("n_doses", scenario.n_doses)),
                final_selection=None if final is None else int(final),
            )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad design config in {context}: {exc}") from exc
    raise ConfigError(
        f"unknown design kind '{kind}' in {context}; expected one of "
        "crm, mtpi2, boin12, three_plus_three, scripted"
    )


def _designs(value, scenario: Scenario) -> tuple[DesignSpec, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("designs must be a non-empty list")
    specs = []
    seen = set()
    for position, entry in enumerate(value):
        context = f"designs[{position}]"
        entry = _as_mapping(entry, context)
        design_id = str(_require(entry, "id", context))
        if design_id in seen:
            raise ConfigError(f"duplicate design id '{design_id}'")
        seen.add(design_id)
        kind = str(_require(entry, "kind", context))
        specs.append(DesignSpec(design_id, _design_config(kind, entry, scenario, context)))
    return tuple(specs)


def parse_manifest(document: dict, base_dir: Path | None = None) -> RunManifest:
    """Build a validated manifest from a parsed YAML document."""
    document = _as_mapping(document, "manifest")
    _reject_unknown(document, {"scenario", "designs", "dataset", "output"}, "manifest")
    scenario, true_target = _scenario(_require(document, "scenario", "manifest"))
    designs = _designs(_require(document, "designs", "manifest"), scenario)

    dataset = _as_mapping(document.get("dataset", {}), "dataset")
    _reject_unknown(dataset, {"source", "directory"}, "dataset")
    source = str(dataset.get("source", GENERATE))
    if source not in (GENERATE, LOAD):
        raise ConfigError(f"dataset source must be '{GENERATE}' or '{LOAD}'")
    directory = dataset.get("directory")
    if source == LOAD and directory is None:
        raise ConfigError("dataset source 'load' needs a directory")

    output = _as_mapping(document.get("output", {}), "output")
    _reject_unknown(output, {"directory", "checkpoint"}, "output")
    checkpoint = output.get("checkpoint", 1000)
    if not isinstance(checkpoint, int) or checkpoint < 1:
        raise ConfigError("output checkpoint cadence must be a positive integer")

    base = base_dir if base_dir is not None else Path.cwd()

    def _resolve(p) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    return RunManifest(
        scenario=scenario,
        true_target_dose=true_target,
        designs=designs,
        dataset_source=source,
        dataset_dir=None if directory is None else _resolve(directory),
        output_dir=_resolve(output.get("directory", "out")),
        checkpoint=checkpoint,
    )


def load_manifest(path: str | Path) -> RunManifest:
    """Parse a manifest file, resolving relative paths against it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"manifest {path} is not valid YAML: {exc}") from exc
    return parse_manifest(document, base_dir=path.resolve().parent)


def scenario_digest(scenario: Scenario) -> str:
    """Short stable digest identifying a scenario in audit output."""
    eff = (
        "-"
        if scenario.eff_curve is None
        else " ".join(repr(p) for p in scenario.eff_curve.probs)
    )
    payload = "|".join(
        [
            " ".join(repr(p) for p in scenario.tox_curve.probs),
            eff,
            repr(scenario.rho),
            str(scenario.max_n),
            str(scenario.cohort_size),
            str(scenario.n_trials),
            str(scenario.master_seed),
        ]
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]


def effective_settings(manifest: RunManifest) -> list[tuple[str, str]]:
    """Flat (key, value) pairs of the fully resolved run configuration.

    Paths are excluded so rendered output is byte-identical wherever
    the run happens to live on disk.
    """
    scenario = manifest.scenario
    pairs: list[tuple[str, str]] = [
        ("scenario_digest", scenario_digest(scenario)),
        ("tox_curve", " ".join(repr(p) for p in scenario.tox_curve.probs)),
        (
            "eff_curve",
            "-"
            if scenario.eff_curve is None
            else " ".join(repr(p) for p in scenario.eff_curve.probs),
        ),
        ("rho", repr(scenario.rho)),
        ("max_n", str(scenario.max_n)),
        ("cohort_size", str(scenario.cohort_size)),
        ("n_trials", str(scenario.n_trials)),
        ("master_seed", str(scenario.master_seed)),
        (
            "true_target_dose",
            "-" if manifest.true_target_dose is None else str(manifest.true_target_dose),
        ),
        ("dataset_source", manifest.dataset_source),
    ]
    for spec in manifest.designs:
        info = describe(spec.config)
        rendered = " ".join(f"{k}={_render(v)}" for k, v in sorted(info.items()))
        pairs.append((f"design.{spec.design_id}", rendered))
    return pairs


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_render(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(f"{k}:{_render(v)}" for k, v in sorted(value.items())) + "}"
    return str(value)

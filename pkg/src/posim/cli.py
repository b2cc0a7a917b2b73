"""Command-line interface for generating datasets and replaying designs.

Subcommands:
    generate         write potential-outcome dataset files plus an index
    run              run one design over the scenario's trials
    compare          contrast two designs, paired or independent
    po-matrix        render one trial's potential-outcome matrix
    describe-design  print a design's fully resolved parameters

All output files are deterministic functions of the manifest and the
command flags: worker parallelism (``--threads``) changes wall time
only, never bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import functools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from posim.designs import DesignConfig, describe
from posim.errors import ConfigError, DesignRuntimeError, FingerprintError, PosimError
from posim.manifest import (
    LOAD,
    DesignSpec,
    RunManifest,
    effective_settings,
    load_manifest,
    scenario_digest,
)
from posim.metrics import (
    ComparisonSummary,
    PairedIndicators,
    convergence_series,
    estimate_psi,
    summarize_independent,
    summarize_paired,
)
from posim.po import PoDataset, Scenario, generate_dataset
from posim.po_io import read_dataset, write_dataset
from posim.runner import TrialResult, run_trial, score_selection

_DATASET_FILE = "po_{index:06d}.txt"
_INDEX_FILE = "index.tsv"


def _dataset_path(directory: Path, trial_index: int) -> Path:
    return directory / _DATASET_FILE.format(index=trial_index)


def _check_scenario_binding(dataset: PoDataset, scenario: Scenario, where: str) -> None:
    """Reject datasets generated under a different scenario."""
    mismatches = []
    if dataset.master_seed != scenario.master_seed:
        mismatches.append("master_seed")
    if dataset.tox_curve != scenario.tox_curve:
        mismatches.append("tox_curve")
    if dataset.eff_curve != scenario.eff_curve:
        mismatches.append("eff_curve")
    if dataset.rho != scenario.rho:
        mismatches.append("rho")
    if dataset.n_patients != scenario.max_n:
        mismatches.append("max_n")
    if mismatches:
        raise FingerprintError(
            f"{where} does not match the manifest scenario "
            f"(differs in: {', '.join(mismatches)})"
        )


def _load_dataset(directory: Path, scenario: Scenario, trial_index: int) -> PoDataset:
    path = _dataset_path(directory, trial_index)
    if not path.exists():
        raise FingerprintError(f"missing dataset file {path}")
    dataset = read_dataset(path)
    if dataset.trial_index != trial_index:
        raise FingerprintError(
            f"{path} claims trial {dataset.trial_index}, expected {trial_index}"
        )
    _check_scenario_binding(dataset, scenario, str(path))
    return dataset


def _obtain_dataset(
    scenario: Scenario, trial_index: int, dataset_dir: Path | None
) -> PoDataset:
    if dataset_dir is None:
        return generate_dataset(scenario, trial_index)
    return _load_dataset(dataset_dir, scenario, trial_index)


# ---------------------------------------------------------------------------
# parallel workers (top level so they pickle under ProcessPoolExecutor)

def _chunk_run(
    indices: list[int],
    scenario: Scenario,
    configs: tuple[DesignConfig, ...],
    design_ids: tuple[str, ...],
    dataset_dir: Path | None,
) -> list[tuple[TrialResult, ...]]:
    """Run every design over each trial of one chunk."""
    out = []
    for trial_index in indices:
        dataset = _obtain_dataset(scenario, trial_index, dataset_dir)
        out.append(
            tuple(
                run_trial(config, dataset, design_id)
                for config, design_id in zip(configs, design_ids)
            )
        )
    return out


def _chunk_generate(
    indices: list[int], scenario: Scenario, directory: Path
) -> list[tuple[int, str, str]]:
    """Generate and write datasets for one chunk of trial indices."""
    rows = []
    for trial_index in indices:
        dataset = generate_dataset(scenario, trial_index)
        path = _dataset_path(directory, trial_index)
        write_dataset(dataset, path)
        rows.append((trial_index, path.name, dataset.fingerprint))
    return rows


def _split_chunks(indices: list[int], threads: int) -> list[list[int]]:
    """Contiguous chunks, at most ``threads`` of them, none empty."""
    n_chunks = max(1, min(threads, len(indices)))
    size, extra = divmod(len(indices), n_chunks)
    chunks, at = [], 0
    for i in range(n_chunks):
        take = size + (1 if i < extra else 0)
        chunks.append(indices[at : at + take])
        at += take
    return chunks


def _parallel(worker, chunks: list[list[int]], threads: int) -> list:
    if threads <= 1 or len(chunks) <= 1:
        batches = [worker(chunk) for chunk in chunks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(worker, chunks))
    merged = []
    for batch in batches:
        merged.extend(batch)
    return merged


# ---------------------------------------------------------------------------
# deterministic text output

def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _settings_header(manifest: RunManifest) -> list[str]:
    return [f"# {key}: {value}" for key, value in effective_settings(manifest)]


def _results_lines(manifest: RunManifest, results: list[TrialResult]) -> list[str]:
    target = manifest.true_target_dose
    lines = ["# posim results"]
    lines += _settings_header(manifest)
    lines.append(
        "trial_index\tselected\tcorrect\tn_treated\tdoses_given\t"
        "tox_seen\teff_seen\tn_at\ttox_at\teff_at\tstop_reason"
    )
    for res in results:
        correct = (
            "-" if target is None else str(score_selection(res, target).correct)
        )
        lines.append(
            "\t".join(
                [
                    str(res.trial_index),
                    _fmt(res.selected),
                    correct,
                    str(res.n_treated),
                    _fmt(res.doses_given),
                    _fmt(res.tox_seen),
                    _fmt(res.eff_seen),
                    _fmt(res.n_at),
                    _fmt(res.tox_at),
                    _fmt(res.eff_at),
                    res.stop_reason or "-",
                ]
            )
        )
    return lines


def _summary_lines(
    summary: ComparisonSummary, extra: list[tuple[str, str]]
) -> list[str]:
    pairs = [
        ("design_a", summary.design_a),
        ("design_b", summary.design_b),
        ("mode", summary.mode),
        ("n_sim", str(summary.n_sim)),
        ("psi_a", repr(summary.psi_a)),
        ("mcse_a", repr(summary.mcse_a)),
        ("psi_b", repr(summary.psi_b)),
        ("mcse_b", repr(summary.mcse_b)),
        ("delta", repr(summary.delta)),
        ("var_delta_cov", repr(summary.var_delta_cov)),
        (
            "var_delta_diff",
            "-" if summary.var_delta_diff is None else repr(summary.var_delta_diff),
        ),
        ("mcse_delta", repr(summary.mcse_delta)),
        ("corr", "-" if summary.corr is None else repr(summary.corr)),
        (
            "rel_efficiency",
            "-" if summary.rel_efficiency is None else repr(summary.rel_efficiency),
        ),
    ]
    return [f"{key}\t{value}" for key, value in pairs + extra]


# ---------------------------------------------------------------------------
# subcommands

def _effective_trials(manifest: RunManifest, override: int | None) -> list[int]:
    n = manifest.scenario.n_trials if override is None else override
    if n < 1:
        raise ConfigError("need at least one trial")
    return list(range(n))


def cmd_generate(args: argparse.Namespace) -> int:
    manifest = _manifest_for(args)
    directory = manifest.dataset_dir
    if directory is None:
        directory = manifest.output_dir / "datasets"
    directory.mkdir(parents=True, exist_ok=True)
    indices = _effective_trials(manifest, args.trials)
    worker = functools.partial(
        _chunk_generate, scenario=manifest.scenario, directory=directory
    )
    rows = _parallel(worker, _split_chunks(indices, args.threads), args.threads)
    rows.sort(key=lambda row: row[0])
    lines = ["# posim dataset index"]
    lines.append(f"# scenario_digest: {scenario_digest(manifest.scenario)}")
    lines.append(f"# master_seed: {manifest.scenario.master_seed}")
    lines.append("trial_index\tfile\tfingerprint")
    lines += [f"{idx}\t{name}\t{print_}" for idx, name, print_ in rows]
    _write_lines(directory / _INDEX_FILE, lines)
    print(f"wrote {len(rows)} datasets to {directory}")
    return 0


def _run_designs(
    manifest: RunManifest,
    specs: list[DesignSpec],
    indices: list[int],
    threads: int,
    scenario: Scenario | None = None,
) -> list[list[TrialResult]]:
    """Run designs over shared datasets; one result column per spec,
    each sorted by trial index."""
    scenario = scenario if scenario is not None else manifest.scenario
    dataset_dir = manifest.dataset_dir if manifest.dataset_source == LOAD else None
    worker = functools.partial(
        _chunk_run,
        scenario=scenario,
        configs=tuple(spec.config for spec in specs),
        design_ids=tuple(spec.design_id for spec in specs),
        dataset_dir=dataset_dir,
    )
    merged = _parallel(worker, _split_chunks(indices, threads), threads)
    merged.sort(key=lambda row: row[0].trial_index)
    return [[row[i] for row in merged] for i in range(len(specs))]


def cmd_run(args: argparse.Namespace) -> int:
    manifest = _manifest_for(args)
    spec = manifest.design(args.design)
    indices = _effective_trials(manifest, args.trials)
    results = _run_designs(manifest, [spec], indices, args.threads)[0]
    out = manifest.output_dir
    echo = dataclasses.replace(manifest, designs=(spec,))
    _write_lines(out / f"results_{spec.design_id}.tsv", _results_lines(echo, results))
    if manifest.true_target_dose is not None and len(results) >= 2:
        indicators = [
            score_selection(res, manifest.true_target_dose).correct for res in results
        ]
        psi, mcse = estimate_psi(indicators)
        print(f"{spec.design_id}: psi={psi!r} mcse={mcse!r} n_sim={len(indicators)}")
    print(f"wrote results to {out / f'results_{spec.design_id}.tsv'}")
    return 0


def _require_target(manifest: RunManifest) -> int:
    if manifest.true_target_dose is None:
        raise ConfigError(
            "comparison needs scenario.true_target_dose to score selections"
        )
    return manifest.true_target_dose


def cmd_compare(args: argparse.Namespace) -> int:
    manifest = _manifest_for(args)
    spec_a = manifest.design(args.design_a)
    spec_b = manifest.design(args.design_b)
    target = _require_target(manifest)
    indices = _effective_trials(manifest, args.trials)
    if len(indices) < 2:
        raise ConfigError("comparison needs at least two trials")
    checkpoint = manifest.checkpoint if args.checkpoint is None else args.checkpoint
    if checkpoint < 1:
        raise ConfigError("--checkpoint must be a positive integer")
    out = manifest.output_dir

    if args.mode == "paired":
        if args.seed_b is not None:
            raise ConfigError("--seed-b only applies to independent mode")
        results_a, results_b = _run_designs(
            manifest, [spec_a, spec_b], indices, args.threads
        )
        paired = PairedIndicators.from_indicators(
            [score_selection(r, target) for r in results_a],
            [score_selection(r, target) for r in results_b],
        )
        summary = summarize_paired(paired)
        extra: list[tuple[str, str]] = []
        series = convergence_series(paired, checkpoint)
        echo_b = dataclasses.replace(manifest, designs=(spec_b,))
    else:
        if manifest.dataset_source == LOAD:
            raise ConfigError(
                "independent mode regenerates datasets; it cannot run from "
                "a loaded dataset directory"
            )
        seed_b = (
            manifest.scenario.master_seed + 1 if args.seed_b is None else args.seed_b
        )
        if seed_b == manifest.scenario.master_seed:
            raise ConfigError(
                "independent mode needs a replication seed different from "
                "the scenario master_seed"
            )
        try:
            scenario_b = dataclasses.replace(manifest.scenario, master_seed=seed_b)
        except ValueError as exc:
            raise ConfigError(f"bad replication seed: {exc}") from exc
        results_a = _run_designs(manifest, [spec_a], indices, args.threads)[0]
        results_b = _run_designs(
            manifest, [spec_b], indices, args.threads, scenario=scenario_b
        )[0]
        a = [score_selection(r, target).correct for r in results_a]
        b = [score_selection(r, target).correct for r in results_b]
        summary = summarize_independent(spec_a.design_id, spec_b.design_id, a, b)
        extra = [("seed_b", str(seed_b))]
        series = _independent_series(a, b, checkpoint)
        echo_b = dataclasses.replace(manifest, scenario=scenario_b, designs=(spec_b,))

    echo_a = dataclasses.replace(manifest, designs=(spec_a,))
    echo_both = dataclasses.replace(manifest, designs=(spec_a, spec_b))
    tag = f"{spec_a.design_id}_vs_{spec_b.design_id}_{args.mode}"
    _write_lines(
        out / f"results_{spec_a.design_id}_{args.mode}_a.tsv",
        _results_lines(echo_a, results_a),
    )
    _write_lines(
        out / f"results_{spec_b.design_id}_{args.mode}_b.tsv",
        _results_lines(echo_b, results_b),
    )
    _write_lines(
        out / f"comparison_{tag}.tsv",
        ["# posim comparison"]
        + _settings_header(echo_both)
        + _summary_lines(summary, extra),
    )
    conv_lines = ["# posim convergence", f"# comparison: {tag}"]
    conv_lines.append("n_sim\tpsi_a\tpsi_b\tdelta\tmcse_delta")
    conv_lines += [
        f"{n}\t{pa!r}\t{pb!r}\t{delta!r}\t{mcse!r}" for n, pa, pb, delta, mcse in series
    ]
    _write_lines(out / f"convergence_{tag}.tsv", conv_lines)
    print(
        f"{summary.design_a} vs {summary.design_b} ({summary.mode}): "
        f"delta={summary.delta!r} mcse={summary.mcse_delta!r} "
        f"corr={'-' if summary.corr is None else repr(summary.corr)}"
    )
    print(f"wrote comparison to {out / f'comparison_{tag}.tsv'}")
    return 0


def _independent_series(
    a: list[int], b: list[int], checkpoint: int
) -> list[tuple[int, float, float, float, float]]:
    n_sim = min(len(a), len(b))
    points = [n for n in range(checkpoint, n_sim, checkpoint) if n >= 2]
    points.append(n_sim)
    series = []
    for n in points:
        psi_a, mcse_a = estimate_psi(a[:n])
        psi_b, mcse_b = estimate_psi(b[:n])
        series.append((n, psi_a, psi_b, psi_a - psi_b, (mcse_a**2 + mcse_b**2) ** 0.5))
    return series


def cmd_po_matrix(args: argparse.Namespace) -> int:
    manifest = _manifest_for(args)
    scenario = manifest.scenario
    if (args.trial is None) == (args.dataset is None):
        raise ConfigError("po-matrix needs exactly one of --trial or --dataset")
    if args.dataset is not None:
        path = Path(args.dataset)
        if not path.exists():
            raise FingerprintError(f"missing dataset file {path}")
        dataset = read_dataset(path)
        _check_scenario_binding(dataset, scenario, str(path))
    else:
        if not 0 <= args.trial < scenario.n_trials:
            raise ConfigError(f"trial {args.trial} outside 0..{scenario.n_trials - 1}")
        dataset_dir = manifest.dataset_dir if manifest.dataset_source == LOAD else None
        dataset = _obtain_dataset(scenario, args.trial, dataset_dir)
    lines = _matrix_lines(scenario, dataset)
    if args.out is not None:
        _write_lines(Path(args.out), lines)
        print(f"wrote matrix to {args.out}")
    else:
        print("\n".join(lines))
    return 0


def _matrix_lines(scenario: Scenario, dataset: PoDataset) -> list[str]:
    lines = ["# potential-outcome matrix"]
    lines.append(f"# scenario_digest: {scenario_digest(scenario)}")
    lines.append(f"# trial_index: {dataset.trial_index}")
    lines.append(f"# fingerprint: {dataset.fingerprint}")
    lines.append("# tox_curve: " + " ".join(repr(p) for p in dataset.tox_curve.probs))
    if dataset.eff_curve is not None:
        lines.append(
            "# eff_curve: " + " ".join(repr(p) for p in dataset.eff_curve.probs)
        )
        lines.append(f"# rho: {dataset.rho!r}")
    header = "patient\tu_tox\ttox_po"
    if dataset.eff_po is not None:
        header += "\tu_eff\teff_po"
    lines.append(header)
    for i in range(dataset.n_patients):
        row = [
            str(i),
            repr(float(dataset.u_tox[i])),
            "".join(map(str, dataset.tox_po[i].tolist())),
        ]
        if dataset.eff_po is not None:
            row.append(repr(float(dataset.u_eff[i])))
            row.append("".join(map(str, dataset.eff_po[i].tolist())))
        lines.append("\t".join(row))
    n = dataset.n_patients
    tox_rates = [
        repr(round(float(dataset.tox_po[:, d].sum()) / n, 12))
        for d in range(dataset.n_doses)
    ]
    lines.append("# tox_po_rate: " + " ".join(tox_rates))
    if dataset.eff_po is not None:
        eff_rates = [
            repr(round(float(dataset.eff_po[:, d].sum()) / n, 12))
            for d in range(dataset.n_doses)
        ]
        lines.append("# eff_po_rate: " + " ".join(eff_rates))
    return lines


def cmd_describe_design(args: argparse.Namespace) -> int:
    manifest = _manifest_for(args)
    spec = manifest.design(args.design)
    info = describe(spec.config)
    print(f"id\t{spec.design_id}")
    for key in sorted(info):
        value = info[key]
        if isinstance(value, dict):
            value = " ".join(f"{k}={v!r}" for k, v in sorted(value.items()))
        elif isinstance(value, tuple):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        print(f"{key}\t{value}")
    return 0


def _manifest_for(args: argparse.Namespace) -> RunManifest:
    manifest = load_manifest(args.manifest)
    seed = getattr(args, "seed", None)
    if seed is not None:
        try:
            scenario = dataclasses.replace(manifest.scenario, master_seed=seed)
        except ValueError as exc:
            raise ConfigError(f"bad --seed: {exc}") from exc
        manifest = dataclasses.replace(manifest, scenario=scenario)
    out = getattr(args, "out", None)
    if out and args.command != "po-matrix":
        manifest = dataclasses.replace(manifest, output_dir=Path(out))
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posim",
        description=(
            "Generate potential-outcome datasets for dose-finding trials and "
            "replay adaptive designs over them."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, batch: bool = True) -> None:
        p.add_argument("--manifest", required=True, help="path to the YAML manifest")
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help="override the manifest's master seed",
        )
        if batch:
            p.add_argument(
                "--trials",
                type=int,
                default=None,
                help="override the scenario's number of trials",
            )
            p.add_argument(
                "--threads",
                type=int,
                default=1,
                help="worker processes (outputs are identical for any value)",
            )
            p.add_argument(
                "--out", default=None, help="override the manifest's output directory"
            )

    p_generate = sub.add_parser(
        "generate", help="write potential-outcome dataset files and an index"
    )
    common(p_generate)
    p_generate.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run one design over the scenario's trials")
    common(p_run)
    p_run.add_argument("--design", required=True, help="design id from the manifest")
    p_run.set_defaults(func=cmd_run)

    p_compare = sub.add_parser("compare", help="contrast two designs")
    common(p_compare)
    p_compare.add_argument("--design-a", required=True)
    p_compare.add_argument("--design-b", required=True)
    p_compare.add_argument(
        "--mode",
        choices=["paired", "independent"],
        default="paired",
        help="replay both designs on common datasets, or replicate independently",
    )
    p_compare.add_argument(
        "--checkpoint",
        type=int,
        default=None,
        help="convergence-series cadence in trials (default from manifest, 1000)",
    )
    p_compare.add_argument(
        "--seed-b",
        type=int,
        default=None,
        help=(
            "master seed of the second dataset set in independent mode "
            "(default: master_seed + 1; must differ from the first set's seed)"
        ),
    )
    p_compare.set_defaults(func=cmd_compare)

    p_matrix = sub.add_parser(
        "po-matrix", help="render one trial's potential-outcome matrix"
    )
    common(p_matrix, batch=False)
    p_matrix.add_argument("--trial", type=int, default=None, help="trial index")
    p_matrix.add_argument(
        "--dataset", default=None, help="render this dataset file instead"
    )
    p_matrix.add_argument("--out", default=None, help="write to a file instead of stdout")
    p_matrix.set_defaults(func=cmd_po_matrix)

    p_describe = sub.add_parser(
        "describe-design", help="print a design's resolved parameters"
    )
    common(p_describe, batch=False)
    p_describe.add_argument("--design", required=True)
    p_describe.set_defaults(func=cmd_describe_design)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FingerprintError as exc:
        print(f"dataset integrity error: {exc}", file=sys.stderr)
        return 3
    except DesignRuntimeError as exc:
        print(f"design runtime error: {exc}", file=sys.stderr)
        return 4
    except PosimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

"""End-to-end runs: align, simulate, evaluate and diagnose, plus their grid variants."""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from slugify import slugify

from .config import Mode, RunConfig, Strategy, with_overrides
from .errors import DataError, SamplerError
from .io import (
    FLOAT_FORMAT,
    AlignmentResult,
    Marginal,
    ProxyRecord,
    ScaleKind,
    TargetEnsemble,
    ensure_matching,
    load_ensemble,
    load_record,
    read_ages,
    read_chain,
    read_diagnostics,
    read_truth,
    write_ensemble,
    write_record,
    write_result,
    write_truth,
)
from .metrics import ScoreCard, score_summary
from .model import AlignmentModel, KdeTable, PriorSpec, TShape, build_kde_table, elicit_alpha_means, log_prior_alpha
from .preprocess import MixedTargets, apply_rescale, fit_rescale, rescale_record
from .sampler import IAT_THRESHOLD, iat, run_mcmc
from .start import start_points
from .synthetic import (
    SyntheticSpec,
    TrueChronology,
    add_noise,
    downsample,
    make_pseudo_targets,
    make_synthetic_record,
    make_target_ensemble,
)
from .warp import make_grid

logger = logging.getLogger(__name__)

CELLS_FILE = "cells.csv"
ALIGNMENT_DIR = "alignment"


@dataclass(frozen=True)
class PreparedRun:
    """Loaded data and the posterior of one alignment, ready for sampling."""

    config: RunConfig
    record: ProxyRecord
    model: AlignmentModel


def _load_age_model(path: Path) -> Union[ProxyRecord, TargetEnsemble]:
    """A two-column age-depth record, or a wide ensemble (depth, proxy, draws...)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"prior age model not found: {path}")
    n_columns = pd.read_csv(path, header=None, nrows=1).shape[1]
    if n_columns > 2:
        return load_ensemble(path, min_draws=1)
    return load_record(path, (0, 1), ScaleKind.DEPTH)


def _target(config: RunConfig) -> Tuple[Union[ProxyRecord, MixedTargets, KdeTable], Tuple[float, float]]:
    data, rescale = config.data, config.rescale
    if config.strategy is Strategy.SINGLE:
        target = load_record(data.target, data.target_columns, ScaleKind.AGE)
        return rescale_record(target, rescale.q_lower, rescale.q_upper), target.span
    if config.strategy is Strategy.DOUBLE:
        mixed = MixedTargets.from_records(
            load_record(data.target, data.target_columns, ScaleKind.AGE),
            load_record(data.target2, data.target_columns, ScaleKind.AGE),
            rescale.q_lower,
            rescale.q_upper,
        )
        return mixed, mixed.age_range
    ensemble = load_ensemble(data.ensemble)
    proxy_map = fit_rescale(ensemble.proxy, rescale.q_lower, rescale.q_upper)
    table = build_kde_table(
        ensemble.with_proxy(apply_rescale(ensemble.proxy, proxy_map)),
        n_windows=config.kde.n_windows,
        min_samples=config.kde.min_samples,
        max_samples=config.kde.max_samples,
        floor=config.kde.floor,
        min_bandwidth=config.kde.min_bandwidth,
    )
    return table, table.age_range


def prepare(config: RunConfig) -> PreparedRun:
    """Loads, rescales and builds the posterior; no sampling."""
    config.require_inputs()
    kind = ScaleKind.DEPTH if config.mode is Mode.AGE_DEPTH else ScaleKind.AGE
    record = load_record(config.data.input, config.data.input_columns, kind)
    rescaled = rescale_record(record, config.rescale.q_lower, config.rescale.q_upper)
    target, target_range = _target(config)
    grid = make_grid(record.positions, config.sections)

    age_model = _load_age_model(config.data.age_model) if config.data.age_model else None
    alpha_means = elicit_alpha_means(age_model, grid, config.mode, target_range, config.priors.alpha_mean)
    priors = PriorSpec.from_options(config.priors, alpha_means, target_range, config.mode, float(record.positions[0]))
    logger.info(
        "%s alignment (%s): %d input points, K=%d, target ages [%g, %g]",
        config.strategy.value,
        config.mode.value,
        len(record),
        grid.K,
        *target_range,
    )
    model = AlignmentModel(
        mode=config.mode,
        strategy=config.strategy,
        grid=grid,
        positions=rescaled.positions,
        input_values=rescaled.values,
        priors=priors,
        target=target,
        shape=TShape(config.likelihood.t_a, config.likelihood.t_b),
    )
    return PreparedRun(config=config, record=record, model=model)


def _marginals(model: AlignmentModel, names: Tuple[str, ...], samples: np.ndarray) -> Tuple[Marginal, ...]:
    priors = model.priors
    prior_of = {
        "tau0": priors.tau0_logpdf,
        "alpha_1": lambda x: log_prior_alpha(x, priors.alpha_shape, priors.alpha_means[0]),
        "omega": priors.omega_logpdf,
        "sigma": priors.sigma_logpdf,
        "mix": priors.mix_logpdf,
    }
    return tuple(
        Marginal(name, samples[:, names.index(name)], prior_of[name])
        for name in prior_of
        if name in names
    )


def run_alignment(prepared: PreparedRun) -> AlignmentResult:
    """Samples the posterior of a prepared run and collects everything to write."""
    config, model = prepared.config, prepared.model
    layout = model.layout
    rng = np.random.default_rng(config.seed)
    init = start_points(model, rng, config.mcmc.max_init_tries, config.mcmc.aligned_start)
    chain = run_mcmc(config.mcmc, model.energy, init, rng, names=layout.names, seed=config.seed)

    positions = prepared.record.positions
    ages = np.column_stack([model.ages_at(theta, positions) for theta in chain.samples])
    if np.any(np.diff(ages, axis=0) <= 0):
        raise SamplerError("a retained sample gives a non-increasing age model")

    extra: Dict[str, float] = {"n_params": float(layout.size), "sections": float(layout.K)}
    mix = None
    if layout.has_mix:
        mix = float(chain.column("mix").mean())
        extra["mix_mean"] = mix
    target_ages, target_values = model.target_curve(mix)
    return AlignmentResult(
        chain=chain,
        positions=positions,
        ages=ages,
        input_values=prepared.record.values,
        target_ages=target_ages,
        target_values=target_values,
        marginals=_marginals(model, layout.names, chain.samples),
        config_echo=config.to_ini(),
        write_ensemble=config.output.write_ensemble,
        extra=extra,
    )


def align(config: RunConfig, directory: Path) -> AlignmentResult:
    """Full alignment: prepare, sample, write into ``directory``."""
    result = run_alignment(prepare(config))
    write_result(result, Path(directory))
    logger.info("alignment written to %s", directory)
    return result


@dataclass(frozen=True)
class SimulationFiles:
    """Paths written by ``simulate``."""

    input: Path
    truth: Path
    target1: Path
    target2: Path
    ensemble: Optional[Path] = None


def _synthetic_parts(config: RunConfig) -> Tuple[TrueChronology, SyntheticSpec, Tuple[ProxyRecord, ProxyRecord]]:
    options = config.synthetic
    chron = TrueChronology(options.a, options.b, options.d, options.x_max)
    spec = SyntheticSpec(options.weight, options.noise, options.c1, options.c2, options.n_points, config.seed)
    targets = make_pseudo_targets(config.seed, options.target_span, options.target_resolution)
    return chron, spec, targets


def _write_fixture(
    directory: Path,
    record: ProxyRecord,
    truth: np.ndarray,
    targets: Tuple[ProxyRecord, ProxyRecord],
    ensemble: Optional[TargetEnsemble],
    config_echo: str,
) -> SimulationFiles:
    directory.mkdir(parents=True, exist_ok=True)
    files = SimulationFiles(
        input=directory / "input.csv",
        truth=directory / "truth.csv",
        target1=directory / "target1.csv",
        target2=directory / "target2.csv",
        ensemble=directory / "target_ensemble.csv" if ensemble is not None else None,
    )
    write_record(record, files.input, ("depth", "proxy"))
    write_truth(record.positions, truth, files.truth)
    write_record(targets[0], files.target1, ("age", "proxy"))
    write_record(targets[1], files.target2, ("age", "proxy"))
    if ensemble is not None:
        write_ensemble(ensemble, files.ensemble)
    (directory / "config.ini").write_text(config_echo, encoding="utf-8")
    return files


def simulate(config: RunConfig, directory: Path) -> SimulationFiles:
    """Writes a synthetic input record, its true ages and the two pseudo-targets."""
    chron, spec, targets = _synthetic_parts(config)
    record, truth = make_synthetic_record(targets, spec, chron)
    ensemble = None
    if config.synthetic.ensemble_draws > 0:
        ensemble = make_target_ensemble(targets[0], config.synthetic.ensemble_draws, config.seed)
    files = _write_fixture(Path(directory), record, truth, targets, ensemble, config.to_ini())
    logger.info("synthetic fixture with %d points written to %s", len(record), directory)
    return files


def cell_name(noise: float, fraction: float) -> str:
    """Directory name of one (noise, fraction) cell."""
    return slugify(f"noise {noise:g} fraction {fraction:g}")


def simulate_grid(config: RunConfig, root: Path) -> pd.DataFrame:
    """One fixture per (noise level, sampling fraction) cell, plus ``cells.csv``.

    Cells start from the noise-free record, are downsampled and then get
    Gaussian noise scaled by the record's sd.
    """
    root = Path(root)
    chron, spec, targets = _synthetic_parts(config)
    clean_spec = SyntheticSpec(spec.weight, 0.0, spec.c1, spec.c2, spec.n_points, spec.seed)
    record, truth = make_synthetic_record(targets, clean_spec, chron)
    truth_record = ProxyRecord(record.positions, truth, ScaleKind.DEPTH)
    ensemble = None
    if config.synthetic.ensemble_draws > 0:
        ensemble = make_target_ensemble(targets[0], config.synthetic.ensemble_draws, config.seed)

    rows = []
    cells = itertools.product(config.synthetic.grid_noise, config.synthetic.grid_fraction)
    for index, (noise, fraction) in enumerate(cells):
        name = cell_name(noise, fraction)
        sampled = downsample(record, fraction)
        noisy = add_noise(sampled, noise, config.seed + index + 1)
        cell_config = with_overrides(config, synthetic__noise=noise)
        _write_fixture(
            root / name,
            noisy,
            downsample(truth_record, fraction).values,
            targets,
            ensemble,
            cell_config.to_ini(),
        )
        rows.append({"cell": name, "noise": noise, "fraction": fraction, "n_points": len(noisy)})
    cells_frame = pd.DataFrame(rows)
    root.mkdir(parents=True, exist_ok=True)
    cells_frame.to_csv(root / CELLS_FILE, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("%d grid cells written to %s", len(rows), root)
    return cells_frame


def _read_cells(root: Path) -> pd.DataFrame:
    path = Path(root) / CELLS_FILE
    if not path.is_file():
        raise DataError(f"{path} not found; run 'simulate --grid' first")
    return pd.read_csv(path, float_precision="round_trip")


def _cell_config(config: RunConfig, cell_dir: Path) -> RunConfig:
    ensemble = cell_dir / "target_ensemble.csv"
    return with_overrides(
        config,
        data__input=cell_dir / "input.csv",
        data__target=cell_dir / "target1.csv",
        data__target2=cell_dir / "target2.csv",
        data__ensemble=ensemble if ensemble.is_file() else config.data.ensemble,
        data__truth=cell_dir / "truth.csv",
    )


def _align_cell(config: RunConfig, cell_dir: Path) -> Path:
    output = cell_dir / ALIGNMENT_DIR
    align(_cell_config(config, cell_dir), output)
    return output


def align_grid(config: RunConfig, root: Path, workers: int = 1) -> List[Path]:
    """Aligns every cell of a grid; cells are independent and may run in parallel."""
    root = Path(root)
    cell_dirs = [root / name for name in _read_cells(root)["cell"]]
    logger.info("aligning %d grid cells with %d worker(s)", len(cell_dirs), workers)
    if workers <= 1:
        return [_align_cell(config, cell_dir) for cell_dir in cell_dirs]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_align_cell, itertools.repeat(config), cell_dirs))


def evaluate(ages_path: Path, truth_path: Path, output: Optional[Path] = None) -> ScoreCard:
    """Scores ``ages.csv`` against true ages; writes ``scorecard.csv`` and ``delta_t.csv``."""
    summary = read_ages(ages_path)
    positions, truth = read_truth(truth_path)
    ensure_matching(summary["position"].to_numpy(dtype=float), positions, ("ages", "truth"))
    card = score_summary(summary, truth)
    if output is not None:
        output = Path(output)
        output.mkdir(parents=True, exist_ok=True)
        metrics = card.as_dict()
        pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())}).to_csv(
            output / "scorecard.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
        pd.DataFrame({"position": positions, "delta_t_sd": card.delta_t_sd}).to_csv(
            output / "delta_t.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    logger.info(
        "coverage %.3f, mean abs error %.4g, mean interval width %.4g",
        card.coverage,
        card.mean_abs_error,
        card.mean_interval_width,
    )
    return card


def evaluate_grid(root: Path, output: Optional[Path] = None) -> pd.DataFrame:
    """Long-format heatmap table (noise, fraction, metric, value) over every aligned cell."""
    root = Path(root)
    rows = []
    for cell in _read_cells(root).itertuples(index=False):
        cell_dir = root / cell.cell
        card = evaluate(cell_dir / ALIGNMENT_DIR / "ages.csv", cell_dir / "truth.csv")
        for metric, value in card.as_dict().items():
            rows.append({"noise": cell.noise, "fraction": cell.fraction, "metric": metric, "value": value})
    heatmap = pd.DataFrame(rows, columns=["noise", "fraction", "metric", "value"])
    target = Path(output) if output is not None else root
    target.mkdir(parents=True, exist_ok=True)
    heatmap.to_csv(target / "heatmap.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return heatmap


def diagnose(chain_path: Path, threshold: float = IAT_THRESHOLD) -> Dict[str, float]:
    """IAT and effective sample size of the log-objective, with a pass flag for IAT < threshold.

    The acceptance rate is taken from the run's ``diagnostics.csv`` when the
    chain is the ``chain.csv`` of a run directory.
    """
    chain_path = Path(chain_path)
    series = read_chain(chain_path)["log_objective"].to_numpy(dtype=float)
    tau = iat(series)
    report = {
        "n_samples": float(series.size),
        "iat": tau,
        "ess": series.size / tau,
        "acceptance_rate": float("nan"),
        "iat_pass": float(tau < threshold),
    }
    stored = chain_path.with_name("diagnostics.csv")
    if chain_path.name == "chain.csv" and stored.is_file():
        report["acceptance_rate"] = read_diagnostics(stored).get("acceptance_rate", float("nan"))
    if tau >= threshold:
        logger.warning("log-objective IAT %.1f is not below %g; consider more thinning", tau, threshold)
    return report

# filename: services/experiment_service.py
"""
The five CLI commands: bound, estimate, sweep, select, plot-data.

Result files are deterministic for a given config and seed; the sqlite
ledger in the output directory is the only place that records run times.
"""
import glob
import math
import os
from dataclasses import asdict
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from bounds.rlct_bounds import (
    bound_grid, bound_summary, param_dim, rlct_exact, rlct_upper_bound, select_num_topics,
)
from config import LOW_CONFIDENCE_N, PARTIAL_FAILURE_THRESHOLD, PLOT_DATA_SUBDIR, POINTS_SUBDIR
from db.connection import close_db, init_db, ledger_path
from db.repository import get_point_status, upsert_point
from kernels.stochastic_matrix import GroundTruth
from logger import get_logger
from parsers.config_parser import ExperimentConfig, config_hash
from parsers.grid_parser import parse_grid
from parsers.matrix_parser import load_truth, read_dataset, save_truth
from processors.gibbs_sampler import SamplerConfig, collapsed_gibbs
from processors.slope_estimators import estimate_rlct_free_energy
from processors.volume_estimator import estimate_rlct_smf
from services.simulation_service import (
    GenErrorSummary, expected_gen_error, expected_smf_gen_error, free_energy_curve, free_energy_pairs,
    generate_dataset, training_loss,
)
from state.manager import SweepStateManager
from state.models import (
    EstimationMethod, LearningCurveRecord, ModelDims, PointStatus, RlctBound, SweepState, WordDataset,
)
from utils.errors import ConfigError, NumericalGuardError, PartialFailureError
from utils.result_writer import float_str, fraction_str, read_json, write_csv, write_dat, write_json
from utils.rng import derive_seed

logger = get_logger(__name__)

TRUTH_STREAM = 0
REPLICATE_STREAM = 1
SELECT_STREAM = 2

BOUND_CSV_HEADER = [
    "M", "N", "H", "H0", "d", "lambda_bar", "lambda_bar_decimal", "lambda_exact",
    "lambda_exact_decimal", "case", "gap", "gap_decimal",
]


def _console() -> Console:
    return Console()


def _run_dir(config: ExperimentConfig, digest: str) -> str:
    return os.path.join(config.output_dir, f"{config.dims.label()}_{digest[:12]}")


def resolve_truth(config: ExperimentConfig) -> GroundTruth:
    """The truth file named by the config, or a minimal truth drawn from the master seed."""
    dims = config.dims
    if config.truth_file:
        truth = load_truth(config.truth_file)
        if (truth.M, truth.N, truth.H0) != (dims.M, dims.N, dims.H0):
            raise ConfigError(f"Truth file is {truth.M} x {truth.N} with H0={truth.H0}, config wants {dims.label()}")
        return truth
    seed = derive_seed(config.master_seed, TRUTH_STREAM)
    doc_dist = np.asarray(config.doc_dist, dtype=float) if config.doc_dist is not None else None
    return GroundTruth.sample(dims, np.random.default_rng(seed), delta=config.delta, doc_dist=doc_dist, seed=seed)


def _bound_payload(dims: ModelDims) -> Dict[str, Any]:
    summary = bound_summary(dims)
    return {
        "dims": dims.to_dict(),
        "lambda_bar": summary.lambda_bar,
        "exact": summary.exact,
        "case": summary.case.value if summary.case else None,
        "d": summary.d,
        "half_d": summary.half_d,
    }


# --- bound ---

def _bound_row(b: RlctBound) -> List[Any]:
    d = b.dims
    return [
        d.M, d.N, d.H, d.H0, b.d,
        fraction_str(b.lambda_bar), float_str(float(b.lambda_bar)),
        fraction_str(b.exact) if b.exact is not None else "",
        float_str(float(b.exact)) if b.exact is not None else "",
        b.case.value if b.case else "",
        fraction_str(b.gap), float_str(float(b.gap)),
    ]


def cmd_bound(dims: Optional[ModelDims] = None, grid_tokens: Optional[Sequence[str]] = None,
              csv_path: Optional[str] = None, console: Optional[Console] = None) -> List[RlctBound]:
    """Prints the bound table for one ModelDims or a grid, optionally writing it as CSV."""
    if (dims is None) == (not grid_tokens):
        raise ConfigError("Give either M N H H0 or --grid, not both")
    if grid_tokens:
        spec = parse_grid(grid_tokens)
        rows = bound_grid(spec.M_values, spec.N_values, spec.H0_values, spec.H_max)
    else:
        rows = [bound_summary(dims)]

    table = Table(title="RLCT bounds")
    for column in ("M", "N", "H", "H0", "d", "lambda_bar", "exact", "case", "d/2 - lambda_bar"):
        table.add_column(column, justify="right")
    for b in rows:
        table.add_row(str(b.dims.M), str(b.dims.N), str(b.dims.H), str(b.dims.H0), str(b.d),
                      f"{fraction_str(b.lambda_bar)} ({float(b.lambda_bar):.4g})",
                      fraction_str(b.exact) if b.exact is not None else "-",
                      b.case.value if b.case else "-", fraction_str(b.gap))
    (console or _console()).print(table)
    if csv_path:
        write_csv(csv_path, BOUND_CSV_HEADER, (_bound_row(b) for b in rows))
        logger.info(f"Bound: wrote {len(rows)} row(s) to {csv_path}")
    return rows


# --- estimate ---

def _gen_error_summary(config: ExperimentConfig, truth: GroundTruth, n: int) -> GenErrorSummary:
    seed = derive_seed(config.master_seed, REPLICATE_STREAM, n)
    H = config.dims.H
    if config.observation_model is not None:
        m = config.metropolis
        return expected_smf_gen_error(truth, H, n, config.replicates, config.observation_model,
                                      steps=m.steps, proposal_scale=m.proposal_scale, seed=seed,
                                      workers=config.workers, support_delta=m.support_delta)
    return expected_gen_error(truth, H, n, config.replicates, config.sampler, seed=seed,
                              workers=config.workers, mode=config.doc_mode)


def cmd_estimate(config: ExperimentConfig, method: Optional[EstimationMethod] = None) -> Dict[str, Any]:
    """Runs one RLCT estimate and writes `estimate_<method>.json` plus its curve CSV."""
    method = method or config.method
    dims = config.dims
    digest = config_hash(config)
    if method is EstimationMethod.FREE_ENERGY and param_dim(dims) > 4:
        raise NumericalGuardError(
            f"Free-energy estimation integrates over d = {param_dim(dims)} dimensions for {dims.label()}; "
            f"quadrature is limited to d <= 4. Use --method volume or gen-error instead.")
    truth = resolve_truth(config)
    run_dir = _run_dir(config, digest)
    report: Dict[str, Any] = {"method": method.value, "config_hash": digest, **_bound_payload(dims)}
    logger.info(f"Estimate: {method.value} for {dims.label()} (config {digest[:12]})")

    if method is EstimationMethod.VOLUME:
        estimate = estimate_rlct_smf(dims, truth, config.volume_config(), objective=config.objective)
        report["estimate"] = estimate.to_dict()
        report["objective"] = config.objective
        report["lambda_hat"] = estimate.lambda_hat
        write_csv(os.path.join(run_dir, "volume_counts.csv"), ["t", "count", "usable"],
                  zip(estimate.t_grid, estimate.counts, [int(u) for u in estimate.usable]))
    elif method is EstimationMethod.GEN_ERROR:
        curve = []
        for n in config.n_grid:
            summary = _gen_error_summary(config, truth, n)
            curve.append({"n": n, "lambda_hat": summary.lambda_hat, "ci_halfwidth": summary.lambda_ci_halfwidth,
                          "used": summary.used, "failed": summary.failed, "divergent": summary.divergent})
        report["curve"] = curve
        report["lambda_hat"] = curve[-1]["lambda_hat"]
        write_csv(os.path.join(run_dir, "gen_error_curve.csv"),
                  ["n", "lambda_hat", "ci_halfwidth", "used", "failed", "divergent"],
                  ([c["n"], c["lambda_hat"], c["ci_halfwidth"], c["used"], c["failed"], c["divergent"]]
                   for c in curve))
    else:
        records = free_energy_curve(truth, dims.H, config.n_grid, config.replicates,
                                    seed=derive_seed(config.master_seed, REPLICATE_STREAM),
                                    workers=config.workers, alpha=config.sampler.alpha, beta=config.sampler.beta)
        slope, intercept, stderr = estimate_rlct_free_energy(free_energy_pairs(records))
        report.update({"lambda_hat": slope, "intercept": intercept, "stderr": stderr, "points": records})
        write_csv(os.path.join(run_dir, "free_energy_curve.csv"),
                  ["replicate", "n", "F_n", "S_n", "F_n_minus_nS_n"],
                  ([r["replicate"], r["n"], r["F_n"], r["S_n"], r["value"]] for r in records if r["status"] == "ok"))

    save_truth(os.path.join(run_dir, "truth.json"), truth)
    write_json(os.path.join(run_dir, f"estimate_{method.value}.json"), report)
    logger.info(f"Estimate: lambda_hat={report['lambda_hat']:.4f} vs bound {float(rlct_upper_bound(dims)):.4f}")
    return report


# --- sweep ---

class SweepRunner:
    """
    Learning-curve sweep over config.n_grid with per-point JSON files.

    A point whose JSON file already exists with the same config hash is
    skipped, so an interrupted sweep resumes where it stopped.
    """
    def __init__(self, config: ExperimentConfig, test_mode: bool = False):
        self.config = config
        self.digest = config_hash(config)
        self.run_dir = _run_dir(config, self.digest)
        self.points_dir = os.path.join(self.run_dir, POINTS_SUBDIR)
        os.makedirs(self.points_dir, exist_ok=True)
        self.conn = init_db(ledger_path(config.output_dir), test_mode=test_mode)
        self.state_manager = SweepStateManager(self.conn, self.digest, command="sweep",
                                               dims_label=config.dims.label(), master_seed=config.master_seed)
        self.total_replicates = 0
        self.total_failed = 0
        self.failed_points: List[int] = []

    def _point_path(self, n: int) -> str:
        return os.path.join(self.points_dir, f"n_{n:08d}.json")

    def _load_existing(self, n: int) -> Optional[Dict[str, Any]]:
        path = self._point_path(n)
        if not os.path.exists(path):
            return None
        try:
            payload = read_json(path)
        except (OSError, ValueError) as e:
            logger.warning(f"Sweep: ignoring unreadable point file {path}: {e}")
            return None
        if payload.get("record", {}).get("config_hash") != self.digest:
            logger.warning(f"Sweep: point file {path} belongs to another config; recomputing")
            return None
        return payload

    def _run_point(self, truth: GroundTruth, n: int) -> Dict[str, Any]:
        dims = self.config.dims
        upsert_point(self.conn, self.digest, n, PointStatus.RUNNING)
        summary = _gen_error_summary(self.config, truth, n)
        exact = rlct_exact(dims)
        bound = bound_summary(dims)
        record = LearningCurveRecord(
            n=n, empirical=summary.lambda_hat, ci_halfwidth=summary.lambda_ci_halfwidth,
            bound=bound.lambda_bar, regular_reference=bound.half_d,
            exact=exact[0] if exact else None,
            replicates_used=summary.used, replicates_failed=summary.failed,
            replicates_divergent=summary.divergent, config_hash=self.digest,
        )
        payload = {"record": asdict(record), "replicates": summary.per_replicate}
        path = write_json(self._point_path(n), payload)
        status = PointStatus.COMPLETED if summary.used > 0 else PointStatus.FAILED
        upsert_point(self.conn, self.digest, n, status, result_path=path, replicates_used=summary.used,
                     replicates_failed=summary.failed, replicates_divergent=summary.divergent)
        return payload

    def run(self) -> Dict[str, Any]:
        config = self.config
        self.state_manager.load_or_create_session()
        try:
            truth = resolve_truth(config)
            save_truth(os.path.join(self.run_dir, "truth.json"), truth)
            records: List[Dict[str, Any]] = []
            for n in config.n_grid:
                payload = self._load_existing(n)
                if payload is not None and get_point_status(self.conn, self.digest, n) is not PointStatus.RUNNING:
                    logger.info(f"Sweep: n={n} already computed, skipping")
                    upsert_point(self.conn, self.digest, n, PointStatus.SKIPPED_EXISTING,
                                 result_path=self._point_path(n),
                                 replicates_used=payload["record"]["replicates_used"],
                                 replicates_failed=payload["record"]["replicates_failed"],
                                 replicates_divergent=payload["record"]["replicates_divergent"])
                else:
                    logger.info(f"Sweep: n={n} ({config.replicates} replicates)")
                    try:
                        payload = self._run_point(truth, n)
                    except Exception as e:
                        logger.exception(f"Sweep: n={n} failed, continuing with the next point: {e}")
                        upsert_point(self.conn, self.digest, n, PointStatus.FAILED)
                        self.failed_points.append(n)
                        continue
                    self.state_manager.record_point_done(payload["record"]["replicates_failed"])
                record = payload["record"]
                self.total_replicates += config.replicates
                self.total_failed += record["replicates_failed"]
                records.append(record)

            summary = self._write_summary(records)
            if self.failed_points:
                self.state_manager.finish_session(SweepState.PARTIAL, f"points failed: {self.failed_points}")
                raise PartialFailureError(
                    f"Sweep points n={self.failed_points} failed; the other points are written to {self.run_dir}")
            fraction = self.total_failed / self.total_replicates if self.total_replicates else 0.0
            if fraction > PARTIAL_FAILURE_THRESHOLD:
                self.state_manager.finish_session(SweepState.PARTIAL,
                                                  f"{self.total_failed} of {self.total_replicates} replicates failed")
                raise PartialFailureError(
                    f"{self.total_failed} of {self.total_replicates} replicates failed "
                    f"({fraction:.1%} > {PARTIAL_FAILURE_THRESHOLD:.0%}); results written to {self.run_dir}")
            self.state_manager.finish_session(SweepState.FINISHED)
            return summary
        except PartialFailureError:
            raise
        except Exception as e:
            self.state_manager.finish_session(SweepState.ERROR, str(e))
            raise
        finally:
            close_db(self.conn)

    def _write_summary(self, records: List[Dict[str, Any]]) -> Dict[str, Any]:
        header = ["n", "empirical", "ci_halfwidth", "bound", "bound_decimal", "exact", "regular_reference",
                  "replicates_used", "replicates_failed", "replicates_divergent", "config_hash"]
        rows = []
        for r in records:
            rows.append([r["n"], r["empirical"], r["ci_halfwidth"], r["bound"], float(Fraction(r["bound"])),
                         r["exact"], r["regular_reference"], r["replicates_used"], r["replicates_failed"],
                         r["replicates_divergent"], r["config_hash"]])
        write_csv(os.path.join(self.run_dir, "learning_curve.csv"), header, rows)
        config_payload = self.config.to_dict()
        config_payload.pop("output_dir")
        summary = {
            "config": config_payload,
            "config_hash": self.digest,
            **_bound_payload(self.config.dims),
            "records": records,
            "lambda_hat_last": records[-1]["empirical"] if records else None,
        }
        write_json(os.path.join(self.run_dir, "summary.json"), summary)
        logger.info(f"Sweep: wrote summary for {len(records)} point(s) to {self.run_dir}")
        return summary


def cmd_sweep(config: ExperimentConfig) -> Dict[str, Any]:
    return SweepRunner(config).run()


# --- select ---

def cmd_select(H_range: Sequence[int], dataset_paths: Optional[Sequence[str]] = None,
               config: Optional[ExperimentConfig] = None, seed: int = 0,
               console: Optional[Console] = None, out_path: Optional[str] = None):
    """
    Chooses the number of topics for one count table.

    The table is the sum of the given dataset files, or a dataset of size
    max(n_grid) drawn from the config's truth.
    """
    if dataset_paths:
        datasets = [read_dataset(p) for p in dataset_paths]
        shapes = {d.counts.shape for d in datasets}
        if len(shapes) != 1:
            raise ConfigError(f"Datasets have different shapes: {sorted(shapes)}")
        dataset = WordDataset(sum(d.counts for d in datasets))
        sampler = config.sampler if config else None
    elif config is not None:
        truth = resolve_truth(config)
        seed = config.master_seed
        dataset = generate_dataset(truth, config.n_grid[-1],
                                   np.random.default_rng(derive_seed(seed, SELECT_STREAM)), config.doc_mode)
        sampler = config.sampler
    else:
        raise ConfigError("select needs --dataset files or --config")
    if dataset.n < 1:
        raise ConfigError("Dataset is empty")
    if sampler is None:
        sampler = SamplerConfig()

    fits = []
    for H in sorted(set(H_range)):
        rng = np.random.default_rng(derive_seed(seed, SELECT_STREAM, H))
        summary = collapsed_gibbs(dataset, H, sampler, rng)
        fits.append((H, training_loss(dataset, summary)))
        logger.info(f"Select: H={H} fit={fits[-1][1]:.5f}")
    result = select_num_topics(fits, dataset.n, H_range, dataset.M, dataset.N, low_confidence_n=LOW_CONFIDENCE_N)

    title = f"Topic selection (n={dataset.n})" + (" [LOW CONFIDENCE]" if result.low_confidence else "")
    table = Table(title=title)
    for column in ("H", "fit", "lambda_bar", "score", "BIC score", ""):
        table.add_column(column, justify="right")
    for row in result.table:
        table.add_row(str(row.H), f"{row.fit:.5f}", fraction_str(row.penalty), f"{row.score:.3f}",
                      f"{row.bic_score:.3f}", "<-" if row.H == result.selected_H else "")
    (console or _console()).print(table)
    if out_path:
        write_json(out_path, {
            "n": result.n, "selected_H": result.selected_H, "bic_selected_H": result.bic_selected_H,
            "low_confidence": result.low_confidence,
            "table": [asdict(r) for r in result.table],
        })
    return result


# --- plot-data ---

def cmd_plot_data(sweep_dir: str) -> List[str]:
    """One `.dat` learning-curve file per sweep summary found under sweep_dir."""
    summaries = sorted(glob.glob(os.path.join(sweep_dir, "**", "summary.json"), recursive=True))
    if not summaries:
        raise ConfigError(f"No sweep summary.json found under {sweep_dir}")
    out_dir = os.path.join(sweep_dir, PLOT_DATA_SUBDIR)
    written = []
    for path in summaries:
        summary = read_json(path)
        dims = ModelDims(**summary["dims"])
        bound = float(Fraction(summary["lambda_bar"]))
        half_d = float(Fraction(summary["half_d"]))
        rows = []
        for r in summary["records"]:
            n = r["n"]
            # records hold n * mean(G_n); the plot is on the G_n scale
            mean_g = float(r["empirical"]) / n
            ci = float(r["ci_halfwidth"]) / n
            if math.isnan(ci):
                ci = 0.0
            rows.append([n, mean_g, mean_g - ci, mean_g + ci, bound / n, half_d / n])
        target = os.path.join(out_dir, f"{dims.label()}_{summary['config_hash'][:12]}.dat")
        written.append(write_dat(target, ["n", "empirical", "ci_lo", "ci_hi", "bound_over_n", "regular_over_n"],
                                 rows))
    logger.info(f"Plot data: wrote {len(written)} file(s) to {out_dir}")
    return written

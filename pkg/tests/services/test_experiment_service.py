# filename: tests/services/test_experiment_service.py
import csv
import io
import os

import numpy as np
import pytest
from rich.console import Console

import services.experiment_service as experiment_service
import services.simulation_service as simulation_service
from db.connection import close_db, init_db, ledger_path
from db.repository import list_points
from parsers.config_parser import config_hash, parse_config
from parsers.matrix_parser import write_dataset
from services.experiment_service import (
    SweepRunner, cmd_bound, cmd_estimate, cmd_plot_data, cmd_select, cmd_sweep, resolve_truth,
)
from state.models import EstimationMethod, ModelDims, PointStatus, WordDataset
from utils.errors import ConfigError, NumericalGuardError, PartialFailureError
from utils.result_writer import read_json


def quiet():
    return Console(file=io.StringIO())


def make_config(tmp_path, **overrides):
    payload = {
        "dims": {"M": 2, "N": 2, "H": 1, "H0": 1},
        "n_grid": [20, 40, 80],
        "replicates": 4,
        "master_seed": 5,
        "output_dir": str(tmp_path / "runs"),
    }
    payload.update(overrides)
    return parse_config(payload)


def run_dir(config):
    return os.path.join(config.output_dir, f"{config.dims.label()}_{config_hash(config)[:12]}")


def test_bound_single_dims():
    rows = cmd_bound(dims=ModelDims(3, 3, 2, 2), console=quiet())
    assert len(rows) == 1
    assert str(rows[0].lambda_bar) == "5/2"


def test_bound_grid_csv(tmp_path):
    path = tmp_path / "bounds.csv"
    rows = cmd_bound(grid_tokens=["M=2..4", "N=2..4", "H0=1..2", "H=H0..3"], csv_path=str(path), console=quiet())
    assert len(rows) == 45
    with open(path, newline="", encoding="utf-8") as f:
        table = list(csv.DictReader(f))
    assert len(table) == 45
    first = table[0]
    assert (first["M"], first["N"], first["H"], first["H0"]) == ("2", "2", "1", "1")
    assert first["lambda_bar"] == "1/2"
    assert first["gap"] == "0/1"


@pytest.mark.parametrize("kwargs", [{}, {"dims": ModelDims(2, 2, 1, 1), "grid_tokens": ["M=2", "N=2", "H0=1"]}])
def test_bound_needs_exactly_one_source(kwargs):
    with pytest.raises(ConfigError):
        cmd_bound(console=quiet(), **kwargs)


def test_truth_is_reproducible_from_seed(tmp_path):
    config = make_config(tmp_path)
    assert np.array_equal(resolve_truth(config).product_matrix, resolve_truth(config).product_matrix)


def test_estimate_gen_error_writes_report(tmp_path):
    config = make_config(tmp_path)
    report = cmd_estimate(config, EstimationMethod.GEN_ERROR)
    assert [c["n"] for c in report["curve"]] == [20, 40, 80]
    assert os.path.exists(os.path.join(run_dir(config), "estimate_gen-error.json"))
    assert os.path.exists(os.path.join(run_dir(config), "gen_error_curve.csv"))
    assert os.path.exists(os.path.join(run_dir(config), "truth.json"))


def test_estimate_free_energy_one_topic(tmp_path):
    config = make_config(tmp_path, n_grid=[10, 50, 200, 1000], replicates=2, method="free-energy")
    report = cmd_estimate(config)
    assert len(report["points"]) == 8
    assert np.isfinite(report["lambda_hat"])
    saved = read_json(os.path.join(run_dir(config), "estimate_free-energy.json"))
    assert saved["lambda_bar"] == "1/2"


def test_estimate_free_energy_refuses_large_dimension(tmp_path):
    config = make_config(tmp_path, dims={"M": 3, "N": 3, "H": 2, "H0": 2}, method="free-energy")
    with pytest.raises(NumericalGuardError, match="d = 7"):
        cmd_estimate(config)
    assert not os.path.exists(run_dir(config))


def test_estimate_volume_writes_counts(tmp_path):
    config = make_config(tmp_path, method="volume", estimator={
        "num_samples": 20000, "t_grid": [1e-1, 3e-2, 1e-2, 3e-3, 1e-3], "include_log_term": False,
    })
    report = cmd_estimate(config)
    assert report["lambda_hat"] > 0
    assert report["objective"] == "sq_error"
    with open(os.path.join(run_dir(config), "volume_counts.csv"), encoding="utf-8") as f:
        assert f.readline().strip() == "t,count,usable"


def test_sweep_is_deterministic_across_output_dirs(tmp_path):
    first = make_config(tmp_path / "a")
    second = make_config(tmp_path / "b")
    cmd_sweep(first)
    cmd_sweep(second)
    for name in ("summary.json", "learning_curve.csv", "truth.json", os.path.join("points", "n_00000040.json")):
        with open(os.path.join(run_dir(first), name), "rb") as f1, open(os.path.join(run_dir(second), name), "rb") as f2:
            assert f1.read() == f2.read()


def test_sweep_resumes_and_skips_finished_points(tmp_path):
    config = make_config(tmp_path)
    summary = cmd_sweep(config)
    assert [r["n"] for r in summary["records"]] == [20, 40, 80]
    with open(os.path.join(run_dir(config), "summary.json"), "rb") as f:
        original = f.read()

    os.remove(os.path.join(run_dir(config), "points", "n_00000080.json"))
    cmd_sweep(config)
    with open(os.path.join(run_dir(config), "summary.json"), "rb") as f:
        assert f.read() == original

    conn = init_db(ledger_path(config.output_dir))
    statuses = {row["n"]: row["status"] for row in list_points(conn, config_hash(config))}
    close_db(conn)
    assert statuses == {20: PointStatus.SKIPPED_EXISTING.value, 40: PointStatus.SKIPPED_EXISTING.value,
                        80: PointStatus.COMPLETED.value}


def test_sweep_reports_partial_failure(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("sampler crashed")

    monkeypatch.setattr(simulation_service, "collapsed_gibbs", broken)
    config = make_config(tmp_path, dims={"M": 2, "N": 2, "H": 2, "H0": 1}, n_grid=[20])
    with pytest.raises(PartialFailureError):
        SweepRunner(config, test_mode=True).run()
    # results are still written
    assert os.path.exists(os.path.join(run_dir(config), "summary.json"))


def test_failed_point_does_not_stop_the_sweep(tmp_path, monkeypatch):
    original = experiment_service._gen_error_summary

    def flaky(config, truth, n):
        if n == 40:
            raise OSError("disk full")
        return original(config, truth, n)

    monkeypatch.setattr(experiment_service, "_gen_error_summary", flaky)
    config = make_config(tmp_path)
    with pytest.raises(PartialFailureError, match="40"):
        SweepRunner(config, test_mode=True).run()

    summary = read_json(os.path.join(run_dir(config), "summary.json"))
    assert [r["n"] for r in summary["records"]] == [20, 80]
    assert os.path.exists(os.path.join(run_dir(config), "points", "n_00000080.json"))
    conn = init_db(ledger_path(config.output_dir))
    statuses = {row["n"]: row["status"] for row in list_points(conn, config_hash(config))}
    close_db(conn)
    assert statuses[40] == PointStatus.FAILED.value
    assert statuses[80] == PointStatus.COMPLETED.value


def test_plot_data_from_sweep(tmp_path):
    config = make_config(tmp_path)
    cmd_sweep(config)
    (path,) = cmd_plot_data(config.output_dir)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "# n empirical ci_lo ci_hi bound_over_n regular_over_n"
    assert len(lines) == 4
    n, _, _, _, bound, regular = lines[1].split()
    assert float(bound) == pytest.approx(0.5 / int(n))
    assert float(regular) == pytest.approx(0.5 / int(n))


def test_plot_data_needs_a_sweep(tmp_path):
    with pytest.raises(ConfigError):
        cmd_plot_data(str(tmp_path))


def test_select_single_candidate(tmp_path, rng):
    path = tmp_path / "counts.txt"
    write_dataset(str(path), WordDataset(rng.integers(0, 50, size=(3, 4))))
    result = cmd_select([1], dataset_paths=[str(path)], console=quiet())
    assert result.selected_H == 1


def test_select_flags_small_datasets(tmp_path):
    path = tmp_path / "counts.txt"
    write_dataset(str(path), WordDataset(np.array([[2, 1], [1, 3], [2, 1]])))
    out = tmp_path / "select.json"
    result = cmd_select([1, 2], dataset_paths=[str(path)], console=quiet(), out_path=str(out))
    assert result.low_confidence
    saved = read_json(str(out))
    assert saved["n"] == 10
    assert saved["low_confidence"] is True


def test_select_from_config(tmp_path):
    config = make_config(tmp_path, n_grid=[200])
    result = cmd_select([1, 2], config=config, console=quiet())
    assert result.n == 200
    assert result.selected_H in (1, 2)


def test_select_needs_data():
    with pytest.raises(ConfigError):
        cmd_select([1], console=quiet())

# filename: tests/parsers/test_matrix_parser.py
import json

import numpy as np
import pytest

from kernels.stochastic_matrix import GroundTruth
from parsers.matrix_parser import (
    format_matrix_text, load_truth, parse_matrix_text, read_dataset, read_stochastic_matrix, save_truth,
    write_dataset, write_matrix,
)
from state.models import ModelDims, WordDataset
from utils.errors import ConfigError, DataFileError, ShapeMismatchError


@pytest.mark.parametrize("text, expected", [
    ("2 2\n0.5 0.25\n0.5 0.75\n", [[0.5, 0.25], [0.5, 0.75]]),
    ("# counts\n\n1 3\n1 2 3\n", [[1, 2, 3]]),
    ("2 1\n  1e-1\n0.9  \n", [[0.1], [0.9]]),
])
def test_parse_matrix_text(text, expected):
    assert np.array_equal(parse_matrix_text(text), np.array(expected, dtype=float))


@pytest.mark.parametrize("text, error", [
    ("", ValueError),
    ("2\n1 2\n", ValueError),
    ("1 2\n1 x\n", ValueError),
    ("2 2\n1 2\n", ShapeMismatchError),
    ("1 2\n1 2 3\n", ShapeMismatchError),
])
def test_parse_matrix_text_errors(text, error):
    with pytest.raises(error):
        parse_matrix_text(text)


def test_format_keeps_integers_plain():
    assert format_matrix_text(np.array([[1, 0], [2, 5]])) == "2 2\n1 0\n2 5\n"


def test_stochastic_matrix_file(tmp_path):
    path = tmp_path / "A.txt"
    write_matrix(str(path), np.array([[0.1, 0.6], [0.9, 0.4]]))
    assert read_stochastic_matrix(str(path)).shape == (2, 2)
    write_matrix(str(path), np.array([[0.1, 0.6], [0.8, 0.4]]))
    with pytest.raises(ValueError):
        read_stochastic_matrix(str(path))


def test_dataset_file(tmp_path):
    path = tmp_path / "counts.txt"
    write_dataset(str(path), WordDataset(np.array([[3, 0, 1], [2, 4, 0]])))
    dataset = read_dataset(str(path))
    assert dataset.n == 10
    assert dataset.doc_totals.tolist() == [5, 4, 1]


def test_dataset_rejects_fractional_counts(tmp_path):
    path = tmp_path / "counts.txt"
    path.write_text("1 2\n1.5 2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_dataset(str(path))


def test_truth_file(tmp_path, rng):
    truth = GroundTruth.sample(ModelDims(3, 2, 2, 2), rng, seed=42)
    path = tmp_path / "truth.json"
    save_truth(str(path), truth)
    loaded = load_truth(str(path))
    assert np.allclose(loaded.product_matrix, truth.product_matrix, rtol=0, atol=1e-15)
    assert loaded.seed == 42


@pytest.mark.parametrize("payload", [
    "not json",
    json.dumps({"A0": [[0.5], [0.5]]}),
    json.dumps({"A0": [[0.5], [0.6]], "B0": [[1.0, 1.0]], "doc_dist": [0.5, 0.5]}),
])
def test_load_truth_errors(tmp_path, payload):
    path = tmp_path / "truth.json"
    path.write_text(payload, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_truth(str(path))


def test_load_truth_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_truth(str(tmp_path / "absent.json"))


@pytest.mark.parametrize("reader", [read_dataset, read_stochastic_matrix, load_truth])
def test_unreadable_file_names_the_path(tmp_path, reader):
    path = str(tmp_path / "missing" / "counts.txt")
    with pytest.raises(DataFileError, match="missing"):
        reader(path)

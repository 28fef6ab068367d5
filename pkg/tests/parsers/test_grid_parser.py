# filename: tests/parsers/test_grid_parser.py
import pytest
from parsers.grid_parser import GridSpec, parse_grid
from utils.errors import ConfigError


@pytest.mark.parametrize("tokens, expected", [
    (
        ["M=2..4", "N=2..4", "H0=1..2", "H=H0..3"],
        GridSpec(M_values=[2, 3, 4], N_values=[2, 3, 4], H0_values=[1, 2], H_max=3)
    ),
    ( # single values and an explicit H
        ["M=3", "N=5", "H0=2", "H=4"],
        GridSpec(M_values=[3], N_values=[5], H0_values=[2], H_max=4)
    ),
    ( # H omitted: H runs up to the largest H0
        ["N=2..3", "M=2", "H0=1..3"],
        GridSpec(M_values=[2], N_values=[2, 3], H0_values=[1, 2, 3], H_max=3)
    ),
    ( # surrounding whitespace
        [" M=2 ", "N=2", "H0=1", " H=H0..2"],
        GridSpec(M_values=[2], N_values=[2], H0_values=[1], H_max=2)
    ),
])
def test_parse_grid(tokens, expected):
    assert parse_grid(tokens) == expected


@pytest.mark.parametrize("tokens", [
    ["M=2..4", "N=2..4"],                      # H0 missing
    ["M=4..2", "N=2", "H0=1"],                 # empty range
    ["M=2", "M=3", "N=2", "H0=1"],             # repeated dimension
    ["M=2", "N=2", "H0=1", "H=1..3"],          # H range must start at H0
    ["M=2", "N=2", "H0=1", "K=3"],             # unknown name
    ["M=two", "N=2", "H0=1"],
    [],
])
def test_parse_grid_errors(tokens):
    with pytest.raises(ConfigError):
        parse_grid(tokens)

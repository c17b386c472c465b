"""Price discretization: grid construction and binary-expansion codec."""

import numpy as np
import pytest

from edgemarket.price_grid import (PriceGridSpec, binary_expansion_bits,
                                   discretize_range, level_from_bits)


def test_grid_levels_are_left_endpoints():
    spec = discretize_range(0.01, 0.05, 2)
    assert spec.delta == pytest.approx(0.01)
    assert np.allclose(spec.levels, [0.01, 0.02, 0.03, 0.04])
    assert len(spec.levels) == 4
    assert spec.levels[-1] + spec.delta == pytest.approx(spec.p_max)


def test_grid_levels_immutable():
    spec = discretize_range(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        spec.levels[0] = 9.0


@pytest.mark.parametrize("bits", [1, 2, 3, 5])
def test_expansion_round_trips_every_level(bits):
    for level in range(2 ** bits):
        digits = binary_expansion_bits(level, bits)
        assert len(digits) == bits + 1
        assert all(d in (0, 1) for d in digits)
        assert level_from_bits(digits) == level


def test_expansion_is_lsb_first():
    assert binary_expansion_bits(1, 2) == [1, 0, 0]
    assert binary_expansion_bits(2, 2) == [0, 1, 0]


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        discretize_range(0.05, 0.01, 2)
    with pytest.raises(ValueError):
        discretize_range(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        binary_expansion_bits(4, 2)
    with pytest.raises(ValueError):
        binary_expansion_bits(-1, 2)
    with pytest.raises(ValueError):
        level_from_bits([0, 2])

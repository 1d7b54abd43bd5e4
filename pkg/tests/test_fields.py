import numpy as np
import pytest

from reconlab.fields import MultiscaleField, default_stride
from reconlab.grid import DyadicGrid

G = DyadicGrid(10)


def test_default_stride_gives_eight_points_per_diameter():
    for k in range(1, 7):
        assert G.size // default_stride(G, k) == 2 ** (k + 3)
    assert default_stride(G, 9) == 1


def test_from_function_and_accessors():
    H = MultiscaleField.from_function(G, [3, 2], lambda k, x: k + x)
    assert H.ks == (3, 2) and H.k_range == (2, 3)
    np.testing.assert_allclose(H.level(2), 2 + H.points(2))
    assert H.stride(3) == default_stride(G, 3)
    rows = list(H.rows())
    assert len(rows) == sum(G.size // s for s in H.strides)
    assert H.max() == pytest.approx(3 + H.points(3)[-1])


def test_levels_are_read_only():
    H = MultiscaleField.from_levels(G, {2: np.zeros(32)})
    with pytest.raises(ValueError):
        H.level(2)[0] = 1.0


@pytest.mark.parametrize("levels,strides", [
    ({2: np.zeros(30)}, None),
    ({2: np.zeros(32)}, {2: 3}),
    ({2: np.zeros(32)}, {2: 16}),
])
def test_validation(levels, strides):
    with pytest.raises(ValueError):
        MultiscaleField.from_levels(G, levels, strides)


def test_add_requires_same_layout():
    a = MultiscaleField.from_function(G, [2, 3], lambda k, x: 1 + 0 * x)
    b = MultiscaleField.from_function(G, [2, 4], lambda k, x: 1 + 0 * x)
    np.testing.assert_array_equal((a + a).level(3), 2.0)
    with pytest.raises(ValueError):
        a + b


def test_restrict_and_map():
    H = MultiscaleField.from_function(G, range(2, 6), lambda k, x: -1.0 + 0 * x)
    assert H.restrict([3, 4]).ks == (3, 4)
    assert H.map(np.abs).min() == 1.0
    assert not H.map(lambda v: v * np.inf).is_finite()

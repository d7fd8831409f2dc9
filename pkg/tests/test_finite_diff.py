import numpy as np
import pytest

from holowave.finite_diff import central_weights, fornberg_weights, history_derivative


def test_three_point_second_derivative():
    np.testing.assert_allclose(central_weights(2, 2), [1.0, -2.0, 1.0], atol=1e-14)


def test_classic_first_derivative_stencil():
    # fourth-order central first derivative: (1, -8, 0, 8, -1) / 12
    np.testing.assert_allclose(central_weights(1, 4), np.array([1, -8, 0, 8, -1]) / 12.0,
                               atol=1e-14)


def test_weights_reproduce_polynomials():
    nodes = np.array([-0.3, 0.1, 0.4, 1.2, 1.7])
    w = fornberg_weights(0.5, nodes, 4)
    for k in range(5):
        for deg in range(5):
            exact = 0.0 if deg < k else np.prod(np.arange(deg - k + 1, deg + 1)) * 0.5 ** (deg - k)
            assert w[k] @ nodes ** deg == pytest.approx(exact, abs=1e-9)


def test_history_derivative_on_sine():
    h = 0.01
    t = h * np.arange(200)
    d2 = history_derivative(np.sin(t), h, 2, accuracy=6)
    np.testing.assert_allclose(d2, -np.sin(t), atol=1e-7)
    with pytest.raises(ValueError):
        history_derivative(np.zeros(3), h, 2)

import numpy as np
import pytest

from holowave.angular import ZonalBasis, sphere_area


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_orthonormal(n):
    b = ZonalBasis(n, 8)
    gram = (b.values * b.weights) @ b.values.T
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-12)


def test_sphere_areas():
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert sphere_area(2) == pytest.approx(4 * np.pi)
    assert sphere_area(3) == pytest.approx(2 * np.pi ** 2)


@pytest.mark.parametrize("n", [4, 5])
def test_laplacian_eigenvalues(n):
    # weak form: int |grad Y_l|^2 = l (l + n - 3) for zonal modes
    b = ZonalBasis(n, 6)
    grad = (b.dtheta ** 2) @ b.weights
    np.testing.assert_allclose(grad, [b.eigenvalue(l) for l in range(7)], rtol=1e-10, atol=1e-12)


def test_project_synthesize_round_trip():
    b = ZonalBasis(4, 5)
    coeffs = np.random.default_rng(3).standard_normal((6, 7))
    np.testing.assert_allclose(b.project(b.synthesize(coeffs)), coeffs.T, atol=1e-12)

"""Zonal spherical harmonics on S^(n-2) and quadrature in the polar angle.

Zonal modes depend on the polar angle only.  For ``n >= 4`` they are
Gegenbauer polynomials ``C_l^(nu)(cos theta)`` with ``nu = (n-3)/2``; on the
circle (``n = 3``) they are ``cos(l theta)``.  Every basis function is
normalised in ``L^2`` of the round sphere.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def sphere_area(dim: int) -> float:
    """Area of the unit sphere ``S^dim``."""
    return float(2.0 * np.pi ** ((dim + 1) / 2.0) / special.gamma((dim + 1) / 2.0))


class ZonalBasis:
    """Normalised zonal harmonics ``Y_l`` for ``l <= lmax`` on ``S^(n-2)``.

    Parameters
    ----------
    n : int
        Spacetime dimension.
    lmax : int
        Highest mode.
    nquad : int, optional
        Number of polar quadrature nodes; the default integrates products of
        three basis functions exactly.
    """

    def __init__(self, n: int, lmax: int, nquad: int | None = None):
        if n < 3:
            raise ValueError("n must be at least 3")
        self.n = n
        self.lmax = lmax
        nq = nquad or (3 * lmax // 2 + 4)
        ells = np.arange(lmax + 1)
        if n == 3:
            # circle: even functions of theta on [0, 2 pi)
            theta = (np.arange(2 * nq) + 0.5) * np.pi / nq
            weights = np.full(theta.size, np.pi / nq)
            norm = np.where(ells == 0, 1.0 / np.sqrt(2.0 * np.pi), 1.0 / np.sqrt(np.pi))
            self.values = norm[:, None] * np.cos(ells[:, None] * theta[None, :])
            self.dtheta = -norm[:, None] * ells[:, None] * np.sin(ells[:, None] * theta[None, :])
        else:
            nu = 0.5 * (n - 3)
            t, w = special.roots_gegenbauer(nq, nu)
            theta = np.arccos(t)
            weights = w * sphere_area(n - 3)
            raw = np.stack([special.eval_gegenbauer(l, nu, t) for l in ells])
            draw = np.stack([2.0 * nu * special.eval_gegenbauer(l - 1, nu + 1.0, t) if l > 0
                             else np.zeros_like(t) for l in ells])
            norm = 1.0 / np.sqrt(raw ** 2 @ weights)
            self.values = norm[:, None] * raw
            # d/dtheta = -sin(theta) d/dt
            self.dtheta = -norm[:, None] * draw * np.sin(theta)[None, :]
        self.theta = theta
        self.weights = weights

    def eigenvalue(self, ell: int) -> float:
        return float(ell * (ell + self.n - 3))

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on ``(x, theta)`` from radial mode profiles ``coeffs[l, x]``."""
        return np.asarray(coeffs).T @ self.values[: len(coeffs)]

    def synthesize_dtheta(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs).T @ self.dtheta[: len(coeffs)]

    def project(self, values: np.ndarray, lmax: int | None = None) -> np.ndarray:
        """Mode profiles ``[l, x]`` of a field sampled on ``(x, theta)``."""
        top = self.lmax if lmax is None else lmax
        return (values * self.weights[None, :]) @ self.values[: top + 1].T

    def angular_derivative(self, coeffs: np.ndarray, order: int) -> np.ndarray:
        """Magnitude-type angular derivative of order ``order`` on ``(x, theta)``.

        Even orders apply ``(-Laplacian)**(order/2)``; odd orders take the
        gradient magnitude of ``(-Laplacian)**((order-1)/2)`` applied to
        the field.  This matches the mode-wise weights ``lambda**(order/2)``
        in ``L^2`` of the sphere.
        """
        lam = np.array([self.eigenvalue(l) for l in range(len(coeffs))])
        half = order // 2
        scaled = np.asarray(coeffs) * (lam ** half)[:, None]
        if order % 2 == 0:
            return self.synthesize(scaled)
        return np.abs(self.synthesize_dtheta(scaled))

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sphere integral of samples on ``(x, theta)``, one value per ``x``."""
        return values @ self.weights

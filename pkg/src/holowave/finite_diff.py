"""Finite-difference weights on arbitrary stencils.

Implements Fornberg's recursion for the weights of derivatives of any order
at an arbitrary evaluation point.
"""

from __future__ import annotations

import numpy as np


def fornberg_weights(z: float, nodes, order: int) -> np.ndarray:
    """Weights ``w[k, j]`` so that ``f^(k)(z) ~ sum_j w[k, j] f(nodes[j])``.

    Parameters
    ----------
    z : float
        Evaluation point.
    nodes : array_like
        Distinct stencil nodes.
    order : int
        Highest derivative order requested.

    Returns
    -------
    ndarray of shape ``(order + 1, len(nodes))``
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    c = np.zeros((order + 1, n))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def central_weights(order: int, accuracy: int) -> np.ndarray:
    """Symmetric stencil weights for the ``order``-th derivative on unit spacing.

    The stencil has ``2 * ((order + 1) // 2) - 1 + accuracy`` points.
    """
    half = (2 * ((order + 1) // 2) - 1 + accuracy) // 2
    nodes = np.arange(-half, half + 1, dtype=float)
    return fornberg_weights(0.0, nodes, order)[order]


def history_derivative(samples: np.ndarray, spacing: float, order: int,
                       accuracy: int = 4) -> np.ndarray:
    """Derivative of a uniformly sampled history along axis 0.

    Central stencils are used in the interior and one-sided stencils of the
    same width near the ends, so every level gets a value.
    """
    samples = np.asarray(samples, dtype=float)
    nlev = samples.shape[0]
    width = 2 * ((order + 1) // 2) - 1 + accuracy
    if order == 0:
        return samples.copy()
    if nlev < width:
        raise ValueError(f"need at least {width} levels for derivative order {order}")
    half = width // 2
    out = np.empty_like(samples)
    idx = np.arange(width)
    for lev in range(nlev):
        start = min(max(lev - half, 0), nlev - width)
        w = fornberg_weights(float(lev - start), idx.astype(float), order)[order]
        out[lev] = np.tensordot(w, samples[start : start + width], axes=(0, 0))
    return out / spacing ** order

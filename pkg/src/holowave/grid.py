"""Radial grids on (0, a] carrying the weighted measure x dx.

Grids are built once on (0, 1] and scaled by the patch width, so a family
of grids for different widths are exact dilations of each other.  This keeps
scale-covariant estimates free of discretization noise when ``a`` varies.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatch

GRID_KINDS = ("uniform", "graded", "geometric")


def _graded_template(npoints: int, ratio: float, x_min: float) -> np.ndarray:
    """Geometric grading near zero that turns uniform once steps reach ``h``.

    The uniform step ``h`` is found by bisection so the last node lands on 1.
    If the pure geometric sequence with the requested ratio is too short to
    reach 1, a pure geometric grid with a larger ratio is returned.
    """
    if x_min * ratio ** (npoints - 1) <= 1.0:
        return _geometric_template(npoints, x_min)

    def build(h):
        pts = np.empty(npoints)
        pts[0] = x_min
        # number of purely geometric steps before the cap h applies
        cap = h / (ratio - 1.0)
        if x_min >= cap:
            ngeo = 0
        else:
            ngeo = int(np.ceil(np.log(cap / x_min) / np.log(ratio)))
        ngeo = min(ngeo, npoints - 1)
        pts[: ngeo + 1] = x_min * ratio ** np.arange(ngeo + 1)
        rest = npoints - 1 - ngeo
        pts[ngeo + 1 :] = pts[ngeo] + h * np.arange(1, rest + 1)
        return pts

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if build(mid)[-1] < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    pts = build(hi)
    return pts / pts[-1]


def _geometric_template(npoints: int, x_min: float) -> np.ndarray:
    t = np.linspace(np.log(x_min), 0.0, npoints)
    pts = np.exp(t)
    pts[-1] = 1.0
    return pts


def _uniform_template(npoints: int) -> np.ndarray:
    return np.arange(1, npoints + 1, dtype=float) / npoints


class RadialGrid:
    """Ascending nodes ``x_1 < ... < x_N = a`` with dual-cell weights.

    Parameters
    ----------
    points : array_like
        Strictly increasing positive nodes ending at the patch width.
    kind : str
        One of ``uniform``, ``graded`` or ``geometric`` (informational).
    build : dict, optional
        Construction parameters, kept so the grid can be refined or rescaled.

    Notes
    -----
    The node weight is the measure ``x dx`` of the dual cell bounded by the
    arithmetic midpoints of neighbouring nodes, with the first dual cell
    extending down to zero and the last one ending at ``a``.  The weights
    therefore sum to ``a**2 / 2`` exactly.
    """

    def __init__(self, points, kind: str = "graded", build: dict | None = None):
        x = np.asarray(points, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("a radial grid needs at least three nodes")
        if x[0] <= 0.0 or np.any(np.diff(x) <= 0.0):
            raise ValueError("grid nodes must be positive and strictly increasing")
        self.points = x
        self.kind = kind
        self.build = dict(build or {})
        mid = 0.5 * (x[1:] + x[:-1])
        edges = np.concatenate(([0.0], mid, [x[-1]]))
        self.weights = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2)
        self._cache: dict = {}

    # construction ------------------------------------------------------
    @classmethod
    def make(
        cls,
        npoints: int,
        a: float = 1.0,
        kind: str = "graded",
        ratio: float = 1.05,
        x_min_factor: float = 1e-4,
    ) -> "RadialGrid":
        """Build a grid of ``npoints`` nodes on ``(0, a]``."""
        if kind == "uniform":
            tmpl = _uniform_template(npoints)
        elif kind == "graded":
            tmpl = _graded_template(npoints, ratio, x_min_factor)
        elif kind == "geometric":
            tmpl = _geometric_template(npoints, x_min_factor)
        else:
            raise ValueError(f"unknown grid kind {kind!r}")
        build = dict(npoints=npoints, a=a, kind=kind, ratio=ratio, x_min_factor=x_min_factor)
        return cls(a * tmpl, kind=kind, build=build)

    def with_width(self, a: float) -> "RadialGrid":
        """Same template dilated to width ``a``."""
        return RadialGrid(self.points * (a / self.a), kind=self.kind,
                          build={**self.build, "a": a})

    def refined(self) -> "RadialGrid":
        """Twice the nodes, square-rooted grading ratio, half the inner node."""
        b = self.build
        if not b:
            raise ValueError("grid was not built by RadialGrid.make")
        return RadialGrid.make(2 * b["npoints"], b["a"], b["kind"], np.sqrt(b["ratio"]),
                               0.5 * b["x_min_factor"])

    # properties --------------------------------------------------------
    @property
    def a(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    def __len__(self) -> int:
        return self.size

    def same_as(self, other: "RadialGrid") -> bool:
        return other is self or (
            other.size == self.size and np.array_equal(other.points, self.points)
        )

    def check_same(self, other: "RadialGrid") -> None:
        if not self.same_as(other):
            raise GridMismatch("grid functions live on different grids",
                               sizes=(self.size, other.size))

    # quadrature --------------------------------------------------------
    def integrate(self, values) -> float:
        """Integral of nodal samples against ``x dx`` over ``(0, a]``.

        Trapezoid rule on ``[x_1, a]``; the first cell ``[0, x_1]`` is
        integrated exactly for a power law fitted to the two innermost nodes.
        """
        f = np.asarray(values, dtype=float)
        x = self.points
        g = f * x
        body = float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(x)))
        return body + self._first_cell(f[0], f[1])

    def _first_cell(self, f1: float, f2: float) -> float:
        x1, x2 = self.points[0], self.points[1]
        if f1 == 0.0:
            return 0.0
        if f2 == 0.0 or np.sign(f1) != np.sign(f2):
            return 0.5 * f1 * x1 * x1
        p = np.log(f2 / f1) / np.log(x2 / x1)
        if p <= -2.0 + 1e-9:
            # non-integrable trend; fall back to the constant extension
            return 0.5 * f1 * x1 * x1
        return f1 * x1 * x1 / (p + 2.0)

    def __repr__(self) -> str:
        return f"RadialGrid(N={self.size}, a={self.a:g}, kind={self.kind!r})"

"""Closed-form radial solutions of the overdetermined problem.

For a uniform sphere measure at radius ``rho`` the solution on the ball of
radius ``R`` is radial and harmonic on the annulus, constant inside the
support, and normalised so that |grad u| = 1 on the outer sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSolutionError, PreconditionError, UnsupportedOnGridError
from .fields import DomainMask, Grid, ScalarField
from .geometry import ConvexBody
from .measures import MeasureSpec


@dataclass(frozen=True)
class RadialSolution:
    dim: int
    rho: float
    R: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidSolutionError("dimension must be at least 2")
        if not (0 < self.rho < self.R):
            raise InvalidSolutionError(f"need 0 < rho < R, got rho={self.rho}, R={self.R}")
        if len(self.center) != self.dim:
            object.__setattr__(self, "center", tuple([0.0] * self.dim))

    # -- radial profile --------------------------------------------------

    def u_of_r(self, r):
        r = np.maximum(np.asarray(r, dtype=float), self.rho)
        N, R = self.dim, self.R
        if N == 2:
            return R * np.log(R / r)
        return R ** (N - 1) / (N - 2) * (r ** (2 - N) - R ** (2 - N))

    def du_dr(self, r):
        r = np.asarray(r, dtype=float)
        N, R = self.dim, self.R
        g = -(R ** (N - 1)) * np.power(np.where(r > 0, r, 1.0), 1 - N)
        return np.where(r < self.rho, 0.0, g)

    @property
    def max_u(self):
        return float(self.u_of_r(self.rho))

    @property
    def total_mass(self):
        # |boundary sphere| since |grad u| = 1 there
        N = self.dim
        return 2 * math.pi ** (N / 2) / math.gamma(N / 2) * self.R ** (N - 1)

    def level_radius(self, t):
        t = np.asarray(t, dtype=float)
        N, R = self.dim, self.R
        if N == 2:
            return R * np.exp(-t / R)
        return (t * (N - 2) / R ** (N - 1) + R ** (2 - N)) ** (1.0 / (2 - N))

    # -- thickness quantities ----------------------------------------------

    def d(self, c=None):
        """Extent of every outer normal ray of the support ball."""
        return self.R - self.rho

    def d_t(self, t, c=None):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t >= self.max_u):
            raise PreconditionError("level must lie in [0, max u)")
        return self.level_radius(t) - self.rho

    def grad_norm_on_level(self, t):
        return -self.du_dr(self.level_radius(t))

    def dd_dt(self, t):
        """Exact t-derivative of the level thickness (-1/|grad u| on the level)."""
        return -1.0 / self.grad_norm_on_level(t)

    # -- pointwise evaluation ------------------------------------------------

    def _radius(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def u(self, x):
        return self.u_of_r(self._radius(x))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        v = x - np.asarray(self.center)
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r > 0, v / np.where(r > 0, r, 1.0), 0.0)
        return self.du_dr(r) * unit

    # -- companions -------------------------------------------------------------

    def measure(self) -> MeasureSpec:
        if self.dim != 2:
            raise UnsupportedOnGridError("measures are only realised in 2-D")
        return MeasureSpec.ring(self.rho, self.total_mass, self.center)

    def body(self) -> ConvexBody:
        if self.dim != 2:
            raise UnsupportedOnGridError("bodies are only realised in 2-D")
        return ConvexBody.disk(self.center, self.rho)

    def grid(self, h, margin_cells=8) -> Grid:
        c = self.center
        return Grid.covering(c[0] - self.R, c[0] + self.R, c[1] - self.R, c[1] + self.R, h, margin_cells)

    def mask(self, grid) -> DomainMask:
        return DomainMask.disk(grid, self.center, self.R)


def annulus_solution(N, rho, R, center=None) -> RadialSolution:
    if center is None:
        center = tuple([0.0] * N)
    return RadialSolution(int(N), float(rho), float(R), tuple(float(c) for c in center))


def sample_to_grid(sol: RadialSolution, grid: Grid, mask: DomainMask = None) -> ScalarField:
    """Nodewise closed form; outside the outer radius the logarithmic continuation is kept."""
    if sol.dim != 2:
        raise UnsupportedOnGridError("grid sampling is only available in 2-D")
    if mask is None:
        mask = sol.mask(grid)
    X, Y = grid.mesh()
    r = np.hypot(X - sol.center[0], Y - sol.center[1])
    if np.any(r[mask.inside] > sol.R * (1 + 1e-12) + 1e-12):
        raise PreconditionError("mask extends beyond the outer radius")
    return ScalarField(grid, sol.u_of_r(r), mask)

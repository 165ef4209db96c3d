"""Tabulated convex shape functions, Legendre duality, and the variational solver.

A shape table g lives on a grid in (-inf, 0]: piecewise linear between grid
points, extended linearly to the left with its first slope (always >= 1) and
equal to +inf for x > 0.  Its conjugate g*(v) = sup_x (x v - g(x)) gives the
tagged-particle velocity f(v) = -g*(v) as a function of the mean gap v, and
the macroscopic profile evolves by

    u(x, t) = min over y >= x of  u0(y) + t * g((x - y) / t).

For piecewise-linear g and u0 the objective is piecewise linear in y, so the
minimization is exact over the breakpoint set: no smooth solver, no
tolerance on the minimizer.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .shape import ShapeEstimate

_SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class ConvexFnTable:
    """Convex, nondecreasing table on a grid ending at 0, slopes >= 1.

    Evaluation is piecewise linear on the grid, linear with the leftmost
    observed slope below it, and +inf for x > 0.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or v.shape != g.shape:
            raise ValueError("need matching 1-d grid/values with >= 2 points")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if g[-1] != 0.0:
            raise ValueError("grid must end at 0")
        slopes = np.diff(v) / np.diff(g)
        if np.any(slopes < 1.0 - _SLOPE_TOL):
            raise ValueError("slopes must be >= 1")
        if np.any(np.diff(slopes) < -_SLOPE_TOL):
            raise ValueError("table is not convex")

    @property
    def left_slope(self) -> float:
        return float((self.values[1] - self.values[0]) / (self.grid[1] - self.grid[0]))

    @property
    def value_at_zero(self) -> float:
        """g(0); equals the free speed of the rate table that produced g."""
        return float(self.values[-1])

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, self.grid, self.values)
        below = x < self.grid[0]
        if np.any(below):
            out = np.where(
                below, self.values[0] + self.left_slope * (x - self.grid[0]), out
            )
        return np.where(x > 0.0, np.inf, out)

    @classmethod
    def from_shape_estimate(cls, est: ShapeEstimate) -> "ConvexFnTable":
        if not est.is_convexified:
            raise ValueError("convexify the estimate first")
        if est.t_macro != 1.0:
            raise ValueError("shape tables are the t_macro = 1 section")
        return cls(grid=est.x_grid, values=est.values)

    @classmethod
    def from_csv(cls, fh) -> "ConvexFnTable":
        from .shape import load_shape_csv

        x, g, _ = load_shape_csv(fh)
        return cls(grid=x, values=g)


def tasep_shape(x_min: float = -1.5, points: int = 3001) -> ConvexFnTable:
    """Analytic single-step shape: 1 - 2*sqrt(-x) on [-1, 0], x below -1.

    The two branches meet at -1 with matching slope 1.  ``points`` sets the
    tabulation resolution; conjugation error shrinks quadratically with it.
    """
    if x_min >= 0:
        raise ValueError("x_min must be negative")
    grid = np.linspace(x_min, 0.0, points)
    values = np.where(grid < -1.0, grid, 1.0 - 2.0 * np.sqrt(np.maximum(-grid, 0.0)))
    return ConvexFnTable(grid=grid, values=values)


@dataclass(frozen=True)
class DualTable:
    """Conjugate values g*(v) on a v grid; +inf marks v below the domain."""

    v_grid: np.ndarray
    values: np.ndarray


def convex_conjugate(table: ConvexFnTable, v_grid) -> DualTable:
    """g*(v) = sup_x (x v - g(x)), exact for the tabulated function.

    For v at or above the table's left slope the sup over the piecewise-linear
    extension is attained at a grid vertex; below the left slope (in
    particular below 1) the linear left tail is unbounded and the conjugate
    is +inf, returned as an explicit marker.
    """
    v = np.asarray(v_grid, dtype=np.float64)
    vals = np.max(v[:, None] * table.grid[None, :] - table.values[None, :], axis=1)
    vals = np.where(v < table.left_slope - _SLOPE_TOL, np.inf, vals)
    vals = np.where(v < 1.0, np.inf, vals)
    return DualTable(v_grid=v, values=vals)


@dataclass(frozen=True)
class FluxTable:
    """Tagged-particle velocity f(v) = -g*(v) with its density parametrization.

    ``rho`` = 1/v is the particle density; ``current`` = rho * f(1/rho).
    """

    v_grid: np.ndarray
    flux: np.ndarray
    rho: np.ndarray
    current: np.ndarray


def flux_from_shape(table: ConvexFnTable, v_grid) -> FluxTable:
    dual = convex_conjugate(table, v_grid)
    flux = -dual.values + 0.0  # + 0.0 canonicalizes IEEE negative zero
    rho = 1.0 / dual.v_grid
    return FluxTable(v_grid=dual.v_grid, flux=flux, rho=rho, current=rho * flux)


def current_curve(table: ConvexFnTable, rho_grid) -> np.ndarray:
    """Current rho * f(1/rho) on a density grid in (0, 1]."""
    rho = np.asarray(rho_grid, dtype=np.float64)
    if np.any(rho <= 0) or np.any(rho > 1):
        raise ValueError("densities must lie in (0, 1]")
    dual = convex_conjugate(table, 1.0 / rho)
    return rho * (-dual.values + 0.0)


@dataclass(frozen=True)
class MacroProfile:
    """Sampled nondecreasing profile with slopes >= 1, +inf above a cutoff."""

    grid: np.ndarray
    values: np.ndarray
    tag: str = "custom"
    inf_above: float = math.inf  # u0(y) = +inf for y > inf_above

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or v.shape != g.shape:
            raise ValueError("need matching 1-d grid/values with >= 2 points")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        slopes = np.diff(v) / np.diff(g)
        if np.any(slopes < 1.0 - _SLOPE_TOL):
            raise ValueError("profile slopes must be >= 1")

    def at(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        out = np.interp(y, self.grid, self.values)
        first = (self.values[1] - self.values[0]) / (self.grid[1] - self.grid[0])
        last = (self.values[-1] - self.values[-2]) / (self.grid[-1] - self.grid[-2])
        out = np.where(y < self.grid[0], self.values[0] + first * (y - self.grid[0]), out)
        out = np.where(y > self.grid[-1], self.values[-1] + last * (y - self.grid[-1]), out)
        return np.where(y > self.inf_above, np.inf, out)


def linear_profile(v: float, y_lo: float = -4.0, y_hi: float = 4.0) -> MacroProfile:
    if v < 1.0:
        raise ValueError("slope must be >= 1")
    return MacroProfile(
        grid=np.array([y_lo, y_hi]), values=np.array([v * y_lo, v * y_hi]), tag=f"linear:{v}"
    )


def step_profile(y_lo: float = -4.0) -> MacroProfile:
    """y on (-inf, 0], +inf above: the packed-half-line initial profile."""
    return MacroProfile(
        grid=np.array([y_lo, 0.0]),
        values=np.array([y_lo, 0.0]),
        tag="step",
        inf_above=0.0,
    )


def riemann_profile(
    slope_left: float, slope_right: float, kink: float = 0.0, half_width: float = 4.0
) -> MacroProfile:
    if slope_left < 1.0 or slope_right < 1.0:
        raise ValueError("slopes must be >= 1")
    y = np.array([kink - half_width, kink, kink + half_width])
    vals = np.array([-slope_left * half_width, 0.0, slope_right * half_width])
    return MacroProfile(grid=y, values=vals, tag=f"riemann:{slope_left},{slope_right}@{kink}")


@dataclass(frozen=True)
class HopfLaxResult:
    value: float
    minimizer: float
    y_max: float


def hopf_lax_solve(
    u0: MacroProfile,
    g: ConvexFnTable,
    x: float,
    t: float,
    y_max: float | None = None,
) -> HopfLaxResult:
    """Exact minimum of u0(y) + t * g((x - y) / t) over y in [x, y_max].

    The default truncation x + (1 + g(0)) * t plus margin is certified at run
    time: a minimizer on the right boundary raises, because past the slope-1
    region of g the objective cannot decrease (u0 has slopes >= 1).  Ties
    resolve to the smallest y, so a flat tail still reports an interior point.
    """
    if t <= 0:
        raise ValueError("invalid time")
    b1 = g.value_at_zero
    if y_max is None:
        y_max = x + (1.0 + b1) * t + 0.25 * (1.0 + b1) * t + 1.0
    if y_max < x + (1.0 + b1) * t:
        raise ValueError("y_max below the truncation rule x + (1 + g(0)) t")
    hi = min(y_max, u0.inf_above)
    if hi < x:
        raise ValueError("profile is +inf on the whole search range")
    # breakpoints of the piecewise-linear objective: u0's grid and the g grid
    # mapped through y = x - t * xg
    cand = [np.array([x, hi]), x - t * g.grid[::-1]]
    cand.append(u0.grid)
    ys = np.concatenate(cand)
    ys = np.unique(ys[(ys >= x) & (ys <= hi)])
    arg = np.minimum((x - ys) / t, 0.0)  # guard float dust above 0 at y = x
    obj = u0.at(ys) + t * g.at(arg)
    k = int(np.argmin(obj))  # leftmost minimizer on ties
    value = float(obj[k])
    minimizer = float(ys[k])
    if not math.isfinite(value):
        raise ValueError("objective is +inf on the whole search range")
    if minimizer >= y_max - 1e-12 and hi == y_max:
        raise ValueError("truncation too small")
    return HopfLaxResult(value=value, minimizer=minimizer, y_max=float(y_max))


def solve_profile(
    u0: MacroProfile, g: ConvexFnTable, x_grid, t: float, y_max: float | None = None
) -> MacroProfile:
    """Vectorized solve; output is nondecreasing with slopes >= 1 - grid tol."""
    x = np.asarray(x_grid, dtype=np.float64)
    vals = np.array([hopf_lax_solve(u0, g, float(xx), t, y_max).value for xx in x])
    finite = np.isfinite(vals)
    if not finite.all():
        raise ValueError("solution is +inf at some grid points")
    return MacroProfile(grid=x, values=vals, tag=f"evolved:{u0.tag}@t={t}")


def write_flux_csv(fh, flux: FluxTable) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["v", "g_star", "f", "rho", "current"])
    for k in range(flux.v_grid.size):
        writer.writerow(
            [
                repr(float(flux.v_grid[k])),
                repr(float(-flux.flux[k])),
                repr(float(flux.flux[k])),
                repr(float(flux.rho[k])),
                repr(float(flux.current[k])),
            ]
        )


def write_profile_csv(fh, profile: MacroProfile) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["x", "u"])
    for k in range(profile.grid.size):
        writer.writerow([repr(float(profile.grid[k])), repr(float(profile.values[k]))])

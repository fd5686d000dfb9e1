"""Probability densities on a shared one-dimensional quadrature grid.

Four density representations are supported: a single Gaussian, a Gaussian
mixture, a shifted copy of another density (signal-plus-noise models), and a
tabulated density given by values on a grid of points.  Every representation
evaluates pointwise, integrates by the composite trapezoid rule on a
``QuadratureGrid``, and samples i.i.d. draws from an explicit seed.

Analytic models are truncated to a finite support chosen wide enough that the
discarded tail mass is negligible (below 1e-10).  Tabulated models are
renormalized at construction so that their trapezoid integral over their own
grid equals one; downstream formulas assume unit mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

# Analytic supports are cut where the density falls below this fraction of
# its peak; for a Gaussian component that is about 8.6 standard deviations.
PEAK_CUTOFF = 1e-16

_SUPPORT_RADIUS_SIGMA = math.sqrt(-2.0 * math.log(PEAK_CUTOFF)) + 0.5  # ~9.1


def _as_support(lo: float, hi: float) -> tuple[float, float]:
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid support [{lo}, {hi}]")
    return (lo, hi)


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Normal density with the given mean and standard deviation."""

    mean: float
    stddev: float
    support: tuple[float, float]

    def __post_init__(self):
        if not (self.stddev > 0.0 and math.isfinite(self.stddev)):
            raise ValueError(f"stddev must be positive, got {self.stddev}")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Convex combination of Gaussians; components are (weight, mean, stddev)."""

    components: tuple[tuple[float, float, float], ...]
    support: tuple[float, float]

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("mixture needs at least one component")
        total = 0.0
        for w, _, s in self.components:
            if w < 0.0:
                raise ValueError(f"negative mixture weight {w}")
            if not (s > 0.0 and math.isfinite(s)):
                raise ValueError(f"stddev must be positive, got {s}")
            total += w
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-10):
            raise ValueError(f"mixture weights sum to {total}, expected 1")


@dataclass(frozen=True, eq=False)
class Shifted:
    """Density of ``base + shift``, i.e. base evaluated at y - shift."""

    base: "DensityModel"
    shift: float
    support: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Density given by nonnegative values on strictly increasing points.

    Values are renormalized at construction so the trapezoid integral over
    the points equals one.  Evaluation interpolates linearly between points
    and is zero outside of them.
    """

    points: np.ndarray
    values: np.ndarray
    support: tuple[float, float]


DensityModel = Union[Gaussian, GaussianMixture, Shifted, Tabulated]


def gaussian(mean: float, stddev: float, support: tuple[float, float] | None = None) -> Gaussian:
    """Build a Gaussian model, choosing a wide-enough support when not given."""
    if support is None:
        if not (stddev > 0.0):
            raise ValueError(f"stddev must be positive, got {stddev}")
        r = _SUPPORT_RADIUS_SIGMA * stddev
        support = (mean - r, mean + r)
    return Gaussian(float(mean), float(stddev), _as_support(*support))


def gaussian_mixture(
    components, support: tuple[float, float] | None = None
) -> GaussianMixture:
    """Build a Gaussian mixture from (weight, mean, stddev) triples."""
    comps = tuple((float(w), float(m), float(s)) for w, m, s in components)
    if support is None:
        if any(s <= 0.0 for _, _, s in comps):
            raise ValueError("stddev must be positive")
        lo = min(m - _SUPPORT_RADIUS_SIGMA * s for _, m, s in comps)
        hi = max(m + _SUPPORT_RADIUS_SIGMA * s for _, m, s in comps)
        support = (lo, hi)
    return GaussianMixture(comps, _as_support(*support))


def shifted(base: DensityModel, shift: float) -> Shifted:
    """Model of ``Y = base + shift``; pdf(y) = base pdf at y - shift."""
    lo, hi = base.support
    return Shifted(base, float(shift), _as_support(lo + shift, hi + shift))


def tabulated(points, values) -> Tabulated:
    """Build a renormalized tabulated density from grid points and values."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    val = np.ascontiguousarray(values, dtype=np.float64)
    if pts.ndim != 1 or pts.shape != val.shape or pts.size < 3:
        raise ValueError("points and values must be equal-length 1-D arrays, length >= 3")
    if not np.all(np.diff(pts) > 0.0):
        raise ValueError("points must be strictly increasing")
    if np.any(val < 0.0) or not np.all(np.isfinite(val)):
        raise ValueError("values must be finite and nonnegative")
    mass = np.trapezoid(val, pts)
    if mass <= 0.0:
        raise ValueError("tabulated values integrate to zero")
    val = val / mass
    val.setflags(write=False)
    pts.setflags(write=False)
    return Tabulated(pts, val, (float(pts[0]), float(pts[-1])))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Strictly increasing points with composite trapezoid weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts, w = self.points, self.weights
        if pts.ndim != 1 or pts.size < 3 or pts.shape != w.shape:
            raise ValueError("grid needs >= 3 points and matching weights")
        if not np.all(np.diff(pts) > 0.0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")
        span = float(pts[-1] - pts[0])
        if abs(float(np.sum(w)) - span) > 1e-12 * span:
            raise ValueError("weights must sum to the grid span")

    @property
    def count(self) -> int:
        return int(self.points.size)

    @property
    def span(self) -> tuple[float, float]:
        return (float(self.points[0]), float(self.points[-1]))


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights for arbitrary strictly increasing points."""
    d = np.diff(points)
    w = np.zeros_like(points)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def make_grid(y_min: float, y_max: float, n: int = 4001) -> QuadratureGrid:
    """Uniform quadrature grid with n points on [y_min, y_max]."""
    if n < 3:
        raise ValueError(f"grid needs at least 3 points, got {n}")
    if not (y_max > y_min):
        raise ValueError(f"empty grid range [{y_min}, {y_max}]")
    pts = np.linspace(float(y_min), float(y_max), int(n))
    grid = QuadratureGrid(pts, trapezoid_weights(pts))
    pts.setflags(write=False)
    grid.weights.setflags(write=False)
    return grid


def grid_for(*models: DensityModel, n: int = 4001) -> QuadratureGrid:
    """Uniform grid covering the union of the models' supports."""
    lo = min(m.support[0] for m in models)
    hi = max(m.support[1] for m in models)
    return make_grid(lo, hi, n)


def _pdf(model: DensityModel, y: np.ndarray) -> np.ndarray:
    if isinstance(model, Gaussian):
        z = (y - model.mean) / model.stddev
        out = np.exp(-0.5 * z * z) / (model.stddev * math.sqrt(2.0 * math.pi))
    elif isinstance(model, GaussianMixture):
        out = np.zeros_like(y)
        for w, m, s in model.components:
            z = (y - m) / s
            out += w * np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi))
    elif isinstance(model, Shifted):
        return _pdf(model.base, y - model.shift)
    elif isinstance(model, Tabulated):
        out = np.interp(y, model.points, model.values, left=0.0, right=0.0)
    else:
        raise TypeError(f"not a density model: {model!r}")
    # analytic models are evaluated exactly everywhere; `support` only sets
    # the default integration window (hard zeros would poison the moment
    # integrals that carry negative density powers)
    return out


def evaluate(model: DensityModel, y) -> np.ndarray | float:
    """Density value at y (scalar or array)."""
    arr = np.asarray(y, dtype=np.float64)
    out = _pdf(model, np.atleast_1d(arr))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def integrate(values_on_grid, grid: QuadratureGrid) -> float:
    """Composite trapezoid integral of grid values; exact for piecewise-linear."""
    v = np.asarray(values_on_grid, dtype=np.float64)
    if v.shape != grid.points.shape:
        raise ValueError(f"expected {grid.count} values, got {v.shape}")
    return float(np.dot(v, grid.weights))


def likelihood_ratio(f0: DensityModel, f1: DensityModel, y) -> np.ndarray | float:
    """Ratio f1(y)/f0(y) with conventions +inf for f0=0<f1 and 1 for 0/0."""
    arr = np.asarray(y, dtype=np.float64)
    y1 = np.atleast_1d(arr)
    v0 = _pdf(f0, y1)
    v1 = _pdf(f1, y1)
    out = ratio_values(v0, v1)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def ratio_values(f0_values: np.ndarray, f1_values: np.ndarray) -> np.ndarray:
    """Pointwise f1/f0 with the 0-denominator conventions of likelihood_ratio."""
    out = np.empty_like(f1_values)
    pos = f0_values > 0.0
    out[pos] = f1_values[pos] / f0_values[pos]
    zero_den = ~pos
    out[zero_den & (f1_values > 0.0)] = np.inf
    out[zero_den & (f1_values == 0.0)] = 1.0
    return out


def sample(model: DensityModel, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws from the model, deterministic for a given seed."""
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    rng = np.random.default_rng(seed)
    return _sample(model, int(n), rng)


def _sample(model: DensityModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(model, Gaussian):
        return rng.normal(model.mean, model.stddev, n)
    if isinstance(model, GaussianMixture):
        w = np.array([c[0] for c in model.components])
        means = np.array([c[1] for c in model.components])
        stds = np.array([c[2] for c in model.components])
        idx = rng.choice(len(w), size=n, p=w / w.sum())
        return rng.normal(means[idx], stds[idx])
    if isinstance(model, Shifted):
        return _sample(model.base, n, rng) + model.shift
    if isinstance(model, Tabulated):
        # inverse CDF on the tabulation grid with linear interpolation
        pts, val = model.points, model.values
        inc = np.cumsum(0.5 * (val[1:] + val[:-1]) * np.diff(pts))
        cdf = np.concatenate(([0.0], inc))
        cdf /= cdf[-1]
        u = rng.uniform(0.0, 1.0, n)
        return np.interp(u, cdf, pts)
    raise TypeError(f"not a density model: {model!r}")

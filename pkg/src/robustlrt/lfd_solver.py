"""Least favorable densities and the minimax-robust randomized test.

Given nominal densities f0, f1, prior odds rho, a divergence order alpha and
ball radii (eps0, eps1), the robust test is characterized by two likelihood
ratio thresholds 0 < l_l <= 1 <= l_u.  They induce three regions

    I1 = {l < rho*l_l},   I2 = {rho*l_l <= l <= rho*l_u},   I3 = {l > rho*l_u}

on which the least favorable pair (g0_hat, g1_hat) is a branch-wise scaling
of the nominals, the randomized rule delta_hat is 0 / interior / 1, and the
robust likelihood ratio l_hat is l/l_l / rho / l/l_u.  The thresholds solve
two moment conditions that activate both divergence constraints; this module
finds them (``solve_thresholds``), offers a one-dimensional fast path for
symmetric problems (``solve_symmetric``), and exposes the unreduced
four-constant stationarity system (``solve_raw_kkt``) for cross-validation.

The returned tables live on the quadrature grid augmented with the exact
region crossing points, so trapezoid sums over the tables reproduce the
solver's split-cell integrals to machine precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, root

from . import limits
from .density import QuadratureGrid, evaluate, ratio_values, tabulated, trapezoid_weights
from .divergence import DivergenceSpec, alpha_divergence, check_alpha, x_of
from .kernels import augment_with_crossings, i2_power_integrals, region_masses


class DegenerateRegionError(RuntimeError):
    """A region needed by the parametric solution carries no mass."""


class ParametricInfeasibleError(RuntimeError):
    """The branch form produced a negative base under a fractional power."""


class InfeasibleEpsError(ValueError):
    """The requested radius pair lies on or outside the admissible boundary."""


class NonConvergenceError(RuntimeError):
    """Root search exhausted its iteration budget; carries best residual."""


@dataclass(frozen=True)
class ThresholdPair:
    l_l: float
    l_u: float

    def __post_init__(self):
        if not (0.0 < self.l_l <= 1.0 <= self.l_u < math.inf):
            raise ValueError(
                "thresholds must satisfy 0 < l_l <= 1 <= l_u < inf, got "
                "(%r, %r)" % (self.l_l, self.l_u)
            )


@dataclass(frozen=True)
class KktParams:
    """Unreduced stationarity constants and multipliers."""

    c1: float
    c2: float
    c3: float
    c4: float
    lambda0: float
    lambda1: float
    mu0: float
    mu1: float


@dataclass(frozen=True)
class TabulatedFunction:
    """Piecewise-linear function of y given by its values on grid points."""

    points: np.ndarray
    values: np.ndarray

    def __call__(self, y):
        arr = np.asarray(y, dtype=np.float64)
        out = np.interp(np.atleast_1d(arr), self.points, self.values)
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)


@dataclass(frozen=True)
class SolverConfig:
    root_tol: float = 1e-10
    max_iter: int = 200
    bracket_expand: float = 1.0
    parameterization: str = "log"

    def __post_init__(self):
        if self.parameterization != "log":
            raise ValueError("only the log parameterization is implemented")
        if self.root_tol <= 0.0 or self.max_iter < 1:
            raise ValueError("root_tol must be positive and max_iter >= 1")


@dataclass(frozen=True)
class RobustSolution:
    """Materialized robust test on the crossing-augmented grid."""

    spec: DivergenceSpec
    thresholds: ThresholdPair
    k: float
    z: float
    grid: QuadratureGrid
    g0_hat: object
    g1_hat: object
    delta_hat: TabulatedFunction
    l_hat: TabulatedFunction
    f0_values: np.ndarray
    f1_values: np.ndarray
    achieved_eps0: float
    achieved_eps1: float
    residual_norm: float
    region_masses: tuple


def partition(l_values, rho: float, t: ThresholdPair) -> np.ndarray:
    """Region labels 1/2/3 for each l value; threshold ties belong to I2."""
    l = np.asarray(l_values, dtype=np.float64)
    lo, hi = rho * t.l_l, rho * t.l_u
    return np.where(l < lo, 1, np.where(l > hi, 3, 2)).astype(np.int8)


def _nominal_arrays(nominals, grid: QuadratureGrid):
    f0, f1 = nominals
    v0 = f0 if isinstance(f0, np.ndarray) else evaluate(f0, grid.points)
    v1 = f1 if isinstance(f1, np.ndarray) else evaluate(f1, grid.points)
    if v0.shape != grid.points.shape or v1.shape != grid.points.shape:
        raise ValueError("nominal arrays must match the grid")
    return v0, v1


@dataclass
class _EvalState:
    l_l: float
    l_u: float
    k: float
    z: float
    masses: tuple           # (A0, M0, B0, A1, M1, B1)
    s_int: float            # I2 integral of bracket^(1/beta) * f1
    t0_int: float           # I2 integral of bracket^(alpha/beta)*(l/rho)^alpha*f0
    t1_int: float           # I2 integral of bracket^(alpha/beta) * f1
    r0: float = math.nan
    r1: float = math.nan


def _k_literal(l_l, l_u, masses):
    a0, _, b0, a1, _, b1 = masses
    num = a1 - l_l * a0
    den = l_u * b0 - b1
    return num, den


def _pow(x, p):
    # python float ** raises OverflowError where inf is the useful answer;
    # numpy scalars would warn and return inf instead, so coerce first
    try:
        return float(x) ** p
    except OverflowError:
        return math.inf


def _eval_state(l_l, l_u, alpha, rho, l, f0v, f1v, points, x0, x1) -> _EvalState:
    lo, hi = rho * l_l, rho * l_u
    masses = region_masses(l, f0v, f1v, points, lo, hi)
    a0, m0, b0, a1, m1, b1 = masses
    if a0 + a1 <= 0.0:
        raise DegenerateRegionError(
            "region below rho*l_l carries no mass at thresholds (%g, %g)" % (l_l, l_u)
        )
    if b0 + b1 <= 0.0:
        raise DegenerateRegionError(
            "region above rho*l_u carries no mass at thresholds (%g, %g)" % (l_l, l_u)
        )
    beta = alpha - 1.0
    big_l = _pow(l_l, beta)
    big_u = _pow(l_u, beta)
    num, den = _k_literal(l_l, l_u, masses)
    if den == 0.0:
        raise DegenerateRegionError("vanishing upper-region balance at these thresholds")

    equal_t = l_l == l_u

    def s_of(k):
        if equal_t:
            return m1
        kb = _pow(k, beta)
        if not (np.isfinite(kb) and kb > 0.0):
            return math.nan
        return i2_power_integrals(
            l, f0v, f1v, points, lo, hi, rho, beta, alpha, kb, big_l, big_u
        )[0]

    if rho == 1.0:
        k = num / den
    else:
        c = 1.0 - 1.0 / rho

        def psi(k):
            return k * den - num - c * s_of(k)

        k_lit = num / den
        if not (np.isfinite(k_lit) and k_lit > 0.0):
            raise DegenerateRegionError(
                "literal threshold-balance ratio is not positive at (%g, %g)" % (l_l, l_u)
            )
        lo_k, hi_k = k_lit, k_lit
        p_lo, p_hi = psi(k_lit), psi(k_lit)
        tries = 0
        while p_lo * p_hi > 0.0 and tries < 60:
            if p_lo > 0.0:
                hi_k *= 2.0
                p_hi = psi(hi_k)
                if p_hi <= 0.0:
                    lo_k = hi_k / 2.0
                    break
                lo_k = hi_k
                p_lo = p_hi
            else:
                lo_k *= 0.5
                p_lo = psi(lo_k)
                if p_lo >= 0.0:
                    hi_k = lo_k * 2.0
                    break
                hi_k = lo_k
                p_hi = p_lo
            tries += 1
        else:
            if p_lo * p_hi > 0.0:
                raise DegenerateRegionError("no positive mass-balancing k at these thresholds")
        try:
            k = float(brentq(psi, lo_k, hi_k, xtol=1e-14, rtol=8.9e-16, maxiter=200))
        except ValueError:
            raise DegenerateRegionError(
                "mass-balancing k bracket failed at (%g, %g)" % (l_l, l_u)
            ) from None

    if not (np.isfinite(k) and k > 0.0):
        raise DegenerateRegionError(
            "threshold balance factor k = %r is not positive; a region is "
            "degenerate at (%g, %g)" % (k, l_l, l_u)
        )

    if equal_t:
        s_int, t0_int, t1_int = m1, _pow(l_l, alpha) * m0, m1
    else:
        kb = _pow(k, beta)
        ok = (np.isfinite(kb) and kb > 0.0 and np.isfinite(big_l)
              and big_l > 0.0 and np.isfinite(big_u) and big_u > 0.0)
        if not ok:
            raise ParametricInfeasibleError(
                "threshold powers left the representable range at (%g, %g)"
                % (l_l, l_u)
            )
        s_int, t0_int, t1_int = i2_power_integrals(
            l, f0v, f1v, points, lo, hi, rho, beta, alpha, kb, big_l, big_u
        )
    z = a1 + s_int + k * b1
    if not (np.isfinite(z) and z > 0.0):
        raise ParametricInfeasibleError("normalizer z = %r is not positive" % (z,))
    za = _pow(z, alpha)
    r0 = (_pow(l_l, alpha) * a0 + t0_int + _pow(k * l_u, alpha) * b0) / za - x0
    r1 = (a1 + t1_int + _pow(k, alpha) * b1) / za - x1
    return _EvalState(l_l, l_u, k, z, masses, s_int, t0_int, t1_int, r0, r1)


def k_factor(t: ThresholdPair, nominals, rho: float, grid: QuadratureGrid) -> float:
    """Ratio of lower-region to upper-region threshold-weighted f0 masses.

    k = int_{I1}(l - l_l) f0 / int_{I3}(l_u - l) f0, both region integrals
    taken with the rho-scaled thresholds.  Raises DegenerateRegionError when
    the ratio is not a positive finite number.
    """
    f0v, f1v = _nominal_arrays(nominals, grid)
    l = ratio_values(f0v, f1v)
    masses = region_masses(l, f0v, f1v, grid.points, rho * t.l_l, rho * t.l_u)
    num, den = _k_literal(t.l_l, t.l_u, masses)
    if den == 0.0 or not np.isfinite(den):
        raise DegenerateRegionError(
            "region above rho*l_u has vanishing balance integral; it is empty "
            "or cancels at these thresholds"
        )
    k = num / den
    if not (np.isfinite(k) and k > 0.0):
        raise DegenerateRegionError(
            "balance ratio k = %r is not positive; lower region integral %g, "
            "upper region integral %g" % (k, num, den)
        )
    return float(k)


def z_norm(t: ThresholdPair, alpha: float, rho: float, nominals, grid: QuadratureGrid) -> float:
    """Normalizer z making the scaled branches of g1_hat integrate to one.

    z = int_{I1} f1 + int_{I2} bracket^(1/(alpha-1)) f1 + k * int_{I3} f1,
    with k chosen so the g0_hat branches normalize as well (this matches the
    literal mass ratio when rho = 1).
    """
    check_alpha(alpha)
    f0v, f1v = _nominal_arrays(nominals, grid)
    l = ratio_values(f0v, f1v)
    st = _eval_state(t.l_l, t.l_u, alpha, rho, l, f0v, f1v, grid.points, 1.0, 1.0)
    return st.z


def phi1(l, t: ThresholdPair, alpha: float, rho: float, k: float, z: float):
    """Interior scale factor of g1_hat at ratio value(s) l in [rho*l_l, rho*l_u]."""
    check_alpha(alpha)
    arr = np.asarray(l, dtype=np.float64)
    lv = np.atleast_1d(arr)
    lo, hi = rho * t.l_l, rho * t.l_u
    if np.any(lv < lo - 1e-12 * lo) or np.any(lv > hi + 1e-12 * hi):
        raise ValueError("phi1 is defined on [rho*l_l, rho*l_u] only")
    beta = alpha - 1.0
    big_l, big_u = t.l_l ** beta, t.l_u ** beta
    if t.l_l == t.l_u:
        out = np.full(lv.shape, 1.0 / z)
    else:
        kb = k ** beta
        tmin, tmax = min(big_l, big_u), max(big_l, big_u)
        tv = np.clip((lv / rho) ** beta, tmin, tmax)
        if beta > 0.0:
            den = (tv - big_l) / kb + (big_u - tv)
            num = big_u - big_l
        else:
            den = (big_l - tv) / kb + (tv - big_u)
            num = big_l - big_u
        if np.any(den <= 0.0) or num <= 0.0:
            raise ParametricInfeasibleError(
                "interior bracket is not positive; the parametric form is "
                "infeasible at these thresholds"
            )
        out = np.exp((np.log(num) - np.log(den)) / beta) / z
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def phi0(l, t: ThresholdPair, alpha: float, rho: float, k: float, z: float):
    """Interior scale factor of g0_hat: phi0 = phi1 * l / rho."""
    return phi1(l, t, alpha, rho, k, z) * np.asarray(l, dtype=np.float64) / rho


def residuals(t: ThresholdPair, spec: DivergenceSpec, nominals, grid: QuadratureGrid):
    """Activation residuals of the two divergence constraints at thresholds t."""
    f0v, f1v = _nominal_arrays(nominals, grid)
    l = ratio_values(f0v, f1v)
    st = _eval_state(
        t.l_l, t.l_u, spec.alpha, spec.rho, l, f0v, f1v, grid.points,
        x_of(spec.alpha, spec.eps0), x_of(spec.alpha, spec.eps1),
    )
    return st.r0, st.r1


def _delta_interior(lv, l_l, l_u, alpha, rho, k):
    """Randomization probability at interior ratio values (array)."""
    beta = alpha - 1.0
    big_l, big_u = l_l ** beta, l_u ** beta
    kb = k ** beta
    tmin, tmax = min(big_l, big_u), max(big_l, big_u)
    tv = np.clip((lv / rho) ** beta, tmin, tmax)
    if beta > 0.0:
        den = (tv - big_l) / kb + (big_u - tv)
        num = big_u - big_l
    else:
        den = (big_l - tv) / kb + (tv - big_u)
        num = big_l - big_u
    br = num / den
    return br * (big_l - tv) / (kb * (big_l - big_u)) + 0.0


def robust_rule(l, solution: RobustSolution):
    """Probability of deciding for the alternative at ratio value(s) l."""
    arr = np.asarray(l, dtype=np.float64)
    lv = np.atleast_1d(arr).astype(np.float64)
    t = solution.thresholds
    rho = solution.spec.rho
    lo, hi = rho * t.l_l, rho * t.l_u
    out = np.zeros(lv.shape)
    out[lv > hi] = 1.0
    mid = (lv >= lo) & (lv <= hi)
    if np.any(mid):
        if t.l_l == t.l_u:
            out[mid] = np.where(lv[mid] == lo, 0.5, np.where(lv[mid] > lo, 1.0, 0.0))
        else:
            out[mid] = np.clip(
                _delta_interior(lv[mid], t.l_l, t.l_u, solution.spec.alpha, rho, solution.k),
                0.0, 1.0,
            )
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def robust_lr(l, solution: RobustSolution):
    """Robust likelihood ratio: l/l_l below, rho inside, l/l_u above."""
    arr = np.asarray(l, dtype=np.float64)
    lv = np.atleast_1d(arr).astype(np.float64)
    t = solution.thresholds
    rho = solution.spec.rho
    lo, hi = rho * t.l_l, rho * t.l_u
    out = np.where(lv < lo, lv / t.l_l, np.where(lv > hi, lv / t.l_u, rho))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _materialize(spec, t, st, f0v, f1v, l, grid, resid_norm, aug=None) -> RobustSolution:
    rho, alpha = spec.rho, spec.alpha
    lo, hi = rho * t.l_l, rho * t.l_u
    if aug is None:
        y_aug, l_aug, (f0a, f1a), _ = augment_with_crossings(
            grid.points, l, [f0v, f1v], lo, hi
        )
    else:
        y_aug, l_aug, f0a, f1a = aug
    lab = partition(l_aug, rho, t)
    in1, in2, in3 = lab == 1, lab == 2, lab == 3
    k, z = st.k, st.z

    g0 = np.empty_like(f0a)
    g1 = np.empty_like(f1a)
    g0[in1] = (t.l_l / z) * f0a[in1]
    g1[in1] = (1.0 / z) * f1a[in1]
    g0[in3] = (k * t.l_u / z) * f0a[in3]
    g1[in3] = (k / z) * f1a[in3]
    delta = np.zeros_like(f0a)
    delta[in3] = 1.0
    if np.any(in2):
        if t.l_l == t.l_u:
            g0[in2] = (t.l_l / z) * f0a[in2]
            g1[in2] = (1.0 / z) * f1a[in2]
            delta[in2] = 0.5
        else:
            p1 = phi1(l_aug[in2], t, alpha, rho, k, z)
            g1[in2] = p1 * f1a[in2]
            g0[in2] = p1 * (l_aug[in2] / rho) * f0a[in2]
            d = _delta_interior(l_aug[in2], t.l_l, t.l_u, alpha, rho, k)
            if d.min() < -1e-9 or d.max() > 1.0 + 1e-9:
                raise ParametricInfeasibleError(
                    "interior randomization left [0, 1]: range [%g, %g]"
                    % (d.min(), d.max())
                )
            delta[in2] = np.clip(d, 0.0, 1.0)
    if g0.min() < 0.0 or g1.min() < 0.0:
        raise ParametricInfeasibleError("a least favorable density went negative")

    l_hat_vals = np.where(in1, l_aug / t.l_l, np.where(in3, l_aug / t.l_u, rho))
    aug_grid = QuadratureGrid(y_aug, trapezoid_weights(y_aug))
    ach0 = alpha_divergence(g0, f0a, alpha, aug_grid)
    ach1 = alpha_divergence(g1, f1a, alpha, aug_grid)
    if abs(ach0 - spec.eps0) > 1e-4 or abs(ach1 - spec.eps1) > 1e-4:
        warnings.warn(
            "achieved divergences (%g, %g) deviate from requested (%g, %g) "
            "beyond 1e-4" % (ach0, ach1, spec.eps0, spec.eps1),
            RuntimeWarning,
            stacklevel=3,
        )
    a0, m0, b0, a1, m1, b1 = st.masses
    return RobustSolution(
        spec=spec,
        thresholds=t,
        k=k,
        z=z,
        grid=aug_grid,
        g0_hat=tabulated(y_aug, g0),
        g1_hat=tabulated(y_aug, g1),
        delta_hat=TabulatedFunction(y_aug, delta),
        l_hat=TabulatedFunction(y_aug, l_hat_vals),
        f0_values=f0a,
        f1_values=f1a,
        achieved_eps0=ach0,
        achieved_eps1=ach1,
        residual_norm=resid_norm,
        region_masses=((a0, m0, b0), (a1, m1, b1)),
    )


def _preflight(spec: DivergenceSpec, nominals, grid: QuadratureGrid) -> None:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            bound, _, _ = limits.max_eps_general(
                nominals, spec.alpha, spec.rho, grid, (0, spec.eps0)
            )
    except limits.NoBoundaryPointError:
        raise InfeasibleEpsError(
            "eps0 = %g is at or beyond its admissible maximum; see "
            "limits.validate_eps for the boundary margin" % spec.eps0
        ) from None
    except Exception as exc:  # boundary solve is advisory, not load-bearing
        warnings.warn(
            "feasibility preflight failed (%s); proceeding with the solve" % exc,
            RuntimeWarning,
            stacklevel=3,
        )
        return
    if spec.eps1 >= bound - 1e-9 * (1.0 + bound):
        raise InfeasibleEpsError(
            "(eps0, eps1) = (%g, %g) is not strictly inside the admissible "
            "region: at eps0 = %g the boundary allows eps1 < %g; see "
            "limits.validate_eps for the ray margin"
            % (spec.eps0, spec.eps1, spec.eps0, bound)
        )


def solve_thresholds(spec: DivergenceSpec, nominals, grid: QuadratureGrid,
                     config: SolverConfig | None = None) -> RobustSolution:
    """Solve for the robust thresholds and materialize the full solution.

    Finds (l_l, l_u) zeroing both divergence-activation residuals by damped
    Newton iteration in (log l_l, log l_u), seeded from a coarse residual
    scan and clamped to l_l <= 1 <= l_u; falls back to nested bisection when
    Newton stalls.  Raises InfeasibleEpsError for radius pairs outside the
    admissible boundary and NonConvergenceError with the best residual seen
    when the iteration budget runs out.
    """
    cfg = config or SolverConfig()
    check_alpha(spec.alpha)
    f0v, f1v = _nominal_arrays(nominals, grid)
    l = ratio_values(f0v, f1v)
    alpha, rho = spec.alpha, spec.rho
    x0, x1 = x_of(alpha, spec.eps0), x_of(alpha, spec.eps1)

    if spec.eps0 == 0.0 and spec.eps1 == 0.0:
        t = ThresholdPair(1.0, 1.0)
        st = _eval_state(1.0, 1.0, alpha, rho, l, f0v, f1v, grid.points, x0, x1)
        return _materialize(spec, t, st, f0v, f1v, l, grid, max(abs(st.r0), abs(st.r1)))

    _preflight(spec, nominals, grid)

    pos = (l > 0.0) & np.isfinite(l) & ((f0v > 0.0) | (f1v > 0.0))
    l_min, l_max = float(l[pos].min()), float(l[pos].max())
    if not (l_min < rho < l_max):
        raise DegenerateRegionError(
            "rho = %g lies outside the likelihood ratio range [%g, %g]; no "
            "interior thresholds exist" % (rho, l_min, l_max)
        )
    u_floor = math.log(max(l_min / rho, 1e-300)) * 0.98
    v_ceil = math.log(l_max / rho) * 0.98
    scale = max(1.0, abs(x0), abs(x1))
    tol = cfg.root_tol * scale

    def try_eval(u, v):
        try:
            return _eval_state(math.exp(u), math.exp(v), alpha, rho, l, f0v, f1v,
                               grid.points, x0, x1)
        except (DegenerateRegionError, ParametricInfeasibleError):
            return None

    # coarse scan over a log-spaced box; kept column-wise so seeding can
    # follow the r0 = 0 valley instead of trusting the raw norm surface
    span = cfg.bracket_expand * 0.95
    us = -np.geomspace(1e-4, max(-u_floor * span, 2e-4), 16)
    vs = np.geomspace(1e-4, max(v_ceil * span, 2e-4), 16)
    us = us[us >= u_floor]
    vs = vs[vs <= v_ceil]
    cells = {}
    for u in us:
        for v in vs:
            st = try_eval(u, v)
            if st is not None and np.isfinite(st.r0) and np.isfinite(st.r1):
                cells[(u, v)] = st
    if not cells:
        raise NonConvergenceError("no admissible starting point found in the scan box")

    seeds = []
    for v in vs:
        col = [(u, st) for (u, vv), st in cells.items() if vv == v]
        if col:
            u_star, st_star = min(col, key=lambda p: abs(p[1].r0))
            seeds.append((abs(st_star.r1), u_star, v, st_star))
    seeds.sort(key=lambda s: s[0])
    seeds = seeds[:4]
    g_key, g_st = min(cells.items(), key=lambda p: max(abs(p[1].r0), abs(p[1].r1)))
    seeds.append((0.0, g_key[0], g_key[1], g_st))
    for s in (0.1, 0.3, 0.6):
        u0, v0 = max(math.log(1.0 - s), u_floor), min(math.log(1.0 + s), v_ceil)
        st0 = try_eval(u0, v0)
        if st0 is not None:
            seeds.append((0.0, u0, v0, st0))

    best_seen = None
    u = v = nrm = st = None
    for _, u0, v0, st0 in seeds:
        got = _newton_2d(try_eval, u0, v0, st0, u_floor, v_ceil, tol, cfg.max_iter)
        if best_seen is None or got[0] < best_seen[0]:
            best_seen = got
        if got[0] <= tol:
            break
    nrm, u, v, st = best_seen

    if nrm > tol:
        got = _bisect_fallback(alpha, rho, l, f0v, f1v, grid.points, x0, x1,
                               u_floor, v_ceil, tol)
        if got is None:
            raise NonConvergenceError(
                "threshold search did not reach tolerance %.3g; best residual "
                "norm %.3g at (l_l, l_u) = (%.6g, %.6g)"
                % (tol, best_seen[0], math.exp(best_seen[1]), math.exp(best_seen[2]))
            )
        u, v, st = got
        nrm = max(abs(st.r0), abs(st.r1))

    t = ThresholdPair(math.exp(u), math.exp(v))
    return _materialize(spec, t, st, f0v, f1v, l, grid, nrm)


def _newton_2d(try_eval, u, v, st, u_floor, v_ceil, tol, max_iter):
    """Damped Newton on the residual pair in clamped log-threshold space.

    The backtrack accepts on an Armijo decrease of the squared-residual
    merit, for which the Newton direction is always a descent direction.
    Returns (residual norm, u, v, state) for the best iterate reached.
    """
    nrm = max(abs(st.r0), abs(st.r1))
    phi = st.r0 ** 2 + st.r1 ** 2
    best = (nrm, u, v, st)
    it = 0
    while nrm > tol and it < max_iter:
        it += 1
        r = np.array([st.r0, st.r1])
        d = 1e-6
        du = d if (u + d) <= 0.0 else -d
        stu = try_eval(u + du, v)
        stv = try_eval(u, v + d)
        if stu is None or stv is None:
            break
        jac = np.array([
            [(stu.r0 - st.r0) / du, (stv.r0 - st.r0) / d],
            [(stu.r1 - st.r1) / du, (stv.r1 - st.r1) / d],
        ])
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        lam, improved = 1.0, False
        for _ in range(40):
            uc = min(0.0, max(u + lam * step[0], u_floor))
            vc = max(0.0, min(v + lam * step[1], v_ceil))
            stc = try_eval(uc, vc)
            if stc is not None:
                pc = stc.r0 ** 2 + stc.r1 ** 2
                if np.isfinite(pc) and pc <= phi * (1.0 - 2e-4 * lam):
                    u, v, st, phi = uc, vc, stc, pc
                    nrm = max(abs(stc.r0), abs(stc.r1))
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            break
        if nrm < best[0]:
            best = (nrm, u, v, st)
    return best


def _bisect_fallback(alpha, rho, l, f0v, f1v, points, x0, x1, u_floor, v_ceil, tol):
    """Nested bisection: inner root of r0 over u at fixed v, outer on r1."""

    def eval_or_none(u, v):
        try:
            return _eval_state(math.exp(u), math.exp(v), alpha, rho, l, f0v, f1v,
                               points, x0, x1)
        except (DegenerateRegionError, ParametricInfeasibleError):
            return None

    def inner(v):
        us = np.linspace(u_floor, -1e-12, 33)
        prev = None
        for u in us:
            st = eval_or_none(u, v)
            if st is None or not np.isfinite(st.r0):
                prev = None
                continue
            if prev is not None and prev[1] * st.r0 <= 0.0:
                def f_inner(uu):
                    s = eval_or_none(uu, v)
                    return s.r0 if s is not None else np.nan
                try:
                    ur = float(brentq(f_inner, prev[0], u, xtol=1e-14,
                                      rtol=8.9e-16, maxiter=200))
                except ValueError:
                    return None
                got = eval_or_none(ur, v)
                return (ur, got) if got is not None else None
            prev = (u, st.r0)
        return None

    vs = np.linspace(1e-12, v_ceil, 49)
    prev = None
    for v in vs:
        got = inner(v)
        if got is None or not np.isfinite(got[1].r1):
            prev = None
            continue
        u, st = got
        if prev is not None and prev[1] * st.r1 <= 0.0:
            def outer(vv):
                g = inner(vv)
                return g[1].r1 if g is not None else np.nan
            vr = float(brentq(outer, prev[0], v, xtol=1e-14, rtol=8.9e-16, maxiter=200))
            g = inner(vr)
            if g is not None and max(abs(g[1].r0), abs(g[1].r1)) <= 10.0 * tol:
                return g[0], vr, g[1]
            return None
        prev = (v, st.r1)
    return None


def solve_symmetric(eps: float, alpha: float, rho: float, nominals,
                    grid: QuadratureGrid, config: SolverConfig | None = None) -> RobustSolution:
    """One-dimensional solver for mirror-symmetric problems with equal radii.

    Requires f1(y) = f0(-y) pointwise and a strictly increasing likelihood
    ratio; then l_l = 1/l_u, the balance factor equals l_l, and a single
    scalar equation in the upper decision point y_u determines everything.
    The materialized solution matches solve_thresholds on the same problem.
    """
    cfg = config or SolverConfig()
    check_alpha(alpha)
    if eps < 0.0:
        raise ValueError("radius must be nonnegative")
    f0v, f1v = _nominal_arrays(nominals, grid)
    mirrored = evaluate(nominals[0], -grid.points) if not isinstance(nominals[0], np.ndarray) \
        else np.interp(-grid.points, grid.points, f0v)
    if np.max(np.abs(f1v - mirrored)) > 1e-8:
        raise ValueError(
            "nominals are not mirror images of each other; use solve_thresholds"
        )
    l = ratio_values(f0v, f1v)
    core = (f0v > 0.0) & (f1v > 0.0)
    if np.any(np.diff(l[core]) <= 0.0):
        raise ValueError(
            "likelihood ratio is not strictly increasing; use solve_thresholds"
        )
    if rho != 1.0:
        warnings.warn(
            "the symmetric reduction is derived for rho = 1; carrying rho "
            "through the formulas is a formal extension",
            RuntimeWarning,
            stacklevel=2,
        )
    spec = DivergenceSpec(alpha=alpha, rho=rho, eps0=eps, eps1=eps)
    x_eps = x_of(alpha, eps)

    if eps == 0.0:
        st = _eval_state(1.0, 1.0, alpha, rho, l, f0v, f1v, grid.points, x_eps, x_eps)
        return _materialize(spec, ThresholdPair(1.0, 1.0), st, f0v, f1v, l, grid,
                            max(abs(st.r0), abs(st.r1)))

    points = grid.points
    beta = alpha - 1.0

    def g_resid(y_u):
        lu = float(np.interp(y_u, points, l))
        if lu <= 1.0:
            return np.nan
        ll = 1.0 / lu
        lo, hi = rho * ll, rho * lu
        masses = region_masses(l, f0v, f1v, points, lo, hi)
        a1, b1 = masses[3], masses[5]
        if a1 <= 0.0 or b1 <= 0.0:
            return np.nan
        # the two constraints coincide by symmetry; with the balance factor
        # pinned to l_l the interior integrals collapse to a single equation
        big_l, big_u = ll ** beta, lu ** beta
        s_int, _, t1_int = i2_power_integrals(
            l, f0v, f1v, points, lo, hi, rho, beta, alpha, big_l, big_l, big_u
        )
        t_mid1 = s_int / ll
        t_mida = t1_int / ll ** alpha
        return lu ** alpha * a1 + t_mida + b1 - x_eps * (lu * a1 + t_mid1 + b1) ** alpha

    # bracket y_u between the ratio crossing of 1 and the grid edge
    y0 = float(np.interp(1.0, l[core], points[core]))
    ys = np.linspace(y0 + 1e-9, points[-1], 200)
    gv_prev, y_prev = None, None
    bracket = None
    for y in ys:
        gv = g_resid(float(y))
        if not np.isfinite(gv):
            gv_prev, y_prev = None, None
            continue
        if gv_prev is not None and gv_prev * gv <= 0.0:
            bracket = (y_prev, float(y))
            break
        gv_prev, y_prev = gv, float(y)
    if bracket is None:
        raise InfeasibleEpsError(
            "no decision point solves the symmetric activation equation for "
            "eps = %g; check feasibility with limits.validate_eps" % eps
        )
    y_u = float(brentq(g_resid, bracket[0], bracket[1], xtol=1e-13, rtol=8.9e-16,
                       maxiter=cfg.max_iter))
    lu = float(np.interp(y_u, points, l))
    ll = 1.0 / lu
    st = _eval_state(ll, lu, alpha, rho, l, f0v, f1v, points, x_eps, x_eps)
    aug = _mirrored_augmentation(points, l, f0v, f1v, core, rho, ll, lu) if rho == 1.0 else None
    if abs(st.k - ll) > 1e-6 * ll:
        warnings.warn(
            "symmetric-case balance factor %g deviates from l_l = %g" % (st.k, ll),
            RuntimeWarning,
            stacklevel=2,
        )
    nrm = max(abs(st.r0), abs(st.r1))
    if nrm > 1e-6 * max(1.0, abs(x_eps)):
        warnings.warn(
            "symmetric solution leaves a general-residual norm of %.3g" % nrm,
            RuntimeWarning,
            stacklevel=2,
        )
    return _materialize(spec, ThresholdPair(ll, lu), st, f0v, f1v, l, grid, nrm, aug=aug)


def _mirrored_augmentation(points, l, f0v, f1v, core, rho, ll, lu):
    """Crossing knots snapped to an exact mirror pair for symmetric problems.

    Independently interpolated crossings of the two thresholds land a few
    grid-cell curvatures apart from perfect mirror symmetry, which shows up
    as a localized kink mismatch between g1(y) and g0(-y).  With a strictly
    increasing ratio there is one crossing per threshold, so place them at
    exactly -y_u and +y_u instead.
    """
    lo, hi = rho * ll, rho * lu
    y_up = float(np.interp(hi, l[core], points[core]))
    span = points[-1] - points[0]
    if np.min(np.abs(points - y_up)) <= 1e-13 * span:
        return None  # crossing sits on a grid knot; mirror knot does too
    knots = np.array([-y_up, y_up])
    y_aug = np.concatenate([points, knots])
    order = np.argsort(y_aug, kind="stable")
    y_aug = y_aug[order]
    l_aug = np.concatenate([l, [lo, hi]])[order]
    f0a = np.concatenate([f0v, np.interp(knots, points, f0v)])[order]
    f1a = np.concatenate([f1v, np.interp(knots, points, f1v)])[order]
    return y_aug, l_aug, f0a, f1a


def _kkt_multipliers(c, alpha):
    c1, c2, c3, c4 = c
    beta = alpha - 1.0
    d0 = c1 ** beta - c2 ** beta
    d1 = c4 ** beta - c3 ** beta
    if d0 == 0.0 or d1 == 0.0:
        return None
    lam0 = (1.0 - alpha) / d0
    mu0 = (c1 ** beta - 1.0) / d0
    lam1 = (1.0 - alpha) / d1
    mu1 = (c4 ** beta - 1.0) / d1
    if not (lam0 > 0.0 and lam1 > 0.0):
        return None
    return lam0, lam1, mu0, mu1


def _n_const(params: KktParams, alpha: float) -> float:
    lam0, lam1 = params.lambda0, params.lambda1
    mu0, mu1 = params.mu0, params.mu1
    return -1.0 + lam0 + lam1 + mu0 + mu1 - alpha * (-1.0 + mu0 + mu1)


def raw_phi1(l, params: KktParams, alpha: float, rho: float):
    """Interior g1 scale factor built from the unreduced multipliers."""
    beta = alpha - 1.0
    lv = np.asarray(l, dtype=np.float64)
    n = _n_const(params, alpha)
    return (n / (params.lambda1 + params.lambda0 * (lv / rho) ** beta)) ** (1.0 / beta)


def raw_phi0(l, params: KktParams, alpha: float, rho: float):
    """Interior g0 scale factor built from the unreduced multipliers."""
    beta = alpha - 1.0
    lv = np.asarray(l, dtype=np.float64)
    n = _n_const(params, alpha)
    return (n / (params.lambda0 + params.lambda1 * (lv / rho) ** (1.0 - alpha))) ** (1.0 / beta)


def raw_rule(l, params: KktParams, alpha: float, rho: float):
    """Interior randomization built from the unreduced multipliers."""
    lam0, lam1 = params.lambda0, params.lambda1
    mu0, mu1 = params.mu0, params.mu1
    lv = np.asarray(l, dtype=np.float64)
    s = (lv / rho) ** (1.0 - alpha)
    num = lam0 * (-1.0 + alpha + lam1 + mu1 - alpha * mu1) \
        - lam1 * (lam0 + mu0 - alpha * mu0) * s
    return num / ((alpha - 1.0) * (lam0 + lam1 * s))


def solve_raw_kkt(spec: DivergenceSpec, nominals, grid: QuadratureGrid,
                  config: SolverConfig | None = None) -> KktParams:
    """Solve the unreduced four-constant stationarity system directly.

    Finds (c1, c2, c3, c4) such that both least favorable densities
    normalize and both divergence constraints are active, using the
    branch scalings g0 = c1*f0 / phi0-form / c2*f0 and g1 = c3*f1 /
    phi1-form / c4*f1 with thresholds l_l = c1/c3 and l_u = c2/c4.  This is
    the cross-validation route for the reduced threshold solver; no values
    from solve_thresholds seed it.
    """
    cfg = config or SolverConfig()
    check_alpha(spec.alpha)
    alpha, rho = spec.alpha, spec.rho
    beta = alpha - 1.0
    f0v, f1v = _nominal_arrays(nominals, grid)
    l = ratio_values(f0v, f1v)
    x0, x1 = x_of(alpha, spec.eps0), x_of(alpha, spec.eps1)
    points = grid.points
    bad = np.array([1e6, 1e6, 1e6, 1e6])

    def system(logc):
        c = np.exp(logc)
        mult = _kkt_multipliers(c, alpha)
        if mult is None:
            return bad
        lam0, lam1, mu0, mu1 = mult
        ll, lu = c[0] / c[2], c[1] / c[3]
        if not (0.0 < ll <= 1.0 <= lu):
            return bad
        n_const = -1.0 + lam0 + lam1 + mu0 + mu1 - alpha * (-1.0 + mu0 + mu1)
        if n_const <= 0.0:
            return bad
        lo, hi = rho * ll, rho * lu
        y_aug, l_aug, (f0a, f1a), _ = augment_with_crossings(points, l, [f0v, f1v], lo, hi)
        w = trapezoid_weights(y_aug)
        lab = np.where(l_aug < lo, 1, np.where(l_aug > hi, 3, 2))
        in1, in2, in3 = lab == 1, lab == 2, lab == 3
        g0 = np.empty_like(f0a)
        g1 = np.empty_like(f1a)
        g0[in1], g0[in3] = c[0] * f0a[in1], c[1] * f0a[in3]
        g1[in1], g1[in3] = c[2] * f1a[in1], c[3] * f1a[in3]
        if np.any(in2):
            s = (l_aug[in2] / rho) ** (1.0 - alpha)
            ph0 = (n_const / (lam0 + lam1 * s)) ** (1.0 / beta)
            ph1 = (n_const / (lam1 + lam0 * (l_aug[in2] / rho) ** beta)) ** (1.0 / beta)
            if not (np.all(np.isfinite(ph0)) and np.all(np.isfinite(ph1))):
                return bad
            g0[in2] = ph0 * f0a[in2]
            g1[in2] = ph1 * f1a[in2]
        r1 = float(np.dot(g0, w)) - 1.0
        r2 = float(np.dot(g1, w)) - 1.0
        base0 = np.where(f0a > 0.0, f0a, 1.0)
        base1 = np.where(f1a > 0.0, f1a, 1.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            m0 = np.where(f0a > 0.0, (g0 / base0) ** alpha * f0a, 0.0)
            m1 = np.where(f1a > 0.0, (g1 / base1) ** alpha * f1a, 0.0)
        r3 = float(np.dot(m0, w)) - x0
        r4 = float(np.dot(m1, w)) - x1
        out = np.array([r1, r2, r3, r4])
        if not np.all(np.isfinite(out)):
            return bad
        return out

    scale = max(1.0, abs(x0), abs(x1))
    best = None
    for s in (0.05, 0.15, 0.3, 0.5, 0.02, 0.7):
        for shape in ((1.0 - s, 1.0 + s, 1.0 + s, 1.0 - s),
                      (1.0 - s, 1.0 + s, 1.0, 1.0),
                      (1.0 - 0.5 * s, 1.0 + s, 1.0 + 0.5 * s, 1.0 - 0.25 * s)):
            c0 = np.array(shape)
            if not (0.0 < c0[0] / c0[2] <= 1.0 <= c0[1] / c0[3]):
                continue
            sol = root(system, np.log(c0), method="hybr",
                       options={"xtol": 1e-13, "maxfev": 4000})
            r = system(sol.x)
            nrm = float(np.max(np.abs(r)))
            if best is None or nrm < best[0]:
                best = (nrm, sol.x)
            if nrm < 1e-9 * scale:
                c = np.exp(sol.x)
                lam0, lam1, mu0, mu1 = _kkt_multipliers(c, alpha)
                return KktParams(c1=float(c[0]), c2=float(c[1]), c3=float(c[2]),
                                 c4=float(c[3]), lambda0=lam0, lambda1=lam1,
                                 mu0=mu0, mu1=mu1)
    raise NonConvergenceError(
        "four-constant system did not converge; best residual norm %.3g" % best[0]
    )

"""Error probabilities of (randomized) binary decision rules.

A decision rule maps an observation y to a probability delta(y) of deciding
for the alternative hypothesis.  Given densities g0 (null) and g1
(alternative) and the prior ratio rho = P(H0)/P(H1), the quantities of
interest are

    P_F = integral of delta * g0        (false alarm)
    P_M = integral of (1 - delta) * g1  (miss)
    P_E = (rho * P_F + P_M) / (1 + rho) (Bayes error)

This module evaluates them by grid quadrature (`error_probs`) or by Monte
Carlo simulation with per-sample randomization (`monte_carlo_errors`), and
provides sweep drivers over signal amplitude (`snr_sweep`) and divergence
order (`alpha_sweep`).  It also builds perturbed densities that stay inside
a divergence ball (`tilted_density`, `ball_members`) and perturbed rules
(`rule_perturbations`) for saddle-point audits of the robust test.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import density, kernels
from .density import DensityModel, QuadratureGrid
from .divergence import DivergenceSpec, alpha_divergence
from .lfd_solver import (
    InfeasibleEpsError,
    NonConvergenceError,
    RobustSolution,
    TabulatedFunction,
    solve_thresholds,
)

__all__ = [
    "ErrorReport",
    "SnrRow",
    "AlphaRow",
    "DEFAULT_EPS_SETTINGS",
    "priors",
    "error_probs",
    "lrt_rule",
    "lrt_errors",
    "monte_carlo_errors",
    "amplitudes_from_snr",
    "snr_of",
    "snr_sweep",
    "alpha_sweep",
    "tilted_density",
    "ball_members",
    "rule_perturbations",
]

#: Uncertainty-radius settings used by `snr_sweep` when the caller's spec
#: carries zero radii: one mildly and one moderately robust test.
DEFAULT_EPS_SETTINGS = ((0.005, 0.005), (0.02, 0.02))


@dataclass(frozen=True)
class ErrorReport:
    """False-alarm, miss, and Bayes error probabilities of one rule.

    `method` is "quadrature" or "monte_carlo".  Monte Carlo reports carry
    the sample count, the seed, and 95% normal-approximation confidence
    half-widths for each component; quadrature reports leave them None.
    """

    p_false_alarm: float
    p_miss: float
    p_error: float
    method: str
    n: int | None = None
    seed: int | None = None
    hw_false_alarm: float | None = None
    hw_miss: float | None = None
    hw_error: float | None = None

    def __post_init__(self):
        for name in ("p_false_alarm", "p_miss", "p_error"):
            p = getattr(self, name)
            if not (-1e-12 <= p <= 1.0 + 1e-12):
                raise ValueError(f"{name} = {p} is not a probability")


def priors(rho: float) -> tuple[float, float]:
    """Prior probabilities (P(H0), P(H1)) implied by the ratio rho."""
    if not (rho > 0.0 and math.isfinite(rho)):
        raise ValueError(f"rho must be positive, got {rho}")
    return rho / (1.0 + rho), 1.0 / (1.0 + rho)


def _bayes(p_f: float, p_m: float, rho: float) -> float:
    p0, p1 = priors(rho)
    return p0 * p_f + p1 * p_m


def _density_on(d, grid: QuadratureGrid) -> np.ndarray:
    """Density values on the grid from a model or a matching array."""
    if isinstance(d, (density.Gaussian, density.GaussianMixture,
                      density.Shifted, density.Tabulated)):
        return density.evaluate(d, grid.points)
    v = np.asarray(d, dtype=float)
    if v.shape != grid.points.shape:
        raise ValueError(
            f"density array has shape {v.shape}, grid has {grid.points.shape}")
    if np.any(v < 0.0):
        raise ValueError("density values must be nonnegative")
    return v


def _rule_on(delta, grid: QuadratureGrid) -> np.ndarray:
    """Rule values on the grid from a tabulated rule, callable, or array."""
    if isinstance(delta, TabulatedFunction):
        v = delta(grid.points)
    elif callable(delta):
        v = np.asarray(delta(grid.points), dtype=float)
        if v.shape == ():
            v = np.full(grid.points.shape, float(v))
    else:
        v = np.asarray(delta, dtype=float)
    if v.shape != grid.points.shape:
        raise ValueError(
            f"rule values have shape {v.shape}, grid has {grid.points.shape}")
    if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
        bad = v[(v < -1e-9) | (v > 1.0 + 1e-9)]
        raise ValueError(
            f"decision rule values must lie in [0, 1]; found {bad[:3]}")
    return np.clip(v, 0.0, 1.0)


def _rule_at(delta, y: np.ndarray) -> np.ndarray:
    """Rule values at arbitrary sample locations (Monte Carlo use)."""
    if isinstance(delta, TabulatedFunction):
        v = np.asarray(delta(y), dtype=float)
    elif callable(delta):
        v = np.asarray(delta(y), dtype=float)
        if v.shape == ():
            v = np.full(y.shape, float(v))
    else:
        raise TypeError(
            "Monte Carlo evaluation needs a rule that can be evaluated at "
            "sample points: a TabulatedFunction or a callable, not an array")
    if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
        raise ValueError("decision rule values must lie in [0, 1]")
    return np.clip(v, 0.0, 1.0)


def error_probs(delta, g0, g1, rho: float, grid: QuadratureGrid) -> ErrorReport:
    """Quadrature error probabilities of the rule delta under (g0, g1).

    delta may be a TabulatedFunction, a callable of y, or an array of values
    on the grid; g0 and g1 may be density models or arrays on the grid.  The
    Bayes error satisfies P_E = (rho*P_F + P_M)/(1+rho) exactly by
    construction.
    """
    dv = _rule_on(delta, grid)
    g0v = _density_on(g0, grid)
    g1v = _density_on(g1, grid)
    w = grid.weights
    p_f = float(np.clip(np.sum(w * dv * g0v), 0.0, 1.0))
    p_m = float(np.clip(np.sum(w * (1.0 - dv) * g1v), 0.0, 1.0))
    return ErrorReport(p_f, p_m, _bayes(p_f, p_m, rho), method="quadrature")


def lrt_rule(nominals, rho: float):
    """The plain likelihood-ratio test l(y) > rho as a callable rule.

    Returns delta(y) = 1 where f1/f0 > rho, 0 where it is below, and 1/2 on
    the boundary.  Exact at any y, so it suits Monte Carlo evaluation; for
    quadrature of this discontinuous rule prefer `lrt_errors`, which
    integrates the decision regions without smearing the jump.
    """
    f0, f1 = nominals

    def rule(y):
        yv = np.asarray(y, dtype=float)
        l = density.likelihood_ratio(f0, f1, yv)
        return np.where(l > rho, 1.0, np.where(l < rho, 0.0, 0.5))

    return rule


def lrt_errors(nominals, rho: float, grid: QuadratureGrid) -> ErrorReport:
    """Quadrature error probabilities of the plain likelihood-ratio test.

    Evaluates the rule l(y) > rho under the same pair (f0, f1) that defines
    it.  Decision regions are integrated with split cells at the threshold
    crossings, so the discontinuity of the rule costs no accuracy.
    """
    f0v = _density_on(nominals[0], grid)
    f1v = _density_on(nominals[1], grid)
    l = density.ratio_values(f0v, f1v)
    a0, m0, b0, a1, m1, b1 = kernels.region_masses(
        l, f0v, f1v, grid.points, rho, rho)
    # mass exactly on the boundary splits evenly (randomized tie-break)
    p_f = float(np.clip(b0 + 0.5 * m0, 0.0, 1.0))
    p_m = float(np.clip(a1 + 0.5 * m1, 0.0, 1.0))
    return ErrorReport(p_f, p_m, _bayes(p_f, p_m, rho), method="quadrature")


def monte_carlo_errors(delta, model0: DensityModel, model1: DensityModel,
                       rho: float, n: int, seed: int) -> ErrorReport:
    """Monte Carlo error probabilities with per-sample randomization.

    Draws n observations under each hypothesis, realizes the randomized
    rule by comparing one auxiliary uniform per sample against delta(y),
    and reports 95% normal-approximation confidence half-widths.  The two
    hypotheses use disjoint deterministic substreams of the seed, so
    results are reproducible and uncorrelated across hypotheses.
    """
    if n < 1000:
        raise ValueError(f"need at least 1000 samples for the CLT half-widths, got {n}")
    n = int(n)
    p0, p1 = priors(rho)

    rng0 = np.random.default_rng([seed, 0])
    y0 = density._sample(model0, n, rng0)
    d0 = rng0.uniform(0.0, 1.0, n) < _rule_at(delta, y0)
    p_f = float(np.mean(d0))

    rng1 = np.random.default_rng([seed, 1])
    y1 = density._sample(model1, n, rng1)
    d1 = rng1.uniform(0.0, 1.0, n) < _rule_at(delta, y1)
    p_m = float(np.mean(~d1))

    hw_f = 1.96 * math.sqrt(p_f * (1.0 - p_f) / n)
    hw_m = 1.96 * math.sqrt(p_m * (1.0 - p_m) / n)
    return ErrorReport(
        p_f, p_m, _bayes(p_f, p_m, rho), method="monte_carlo",
        n=n, seed=int(seed), hw_false_alarm=hw_f, hw_miss=hw_m,
        hw_error=p0 * hw_f + p1 * hw_m)


# ---------------------------------------------------------------------------
# sweep drivers


@dataclass(frozen=True)
class SnrRow:
    """One (signal level, test) entry of an SNR sweep."""

    snr_db: float
    amplitude: float
    test: str                     # "nominal" or "robust"
    eps0: float
    eps1: float
    p_false_alarm: float
    p_miss: float
    p_error: float
    feasible: bool
    note: str = ""


@dataclass(frozen=True)
class AlphaRow:
    """One divergence-order entry of an alpha sweep."""

    alpha: float
    l_l: float
    l_u: float
    residual_norm: float
    achieved_eps0: float
    achieved_eps1: float
    error: str | None = None


def _model_std(model: DensityModel) -> float:
    """Standard deviation of a density model (noise scale for SNR)."""
    if isinstance(model, density.Gaussian):
        return model.stddev
    if isinstance(model, density.GaussianMixture):
        w = np.array([c[0] for c in model.components], dtype=float)
        mu = np.array([c[1] for c in model.components], dtype=float)
        sd = np.array([c[2] for c in model.components], dtype=float)
        w = w / w.sum()
        mean = float(np.sum(w * mu))
        var = float(np.sum(w * (sd**2 + mu**2)) - mean**2)
        return math.sqrt(var)
    if isinstance(model, density.Shifted):
        return _model_std(model.base)
    if isinstance(model, density.Tabulated):
        pts, val = model.points, model.values
        w = density.trapezoid_weights(pts)
        mass = float(np.sum(w * val))
        mean = float(np.sum(w * pts * val)) / mass
        var = float(np.sum(w * (pts - mean) ** 2 * val)) / mass
        return math.sqrt(var)
    raise TypeError(f"not a density model: {model!r}")


def snr_of(amplitude: float, noise: DensityModel) -> float:
    """Signal-to-noise ratio 20*log10(A/std) in dB."""
    if amplitude <= 0.0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    return 20.0 * math.log10(amplitude / _model_std(noise))


def amplitudes_from_snr(snr_db, noise: DensityModel) -> list[float]:
    """Signal amplitudes realizing the given SNR values (in dB)."""
    s = _model_std(noise)
    return [s * 10.0 ** (float(v) / 20.0) for v in snr_db]


def snr_sweep(noise: DensityModel, amplitudes, spec: DivergenceSpec,
              grid: QuadratureGrid | None = None, n: int = 0, *,
              settings=None, grid_n: int = 4001,
              seed: int = 20260816) -> list[SnrRow]:
    """Error probabilities versus signal level for nominal and robust tests.

    The observation is signal-plus-noise: under H0 the density is `noise`,
    under H1 it is `noise` shifted by the amplitude A, and
    SNR = 20*log10(A/std(noise)).  Use `amplitudes_from_snr` to start from
    SNR values instead of amplitudes.

    For each amplitude the sweep emits one row for the plain
    likelihood-ratio test and one per uncertainty setting for the robust
    test, all evaluated under the *nominal* pair, so the rows measure the
    price of robustness when no deviation occurs.  Settings default to the
    spec's own (eps0, eps1) when nonzero and to DEFAULT_EPS_SETTINGS
    otherwise.  Amplitudes whose radii are infeasible, or where the solve
    fails, produce a row with feasible=False and NaN probabilities rather
    than aborting the sweep.

    n = 0 evaluates by quadrature; n > 0 by Monte Carlo with n samples per
    hypothesis and deterministic per-row seeds derived from `seed`.
    """
    if settings is None:
        if spec.eps0 > 0.0 or spec.eps1 > 0.0:
            settings = ((spec.eps0, spec.eps1),)
        else:
            settings = DEFAULT_EPS_SETTINGS
    rows: list[SnrRow] = []
    for i, amp in enumerate(amplitudes):
        amp = float(amp)
        sdb = snr_of(amp, noise)
        f0 = noise
        f1 = density.shifted(noise, amp)
        g = grid if grid is not None else density.grid_for(f0, f1, n=grid_n)

        if n > 0:
            rep = monte_carlo_errors(lrt_rule((f0, f1), spec.rho), f0, f1,
                                     spec.rho, n, seed + 1000 * i)
        else:
            rep = lrt_errors((f0, f1), spec.rho, g)
        rows.append(SnrRow(sdb, amp, "nominal", 0.0, 0.0,
                           rep.p_false_alarm, rep.p_miss, rep.p_error, True))

        for j, (e0, e1) in enumerate(settings):
            row_spec = dataclasses.replace(spec, eps0=float(e0), eps1=float(e1))
            try:
                sol = solve_thresholds(row_spec, (f0, f1), g)
            except (InfeasibleEpsError, NonConvergenceError, ValueError,
                    RuntimeError) as exc:
                rows.append(SnrRow(sdb, amp, "robust", float(e0), float(e1),
                                   math.nan, math.nan, math.nan,
                                   feasible=False, note=str(exc)))
                continue
            if n > 0:
                rep = monte_carlo_errors(sol.delta_hat, f0, f1, spec.rho, n,
                                         seed + 1000 * i + j + 1)
            else:
                rep = error_probs(sol.delta_hat, f0, f1, spec.rho, sol.grid)
            rows.append(SnrRow(sdb, amp, "robust", float(e0), float(e1),
                               rep.p_false_alarm, rep.p_miss, rep.p_error,
                               True))
    return rows


def alpha_sweep(spec: DivergenceSpec, alphas, nominals,
                grid: QuadratureGrid) -> list[AlphaRow]:
    """Robust thresholds as the divergence order varies, radii held fixed.

    Solves the threshold equations for each order in `alphas` with the
    spec's (rho, eps0, eps1).  A failed order (infeasible radii, solver
    breakdown) is recorded in its row's `error` field and the sweep
    continues with the rest.
    """
    rows: list[AlphaRow] = []
    for a in alphas:
        row_spec = dataclasses.replace(spec, alpha=float(a))
        try:
            sol = solve_thresholds(row_spec, nominals, grid)
        except (InfeasibleEpsError, NonConvergenceError, ValueError,
                RuntimeError) as exc:
            rows.append(AlphaRow(float(a), math.nan, math.nan, math.nan,
                                 math.nan, math.nan, error=str(exc)))
            continue
        rows.append(AlphaRow(float(a), sol.thresholds.l_l, sol.thresholds.l_u,
                             sol.residual_norm, sol.achieved_eps0,
                             sol.achieved_eps1))
    return rows


# ---------------------------------------------------------------------------
# ball members and rule perturbations for saddle-point audits


def tilted_density(f, grid: QuadratureGrid, alpha: float, eps_target: float,
                   center: float = 0.0, width: float = 1.0,
                   sign: float = 1.0) -> tuple[density.Tabulated, float]:
    """A density at the given divergence from f, by exponential tilting.

    Builds g proportional to f * exp(t * h) with the bounded carrier
    h(y) = sign * tanh((y - center)/width) and bisects the tilt t so that
    the divergence of order alpha from f hits eps_target.  Returns the
    tabulated density and the divergence actually achieved.  If the carrier
    cannot reach the target even at the internal tilt cap, the capped
    density is returned with its (smaller) achieved divergence.
    """
    if eps_target < 0.0:
        raise ValueError(f"divergence target must be nonnegative, got {eps_target}")
    if width <= 0.0:
        raise ValueError(f"carrier width must be positive, got {width}")
    fv = _density_on(f, grid)
    mass = float(np.sum(grid.weights * fv))
    if mass <= 0.0:
        raise ValueError("density f has no mass on the grid")
    fv = fv / mass
    h = float(sign) * np.tanh((grid.points - center) / width)

    def tilt(t: float) -> np.ndarray:
        gv = fv * np.exp(t * h)
        return gv / float(np.sum(grid.weights * gv))

    def achieved(t: float) -> float:
        return alpha_divergence(tilt(t), fv, alpha, grid)

    if eps_target == 0.0:
        return density.tabulated(grid.points, fv), 0.0

    t_hi, cap = 0.5, 64.0
    while achieved(t_hi) < eps_target:
        t_hi *= 2.0
        if t_hi > cap:
            gv = tilt(cap)
            return density.tabulated(grid.points, gv), achieved(cap)
    t = brentq(lambda tt: achieved(tt) - eps_target, 0.0, t_hi, xtol=1e-14)
    gv = tilt(t)
    return density.tabulated(grid.points, gv), achieved(t)


def ball_members(f, grid: QuadratureGrid, alpha: float, eps: float,
                 count: int, seed: int) -> list[density.Tabulated]:
    """Randomly tilted densities strictly inside the radius-eps ball of f.

    Draws carrier centers across the middle of the grid, log-uniform
    widths, random tilt directions, and divergence targets between 25% and
    95% of eps, so the returned members probe the ball interior in varied
    directions.  Deterministic for a given seed.
    """
    if eps <= 0.0:
        raise ValueError(f"ball radius must be positive, got {eps}")
    if count < 1:
        raise ValueError(f"need at least one member, got {count}")
    rng = np.random.default_rng(seed)
    lo, hi = grid.span
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    scale = half / 4.0
    members: list[density.Tabulated] = []
    for _ in range(count):
        center = mid + half * rng.uniform(-0.6, 0.6)
        width = scale * 10.0 ** rng.uniform(-0.4, 0.4)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        target = eps * rng.uniform(0.25, 0.95)
        g, _ = tilted_density(f, grid, alpha, target, center, width, sign)
        members.append(g)
    return members


def rule_perturbations(solution: RobustSolution, count: int, seed: int,
                       magnitude: float = 0.3) -> list[TabulatedFunction]:
    """Randomly perturbed variants of the solution's robust rule.

    Adds smooth random bumps to the rule and clips back into [0, 1]; every
    variant is a valid decision rule on the solution grid.  Used to audit
    that no perturbation beats the robust rule against the least favorable
    pair.  Deterministic for a given seed.
    """
    if count < 1:
        raise ValueError(f"need at least one perturbation, got {count}")
    if not (0.0 < magnitude <= 1.0):
        raise ValueError(f"magnitude must be in (0, 1], got {magnitude}")
    rng = np.random.default_rng(seed)
    pts = solution.grid.points
    base = solution.delta_hat(pts)
    lo, hi = solution.grid.span
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    out: list[TabulatedFunction] = []
    for _ in range(count):
        center = mid + half * rng.uniform(-0.8, 0.8)
        width = (half / 4.0) * 10.0 ** rng.uniform(-0.5, 0.3)
        amp = magnitude * rng.uniform(-1.0, 1.0)
        bump = amp * np.exp(-0.5 * ((pts - center) / width) ** 2)
        out.append(TabulatedFunction(pts, np.clip(base + bump, 0.0, 1.0)))
    return out

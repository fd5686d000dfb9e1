"""Error-probability evaluation: quadrature, Monte Carlo, sweeps, and the
ball/rule perturbation generators used for saddle-point audits.

The plain likelihood-ratio test on the unit-shift Gaussian pair has the
closed-form error Phi(-1/2 - log(rho)/2) per component; its quadrature
value on the reference grid is frozen here and checked against the closed
form, and Monte Carlo is required to agree with quadrature within its own
confidence half-widths.
"""

import dataclasses
import math
import warnings

import numpy as np
import pytest

from robustlrt import (
    DivergenceSpec,
    alpha_divergence,
    density,
    evaluation,
    lfd_solver,
)
from robustlrt.evaluation import (
    DEFAULT_EPS_SETTINGS,
    AlphaRow,
    ErrorReport,
    SnrRow,
    amplitudes_from_snr,
    ball_members,
    error_probs,
    lrt_errors,
    lrt_rule,
    monte_carlo_errors,
    priors,
    rule_perturbations,
    snr_of,
    snr_sweep,
    tilted_density,
)

# quadrature errors of the LRT at rho = 1 on N(-1,1) vs N(+1,1), grid_for n=4001
LRT_GAUSS_PF = 0.15865576652829622
LRT_GAUSS_PM = 0.15865576652829635
PHI_MINUS_1 = 0.15865525393145707

# quadrature errors of the robust rule of the bimodal anchor problem,
# evaluated under the nominal pair
ANCHOR_NOMINAL_PF = 0.3579288151898813
ANCHOR_NOMINAL_PM = 0.3332140198735652


# ---------------------------------------------------------------------------
# report and priors


def test_error_report_rejects_non_probabilities():
    with pytest.raises(ValueError, match="not a probability"):
        ErrorReport(1.5, 0.1, 0.1, method="quadrature")
    with pytest.raises(ValueError, match="not a probability"):
        ErrorReport(0.1, -0.2, 0.1, method="quadrature")


def test_priors():
    assert priors(1.0) == (0.5, 0.5)
    p0, p1 = priors(3.0)
    assert p0 == pytest.approx(0.75, rel=1e-15)
    assert p1 == pytest.approx(0.25, rel=1e-15)
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError, match="positive"):
            priors(bad)


# ---------------------------------------------------------------------------
# quadrature evaluation


def test_constant_rules_hit_the_corners(norm_pair, norm_grid):
    f0, f1 = norm_pair
    never = error_probs(lambda y: np.zeros_like(y), f0, f1, 1.0, norm_grid)
    assert never.p_false_alarm == 0.0
    assert never.p_miss == pytest.approx(1.0, abs=1e-9)
    always = error_probs(lambda y: np.ones_like(y), f0, f1, 1.0, norm_grid)
    assert always.p_false_alarm == pytest.approx(1.0, abs=1e-9)
    assert always.p_miss == 0.0


def test_bayes_error_identity(norm_pair, norm_grid):
    f0, f1 = norm_pair
    rho = 2.5
    rep = error_probs(lambda y: 1.0 / (1.0 + np.exp(-y)), f0, f1, rho,
                      norm_grid)
    expected = (rho * rep.p_false_alarm + rep.p_miss) / (1.0 + rho)
    assert rep.p_error == pytest.approx(expected, rel=1e-14)
    assert rep.method == "quadrature"
    assert rep.n is None and rep.hw_error is None


def test_rule_and_density_input_validation(norm_pair, norm_grid):
    f0, f1 = norm_pair
    with pytest.raises(ValueError, match="shape"):
        error_probs(np.zeros(7), f0, f1, 1.0, norm_grid)
    with pytest.raises(ValueError, match=r"lie in \[0, 1\]"):
        error_probs(np.full(norm_grid.points.shape, 1.5), f0, f1, 1.0,
                    norm_grid)
    with pytest.raises(ValueError, match="nonnegative"):
        error_probs(lambda y: np.zeros_like(y), f0,
                    np.full(norm_grid.points.shape, -1.0), 1.0, norm_grid)
    with pytest.raises(ValueError, match="shape"):
        error_probs(lambda y: np.zeros_like(y), f0, np.zeros(5), 1.0,
                    norm_grid)


def test_lrt_errors_gaussian_anchor(norm_pair):
    grid = density.grid_for(*norm_pair, n=4001)
    rep = lrt_errors(norm_pair, 1.0, grid)
    assert rep.p_false_alarm == pytest.approx(LRT_GAUSS_PF, rel=1e-12)
    assert rep.p_miss == pytest.approx(LRT_GAUSS_PM, rel=1e-12)
    # closed form: both error components equal Phi(-1) at rho = 1
    assert rep.p_false_alarm == pytest.approx(PHI_MINUS_1, abs=1e-5)
    assert rep.p_miss == pytest.approx(PHI_MINUS_1, abs=1e-5)


def test_lrt_rule_threshold_and_tie(norm_pair):
    rule = lrt_rule(norm_pair, 1.0)
    # the ratio is exp(2y): below one left of zero, one at zero exactly
    out = rule(np.array([-1.0, 0.0, 0.5]))
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])


# ---------------------------------------------------------------------------
# Monte Carlo


def test_monte_carlo_deterministic_per_seed(norm_pair):
    f0, f1 = norm_pair
    rule = lrt_rule(norm_pair, 1.0)
    a = monte_carlo_errors(rule, f0, f1, 1.0, 2000, seed=42)
    b = monte_carlo_errors(rule, f0, f1, 1.0, 2000, seed=42)
    c = monte_carlo_errors(rule, f0, f1, 1.0, 2000, seed=43)
    assert (a.p_false_alarm, a.p_miss) == (b.p_false_alarm, b.p_miss)
    assert (a.p_false_alarm, a.p_miss) != (c.p_false_alarm, c.p_miss)
    assert a.method == "monte_carlo" and a.n == 2000 and a.seed == 42
    assert a.hw_false_alarm > 0.0 and a.hw_miss > 0.0
    p0, p1 = priors(1.0)
    assert a.hw_error == pytest.approx(
        p0 * a.hw_false_alarm + p1 * a.hw_miss, rel=1e-15)


def test_monte_carlo_input_validation(norm_pair, norm_grid):
    f0, f1 = norm_pair
    with pytest.raises(ValueError, match="at least 1000"):
        monte_carlo_errors(lrt_rule(norm_pair, 1.0), f0, f1, 1.0, 500, seed=1)
    with pytest.raises(TypeError, match="callable"):
        monte_carlo_errors(np.zeros(norm_grid.points.shape), f0, f1, 1.0,
                           2000, seed=1)


def test_monte_carlo_agrees_with_quadrature(mix_solution, mix_nominals):
    sol = mix_solution
    f0, f1 = mix_nominals
    quad = error_probs(sol.delta_hat, f0, f1, 1.0, sol.grid)
    assert quad.p_false_alarm == pytest.approx(ANCHOR_NOMINAL_PF, rel=1e-12)
    assert quad.p_miss == pytest.approx(ANCHOR_NOMINAL_PM, rel=1e-12)
    mc = monte_carlo_errors(sol.delta_hat, f0, f1, 1.0, 100_000, seed=7000)
    assert abs(mc.p_false_alarm - quad.p_false_alarm) <= 3.0 * mc.hw_false_alarm
    assert abs(mc.p_miss - quad.p_miss) <= 3.0 * mc.hw_miss


# ---------------------------------------------------------------------------
# sweeps


def test_snr_conversions_roundtrip(mix_noise):
    targets = [-5.0, 0.0, 7.0]
    amps = amplitudes_from_snr(targets, mix_noise)
    assert amps[1] == pytest.approx(math.sqrt(5.0), rel=1e-12)  # mixture std
    for t, a in zip(targets, amps):
        assert snr_of(a, mix_noise) == pytest.approx(t, abs=1e-12)
    with pytest.raises(ValueError, match="positive"):
        snr_of(0.0, mix_noise)


def test_snr_sweep_rows_and_robustness_price():
    noise = density.gaussian(0.0, 1.0)
    amps = amplitudes_from_snr([0.0, 10.0], noise)
    rows = snr_sweep(noise, amps, DivergenceSpec(alpha=0.5))
    assert len(rows) == 2 * (1 + len(DEFAULT_EPS_SETTINGS))
    by_amp = {}
    for r in rows:
        assert isinstance(r, SnrRow) and r.feasible and r.note == ""
        by_amp.setdefault(round(r.amplitude, 12), []).append(r)
    for group in by_amp.values():
        nominal, small, large = group
        assert nominal.test == "nominal" and (nominal.eps0, nominal.eps1) == (0.0, 0.0)
        assert small.test == "robust" and small.eps0 == 0.005
        assert large.test == "robust" and large.eps0 == 0.02
        # rows are evaluated under the nominal pair: robustness costs error,
        # and more robustness costs more
        assert small.p_error > nominal.p_error
        assert large.p_error > small.p_error


def test_snr_sweep_uses_spec_radii_when_nonzero():
    noise = density.gaussian(0.0, 1.0)
    rows = snr_sweep(noise, amplitudes_from_snr([10.0], noise),
                     DivergenceSpec(alpha=0.5, eps0=0.01, eps1=0.015))
    assert len(rows) == 2
    assert rows[1].test == "robust"
    assert (rows[1].eps0, rows[1].eps1) == (0.01, 0.015)


def test_snr_sweep_records_infeasible_rows():
    noise = density.gaussian(0.0, 1.0)
    rows = snr_sweep(noise, amplitudes_from_snr([0.0], noise),
                     DivergenceSpec(alpha=0.5, eps0=3.9, eps1=3.9))
    assert rows[0].feasible is True
    bad = rows[1]
    assert bad.feasible is False and bad.note != ""
    assert math.isnan(bad.p_false_alarm) and math.isnan(bad.p_error)


def test_alpha_sweep_threshold_anchors(mix_spec, mix_nominals, mix_grid):
    rows = evaluation.alpha_sweep(mix_spec, [2.0, 4.0, 10.0, 50.0],
                                  mix_nominals, mix_grid)
    expected = {
        2.0: (0.5845382425727917, 1.6713661663607227),
        4.0: (0.6050401521115419, 1.6180169369866289),
        10.0: (0.6644246095707789, 1.4830745893955009),
        50.0: (0.8417272087470762, 1.1835769542687569),
    }
    for row in rows:
        assert isinstance(row, AlphaRow) and row.error is None
        l_l, l_u = expected[row.alpha]
        assert row.l_l == pytest.approx(l_l, rel=1e-8)
        assert row.l_u == pytest.approx(l_u, rel=1e-8)
        assert row.residual_norm < 1e-8
        assert row.achieved_eps0 == pytest.approx(0.02, abs=1e-7)
        assert row.achieved_eps1 == pytest.approx(0.03, abs=1e-7)
    # thresholds tighten toward each other as the order grows
    lls = [r.l_l for r in rows]
    lus = [r.l_u for r in rows]
    assert all(x < y for x, y in zip(lls, lls[1:]))
    assert all(x > y for x, y in zip(lus, lus[1:]))


def test_alpha_sweep_records_failed_orders(mix_nominals, mix_grid):
    spec = DivergenceSpec(alpha=4.0, rho=1.0, eps0=0.02, eps1=0.40)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = evaluation.alpha_sweep(spec, [4.0], mix_nominals, mix_grid)
    assert len(rows) == 1
    assert rows[0].error is not None and "not strictly inside" in rows[0].error
    assert math.isnan(rows[0].l_l) and math.isnan(rows[0].l_u)


# ---------------------------------------------------------------------------
# ball members and rule perturbations


def test_tilted_density_hits_target(norm_pair, norm_grid):
    f0, _ = norm_pair
    g, achieved = tilted_density(f0, norm_grid, 0.5, 0.01)
    assert achieved == pytest.approx(0.01, abs=1e-8)
    d = alpha_divergence(g, f0, 0.5, norm_grid)
    assert d == pytest.approx(achieved, abs=1e-9)
    # the tilt moved mass but kept a density
    assert float(np.sum(norm_grid.weights * density.evaluate(g, norm_grid.points))) == \
        pytest.approx(1.0, abs=1e-9)


def test_tilted_density_zero_target_returns_nominal(norm_pair, norm_grid):
    f0, _ = norm_pair
    g, achieved = tilted_density(f0, norm_grid, 0.5, 0.0)
    assert achieved == 0.0
    np.testing.assert_allclose(density.evaluate(g, norm_grid.points),
                               density.evaluate(f0, norm_grid.points),
                               rtol=1e-9, atol=1e-12)


def test_tilted_density_caps_unreachable_targets(norm_pair, norm_grid):
    f0, _ = norm_pair
    g, achieved = tilted_density(f0, norm_grid, 0.5, 50.0)
    assert achieved < 50.0
    assert float(np.sum(norm_grid.weights * density.evaluate(g, norm_grid.points))) == \
        pytest.approx(1.0, abs=1e-9)


def test_tilted_density_validation(norm_pair, norm_grid):
    f0, _ = norm_pair
    with pytest.raises(ValueError, match="nonnegative"):
        tilted_density(f0, norm_grid, 0.5, -0.1)
    with pytest.raises(ValueError, match="width"):
        tilted_density(f0, norm_grid, 0.5, 0.1, width=0.0)
    with pytest.raises(ValueError, match="no mass"):
        tilted_density(density.gaussian(100.0, 0.1), norm_grid, 0.5, 0.1)


def test_ball_members_stay_strictly_inside(norm_pair, norm_grid):
    f0, _ = norm_pair
    members = ball_members(f0, norm_grid, 0.5, 0.02, count=20, seed=11)
    assert len(members) == 20
    for g in members:
        d = alpha_divergence(g, f0, 0.5, norm_grid)
        assert 0.0 < d < 0.02
    again = ball_members(f0, norm_grid, 0.5, 0.02, count=20, seed=11)
    np.testing.assert_array_equal(members[0].values, again[0].values)
    with pytest.raises(ValueError, match="radius"):
        ball_members(f0, norm_grid, 0.5, 0.0, count=2, seed=1)
    with pytest.raises(ValueError, match="member"):
        ball_members(f0, norm_grid, 0.5, 0.02, count=0, seed=1)


def test_rule_perturbations_are_valid_rules(mix_solution):
    sol = mix_solution
    variants = rule_perturbations(sol, count=10, seed=13)
    assert len(variants) == 10
    base = sol.delta_hat(sol.grid.points)
    changed = 0
    for v in variants:
        vals = v(sol.grid.points)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        if not np.array_equal(vals, base):
            changed += 1
    assert changed == 10
    again = rule_perturbations(sol, count=10, seed=13)
    np.testing.assert_array_equal(variants[0](sol.grid.points),
                                  again[0](sol.grid.points))
    with pytest.raises(ValueError, match="perturbation"):
        rule_perturbations(sol, count=0, seed=1)
    with pytest.raises(ValueError, match="magnitude"):
        rule_perturbations(sol, count=1, seed=1, magnitude=1.5)

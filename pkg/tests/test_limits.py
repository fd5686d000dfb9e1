"""Maximum admissible radii: closed forms, the general boundary solver, and
the agreement between the two on the Gaussian pair where both apply.

The alpha = 1/2 closed forms are checked against hand-derivable endpoints
and a frozen boundary partner computed independently, and the general
solver is cross-validated against the closed form at ten boundary points.
"""

import math
import warnings

import numpy as np
import pytest

from robustlrt import DivergenceSpec, density, limits
from robustlrt.limits import (
    EPS_MAX_A0,
    FeasibilityReport,
    InfeasiblePairError,
    NoBoundaryPointError,
)

# boundary partner of eps0 = 0.02 for the bimodal anchor problem (alpha = 4)
ANCHOR_PARTNER_AT_002 = 0.3203331564669265
ANCHOR_LAMBDA0 = 1.8367323852510415
ANCHOR_LAMBDA1 = 0.14914371569588966

# Bhattacharyya overlap of N(-1, 1) vs N(+1, 1)
GAUSS_OVERLAP = math.exp(-0.5)


# ---------------------------------------------------------------------------
# closed forms (alpha = 1/2)


def test_axis_maximum_constant():
    assert EPS_MAX_A0 == pytest.approx(4.0 - 2.0 * math.sqrt(2.0), rel=0, abs=0)
    assert EPS_MAX_A0 == pytest.approx(1.1715728752538097, rel=1e-15)


def test_hellinger_eps_max_endpoints():
    assert limits.hellinger_eps_max(0.0) == pytest.approx(EPS_MAX_A0, rel=1e-15)
    assert limits.hellinger_eps_max(1.0) == 0.0
    assert limits.hellinger_eps_max(GAUSS_OVERLAP) == pytest.approx(
        0.4149971718698646, rel=1e-14)
    # strictly decreasing in the overlap
    vals = [limits.hellinger_eps_max(a) for a in np.linspace(0.0, 1.0, 9)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_hellinger_eps_max_rejects_bad_overlap():
    for a in (-0.1, 1.1, 2.0):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            limits.hellinger_eps_max(a)


def test_hellinger_root_a_symmetry_and_range():
    assert limits.hellinger_root_a(0.3, 0.7) == pytest.approx(
        limits.hellinger_root_a(0.7, 0.3), rel=0, abs=0)
    for bad in (-0.01, 8.01):
        with pytest.raises(ValueError, match=r"\[0, 8\]"):
            limits.hellinger_root_a(bad, 0.1)
        with pytest.raises(ValueError, match=r"\[0, 8\]"):
            limits.hellinger_root_a(0.1, bad)


def test_hellinger_root_a_rejects_pairs_beyond_any_boundary():
    # (3, 3) lies outside every admissible ball pair: no overlap in [0, 1]
    with pytest.raises(InfeasiblePairError, match="infeasible pair"):
        limits.hellinger_root_a(3.0, 3.0)


def test_hellinger_diagonal_roundtrip():
    # symmetric radius -> critical overlap -> symmetric maximum is identity
    for e in np.linspace(1e-4, EPS_MAX_A0 * 0.999, 20):
        a = limits.hellinger_root_a(float(e), float(e))
        assert limits.hellinger_eps_max(a) == pytest.approx(float(e), abs=1e-10)


def test_hellinger_partner_no_boundary_point():
    # fixed radius already beyond the axis maximum for this overlap
    with pytest.raises(NoBoundaryPointError, match="exceeds the axis"):
        limits._hellinger_other(0.5, 3.0)
    # at the axis maximum exactly, the partner collapses to zero
    e_axis = 4.0 * (1.0 - 0.75)  # root of root_a(e, 0) = 0.75
    assert limits._hellinger_other(0.75, e_axis) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# general boundary solver


def test_general_matches_closed_form_on_gaussian_pair(norm_pair, norm_grid):
    a = GAUSS_OVERLAP
    e_hi = limits.hellinger_eps_max(a)
    for e0 in np.linspace(0.02, 0.95 * e_hi, 10):
        e1_closed = limits._hellinger_other(a, float(e0))
        e1_gen, lam0, lam1 = limits.max_eps_general(
            norm_pair, 0.5, 1.0, norm_grid, (0, float(e0)))
        assert e1_gen == pytest.approx(e1_closed, abs=1e-12)
        assert lam0 > 0.0 and lam1 > 0.0


def test_general_partner_anchor_value(mix_nominals, mix_grid):
    with pytest.warns(RuntimeWarning, match="spans only"):
        e1, lam0, lam1 = limits.max_eps_general(
            mix_nominals, 4.0, 1.0, mix_grid, (0, 0.02))
    assert e1 == pytest.approx(ANCHOR_PARTNER_AT_002, rel=1e-9)
    assert lam0 == pytest.approx(ANCHOR_LAMBDA0, rel=1e-7)
    assert lam1 == pytest.approx(ANCHOR_LAMBDA1, rel=1e-7)


def test_general_zero_radius_shortcuts(norm_pair, norm_grid):
    # pinning one radius at zero makes the shared density that nominal, so
    # the partner radius is the plain divergence and one multiplier is zero
    alpha = 4.0
    aa = alpha * (1.0 - alpha)
    e1, lam0, lam1 = limits.max_eps_general(norm_pair, alpha, 1.0, norm_grid,
                                            (0, 0.0))
    lf0 = np.log(density.evaluate(norm_pair[0], norm_grid.points))
    lf1 = np.log(density.evaluate(norm_pair[1], norm_grid.points))
    m = float(np.dot(np.exp(alpha * lf0 + (1 - alpha) * lf1), norm_grid.weights))
    assert e1 == pytest.approx((1.0 - m) / aa, rel=1e-12)
    assert (lam0, lam1) == (abs(1.0 - alpha), 0.0)

    e0, lam0, lam1 = limits.max_eps_general(norm_pair, alpha, 1.0, norm_grid,
                                            (1, 0.0))
    m = float(np.dot(np.exp(alpha * lf1 + (1 - alpha) * lf0), norm_grid.weights))
    assert e0 == pytest.approx((1.0 - m) / aa, rel=1e-12)
    assert (lam0, lam1) == (0.0, abs(1.0 - alpha))


def test_general_rejects_bad_arguments(norm_pair, norm_grid):
    with pytest.raises(ValueError, match="index"):
        limits.max_eps_general(norm_pair, 4.0, 1.0, norm_grid, (2, 0.1))
    with pytest.raises(ValueError, match="nonnegative"):
        limits.max_eps_general(norm_pair, 4.0, 1.0, norm_grid, (0, -0.1))
    with pytest.raises(ValueError, match="nonnegative"):
        limits.max_eps_general(norm_pair, 4.0, 1.0, norm_grid, (0, math.nan))
    with pytest.raises(ValueError, match="rho"):
        limits.max_eps_general(norm_pair, 4.0, 0.0, norm_grid, (0, 0.1))


def test_general_fixed_radius_beyond_any_boundary(norm_pair, norm_grid):
    # x(alpha, eps) <= 0 means no ball of that radius exists at all
    with pytest.raises(NoBoundaryPointError, match="not positive"):
        limits.max_eps_general(norm_pair, 0.5, 1.0, norm_grid, (0, 4.1))


def test_bounded_ratio_warning_contract(mix_nominals, mix_grid, norm_pair,
                                        norm_grid):
    # the bimodal pair has a ratio trapped in a few decades -> warn
    with pytest.warns(RuntimeWarning, match="spans only"):
        limits.max_eps_general(mix_nominals, 4.0, 1.0, mix_grid, (0, 0.0))
    # the Gaussian pair sweeps far past both rails on this grid -> silent
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        limits.max_eps_general(norm_pair, 4.0, 1.0, norm_grid, (0, 0.0))


# ---------------------------------------------------------------------------
# boundary surface tabulation


def test_surface_closed_form_default_overlap():
    rep = limits.eps_surface(0.5, 9)
    assert isinstance(rep, FeasibilityReport)
    assert rep.mode == "hellinger"
    assert rep.a_value == 0.0
    assert len(rep.pairs) == 9
    # widest case: partner of a zero radius is 4, apex is the symmetric max
    assert rep.pairs[0] == pytest.approx((0.0, 4.0), abs=1e-12)
    assert rep.pairs[-1][0] == pytest.approx(EPS_MAX_A0, rel=1e-12)
    assert rep.pairs[-1][1] == pytest.approx(EPS_MAX_A0, abs=1e-9)
    partners = [p[1] for p in rep.pairs]
    assert all(x > y for x, y in zip(partners, partners[1:]))
    assert rep.lambda0 > 0.0 and rep.lambda1 > 0.0


def test_surface_overlap_from_nominals(norm_pair, norm_grid):
    rep = limits.eps_surface(0.5, 5, nominals=norm_pair, grid=norm_grid)
    assert rep.a_value == pytest.approx(GAUSS_OVERLAP, rel=1e-12)
    assert rep.pairs[-1][1] == pytest.approx(0.4149971718698646, abs=1e-9)


def test_surface_general_mode(mix_nominals, mix_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = limits.eps_surface(4.0, 4, nominals=mix_nominals, grid=mix_grid)
    assert rep.mode == "general"
    assert math.isnan(rep.a_value)
    assert len(rep.pairs) == 4
    assert rep.pairs[0][0] == 0.0
    partners = [p[1] for p in rep.pairs]
    assert all(x > y for x, y in zip(partners, partners[1:]))
    assert partners[-1] >= 0.0
    assert rep.lambda0 > 0.0 and rep.lambda1 > 0.0


def test_surface_argument_validation(norm_pair, norm_grid):
    with pytest.raises(ValueError, match="at least 2"):
        limits.eps_surface(0.5, 1)
    with pytest.raises(ValueError, match="nominals and a grid"):
        limits.eps_surface(4.0, 5)
    with pytest.raises(ValueError, match="grid is required"):
        limits.eps_surface(0.5, 5, nominals=norm_pair)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        limits.eps_surface(0.5, 5, a=1.5)


# ---------------------------------------------------------------------------
# radius pair validation


def test_validate_eps_signs(mix_nominals, mix_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ok, margin = limits.validate_eps(
            mix_nominals, DivergenceSpec(alpha=4.0, eps0=0.02, eps1=0.03),
            mix_grid)
        bad, neg = limits.validate_eps(
            mix_nominals, DivergenceSpec(alpha=4.0, eps0=0.02, eps1=0.40),
            mix_grid)
    assert ok is True and margin > 0.0
    assert bad is False and neg < 0.0

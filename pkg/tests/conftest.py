"""Shared fixtures: the bimodal-noise anchor problem and a Gaussian pair.

The anchor problem — symmetric two-component Gaussian noise, unit shift,
alpha = 4, rho = 1, radii (0.02, 0.03) on a 4001-point grid over [-8, 9] —
exercises every region structure the solver supports (its middle region
splits into three disjoint intervals), so most integration tests share one
session-scoped solve of it.
"""

import numpy as np
import pytest

from robustlrt import DivergenceSpec, density, kernels, lfd_solver


@pytest.fixture(scope="session")
def mix_noise():
    return density.gaussian_mixture([(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)])


@pytest.fixture(scope="session")
def mix_nominals(mix_noise):
    return (mix_noise, density.shifted(mix_noise, 1.0))


@pytest.fixture(scope="session")
def mix_grid():
    return density.make_grid(-8.0, 9.0, 4001)


@pytest.fixture(scope="session")
def mix_spec():
    return DivergenceSpec(alpha=4.0, rho=1.0, eps0=0.02, eps1=0.03)


@pytest.fixture(scope="session")
def mix_solution(mix_spec, mix_nominals, mix_grid):
    return lfd_solver.solve_thresholds(mix_spec, mix_nominals, mix_grid)


@pytest.fixture(scope="session")
def norm_pair():
    return (density.gaussian(-1.0, 1.0), density.gaussian(1.0, 1.0))


@pytest.fixture(scope="session")
def norm_grid():
    return density.make_grid(-9.0, 9.0, 4001)


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger JIT compilation so timed tests measure steady-state speed."""
    pts = np.linspace(-1.0, 1.0, 64)
    f0 = np.exp(-0.5 * (pts + 0.2) ** 2)
    f1 = np.exp(-0.5 * (pts - 0.2) ** 2)
    l = f1 / f0
    kernels.region_masses(l, f0, f1, pts, 0.8, 1.2)
    kernels.i2_power_integrals(l, f0, f1, pts, 0.8, 1.2, 1.0, 3.0, 4.0,
                               0.5, 0.512, 1.728)
    return True

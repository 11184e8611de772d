"""Shared fixtures: canonical scenarios and cached expensive solves."""

import numpy as np
import pytest

from bwrobust.bregman import (make_piecewise_quadratic_generator,
                              make_xlogx_generator, quadratic_generator)
from bwrobust.distortions import tvar_distortion
from bwrobust.distributions import make_tabulated, make_truncated_exponential
from bwrobust.scenario import MarketScenario


@pytest.fixture(scope="session")
def texp():
    """Unit-mean exponential truncated at 100, the canonical benchmark."""
    return make_truncated_exponential(1.0, 100.0)


@pytest.fixture(scope="session")
def uniform01():
    return make_tabulated([(0.0, 0.0), (1.0, 1.0)])


@pytest.fixture(scope="session")
def xlogx100():
    return make_xlogx_generator(1.0, 100.0)


@pytest.fixture(scope="session")
def quad1():
    return quadratic_generator(1.0)


def layered_scenario(texp, k):
    """Worst/best-case VaR demand scenario with tail curvature k."""
    q = texp.quantile(0.95)
    gen = make_piecewise_quadratic_generator(q, k, 100.0)
    return MarketScenario(theta=0.5, alpha=0.95, epsilon=0.5, kappa=0.9,
                          benchmark=texp, insurer_survival=texp, generator=gen)


def guaranteed_scenario(texp, gen, a_level, epsilon=0.005, alpha=0.95):
    return MarketScenario(theta=0.5, alpha=alpha, epsilon=epsilon,
                          benchmark=texp, insurer_survival=texp,
                          generator=gen, distortion=tvar_distortion(alpha),
                          acceptable_var=a_level)


@pytest.fixture(scope="session")
def maxmin_solutions(texp):
    """Layered-model solutions for k in {1, 2, 4} (acceptance example)."""
    from bwrobust.alpha_maxmin import solve_maxmin

    return {k: solve_maxmin(layered_scenario(texp, k)) for k in (1.0, 2.0, 4.0)}


@pytest.fixture(scope="session")
def guaranteed_solutions(texp, xlogx100):
    """Guaranteed-VaR solutions for the three acceptance A levels."""
    from bwrobust.guaranteed_var import solve_problem2

    out = {}
    for a_level in (1.406, 1.401, 1.396):
        sc = guaranteed_scenario(texp, xlogx100, a_level)
        out[a_level] = (sc, solve_problem2(sc))
    return out


def random_tabulated(rng, support_max=4.0, max_knots=8, allow_atoms=True):
    """Random piecewise-linear CDF on [0, support_max], optional atoms."""
    n = int(rng.integers(2, max_knots))
    xs = np.sort(rng.uniform(0.0, support_max, size=n))
    xs[-1] = support_max
    ps = np.sort(rng.uniform(0.0, 1.0, size=n))
    ps[-1] = 1.0
    knots = [(0.0, 0.0)] + list(zip(xs, ps))
    if allow_atoms and rng.random() < 0.4 and n >= 3:
        i = int(rng.integers(1, n - 1))
        x_at, p_at = knots[i]
        jump = min(1.0, p_at + rng.uniform(0.02, 0.2))
        knots = knots[: i + 1] + [(x_at, jump)] + \
            [(x, max(p, jump)) for x, p in knots[i + 1:]]
    # drop knots that became non-monotone duplicates beyond pairs
    cleaned = [knots[0]]
    for x, p in knots[1:]:
        lx, lp = cleaned[-1]
        if x < lx or p < lp:
            continue
        if x == lx and p == lp:
            continue
        if x == lx and len(cleaned) >= 2 and cleaned[-2][0] == x:
            continue
        cleaned.append((x, p))
    if cleaned[-1][1] < 1.0:
        cleaned.append((support_max, 1.0))
    if cleaned[-1][0] < support_max:
        cleaned.append((support_max, 1.0))
    return make_tabulated(cleaned)

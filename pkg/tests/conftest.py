"""Shared solves and sweeps, computed once per session.

The sweep fixtures are the expensive part of the suite; acceptance and
regression tests both read from them.
"""

import time

import pytest

from gslab import Family, ProblemParams, ShootControls, SweepSpec, solve_ground_state, sweep

# wall-clock seconds per expensive fixture, for the acceptance runtime gates
TIMINGS: dict[str, float] = {}


def _timed(name, fn):
    t0 = time.perf_counter()
    out = fn()
    TIMINGS[name] = time.perf_counter() - t0
    return out

# Twelve parameter sets spanning all regimes (N in {3,4,5}); the identity
# suite and several regression tests run over these.
IDENTITY_SETS = [
    (3, 4.0, 6.0, 1e-2, Family.P_EPS),
    (3, 4.0, 6.0, 1e-4, Family.P_EPS),
    (3, 6.0, 10.0, 1e-3, Family.P_EPS),
    (3, 6.0, 10.0, 1e-5, Family.P_EPS),
    (3, 8.0, 12.0, 1e-3, Family.P_EPS),
    (3, 8.0, 12.0, 0.0, Family.P_ZERO),
    (4, 3.0, 6.0, 1e-3, Family.P_EPS),
    (4, 4.0, 8.0, 1e-4, Family.P_EPS),
    (4, 6.0, 9.0, 1e-3, Family.P_EPS),
    (5, 10.0 / 3.0, 6.0, 1e-3, Family.P_EPS),
    (5, 4.0, 7.0, 1e-2, Family.P_EPS),
    (3, 4.0, 6.0, 0.0, Family.R_ZERO),
]


@pytest.fixture(scope="session")
def identity_solutions():
    def run():
        out = {}
        for N, p, q, eps, fam in IDENTITY_SETS:
            params = ProblemParams(N, p, q, eps, fam)
            out[(N, p, q, eps, fam)] = solve_ground_state(params)
        return out

    return _timed("identity_solutions", run)


@pytest.fixture(scope="session")
def crit5_sweep():
    # the N >= 5 critical sweep over eps in [1e-5, 1e-2]
    return _timed("crit5_sweep", lambda: sweep(SweepSpec(
        regime="critical", N=5, q=6.0, grid_min=1e-5, grid_max=1e-2, ratio=2.0)))


@pytest.fixture(scope="session")
def crit3_sweep():
    return _timed("crit3_sweep", lambda: sweep(SweepSpec(
        regime="critical", N=3, q=10.0, grid_min=1.5e-9, grid_max=3e-6, ratio=2.0)))


@pytest.fixture(scope="session")
def crit4_sweep():
    return _timed("crit4_sweep", lambda: sweep(SweepSpec(
        regime="critical", N=4, q=8.0, grid_min=1e-9, grid_max=3e-5, ratio=2.0)))


@pytest.fixture(scope="session")
def super_sweep():
    return sweep(SweepSpec(regime="supercritical", N=3, p=8.0, q=12.0,
                           grid_min=5e-9, grid_max=2e-2, ratio=2.0))


@pytest.fixture(scope="session")
def sub_sweep():
    return sweep(SweepSpec(regime="subcritical", N=3, p=4.0, q=6.0,
                           grid_min=9e-5, grid_max=5e-2, ratio=2.0))


@pytest.fixture(scope="session")
def delta_sweep():
    return sweep(SweepSpec(regime="delta_supercritical", N=3, q=12.0,
                           grid_min=5e-3, grid_max=0.5, ratio=100.0 ** 0.1,
                           fit_window=(0.01, 0.3)))


@pytest.fixture(scope="session")
def delta_sweep_small_q():
    # exploratory: q = 7 < N(N+2)/(2(N-2)) = 7.5, no exponent assertion
    return sweep(SweepSpec(regime="delta_supercritical", N=3, q=7.0,
                           grid_min=5e-3, grid_max=0.5, ratio=100.0 ** 0.1,
                           fit_window=(0.01, 0.3)))


@pytest.fixture(scope="session")
def tight_ctrl():
    return ShootControls(amp_tol=1e-14)

import math

import numpy as np
import pytest

from gslab import (
    BracketNotFound,
    Classification,
    Family,
    ProblemParams,
    ShootControls,
    TerminalEvent,
    Trajectory,
    classify,
    epsilon_star,
    find_ground_state,
    integrate,
)

R_ZERO_34 = ProblemParams(3, 4.0, 6.0, 0.0, Family.R_ZERO)

# frozen from the independent DOP853 coarse-scan oracle (1e-3 spacing scan
# followed by 60 bisection steps, rtol 1e-12)
V0_AMPLITUDE_ORACLE = 4.337387679977


def _mk_traj(event, values=(1.0, 0.5, 0.1), slopes=(-0.1, -0.1, -0.05)):
    r = np.array([0.1, 1.0, 2.0])
    return Trajectory(
        radii=r,
        values=np.array(values, dtype=float),
        slopes=np.array(slopes, dtype=float),
        terminal_event=event,
        terminal_radius=2.0,
    )


def test_classify_event_mapping():
    assert classify(_mk_traj(TerminalEvent.ZERO_CROSSING)) == Classification.OVERSHOOT
    assert classify(_mk_traj(TerminalEvent.SLOPE_SIGN_FLIP)) == Classification.UNDERSHOOT
    assert classify(_mk_traj(TerminalEvent.UNDERFLOW)) == Classification.CONVERGED


def test_classify_rmax_threshold():
    t = _mk_traj(TerminalEvent.REACHED_RMAX, values=(1.0, 1e-8, 1e-15 * 1.0))
    assert classify(t, amplitude=1.0) == Classification.CONVERGED


def test_r_zero_amplitude_matches_scan_oracle():
    prof = find_ground_state(R_ZERO_34)
    assert prof.amplitude == pytest.approx(V0_AMPLITUDE_ORACLE, rel=1e-6)


def test_bisection_bracket_endpoints_classify():
    prof = find_ground_state(R_ZERO_34)
    lo, hi = prof.bracket
    t_lo = integrate(R_ZERO_34, lo * (1.0 - 1e-7), prof.r_max_used)
    t_hi = integrate(R_ZERO_34, hi * (1.0 + 1e-7), prof.r_max_used)
    assert classify(t_lo, R_ZERO_34, lo) == Classification.UNDERSHOOT
    assert classify(t_hi, R_ZERO_34, hi) == Classification.OVERSHOOT


def test_epsilon_star_closed_case():
    # for (p, q) = (4, 6) the double root sits at u^2 = 3/4 and eps* = 3/16
    assert epsilon_star(4.0, 6.0) == pytest.approx(3.0 / 16.0, rel=1e-14)


def test_epsilon_star_against_nested_bisection_oracle():
    p, q = 3.5, 7.2

    def has_positive_zero(eps):
        # max of F on (0, 2) is positive iff a ground state window exists
        u = np.linspace(1e-4, 2.0, 4000)
        F = u**p / p - u**q / q - 0.5 * eps * u**2
        return F.max() > 0.0

    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if has_positive_zero(mid):
            lo = mid
        else:
            hi = mid
    assert epsilon_star(p, q) == pytest.approx(0.5 * (lo + hi), rel=1e-5)


def test_epsilon_star_continuity_toward_p_equals_2():
    vals = [epsilon_star(p, 6.0) for p in (2.4, 2.2, 2.1, 2.05)]
    assert all(v > 0.0 for v in vals)
    assert all(abs(a - b) < 0.2 for a, b in zip(vals, vals[1:]))


def test_bracketing_experiment_around_eps_star():
    # near eps* the trajectory must linger at the potential top long enough to
    # shed its excess energy through the 1/r friction, which pushes the
    # ground-state amplitude exponentially close to the largest root of f;
    # 0.90 eps* is the last comfortably resolvable point for this (p, q)
    es = epsilon_star(4.0, 6.0)
    ok = find_ground_state(ProblemParams(3, 4.0, 6.0, 0.90 * es, Family.P_EPS))
    assert ok.amplitude > 0.0
    with pytest.raises(BracketNotFound):
        find_ground_state(ProblemParams(3, 4.0, 6.0, 1.01 * es, Family.P_EPS))


def test_p_eps_amplitude_bounded_by_one(identity_solutions):
    for (N, p, q, eps, fam), sol in identity_solutions.items():
        if fam is Family.P_EPS:
            assert sol.amplitude <= 1.0 + 1e-12


def test_profile_monotone_positive(identity_solutions):
    for sol in identity_solutions.values():
        vals = sol.profile.grid.values
        assert np.all(vals > 0.0)
        # non-increasing everywhere (exact float ties allowed), strictly
        # decreasing overall
        assert np.all(np.diff(vals) <= 0.0)
        assert vals[-1] < vals[0]


def test_tail_mismatch_small(identity_solutions):
    for sol in identity_solutions.values():
        assert sol.profile.tail.mismatch < 1e-4
        assert sol.profile.tail.prefactor > 0.0


def test_tail_residual_at_twice_match_radius():
    # residual of the analytic tail against the numerical profile stays
    # below 1e-3 out to 2x the match radius (or the end of the grid)
    prof = find_ground_state(R_ZERO_34, ShootControls(amp_tol=5e-16))
    rm = prof.tail.match_radius
    r_end = prof.grid.radii[-1]
    r_chk = min(2.0 * rm, r_end)
    idx = np.argmin(np.abs(prof.grid.radii - r_chk))
    u_num = prof.grid.values[idx]
    u_tail = prof.tail.predict(prof.grid.radii[idx])
    assert abs(u_tail - u_num) / u_num < 1e-3


def test_amplitude_continuous_in_eps():
    # along a 1.2x refined eps grid the amplitude moves by < 5% per step
    amps = []
    eps = 1e-3
    for _ in range(6):
        sol = find_ground_state(ProblemParams(3, 6.0, 10.0, eps, Family.P_EPS))
        amps.append(sol.amplitude)
        eps /= 1.2
    rel = np.abs(np.diff(amps)) / np.array(amps[:-1])
    assert np.all(rel < 0.05)
    # uniqueness + continuity: the amplitude moves monotonically with eps
    assert all(a > b for a, b in zip(amps, amps[1:]))


def test_r_eps_frame_consistency():
    # the R_eps ground state is the exact rescaling eps^(-1/(p-2)) u(x/sqrt(eps))
    eps = 1e-2
    p_sol = find_ground_state(ProblemParams(3, 4.0, 6.0, eps, Family.P_EPS))
    r_sol = find_ground_state(ProblemParams(3, 4.0, 6.0, eps, Family.R_EPS))
    assert r_sol.amplitude == pytest.approx(eps**-0.5 * p_sol.amplitude, rel=1e-9)


def test_supercritical_limit_family_solves(identity_solutions):
    sol = identity_solutions[(3, 8.0, 12.0, 0.0, Family.P_ZERO)]
    assert sol.profile.tail.kind == "Algebraic"
    assert sol.amplitude < 1.0


def test_exponential_tail_kind(identity_solutions):
    sol = identity_solutions[(3, 4.0, 6.0, 1e-2, Family.P_EPS)]
    assert sol.profile.tail.kind == "Exponential"
    assert sol.profile.tail.rate_or_power == pytest.approx(math.sqrt(1e-2))

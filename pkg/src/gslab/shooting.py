"""Ground-state solves by bisection on the initial amplitude u(0).

The shooting dichotomy: trajectories that cross zero overshoot the ground
state, trajectories that rebound (u' turns positive) undershoot it.  For
the eps = 0 supercritical family nothing rebounds -- sub-ground-state
trajectories decay at the slow Emden rate r^(-2/(p-2)) instead of the
Green-function rate r^(-(N-2)) -- so classification there uses the sign of
the far-field constant mode B in u ~ B + A r^(-(N-2)).

The admissible amplitude window is (u_F0, u_hi): u_F0 is the first
positive zero of the potential F (below it the trajectory lacks the energy
to reach zero), u_hi the largest positive root of f (at or above it the
start is not monotone decreasing, since u''(0) = -f(a)/N).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import kve

from .errors import BracketNotFound, InternalConsistencyError
from .ode import IntegrationFailure, StepControls, TerminalEvent, Trajectory, integrate
from .params import Family, ProblemParams

__all__ = [
    "Classification",
    "ShootControls",
    "TailModel",
    "RadialProfile",
    "classify",
    "find_ground_state",
    "epsilon_star",
]


class Classification:
    OVERSHOOT = "Overshoot"
    UNDERSHOOT = "Undershoot"
    CONVERGED = "Converged"


@dataclass(frozen=True)
class ShootControls:
    """Knobs for the amplitude bisection and its inner integrations."""

    amp_tol: float = 1e-12           # relative bracket width at convergence
    max_iter: int = 200
    amp_search_range: tuple[float, float] | None = None
    bracket_hint: tuple[float, float] | None = None
    r_max: float | None = None
    convergence_factor: float = 1e-8   # terminal value below this * amplitude => converged
    step: StepControls = field(default_factory=lambda: StepControls(atol=1e-12, rtol=1e-10))


@dataclass
class TailModel:
    """Analytic far-field model matched to the numerical profile.

    Exponential (rate k > 0): u(r) ~ prefactor * r^(-(N-1)/2) e^(-k r),
    realized through the exact linear-equation mode r^(1-N/2) K_nu(k r)
    (nu = N/2 - 1), whose asymptotic constant is the stored prefactor.
    Algebraic: u(r) ~ prefactor * r^(-(N-2)).  Both carry a fitted
    first-order correction ``corr`` for the residual nonlinearity.
    """

    kind: str                 # "Exponential" | "Algebraic"
    rate_or_power: float      # decay rate k, or the power N-2
    prefactor: float
    match_radius: float
    N: int
    corr: float = 0.0
    corr_pm2: float = 0.0     # correction regressor exponent, p - 2
    mismatch: float = 0.0     # max relative residual over the fit window

    def _base(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "Algebraic":
            return self.prefactor * r ** -(self.N - 2.0)
        k = self.rate_or_power
        nu = 0.5 * self.N - 1.0
        cb = self.prefactor * math.sqrt(2.0 * k / math.pi)
        return cb * r ** (1.0 - 0.5 * self.N) * kve(nu, k * r) * np.exp(-k * r)

    def _corr_factor(self, base, r):
        k = self.rate_or_power if self.kind == "Exponential" else 0.0
        g = np.abs(base) ** self.corr_pm2 * r * r / (1.0 + (k * r) ** 2)
        return 1.0 + self.corr * g

    def predict(self, r):
        r = np.asarray(r, dtype=float)
        base = self._base(r)
        out = base * self._corr_factor(base, r)
        return float(out) if np.ndim(r) == 0 else out

    def slope(self, r):
        h = 1e-6 * np.maximum(1.0, np.asarray(r, dtype=float))
        out = (self.predict(r + h) - self.predict(r - h)) / (2.0 * h)
        return float(out) if np.ndim(r) == 0 else out

    def norm_tail(self, s: float, R: float) -> float:
        """int_R^inf |u_tail|^s r^(N-1) dr (sphere factor excluded)."""
        N = self.N
        if self.kind == "Algebraic":
            if s * (N - 2.0) <= N:
                from .errors import DivergentNormError

                raise DivergentNormError(
                    f"s*(N-2) = {s * (N - 2.0):g} <= N = {N}: "
                    f"the algebraic tail makes the L^{s:g} norm diverge"
                )
            C = abs(self.prefactor) ** s
            lead = C * R ** (N - s * (N - 2.0)) / (s * (N - 2.0) - N)
            gam = (N - 2.0) * self.corr_pm2 - 2.0
            corr = 0.0
            if self.corr != 0.0 and s * (N - 2.0) + gam > N:
                corr = (
                    s
                    * self.corr
                    * abs(self.prefactor) ** (s + self.corr_pm2)
                    * R ** (N - s * (N - 2.0) - gam)
                    / (s * (N - 2.0) + gam - N)
                )
            return lead + corr
        return _exp_tail_quad(lambda r: np.abs(self.predict(r)) ** s, N, R,
                              s * self.rate_or_power)

    def dirichlet_tail(self, R: float) -> float:
        """int_R^inf u_tail'(r)^2 r^(N-1) dr (sphere factor excluded)."""
        N = self.N
        if self.kind == "Algebraic":
            return self.prefactor**2 * (N - 2.0) * R ** -(N - 2.0)
        return _exp_tail_quad(lambda r: self.slope(r) ** 2, N, R,
                              2.0 * self.rate_or_power)


def _exp_tail_quad(g, N: int, R: float, decay: float) -> float:
    """Gauss panels over [R, R + 60/decay] for an exponentially decaying tail."""
    from .emden import _leggauss

    x, w = _leggauss(32)
    width = 60.0 / max(decay, 1e-300)
    edges = R + width * np.linspace(0.0, 1.0, 17) ** 2
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        r = mid + half * x
        total += half * float(np.sum(w * g(r) * r ** (N - 1)))
    return total


@dataclass
class RadialProfile:
    """A converged radial ground state: grid + analytic tail."""

    params: ProblemParams
    amplitude: float
    grid: Trajectory
    tail: TailModel
    bisection_iterations: int = 0
    bracket: tuple[float, float] = (0.0, 0.0)
    r_max_used: float = 0.0

    def value(self, r):
        return _eval_profile(self, r, deriv=False)

    def slope(self, r):
        return _eval_profile(self, r, deriv=True)


def _hermite_eval(rg, ug, vg, r, deriv: bool):
    """Piecewise-cubic Hermite evaluation on the stored (r, u, u') grid."""
    idx = np.clip(np.searchsorted(rg, r) - 1, 0, len(rg) - 2)
    r0, r1 = rg[idx], rg[idx + 1]
    h = r1 - r0
    t = (r - r0) / h
    u0, u1, v0, v1 = ug[idx], ug[idx + 1], vg[idx], vg[idx + 1]
    if not deriv:
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return h00 * u0 + h10 * h * v0 + h01 * u1 + h11 * h * v1
    d00 = 6 * t * (t - 1) / h
    d10 = (1 - t) * (1 - 3 * t)
    d01 = -6 * t * (t - 1) / h
    d11 = t * (3 * t - 2)
    return d00 * u0 + d10 * v0 + d01 * u1 + d11 * v1


def _eval_profile(prof: RadialProfile, r, deriv: bool):
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r_arr)
    rg = prof.grid.radii
    a = prof.amplitude
    fa = prof.params.f(a)
    inner = r_arr < rg[0]
    outer = r_arr > rg[-1]
    mid = ~(inner | outer)
    if inner.any():
        rr = r_arr[inner]
        if deriv:
            out[inner] = -fa * rr / prof.params.N
        else:
            out[inner] = a - fa * rr * rr / (2.0 * prof.params.N)
    if mid.any():
        out[mid] = _hermite_eval(rg, prof.grid.values, prof.grid.slopes,
                                 r_arr[mid], deriv)
    if outer.any():
        fn = prof.tail.slope if deriv else prof.tail.predict
        out[outer] = fn(r_arr[outer])
    return float(out[0]) if np.ndim(r) == 0 else out


def epsilon_star(p: float, q: float) -> float:
    """Largest eps for which F_eps still has a positive zero (double-root condition).

    Eliminating u from F(u) = 0, F'(u) = 0 gives
    u* = [q(p-2) / (p(q-2))]^(1/(q-p)), eps* = u*^(p-2) - u*^(q-2).
    """
    if not q > p > 2.0:
        raise ValueError(f"need q > p > 2, got p={p}, q={q}")
    u = (q * (p - 2.0) / (p * (q - 2.0))) ** (1.0 / (q - p))
    return u ** (p - 2.0) - u ** (q - 2.0)


def _far_field_B(params: ProblemParams, t: Trajectory) -> float:
    """Constant mode in u ~ B + A r^(-(N-2)); B = u + r u'/(N-2)."""
    r, u, v = t.radii[-1], t.values[-1], t.slopes[-1]
    return u + r * v / (params.N - 2.0)


def classify(
    t: Trajectory,
    params: ProblemParams | None = None,
    amplitude: float | None = None,
    convergence_factor: float = 1e-8,
) -> str:
    """Map a terminated trajectory to the shooting dichotomy."""
    ev = t.terminal_event
    if ev is TerminalEvent.ZERO_CROSSING:
        return Classification.OVERSHOOT
    if ev is TerminalEvent.SLOPE_SIGN_FLIP:
        return Classification.UNDERSHOOT
    if ev is TerminalEvent.UNDERFLOW:
        return Classification.CONVERGED
    # ReachedRmax
    ref = amplitude if amplitude is not None else abs(t.values[0])
    if abs(t.values[-1]) < convergence_factor * ref:
        return Classification.CONVERGED
    if params is not None and params.is_algebraic():
        b = _far_field_B(params, t)
        return Classification.UNDERSHOOT if b > 0.0 else Classification.OVERSHOOT
    if params is not None:
        # exponential family that ran out of window: compare the local decay
        # rate against the true one; slower decay means the positive growing
        # mode (undershoot side) is taking over
        k = params.decay_rate
        local = -t.slopes[-1] / t.values[-1]
        return Classification.UNDERSHOOT if local < 0.999 * k else Classification.CONVERGED
    return Classification.CONVERGED


def _f_positive_roots(params: ProblemParams) -> tuple[float, float | None]:
    """(u_F0, u_hi): first positive zero of F and largest root of f (None = scan up)."""
    lin, qc = params.linear_coeff, params.q_coeff
    p, q = params.p, params.q

    if lin == 0.0:
        # P_zero-like: f > 0 on (0, u_hi), F > 0 immediately
        u_hi = qc ** (-1.0 / (q - p)) if qc > 0.0 else None
        return 0.0, u_hi

    if qc == 0.0:
        # R_zero-like: single root of f at lin^(1/(p-2)); F-zero in closed form
        u_f0 = (p * lin / 2.0) ** (1.0 / (p - 2.0))
        return u_f0, None

    def g(u):
        return u ** (p - 2.0) - qc * u ** (q - 2.0) - lin

    u_peak = ((p - 2.0) / (qc * (q - 2.0))) ** (1.0 / (q - p))
    if g(u_peak) <= 0.0:
        raise BracketNotFound(
            f"f has no positive roots for {params.family.value} "
            f"(N={params.N}, p={params.p}, q={params.q}, eps={params.eps}); "
            "no ground state in this regime"
        )
    m1 = brentq(g, u_peak * 1e-14, u_peak, xtol=1e-300, rtol=1e-15)
    hi = u_peak
    while g(hi) > 0.0:
        hi *= 2.0
    m2 = brentq(g, u_peak, hi, xtol=1e-300, rtol=1e-15)
    if params.F(m2) <= 0.0:
        extra = ""
        if params.family is Family.P_EPS:
            extra = f"; eps = {params.eps:g} >= eps* = {epsilon_star(p, q):g}"
        raise BracketNotFound(
            f"potential F has no positive zero below the largest root of f{extra}"
        )
    u_f0 = brentq(params.F, m1, m2, xtol=1e-300, rtol=1e-15)
    return u_f0, m2


def _default_r_max(params: ProblemParams, ctrl: ShootControls,
                   a_probe: float) -> float:
    if ctrl.r_max is not None:
        return ctrl.r_max
    if not params.is_algebraic():
        return 50.0 / params.decay_rate
    # algebraic family: scale radius from a probe trajectory's half-height
    t = integrate(params, a_probe, 1e6, replace(ctrl.step, rtol=1e-6, atol=1e-9))
    below = np.nonzero(t.values < 0.5 * a_probe)[0]
    r_half = t.radii[below[0]] if len(below) else 1.0
    return min(1e6, max(1e3, 1e4 * r_half))


def find_ground_state(params: ProblemParams, ctrl: ShootControls = ShootControls()) -> RadialProfile:
    """Bisect the shooting map to the unique ground-state amplitude.

    Raises BracketNotFound if no (undershoot, overshoot) pair exists in the
    admissible window, which for family P_eps signals eps >= eps*.
    """
    if params.family is Family.P_EPS:
        if params.eps <= 0.0:
            raise BracketNotFound("family P_eps needs eps > 0 (use P_zero for the limit)")
        es = epsilon_star(params.p, params.q)
        if params.eps >= es:
            raise BracketNotFound(
                f"eps = {params.eps:g} >= eps* = {es:g}: no ground state exists"
            )

    if ctrl.amp_search_range is not None:
        lo_seed, hi_seed = ctrl.amp_search_range
        u_f0, u_hi = lo_seed, hi_seed
    else:
        u_f0, u_hi = _f_positive_roots(params)
        lo_seed = u_f0 * (1.0 + 1e-9) if u_f0 > 0.0 else (u_hi or 1.0) * 1e-3
        hi_seed = u_hi * (1.0 - 1e-9) if u_hi is not None else None

    r_max = _default_r_max(params, ctrl, lo_seed if hi_seed is None else
                           math.sqrt(lo_seed * (hi_seed or lo_seed)))

    def run(a: float, quad: bool = False) -> Trajectory:
        tol = replace(ctrl.step, with_quadrature=True) if quad else ctrl.step
        return integrate(params, a, r_max, tol)

    def cls(a: float) -> str:
        return classify(run(a), params, a, ctrl.convergence_factor)

    # establish the bracket, preferring a caller-supplied hint
    lo = hi = None
    if ctrl.bracket_hint is not None:
        h_lo, h_hi = ctrl.bracket_hint
        try:
            if (cls(h_lo) == Classification.UNDERSHOOT
                    and cls(h_hi) == Classification.OVERSHOOT):
                lo, hi = h_lo, h_hi
        except IntegrationFailure:
            pass  # hint outside the admissible window; rebuild from scratch
    if lo is None:
        lo = lo_seed
        for _ in range(60):
            c = cls(lo)
            if c == Classification.UNDERSHOOT:
                break
            lo = math.sqrt(lo * u_f0) if u_f0 > 0.0 else 0.5 * lo
        else:
            raise BracketNotFound(
                f"no undershoot amplitude found near {lo_seed:g} for "
                f"{params.family.value} (N={params.N}, p={params.p}, q={params.q})"
            )
        if hi_seed is None:
            hi = lo
            for _ in range(60):
                hi *= 1.5
                if cls(hi) == Classification.OVERSHOOT:
                    break
            else:
                raise BracketNotFound("upward amplitude scan found no overshoot")
        else:
            hi = hi_seed
            for _ in range(60):
                if cls(hi) == Classification.OVERSHOOT:
                    break
                hi = u_hi - 0.25 * (u_hi - hi)
            else:
                raise BracketNotFound(
                    f"no overshoot amplitude found below {hi_seed:g}; regime "
                    "violation, or eps so close to eps* that the ground-state "
                    "amplitude is degenerate with the largest root of f at "
                    "machine precision"
                )

    iters = 0
    while hi / lo - 1.0 > ctrl.amp_tol and iters < ctrl.max_iter:
        iters += 1
        mid = math.sqrt(lo * hi)
        c = cls(mid)
        if c == Classification.OVERSHOOT:
            hi = mid
        elif c == Classification.UNDERSHOOT:
            lo = mid
        else:
            lo = hi = mid
            break
    if iters >= ctrl.max_iter:
        warnings.warn(
            f"amplitude bisection hit the {ctrl.max_iter}-iteration cap at "
            f"width {hi / lo - 1.0:.3g}",
            RuntimeWarning,
        )

    a_star = math.sqrt(lo * hi)
    final = run(a_star, quad=True)
    width = max(hi / lo - 1.0, 4e-16)

    profile = _package_profile(params, a_star, final, width, r_max)
    profile.bisection_iterations = iters
    profile.bracket = (lo, hi)
    profile.r_max_used = r_max

    if params.family is Family.P_EPS and profile.amplitude > 1.0 + 1e-12:
        raise InternalConsistencyError(
            f"P_eps amplitude {profile.amplitude} exceeds the uniform bound 1"
        )
    return profile


def _package_profile(params: ProblemParams, a: float, traj: Trajectory,
                     width: float, r_max: float) -> RadialProfile:
    """Truncate the converged trajectory to its reliable range and fit the tail."""
    u = traj.values
    if params.is_algebraic():
        keep = len(u)
    else:
        # bisection error delta*a grows like e^(+kr); relative contamination at
        # depth u is ~ width * (a/u)^2, so keep u/a above ~100*sqrt(width)
        level = a * min(1e-3, max(100.0 * math.sqrt(width), 1e-9))
        above = np.nonzero(u >= level)[0]
        keep = int(above[-1]) + 1 if len(above) else len(u)
    # enforce positivity and monotone decrease on the stored grid (exact
    # float ties are tolerated: near-flat starts move by less than an ulp)
    pos = np.nonzero(u[:keep] <= 0.0)[0]
    if len(pos):
        keep = int(pos[0])
    du = np.diff(u[:keep])
    bad = np.nonzero(du > 0.0)[0]
    if len(bad):
        keep = int(bad[0]) + 1
    if keep < 8:
        raise InternalConsistencyError(
            f"converged trajectory has no reliable monotone range (keep={keep})"
        )
    t = traj.truncated(keep)
    tail = _fit_tail(params, t, a)
    return RadialProfile(params=params, amplitude=a, grid=t, tail=tail)


def _fit_tail(params: ProblemParams, t: Trajectory, a: float) -> TailModel:
    N = params.N
    r, u = t.radii, t.values
    if params.is_algebraic():
        mask = r >= r.max() / 30.0
        if mask.sum() < 6:
            mask = r >= r.max() / 100.0
        psi = r[mask] ** -(N - 2.0)
        g = u[mask] ** (params.p - 2.0) * r[mask] ** 2
        kind, rate = "Algebraic", float(N - 2.0)
    else:
        frac = u / a
        mask = (frac >= max(3e-7, 1e-1 * frac[-1])) & (frac <= 1e-3)
        if mask.sum() < 6:
            mask = (frac >= frac[-1]) & (frac <= 1e-2)
        if mask.sum() < 6:
            mask = np.zeros_like(frac, dtype=bool)
            mask[-min(8, len(frac)):] = True
        k = params.decay_rate
        nu = 0.5 * N - 1.0
        rm = r[mask]
        psi = rm ** (1.0 - 0.5 * N) * kve(nu, k * rm) * np.exp(-k * rm)
        g = u[mask] ** (params.p - 2.0) * rm**2 / (1.0 + (k * rm) ** 2)
        kind, rate = "Exponential", float(k)

    y = np.log(u[mask] / psi)
    ones = np.ones_like(y)
    coef, *_ = np.linalg.lstsq(np.column_stack([ones, g]), y, rcond=None)
    log_c, d = float(coef[0]), float(coef[1])
    cb = math.exp(log_c)
    if kind == "Exponential":
        prefactor = cb * math.sqrt(math.pi / (2.0 * rate))
    else:
        prefactor = cb

    model = TailModel(kind=kind, rate_or_power=rate, prefactor=prefactor,
                      match_radius=0.0, N=N, corr=d, corr_pm2=params.p - 2.0)

    rw = r[mask]
    resid = np.abs(model.predict(rw) - u[mask]) / u[mask]
    model.mismatch = float(resid.max())
    if kind == "Algebraic":
        target = rw[-1] / 2.0
    else:
        frac_w = u[mask] / a
        target = rw[np.argmin(np.abs(np.log(frac_w / 2e-4)))]
    model.match_radius = float(rw[np.argmin(np.abs(rw - target))])
    return model

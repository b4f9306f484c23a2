"""Norms, energies, variational levels, and identity residuals.

For a ground state u of -Delta u + lin*u - u^(p-1) + qc*u^(q-1) = 0 two
exact integral identities hold and serve as solver correctness oracles:

    Nehari:     ||grad u||_2^2 = ||u||_p^p - qc ||u||_q^q - lin ||u||_2^2
    Pokhozhaev: ||grad u||_2^2 = p* (||u||_p^p/p - qc ||u||_q^q/q - lin ||u||_2^2/2)

Together they give E(u) = (1/2 - 1/p*) ||grad u||_2^2, so the variational
level is S = (E / (1/2 - 1/p*))^(2/N) and ||grad u||_2^2 = S^(N/2).  The
minimizer frame w(y) = u(sqrt(S) y) then satisfies ||grad w||_2^2 = S and
the constraint p* int F(w) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .emden import EmdenFowlerProfile, _leggauss
from .errors import DivergentNormError, InconsistentSolution
from .params import ProblemParams, sphere_area
from .shooting import RadialProfile, ShootControls, find_ground_state

__all__ = [
    "GroundStateSolution",
    "radial_norm",
    "dirichlet_norm",
    "energy",
    "identity_residuals",
    "extract_level",
    "to_minimizer_frame",
    "kappa_identities",
    "limit_identities",
    "analyze",
    "solve_ground_state",
]


@dataclass
class GroundStateSolution:
    """A converged profile together with its computed functionals."""

    profile: RadialProfile
    norm_L2_sq: float
    norm_Lp_p: float
    norm_Lq_q: float
    dirichlet_sq: float
    energy: float
    level_S: float
    nehari_residual: float
    pokhozhaev_residual: float

    @property
    def params(self) -> ProblemParams:
        return self.profile.params

    @property
    def amplitude(self) -> float:
        return self.profile.amplitude

    def rescaled_to_frame(self, S: float | None = None) -> "GroundStateSolution":
        """Exact minimizer-frame copy (norms transform by powers of S)."""
        S = self.level_S if S is None else S
        w = to_minimizer_frame(self.profile, S)
        fac = S ** (-self.params.N / 2.0)
        grad_fac = S ** (-(self.params.N - 2.0) / 2.0)
        return GroundStateSolution(
            profile=w,
            norm_L2_sq=self.norm_L2_sq * fac,
            norm_Lp_p=self.norm_Lp_p * fac,
            norm_Lq_q=self.norm_Lq_q * fac,
            dirichlet_sq=self.dirichlet_sq * grad_fac,
            energy=self.energy * fac,
            level_S=S,
            nehari_residual=self.nehari_residual,
            pokhozhaev_residual=self.pokhozhaev_residual,
        )


def _grid_quad(prof: RadialProfile, integrand) -> float:
    """Gauss panels on the stored grid using cubic Hermite reconstruction."""
    rg, ug, vg = prof.grid.radii, prof.grid.values, prof.grid.slopes
    N = prof.params.N
    x, w = _leggauss(6)
    x01 = 0.5 * (x + 1.0)
    w01 = 0.5 * w
    h = np.diff(rg)
    # nodes: shape (len(h), 6)
    rr = rg[:-1, None] + h[:, None] * x01[None, :]
    t = x01[None, :]
    u0, u1 = ug[:-1, None], ug[1:, None]
    v0, v1 = vg[:-1, None], vg[1:, None]
    hh = h[:, None]
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    uu = h00 * u0 + h10 * hh * v0 + h01 * u1 + h11 * hh * v1
    d00 = 6 * t * (t - 1) / hh
    d10 = (1 - t) * (1 - 3 * t)
    d01 = -6 * t * (t - 1) / hh
    d11 = t * (3 * t - 2)
    dd = d00 * u0 + d10 * v0 + d01 * u1 + d11 * v1
    vals = integrand(rr, uu, dd) * rr ** (N - 1)
    inner = float(np.sum(vals * w01[None, :] * hh))
    # series piece [0, r0]
    a = prof.amplitude
    fa = prof.params.f(a)
    r0 = rg[0]
    rr0 = r0 * x01
    uu0 = a - fa * rr0**2 / (2.0 * prof.params.N)
    dd0 = -fa * rr0 / prof.params.N
    inner += r0 * float(np.sum(w01 * integrand(rr0, uu0, dd0) * rr0 ** (N - 1)))
    return inner


def radial_norm(profile, s: float) -> float:
    """int |u|^s dx for a RadialProfile or EmdenFowlerProfile."""
    if s < 1.0:
        raise ValueError(f"need s >= 1, got {s}")
    if isinstance(profile, EmdenFowlerProfile):
        return profile.norm_s(s)
    t = profile.grid
    if profile.tail.kind == "Algebraic" and s * (profile.params.N - 2.0) <= profile.params.N:
        raise DivergentNormError(
            f"s*(N-2) = {s * (profile.params.N - 2.0):g} <= N = {profile.params.N}: "
            f"the algebraic tail makes the L^{s:g} norm diverge"
        )
    bulk = _grid_quad(profile, lambda r, u, du: np.abs(u) ** s)
    tail = profile.tail.norm_tail(s, float(t.radii[-1]))
    return sphere_area(profile.params.N) * (bulk + tail)


def dirichlet_norm(profile) -> float:
    """||grad u||_2^2 for a RadialProfile or EmdenFowlerProfile."""
    if isinstance(profile, EmdenFowlerProfile):
        return profile.dirichlet_sq()
    bulk = _grid_quad(profile, lambda r, u, du: du * du)
    tail = profile.tail.dirichlet_tail(float(profile.grid.radii[-1]))
    return sphere_area(profile.params.N) * (bulk + tail)


def _norms_from_trajectory(prof: RadialProfile) -> tuple[float, float, float, float]:
    """(L2^2, Lp^p, Lq^q, dirichlet^2) from co-integrated panels plus tail."""
    t = prof.grid
    omega = sphere_area(prof.params.N)
    R = float(t.radii[-1])
    if t.norm_l2 is None:
        l2 = radial_norm(prof, 2.0) if _l2_finite(prof) else math.inf
        lp = radial_norm(prof, prof.params.p)
        lq = radial_norm(prof, prof.params.q)
        dir_sq = dirichlet_norm(prof)
        return l2, lp, lq, dir_sq
    l2 = math.inf
    if _l2_finite(prof):
        l2 = omega * (float(t.norm_l2[-1]) + prof.tail.norm_tail(2.0, R))
    lp = omega * (float(t.norm_lp[-1]) + prof.tail.norm_tail(prof.params.p, R))
    lq = omega * (float(t.norm_lq[-1]) + prof.tail.norm_tail(prof.params.q, R))
    dir_sq = omega * (float(t.norm_dir[-1]) + prof.tail.dirichlet_tail(R))
    return l2, lp, lq, dir_sq


def _l2_finite(prof: RadialProfile) -> bool:
    return prof.tail.kind == "Exponential" or 2.0 * (prof.params.N - 2.0) > prof.params.N


def energy(params: ProblemParams, l2_sq: float, lp_p: float, lq_q: float,
           dir_sq: float) -> float:
    """E = 1/2 ||grad u||^2 + lin/2 ||u||_2^2 - ||u||_p^p/p + qc ||u||_q^q/q."""
    lin_term = 0.0 if params.linear_coeff == 0.0 else 0.5 * params.linear_coeff * l2_sq
    return 0.5 * dir_sq + lin_term - lp_p / params.p + params.q_coeff * lq_q / params.q


def identity_residuals(sol: "GroundStateSolution") -> tuple[float, float]:
    """Relative Nehari and Pokhozhaev residuals (0 by convention for zero data)."""
    p = sol.params
    lin, qc = p.linear_coeff, p.q_coeff
    lin_l2 = 0.0 if lin == 0.0 else lin * sol.norm_L2_sq
    if sol.dirichlet_sq == 0.0:
        return 0.0, 0.0
    neh_rhs = sol.norm_Lp_p - qc * sol.norm_Lq_q - lin_l2
    pok_rhs = p.p_star() * (sol.norm_Lp_p / p.p - qc * sol.norm_Lq_q / p.q - 0.5 * lin_l2)
    neh = abs(sol.dirichlet_sq - neh_rhs) / max(abs(sol.dirichlet_sq), abs(neh_rhs))
    pok = abs(sol.dirichlet_sq - pok_rhs) / max(abs(sol.dirichlet_sq), abs(pok_rhs))
    return neh, pok


def extract_level(params: ProblemParams, E: float) -> float:
    """S = (E / (1/2 - 1/p*))^(2/N); requires positive energy."""
    coef = 0.5 - 1.0 / params.p_star()
    if E <= 0.0:
        raise InconsistentSolution(f"energy {E} is not positive; cannot extract a level")
    return (E / coef) ** (2.0 / params.N)


def to_minimizer_frame(u: RadialProfile, S: float) -> RadialProfile:
    """w(y) = u(sqrt(S) y) by exact grid/tail reparameterization."""
    if S <= 0.0:
        raise ValueError(f"level must be positive, got {S}")
    if S == 1.0:
        return u
    rt = math.sqrt(S)
    N = u.params.N
    t = u.grid
    scaled = replace(
        t,
        radii=t.radii / rt,
        values=t.values.copy(),
        slopes=t.slopes * rt,
        terminal_radius=t.terminal_radius / rt,
    )
    # cumulative integrals: int g(u) r^(N-1) dr scales by S^(-N/2); the
    # dirichlet integrand gains slope^2 -> S, net S^(-(N-2)/2)
    if t.norm_l2 is not None:
        fac = S ** (-N / 2.0)
        scaled.norm_l2 = t.norm_l2 * fac
        scaled.norm_lp = t.norm_lp * fac
        scaled.norm_lq = t.norm_lq * fac
        scaled.norm_dir = t.norm_dir * (S ** (-(N - 2.0) / 2.0))
    # base_w(y) = base_u(rt*y) exactly, and the correction regressor picks up
    # rt^2 from its r^2 factor, so corr -> corr * S in both tail kinds
    tail = u.tail
    if tail.kind == "Exponential":
        new_tail = replace(
            tail,
            rate_or_power=tail.rate_or_power * rt,
            prefactor=tail.prefactor * rt ** (-(N - 1.0) / 2.0),
            match_radius=tail.match_radius / rt,
            corr=tail.corr * S,
        )
    else:
        new_tail = replace(
            tail,
            prefactor=tail.prefactor * rt ** (-(N - 2.0)),
            match_radius=tail.match_radius / rt,
            corr=tail.corr * S,
        )
    return RadialProfile(
        params=u.params,
        amplitude=u.amplitude,
        grid=scaled,
        tail=new_tail,
        bisection_iterations=u.bisection_iterations,
        bracket=u.bracket,
        r_max_used=u.r_max_used / rt,
    )


def analyze(profile: RadialProfile) -> GroundStateSolution:
    """Assemble the functional report for a converged profile."""
    l2, lp, lq, dir_sq = _norms_from_trajectory(profile)
    E = energy(profile.params, 0.0 if math.isinf(l2) else l2, lp, lq, dir_sq)
    S = extract_level(profile.params, E)
    sol = GroundStateSolution(
        profile=profile,
        norm_L2_sq=l2,
        norm_Lp_p=lp,
        norm_Lq_q=lq,
        dirichlet_sq=dir_sq,
        energy=E,
        level_S=S,
        nehari_residual=0.0,
        pokhozhaev_residual=0.0,
    )
    sol.nehari_residual, sol.pokhozhaev_residual = identity_residuals(sol)
    return sol


def solve_ground_state(params: ProblemParams,
                       ctrl: ShootControls = ShootControls()) -> GroundStateSolution:
    """find_ground_state + functionals in one call."""
    return analyze(find_ground_state(params, ctrl))


def constraint_value(sol: GroundStateSolution) -> float:
    """p* int F(u) dx in the solution's own frame (1 in the minimizer frame)."""
    p = sol.params
    lin_l2 = 0.0 if p.linear_coeff == 0.0 else 0.5 * p.linear_coeff * sol.norm_L2_sq
    return p.p_star() * (sol.norm_Lp_p / p.p - p.q_coeff * sol.norm_Lq_q / p.q - lin_l2)


@dataclass
class KappaReport:
    kappa: float
    lq_lhs: float
    lq_rhs: float
    lp_lhs: float
    lp_rhs: float
    lq_residual: float
    lp_residual: float


def kappa_identities(w: GroundStateSolution, eps: float) -> KappaReport:
    """Critical-case identities ||w||_q^q = kappa*eps*||w||_2^2 and
    ||w||_p^p = 1 + (kappa+1)*eps*||w||_2^2, with kappa = q(p-2)/(2(q-p))."""
    p, q = w.params.p, w.params.q
    kappa = q * (p - 2.0) / (2.0 * (q - p))
    el2 = eps * w.norm_L2_sq
    lq_rhs = kappa * el2
    lp_rhs = 1.0 + (kappa + 1.0) * el2
    lq_res = abs(w.norm_Lq_q - lq_rhs) / max(abs(w.norm_Lq_q), abs(lq_rhs))
    lp_res = abs(w.norm_Lp_p - lp_rhs) / max(abs(w.norm_Lp_p), abs(lp_rhs))
    return KappaReport(kappa, w.norm_Lq_q, lq_rhs, w.norm_Lp_p, lp_rhs, lq_res, lp_res)


@dataclass
class LimitReport:
    names: tuple[str, str]
    computed: tuple[float, float]
    closed_form: tuple[float, float]
    residuals: tuple[float, float]


def limit_identities(w0: GroundStateSolution) -> LimitReport:
    """Closed-form norms of the eps = 0 minimizers.

    Supercritical (P_zero): ||w0||_p^p = (q-p*)p/((q-p)p*) and
    ||w0||_q^q = (p-p*)q/((q-p)p*).  Subcritical (R_zero):
    ||w0||_2^2 = 2(p*-p)/(p*(p-2)) and ||w0||_p^p = (p*-2)p/((p-2)p*).
    """
    prm = w0.params
    p, q, ps = prm.p, prm.q, prm.p_star()
    if prm.family.value == "P_zero":
        cf_a = (q - ps) * p / ((q - p) * ps)
        cf_b = (p - ps) * q / ((q - p) * ps)
        got = (w0.norm_Lp_p, w0.norm_Lq_q)
        names = ("||w0||_p^p", "||w0||_q^q")
        cf = (cf_a, cf_b)
    else:
        cf_a = 2.0 * (ps - p) / (ps * (p - 2.0))
        cf_b = (ps - 2.0) * p / ((p - 2.0) * ps)
        got = (w0.norm_L2_sq, w0.norm_Lp_p)
        names = ("||w0||_2^2", "||w0||_p^p")
        cf = (cf_a, cf_b)
    res = tuple(abs(g - c) / abs(c) for g, c in zip(got, cf))
    return LimitReport(names, got, cf, res)

"""Closed-form Aubin-Talenti / Emden-Fowler profiles and Sobolev constants.

The critical equation -Delta U = U^(p*-1) has the explicit radial ground
states

    U_1(r)      = (1 + r^2/(N(N-2)))^(-(N-2)/2),
    U_lam(r)    = lam^(-(N-2)/2) U_1(r/lam),
    W_lam(r)    = U_lam(sqrt(S*) r),

with ||W_lam||_{p*} = 1 and ||grad W_lam||_2^2 = S* for every lam.  These
profiles are the analytic oracle for the critical regime: everything here
is evaluated in closed form, with norms computed by a tan-substitution
Gauss quadrature that resolves the algebraic tail exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DivergentNormError, InternalConsistencyError
from .params import sphere_area

__all__ = [
    "eval_U",
    "eval_U_slope",
    "sobolev_constant",
    "q_star",
    "q0_of_lambda",
    "EmdenFowlerProfile",
]


def eval_U(N: int, lam: float, r) -> float:
    """U_lam(r), exact."""
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    c2 = N * (N - 2.0)
    x = np.asarray(r, dtype=float) / lam
    out = lam ** (-(N - 2.0) / 2.0) * (1.0 + x * x / c2) ** (-(N - 2.0) / 2.0)
    return float(out) if np.isscalar(r) or np.ndim(r) == 0 else out


def eval_U_slope(N: int, lam: float, r) -> float:
    """d/dr U_lam(r), exact."""
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    c2 = N * (N - 2.0)
    x = np.asarray(r, dtype=float) / lam
    out = (
        lam ** (-N / 2.0)
        * (-(N - 2.0) * x / c2)
        * (1.0 + x * x / c2) ** (-N / 2.0)
    )
    return float(out) if np.isscalar(r) or np.ndim(r) == 0 else out


@lru_cache(maxsize=32)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def radial_quad(g, N: int, r_lo: float = 0.0, r_hi: float = math.inf,
                scale: float = 1.0, panels: int = 12, nodes: int = 48) -> float:
    """int_{r_lo}^{r_hi} g(r) r^(N-1) dr via r = scale*tan(theta) panels.

    The substitution maps [0, inf) to [0, pi/2) and turns algebraic tails
    into smooth integrands; `g` must accept numpy arrays.
    """
    th_lo = math.atan2(r_lo, scale)
    th_hi = math.pi / 2.0 if math.isinf(r_hi) else math.atan2(r_hi, scale)
    if th_hi <= th_lo:
        return 0.0
    x, w = _leggauss(nodes)
    edges = np.linspace(th_lo, th_hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        th = mid + half * x
        r = scale * np.tan(th)
        jac = scale / np.cos(th) ** 2
        total += half * float(np.sum(w * g(r) * r ** (N - 1) * jac))
    return total


@lru_cache(maxsize=32)
def sobolev_constant(N: int) -> float:
    """Best Sobolev constant S* from the Dirichlet norm of U_1.

    Cross-checked against the independent ||U_1||_{p*}^{p*} route; both
    equal S*^(N/2).
    """
    if N < 3:
        raise ValueError(f"need N >= 3, got {N}")
    p_star = 2.0 * N / (N - 2.0)
    c = math.sqrt(N * (N - 2.0))
    omega = sphere_area(N)
    dir_sq = omega * radial_quad(lambda r: eval_U_slope(N, 1.0, r) ** 2, N, scale=c)
    lp = omega * radial_quad(lambda r: eval_U(N, 1.0, r) ** p_star, N, scale=c)
    s_dir = dir_sq ** (2.0 / N)
    s_lp = lp ** (2.0 / N)
    if abs(s_dir - s_lp) > 1e-6 * s_dir:
        raise InternalConsistencyError(
            f"S* routes disagree for N={N}: dirichlet {s_dir!r} vs L^p* {s_lp!r}"
        )
    return s_dir


@lru_cache(maxsize=32)
def q_star(N: int) -> float:
    """Q* = unit-ball p*-mass of W_1, strictly inside (0, 1)."""
    q = q0_of_lambda(N, 1.0)
    if not 0.0 < q < 1.0:
        raise InternalConsistencyError(f"Q*({N}) = {q} outside (0, 1)")
    return q


def q0_of_lambda(N: int, lam: float) -> float:
    """Q0(lam) = int_{B_1} |W_lam|^{p*} dx; strictly decreasing in lam."""
    p_star = 2.0 * N / (N - 2.0)
    s_ast = sobolev_constant(N)
    rt = math.sqrt(s_ast)
    c = math.sqrt(N * (N - 2.0)) * lam
    # W_lam(r)^{p*} integrated over the unit ball = S*^{-N/2} * U_lam mass in B_rt
    mass = radial_quad(lambda r: eval_U(N, lam, r) ** p_star, N, r_hi=rt, scale=c)
    return sphere_area(N) * mass * s_ast ** (-N / 2.0)


@dataclass(frozen=True)
class EmdenFowlerProfile:
    """Closed-form profile U_lam (frame='U') or W_lam = U_lam(sqrt(S*) .) (frame='W')."""

    N: int
    lam: float = 1.0
    frame: str = "W"

    def __post_init__(self):
        if self.frame not in ("U", "W"):
            raise ValueError(f"frame must be 'U' or 'W', got {self.frame!r}")
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @property
    def p_star(self) -> float:
        return 2.0 * self.N / (self.N - 2.0)

    def _stretch(self) -> float:
        return math.sqrt(sobolev_constant(self.N)) if self.frame == "W" else 1.0

    def value(self, r):
        return eval_U(self.N, self.lam, np.asarray(r, dtype=float) * self._stretch())

    def slope(self, r):
        k = self._stretch()
        return k * eval_U_slope(self.N, self.lam, np.asarray(r, dtype=float) * k)

    def amplitude(self) -> float:
        return float(self.value(0.0))

    def norm_s(self, s: float, r_hi: float = math.inf) -> float:
        """int |profile|^s dx (over B_{r_hi} if finite); diverges unless s(N-2) > N."""
        if math.isinf(r_hi) and s * (self.N - 2.0) <= self.N:
            raise DivergentNormError(
                f"s*(N-2) = {s * (self.N - 2.0):g} <= N = {self.N}: "
                f"the algebraic tail makes the L^{s:g} norm diverge"
            )
        k = self._stretch()
        c = math.sqrt(self.N * (self.N - 2.0)) * self.lam / k
        mass = radial_quad(lambda r: np.abs(self.value(r)) ** s, self.N,
                           r_hi=r_hi, scale=c)
        return sphere_area(self.N) * mass

    def dirichlet_sq(self) -> float:
        """||grad profile||_2^2; equals S*^{N/2} in U frame, S* in W frame."""
        k = self._stretch()
        c = math.sqrt(self.N * (self.N - 2.0)) * self.lam / k
        mass = radial_quad(lambda r: self.slope(r) ** 2, self.N, scale=c)
        return sphere_area(self.N) * mass

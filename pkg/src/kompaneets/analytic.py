"""Closed-form objects of the Kompaneets equation in number-density form.

The equation is ``n_t = d/dx J(x, n)`` with the leftward photon flux

    J(x, n) = x**2 n_x + (x**2 - 2x) n + n**2 .

This module evaluates its stationary Bose-Einstein profiles, the stationary
super-solutions, the quantum entropy and its dissipation, the photon-loss
onset bounds, and the quadratures the diagnostics are built on. Every
function accepts scalars or arrays unless its signature says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndexOutOfRange,
    LengthMismatch,
    NegativeDensity,
    NegativeEnergy,
    NonpositiveTime,
    SlopeNotSupercritical,
    TargetNonpositive,
    TargetTooLarge,
)
from .grid import Mesh

#: Cells with density below this floor contribute nothing to the dissipation.
DISSIPATION_FLOOR = 1e-30

_ZETA3_TERMS = 2000
# zeta(-k) for k = 0..7, used by the small-mu expansion of Li_3(exp(-mu))
_ZETA_NEG = (-0.5, -1.0 / 12.0, 0.0, 1.0 / 120.0, 0.0, -1.0 / 252.0, 0.0, 1.0 / 240.0)


@dataclass(frozen=True)
class EquilibriumParam:
    mu: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass(frozen=True)
class SuperSolutionParam:
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class EntropyReport:
    H: float
    D: float


def _mu(mu) -> float:
    return float(mu.mu) if isinstance(mu, EquilibriumParam) else float(EquilibriumParam(mu).mu)


def _gamma(gamma) -> float:
    if isinstance(gamma, SuperSolutionParam):
        return float(gamma.gamma)
    return float(SuperSolutionParam(gamma).gamma)


def _energies(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise NegativeEnergy("photon energy must be nonnegative")
    return x


def _densities(mesh: Mesh, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != mesh.nodes.shape:
        raise LengthMismatch(f"expected {mesh.nodes.size} values, got {n.shape}")
    return n


def _check_nonneg(n):
    if np.any(n < 0):
        raise NegativeDensity("density must be nonnegative")


def _scalar_or_array(out, like):
    return float(out[0]) if np.ndim(like) == 0 else out


def _x_over_one_minus_exp(y):
    """``y / (1 - exp(-y))`` with the removable singularity at 0 filled in."""
    out = np.ones_like(y)
    nz = y != 0
    out[nz] = y[nz] / -np.expm1(-y[nz])
    return out


def be_density(mu, x):
    """Bose-Einstein profile ``x**2 / (exp(x + mu) - 1)``.

    Evaluated as ``x**2 exp(-(x+mu)) / (1 - exp(-(x+mu)))`` so that neither
    tiny ``x`` (cancellation) nor huge ``x`` (overflow) is a problem. The
    value at ``x = 0`` is 0 for every ``mu >= 0``.
    """
    m = _mu(mu)
    xa = np.atleast_1d(_energies(x))
    y = xa + m
    out = np.zeros_like(xa)
    pos = y > 0
    out[pos] = xa[pos] ** 2 * np.exp(-y[pos]) / -np.expm1(-y[pos])
    return _scalar_or_array(out, x)


def be_occupation(mu, x):
    """Occupation number ``1 / (exp(x + mu) - 1)``; infinite at x = mu = 0."""
    m = _mu(mu)
    xa = np.atleast_1d(_energies(x))
    with np.errstate(divide="ignore"):
        out = 1.0 / np.expm1(xa + m)
    return _scalar_or_array(out, x)


def occupation_to_density(x, f):
    """Number density ``n = x**2 f`` from the occupation number ``f``."""
    return np.asarray(x, dtype=float) ** 2 * np.asarray(f, dtype=float)


def density_to_occupation(x, n):
    """Occupation ``f = n / x**2``; NaN at x = 0 where it is undefined."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, n / np.where(x > 0, x * x, 1.0), np.nan)


def zeta3() -> float:
    """Apery's constant by partial sums plus an Euler-Maclaurin tail.

    The tail of ``sum 1/k**3`` past ``K`` is ``1/(2K^2) - 1/(2K^3) + 1/(4K^4)``
    up to ``O(K**-6)``; with ``K = 2000`` the truncation is far below 1e-15.
    """
    K = _ZETA3_TERMS
    head = math.fsum(1.0 / k**3 for k in range(K, 0, -1))
    tail = 1.0 / (2 * K**2) - 1.0 / (2 * K**3) + 1.0 / (4 * K**4)
    return head + tail


def zeta3_tail_bound(K: int) -> float:
    """Upper bound ``1/(2K^2)`` on ``sum_{k>K} 1/k**3`` (integral comparison)."""
    return 1.0 / (2.0 * K * K)


def planck_photon_number() -> float:
    """``2 zeta(3)``, the photon number of the Planck profile."""
    return 2.0 * zeta3()


def equilibrium_photon_number(mu) -> float:
    """``N(n_mu) = 2 Li_3(exp(-mu))``, the exact photon number on [0, inf)."""
    m = _mu(mu)
    if m == 0.0:
        return planck_photon_number()
    if m < 0.1:
        # Li_3(e^w) = z(3) + z(2) w + (3/2 - ln(-w)) w^2/2 + sum_{k>=3} z(3-k) w^k/k!
        w = -m
        s = zeta3() + (math.pi**2 / 6.0) * w + (1.5 - math.log(m)) * w * w / 2.0
        for k in range(3, 3 + len(_ZETA_NEG)):
            s += _ZETA_NEG[k - 3] * w**k / math.factorial(k)
        return 2.0 * s
    q = math.exp(-m)
    terms = []
    k = 1
    qk = q
    while True:
        t = qk / k**3
        terms.append(t)
        if t < 1e-18 * terms[0]:
            break
        k += 1
        qk *= q
    return 2.0 * math.fsum(reversed(terms))


def photon_number(mesh: Mesh, n) -> float:
    """Total photon number by the trapezoid rule on ``mesh``."""
    n = _densities(mesh, n)
    return float(np.trapezoid(n, mesh.nodes))


def solve_mu_for_number(N_target: float, tol: float = 1e-12) -> EquilibriumParam:
    """The unique ``mu >= 0`` with ``N(n_mu) = N_target``.

    Bisection on the strictly decreasing map ``mu -> N(n_mu)``.
    """
    N_max = planck_photon_number()
    if not N_target > 0:
        raise TargetNonpositive(f"target photon number must be positive, got {N_target}")
    if N_target > N_max + 1e-12:
        raise TargetTooLarge(f"target {N_target} exceeds 2*zeta(3) = {N_max}")
    if N_target >= N_max:
        return EquilibriumParam(0.0)

    lo, hi = 0.0, 1.0
    while equilibrium_photon_number(hi) > N_target:
        lo, hi = hi, 2.0 * hi
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        N_mid = equilibrium_photon_number(mid)
        if abs(N_mid - N_target) < tol or hi - lo < 1e-15 * hi:
            return EquilibriumParam(mid)
        if N_mid > N_target:
            lo = mid
        else:
            hi = mid
    return EquilibriumParam(0.5 * (lo + hi))


def solve_mu_on_mesh(mesh: Mesh, N_target: float) -> EquilibriumParam:
    """Like :func:`solve_mu_for_number`, matching the trapezoid photon number.

    Finds ``mu`` with ``photon_number(mesh, n_mu) = N_target``, so that a
    sampled equilibrium is recovered without quadrature bias. Targets at or
    above the discrete Planck number give ``mu = 0``.
    """
    x = mesh.nodes

    def N(mu):
        return float(np.trapezoid(be_density(mu, x), x))

    if not N_target > 0:
        raise TargetNonpositive(f"target photon number must be positive, got {N_target}")
    if N_target >= N(0.0):
        return EquilibriumParam(0.0)
    lo, hi = 0.0, max(2.0 * solve_mu_for_number(min(N_target, planck_photon_number())).mu, 1.0)
    while N(hi) > N_target:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if N(mid) > N_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    return EquilibriumParam(0.5 * (lo + hi))


def super_weight(x):
    """``m(x) = x**2 e**x / (e**x - 1)**2``, normalized so that m(0) = 1."""
    xa = np.atleast_1d(_energies(x))
    out = _x_over_one_minus_exp(xa) ** 2 * np.exp(-xa)
    return _scalar_or_array(out, x)


def super_solution(gamma, x):
    """Stationary super-solution ``S_gamma = n_0 + gamma * m``."""
    g = _gamma(gamma)
    return be_density(0.0, x) + g * super_weight(x)


def riccati_onset_bound(slope0: float) -> float:
    """Upper bound ``1/2 ln(s / (s - 1))`` on the onset time when ``s > 1``."""
    s = float(slope0)
    if not s > 1.0:
        raise SlopeNotSupercritical(f"initial slope {s} must exceed 1")
    return -0.5 * math.log1p(-1.0 / s)


def oleinik_envelope(x, t: float, sup_n: float):
    """Lower bound on ``n_x``: ``-1/(2t) - 5x/2 - alpha/2``.

    ``alpha = sqrt(6 sup_n + 1) - 1`` is the smallest admissible value.
    """
    if not t > 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    if sup_n < 0:
        raise NegativeDensity("sup_n must be nonnegative")
    alpha = math.sqrt(6.0 * sup_n + 1.0) - 1.0
    x = _energies(x)
    out = -0.5 / t - 2.5 * x - 0.5 * alpha
    return float(out) if np.ndim(out) == 0 else out


def entropy_density(x, n):
    """Integrand ``x n + Phi(x, n)`` of the quantum entropy.

    ``Phi = -n log1p(x^2/n) - x^2 log1p(n/x^2)`` extended by continuity:
    ``Phi(x, 0) = 0`` and ``Phi(0, n) = 0``.
    """
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    x2 = x * x
    phi = np.zeros(np.broadcast(x, n).shape)
    both = (n > 0) & (x2 > 0)
    nb, xb = np.broadcast_to(n, phi.shape)[both], np.broadcast_to(x2, phi.shape)[both]
    phi[both] = -nb * np.log1p(xb / nb) - xb * np.log1p(nb / xb)
    return x * n + phi


def entropy(mesh: Mesh, n) -> float:
    """Quantum entropy ``H(n)`` by trapezoid quadrature."""
    n = _densities(mesh, n)
    _check_nonneg(n)
    return float(np.trapezoid(entropy_density(mesh.nodes, n), mesh.nodes))


def entropy_potential(x, n):
    """``h(x, n) = x + ln n - ln(n + x**2)``; ``-inf`` where n = 0."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return x + np.log(n) - np.log(n + x * x)


def dissipation(mesh: Mesh, n) -> float:
    """Entropy dissipation ``D(n) = int n (n + x^2) (h_x)^2 dx``.

    Midpoint rule per cell: ``h_x`` is the cell difference of ``h`` and the
    weight ``n (n + x^2)`` is averaged over the two cell ends. A cell with
    either endpoint below ``DISSIPATION_FLOOR`` contributes 0.
    """
    n = _densities(mesh, n)
    _check_nonneg(n)
    x, dx = mesh.nodes, mesh.spacings
    live = n >= DISSIPATION_FLOOR
    h = np.where(live, entropy_potential(x, np.where(live, n, 1.0)), 0.0)
    cell = live[:-1] & live[1:]
    w = n * (n + x * x)
    dh = (h[1:] - h[:-1]) / dx
    contrib = np.where(cell, 0.5 * (w[:-1] + w[1:]) * dh * dh * dx, 0.0)
    return float(np.sum(contrib))


def entropy_report(mesh: Mesh, n) -> EntropyReport:
    return EntropyReport(H=entropy(mesh, n), D=dissipation(mesh, n))


def _centered_derivative(x, n, i):
    # second-order three-point derivative on a non-uniform stencil
    hm = x[i] - x[i - 1]
    hp = x[i + 1] - x[i]
    return (hm * hm * n[i + 1] - hp * hp * n[i - 1] + (hp * hp - hm * hm) * n[i]) / (
        hm * hp * (hm + hp)
    )


def flux(mesh: Mesh, n, i: int) -> float:
    """Photon flux ``J`` at interior node ``i`` with a centered ``n_x``."""
    n = _densities(mesh, n)
    if not (1 <= i <= mesh.M - 1):
        raise IndexOutOfRange(f"interior index must lie in 1..{mesh.M - 1}, got {i}")
    x = mesh.nodes
    xi, ni = x[i], n[i]
    return float(xi * xi * _centered_derivative(x, n, i) + (xi * xi - 2 * xi) * ni + ni * ni)


def flux_interior(mesh: Mesh, n) -> np.ndarray:
    """``flux`` at every interior node, vectorized."""
    n = _densities(mesh, n)
    x = mesh.nodes
    i = np.arange(1, mesh.M)
    xi, ni = x[i], n[i]
    return xi * xi * _centered_derivative(x, n, i) + (xi * xi - 2 * xi) * ni + ni * ni


def mass_floor(mesh: Mesh, n0) -> float:
    """``int min(n0, n_Planck) dx``, a lower bound on the limiting photon number."""
    n0 = _densities(mesh, n0)
    _check_nonneg(n0)
    return float(np.trapezoid(np.minimum(n0, be_density(0.0, mesh.nodes)), mesh.nodes))


def rate_constant(mesh: Mesh, gamma) -> float:
    """``C(gamma) = int S_gamma (S_gamma + x^2) dx`` on the mesh."""
    S = super_solution(gamma, mesh.nodes)
    return float(np.trapezoid(S * (S + mesh.nodes**2), mesh.nodes))

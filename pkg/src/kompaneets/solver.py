"""Semi-implicit upwind finite differences for the Kompaneets equation.

The linear part of the flux, ``J_lin = x^2 n_x + (x^2 - 2x) n``, is taken
implicitly with left differences inside and a forward difference outside.
The quadratic part ``n^2`` is either explicit (``n_k^2``) or linearized as
the product ``n_{k+1} n_k``. At ``x = 0`` the row is

    (n'(0) - n(0)) / dt = -2 n'(0) + (n^2(x_1) - n^2(0)) / x_1 ,

which assumes ``x^2 n_xx -> 0`` and ``x n_x -> 0`` at the origin. This is an
inherited modeling assumption, not something proven for the PDE. At
``x = R`` the density is pinned to 0.
"""
from __future__ import annotations

import csv
import enum
import functools
import io
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from . import analytic
from .errors import (
    BadParams,
    LengthMismatch,
    NonFiniteState,
    SolveFailure,
    StepError,
    ZeroPivot,
)
from .grid import Mesh
from .record import RunRecord

NEGATIVITY_TOL = 1e-10


class Nonlinearity(str, enum.Enum):
    EXPLICIT = "ExplicitQuadratic"
    SEMI_IMPLICIT = "SemiImplicitProduct"


@dataclass(frozen=True, eq=False)
class Profile:
    mesh: Mesh
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.mesh.nodes.shape:
            raise LengthMismatch(f"expected {self.mesh.nodes.size} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteState("profile contains NaN or Inf")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values, time) -> "Profile":
        return Profile(self.mesh, values, time)

    def negativity(self) -> float:
        """Size of the most negative value relative to the tolerance, or 0."""
        v = self.values
        scale = max(float(np.max(np.abs(v))), 1e-300)
        lo = float(v.min())
        return -lo if lo < -NEGATIVITY_TOL * scale else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "n"])
        for xi, ni in zip(self.mesh.nodes, self.values):
            w.writerow([f"{xi:.17g}", f"{ni:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, mesh: Optional[Mesh] = None, time: float = 0.0) -> "Profile":
        rows = list(csv.DictReader(io.StringIO(text)))
        x = np.array([float(r["x"]) for r in rows])
        n = np.array([float(r["n"]) for r in rows])
        if mesh is None:
            mesh = Mesh(x)
        elif x.shape != mesh.nodes.shape or not np.allclose(x, mesh.nodes, rtol=1e-15, atol=0):
            raise LengthMismatch("CSV nodes do not match the mesh")
        return cls(mesh, n, time)


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    nonlinearity: Nonlinearity = Nonlinearity.EXPLICIT
    t_end: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise BadParams(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise BadParams(f"t_end must be >= 0, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise BadParams(f"record_every must be a positive integer, got {self.record_every}")
        object.__setattr__(self, "nonlinearity", Nonlinearity(self.nonlinearity))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))


def default_dt(mesh: Mesh) -> float:
    """Time step equal to the first spacing ``x_1 - x_0``."""
    return float(mesh.spacings[0])


@dataclass
class TridiagonalSystem:
    """``sub[i] u[i-1] + diag[i] u[i] + sup[i] u[i+1] = rhs[i]``.

    All four arrays have length ``M + 1``; ``sub[0]`` and ``sup[-1]`` are unused.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def matvec(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def is_diagonally_dominant(self) -> bool:
        off = np.abs(self.sub) + np.abs(self.sup)
        off[0] = abs(self.sup[0])
        off[-1] = abs(self.sub[-1])
        return bool(np.all(np.abs(self.diag) >= off))


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Solve a tridiagonal system through LAPACK's banded solver."""
    n = system.diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = system.sup[:-1]
    ab[1] = system.diag
    ab[2, :-1] = system.sub[1:]
    try:
        return solve_banded((1, 1), ab, system.rhs, check_finite=False)
    except LinAlgError as exc:
        raise ZeroPivot(str(exc)) from exc


def thomas(system: TridiagonalSystem) -> np.ndarray:
    """Forward elimination and back substitution without pivoting.

    Slow reference implementation, kept as an independent check on
    :func:`solve_tridiagonal`.
    """
    a, b, c, d = (np.asarray(v, dtype=float) for v in
                  (system.sub, system.diag, system.sup, system.rhs))
    n = b.size
    cp = np.empty(n)
    dp = np.empty(n)
    if b[0] == 0:
        raise ZeroPivot("zero pivot in row 0")
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if piv == 0:
            raise ZeroPivot(f"zero pivot in row {i}")
        cp[i] = c[i] / piv if i < n - 1 else 0.0
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv
    u = np.empty(n)
    u[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        u[i] = dp[i] - cp[i] * u[i + 1]
    return u


@functools.lru_cache(maxsize=16)
def assemble_linear_operator(mesh: Mesh):
    """Bands of ``L`` with ``(L n)_i = (J_lin(x_{i+1}) - J_lin(x_i)) / dx_i``.

    ``J_lin(x_j) = x_j^2 (n_j - n_{j-1}) / dx_{j-1} + (x_j^2 - 2 x_j) n_j`` is
    the left-difference flux. Rows 0 and M are left zero; the boundary rows
    are set by the steppers.

    Returns
    -------
    (sub, diag, sup) : tuple of ndarray, each of length M+1, read-only.
    """
    x, dx = mesh.nodes, mesh.spacings
    M = mesh.M
    a = np.zeros(M + 1)
    a[1:] = x[1:] ** 2 / dx  # diffusion coefficient of J_lin at x_j
    b = x * x - 2 * x  # drift coefficient
    sub = np.zeros(M + 1)
    diag = np.zeros(M + 1)
    sup = np.zeros(M + 1)
    i = np.arange(1, M)
    sub[i] = a[i] / dx[i]
    diag[i] = -(a[i + 1] + a[i] + b[i]) / dx[i]
    sup[i] = (a[i + 1] + b[i + 1]) / dx[i]
    for arr in (sub, diag, sup):
        arr.flags.writeable = False
    return sub, diag, sup


def apply_linear_operator(mesh: Mesh, n) -> np.ndarray:
    sub, diag, sup = assemble_linear_operator(mesh)
    n = np.asarray(n, dtype=float)
    out = diag * n
    out[1:] += sub[1:] * n[:-1]
    out[:-1] += sup[:-1] * n[1:]
    return out


def forward_difference(mesh: Mesh, f) -> np.ndarray:
    """``(f_{i+1} - f_i) / dx_i`` at nodes 0..M-1, padded with 0 at M."""
    out = np.zeros(mesh.M + 1)
    out[:-1] = np.diff(f) / mesh.spacings
    return out


def _check_dominance(system: TridiagonalSystem):
    if not system.is_diagonally_dominant():
        warnings.warn("tridiagonal system is not diagonally dominant", RuntimeWarning,
                      stacklevel=3)


def build_system(profile: Profile, cfg: SchemeConfig) -> TridiagonalSystem:
    """Assemble ``(I/dt - L) n' = rhs`` for one step of the configured scheme."""
    mesh = profile.mesh
    dx = mesh.spacings
    x1 = mesh.nodes[1] - mesh.nodes[0]
    n = profile.values
    dt = cfg.dt
    L_sub, L_diag, L_sup = assemble_linear_operator(mesh)

    sub = -np.array(L_sub)
    diag = 1.0 / dt - L_diag
    sup = -np.array(L_sup)
    rhs = n / dt

    if cfg.nonlinearity is Nonlinearity.EXPLICIT:
        sq = n * n
        rhs[1:-1] += (sq[2:] - sq[1:-1]) / dx[1:]
        diag[0] = 1.0 / dt + 2.0
        sup[0] = 0.0
        rhs[0] = n[0] / dt + (sq[1] - sq[0]) / x1
    else:
        diag[1:-1] += n[1:-1] / dx[1:]
        sup[1:-1] -= n[2:] / dx[1:]
        diag[0] = 1.0 / dt + 2.0 + n[0] / x1
        sup[0] = -n[1] / x1
        rhs[0] = n[0] / dt

    sub[-1] = 0.0
    diag[-1] = 1.0
    rhs[-1] = 0.0
    return TridiagonalSystem(sub, diag, sup, rhs)


def _advance(profile: Profile, cfg: SchemeConfig) -> Profile:
    system = build_system(profile, cfg)
    _check_dominance(system)
    try:
        new = solve_tridiagonal(system)
    except ZeroPivot as exc:
        raise SolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(f"non-finite values at t={profile.time + cfg.dt:.6g}; reduce dt")
    new[-1] = 0.0
    return Profile(profile.mesh, new, profile.time + cfg.dt)


def step_explicit(profile: Profile, cfg: SchemeConfig) -> Profile:
    """One step with the quadratic flux taken explicitly."""
    return _advance(profile, replace(cfg, nonlinearity=Nonlinearity.EXPLICIT))


def step_semi_implicit(profile: Profile, cfg: SchemeConfig) -> Profile:
    """One step with the quadratic flux linearized as ``n_{k+1} n_k``."""
    return _advance(profile, replace(cfg, nonlinearity=Nonlinearity.SEMI_IMPLICIT))


def stepper_for(cfg: SchemeConfig) -> Callable[[Profile, SchemeConfig], Profile]:
    if cfg.nonlinearity is Nonlinearity.EXPLICIT:
        return step_explicit
    return step_semi_implicit


Hook = Callable[[RunRecord, Profile, int], None]


def run(
    initial: Profile,
    cfg: SchemeConfig,
    hooks: Iterable[Hook] = (),
    *,
    entropy: bool = False,
    energy: bool = False,
    stepper: Optional[Callable[[Profile, SchemeConfig], Profile]] = None,
) -> RunRecord:
    """Step ``initial`` up to ``cfg.t_end`` and collect a :class:`RunRecord`.

    The record is filled at step 0, every ``cfg.record_every`` steps and at
    the final step; each hook is then called as ``hook(record, profile, k)``.
    Stepper failures are re-raised as :class:`StepError` carrying the step
    index and time.
    """
    step = stepper or stepper_for(cfg)
    hooks = list(hooks)
    mesh = initial.mesh
    x = mesh.nodes
    rec = RunRecord(mesh=mesh, dt=cfg.dt, record_every=cfg.record_every,
                    nonlinearity=cfg.nonlinearity.value)
    if entropy:
        rec.entropies, rec.dissipations = [], []
    if energy:
        rec.energy, rec.energy_source = [], []

    loss = 0.0
    source = 0.0

    def xn2(v):
        return float(np.trapezoid(x * v * v, x))

    def capture(p: Profile, k: int):
        v = p.values
        rec.times.append(p.time)
        rec.steps.append(k)
        rec.photon_numbers.append(analytic.photon_number(mesh, v))
        rec.boundary_values.append(float(v[0]))
        rec.loss_integral.append(loss)
        if entropy:
            vp = np.maximum(v, 0.0)
            rec.entropies.append(analytic.entropy(mesh, vp))
            rec.dissipations.append(analytic.dissipation(mesh, vp))
        if energy:
            rec.energy.append(float(np.trapezoid(v * v, x)))
            rec.energy_source.append(source)
        rec.snapshots.append(np.array(v))
        for hook in hooks:
            hook(rec, p, k)

    profile = initial
    capture(profile, 0)
    n_steps = cfg.n_steps
    flagged_negative = False
    for k in range(1, n_steps + 1):
        try:
            new = step(profile, cfg)
        except Exception as exc:
            raise StepError(k, profile.time + cfg.dt, exc) from exc
        new = Profile(mesh, new.values, initial.time + k * cfg.dt)
        b0, b1 = float(profile.values[0]), float(new.values[0])
        loss += 0.5 * cfg.dt * (b0 * b0 + b1 * b1)
        if energy:
            source += 0.5 * cfg.dt * (xn2(profile.values) + xn2(new.values))
        neg = new.negativity()
        if neg and not flagged_negative:
            rec.events.append({"kind": "negativity", "step": k, "time": new.time,
                               "min_value": float(new.values.min())})
        flagged_negative = bool(neg)
        profile = new
        if k % cfg.record_every == 0 or k == n_steps:
            capture(profile, k)
    return rec


class Family(str, enum.Enum):
    PLANCK_MULTIPLE = "planck_multiple"
    BOSE_EINSTEIN = "bose_einstein"
    TRUNCATED_LINEAR = "truncated_linear"
    BUMP = "bump"
    SUPER_SOLUTION = "super_solution"
    CUSTOM = "custom"


def _require(cond, msg):
    if not cond:
        raise BadParams(msg)


def sample_family(mesh: Mesh, family, **params) -> np.ndarray:
    """Nodal values of one initial-data family (before clamping)."""
    x = mesh.nodes
    fam = Family(family)
    try:
        if fam is Family.PLANCK_MULTIPLE:
            c = float(params["c"])
            _require(c >= 0, "planck_multiple needs c >= 0")
            return c * analytic.be_density(0.0, x)
        if fam is Family.BOSE_EINSTEIN:
            mu, c = float(params["mu"]), float(params.get("c", 1.0))
            _require(mu >= 0 and c >= 0, "bose_einstein needs mu >= 0 and c >= 0")
            return c * analytic.be_density(mu, x)
        if fam is Family.TRUNCATED_LINEAR:
            a, b = float(params["a"]), float(params["b"])
            _require(a >= 0 and b >= 0, "truncated_linear needs a, b >= 0")
            return a * x - b * x * x
        if fam is Family.BUMP:
            A, xc, s = float(params["A"]), float(params["x_c"]), float(params["sigma"])
            _require(A >= 0, "bump needs A >= 0")
            _require(s > 0, "bump needs sigma > 0")
            return A * np.exp(-((x - xc) / s) ** 2)
        if fam is Family.SUPER_SOLUTION:
            g = float(params["gamma"])
            _require(g >= 0, "super_solution needs gamma >= 0")
            return analytic.super_solution(g, x)
        xs = np.asarray(params["x"], dtype=float)
        ns = np.asarray(params["n"], dtype=float)
        _require(xs.ndim == 1 and xs.shape == ns.shape and xs.size >= 2,
                 "custom needs equal-length x and n tables")
        _require(bool(np.all(np.diff(xs) > 0)), "custom x must be increasing")
        _require(bool(np.all(ns >= 0)), "custom n must be nonnegative")
        return np.interp(x, xs, ns, left=ns[0], right=0.0)
    except KeyError as exc:
        raise BadParams(f"{fam.value} is missing parameter {exc.args[0]!r}") from None


def make_initial_data(mesh: Mesh, family, **params) -> Profile:
    """Sample an initial-data family on ``mesh``, clamped at 0 from below.

    Families: ``planck_multiple(c)``, ``bose_einstein(mu, c=1)``,
    ``truncated_linear(a, b)`` = ``(a x - b x^2)_+``, ``bump(A, x_c, sigma)``
    = ``A exp(-(x - x_c)^2 / sigma^2)``, ``super_solution(gamma)`` and
    ``custom(x, n)`` (linear interpolation of a table, 0 past its end).
    """
    return Profile(mesh, np.maximum(sample_family(mesh, family, **params), 0.0))


def superpose(mesh: Mesh, components: Iterable[dict]) -> Profile:
    """Sum of several families, each given as ``{"family": ..., **params}``."""
    total = np.zeros(mesh.M + 1)
    for comp in components:
        comp = dict(comp)
        fam = comp.pop("family")
        total += np.maximum(sample_family(mesh, fam, **comp), 0.0)
    return Profile(mesh, total)

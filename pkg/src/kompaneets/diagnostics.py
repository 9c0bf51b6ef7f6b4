"""Post-run audits that check a :class:`RunRecord` against known PDE facts.

Every audit is a pure function of its record(s): it never mutates them, and
repeated calls give identical results. Each report has ``summary()`` (a JSON
friendly dict of worst margins and booleans) and, where it makes sense,
``rows()`` (one dict per recorded time, for CSV export).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analytic
from .errors import (
    EmptyRecord,
    InitialOrderViolated,
    MismatchedRuns,
    MissingSeries,
    MissingSnapshots,
    ZeroMass,
)
from .grid import Mesh
from .record import RunRecord

ONSET_RELATIVE_THRESHOLD = 1e-6
ENTROPY_INCREASE_TOL = 1e-8
COMPARISON_TOL = 1e-8
ENERGY_SLACK = 0.05
OLEINIK_SLACK = 0.05


def _nonempty(record: RunRecord):
    if not record.times:
        raise EmptyRecord("record has no entries")


def _cumtrapz(y, t) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _l1(mesh: Mesh, v) -> float:
    return float(np.trapezoid(np.abs(v), mesh.nodes))


def cell_l1(mesh: Mesh, v) -> float:
    """``sum_i dx_i |v_i|`` over the first M nodes.

    The upwind scheme balances photons exactly in this left-point sum, so
    it is the norm in which discrete L1 contraction holds to rounding; the
    trapezoid norm differs from it by O(r - 1).
    """
    v = np.asarray(v, dtype=float)
    return float(np.dot(mesh.spacings, np.abs(v[:-1])))


def check_record(record: RunRecord) -> list:
    """Structural invariants of a record; returns a list of violations."""
    problems = []
    t = np.asarray(record.times)
    if t.size == 0:
        return ["empty record"]
    if t[0] != 0.0:
        problems.append("times[0] != 0")
    if np.any(np.diff(t) <= 0):
        problems.append("times not strictly increasing")
    if np.any(np.diff(record.loss_integral) < 0):
        problems.append("loss_integral decreases")
    lengths = {len(record.photon_numbers), len(record.boundary_values),
               len(record.loss_integral), len(record.snapshots), t.size}
    for opt in (record.entropies, record.dissipations, record.energy):
        if opt is not None:
            lengths.add(len(opt))
    if len(lengths) != 1:
        problems.append(f"series lengths differ: {sorted(lengths)}")
    return problems


# -- photon loss ------------------------------------------------------------

@dataclass(frozen=True)
class LossAudit:
    times: np.ndarray
    residuals: np.ndarray
    N0: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def t_of_max(self) -> float:
        return float(self.times[int(np.argmax(self.residuals))])

    @property
    def relative_max(self) -> float:
        return self.max_residual / self.N0 if self.N0 > 0 else self.max_residual

    def summary(self) -> dict:
        return {"max_residual": self.max_residual, "relative_max_residual": self.relative_max,
                "t_of_max": self.t_of_max}

    def rows(self) -> list:
        return [{"t": t, "loss_residual": r} for t, r in zip(self.times, self.residuals)]


def loss_audit(record: RunRecord) -> LossAudit:
    """Residuals ``|N(t) + int_0^t n(0)^2 ds - N(0)|`` at each recorded time."""
    _nonempty(record)
    N = np.asarray(record.photon_numbers)
    L = np.asarray(record.loss_integral)
    return LossAudit(np.asarray(record.times), np.abs(N + L - N[0]), float(N[0]))


# -- onset ------------------------------------------------------------------

@dataclass(frozen=True)
class OnsetReport:
    t_star_detected: Optional[float]
    threshold: float
    riccati_bound: Optional[float]
    mass_condition_holds: bool
    initial_slope: float
    initial_photon_number: float
    sensitivity: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "t_star_detected": self.t_star_detected,
            "threshold": self.threshold,
            "riccati_bound": self.riccati_bound,
            "mass_condition_holds": self.mass_condition_holds,
            "initial_slope": self.initial_slope,
            "initial_photon_number": self.initial_photon_number,
            "sensitivity": self.sensitivity,
            "persistence_violations": len(self.events),
            "events": self.events,
        }


def _first_crossing(times, values, threshold) -> Optional[float]:
    above = np.flatnonzero(values > threshold)
    return float(times[above[0]]) if above.size else None


def detect_onset(record: RunRecord, threshold: Optional[float] = None) -> OnsetReport:
    """First recorded time the boundary value ``n_t(0)`` exceeds ``threshold``.

    The default threshold is ``1e-6 * max(n_0)``. Detection times at 10x and
    0.1x the threshold are reported under ``sensitivity``. A boundary value
    dropping below half the threshold after detection is listed in
    ``events``; it is not an error.
    """
    _nonempty(record)
    n0 = record.initial
    mesh = record.mesh
    if threshold is None:
        threshold = ONSET_RELATIVE_THRESHOLD * float(np.max(n0))
        if threshold <= 0:
            threshold = np.finfo(float).tiny
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    t = np.asarray(record.times)
    b = np.asarray(record.boundary_values)
    t_star = _first_crossing(t, b, threshold)

    events = []
    if t_star is not None:
        after = t >= t_star
        for ti, bi in zip(t[after], b[after]):
            if bi < 0.5 * threshold:
                events.append({"kind": "persistence_violation", "time": float(ti),
                               "boundary_value": float(bi)})

    x1 = float(mesh.nodes[1])
    slope = float((n0[1] - n0[0]) / x1)
    bound = analytic.riccati_onset_bound(slope) if slope > 1 else None
    N0 = analytic.photon_number(mesh, n0)
    return OnsetReport(
        t_star_detected=t_star,
        threshold=float(threshold),
        riccati_bound=bound,
        mass_condition_holds=bool(N0 > analytic.planck_photon_number()),
        initial_slope=slope,
        initial_photon_number=N0,
        sensitivity={"x10": _first_crossing(t, b, 10 * threshold),
                     "x0.1": _first_crossing(t, b, 0.1 * threshold)},
        events=events,
    )


# -- equilibrium ------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumFit:
    mu_hat: float
    l1_distance: float
    predicted_N: float
    observed_N: float

    def summary(self) -> dict:
        return {"mu_hat": self.mu_hat, "l1_distance": self.l1_distance,
                "predicted_N": self.predicted_N, "observed_N": self.observed_N}


def fit_equilibrium(final, mesh: Optional[Mesh] = None) -> EquilibriumFit:
    """Match the photon number of ``final`` to a Bose-Einstein profile.

    The match uses the trapezoid photon number of the sampled profile on the
    same mesh, so the fit of a sampled ``n_mu`` returns ``mu`` exactly.

    ``final`` is a :class:`~kompaneets.solver.Profile` or, with ``mesh``
    given, an array of nodal values.
    """
    if mesh is None:
        mesh, values = final.mesh, final.values
    else:
        values = np.asarray(final, dtype=float)
    N = analytic.photon_number(mesh, values)
    if not N > 0:
        raise ZeroMass("profile has no photons")
    mu = analytic.solve_mu_on_mesh(mesh, N).mu
    eq = analytic.be_density(mu, mesh.nodes)
    return EquilibriumFit(
        mu_hat=mu,
        l1_distance=_l1(mesh, values - eq),
        predicted_N=analytic.photon_number(mesh, eq),
        observed_N=N,
    )


def equilibrium_distance_series(record: RunRecord, mu: float) -> np.ndarray:
    """``||n_t - n_mu||_L1`` at every recorded time."""
    eq = analytic.be_density(mu, record.mesh.nodes)
    return np.array([_l1(record.mesh, s - eq) for s in record.snapshots])


# -- entropy ----------------------------------------------------------------

@dataclass(frozen=True)
class EntropyAudit:
    applicable: bool
    times: np.ndarray
    balance_residuals: np.ndarray
    increase_events: int
    max_increase: float

    def summary(self) -> dict:
        return {
            "applicable": self.applicable,
            "increase_events": self.increase_events,
            "max_increase": self.max_increase,
            "max_balance_residual": float(self.balance_residuals.max())
            if self.balance_residuals.size else 0.0,
        }

    def rows(self) -> list:
        return [{"t": t, "entropy_residual": r}
                for t, r in zip(self.times, self.balance_residuals)]


def entropy_audit(record: RunRecord, exp_decay: bool) -> EntropyAudit:
    """Entropy balance ``|H(t) - H(0) + int_0^t D|`` and H-increase events.

    The dissipation identity is only known under exponentially decaying
    initial data, so the caller must assert it with ``exp_decay``; without
    the assertion the audit returns an inapplicable, empty report.
    """
    if record.entropies is None or record.dissipations is None:
        raise MissingSeries("entropy and dissipation series were not recorded")
    if not exp_decay:
        empty = np.zeros(0)
        return EntropyAudit(False, empty, empty, 0, 0.0)
    t = np.asarray(record.times)
    H = np.asarray(record.entropies)
    D = np.asarray(record.dissipations)
    residual = np.abs(H - H[0] + _cumtrapz(D, t))
    dH = np.diff(H)
    return EntropyAudit(
        applicable=True,
        times=t,
        balance_residuals=residual,
        increase_events=int(np.sum(dH > ENTROPY_INCREASE_TOL)),
        max_increase=float(dH.max()) if dH.size else 0.0,
    )


def exp_decay_constant(mesh: Mesh, n0) -> float:
    """Smallest ``C0`` with ``n0 <= C0 (1 + x^2) exp(-x)`` at every node."""
    x = mesh.nodes
    return float(np.max(np.asarray(n0) / ((1 + x * x) * np.exp(-x))))


# -- paired runs --------------------------------------------------------------

def _check_pair(a: RunRecord, b: RunRecord):
    _nonempty(a)
    _nonempty(b)
    same_mesh = a.mesh is b.mesh or (
        a.mesh.nodes.shape == b.mesh.nodes.shape and np.array_equal(a.mesh.nodes, b.mesh.nodes))
    if not same_mesh:
        raise MismatchedRuns("runs use different meshes")
    if a.dt != b.dt or a.record_every != b.record_every:
        raise MismatchedRuns("runs use different time steps or recording strides")
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=1e-12, atol=0):
        raise MismatchedRuns("runs were recorded at different times")


@dataclass(frozen=True)
class ContractionAudit:
    times: np.ndarray
    l1_gaps: np.ndarray
    worst_margin: float
    worst_pair: tuple
    passed: bool

    def summary(self) -> dict:
        return {"worst_margin": self.worst_margin, "worst_pair": list(self.worst_pair),
                "passed": self.passed}

    def rows(self) -> list:
        return [{"t": t, "l1_gap": g} for t, g in zip(self.times, self.l1_gaps)]


def contraction_audit(record_a: RunRecord, record_b: RunRecord) -> ContractionAudit:
    """L1 contraction including the boundary outflux, over all recorded pairs.

    For ``s <= t`` checks ``||n_t - m_t|| + int_s^t |n(0)^2 - m(0)^2| <=
    ||n_s - m_s|| + slack`` with ``slack = 1e-6 + 1e-3 ||n_s - m_s||``.
    ``margin = rhs + slack - lhs``; the audit passes when every margin is >= 0.

    Distances use :func:`cell_l1`. When the boundary values stay ordered,
    the flux term is the difference of the per-step loss integrals.
    """
    _check_pair(record_a, record_b)
    mesh = record_a.mesh
    t = np.asarray(record_a.times)
    gaps = np.array([cell_l1(mesh, u - v) for u, v in zip(record_a.snapshots, record_b.snapshots)])
    ba = np.asarray(record_a.boundary_values)
    bb = np.asarray(record_b.boundary_values)
    diff = ba * ba - bb * bb
    if np.all(diff >= 0) or np.all(diff <= 0):
        # ordered boundary values: use the per-step loss integrals directly
        la, lb = np.asarray(record_a.loss_integral), np.asarray(record_b.loss_integral)
        flux_gap = np.abs(la - lb)
    else:
        flux_gap = _cumtrapz(np.abs(diff), t)

    s_idx, t_idx = np.triu_indices(t.size)
    lhs = gaps[t_idx] + flux_gap[t_idx] - flux_gap[s_idx]
    rhs = gaps[s_idx]
    slack = 1e-6 + 1e-3 * rhs
    margin = rhs + slack - lhs
    k = int(np.argmin(margin))
    worst = float(margin[k])
    return ContractionAudit(t, gaps, worst, (float(t[s_idx[k]]), float(t[t_idx[k]])),
                            worst >= 0.0)


@dataclass(frozen=True)
class ComparisonAudit:
    times: np.ndarray
    violations: np.ndarray
    max_violation: float
    tolerance: float
    passed: bool

    def summary(self) -> dict:
        return {"max_violation": self.max_violation, "tolerance": self.tolerance,
                "passed": self.passed}

    def rows(self) -> list:
        return [{"t": t, "order_violation": v} for t, v in zip(self.times, self.violations)]


def comparison_audit(record_lo: RunRecord, record_hi: RunRecord) -> ComparisonAudit:
    """Max over recorded times and nodes of ``(lo - hi)_+``.

    Raises :class:`InitialOrderViolated` unless ``lo <= hi`` at t = 0.
    Passes when the violation stays below ``1e-8 * max(hi)``.
    """
    _check_pair(record_lo, record_hi)
    if np.any(record_lo.initial > record_hi.initial):
        raise InitialOrderViolated("initial data are not ordered lo <= hi")
    viol = np.array([float(np.max(np.maximum(lo - hi, 0.0)))
                     for lo, hi in zip(record_lo.snapshots, record_hi.snapshots)])
    scale = max(float(np.max(s)) for s in record_hi.snapshots)
    tol = COMPARISON_TOL * scale
    worst = float(viol.max())
    return ComparisonAudit(np.asarray(record_lo.times), viol, worst, tol, worst < tol or worst == 0)


# -- energy ---------------------------------------------------------------

@dataclass(frozen=True)
class EnergyAudit:
    times: np.ndarray
    energies: np.ndarray
    bounds: np.ndarray
    passed: bool

    def summary(self) -> dict:
        ratio = np.where(self.bounds > 0, self.energies / np.where(self.bounds > 0, self.bounds, 1), 0)
        return {"passed": self.passed, "max_energy_to_bound": float(ratio.max())}

    def rows(self) -> list:
        return [{"t": t, "energy": e, "energy_bound": b}
                for t, e, b in zip(self.times, self.energies, self.bounds)]


def energy_series(record: RunRecord) -> EnergyAudit:
    """``int n^2`` per snapshot against ``E(0) + 2 int_0^t int x n^2`` (+5%)."""
    if not record.snapshots:
        raise MissingSnapshots("record has no snapshots")
    x = record.mesh.nodes
    E = np.array([float(np.trapezoid(s * s, x)) for s in record.snapshots])
    if record.energy_source is not None:
        src = np.asarray(record.energy_source)
    else:
        src = _cumtrapz([float(np.trapezoid(x * s * s, x)) for s in record.snapshots],
                        record.times)
    bound = E[0] + 2.0 * src
    passed = bool(np.all(E <= (1.0 + ENERGY_SLACK) * bound + 1e-300))
    return EnergyAudit(np.asarray(record.times), E, bound, passed)


# -- convergence rate -------------------------------------------------------

@dataclass(frozen=True)
class RateCheck:
    times: np.ndarray
    lhs: np.ndarray
    lhs_x2: np.ndarray
    rhs: np.ndarray
    gamma: float
    constant: float
    truncated: bool
    holds: bool
    holds_x2: bool
    holds_bare: bool

    def summary(self) -> dict:
        return {
            "holds": self.holds,
            "holds_x2_weight": self.holds_x2,
            "holds_without_taylor_half": self.holds_bare,
            "gamma": self.gamma,
            "C": self.constant,
            "one_sided_with_truncation": self.truncated,
        }

    def rows(self) -> list:
        return [{"t": t, "rate_lhs": a, "rate_rhs": b}
                for t, a, b in zip(self.times, self.lhs, self.rhs)]


def barrier_gamma(mesh: Mesh, n0) -> float:
    """Smallest ``gamma >= 0`` with ``n0 <= S_gamma`` at every node."""
    x = mesh.nodes
    excess = np.asarray(n0) - analytic.be_density(0.0, x)
    return float(max(0.0, np.max(excess / analytic.super_weight(x))))


def rate_check(record: RunRecord, fit: EquilibriumFit, exp_decay: bool = True,
               tol: float = 1e-10) -> RateCheck:
    """Compare ``||x (n_t - n_mu)||_L1^2`` with ``C (H(n_t) - H(n_mu) + mu tail)``.

    ``C = 2 int S_g (S_g + x^2)`` with ``g`` the smallest barrier above the
    initial data; the factor 2 is the Taylor remainder's ``1/2`` moved to the
    right side. ``tail = int_t^{t_end} n(0)^2`` stands in for the integral to
    infinity; when ``mu * tail`` exceeds ``tol`` the check is flagged as
    one-sided. The ``x^2``-weighted left side and the comparison without the
    factor 2 are reported too.
    """
    if record.entropies is None:
        raise MissingSeries("entropy series was not recorded")
    if not exp_decay:
        raise MissingSeries("rate check requires the exponential-decay assertion")
    mesh = record.mesh
    x = mesh.nodes
    mu = fit.mu_hat
    eq = analytic.be_density(mu, x)
    lhs = np.array([float(np.trapezoid(x * np.abs(s - eq), x)) ** 2 for s in record.snapshots])
    lhs2 = np.array([float(np.trapezoid(x * x * np.abs(s - eq), x)) ** 2
                     for s in record.snapshots])
    L = np.asarray(record.loss_integral)
    tail = L[-1] - L
    bracket = np.asarray(record.entropies) - analytic.entropy(mesh, eq) + mu * tail
    gamma = barrier_gamma(mesh, record.initial)
    C = 2.0 * analytic.rate_constant(mesh, gamma)
    rhs = C * bracket
    truncated = bool(mu > 0 and mu * L[-1] > tol)
    return RateCheck(
        times=np.asarray(record.times), lhs=lhs, lhs_x2=lhs2, rhs=rhs, gamma=gamma,
        constant=C, truncated=truncated,
        holds=bool(np.all(lhs <= rhs + tol)),
        holds_x2=bool(np.all(lhs2 <= rhs + tol)),
        holds_bare=bool(np.all(lhs <= 0.5 * rhs + tol)),
    )


# -- slope bound ----------------------------------------------------------------

@dataclass(frozen=True)
class OleinikAudit:
    worst_margin: float
    worst_time: Optional[float]
    worst_x: Optional[float]
    passed: bool

    def summary(self) -> dict:
        return {"worst_margin": self.worst_margin, "worst_time": self.worst_time,
                "worst_x": self.worst_x, "passed": self.passed}


def oleinik_audit(record: RunRecord, t_min: Optional[float] = None) -> OleinikAudit:
    """Discrete slopes against the one-sided lower bound on ``n_x``.

    Checks ``(n_{i+1} - n_i)/dx_i >= env - 0.05 |env|`` at the left node of
    every cell, for recorded times ``t >= t_min`` (default ``10 dt``).
    """
    _nonempty(record)
    mesh = record.mesh
    if t_min is None:
        t_min = 10 * record.dt
    sup_n = max(float(np.max(s)) for s in record.snapshots)
    xl = mesh.nodes[:-1]
    worst, wt, wx = math.inf, None, None
    for t, s in zip(record.times, record.snapshots):
        if t < t_min or t <= 0:
            continue
        slope = np.diff(s) / mesh.spacings
        env = analytic.oleinik_envelope(xl, t, sup_n)
        margin = slope - (env - OLEINIK_SLACK * np.abs(env))
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, wt, wx = float(margin[k]), float(t), float(xl[k])
    if wt is None:
        worst = 0.0
    return OleinikAudit(worst, wt, wx, worst >= 0.0)

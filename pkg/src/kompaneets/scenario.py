"""Execute a :class:`RunConfig` and write plot-ready output files."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import diagnostics as diag
from . import solver
from .config import RunConfig
from .errors import InitialOrderViolated, KompaneetsError, NonFiniteState, StepError
from .grid import Mesh, build_geometric_mesh

log = logging.getLogger(__name__)

SERIES_FILE = "series.csv"
PROFILES_FILE = "profiles.csv"
ONSET_FILE = "onset.json"
FIT_FILE = "fit.json"
AUDITS_FILE = "audits.json"
AUDIT_ROWS_FILE = "audits.csv"
DEFAULT_PROFILE_COUNT = 11


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.17g}"


@dataclass
class Outcome:
    status: int
    out_dir: Path
    files: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def build_mesh(cfg: RunConfig) -> Mesh:
    return build_geometric_mesh(cfg.mesh.M, cfg.mesh.R, cfg.mesh.last_spacing)


def scheme_config(cfg: RunConfig, mesh: Mesh) -> solver.SchemeConfig:
    """Resolve ``dt = "auto"`` and ``steps`` against the built mesh."""
    dt = solver.default_dt(mesh) if cfg.scheme.dt == "auto" else float(cfg.scheme.dt)
    t_end = cfg.scheme.t_end if cfg.scheme.t_end is not None else cfg.scheme.steps * dt
    return solver.SchemeConfig(dt=dt, nonlinearity=cfg.scheme.nonlinearity, t_end=t_end,
                               record_every=cfg.scheme.record_every)


def initial_profile(mesh: Mesh, components) -> solver.Profile:
    return solver.superpose(mesh, [c.model_dump() for c in components])


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=True, default=_json_default)
        fh.write("\n")


def _snapshot_indices(record, times: Optional[list]) -> list:
    t = np.asarray(record.times)
    if times is None:
        k = min(DEFAULT_PROFILE_COUNT, t.size)
        idx = np.unique(np.round(np.linspace(0, t.size - 1, k)).astype(int))
        return idx.tolist()
    return sorted({int(np.argmin(np.abs(t - ti))) for ti in times})


def write_series(path: Path, record):
    cols = record.series()
    names = list(cols)
    _write_csv(path, names, zip(*(cols[n] for n in names)))


def write_profiles(path: Path, record, times=None):
    x = record.mesh.nodes
    rows = []
    for k in _snapshot_indices(record, times):
        t = record.times[k]
        rows.extend((t, xi, ni) for xi, ni in zip(x, record.snapshots[k]))
    _write_csv(path, ["t", "x", "n"], rows)


def run_audits(cfg: RunConfig, record, paired=None) -> tuple[dict, list, dict]:
    """All configured audits; returns (summary, failures, per-time columns)."""
    d = cfg.diagnostics
    summary = {"record": {"problems": diag.check_record(record),
                          "negativity_events": len(record.events)}}
    failures = []
    columns = {}
    if summary["record"]["problems"]:
        failures.append({"audit": "record", "detail": summary["record"]["problems"]})
    if record.events:
        failures.append({"audit": "negativity", "detail": record.events[:5]})

    loss = diag.loss_audit(record)
    summary["loss"] = loss.summary() | {"tolerance": d.loss_tolerance}
    columns["loss_residual"] = loss.residuals
    if loss.relative_max > d.loss_tolerance:
        failures.append({"audit": "loss", "detail": loss.summary()})

    if record.entropies is not None:
        ent = diag.entropy_audit(record, cfg.exp_decay_assertion)
        summary["entropy"] = ent.summary()
        if ent.applicable:
            columns["entropy_residual"] = ent.balance_residuals
            if ent.increase_events:
                failures.append({"audit": "entropy", "detail": ent.summary()})

    if d.energy:
        en = diag.energy_series(record)
        summary["energy"] = en.summary()
        columns["energy_bound"] = en.bounds
        if not en.passed:
            failures.append({"audit": "energy", "detail": en.summary()})

    if d.oleinik:
        ol = diag.oleinik_audit(record)
        summary["oleinik"] = ol.summary()
        if not ol.passed:
            failures.append({"audit": "oleinik", "detail": ol.summary()})

    if d.rate and record.entropies is not None and cfg.exp_decay_assertion:
        fit = diag.fit_equilibrium(record.final, record.mesh)
        rc = diag.rate_check(record, fit)
        summary["rate"] = rc.summary()
        columns["rate_lhs"] = rc.lhs
        columns["rate_rhs"] = rc.rhs
        if not rc.holds:
            failures.append({"audit": "rate", "detail": rc.summary()})

    if paired is not None:
        audits = cfg.paired.audits
        if "contraction" in audits:
            ca = diag.contraction_audit(record, paired)
            summary["contraction"] = ca.summary()
            columns["l1_gap"] = ca.l1_gaps
            if not ca.passed:
                failures.append({"audit": "contraction", "detail": ca.summary()})
        if "comparison" in audits:
            lo, hi = record, paired
            if np.any(lo.initial > hi.initial):
                lo, hi = paired, record
            try:
                cmp_ = diag.comparison_audit(lo, hi)
            except InitialOrderViolated as exc:
                summary["comparison"] = {"passed": False, "error": str(exc)}
                failures.append({"audit": "comparison", "detail": str(exc)})
            else:
                summary["comparison"] = cmp_.summary() | {
                    "lower_run": "primary" if lo is record else "paired"}
                columns["order_violation"] = cmp_.violations
                if not cmp_.passed:
                    failures.append({"audit": "comparison", "detail": cmp_.summary()})
    return summary, failures, columns


def execute(cfg: RunConfig, out_dir: Optional[Path] = None,
            stepper: Optional[Callable] = None) -> Outcome:
    """Run ``cfg`` and emit its files into ``out_dir``.

    The status is 0 when every audit is within its slack and the state
    stayed finite, 1 otherwise. ``stepper`` replaces the configured time
    stepper; tests use it to inject a broken scheme.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(cfg)
    scheme = scheme_config(cfg, mesh)
    d = cfg.diagnostics
    outcome = Outcome(status=0, out_dir=out)

    def _run(components):
        return solver.run(initial_profile(mesh, components), scheme, entropy=d.entropy,
                          energy=d.energy, stepper=stepper)

    log.info("running %s: M=%d dt=%.3g t_end=%.3g", cfg.name, mesh.M, scheme.dt, scheme.t_end)
    try:
        record = _run(cfg.initial)
        paired = _run(cfg.paired.initial) if cfg.paired is not None else None
    except StepError as exc:
        kind = "non_finite_state" if isinstance(exc.cause, NonFiniteState) else "step_failure"
        outcome.failures.append({"audit": kind, "detail": str(exc), "step": exc.step,
                                 "time": exc.time})
        outcome.status = 1
        path = out / AUDITS_FILE
        _write_json(path, {"failures": outcome.failures, "passed": False})
        outcome.files.append(path)
        return outcome

    write_series(out / SERIES_FILE, record)
    write_profiles(out / PROFILES_FILE, record, cfg.snapshot_times)
    onset = diag.detect_onset(record, d.onset_threshold)
    _write_json(out / ONSET_FILE, onset.summary())
    try:
        fit = diag.fit_equilibrium(record.final, mesh).summary()
    except KompaneetsError as exc:
        fit = {"error": str(exc)}
    _write_json(out / FIT_FILE, fit)

    summary, failures, columns = run_audits(cfg, record, paired)
    outcome.failures.extend(failures)
    outcome.status = 1 if outcome.failures else 0
    summary["failures"] = outcome.failures
    summary["passed"] = outcome.status == 0
    _write_json(out / AUDITS_FILE, summary)
    names = list(columns)
    _write_csv(out / AUDIT_ROWS_FILE, ["t", *names],
               zip(record.times, *(columns[n] for n in names)))
    outcome.files = [out / f for f in (SERIES_FILE, PROFILES_FILE, ONSET_FILE, FIT_FILE,
                                       AUDITS_FILE, AUDIT_ROWS_FILE)]
    if outcome.status:
        log.warning("%s: %d audit failure(s)", cfg.name, len(outcome.failures))
    return outcome

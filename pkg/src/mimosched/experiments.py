"""Experiment driver: scenario -> transceivers -> scheduler -> exact metrics -> CSV/JSON."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .baselines import MshsConfig, SusConfig
from .bcd import BcdConfig, default_rho
from .beamforming import PrecoderError
from .estimators import BCDScheduler, ExhaustiveScheduler, MSHSScheduler, SUSScheduler
from .network import build_instance
from .rates import qos_shortfall, surrogate_objective
from .scenario import ConfigError, ScenarioConfig, desk_profile

logger = logging.getLogger(__name__)

SCHEMA = "mimosched-results/1"
CSV_COLUMNS = ("seed", "sweep_value", "scheduler", "iteration", "f_a", "f_t", "esr_nats", "sat",
               "runtime_ms")
SWEEP_PARAMETERS = {"beta_db": "beta_db", "ue_count": "ue_count", "nt": "nt"}
SCHEDULER_NAMES = ("proposed", "sus", "mshs", "exhaustive")
ENV_OUTPUT_DIR = "MIMOSCHED_OUTPUT_DIR"
ENV_THREADS = "MIMOSCHED_THREADS"


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError("sweep.parameter", f"must be one of {sorted(SWEEP_PARAMETERS)}")
        if not self.values:
            raise ConfigError("sweep.values", "must be non-empty")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=desk_profile)
    scheduler: tuple[str, ...] = ("proposed",)
    bcd: BcdConfig = BcdConfig()
    sus: SusConfig = SusConfig()
    mshs: MshsConfig = MshsConfig()
    sweep: Sweep | None = None
    replications: int = 1
    output_dir: str = "results"
    trace_exact: bool = False
    exhaustive_rho: float = 1.0

    def __post_init__(self):
        sched = (self.scheduler,) if isinstance(self.scheduler, str) else tuple(self.scheduler)
        object.__setattr__(self, "scheduler", sched)
        if not sched:
            raise ConfigError("scheduler", "at least one scheduler required")
        for s in sched:
            if s not in SCHEDULER_NAMES:
                raise ConfigError("scheduler", f"unknown scheduler {s!r}; choose from {SCHEDULER_NAMES}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError("replications", f"must be an integer >= 1, got {self.replications}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentSpec:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        kw = dict(data)
        if "scenario" in kw:
            kw["scenario"] = ScenarioConfig.from_dict(kw["scenario"])
        for name, typ in (("bcd", BcdConfig), ("sus", SusConfig), ("mshs", MshsConfig)):
            if name in kw:
                kw[name] = _sub(typ, kw[name], name)
        if kw.get("sweep") is not None:
            kw["sweep"] = _sub(Sweep, kw["sweep"], "sweep")
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> ExperimentSpec:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "scheduler": list(self.scheduler),
            "bcd": dataclasses.asdict(self.bcd),
            "sus": dataclasses.asdict(self.sus),
            "mshs": dataclasses.asdict(self.mshs),
            "sweep": None if self.sweep is None else {"parameter": self.sweep.parameter,
                                                       "values": list(self.sweep.values)},
            "replications": self.replications,
            "output_dir": self.output_dir,
            "trace_exact": self.trace_exact,
            "exhaustive_rho": self.exhaustive_rho,
        }

    def replace(self, **changes) -> ExperimentSpec:
        return dataclasses.replace(self, **changes)


def _sub(typ, data, prefix):
    known = {f.name for f in dataclasses.fields(typ)}
    bad = set(data) - known
    if bad:
        raise ConfigError(f"{prefix}.{sorted(bad)[0]}", "unknown key")
    try:
        return typ(**data)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(prefix, str(exc)) from exc


@dataclass
class RunReport:
    """One scheduler on one network drop.

    ``trace`` rows carry ``iteration``, ``f_a`` and, when exact tracing is
    on (always for the last row), ``f_t``. Rates are normalized by
    ``R * C * K``.
    """

    scheduler: str
    seed: int
    sweep_value: Any
    trace: list[dict]
    esr_nats: float | None
    sat: float | None
    objective: float | None
    shortfall: dict[int, float]
    qos_met: bool | None
    schedule_sha256: str | None
    rho: float | None
    runtime_ms: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def esr_bits(self) -> float | None:
        return None if self.esr_nats is None else self.esr_nats / math.log(2)

    @property
    def f_a(self) -> float | None:
        return self.trace[-1]["f_a"] if self.trace else None

    @property
    def f_t(self) -> float | None:
        return self.trace[-1].get("f_t") if self.trace else None

    def deterministic(self) -> dict:
        """Everything except timing; stable across identical runs."""
        return {
            "scheduler": self.scheduler,
            "seed": self.seed,
            "sweep_value": self.sweep_value,
            "trace": self.trace,
            "esr_nats": self.esr_nats,
            "esr_bits": self.esr_bits,
            "sat": self.sat,
            "objective": self.objective,
            "shortfall": {str(k): v for k, v in self.shortfall.items()},
            "qos_met": self.qos_met,
            "schedule_sha256": self.schedule_sha256,
            "rho": self.rho,
            "error": self.error,
        }


def _make_estimator(name: str, spec: ExperimentSpec):
    if name == "proposed":
        c = spec.bcd
        return BCDScheduler(rho=c.rho, max_iters=c.max_iters, init=c.init, tol=c.tol,
                            random_state=c.seed)
    if name == "sus":
        return SUSScheduler(alpha=spec.sus.alpha, max_layers=spec.sus.max_layers)
    if name == "mshs":
        return MSHSScheduler(weight_floor=spec.mshs.weight_floor)
    return ExhaustiveScheduler(rho=spec.exhaustive_rho)


def _scenario_for(spec: ExperimentSpec, sweep_value, replication: int) -> ScenarioConfig:
    cfg = spec.scenario
    changes = {"seed": cfg.seed + replication}
    if spec.sweep is not None:
        changes[SWEEP_PARAMETERS[spec.sweep.parameter]] = sweep_value
    return cfg.replace(**changes)


def run_single(spec: ExperimentSpec, scheduler: str, sweep_value=None, replication: int = 0,
               instance=None) -> RunReport:
    """Run one scheduler on one drop and evaluate it with exact rates."""
    cfg = _scenario_for(spec, sweep_value, replication)
    started = time.perf_counter()
    inst = build_instance(cfg) if instance is None else instance
    M, K, C, R = inst.shape
    norm = float(R * C * K)
    qos = inst.qos_targets
    trace: list[dict] = []

    def on_sweep(it, state):
        row = {"iteration": it,
               "f_a": surrogate_objective(state.b, inst.coefficients, qos, 1.0) / norm}
        if spec.trace_exact:
            try:
                row["f_t"] = inst.metrics(state.b)["esr"] / norm
            except PrecoderError:
                row["f_t"] = None
        trace.append(row)

    est = _make_estimator(scheduler, spec)
    rho = None
    try:
        if scheduler == "proposed":
            est.fit(inst, callback=on_sweep)
            rho = est.rho_
        else:
            est.fit(inst)
            rho = spec.exhaustive_rho if scheduler == "exhaustive" else None
            on_sweep(0, type("S", (), {"b": est.schedule_.b})())
        b = est.schedule_.b
        m = inst.metrics(b)
    except PrecoderError as exc:
        logger.warning("replication failed (%s, seed %d): %s", scheduler, cfg.seed, exc)
        return RunReport(scheduler=scheduler, seed=cfg.seed, sweep_value=sweep_value, trace=trace,
                         esr_nats=None, sat=None, objective=None, shortfall={}, qos_met=None,
                         schedule_sha256=None, rho=rho,
                         runtime_ms=1e3 * (time.perf_counter() - started), error=str(exc))
    trace[-1]["f_t"] = m["esr"] / norm
    obj_rho = rho if rho is not None else default_rho(inst.coefficients, qos)
    shortfall = qos_shortfall(m["rates"], qos)
    return RunReport(
        scheduler=scheduler,
        seed=cfg.seed,
        sweep_value=sweep_value,
        trace=trace,
        esr_nats=m["esr"],
        sat=m["sat"],
        objective=surrogate_objective(b, inst.coefficients, qos, obj_rho),
        shortfall=shortfall,
        qos_met=all(v == 0 for v in shortfall.values()),
        schedule_sha256=hashlib.sha256(est.schedule_.tobytes()).hexdigest(),
        rho=rho,
        runtime_ms=1e3 * (time.perf_counter() - started),
    )


def _job(args):
    return run_single(*args)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_THREADS, "1")))
    except ValueError:
        return 1


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[RunReport]:
    """All (sweep value, replication, scheduler) combinations, in a fixed order.

    Drops are shared between schedulers of the same replication when run
    sequentially. With ``workers > 1`` jobs run in separate processes; the
    returned order does not depend on completion order.
    """
    values = spec.sweep.values if spec.sweep is not None else (None,)
    jobs = [(spec, s, v, i) for v in values for i in range(spec.replications) for s in spec.scheduler]
    workers = _workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_job, jobs))
    reports = []
    for v in values:
        for i in range(spec.replications):
            inst = build_instance(_scenario_for(spec, v, i))
            for s in spec.scheduler:
                reports.append(run_single(spec, s, v, i, instance=inst))
    return reports


def _mean_se(xs):
    xs = np.asarray([x for x in xs if x is not None], dtype=float)
    if xs.size == 0:
        return None, None
    se = float(xs.std(ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else 0.0
    return float(xs.mean()), se


def aggregate(reports: list[RunReport]) -> list[dict]:
    """Mean +- standard error per (scheduler, sweep value)."""
    groups: dict = {}
    for rep in reports:
        groups.setdefault((rep.scheduler, rep.sweep_value), []).append(rep)
    rows = []
    for (sched, value), reps in groups.items():
        ok = [r for r in reps if not r.failed]
        esr, esr_se = _mean_se([r.esr_nats for r in ok])
        sat, sat_se = _mean_se([r.sat for r in ok])
        rows.append({
            "scheduler": sched, "sweep_value": value, "n": len(reps), "failed": len(reps) - len(ok),
            "esr_nats": esr, "esr_nats_se": esr_se,
            "esr_bits": None if esr is None else esr / math.log(2),
            "sat": sat, "sat_se": sat_se,
            "f_a": _mean_se([r.f_a for r in ok])[0], "f_t": _mean_se([r.f_t for r in ok])[0],
        })
    return rows


def compare_schedulers(spec: ExperimentSpec, reports: list[RunReport] | None = None) -> list[dict]:
    """Per scheduler and sweep value: mean ESR, mean Sat, mean runtime, and the
    surrogate-objective gap to the exhaustive optimum when it was run."""
    if reports is None:
        reports = run_experiment(spec)
    oracle = {(r.sweep_value, r.seed): r.objective for r in reports
              if r.scheduler == "exhaustive" and not r.failed}
    groups: dict = {}
    for rep in reports:
        groups.setdefault((rep.sweep_value, rep.scheduler), []).append(rep)
    table = []
    for (value, sched), reps in groups.items():
        ok = [r for r in reps if not r.failed]
        gaps = []
        for r in ok:
            best = oracle.get((value, r.seed))
            if best is not None and r.objective is not None:
                gaps.append((best - r.objective) / abs(best) if best else 0.0)
        table.append({
            "sweep_value": value,
            "scheduler": sched,
            "esr_nats": _mean_se([r.esr_nats for r in ok])[0],
            "sat": _mean_se([r.sat for r in ok])[0],
            "runtime_ms": _mean_se([r.runtime_ms for r in reps])[0],
            "gap": float(np.mean(gaps)) if gaps else None,
        })
    return table


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(reports: list[RunReport], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SCHEMA}; columns: {','.join(CSV_COLUMNS)}; "
                 "f_a and f_t normalized by R*C*K (S = R)\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            rows = rep.trace or [{"iteration": 0, "f_a": None}]
            for i, row in enumerate(rows):
                last = i == len(rows) - 1
                writer.writerow([
                    rep.seed, _fmt(rep.sweep_value), rep.scheduler, row["iteration"],
                    _fmt(row.get("f_a")), _fmt(row.get("f_t")),
                    _fmt(rep.esr_nats) if last else "", _fmt(rep.sat) if last else "",
                    f"{rep.runtime_ms:.3f}" if last else "",
                ])
    return path


def summary(spec: ExperimentSpec, reports: list[RunReport], family: str, table=None) -> dict:
    det = {
        "schema": SCHEMA,
        "family": family,
        "normalization": "f_a = G(rho=1)/(R*C*K), f_t = G_esr/(R*C*K); S taken as R",
        "units": "rates in nats; esr_bits = esr_nats / ln 2",
        "config": spec.to_dict(),
        "runs": [r.deterministic() for r in reports],
        "aggregate": aggregate(reports),
    }
    if table is not None:
        det["table"] = [{k: v for k, v in row.items() if k != "runtime_ms"} for row in table]
    blob = json.dumps(det, sort_keys=True, default=_json_default).encode()
    return {
        "deterministic": det,
        "deterministic_sha256": hashlib.sha256(blob).hexdigest(),
        "timing": {
            "runtime_ms": [r.runtime_ms for r in reports],
            "table_runtime_ms": None if table is None else [row["runtime_ms"] for row in table],
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        },
    }


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_outputs(spec: ExperimentSpec, reports, family: str, out_dir=None, table=None) -> dict:
    out = Path(os.environ.get(ENV_OUTPUT_DIR) or out_dir or spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(reports, out / f"{family}.csv")
    summ = summary(spec, reports, family, table)
    with open(out / f"{family}.json", "w") as fh:
        json.dump(summ, fh, indent=2, sort_keys=True, default=_json_default)
    return summ

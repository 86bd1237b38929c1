"""Power experiments: trials over a grid of instances and sample budgets."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .hard_instances import make_product_perturbation, make_random_matching
from .io import parse_model
from .model import (
    ENUMERATION_CUTOFF,
    IsingModel,
    TesterConfig,
    classify_model,
    complete_model,
    path_model,
    star_model,
)
from .sampling import ExactSource, GlauberConfig, GlauberSource
from .testers import TESTER_NAMES, run_tester

SCHEMA_VERSION = 1
TRIAL_COLUMNS = ("instance", "family", "n", "budget", "trial", "decision", "statistic", "seed", "ms")
SUMMARY_COLUMNS = (
    "instance",
    "family",
    "n",
    "d_max",
    "budget",
    "trials",
    "reject_rate",
    "mean_statistic",
    "promise",
    "wall_time",
)
POWER_COLUMNS = ("instance", "family", "n", "d_max", "budget_at_power", "power_target")
POWER_TARGET = 0.8

# which structural promise each tester relies on
_PROMISES = {
    "forest-ind": ("is_forest", "is_zero_field"),
    "forest-id": ("is_forest", "is_zero_field"),
    "ferro-ind": ("is_ferromagnetic", "is_zero_field"),
}


@dataclass(frozen=True)
class InstanceSpec:
    """A named model built from a family and its parameters.

    Families: ``uniform`` (n), ``product-perturbation`` (n, eps, seed),
    ``random-matching`` (n, eps, seed), ``path`` / ``star`` (n, theta,
    field), ``complete`` (n, theta, alternating, field) and ``file`` (path).
    """

    name: str
    family: str
    params: dict = field(default_factory=dict)
    reference: dict | None = None

    def build(self) -> IsingModel:
        p = dict(self.params)
        fam = self.family
        if fam == "uniform":
            return IsingModel.uniform(int(p["n"]))
        if fam == "product-perturbation":
            return make_product_perturbation(int(p["n"]), float(p["eps"]), int(p.get("seed", 0))).model
        if fam == "random-matching":
            return make_random_matching(int(p["n"]), float(p["eps"]), int(p.get("seed", 0))).model
        if fam == "path":
            return path_model(int(p["n"]), float(p["theta"]), float(p.get("field", 0.0)))
        if fam == "star":
            return star_model(int(p["n"]), float(p["theta"]), float(p.get("field", 0.0)))
        if fam == "complete":
            return complete_model(
                int(p["n"]), float(p["theta"]), bool(p.get("alternating", False)), float(p.get("field", 0.0))
            )
        if fam == "file":
            return parse_model(p["path"])
        raise ValueError(f"unknown instance family {fam!r}")

    def build_reference(self, n: int) -> IsingModel:
        if self.reference is None:
            return IsingModel.uniform(n)
        return InstanceSpec(
            self.name + "-reference", self.reference["family"], self.reference.get("params", {})
        ).build()


@dataclass(frozen=True)
class ExperimentSpec:
    tester: str
    instances: tuple[InstanceSpec, ...]
    budgets: tuple[int, ...]
    trials: int
    seed: int
    epsilon: float
    tester_params: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    sampler: str = "exact"
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if self.tester not in TESTER_NAMES:
            raise ValueError(f"unknown tester {self.tester!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.instances:
            raise ValueError("at least one instance is required")
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise ValueError("budgets must be positive")
        if any(b >= c for b, c in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        if self.sampler not in ("exact", "glauber"):
            raise ValueError(f"sampler must be exact or glauber, got {self.sampler!r}")
        names = [i.name for i in self.instances]
        if len(set(names)) != len(names):
            raise ValueError("instance names must be unique")
        TesterConfig(self.epsilon, **self.constants)  # validates the constants

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        d = dict(data)
        d["instances"] = tuple(
            InstanceSpec(i["name"], i["family"], dict(i.get("params", {})), i.get("reference"))
            for i in d.get("instances", [])
        )
        d["budgets"] = tuple(int(b) for b in d.get("budgets", []))
        return cls(**d)

    def trial_seed(self, instance_index: int, budget_index: int, trial: int) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=(instance_index, budget_index, trial))
        return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialRow:
    instance: str
    family: str
    n: int
    budget: int
    trial: int
    decision: str
    statistic: float
    seed: int
    ms: float | None


@dataclass(frozen=True)
class CellResult:
    instance: str
    family: str
    n: int
    d_max: int
    budget: int
    trials: int
    reject_rate: float
    mean_statistic: float
    promise: str
    wall_time: float

    def __post_init__(self):
        if not 0 <= self.reject_rate <= 1:
            raise ValueError("reject_rate must lie in [0, 1]")


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    cells: list[CellResult]
    rows: list[TrialRow]

    def cell(self, instance: str, budget: int) -> CellResult:
        for c in self.cells:
            if c.instance == instance and c.budget == budget:
                return c
        raise KeyError((instance, budget))

    def reject_rates(self, instance: str) -> list[float]:
        return [c.reject_rate for c in self.cells if c.instance == instance]

    def power_rows(self, target: float = POWER_TARGET) -> list[dict]:
        out = []
        for inst in self.spec.instances:
            cells = [c for c in self.cells if c.instance == inst.name]
            hit = next((c.budget for c in cells if c.reject_rate >= target), None)
            out.append(
                {
                    "instance": inst.name,
                    "family": inst.family,
                    "n": cells[0].n,
                    "d_max": cells[0].d_max,
                    "budget_at_power": "" if hit is None else hit,
                    "power_target": target,
                }
            )
        return out

    def trials_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"schema={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in self.rows:
            ms = "" if r.ms is None else f"{r.ms:.3f}"
            w.writerow([r.instance, r.family, r.n, r.budget, r.trial, r.decision, f"{r.statistic:.10g}", r.seed, ms])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"schema={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for c in self.cells:
            wall = f"{c.wall_time:.3f}" if self.spec.record_timing else ""
            w.writerow(
                [
                    c.instance,
                    c.family,
                    c.n,
                    c.d_max,
                    c.budget,
                    c.trials,
                    f"{c.reject_rate:.6g}",
                    f"{c.mean_statistic:.10g}",
                    c.promise,
                    wall,
                ]
            )
        return buf.getvalue()

    def power_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"schema={SCHEMA_VERSION}\n")
        w = csv.DictWriter(buf, POWER_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.power_rows())
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"trials": out / "trials.csv", "summary": out / "summary.csv", "power": out / "power.csv"}
        paths["trials"].write_text(self.trials_csv())
        paths["summary"].write_text(self.summary_csv())
        paths["power"].write_text(self.power_csv())
        return paths


def _promise_status(tester: str, model: IsingModel) -> str:
    needs = _PROMISES.get(tester)
    if needs is None:
        return "unchecked"
    cls = classify_model(model)
    return "ok" if all(getattr(cls, k) for k in needs) else "mismatch"


def _make_source(model: IsingModel, sampler: str):
    if sampler == "exact":
        if model.n > ENUMERATION_CUTOFF:
            raise ValueError(f"exact sampling needs n <= {ENUMERATION_CUTOFF}")
        return ExactSource(model)
    return GlauberSource(model, GlauberConfig(), allow_low_temperature=False)


def _run_cell(args) -> tuple[list[TrialRow], CellResult]:
    spec, ii, bi = args
    inst = spec.instances[ii]
    budget = spec.budgets[bi]
    model = inst.build()
    q = inst.build_reference(model.n) if spec.tester in ("loc-id", "forest-id", "ltt-id") else None
    source = _make_source(model, spec.sampler)
    base = TesterConfig(spec.epsilon, **spec.constants)
    rows, stats, rejects = [], [], 0
    start_cell = time.perf_counter()
    for t in range(spec.trials):
        seed = spec.trial_seed(ii, bi, t)
        t0 = time.perf_counter()
        verdict = run_tester(spec.tester, source, replace(base, rng_seed=seed), q=q, k=budget, **spec.tester_params)
        ms = (time.perf_counter() - t0) * 1e3 if spec.record_timing else None
        rejects += verdict.rejected
        stats.append(verdict.statistic)
        rows.append(TrialRow(inst.name, inst.family, model.n, budget, t, verdict.decision, verdict.statistic, seed, ms))
    cell = CellResult(
        inst.name,
        inst.family,
        model.n,
        model.d_max,
        budget,
        spec.trials,
        rejects / spec.trials,
        float(np.mean(stats)),
        _promise_status(spec.tester, model),
        time.perf_counter() - start_cell,
    )
    return rows, cell


def run_trials(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Run every (instance, budget, trial) cell; results are ordered by that key.

    With ``workers > 1`` cells run in a process pool.  Seeds depend only on
    the experiment description, so output is identical for any worker count.
    """
    jobs = [(spec, ii, bi) for ii in range(len(spec.instances)) for bi in range(len(spec.budgets))]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = [r for rs, _ in results for r in rs]
    cells = [c for _, c in results]
    report = ExperimentReport(spec, cells, rows)
    if out_dir is not None:
        report.write(out_dir)
    return report


def load_experiment(path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(json.loads(Path(path).read_text()))

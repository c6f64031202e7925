"""Experiment grid runner, LHS baseline and oracle verification."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from multimin.core import EvaluatedDesign, RandomStream, derive_seed, lhs_sample
from multimin.infill import CriterionKind, ProposalFailure
from multimin.mbo import MboAborted, MboConfig
from multimin.mbo import run as run_mbo
from multimin.metrics import evaluate_set
from multimin.minima import agglomerate, extract, sample_size
from multimin.objectives import lookup, registry, value_and_gradient
from multimin.surrogate import FitFailure, KrigingConfig, fit

logger = logging.getLogger(__name__)

ALGORITHMS = ("ei", "geilm", "lcb", "se", "lhs")
COLUMNS = (
    "function", "dim", "algorithm", "n_init", "n_seq", "n_total", "replication", "seed",
    "pr", "ahd", "l", "h", "interval", "skipped_boundary", "fit_failures", "wall_seconds",
)
PR_INTERVALS = (("A", 5.0), ("B", 50.0), ("C", 500.0), ("D", 1500.0))
WORKERS_ENV = "MULTIMIN_WORKERS"


def _squares(a, b):
    return [k * k for k in range(a, b + 1)]


def default_functions():
    return [(fn.name, fn.dim) for fn, _ in registry()]


@dataclass
class ExperimentConfig:
    functions: list = field(default_factory=default_functions)
    algorithms: list = field(default_factory=lambda: ["ei", "geilm", "lhs"])
    n_init: list = field(default_factory=lambda: _squares(3, 8))
    n_seq: list = field(default_factory=lambda: _squares(3, 12))
    n_lhs: list = field(default_factory=lambda: _squares(4, 15))
    replications: int = 30
    base_seed: int = 0
    delta: float = 0.001
    r: float = 1.0
    lambda_g: float = 2.0
    p_q: float = 0.001
    workers: int = 1

    def __post_init__(self):
        funcs = []
        for item in self.functions:
            if isinstance(item, dict):
                extra = set(item) - {"name", "dim"}
                if extra:
                    raise ValueError(f"unknown function keys: {sorted(extra)}")
                item = (item["name"], item["dim"])
            name, dim = item
            fn, _ = lookup(name, int(dim))
            funcs.append((fn.name, fn.dim))
        self.functions = funcs
        self.algorithms = [a.lower() for a in self.algorithms]
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; choose from {ALGORITHMS}")
        if self.replications < 0:
            raise ValueError("replications must be >= 0")
        if self.delta <= 0 or self.r < 1:
            raise ValueError("need delta > 0 and r >= 1")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def criterion(self, algorithm: str) -> CriterionKind:
        if algorithm == "geilm":
            return CriterionKind.geilm(self.lambda_g, self.p_q)
        return CriterionKind(algorithm)

    def cells(self) -> list["Cell"]:
        out = []
        for name, dim in self.functions:
            for algo in self.algorithms:
                if algo == "lhs":
                    out.extend(Cell(name, dim, algo, n, 0) for n in self.n_lhs)
                else:
                    out.extend(Cell(name, dim, algo, a, b) for a in self.n_init for b in self.n_seq)
        return out

    def counts(self) -> dict:
        """Cell and row counts without running anything."""
        per_algorithm = {}
        for cell in self.cells():
            per_algorithm[cell.algorithm] = per_algorithm.get(cell.algorithm, 0) + 1
        cells = sum(per_algorithm.values())
        return {"cells": cells, "per_algorithm": per_algorithm,
                "replications": self.replications, "rows": cells * self.replications}


@dataclass(frozen=True)
class Cell:
    function: str
    dim: int
    algorithm: str
    n_init: int
    n_seq: int

    @property
    def key(self):
        return (self.function, self.dim, self.algorithm, self.n_init, self.n_seq)

    def seed(self, base_seed: int, replication: int) -> int:
        return derive_seed(base_seed, self.key, replication)


@dataclass
class RunRecord:
    function: str
    dim: int
    algorithm: str
    n_init: int
    n_seq: int
    n_total: int
    replication: int
    seed: int
    pr: float | None
    ahd: float | None
    l: int | None
    h: int
    skipped_boundary: int
    fit_failures: int
    wall_seconds: float

    @property
    def interval(self) -> str:
        return pr_interval(self.pr)

    @property
    def failed(self) -> bool:
        return self.fit_failures > 0

    def to_row(self, timing: bool = False) -> list[str]:
        values = asdict(self)
        values["interval"] = self.interval
        values["wall_seconds"] = f"{self.wall_seconds:.3f}" if timing else None
        return [_fmt(values[c]) for c in COLUMNS]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if np.isnan(value) else repr(value)
    return str(value)


def pr_interval(pr) -> str:
    if pr is None or np.isnan(pr):
        return ""
    for label, upper in PR_INTERVALS:
        if pr <= upper:
            return label
    return "E"


def run_cell(cell: Cell, replication: int, seed: int, config: ExperimentConfig | None = None) -> RunRecord:
    """One replication of one grid cell.

    MBO algorithms run the sequential loop; ``lhs`` fits the same surrogate
    to a plain LHS.  Minima of the final surrogate mean are then extracted
    from stream ``("extract",)`` of the run seed and scored.
    """
    config = config or ExperimentConfig(functions=[(cell.function, cell.dim)])
    fn, known = lookup(cell.function, cell.dim)
    root = RandomStream(seed)
    kriging = KrigingConfig()
    t0 = time.perf_counter()
    record = RunRecord(cell.function, cell.dim, cell.algorithm, cell.n_init, cell.n_seq,
                       cell.n_init + cell.n_seq, replication, seed, None, None, None,
                       known.count, 0, 0, 0.0)
    try:
        if cell.algorithm == "lhs":
            X = lhs_sample(fn.domain, cell.n_init, root.child("design"))
            design = EvaluatedDesign(X, fn.evaluator(X), fn.domain)
            model = fit(design, kriging, root.child("fit", "final"))
        else:
            mbo = MboConfig(fn, cell.n_init, cell.n_seq, config.criterion(cell.algorithm), kriging, seed)
            _, model, _ = run_mbo(mbo)
    except (MboAborted, FitFailure, ProposalFailure) as exc:
        logger.warning("run %s rep %d failed: %s", cell.key, replication, exc)
        record.fit_failures = 1
        record.wall_seconds = time.perf_counter() - t0
        return record
    found = extract(model.mean_field, fn.domain, sample_size(fn.dim), root.child("extract"))
    minima = agglomerate(found, config.delta)
    metrics = evaluate_set(minima.points, known.points, config.r)
    record.pr, record.ahd, record.l = metrics.pr, metrics.ahd, metrics.l
    record.skipped_boundary = found.skipped_boundary
    record.wall_seconds = time.perf_counter() - t0
    return record


def _task(args):
    cell, replication, seed, config = args
    return run_cell(cell, replication, seed, config)


def resolve_workers(config: ExperimentConfig, workers: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, int(workers if workers is not None else config.workers))


@dataclass
class GridSummary:
    rows: int
    failed: int
    path: Path

    @property
    def ok(self) -> bool:
        return self.failed == 0


def header_line() -> str:
    return ",".join(COLUMNS) + "\n"


def format_row(record: RunRecord, timing: bool = False) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(record.to_row(timing))
    return buf.getvalue()


def write_records(path, records, force: bool = False, timing: bool = False) -> int:
    """Write the header and rows; refuses to touch an existing file unless ``force``."""
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line())
        for record in records:
            fh.write(format_row(record, timing))
            fh.flush()
            n += 1
    return n


def run_grid(config: ExperimentConfig, out, workers: int | None = None, force: bool = False,
             timing: bool = False) -> GridSummary:
    """Run every (cell, replication) pair and write rows in cell, replication order."""
    out = Path(out)
    if out.exists() and not force:
        raise FileExistsError(f"{out} exists; pass --force to overwrite")
    tasks = [(cell, rep, cell.seed(config.base_seed, rep), config)
             for cell in config.cells() for rep in range(config.replications)]
    n_workers = resolve_workers(config, workers)
    failed = 0

    def tally(records):
        nonlocal failed
        for record in records:
            failed += record.failed
            yield record

    if n_workers == 1 or len(tasks) <= 1:
        rows = write_records(out, tally(map(_task, tasks)), force=True, timing=timing)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = write_records(out, tally(pool.map(_task, tasks)), force=True, timing=timing)
    return GridSummary(rows, failed, out)


@dataclass
class OracleReport:
    function: str
    dim: int
    h: int
    found: int
    tolerance: float
    starts: int
    match_distances: list
    values: list
    seconds: float

    @property
    def passed(self) -> bool:
        return (self.found == self.h and len(self.match_distances) == self.h
                and max(self.match_distances, default=0.0) <= self.tolerance)

    def lines(self) -> list[str]:
        verdict = "PASS" if self.passed else "FAIL"
        out = [f"{verdict} {self.function} dim={self.dim}: {self.found} clusters, expected {self.h} "
               f"({self.starts} starts, {self.seconds:.1f}s)"]
        for i, (d, v) in enumerate(zip(self.match_distances, self.values), start=1):
            mark = "ok" if d <= self.tolerance else "MISS"
            out.append(f"  #{i:<3d} match {d:.2e}  y={v:.3f}  {mark}")
        return out


def verify_oracle(name: str, dim: int, tolerance: float = 1e-2, starts: int | None = None,
                  seed: int = 0, delta: float = 0.001) -> OracleReport:
    """Recover the tabulated minima by descent on the true function.

    Representatives are matched one-to-one to the tabulated points by
    minimum total Chebyshev distance.
    """
    fn, known = lookup(name, dim)
    n = starts or sample_size(fn.dim)
    t0 = time.perf_counter()
    found = extract(value_and_gradient(fn), fn.domain, n, RandomStream(seed).child("oracle"))
    minima = agglomerate(found, delta)
    matches, values = [], []
    if minima.count:
        d = cdist(known.points, minima.points, "chebyshev")
        rows, cols = linear_sum_assignment(d)
        best = dict(zip(rows, cols))
        for i in range(known.count):
            if i in best:
                matches.append(float(d[i, best[i]]))
                values.append(float(minima.values[best[i]]))
            else:
                matches.append(float("inf"))
                values.append(float("nan"))
    return OracleReport(fn.name, fn.dim, known.count, minima.count, tolerance, n,
                        matches, values, time.perf_counter() - t0)

"""Sequential model-based optimization loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from multimin.core import EvaluatedDesign, RandomStream, lhs_sample
from multimin.infill import CriterionKind, propose
from multimin.objectives import ObjectiveFunction
from multimin.surrogate import FitFailure, KrigingConfig, KrigingModel, fit


@dataclass(frozen=True)
class MboConfig:
    objective: ObjectiveFunction
    n_init: int
    n_seq: int
    criterion: CriterionKind = field(default_factory=CriterionKind.geilm)
    surrogate: KrigingConfig = field(default_factory=KrigingConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.n_seq < 0:
            raise ValueError("n_seq must be >= 0")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    x: np.ndarray
    y: float
    incumbent: float
    criterion: float
    fit_seconds: float


@dataclass
class MboTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def incumbents(self) -> np.ndarray:
        return np.array([r.incumbent for r in self.records])


class MboAborted(RuntimeError):
    """A surrogate fit failed; the partial trace and design are attached."""

    def __init__(self, message, trace: MboTrace, evaluated: EvaluatedDesign):
        super().__init__(message)
        self.trace = trace
        self.evaluated = evaluated


def run(config: MboConfig) -> tuple[EvaluatedDesign, KrigingModel, MboTrace]:
    """Initial LHS design, ``n_seq`` fit/propose/evaluate rounds, final refit.

    Child streams of the run seed: ``("design",)`` for the initial LHS,
    ``("fit", t)`` and ``("propose", t)`` for round ``t`` and
    ``("fit", "final")`` for the closing fit.
    """
    fn = config.objective
    root = RandomStream(config.seed)
    X = lhs_sample(fn.domain, config.n_init, root.child("design"))
    design = EvaluatedDesign(X, fn.evaluator(X), fn.domain)
    trace = MboTrace()

    def refit(key):
        t0 = time.perf_counter()
        try:
            model = fit(design, config.surrogate, root.child("fit", key))
        except FitFailure as exc:
            raise MboAborted(str(exc), trace, design) from exc
        return model, time.perf_counter() - t0

    for t in range(config.n_seq):
        model, seconds = refit(t)
        x, score = propose(model, design, config.criterion, root.child("propose", t))
        y = float(fn.evaluator(x[None, :])[0])
        design = design.extend(x, y)
        trace.records.append(TraceRecord(t, x, y, design.incumbent_value, score, seconds))
    model, _ = refit("final")
    return design, model, trace

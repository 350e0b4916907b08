"""Shared result record for the iterative solvers, with JSON persistence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class SolverReport:
    """What a fit produced and how it got there.

    objective_trace holds one value per outer iteration: the variational
    objective for the variational solver, the tracked MC log-likelihood for
    the sampling solver.  extras carries method-specific diagnostics such as
    acceptance rates or concentration-sum statistics.
    """

    method: str
    a_final: np.ndarray
    iterations: int
    objective_trace: np.ndarray
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    seed: Optional[int] = None
    warnings: list = field(default_factory=list)
    mse_trace: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)
    reduced_space: bool = False

    def __post_init__(self):
        self.a_final = np.asarray(self.a_final, dtype=float)
        self.objective_trace = np.asarray(self.objective_trace, dtype=float)
        if self.mse_trace is not None:
            self.mse_trace = np.asarray(self.mse_trace, dtype=float)


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def save_report(report: SolverReport, path):
    payload = {
        "method": report.method,
        "a_final": report.a_final.tolist(),
        "iterations": report.iterations,
        "objective_trace": report.objective_trace.tolist(),
        "config": _plain(report.config),
        "wall_time": report.wall_time,
        "seed": report.seed,
        "warnings": list(report.warnings),
        "mse_trace": None if report.mse_trace is None else report.mse_trace.tolist(),
        "extras": _plain(report.extras),
        "reduced_space": report.reduced_space,
    }
    with open(os.fspath(path), "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_report(path) -> SolverReport:
    with open(os.fspath(path)) as fh:
        payload = json.load(fh)
    mse_trace = payload.get("mse_trace")
    return SolverReport(
        method=payload["method"],
        a_final=np.asarray(payload["a_final"], dtype=float),
        iterations=int(payload["iterations"]),
        objective_trace=np.asarray(payload["objective_trace"], dtype=float),
        config=payload.get("config", {}),
        wall_time=float(payload.get("wall_time", 0.0)),
        seed=payload.get("seed"),
        warnings=list(payload.get("warnings", [])),
        mse_trace=None if mse_trace is None else np.asarray(mse_trace, dtype=float),
        extras=payload.get("extras", {}),
        reduced_space=bool(payload.get("reduced_space", False)),
    )

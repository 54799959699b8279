"""Task-profile parsing and expansion into concrete job traces.

Profiles are CSV rows ``task_id,type,n_ins,period_s,deadline_s,n_jobs`` with
type one of REAL (hard), CTRL (control) and SOFT.  REAL/CTRL expand into
strictly periodic jobs; SOFT arrivals follow a renewal process with
exponential inter-arrivals of mean ``period_s`` and exponentially distributed
work around ``n_ins``.

Traces are reproducible: generation uses numpy's PCG64 generator seeded
explicitly, and serialized traces carry the seed and generator name in a
header comment.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, ParseError

TASK_TYPES = ("REAL", "CTRL", "SOFT")
GENERATOR_NAME = "numpy-PCG64"

#: Soft relative deadlines: fixed at the profile value, or drawn uniformly on
#: [0, deadline].
SOFT_DEADLINE_POLICIES = ("fixed", "uniform")
PHASE_POLICIES = ("zero", "uniform-random")


@dataclass(frozen=True)
class TaskProfile:
    task_id: int
    kind: str  # REAL | CTRL | SOFT
    n_instructions: int
    period_s: float
    deadline_s: float
    n_jobs: int
    skip: int | None = 2  # CTRL only; ignored for other kinds

    def __post_init__(self):
        if self.kind not in TASK_TYPES:
            raise InvalidArgumentError(f"unknown task type {self.kind!r}")
        if self.n_instructions <= 0 or self.period_s <= 0 or self.deadline_s <= 0:
            raise InvalidArgumentError(
                f"task {self.task_id}: numeric fields must be positive"
            )
        if self.n_jobs <= 0:
            raise InvalidArgumentError(f"task {self.task_id}: n_jobs must be positive")


@dataclass(frozen=True)
class Job:
    task_id: int
    job_index: int
    arrival_s: float
    deadline_s: float  # absolute
    work_instructions: int


@dataclass(frozen=True)
class JobTrace:
    jobs: tuple[Job, ...]
    rng_seed: int
    horizon_s: float


def parse_workload(path: str | Path) -> list[TaskProfile]:
    """Read and validate a task-profile CSV."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _parse_workload_stream(fh)


def _parse_workload_stream(fh) -> list[TaskProfile]:
    reader = csv.reader(row for row in fh if not row.startswith("#"))
    header = next(reader, None)
    expected = ["task_id", "type", "n_ins", "period_s", "deadline_s", "n_jobs"]
    if header is None or [h.strip() for h in header] != expected:
        raise ParseError(f"expected header {','.join(expected)}", row=1)
    profiles: list[TaskProfile] = []
    seen: set[int] = set()
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, got {len(row)}", row=rownum)
        try:
            tid = int(row[0])
            kind = row[1].strip()
            n_ins = int(row[2])
            period = float(row[3])
            deadline = float(row[4])
            n_jobs = int(row[5])
        except ValueError as exc:
            raise ParseError(str(exc), row=rownum) from exc
        if kind not in TASK_TYPES:
            raise ParseError(f"unknown task type {kind!r}", row=rownum)
        if tid in seen:
            raise ParseError(f"duplicate task id {tid}", row=rownum)
        seen.add(tid)
        try:
            profiles.append(TaskProfile(tid, kind, n_ins, period, deadline, n_jobs))
        except InvalidArgumentError as exc:
            raise ParseError(str(exc), row=rownum) from exc
    return profiles


def hyperperiod_horizon(profiles: Sequence[TaskProfile], phases: dict[int, float] | None = None) -> float:
    """Simulation end time guaranteeing every generated job can resolve."""
    phases = phases or {}
    horizon = 0.0
    for p in profiles:
        phase = phases.get(p.task_id, 0.0)
        horizon = max(horizon, phase + p.n_jobs * p.period_s + p.deadline_s)
    return horizon


def generate_jobs(
    profiles: Sequence[TaskProfile],
    seed: int,
    phase_policy: str = "zero",
    soft_deadline_policy: str = "fixed",
) -> JobTrace:
    """Expand profiles into a concrete, reproducible job trace."""
    if phase_policy not in PHASE_POLICIES:
        raise InvalidArgumentError(f"unknown phase policy {phase_policy!r}")
    if soft_deadline_policy not in SOFT_DEADLINE_POLICIES:
        raise InvalidArgumentError(
            f"unknown soft deadline policy {soft_deadline_policy!r}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    jobs: list[Job] = []
    phases: dict[int, float] = {}
    for p in sorted(profiles, key=lambda q: q.task_id):
        if phase_policy == "zero":
            phase = 0.0
        else:
            phase = float(rng.uniform(0.0, p.period_s))
        phases[p.task_id] = phase
        if p.kind in ("REAL", "CTRL"):
            for j in range(p.n_jobs):
                arrival = phase + j * p.period_s
                jobs.append(
                    Job(p.task_id, j, arrival, arrival + p.deadline_s, p.n_instructions)
                )
        else:
            arrival = phase
            for j in range(p.n_jobs):
                arrival += float(rng.exponential(p.period_s))
                work = max(1, math.ceil(rng.exponential(p.n_instructions)))
                if soft_deadline_policy == "fixed":
                    rel_dl = p.deadline_s
                else:
                    rel_dl = float(rng.uniform(0.0, p.deadline_s))
                jobs.append(Job(p.task_id, j, arrival, arrival + rel_dl, work))
    jobs.sort(key=lambda j: (j.task_id, j.job_index))
    return JobTrace(tuple(jobs), seed, hyperperiod_horizon(profiles, phases))


# --- trace serialization ---------------------------------------------------


def serialize_trace(trace: JobTrace, path: str | Path) -> None:
    """Write a trace CSV; floats use repr so round-trips are field-exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(
            f"# seed={trace.rng_seed} generator={GENERATOR_NAME} "
            f"horizon_s={trace.horizon_s!r}\n"
        )
        fh.write("task_id,job_index,arrival_s,deadline_s,work_instructions\n")
        for j in trace.jobs:
            fh.write(
                f"{j.task_id},{j.job_index},{j.arrival_s!r},{j.deadline_s!r},"
                f"{j.work_instructions}\n"
            )


def parse_trace(path: str | Path) -> JobTrace:
    """Read a trace CSV written by :func:`serialize_trace`."""
    path = Path(path)
    seed = 0
    horizon = 0.0
    jobs: list[Job] = []
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ParseError("missing trace header comment", row=1)
        for token in first[1:].split():
            key, _, value = token.partition("=")
            if key == "seed":
                seed = int(value)
            elif key == "horizon_s":
                horizon = float(value)
        header = fh.readline().strip()
        if header != "task_id,job_index,arrival_s,deadline_s,work_instructions":
            raise ParseError("unexpected trace column header", row=2)
        for rownum, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError("expected 5 fields", row=rownum)
            jobs.append(
                Job(
                    int(parts[0]),
                    int(parts[1]),
                    float(parts[2]),
                    float(parts[3]),
                    int(parts[4]),
                )
            )
    return JobTrace(tuple(jobs), seed, horizon)

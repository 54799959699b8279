"""Allocation evaluation and the preemptive-EDF baseline.

An :class:`Allocation` fixes one DVFS mode per server and an integer
percentage share matrix routing each task's instructions to servers.  On a
busy server each hosted task receives a utilization proportional to its
instruction share (shares normalized so the server's utilizations sum to 1);
a subtask of a job therefore executes in ``CPI * n_share / (f * u)`` seconds
and a job completes when its slowest subtask does (fork-join).  Jobs of one
task run FIFO: a job may not start before its predecessor ends.

The penalty count ``lam`` aggregates soft lateness-constraint violations,
control-job aborts and (heavily weighted) hard misses; energy follows the
executed instruction counts only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import power as pw
from . import tasks as tk
from ._kernels import scan_jobs
from .errors import InvalidAllocationError, InvalidArgumentError
from .workload import JobTrace, TaskProfile, hyperperiod_horizon

HARD_MISS_WEIGHT = 10**6
ENERGY_UNIT_J = 95_600.0

KIND_TO_STATS = {"REAL": "hard", "CTRL": "control", "SOFT": "soft"}

DEFAULT_SOFT_CONSTRAINTS = (tk.LatenessConstraint(0.0, 0.1),)


@dataclass(frozen=True)
class ClusterHost:
    spec: pw.ServerSpec
    thermal: pw.ThermalState


@dataclass(frozen=True)
class Allocation:
    """Per-server mode index (1-based) plus the task x server share matrix."""

    dvfs: tuple[int, ...]
    shares: tuple[tuple[int, ...], ...]  # N rows, M columns, each row sums to 100


@dataclass(frozen=True)
class JobOutcome:
    task_id: int
    job_index: int
    start_s: float
    completion_s: float  # would-be completion (pre-abort)
    response_s: float
    overrun_s: float
    missed: bool
    aborted: bool


@dataclass(frozen=True)
class ServerOutcome:
    server_id: int
    mode_index: int
    busy_time_s: float
    utilization_sum: float
    executed_instructions: float
    dynamic_energy_j: float
    leakage_energy_j: float


@dataclass(frozen=True)
class EvaluationResult:
    lam: int
    energy_j: float
    energy_units: float
    per_job: tuple[JobOutcome, ...]
    per_server: tuple[ServerOutcome, ...]
    constraint_report: tuple[tk.ConstraintCheck, ...]
    hard_misses: int
    control_aborts: int
    soft_violations: int
    # task_id -> server indices the task runs on (nonzero shares / EDF host).
    task_servers: tuple[tuple[int, tuple[int, ...]], ...] = ()


def validate_allocation(
    alloc: Allocation,
    profiles: Sequence[TaskProfile],
    cluster: Sequence[ClusterHost],
) -> None:
    n, m = len(profiles), len(cluster)
    if len(alloc.dvfs) != m:
        raise InvalidAllocationError(f"expected {m} mode genes, got {len(alloc.dvfs)}")
    if len(alloc.shares) != n:
        raise InvalidAllocationError(f"expected {n} share rows, got {len(alloc.shares)}")
    for k, host in zip(alloc.dvfs, cluster):
        if not 1 <= k <= len(host.spec.modes):
            raise InvalidAllocationError(
                f"mode index {k} out of range for server {host.spec.server_id}"
            )
    ordered = sorted(profiles, key=lambda p: p.task_id)
    for p, row in zip(ordered, alloc.shares):
        if len(row) != m:
            raise InvalidAllocationError("share row length mismatch")
        if sum(row) != 100:
            raise InvalidAllocationError(
                f"task {p.task_id}: share row must sum to 100, got {sum(row)}"
            )
        if p.kind == "REAL" and sum(1 for s in row if s > 0) != 1:
            raise InvalidAllocationError(
                f"task {p.task_id}: REAL tasks must run on a single host"
            )


def _soft_constraints_for(
    profile: TaskProfile,
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None,
) -> tuple[tk.LatenessConstraint, ...]:
    if soft_constraints and profile.task_id in soft_constraints:
        return tuple(soft_constraints[profile.task_id])
    return DEFAULT_SOFT_CONSTRAINTS


def _assemble_result(
    profiles: Sequence[TaskProfile],
    outcomes: list[JobOutcome],
    servers: list[ServerOutcome],
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None,
    hard_miss_weight: int,
    energy_unit_j: float,
    task_servers: tuple[tuple[int, tuple[int, ...]], ...] = (),
) -> EvaluationResult:
    by_task: dict[int, list[JobOutcome]] = {p.task_id: [] for p in profiles}
    for o in outcomes:
        by_task[o.task_id].append(o)
    stats: dict[int, tk.TaskMissStats] = {}
    hard_misses = 0
    control_aborts = 0
    for p in profiles:
        rows = sorted(by_task[p.task_id], key=lambda o: o.job_index)
        kind = KIND_TO_STATS[p.kind]
        stats[p.task_id] = tk.TaskMissStats(
            task_id=p.task_id,
            kind=kind,
            overruns=tuple(o.overrun_s for o in rows),
            miss_pattern=tuple(o.missed for o in rows),
            skip=p.skip if p.kind == "CTRL" else None,
            soft_constraints=(
                _soft_constraints_for(p, soft_constraints) if p.kind == "SOFT" else ()
            ),
        )
        if p.kind == "REAL":
            hard_misses += sum(o.missed for o in rows)
        elif p.kind == "CTRL":
            control_aborts += sum(o.aborted for o in rows)
    report = list(tk.check_constraints(stats, [p.task_id for p in profiles]))
    for p in profiles:
        if p.kind == "CTRL":
            n_aborts = sum(o.aborted for o in by_task[p.task_id])
            report.append(
                tk.ConstraintCheck(p.task_id, "control aborts == 0", n_aborts == 0)
            )
    soft_ids = {p.task_id for p in profiles if p.kind == "SOFT"}
    soft_violations = sum(
        1 for c in report if c.task_id in soft_ids and not c.passed
    )
    lam = soft_violations + control_aborts + hard_miss_weight * hard_misses
    energy = float(sum(s.dynamic_energy_j + s.leakage_energy_j for s in servers))
    return EvaluationResult(
        lam=lam,
        energy_j=energy,
        energy_units=energy / energy_unit_j,
        per_job=tuple(outcomes),
        per_server=tuple(servers),
        constraint_report=tuple(report),
        hard_misses=hard_misses,
        control_aborts=control_aborts,
        soft_violations=soft_violations,
        task_servers=task_servers,
    )


@dataclass
class _TraceArrays:
    """Trace flattened to numpy arrays, reusable across many evaluations."""

    arrivals: np.ndarray
    deadlines: np.ndarray
    works: np.ndarray
    task_of_job: np.ndarray
    job_index: np.ndarray
    is_ctrl: np.ndarray
    task_ids: list[int]
    n_mean: np.ndarray


def trace_arrays(profiles: Sequence[TaskProfile], trace: JobTrace) -> _TraceArrays:
    ordered = sorted(profiles, key=lambda p: p.task_id)
    task_ids = [p.task_id for p in ordered]
    row_of = {tid: i for i, tid in enumerate(task_ids)}
    jobs = sorted(trace.jobs, key=lambda j: (j.task_id, j.job_index))
    return _TraceArrays(
        arrivals=np.array([j.arrival_s for j in jobs]),
        deadlines=np.array([j.deadline_s for j in jobs]),
        works=np.array([float(j.work_instructions) for j in jobs]),
        task_of_job=np.array([row_of[j.task_id] for j in jobs], dtype=np.int64),
        job_index=np.array([j.job_index for j in jobs], dtype=np.int64),
        is_ctrl=np.array([p.kind == "CTRL" for p in ordered]),
        task_ids=task_ids,
        n_mean=np.array([float(p.n_instructions) for p in ordered]),
    )


def _soft_constraint_list(
    profiles: Sequence[TaskProfile],
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None,
) -> list[tuple[int, tk.LatenessConstraint]]:
    out = []
    for i, p in enumerate(profiles):
        if p.kind == "SOFT":
            for c in _soft_constraints_for(p, soft_constraints):
                out.append((i, c))
    return out


def evaluate_objectives(
    cluster: Sequence[ClusterHost],
    profiles: Sequence[TaskProfile],
    trace: JobTrace,
    alloc: Allocation,
    *,
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None = None,
    hard_miss_weight: int = HARD_MISS_WEIGHT,
    dyn_energy_form: str = "as-written",
    energy_unit_j: float = ENERGY_UNIT_J,
    _arrays: _TraceArrays | None = None,
) -> tuple[int, float, float]:
    """Fast path for optimizer loops: ``(lambda, energy_J, energy_units)`` only.

    Same numbers as :func:`evaluate_allocation` without materializing per-job
    outcome records or the constraint report.
    """
    validate_allocation(alloc, profiles, cluster)
    ordered = sorted(profiles, key=lambda p: p.task_id)
    arr = _arrays if _arrays is not None else trace_arrays(profiles, trace)
    n = len(ordered)

    shares = np.array(alloc.shares, dtype=np.float64) / 100.0
    weights = shares * arr.n_mean[:, None]
    col = weights.sum(axis=0)
    busy = col > 0
    u = np.zeros_like(weights)
    u[:, busy] = weights[:, busy] / col[busy]

    freq = np.array(
        [host.spec.mode(k).frequency_hz for host, k in zip(cluster, alloc.dvfs)]
    )
    cpi = np.array([host.spec.cpi for host in cluster])
    with np.errstate(divide="ignore", invalid="ignore"):
        per_server = cpi[None, :] * shares / (freq[None, :] * u)
    per_server[shares == 0] = 0.0
    dur_coef = per_server.max(axis=1)

    completion = np.empty_like(arr.arrivals)
    end = np.empty_like(arr.arrivals)
    frac = np.empty_like(arr.arrivals)
    scan_jobs(
        arr.arrivals,
        arr.deadlines,
        arr.works,
        arr.task_of_job,
        dur_coef,
        arr.is_ctrl,
        completion,
        end,
        frac,
    )
    overrun = completion - arr.deadlines
    missed = overrun > 0
    is_real = np.array([p.kind == "REAL" for p in ordered])
    hard_misses = int(missed[is_real[arr.task_of_job]].sum())
    control_aborts = int(missed[arr.is_ctrl[arr.task_of_job]].sum())

    soft_violations = 0
    n_jobs_of = np.bincount(arr.task_of_job, minlength=n)
    for ti, c in _soft_constraint_list(ordered, soft_constraints):
        sel = arr.task_of_job == ti
        frac_late = float((overrun[sel] > c.x_s).sum()) / float(n_jobs_of[ti])
        if frac_late > c.beta:
            soft_violations += 1
    lam = soft_violations + control_aborts + hard_miss_weight * hard_misses

    executed = arr.works * frac
    exec_per_task = np.bincount(arr.task_of_job, weights=executed, minlength=n)
    exec_im = shares * exec_per_task[:, None]
    energy = 0.0
    for mi, host in enumerate(cluster):
        mode = host.spec.mode(alloc.dvfs[mi])
        n_exec = float(exec_im[:, mi].sum())
        if dyn_energy_form == "as-written":
            dyn_sum = float((u[:, mi] * exec_im[:, mi]).sum())
        else:
            dyn_sum = n_exec
        energy += (
            host.spec.a_dyn * mode.voltage_v**2 * host.spec.cpi * dyn_sum
        ) / pw.FREQ_NORM_HZ
        energy += pw.leakage_energy(host.spec, mode, host.thermal, n_exec)
    return lam, energy, energy / energy_unit_j


def evaluate_allocation(
    cluster: Sequence[ClusterHost],
    profiles: Sequence[TaskProfile],
    trace: JobTrace,
    alloc: Allocation,
    *,
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None = None,
    hard_miss_weight: int = HARD_MISS_WEIGHT,
    dyn_energy_form: str = "as-written",
    energy_unit_j: float = ENERGY_UNIT_J,
    _arrays: _TraceArrays | None = None,
) -> EvaluationResult:
    """Evaluate one allocation against a trace; pure function of its inputs."""
    validate_allocation(alloc, profiles, cluster)
    ordered = sorted(profiles, key=lambda p: p.task_id)
    arr = _arrays if _arrays is not None else trace_arrays(profiles, trace)
    n, m = len(ordered), len(cluster)

    shares = np.array(alloc.shares, dtype=np.float64) / 100.0
    weights = shares * arr.n_mean[:, None]
    col = weights.sum(axis=0)
    busy = col > 0
    u = np.zeros_like(weights)
    u[:, busy] = weights[:, busy] / col[busy]

    freq = np.array(
        [host.spec.mode(k).frequency_hz for host, k in zip(cluster, alloc.dvfs)]
    )
    cpi = np.array([host.spec.cpi for host in cluster])

    # Seconds per instruction of each task: slowest of its subtasks.
    with np.errstate(divide="ignore", invalid="ignore"):
        per_server = cpi[None, :] * shares / (freq[None, :] * u)
    per_server[shares == 0] = 0.0
    dur_coef = per_server.max(axis=1)

    completion = np.empty_like(arr.arrivals)
    end = np.empty_like(arr.arrivals)
    frac = np.empty_like(arr.arrivals)
    scan_jobs(
        arr.arrivals,
        arr.deadlines,
        arr.works,
        arr.task_of_job,
        dur_coef,
        arr.is_ctrl,
        completion,
        end,
        frac,
    )
    start = completion - arr.works * dur_coef[arr.task_of_job]
    overrun = completion - arr.deadlines
    missed = overrun > 0
    aborted = missed & arr.is_ctrl[arr.task_of_job]

    executed = arr.works * frac
    exec_per_task = np.bincount(arr.task_of_job, weights=executed, minlength=n)
    exec_im = shares * exec_per_task[:, None]

    servers: list[ServerOutcome] = []
    for mi, host in enumerate(cluster):
        mode = host.spec.mode(alloc.dvfs[mi])
        n_exec = float(exec_im[:, mi].sum())
        if dyn_energy_form == "as-written":
            dyn_sum = float((u[:, mi] * exec_im[:, mi]).sum())
        else:
            dyn_sum = n_exec
        dyn_e = (
            host.spec.a_dyn * mode.voltage_v**2 * host.spec.cpi * dyn_sum
        ) / pw.FREQ_NORM_HZ
        leak_e = pw.leakage_energy(host.spec, mode, host.thermal, n_exec)
        servers.append(
            ServerOutcome(
                server_id=host.spec.server_id,
                mode_index=alloc.dvfs[mi],
                busy_time_s=n_exec * host.spec.cpi / mode.frequency_hz,
                utilization_sum=float(u[:, mi].sum()),
                executed_instructions=n_exec,
                dynamic_energy_j=dyn_e,
                leakage_energy_j=leak_e,
            )
        )

    outcomes = [
        JobOutcome(
            task_id=arr.task_ids[arr.task_of_job[j]],
            job_index=int(arr.job_index[j]),
            start_s=float(start[j]),
            completion_s=float(completion[j]),
            response_s=float(completion[j] - arr.arrivals[j]),
            overrun_s=float(overrun[j]),
            missed=bool(missed[j]),
            aborted=bool(aborted[j]),
        )
        for j in range(len(arr.arrivals))
    ]
    task_servers = tuple(
        (p.task_id, tuple(int(mi) for mi in range(m) if alloc.shares[i][mi] > 0))
        for i, p in enumerate(ordered)
    )
    return _assemble_result(
        ordered,
        outcomes,
        servers,
        soft_constraints,
        hard_miss_weight,
        energy_unit_j,
        task_servers,
    )


# --- EDF baseline ----------------------------------------------------------


def _wfd_partition(
    profiles: Sequence[TaskProfile],
    cluster: Sequence[ClusterHost],
    mode_of: Sequence[int],
) -> list[int]:
    """Worst-fit decreasing by utilization; deterministic tie-break by task id."""
    ordered = sorted(profiles, key=lambda p: p.task_id)
    utils = []
    for p in ordered:
        # Placeholder utilization at each host's selected mode is host-specific;
        # rank by the first host's figure (homogeneous clusters) for ordering.
        utils.append(p.n_instructions / p.period_s)
    order = sorted(range(len(ordered)), key=lambda i: (-utils[i], ordered[i].task_id))
    load = [0.0] * len(cluster)
    host_of = [0] * len(ordered)
    for i in order:
        target = min(range(len(cluster)), key=lambda h: (load[h], h))
        host_of[i] = target
        spec = cluster[target].spec
        mode = spec.mode(mode_of[target])
        load[target] += (
            spec.cpi * ordered[i].n_instructions / mode.frequency_hz
        ) / ordered[i].period_s
    return host_of


def edf_schedule(
    cluster: Sequence[ClusterHost],
    profiles: Sequence[TaskProfile],
    trace: JobTrace,
    *,
    dvfs_policy: str = "max",
    soft_constraints: dict[int, tuple[tk.LatenessConstraint, ...]] | None = None,
    hard_miss_weight: int = HARD_MISS_WEIGHT,
    energy_unit_j: float = ENERGY_UNIT_J,
) -> EvaluationResult:
    """Single-queue-per-host preemptive EDF with a WFD task partition.

    Every host runs at the policy mode ("max" or "min").  Jobs of one task stay
    FIFO (a job becomes eligible when its predecessor ends); control jobs abort
    at their deadline.
    """
    if dvfs_policy not in ("max", "min"):
        raise InvalidArgumentError(f"unknown dvfs policy {dvfs_policy!r}")
    ordered = sorted(profiles, key=lambda p: p.task_id)
    mode_of = [
        len(h.spec.modes) if dvfs_policy == "max" else 1 for h in cluster
    ]
    host_of = _wfd_partition(ordered, cluster, mode_of)

    jobs_by_task: dict[int, list] = {p.task_id: [] for p in ordered}
    for j in sorted(trace.jobs, key=lambda j: (j.task_id, j.job_index)):
        jobs_by_task[j.task_id].append(j)

    outcomes: list[JobOutcome] = []
    servers: list[ServerOutcome] = []
    for h, host in enumerate(cluster):
        spec = host.spec
        mode = spec.mode(mode_of[h])
        rate = mode.frequency_hz / spec.cpi  # instructions per second
        local = [p for i, p in enumerate(ordered) if host_of[i] == h]
        executed_total = 0.0
        util_sum = 0.0
        for p in local:
            util_sum += (spec.cpi * p.n_instructions / mode.frequency_hz) / p.period_s
        outcomes_h, executed_total = _edf_host(
            local, jobs_by_task, rate
        )
        outcomes.extend(outcomes_h)
        dyn_e = (
            spec.a_dyn * mode.voltage_v**2 * spec.cpi * executed_total
        ) / pw.FREQ_NORM_HZ
        leak_e = pw.leakage_energy(spec, mode, host.thermal, executed_total)
        servers.append(
            ServerOutcome(
                server_id=spec.server_id,
                mode_index=mode_of[h],
                busy_time_s=executed_total / rate,
                utilization_sum=util_sum,
                executed_instructions=executed_total,
                dynamic_energy_j=dyn_e,
                leakage_energy_j=leak_e,
            )
        )
    task_servers = tuple(
        (p.task_id, (host_of[i],)) for i, p in enumerate(ordered)
    )
    return _assemble_result(
        ordered,
        outcomes,
        servers,
        soft_constraints,
        hard_miss_weight,
        energy_unit_j,
        task_servers,
    )


def _edf_host(
    local: Sequence[TaskProfile],
    jobs_by_task: dict[int, list],
    rate: float,
) -> tuple[list[JobOutcome], float]:
    """Event-driven preemptive EDF on one host at ``rate`` instructions/second."""
    ptr = {p.task_id: 0 for p in local}
    is_ctrl = {p.task_id: p.kind == "CTRL" for p in local}
    # eligible[tid] = earliest start of the task's next job
    eligible: dict[int, float] = {}
    for p in local:
        if jobs_by_task[p.task_id]:
            eligible[p.task_id] = jobs_by_task[p.task_id][0].arrival_s
    ready: list[tuple[float, float, int, float, object]] = []  # (dl, arr, tid, remaining, job)
    outcomes: list[JobOutcome] = []
    started: dict[tuple[int, int], float] = {}
    executed_total = 0.0
    t = 0.0
    while eligible or ready:
        if ready:
            ready.sort(key=lambda r: (r[0], r[1], r[2]))
            dl, arr, tid, remaining, job = ready[0]
            horizon = t + remaining
            next_elig = min(eligible.values()) if eligible else float("inf")
            cutoff = dl if (is_ctrl[tid] and dl < horizon) else float("inf")
            event = min(horizon, max(next_elig, t), cutoff)
            if event > t:
                ran_s = min(event - t, remaining)
                remaining_after = remaining - ran_s
                executed_total += ran_s * rate
                key = (tid, job.job_index)
                started.setdefault(key, t)
            else:
                remaining_after = remaining
            if event == horizon and event <= cutoff:
                # job completes
                completion = event
                overrun = completion - job.deadline_s
                outcomes.append(
                    JobOutcome(
                        task_id=tid,
                        job_index=job.job_index,
                        start_s=started.get((tid, job.job_index), t),
                        completion_s=completion,
                        response_s=completion - job.arrival_s,
                        overrun_s=overrun,
                        missed=overrun > 0,
                        aborted=False,
                    )
                )
                ready.pop(0)
                _advance(ptr, eligible, jobs_by_task, tid, completion)
            elif event == cutoff and cutoff < horizon:
                # control job aborts at its deadline; remaining work discarded
                would_be = event + remaining_after
                outcomes.append(
                    JobOutcome(
                        task_id=tid,
                        job_index=job.job_index,
                        start_s=started.get((tid, job.job_index), t),
                        completion_s=would_be,
                        response_s=would_be - job.arrival_s,
                        overrun_s=would_be - job.deadline_s,
                        missed=True,
                        aborted=True,
                    )
                )
                ready.pop(0)
                _advance(ptr, eligible, jobs_by_task, tid, event)
            else:
                ready[0] = (dl, arr, tid, remaining_after, job)
            t = max(t, event)
        else:
            t = max(t, min(eligible.values()))
        # admit all jobs eligible at time t
        for tid in list(eligible):
            if eligible[tid] <= t:
                job = jobs_by_task[tid][ptr[tid]]
                ready.append(
                    (job.deadline_s, job.arrival_s, tid, job.work_instructions / rate, job)
                )
                del eligible[tid]
    return outcomes, executed_total


def _advance(ptr, eligible, jobs_by_task, tid, now):
    ptr[tid] += 1
    if ptr[tid] < len(jobs_by_task[tid]):
        nxt = jobs_by_task[tid][ptr[tid]]
        eligible[tid] = max(nxt.arrival_s, now)


__all__ = [
    "Allocation",
    "ClusterHost",
    "EvaluationResult",
    "JobOutcome",
    "ServerOutcome",
    "HARD_MISS_WEIGHT",
    "ENERGY_UNIT_J",
    "evaluate_allocation",
    "edf_schedule",
    "hyperperiod_horizon",
    "validate_allocation",
    "trace_arrays",
]

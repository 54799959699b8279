"""JIT-compiled inner loops with a pure-python/numpy fallback.

Set ``GREENSCHED_NO_NUMBA=1`` in the environment to force the fallback path
(useful for debugging and as a baseline in ``bench/``).  Both paths compute
identical results; the FIFO job scan is sequential by construction (job j+1 of
a task may not start before job j ends), so it cannot be vectorized and is the
single hot loop of allocation evaluation.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("GREENSCHED_NO_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
)

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


def _scan_jobs_impl(
    arrivals,
    deadlines,
    works,
    task_of_job,
    dur_coef,
    is_ctrl,
    completion_out,
    end_out,
    frac_out,
):
    """FIFO scan over jobs of all tasks (jobs pre-sorted by task, job index).

    ``dur_coef[t]`` converts one instruction of task ``t`` into seconds under
    the current allocation.  Control jobs that would finish past their deadline
    abort there: the executed fraction is truncated and the successor may start
    at the deadline.
    """
    n_tasks = dur_coef.shape[0]
    prev_end = np.full(n_tasks, -np.inf)
    for j in range(arrivals.shape[0]):
        t = task_of_job[j]
        start = arrivals[j]
        if prev_end[t] > start:
            start = prev_end[t]
        duration = works[j] * dur_coef[t]
        completion = start + duration
        completion_out[j] = completion
        if is_ctrl[t] and completion > deadlines[j]:
            end = deadlines[j]
            if duration > 0.0:
                frac = (deadlines[j] - start) / duration
                if frac < 0.0:
                    frac = 0.0
            else:
                frac = 1.0
            frac_out[j] = frac
        else:
            end = completion
            frac_out[j] = 1.0
        end_out[j] = end
        prev_end[t] = end


if USE_NUMBA:
    scan_jobs = njit(cache=True)(_scan_jobs_impl)
else:
    scan_jobs = _scan_jobs_impl

#: The fallback implementation, always importable (benchmarks compare both).
scan_jobs_fallback = _scan_jobs_impl

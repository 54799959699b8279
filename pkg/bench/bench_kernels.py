"""Compare the compiled job-scan kernel against the pure-Python fallback.

Usage::

    python bench/bench_kernels.py [--jobs 20000] [--tasks 50] [--repeat 5]

Times ``scan_jobs`` (numba, unless GREENSCHED_NO_NUMBA=1 forced the fallback
at import time) and ``scan_jobs_fallback`` on an identical synthetic trace and
verifies both produce the same results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from greensched._kernels import USE_NUMBA, scan_jobs, scan_jobs_fallback


def make_trace(n_tasks: int, n_jobs: int, seed: int):
    rng = np.random.default_rng(seed)
    task_of_job = np.sort(rng.integers(0, n_tasks, size=n_jobs))
    arrivals = np.empty(n_jobs)
    for t in range(n_tasks):
        sel = task_of_job == t
        arrivals[sel] = np.cumsum(rng.exponential(1.0, size=int(sel.sum())))
    deadlines = arrivals + rng.uniform(0.5, 2.0, size=n_jobs)
    works = rng.integers(10**6, 10**8, size=n_jobs).astype(np.float64)
    dur_coef = rng.uniform(1e-9, 2e-8, size=n_tasks)
    is_ctrl = rng.random(n_tasks) < 0.3
    return arrivals, deadlines, works, task_of_job, dur_coef, is_ctrl


def run(fn, args, n_jobs, repeat):
    completion = np.empty(n_jobs)
    end = np.empty(n_jobs)
    frac = np.empty(n_jobs)
    fn(*args, completion, end, frac)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, completion, end, frac)
        best = min(best, time.perf_counter() - t0)
    return best, (completion.copy(), end.copy(), frac.copy())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=20000)
    ap.add_argument("--tasks", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    trace = make_trace(args.tasks, args.jobs, args.seed)
    t_main, out_main = run(scan_jobs, trace, args.jobs, args.repeat)
    t_fb, out_fb = run(scan_jobs_fallback, trace, args.jobs, args.repeat)

    for a, b, name in zip(out_main, out_fb, ("completion", "end", "frac")):
        if not np.allclose(a, b, rtol=1e-12, atol=0.0):
            raise SystemExit(f"kernel mismatch in {name}")

    label = "numba" if USE_NUMBA else "fallback (GREENSCHED_NO_NUMBA set)"
    print(f"jobs={args.jobs} tasks={args.tasks} repeat={args.repeat}")
    print(f"scan_jobs [{label}]: {t_main * 1e3:.3f} ms")
    print(f"scan_jobs_fallback : {t_fb * 1e3:.3f} ms")
    if USE_NUMBA and t_main > 0:
        print(f"speedup: {t_fb / t_main:.1f}x")
    print("outputs identical: yes")


if __name__ == "__main__":
    main()

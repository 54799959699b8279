"""NSGA-II over (mode, share) chromosomes, minimizing [penalty, (1+penalty)*energy].

A chromosome is an integer vector of length M + N*M: the first M genes pick a
DVFS mode per server, the remaining N*M genes are share percentages in
[0, 100].  Decoding repairs rather than rejects: rows are normalized to sum
100, zero rows route everything to the lowest-id server, and rows of
single-host (REAL) tasks keep only their largest entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sim
from .errors import ConfigurationError, InvalidArgumentError
from .tasks import LatenessConstraint
from .workload import JobTrace, TaskProfile

POLICIES = ("MIN", "MAX", "VAR")


@dataclass(frozen=True)
class ObjectiveVector:
    lam: int
    scaled_energy_j: float  # (1 + lam) * total energy

    def astuple(self) -> tuple[float, float]:
        return (self.lam, self.scaled_energy_j)


@dataclass(frozen=True)
class FrontPoint:
    genes: tuple[int, ...]
    objectives: ObjectiveVector
    allocation: sim.Allocation
    energy_j: float
    energy_units: float


@dataclass(frozen=True)
class EvolveConfig:
    population: int = 100
    generations: int = 25_000
    seed: int = 0
    policy: str = "VAR"
    crossover_prob: float = 0.9
    stop_window: int = 500  # stop after the archive has held a lam=0 point this long
    max_mode_index: int | None = None
    share_step: int = 1  # share genes move in multiples of this (must divide 100)
    dyn_energy_form: str = "as-written"
    energy_unit_j: float = sim.ENERGY_UNIT_J
    hard_miss_weight: int = sim.HARD_MISS_WEIGHT

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigurationError(f"unknown policy {self.policy!r}")
        if self.population < 2:
            raise ConfigurationError("population must be >= 2")
        if 100 % self.share_step != 0:
            raise ConfigurationError("share_step must divide 100")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Minimization dominance on (lam, scaled energy)."""
    return (
        a.lam <= b.lam
        and a.scaled_energy_j <= b.scaled_energy_j
        and (a.lam < b.lam or a.scaled_energy_j < b.scaled_energy_j)
    )


def nondominated_sort(points: Sequence[ObjectiveVector]) -> list[int]:
    """Rank per point: 0 = non-dominated, r = non-dominated after removing < r."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    n_dominators = [0] * n
    for p in range(n):
        for q in range(p + 1, n):
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
                n_dominators[q] += 1
            elif dominates(points[q], points[p]):
                dominated_by[q].append(p)
                n_dominators[p] += 1
    ranks = [0] * n
    current = [i for i in range(n) if n_dominators[i] == 0]
    r = 0
    while current:
        nxt: list[int] = []
        for p in current:
            ranks[p] = r
            for q in dominated_by[p]:
                n_dominators[q] -= 1
                if n_dominators[q] == 0:
                    nxt.append(q)
        current = nxt
        r += 1
    return ranks


def crowding_distance(front: Sequence[ObjectiveVector]) -> list[float]:
    """Normalized cuboid-perimeter crowding; boundary points get +inf."""
    n = len(front)
    if n == 0:
        raise InvalidArgumentError("crowding distance of an empty front")
    dist = [0.0] * n
    for key in (lambda p: p.lam, lambda p: p.scaled_energy_j):
        order = sorted(range(n), key=lambda i: key(front[i]))
        lo, hi = key(front[order[0]]), key(front[order[-1]])
        dist[order[0]] = dist[order[-1]] = float("inf")
        span = hi - lo
        if span == 0:
            continue  # degenerate objective contributes nothing
        for j in range(1, n - 1):
            dist[order[j]] += (key(front[order[j + 1]]) - key(front[order[j - 1]])) / span
    return dist


def decode(
    genes: Sequence[int],
    profiles: Sequence[TaskProfile],
    cluster: Sequence[sim.ClusterHost],
) -> sim.Allocation:
    """Repairing decode of a gene vector into a valid allocation."""
    ordered = sorted(profiles, key=lambda p: p.task_id)
    n, m = len(ordered), len(cluster)
    modes = tuple(int(g) for g in genes[:m])
    shares: list[tuple[int, ...]] = []
    for i, p in enumerate(ordered):
        row = [int(g) for g in genes[m + i * m : m + (i + 1) * m]]
        if p.kind == "REAL":
            best = max(range(m), key=lambda j: (row[j], -j))
            row = [100 if j == best else 0 for j in range(m)]
        else:
            total = sum(row)
            if total == 0:
                row = [100 if j == 0 else 0 for j in range(m)]
            elif total != 100:
                scaled = [r * 100 / total for r in row]
                floored = [int(x) for x in scaled]
                rem = 100 - sum(floored)
                # largest-remainder rounding, ties to lower server index
                order = sorted(
                    range(m), key=lambda j: (-(scaled[j] - floored[j]), j)
                )
                for j in order[:rem]:
                    floored[j] += 1
                row = floored
        shares.append(tuple(row))
    return sim.Allocation(dvfs=modes, shares=tuple(shares))


@dataclass
class GeneBounds:
    low: np.ndarray  # inclusive
    high: np.ndarray  # inclusive
    frozen: np.ndarray  # bool; frozen genes keep their low value


def gene_bounds(
    profiles: Sequence[TaskProfile],
    cluster: Sequence[sim.ClusterHost],
    config: EvolveConfig,
) -> GeneBounds:
    n, m = len(profiles), len(cluster)
    low = np.zeros(m + n * m, dtype=np.int64)
    high = np.zeros(m + n * m, dtype=np.int64)
    frozen = np.zeros(m + n * m, dtype=bool)
    for j, host in enumerate(cluster):
        k = len(host.spec.modes)
        if config.max_mode_index is not None:
            k = min(k, config.max_mode_index)
        if config.policy == "MIN":
            low[j] = high[j] = 1
            frozen[j] = True
        elif config.policy == "MAX":
            low[j] = high[j] = k
            frozen[j] = True
        else:
            low[j], high[j] = 1, k
    high[m:] = 100 // config.share_step
    return GeneBounds(low, high, frozen)


def single_point_crossover(
    a: np.ndarray, b: np.ndarray, rng: np.random.Generator, prob: float
) -> tuple[np.ndarray, np.ndarray]:
    """One cut uniform over the L+1 gene boundaries, applied with ``prob``."""
    if rng.random() >= prob:
        return a.copy(), b.copy()
    cut = int(rng.integers(0, a.shape[0] + 1))
    c1 = np.concatenate([a[:cut], b[cut:]])
    c2 = np.concatenate([b[:cut], a[cut:]])
    return c1, c2


def integer_flip_mutation(
    genes: np.ndarray, bounds: GeneBounds, rng: np.random.Generator, prob: float
) -> np.ndarray:
    """Each gene independently redrawn uniformly in-bounds with ``prob``."""
    out = genes.copy()
    flip = rng.random(genes.shape[0]) < prob
    flip &= ~bounds.frozen
    idx = np.nonzero(flip)[0]
    for j in idx:
        out[j] = rng.integers(bounds.low[j], bounds.high[j] + 1)
    return out


def tournament_select(
    rng: np.random.Generator,
    ranks: Sequence[int],
    crowding: Sequence[float],
) -> int:
    """Binary tournament on (rank, -crowding)."""
    i, j = int(rng.integers(len(ranks))), int(rng.integers(len(ranks)))
    ki = (ranks[i], -crowding[i])
    kj = (ranks[j], -crowding[j])
    return i if ki <= kj else j


@dataclass
class EvolveResult:
    front: list[FrontPoint]
    convergence: list[tuple[int, int, float]]  # (generation, best lam, best energy J)
    generations_run: int


class _Archive:
    """Non-dominated archive; objective-duplicate points keep the
    lexicographically smallest gene vector."""

    def __init__(self):
        self.points: list[FrontPoint] = []

    def offer(self, cand: FrontPoint) -> None:
        kept: list[FrontPoint] = []
        for p in self.points:
            if dominates(p.objectives, cand.objectives):
                return
            if p.objectives.astuple() == cand.objectives.astuple():
                if p.genes <= cand.genes:
                    return
                continue  # candidate's genes are smaller; drop the incumbent
            if not dominates(cand.objectives, p.objectives):
                kept.append(p)
        kept.append(cand)
        self.points = kept


def evolve(
    cluster: Sequence[sim.ClusterHost],
    profiles: Sequence[TaskProfile],
    trace: JobTrace,
    config: EvolveConfig,
    *,
    soft_constraints: dict[int, tuple[LatenessConstraint, ...]] | None = None,
    progress: Callable[[int, int, float], None] | None = None,
) -> EvolveResult:
    """Run the generational loop; deterministic given (inputs, config, seed)."""
    if not cluster:
        raise ConfigurationError("empty cluster")
    if not profiles:
        raise ConfigurationError("empty profile list")
    ordered = sorted(profiles, key=lambda p: p.task_id)
    bounds = gene_bounds(ordered, cluster, config)
    n_vars = bounds.low.shape[0]
    mut_prob = 1.0 / n_vars
    rng = np.random.Generator(np.random.PCG64(config.seed))
    arrays = sim.trace_arrays(ordered, trace)

    cache: dict[tuple[int, ...], tuple[ObjectiveVector, float, float]] = {}

    def fitness(genes: np.ndarray) -> tuple[ObjectiveVector, float, float]:
        key = tuple(int(g) for g in genes)
        hit = cache.get(key)
        if hit is not None:
            return hit
        alloc = decode(
            genes * _share_scale(config, genes, len(cluster)), ordered, cluster
        )
        lam, energy_j, energy_u = sim.evaluate_objectives(
            cluster,
            ordered,
            trace,
            alloc,
            soft_constraints=soft_constraints,
            hard_miss_weight=config.hard_miss_weight,
            dyn_energy_form=config.dyn_energy_form,
            energy_unit_j=config.energy_unit_j,
            _arrays=arrays,
        )
        obj = ObjectiveVector(lam, (1 + lam) * energy_j)
        out = (obj, energy_j, energy_u)
        cache[key] = out
        return out

    n_servers = len(cluster)

    def random_chromosome() -> np.ndarray:
        genes = np.array(
            [rng.integers(bounds.low[j], bounds.high[j] + 1) for j in range(n_vars)],
            dtype=np.int64,
        )
        # Share rows start one-hot (each task on a single random server) so the
        # initial population samples whole-server placements; uniform rows would
        # start every task smeared across ~half the cluster.
        for t in range(len(ordered)):
            row = n_servers + t * n_servers
            free = [
                j
                for j in range(row, row + n_servers)
                if bounds.high[j] > bounds.low[j]
            ]
            if not free:
                continue
            genes[row : row + n_servers] = bounds.low[row : row + n_servers]
            pick = free[int(rng.integers(len(free)))]
            genes[pick] = bounds.high[pick]
        return genes

    pop = [random_chromosome() for _ in range(config.population)]
    evals = [fitness(g) for g in pop]

    archive = _Archive()
    for g, (obj, e_j, e_u) in zip(pop, evals):
        archive.offer(_front_point(g, obj, e_j, e_u, config, ordered, cluster))

    convergence: list[tuple[int, int, float]] = []
    lam0_since: int | None = None
    gen = 0
    for gen in range(1, config.generations + 1):
        objs = [e[0] for e in evals]
        ranks = nondominated_sort(objs)
        crowd = _crowding_by_rank(objs, ranks)

        offspring: list[np.ndarray] = []
        while len(offspring) < config.population:
            pa = pop[tournament_select(rng, ranks, crowd)]
            pb = pop[tournament_select(rng, ranks, crowd)]
            c1, c2 = single_point_crossover(pa, pb, rng, config.crossover_prob)
            offspring.append(integer_flip_mutation(c1, bounds, rng, mut_prob))
            if len(offspring) < config.population:
                offspring.append(integer_flip_mutation(c2, bounds, rng, mut_prob))
        off_evals = [fitness(g) for g in offspring]
        for g, (obj, e_j, e_u) in zip(offspring, off_evals):
            archive.offer(_front_point(g, obj, e_j, e_u, config, ordered, cluster))

        combined = pop + offspring
        combined_evals = evals + off_evals
        sel = _environmental_selection(
            [e[0] for e in combined_evals], config.population
        )
        pop = [combined[i] for i in sel]
        evals = [combined_evals[i] for i in sel]

        best = min(archive.points, key=lambda p: (p.objectives.lam, p.energy_j))
        convergence.append((gen, best.objectives.lam, best.energy_j))
        if progress is not None:
            progress(gen, best.objectives.lam, best.energy_j)

        if best.objectives.lam == 0:
            if lam0_since is None:
                lam0_since = gen
            elif gen - lam0_since >= config.stop_window:
                break
        else:
            lam0_since = None

    front = sorted(
        archive.points, key=lambda p: (p.objectives.lam, p.objectives.scaled_energy_j)
    )
    return EvolveResult(front=front, convergence=convergence, generations_run=gen)


def _share_scale(config: EvolveConfig, genes: np.ndarray, m: int) -> np.ndarray:
    if config.share_step == 1:
        return np.ones_like(genes)
    scale = np.ones_like(genes)
    scale[m:] = config.share_step
    return scale


def _front_point(genes, obj, e_j, e_u, config, ordered, cluster) -> FrontPoint:
    scaled = genes * _share_scale(config, genes, len(cluster))
    return FrontPoint(
        genes=tuple(int(g) for g in scaled),
        objectives=obj,
        allocation=decode(scaled, ordered, cluster),
        energy_j=e_j,
        energy_units=e_u,
    )


def _crowding_by_rank(objs: Sequence[ObjectiveVector], ranks: Sequence[int]) -> list[float]:
    crowd = [0.0] * len(objs)
    for r in set(ranks):
        idx = [i for i, rr in enumerate(ranks) if rr == r]
        dist = crowding_distance([objs[i] for i in idx])
        for i, d in zip(idx, dist):
            crowd[i] = d
    return crowd


def _environmental_selection(objs: Sequence[ObjectiveVector], k: int) -> list[int]:
    """NSGA-II survivor selection: fill by rank, break the last front by crowding."""
    ranks = nondominated_sort(objs)
    by_rank: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        by_rank.setdefault(r, []).append(i)
    chosen: list[int] = []
    for r in sorted(by_rank):
        members = by_rank[r]
        if len(chosen) + len(members) <= k:
            chosen.extend(members)
        else:
            dist = crowding_distance([objs[i] for i in members])
            order = sorted(
                range(len(members)), key=lambda j: (-dist[j], members[j])
            )
            chosen.extend(members[j] for j in order[: k - len(chosen)])
            break
    return chosen

"""Optimizer internals: sorting, crowding, decoding, operators, small fronts."""

import itertools

import numpy as np
import pytest

from conftest import make_spec
from greensched.errors import ConfigurationError, InvalidArgumentError
from greensched.nsga import (
    EvolveConfig,
    GeneBounds,
    ObjectiveVector,
    _Archive,
    FrontPoint,
    crowding_distance,
    decode,
    dominates,
    evolve,
    gene_bounds,
    integer_flip_mutation,
    nondominated_sort,
    single_point_crossover,
    tournament_select,
)
from greensched.power import DvfsMode, ThermalState
from greensched.sim import Allocation, ClusterHost, evaluate_objectives
from greensched.workload import Job, JobTrace, TaskProfile


def obj(lam, e):
    return ObjectiveVector(lam, e)


class TestDominates:
    def test_strict_and_equal_cases(self):
        assert dominates(obj(0, 1.0), obj(0, 2.0))
        assert dominates(obj(0, 2.0), obj(1, 2.0))
        assert not dominates(obj(0, 2.0), obj(0, 2.0))
        assert not dominates(obj(0, 3.0), obj(1, 2.0))


class TestNondominatedSort:
    def brute_ranks(self, points):
        remaining = set(range(len(points)))
        ranks = [0] * len(points)
        r = 0
        while remaining:
            front = {
                p
                for p in remaining
                if not any(dominates(points[q], points[p]) for q in remaining)
            }
            for p in front:
                ranks[p] = r
            remaining -= front
            r += 1
        return ranks

    def test_matches_brute_force_on_random_sets(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 51))
            points = [
                obj(int(rng.integers(0, 4)), float(rng.integers(0, 10)))
                for _ in range(n)
            ]
            assert nondominated_sort(points) == self.brute_ranks(points)

    def test_single_front(self):
        pts = [obj(0, 3.0), obj(1, 2.0), obj(2, 1.0)]
        assert nondominated_sort(pts) == [0, 0, 0]

    def test_chain(self):
        pts = [obj(0, 1.0), obj(0, 2.0), obj(0, 3.0)]
        assert nondominated_sort(pts) == [0, 1, 2]


class TestCrowdingDistance:
    def test_boundaries_infinite(self):
        pts = [obj(0, 1.0), obj(1, 0.5), obj(2, 0.0)]
        d = crowding_distance(pts)
        assert d[0] == float("inf") and d[2] == float("inf")

    def test_three_collinear_middle_distance(self):
        # spans are 2 and 1.0; middle point: (2-0)/2 + (1.0-0)/1.0 = 2.0
        pts = [obj(0, 1.0), obj(1, 0.5), obj(2, 0.0)]
        d = crowding_distance(pts)
        assert d[1] == pytest.approx(2.0, abs=1e-12)

    def test_four_points_hand_values(self):
        # lam span 3, energy span 6
        pts = [obj(0, 6.0), obj(1, 3.0), obj(2, 1.0), obj(3, 0.0)]
        d = crowding_distance(pts)
        assert d[1] == pytest.approx((2 - 0) / 3 + (6 - 1) / 6, abs=1e-12)
        assert d[2] == pytest.approx((3 - 1) / 3 + (3 - 0) / 6, abs=1e-12)

    def test_degenerate_span_ignored(self):
        pts = [obj(0, 1.0), obj(0, 1.0), obj(0, 1.0)]
        d = crowding_distance(pts)
        assert d[0] == float("inf")

    def test_empty_front_rejected(self):
        with pytest.raises(InvalidArgumentError):
            crowding_distance([])


def two_host_cluster(n_modes=2):
    modes = tuple(DvfsMode(i + 1, 1e9 * (1 + i), 0.85 + 0.25 * i) for i in range(n_modes))
    th = ThermalState((300.0,), 300.0)
    return [
        ClusterHost(make_spec(server_id=0, modes=modes), th),
        ClusterHost(make_spec(server_id=1, modes=modes), th),
    ]


class TestDecode:
    def setup_method(self):
        self.cluster = two_host_cluster()
        self.profiles = [
            TaskProfile(0, "SOFT", 10**8, 1.0, 1.0, 2),
            TaskProfile(1, "REAL", 10**8, 1.0, 1.0, 2),
        ]

    def test_normalization_to_100(self):
        alloc = decode([1, 1, 30, 90, 0, 100], self.profiles, self.cluster)
        assert alloc.shares[0] == (25, 75)

    def test_balanced_row_unchanged(self):
        alloc = decode([1, 1, 50, 50, 100, 0], self.profiles, self.cluster)
        assert alloc.shares[0] == (50, 50)

    def test_zero_row_routes_to_first_server(self):
        alloc = decode([1, 1, 0, 0, 0, 0], self.profiles, self.cluster)
        assert alloc.shares[0] == (100, 0)
        assert alloc.shares[1] == (100, 0)

    def test_real_task_collapses_to_largest_share(self):
        alloc = decode([1, 2, 50, 50, 20, 80], self.profiles, self.cluster)
        assert alloc.shares[1] == (0, 100)
        assert alloc.dvfs == (1, 2)

    def test_largest_remainder_rounding(self):
        cluster = two_host_cluster() + [
            ClusterHost(
                make_spec(
                    server_id=2,
                    modes=(DvfsMode(1, 1e9, 0.85), DvfsMode(2, 2e9, 1.1)),
                ),
                ThermalState((300.0,), 300.0),
            )
        ]
        profiles = [TaskProfile(0, "SOFT", 10**8, 1.0, 1.0, 2)]
        alloc = decode([1, 1, 1, 33, 33, 33], profiles, cluster)
        assert sum(alloc.shares[0]) == 100
        assert alloc.shares[0] == (34, 33, 33)


class TestGeneBounds:
    def setup_method(self):
        self.cluster = two_host_cluster(n_modes=3)
        self.profiles = [TaskProfile(0, "SOFT", 10**8, 1.0, 1.0, 2)]

    def test_var_policy_frees_modes(self):
        b = gene_bounds(self.profiles, self.cluster, EvolveConfig(policy="VAR"))
        assert list(b.low[:2]) == [1, 1]
        assert list(b.high[:2]) == [3, 3]
        assert not b.frozen[:2].any()

    def test_min_max_policies_freeze_modes(self):
        bmin = gene_bounds(self.profiles, self.cluster, EvolveConfig(policy="MIN"))
        assert list(bmin.low[:2]) == [1, 1] and bmin.frozen[:2].all()
        bmax = gene_bounds(self.profiles, self.cluster, EvolveConfig(policy="MAX"))
        assert list(bmax.low[:2]) == [3, 3] and bmax.frozen[:2].all()

    def test_mode_cap(self):
        b = gene_bounds(
            self.profiles, self.cluster, EvolveConfig(policy="VAR", max_mode_index=2)
        )
        assert list(b.high[:2]) == [2, 2]

    def test_share_step_rescales_gene_range(self):
        b = gene_bounds(
            self.profiles, self.cluster, EvolveConfig(policy="VAR", share_step=25)
        )
        assert list(b.high[2:]) == [4, 4]

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            EvolveConfig(policy="median")
        with pytest.raises(ConfigurationError):
            EvolveConfig(share_step=30)
        with pytest.raises(ConfigurationError):
            EvolveConfig(population=1)


class TestOperators:
    def test_crossover_swaps_tails(self):
        rng = np.random.default_rng(0)
        a = np.array([1, 1, 1, 1], dtype=np.int64)
        b = np.array([2, 2, 2, 2], dtype=np.int64)
        seen = set()
        for _ in range(100):
            c1, c2 = single_point_crossover(a, b, rng, prob=1.0)
            assert (np.sort(np.concatenate([c1, c2])) == [1, 1, 1, 1, 2, 2, 2, 2]).all()
            seen.add(tuple(c1))
        assert len(seen) > 1  #multiple cut positions exercised

    def test_crossover_skipped_below_probability(self):
        rng = np.random.default_rng(0)
        a = np.array([1, 2, 3], dtype=np.int64)
        b = np.array([4, 5, 6], dtype=np.int64)
        c1, c2 = single_point_crossover(a, b, rng, prob=0.0)
        assert (c1 == a).all() and (c2 == b).all()

    def test_mutation_respects_bounds_and_frozen(self):
        rng = np.random.default_rng(1)
        bounds = GeneBounds(
            low=np.array([1, 0, 0]),
            high=np.array([1, 5, 5]),
            frozen=np.array([True, False, False]),
        )
        genes = np.array([1, 3, 3], dtype=np.int64)
        for _ in range(200):
            out = integer_flip_mutation(genes, bounds, rng, prob=1.0)
            assert out[0] == 1
            assert 0 <= out[1] <= 5 and 0 <= out[2] <= 5

    def test_mutation_rate_close_to_probability(self):
        rng = np.random.default_rng(2)
        n = 1000
        bounds = GeneBounds(
            low=np.zeros(n, dtype=np.int64),
            high=np.full(n, 100, dtype=np.int64),
            frozen=np.zeros(n, dtype=bool),
        )
        genes = np.full(n, 50, dtype=np.int64)
        changed = 0
        trials = 50
        for _ in range(trials):
            out = integer_flip_mutation(genes, bounds, rng, prob=0.1)
            changed += int((out != genes).sum())
        # each flip redraws uniformly, so ~1% of redraws keep the old value
        rate = changed / (trials * n)
        assert 0.07 <= rate <= 0.13

    def test_tournament_prefers_lower_rank(self):
        rng = np.random.default_rng(3)
        ranks = [0, 5]
        crowding = [1.0, 1.0]
        wins = sum(tournament_select(rng, ranks, crowding) == 0 for _ in range(200))
        assert wins >= 140  # index 0 wins every mixed tournament


class TestArchive:
    def fp(self, lam, e, genes):
        return FrontPoint(
            genes=tuple(genes),
            objectives=obj(lam, e),
            allocation=Allocation(dvfs=(1,), shares=((100,),)),
            energy_j=e,
            energy_units=e,
        )

    def test_dominated_candidates_rejected(self):
        a = _Archive()
        a.offer(self.fp(0, 1.0, [1]))
        a.offer(self.fp(0, 2.0, [2]))
        assert len(a.points) == 1

    def test_dominating_candidate_replaces(self):
        a = _Archive()
        a.offer(self.fp(1, 2.0, [1]))
        a.offer(self.fp(0, 1.0, [2]))
        assert len(a.points) == 1
        assert a.points[0].objectives.lam == 0

    def test_objective_ties_keep_lexicographically_smallest_genes(self):
        a = _Archive()
        a.offer(self.fp(0, 1.0, [5, 5]))
        a.offer(self.fp(0, 1.0, [3, 9]))
        assert len(a.points) == 1
        assert a.points[0].genes == (3, 9)
        a.offer(self.fp(0, 1.0, [4, 0]))
        assert a.points[0].genes == (3, 9)


class TestSmallInstanceOptimality:
    def test_front_matches_exhaustive_enumeration(self):
        cluster = two_host_cluster(n_modes=2)
        profiles = [
            TaskProfile(0, "SOFT", 2 * 10**8, 1.0, 0.6, 8),
            TaskProfile(1, "SOFT", 10**8, 1.0, 0.4, 8),
        ]
        jobs = []
        for p in profiles:
            for j in range(p.n_jobs):
                t = j * p.period_s
                jobs.append(Job(p.task_id, j, t, t + p.deadline_s, p.n_instructions))
        trace = JobTrace(tuple(jobs), 0, max(j.deadline_s for j in jobs) + 1)

        # exhaustive enumeration over the share_step=100 discretization
        rows = [(100, 0), (0, 100), (50, 50)]
        best: list[tuple[int, float]] = []
        for dvfs in itertools.product((1, 2), repeat=2):
            for r0 in rows:
                for r1 in rows:
                    alloc = Allocation(dvfs=dvfs, shares=(r0, r1))
                    lam, e_j, _ = evaluate_objectives(cluster, profiles, trace, alloc)
                    best.append((lam, (1 + lam) * e_j))
        expect = {
            p
            for p in best
            if not any(
                (q[0] <= p[0] and q[1] <= p[1] and q != p) for q in best
            )
        }

        cfg = EvolveConfig(
            population=20, generations=300, seed=0, policy="VAR", share_step=100,
            stop_window=300,
        )
        result = evolve(cluster, profiles, trace, cfg)
        got = {(p.objectives.lam, p.objectives.scaled_energy_j) for p in result.front}
        assert got == expect


class TestEvolveBasics:
    def test_empty_inputs_rejected(self):
        cfg = EvolveConfig(population=4, generations=1)
        with pytest.raises(ConfigurationError):
            evolve([], [TaskProfile(0, "SOFT", 1, 1.0, 1.0, 1)], JobTrace((), 0, 1.0), cfg)
        with pytest.raises(ConfigurationError):
            evolve(two_host_cluster(), [], JobTrace((), 0, 1.0), cfg)

    def test_deterministic_given_seed(self):
        cluster = two_host_cluster()
        profiles = [TaskProfile(0, "SOFT", 10**8, 1.0, 1.0, 4)]
        jobs = [Job(0, j, j * 1.0, j * 1.0 + 1.0, 10**8) for j in range(4)]
        trace = JobTrace(tuple(jobs), 0, 6.0)
        cfg = EvolveConfig(population=8, generations=20, seed=9, stop_window=20)
        r1 = evolve(cluster, profiles, trace, cfg)
        r2 = evolve(cluster, profiles, trace, cfg)
        assert [(p.genes, p.objectives) for p in r1.front] == [
            (p.genes, p.objectives) for p in r2.front
        ]
        assert r1.convergence == r2.convergence

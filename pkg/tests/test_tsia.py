import csv
import io
import math

import numpy as np
import pytest

from hflopt.errors import InvalidInputError
from hflopt.scenario import Assignment, generate_scenario, geo_initial_assignment
from hflopt.sroa import SolverConfig, sroa
from hflopt.tsia import TRACE_COLUMNS, costly_economic_servers, costly_economic_users, tsia
from oracles import is_partition


@pytest.fixture(scope="module")
def small_run():
    sc = generate_scenario(3, 12, 3)
    return sc, tsia(sc)


class TestServers:
    def test_argmax_and_argmin(self):
        assert costly_economic_servers([5, 1, 3], [True] * 3) == (0, 1)

    def test_all_equal_is_no_move(self):
        assert costly_economic_servers([2, 2, 2], [True] * 3) is None

    def test_everyone_on_one_edge_moves_to_the_empty_one(self):
        assert costly_economic_servers([7.0, 0.0], [True, False]) == (0, 1)

    def test_empty_edges_never_costly(self):
        assert costly_economic_servers([9.0, 4.0, 1.0], [False, True, True]) == (1, 2)

    def test_no_busy_edge(self):
        assert costly_economic_servers([0.0, 0.0], [False, False]) is None

    def test_ties_go_to_lowest_index(self):
        assert costly_economic_servers([3, 3, 1, 1], [True] * 4) == (0, 2)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            costly_economic_servers([1, 2], [True])


class TestUsers:
    def test_largest_and_smallest_bandwidth(self):
        b = np.zeros(8)
        b[3], b[7] = 5.0, 2.0
        assert costly_economic_users(b, [3, 7]) == (3, 7)

    def test_singleton(self):
        assert costly_economic_users([1.0, 2.0], [1]) == (1, 1)

    def test_ties_go_to_lowest_index(self):
        assert costly_economic_users([4.0, 4.0, 4.0], [2, 0, 1]) == (0, 0)

    def test_empty_group(self):
        with pytest.raises(InvalidInputError):
            costly_economic_users([1.0], [])


class TestTsia:
    def test_never_worse_than_geo(self, small_run):
        sc, res = small_run
        geo = sroa(sc, geo_initial_assignment(sc))
        assert res.objective <= geo.objective

    def test_best_matches_trace_minimum(self, small_run):
        _, res = small_run
        assert res.objective == min(r.objective for r in res.trace.rows)
        assert all(res.objective <= r.objective for r in res.trace.rows)

    def test_result_is_its_own_sroa(self, small_run):
        sc, res = small_run
        assert sroa(sc, res.assignment).objective == res.objective

    def test_trace_invariants(self, small_run):
        sc, res = small_run
        rows = res.trace.rows
        assert [r.q for r in rows] == list(range(len(rows)))
        for prev, row in zip(rows, rows[1:]):
            assert is_partition(row.assignment.groups, sc.n_users)
            assert row.best_objective <= prev.best_objective or row.user is None
            if row.user is None:
                continue  # stage-2 restart row
            moved = np.flatnonzero(prev.assignment.labels() != row.assignment.labels())
            assert moved.tolist() == [row.user]
            assert prev.assignment.edge_of(row.user) == row.m_plus
            assert row.assignment.edge_of(row.user) == row.m_minus
            sizes_before = [len(g) for g in prev.assignment.groups]
            sizes_after = [len(g) for g in row.assignment.groups]
            assert sizes_after[row.m_plus] == sizes_before[row.m_plus] - 1
            assert sizes_after[row.m_minus] == sizes_before[row.m_minus] + 1

    def test_stages_end_by_repeat(self, small_run):
        _, res = small_run
        assert res.converged_by == ["pattern-repeat", "pattern-repeat"]
        assert [r.stage for r in res.trace.rows].count(2) == res.stage_iterations[1] + 1

    def test_deterministic(self, small_run):
        sc, res = small_run
        again = tsia(sc)
        assert again.trace.to_csv() == res.trace.to_csv()
        assert again.to_dict() == res.to_dict()

    def test_trace_csv(self, small_run):
        _, res = small_run
        rows = list(csv.DictReader(io.StringIO(res.trace.to_csv())))
        assert list(rows[0]) == TRACE_COLUMNS
        assert rows[0]["user"] == ""
        assert float(rows[-1]["R_star"]) == res.objective

    def test_single_edge_returns_geo(self):
        sc = generate_scenario(1, 5, 1)
        res = tsia(sc)
        assert res.assignment == geo_initial_assignment(sc)
        assert len(res.trace) == 1

    def test_iteration_cap(self):
        sc = generate_scenario(3, 12, 3)
        res = tsia(sc, max_iters=1)
        assert res.stage_iterations == [1, 1]
        assert set(res.converged_by) <= {"iteration-cap", "pattern-repeat"}

    def test_initial_assignment_is_used(self):
        sc = generate_scenario(4, 6, 2)
        start = Assignment(((0, 1, 2, 3, 4, 5), ()))
        res = tsia(sc, initial=start)
        assert res.trace.rows[0].assignment == start
        assert res.trace.rows[1].m_minus == 1

    def test_infeasible_patterns_score_inf(self):
        sc = generate_scenario(2, 4, 2)
        cfg = SolverConfig(t_bounds_policy="explicit", t_low=0.0, t_up=1e-9)
        res = tsia(sc, cfg)
        assert not res.feasible
        assert math.isinf(res.objective)
        assert res.converged_by == ["infeasible", "infeasible"]

    def test_rejects_negative_cap(self):
        with pytest.raises(InvalidInputError):
            tsia(generate_scenario(1, 3, 2), max_iters=-1)

"""Two-stage user-assignment search with the resource solver in the loop.

Both stages repeatedly move one user from the *costly* edge (largest weighted
cost ``R_m`` among edges that still serve someone) to the *economic* edge
(smallest ``R_m`` over all edges) and re-solve the allocation. Stage 1 moves
the user holding the most bandwidth on the costly edge; stage 2 restarts from
the best pattern found so far and moves the user holding the least. A stage
ends as soon as it revisits a pattern it has already seen.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cost import Allocation
from .errors import InvalidInputError
from .scenario import Assignment, Scenario, assignment_to_dict, geo_initial_assignment
from .sroa import SolverConfig, SroaResult, sroa

TRACE_COLUMNS = ["q", "stage", "m_plus", "m_minus", "user", "R", "R_star"]


def costly_economic_servers(edge_r, nonempty) -> tuple[int, int] | None:
    """``(m_plus, m_minus)``, or ``None`` when there is no useful move.

    ``m_plus`` is the argmax of ``edge_r`` over edges flagged in ``nonempty``,
    ``m_minus`` the argmin over all edges, ties to the lowest index.
    """
    edge_r = np.asarray(edge_r, dtype=float)
    nonempty = np.asarray(nonempty, dtype=bool)
    if edge_r.shape != nonempty.shape or edge_r.ndim != 1:
        raise InvalidInputError("edge costs and occupancy flags must be 1-D and aligned")
    if not nonempty.any():
        return None
    m_plus = int(np.argmax(np.where(nonempty, edge_r, -np.inf)))
    m_minus = int(np.argmin(edge_r))
    if m_plus == m_minus:
        return None
    return m_plus, m_minus


def costly_economic_users(b, group) -> tuple[int, int]:
    """Users with the largest and smallest bandwidth in ``group`` (lowest id on ties)."""
    members = sorted(int(n) for n in group)
    if not members:
        raise InvalidInputError("costly/economic users need a non-empty group")
    bw = np.asarray(b, dtype=float)[members]
    return members[int(np.argmax(bw))], members[int(np.argmin(bw))]


@dataclass(frozen=True)
class TraceRow:
    q: int
    stage: int
    assignment: Assignment
    objective: float
    best_objective: float
    user: int | None = None
    m_plus: int | None = None
    m_minus: int | None = None


@dataclass
class TsiaTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.q, r.stage,
                "" if r.m_plus is None else r.m_plus,
                "" if r.m_minus is None else r.m_minus,
                "" if r.user is None else r.user,
                repr(r.objective), repr(r.best_objective),
            ])
        return buf.getvalue()


@dataclass
class TsiaResult:
    assignment: Assignment
    objective: float
    result: SroaResult
    trace: TsiaTrace
    converged_by: list[str]
    stage_iterations: list[int]
    evaluations: int

    @property
    def allocation(self) -> Allocation | None:
        return self.result.allocation

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.objective)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "objective": self.objective if self.feasible else None,
            "assignment": assignment_to_dict(self.assignment),
            "converged_by": list(self.converged_by),
            "stage_iterations": list(self.stage_iterations),
            "evaluations": self.evaluations,
            "sroa": self.result.to_dict(),
        }


def _score(res: SroaResult) -> float:
    return res.objective if res.feasible else math.inf


def tsia(scenario: Scenario, cfg: SolverConfig | None = None, max_iters: int = 500,
         initial: Assignment | None = None) -> TsiaResult:
    """Search user-to-edge assignments, solving the allocation after every move.

    ``max_iters`` caps the moves per stage. Every stage reports why it
    stopped: ``"pattern-repeat"``, ``"iteration-cap"``, ``"no-move"`` (the
    costly and economic edges coincide) or ``"infeasible"`` (the allocation
    solver found no feasible point, so no costs are available to pick the
    next move). Infeasible patterns score ``+inf``.
    """
    cfg = cfg or SolverConfig()
    if max_iters < 0:
        raise InvalidInputError("max_iters must be non-negative")
    start = initial or geo_initial_assignment(scenario)
    start.validate(scenario.n_users, scenario.n_edges)

    cache: dict[tuple, SroaResult] = {}

    def evaluate(psi: Assignment) -> SroaResult:
        key = psi.key()
        if key not in cache:
            cache[key] = sroa(scenario, psi, cfg)
        return cache[key]

    trace = TsiaTrace()
    res = evaluate(start)
    best = (_score(res), start, res)
    q = 0
    trace.rows.append(TraceRow(q, 1, start, _score(res), best[0]))
    if scenario.n_edges == 1:
        return TsiaResult(start, best[0], res, trace, [], [], len(cache))

    reasons: list[str] = []
    counts: list[int] = []
    for stage in (1, 2):
        psi = start if stage == 1 else best[1]
        res = evaluate(psi)
        if stage == 2:
            q += 1
            trace.rows.append(TraceRow(q, 2, psi, _score(res), best[0]))
        seen = {psi.key()}
        moves = 0
        reason = "iteration-cap"
        while moves < max_iters:
            if not res.feasible:
                reason = "infeasible"
                break
            nonempty = [len(g) > 0 for g in psi.groups]
            pair = costly_economic_servers(res.report.edge_r, nonempty)
            if pair is None:
                reason = "no-move"
                break
            m_plus, m_minus = pair
            n_plus, n_minus = costly_economic_users(res.allocation.b, psi.groups[m_plus])
            user = n_plus if stage == 1 else n_minus
            psi = psi.move(user, m_plus, m_minus)
            res = evaluate(psi)
            moves += 1
            q += 1
            score = _score(res)
            if score < best[0]:
                best = (score, psi, res)
            trace.rows.append(TraceRow(q, stage, psi, score, best[0], user, m_plus, m_minus))
            if psi.key() in seen:
                reason = "pattern-repeat"
                break
            seen.add(psi.key())
        reasons.append(reason)
        counts.append(moves)

    score, psi, res = best
    return TsiaResult(psi, score, res, trace, reasons, counts, len(cache))

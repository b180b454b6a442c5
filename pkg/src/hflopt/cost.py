"""Energy and latency accounting for one HFL training run.

Per edge iteration a user computes for ``L`` local steps and then uploads its
model over an FDMA slice; each edge repeats this ``K`` times before pushing its
model to the cloud, and the whole thing repeats for ``I`` global iterations.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRateError, InfiniteDelayError, InvalidInputError
from .scenario import Assignment, Scenario


def local_cost(cycles, samples, f, local_iters, capacitance_coeff):
    """Computation delay and energy of ``local_iters`` passes over ``samples``.

    Returns ``(T_cmp, E_cmp)`` with ``T = L c D / f`` and ``E = (a/2) L f^2 c D``.
    Works element-wise on arrays.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise InvalidInputError("CPU frequency must be non-negative")
    if np.any(f == 0):
        raise InfiniteDelayError("zero CPU frequency never finishes local training")
    work = local_iters * np.asarray(cycles, dtype=float) * np.asarray(samples, dtype=float)
    t = work / f
    e = 0.5 * capacitance_coeff * f**2 * work
    return _scalarize(t), _scalarize(e)


def tx_rate(b, p, g, noise_density):
    """Shannon rate ``b log2(1 + g p / (N0 b))`` of an FDMA slice, in bit/s."""
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(b <= 0):
        raise InvalidInputError("bandwidth must be positive")
    if np.any(p < 0):
        raise InvalidInputError("transmit power must be non-negative")
    return _scalarize(b * np.log2(1.0 + np.asarray(g) * p / (noise_density * b)))


def comm_cost(model_size, rate, p):
    """Upload delay ``s / r`` and energy ``p s / r``."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        raise InfeasibleRateError("upload rate must be positive")
    t = np.asarray(model_size, dtype=float) / rate
    return _scalarize(t), _scalarize(np.asarray(p, dtype=float) * t)


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class Allocation:
    b: np.ndarray
    f: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("b", "f", "p"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.b.shape == self.f.shape == self.p.shape) or self.b.ndim != 1:
            raise InvalidInputError("b, f and p must be 1-D arrays of equal length")

    def edge_bandwidth(self, assignment: Assignment) -> np.ndarray:
        return np.array([self.b[list(g)].sum() if g else 0.0 for g in assignment.groups])

    def violations(self, scenario: Scenario, rtol: float = 1e-6) -> list[str]:
        """Describe every broken resource constraint (empty list when feasible)."""
        out = []
        if np.any(self.b <= 0):
            out.append("non-positive bandwidth")
        if np.any(self.f < 0) or np.any(self.f > scenario.f_max):
            out.append("CPU frequency outside [0, f_max]")
        if np.any(self.p < 0) or np.any(self.p > scenario.p_max):
            out.append("transmit power outside [0, p_max]")
        budget = scenario.params.total_bandwidth
        if self.b.sum() > budget * (1 + rtol):
            out.append(f"bandwidth sum {self.b.sum():.6g} exceeds budget {budget:.6g}")
        return out

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "f": self.f.tolist(), "p": self.p.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "Allocation":
        return cls(np.array(doc["b"]), np.array(doc["f"]), np.array(doc["p"]))


@dataclass(frozen=True)
class CostReport:
    """Everything ``total_cost`` computes. Per-edge values are per global iteration."""

    t_cmp: np.ndarray
    e_cmp: np.ndarray
    t_com: np.ndarray
    e_com: np.ndarray
    edge_t: np.ndarray
    edge_e: np.ndarray
    edge_t_cloud: np.ndarray
    edge_e_cloud: np.ndarray
    edge_r: np.ndarray
    t_round: float
    e_round: float
    t_sum: float
    e_sum: float
    objective: float

    def to_dict(self) -> dict:
        return {
            "users": {
                "t_cmp": self.t_cmp.tolist(),
                "e_cmp": self.e_cmp.tolist(),
                "t_com": self.t_com.tolist(),
                "e_com": self.e_com.tolist(),
            },
            "edges": {
                "t_edge": self.edge_t.tolist(),
                "e_edge": self.edge_e.tolist(),
                "t_cloud": self.edge_t_cloud.tolist(),
                "e_cloud": self.edge_e_cloud.tolist(),
                "r_edge": self.edge_r.tolist(),
            },
            "t_round": self.t_round,
            "e_round": self.e_round,
            "t_sum": self.t_sum,
            "e_sum": self.e_sum,
            "objective": self.objective,
        }


def _user_terms(scenario: Scenario, assignment: Assignment, allocation: Allocation):
    prm = scenario.params
    labels = assignment.labels(scenario.n_users)
    if np.any(labels < 0):
        raise InvalidInputError("assignment leaves some users unassigned")
    h = scenario.gains[np.arange(scenario.n_users), labels]
    t_cmp, e_cmp = local_cost(
        scenario.cycles, scenario.samples, allocation.f, prm.local_iters, prm.capacitance_coeff
    )
    rate = tx_rate(allocation.b, allocation.p, h, prm.noise_density)
    t_com, e_com = comm_cost(prm.model_size, rate, allocation.p)
    return (np.atleast_1d(t_cmp), np.atleast_1d(e_cmp), np.atleast_1d(t_com), np.atleast_1d(e_com))


def edge_round_cost(scenario: Scenario, assignment: Assignment, allocation: Allocation, m: int):
    """``(T_m, E_m)`` of edge ``m`` over its ``K`` edge iterations; empty edge -> (0, 0)."""
    group = list(assignment.groups[m])
    if not group:
        return 0.0, 0.0
    prm = scenario.params
    h = scenario.gains[group, m]
    t_cmp, e_cmp = local_cost(
        scenario.cycles[group], scenario.samples[group], allocation.f[group],
        prm.local_iters, prm.capacitance_coeff,
    )
    rate = tx_rate(allocation.b[group], allocation.p[group], h, prm.noise_density)
    t_com, e_com = comm_cost(prm.model_size, rate, allocation.p[group])
    k = prm.edge_iters
    return float(k * np.max(t_cmp + t_com)), float(k * np.sum(e_cmp + e_com))


def total_cost(scenario: Scenario, assignment: Assignment, allocation: Allocation) -> CostReport:
    """Evaluate ``R = E_sum + lambda T_sum`` and its breakdown.

    Edges without users upload nothing to the cloud and cost nothing.
    """
    prm = scenario.params
    t_cmp, e_cmp, t_com, e_com = _user_terms(scenario, assignment, allocation)
    per_user_t = t_cmp + t_com
    per_user_e = e_cmp + e_com

    n_edges = scenario.n_edges
    edge_t = np.zeros(n_edges)
    edge_e = np.zeros(n_edges)
    busy = np.zeros(n_edges, dtype=bool)
    for m, group in enumerate(assignment.groups):
        if group:
            idx = list(group)
            busy[m] = True
            edge_t[m] = prm.edge_iters * per_user_t[idx].max()
            edge_e[m] = prm.edge_iters * per_user_e[idx].sum()
    t_cloud = np.where(busy, scenario.cloud_delay, 0.0)
    e_cloud = np.where(busy, scenario.cloud_energy, 0.0)
    lam = prm.importance_weight
    edge_r = (e_cloud + edge_e) + lam * (t_cloud + edge_t)

    t_round = float(np.max(t_cloud + edge_t))
    e_round = float(np.sum(e_cloud + edge_e))
    t_sum = prm.global_iters * t_round
    e_sum = prm.global_iters * e_round
    return CostReport(
        t_cmp=t_cmp, e_cmp=e_cmp, t_com=t_com, e_com=e_com,
        edge_t=edge_t, edge_e=edge_e, edge_t_cloud=t_cloud, edge_e_cloud=e_cloud,
        edge_r=edge_r, t_round=t_round, e_round=e_round,
        t_sum=t_sum, e_sum=e_sum, objective=e_sum + lam * t_sum,
    )


COST_CSV_COLUMNS = [
    "kind", "id", "edge", "b", "f", "p",
    "t_cmp", "e_cmp", "t_com", "e_com",
    "t_edge", "e_edge", "t_cloud", "e_cloud", "r_edge",
    "t_sum", "e_sum", "objective",
]


def cost_report_csv(report: CostReport, assignment: Assignment, allocation: Allocation) -> str:
    """One row per user, one per edge and a final totals row."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COST_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    labels = assignment.labels(len(allocation.b))
    for n in range(len(allocation.b)):
        writer.writerow({
            "kind": "user", "id": n, "edge": int(labels[n]),
            "b": repr(float(allocation.b[n])), "f": repr(float(allocation.f[n])),
            "p": repr(float(allocation.p[n])),
            "t_cmp": repr(float(report.t_cmp[n])), "e_cmp": repr(float(report.e_cmp[n])),
            "t_com": repr(float(report.t_com[n])), "e_com": repr(float(report.e_com[n])),
        })
    bw = allocation.edge_bandwidth(assignment)
    for m in range(len(report.edge_t)):
        writer.writerow({
            "kind": "edge", "id": m, "b": repr(float(bw[m])),
            "t_edge": repr(float(report.edge_t[m])), "e_edge": repr(float(report.edge_e[m])),
            "t_cloud": repr(float(report.edge_t_cloud[m])),
            "e_cloud": repr(float(report.edge_e_cloud[m])),
            "r_edge": repr(float(report.edge_r[m])),
        })
    writer.writerow({
        "kind": "total", "b": repr(float(allocation.b.sum())),
        "t_sum": repr(report.t_sum), "e_sum": repr(report.e_sum),
        "objective": repr(report.objective),
    })
    return buf.getvalue()

"""Hierarchical federated averaging on small synthetic models.

Users run full-batch gradient descent on their own least-squares (or
logistic) task, edges average their users' models every ``L`` local steps
for ``K`` rounds, and the cloud averages the edge models once per global
iteration. Only the aggregation semantics are of interest here.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergenceError, InvalidInputError
from .scenario import Assignment

TASK_KINDS = ("least_squares", "logistic")
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class SyntheticTask:
    """One user's local data. Logistic targets are in ``{0, 1}``."""

    X: np.ndarray
    y: np.ndarray
    lr: float
    kind: str = "least_squares"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise InvalidInputError(f"unknown task kind {self.kind!r}")
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise InvalidInputError("X must be (D, d) and y must have D rows")
        if not self.lr > 0:
            raise InvalidInputError("learning rate must be positive")

    @property
    def samples(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def loss(self, w) -> float:
        z = self.X @ w
        if self.kind == "least_squares":
            r = z - self.y
            return float(r @ r) / (2 * self.samples)
        sign = 2.0 * self.y - 1.0
        return float(np.mean(np.logaddexp(0.0, -sign * z)))

    def grad(self, w) -> np.ndarray:
        z = self.X @ w
        if self.kind == "least_squares":
            return self.X.T @ (z - self.y) / self.samples
        # d/dz log(1 + e^-z) = sigmoid(z) - 1; tanh form avoids overflow
        prob = 0.5 * (1.0 + np.tanh(0.5 * z))
        return self.X.T @ (prob - self.y) / self.samples


def make_tasks(seed: int, samples: Sequence[int], dim: int = 8, kind: str = "least_squares",
               lr: float = 0.1, noise: float = 0.1) -> list[SyntheticTask]:
    """Tasks sharing one ground-truth model, one per entry of ``samples``."""
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    w_true = rng.normal(size=dim)
    tasks = []
    for d in samples:
        X = rng.normal(size=(int(d), dim))
        z = X @ w_true + noise * rng.normal(size=int(d))
        y = z if kind == "least_squares" else (z > 0).astype(float)
        tasks.append(SyntheticTask(X, y, lr, kind))
    return tasks


def least_squares_optimum(tasks: Sequence[SyntheticTask]) -> np.ndarray:
    """Minimiser of the pooled least-squares loss (what every scheme should approach)."""
    X = np.vstack([t.X for t in tasks])
    y = np.concatenate([t.y for t in tasks])
    return np.linalg.lstsq(X, y, rcond=None)[0]


def local_update(w, task: SyntheticTask, local_iters: int) -> np.ndarray:
    """``local_iters`` full-batch gradient steps from ``w``."""
    w = np.array(w, dtype=float)
    if w.shape != (task.dim,):
        raise InvalidInputError(f"weight vector has shape {w.shape}, task expects ({task.dim},)")
    limit = DIVERGENCE_FACTOR * max(float(np.linalg.norm(w)), 1.0)
    for _ in range(local_iters):
        w = w - task.lr * task.grad(w)
        norm = float(np.linalg.norm(w))
        if not np.isfinite(norm) or norm > limit:
            raise DivergenceError(f"local model norm reached {norm:.3g}; learning rate too large?")
    return w


def _weighted_average(weights, sizes) -> np.ndarray:
    if len(weights) == 0:
        raise InvalidInputError("nothing to aggregate")
    if len(weights) != len(sizes):
        raise InvalidInputError("need one size per weight vector")
    shapes = {np.shape(w) for w in weights}
    if len(shapes) != 1 or len(next(iter(shapes))) != 1:
        raise InvalidInputError("weight vectors must be 1-D with matching dimension")
    stack = np.asarray(weights, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes < 0) or not sizes.sum() > 0:
        raise InvalidInputError("sizes must be non-negative with a positive total")
    return sizes @ stack / sizes.sum()


def edge_aggregate(weights, sizes) -> np.ndarray:
    """Sample-weighted average of the user models of one edge."""
    return _weighted_average(weights, sizes)


def global_aggregate(edge_weights, group_sizes) -> np.ndarray:
    """Average of edge models weighted by the number of samples behind each."""
    return _weighted_average(edge_weights, group_sizes)


def global_loss(w, tasks: Sequence[SyntheticTask]) -> float:
    """Sample-weighted mean of the user losses, i.e. the loss on the pooled data."""
    sizes = np.array([t.samples for t in tasks], dtype=float)
    return float(sizes @ np.array([t.loss(w) for t in tasks]) / sizes.sum())


@dataclass
class HFLRun:
    losses: np.ndarray  # after each global aggregation
    weights: np.ndarray

    def to_csv(self) -> str:
        return loss_csv(self.losses)


def loss_csv(losses) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["global_iter", "loss"])
    for i, v in enumerate(losses, start=1):
        writer.writerow([i, repr(float(v))])
    return buf.getvalue()


def run_hfl(tasks: Sequence[SyntheticTask], assignment: Assignment, global_iters: int,
            edge_iters: int, local_iters: int, w0=None) -> HFLRun:
    """Hierarchical training: local steps, edge averages, then one cloud average per round."""
    assignment.validate(len(tasks))
    if min(global_iters, edge_iters, local_iters) < 1:
        raise InvalidInputError("I, K and L must all be >= 1")
    dim = tasks[0].dim
    w = np.zeros(dim) if w0 is None else np.array(w0, dtype=float)
    groups = [list(g) for g in assignment.groups if g]
    group_sizes = [sum(tasks[n].samples for n in g) for g in groups]
    losses = np.empty(global_iters)
    for i in range(global_iters):
        edge_models = []
        for g in groups:
            w_edge = w
            for _ in range(edge_iters):
                local = [local_update(w_edge, tasks[n], local_iters) for n in g]
                w_edge = edge_aggregate(local, [tasks[n].samples for n in g])
            edge_models.append(w_edge)
        w = global_aggregate(edge_models, group_sizes)
        losses[i] = global_loss(w, tasks)
    return HFLRun(losses, w)


def run_fedavg(tasks: Sequence[SyntheticTask], rounds: int, local_iters: int, w0=None) -> HFLRun:
    """Flat two-tier FedAvg over all users, the reference for the hierarchy."""
    if min(rounds, local_iters) < 1:
        raise InvalidInputError("rounds and local_iters must be >= 1")
    w = np.zeros(tasks[0].dim) if w0 is None else np.array(w0, dtype=float)
    sizes = [t.samples for t in tasks]
    losses = np.empty(rounds)
    for i in range(rounds):
        w = _weighted_average([local_update(w, t, local_iters) for t in tasks], sizes)
        losses[i] = global_loss(w, tasks)
    return HFLRun(losses, w)

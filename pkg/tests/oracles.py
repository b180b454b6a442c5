"""Independent reference computations used by the tests.

Nothing here calls into the solver; only plain formulas, loops and scipy.
"""

import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import lambertw


def cost_by_hand(scenario, assignment, b, f, p):
    """Objective, energy and delay from the textbook formulas, one user at a time."""
    prm = scenario.params
    per_round_t = 0.0
    per_round_e = 0.0
    for m, group in enumerate(assignment.groups):
        if not group:
            continue
        edge = scenario.edges[m]
        slowest = 0.0
        energy = 0.0
        for n in group:
            u = scenario.users[n]
            cycles = prm.local_iters * u.cycles_per_sample * u.samples
            t_cmp = cycles / f[n]
            e_cmp = prm.capacitance_coeff / 2 * f[n] ** 2 * cycles
            snr = scenario.gains[n][m] * p[n] / (prm.noise_density * b[n])
            rate = b[n] * math.log2(1 + snr)
            t_com = prm.model_size / rate
            slowest = max(slowest, t_cmp + t_com)
            energy += e_cmp + p[n] * t_com
        t_cloud = prm.model_size / edge.cloud_rate
        per_round_t = max(per_round_t, t_cloud + prm.edge_iters * slowest)
        per_round_e += edge.cloud_power * t_cloud + prm.edge_iters * energy
    e_sum = prm.global_iters * per_round_e
    t_sum = prm.global_iters * per_round_t
    return e_sum + prm.importance_weight * t_sum, e_sum, t_sum


def bandwidth_for_rate(rate, G):
    """Smallest ``b`` with ``b log2(1 + G/b) = rate`` via the lower Lambert-W branch.

    With ``c = rate ln2 / G`` and ``v = 1 + G/b``: ``ln v = c (v - 1)``, whose
    non-trivial root is ``v = -W_{-1}(-c e^-c) / c``.
    """
    c = rate * math.log(2) / G
    v = -lambertw(-c * math.exp(-c), k=-1).real / c
    return G / (v - 1)


def single_user_grid(scenario, n=200):
    """Best objective of a one-user, one-edge scenario over an ``n^3`` grid of (f, p, b)."""
    prm = scenario.params
    u = scenario.users[0]
    g = scenario.gains[0, 0]
    work = prm.local_iters * u.cycles_per_sample * u.samples
    p = np.linspace(u.p_max / n, u.p_max, n)[:, None]
    b = np.linspace(prm.total_bandwidth / n, prm.total_bandwidth, n)[None, :]
    t_com = prm.model_size / (b * np.log2(1 + g * p / (prm.noise_density * b)))
    e_com = p * t_com
    t_cloud = scenario.cloud_delay[0]
    e_cloud = scenario.cloud_energy[0]
    best = np.inf
    for f in np.linspace(u.f_max / n, u.f_max, n):
        t = t_cloud + prm.edge_iters * (work / f + t_com)
        e = e_cloud + prm.edge_iters * (0.5 * prm.capacitance_coeff * f**2 * work + e_com)
        best = min(best, float(np.min(prm.global_iters * (e + prm.importance_weight * t))))
    return best


def two_user_oracle(scenario, n=11, refine=8):
    """Two users on one edge: coarse 6-D grid, then Nelder-Mead from the best cells.

    Coordinates live in the unit box: ``f1, f2, p1, p2`` as fractions of their
    maxima, ``b1 = u B`` and ``b2 = w (B - b1)``, so every point respects the budget.
    """
    prm = scenario.params
    work = prm.local_iters * scenario.cycles * scenario.samples
    g = scenario.gains[:, 0]
    B = prm.total_bandwidth

    def objective(x):
        x = np.clip(x, 1e-9, 1.0)
        f = x[..., 0:2] * scenario.f_max
        p = x[..., 2:4] * scenario.p_max
        b1 = x[..., 4] * B
        b = np.stack([b1, (B - b1) * x[..., 5]], -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = b * np.log2(1 + g * p / (prm.noise_density * b))
            t_user = work / f + prm.model_size / rate
            e_user = 0.5 * prm.capacitance_coeff * f**2 * work + p * prm.model_size / rate
        t = scenario.cloud_delay[0] + prm.edge_iters * t_user.max(-1)
        e = scenario.cloud_energy[0] + prm.edge_iters * e_user.sum(-1)
        r = prm.global_iters * (e + prm.importance_weight * t)
        return np.where(np.isfinite(r), r, np.inf)

    axis = np.linspace(0.05, 1.0, n)
    grid = np.stack(np.meshgrid(*[axis] * 6, indexing="ij"), -1).reshape(-1, 6)
    values = objective(grid)
    best = np.inf
    for i in np.argsort(values)[:refine]:
        res = minimize(
            lambda x: float(objective(x[None])[0]), grid[i], method="Nelder-Mead",
            options=dict(xatol=1e-7, fatol=1e-9, maxiter=20000, maxfev=20000, adaptive=True),
        )
        best = min(best, res.fun)
    return best


def is_partition(groups, n_users):
    seen = [0] * n_users
    for g in groups:
        for n in g:
            if not 0 <= n < n_users:
                return False
            seen[n] += 1
    return all(c == 1 for c in seen)


def gradient_descent_by_hand(w, X, y, lr, steps):
    """Least-squares gradient descent written out element by element."""
    w = [float(v) for v in w]
    D, d = len(X), len(w)
    for _ in range(steps):
        resid = [sum(X[i][j] * w[j] for j in range(d)) - y[i] for i in range(D)]
        grad = [sum(X[i][j] * resid[i] for i in range(D)) / D for j in range(d)]
        w = [w[j] - lr * grad[j] for j in range(d)]
    return np.array(w)

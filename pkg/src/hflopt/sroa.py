"""Joint bandwidth / CPU frequency / transmit power allocation for a fixed assignment.

The problem is solved through an auxiliary deadline ``t`` on every user's
end-to-end delay over the whole run; :func:`sroa` searches ``t``. For each
trial deadline one of two inner solvers runs (``SolverConfig.method``):

* ``"price"`` (default) -- :func:`optimize_price` bisects a price on
  bandwidth; every user answers with its own best upload time and spectral
  efficiency, found by one-dimensional monotone searches. The fixed-deadline
  problem is convex in those variables, so this reaches its minimum.
* ``"shared"`` -- :func:`p_shared` searches a shared relative position of
  the powers between their lower bounds and ``p_max``, and for each power
  vector :func:`bf_shared` pushes all CPU frequencies down a shared relative
  position while the minimal bandwidths meeting the deadline still fit into
  ``B``. All users move together, which can leave a few percent on the table
  when they differ.

:func:`optimize_p` and :func:`optimize_bf` dispatch to the variant selected
by the method (:func:`bf_price` is the fixed-power form of the price search).

Two decision rules drive the outer searches (``SolverConfig.search_rule``).
``"literal"`` moves the power and deadline brackets exactly on the
bandwidth-budget and best-objective tests. ``"descent"`` (default) keeps the
same brackets and feasibility tests but compares the objective at the midpoint
against a probe just above it, i.e. a dichotomous search, which converges to
the minimiser of a unimodal objective instead of the smallest feasible point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .cost import Allocation, CostReport, total_cost
from .errors import InvalidInputError
from .scenario import Assignment, Scenario

LN2 = math.log(2.0)


def shannon_throughput(b, G):
    """``b log2(1 + G/b)``: increasing in ``b`` and bounded above by ``G / ln 2``."""
    b = np.asarray(b, dtype=float)
    return b * np.log1p(G / b) / LN2


def required_power(b, rate, gain, noise_density):
    """Transmit power that carries ``rate`` over bandwidth ``b``: ``N0 b (2^(rate/b) - 1) / g``.

    Decreasing in ``b``: more spectrum always buys the same rate with less power.
    """
    b = np.asarray(b, dtype=float)
    return noise_density * b * np.expm1(LN2 * rate / b) / gain


@dataclass(frozen=True)
class SolverConfig:
    eps0: float = 1e-5  # CPU frequency position ("shared") / bandwidth price ("price")
    eps1: float = 1e-4  # power position ("shared") / per-user upload time ("price")
    eps2: float = 1e-4  # deadline search
    eps3: float = 1e-9  # per-user bandwidth bisection and scalar inversions
    b_max: float | None = None  # None -> total bandwidth B
    t_bounds_policy: str = "analytic"
    t_low: float | None = None
    t_up: float | None = None
    t_up_factor: float = 10.0
    method: str = "price"
    search_rule: str = "descent"
    probe: float = 0.01
    max_iters: int = 200

    def __post_init__(self):
        for name in ("eps0", "eps1", "eps2", "eps3"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1), got {v!r}")
        if self.b_max is not None and not self.b_max > 0:
            raise InvalidInputError("b_max must be positive")
        if self.t_bounds_policy not in ("analytic", "explicit"):
            raise InvalidInputError(f"unknown t_bounds_policy {self.t_bounds_policy!r}")
        if self.t_bounds_policy == "explicit":
            if self.t_low is None or self.t_up is None or not 0 <= self.t_low < self.t_up:
                raise InvalidInputError("explicit t bounds need 0 <= t_low < t_up")
        if self.method not in ("price", "shared"):
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.search_rule not in ("descent", "literal"):
            raise InvalidInputError(f"unknown search_rule {self.search_rule!r}")
        if not 0 < self.probe < 1:
            raise InvalidInputError("probe must lie in (0, 1)")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")

    @classmethod
    def uniform(cls, tol: float, **kwargs) -> "SolverConfig":
        return cls(eps0=tol, eps1=tol, eps2=tol, eps3=tol, **kwargs)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class DerivedCoefficients:
    """Per-user constants of the single-server reformulation.

    ``A = (a/2) I K L c D``, ``J = I K L c D``, ``H = I K s``; ``h`` is the gain
    to the user's own edge and ``delta`` the run-long cloud-hop delay of that
    edge. ``cloud_energy`` is the constant ``I * sum(E_cloud)`` over busy edges.
    """

    h: np.ndarray
    delta: np.ndarray
    A: np.ndarray
    J: np.ndarray
    H: np.ndarray
    f_max: np.ndarray
    p_max: np.ndarray
    noise_density: float
    total_bandwidth: float
    b_max: float
    importance_weight: float
    cloud_energy: float

    @property
    def n(self) -> int:
        return self.h.size

    def G(self, p):
        return np.asarray(p) * self.h / self.noise_density

    def U(self, p):
        return self.H * np.asarray(p)

    def Y(self, b):
        return self.H / np.asarray(b)

    def Z(self, b):
        return self.h / (self.noise_density * np.asarray(b))

    def F(self, f):
        return self.J / np.asarray(f) + self.delta

    def X(self, f):
        return float(np.sum(self.A * np.asarray(f) ** 2))

    def throughput(self, b, p):
        """``b log2(1 + G/b)`` in bit/s."""
        return shannon_throughput(b, self.G(p))

    def energy(self, b, f, p) -> float:
        """Run-long energy ``E_sum`` including the constant cloud term."""
        return self.X(f) + float(np.sum(self.U(p) / self.throughput(b, p))) + self.cloud_energy

    def user_delay(self, b, f, p):
        """Per-user run-long delay ``H/r + J/f + delta``."""
        return self.H / self.throughput(b, p) + self.F(f)


def derive_coefficients(
    scenario: Scenario, assignment: Assignment, cfg: SolverConfig | None = None
) -> DerivedCoefficients:
    cfg = cfg or SolverConfig()
    assignment.validate(scenario.n_users, scenario.n_edges)
    prm = scenario.params
    labels = assignment.labels(scenario.n_users)
    ik = prm.global_iters * prm.edge_iters
    work = ik * prm.local_iters * scenario.cycles * scenario.samples
    busy = np.array([len(g) > 0 for g in assignment.groups])
    return DerivedCoefficients(
        h=scenario.gains[np.arange(scenario.n_users), labels].copy(),
        delta=prm.global_iters * scenario.cloud_delay[labels],
        A=0.5 * prm.capacitance_coeff * work,
        J=work,
        H=np.full(scenario.n_users, ik * prm.model_size),
        f_max=scenario.f_max.copy(),
        p_max=scenario.p_max.copy(),
        noise_density=prm.noise_density,
        total_bandwidth=prm.total_bandwidth,
        b_max=prm.total_bandwidth if cfg.b_max is None else cfg.b_max,
        importance_weight=prm.importance_weight,
        cloud_energy=prm.global_iters * float(scenario.cloud_energy[busy].sum()),
    )


# -- per-user primitives -------------------------------------------------------


def solve_b_for_deadline(f, p, t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None):
    """Minimal bandwidth per user so that ``H/r(b) + J/f + delta <= t``.

    Returns ``inf`` for users whose deadline cannot be met with ``b <= b_max``
    (including a non-positive time budget left for the upload).
    """
    cfg = cfg or SolverConfig()
    f = np.broadcast_to(np.asarray(f, dtype=float), coeffs.h.shape)
    slack = t - coeffs.delta - coeffs.J / f
    with np.errstate(divide="ignore"):
        rho = np.where(slack > 0, coeffs.H / np.where(slack > 0, slack, 1.0), np.inf)
    out = np.empty_like(rho)
    iters = np.empty(rho.size, dtype=np.int64)
    _kernels.min_bandwidth(
        rho, np.ascontiguousarray(coeffs.G(np.broadcast_to(p, rho.shape)), dtype=float),
        float(coeffs.b_max), float(cfg.eps3), int(cfg.max_iters), out, iters,
    )
    return out


def f_lower_bound(t, p, coeffs: DerivedCoefficients):
    """Lower bound on each CPU frequency at deadline ``t``: ``J / (t - delta - ln2 H / G)``.

    Uses the Shannon cap ``G/ln 2`` of the upload throughput. Where the
    denominator is non-positive no frequency can meet ``t``; those entries
    are ``inf``.
    """
    denom = t - coeffs.delta - LN2 * coeffs.H / coeffs.G(p)
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, np.maximum(0.0, coeffs.J / np.where(denom > 0, denom, 1.0)), np.inf)


def p_lower_bound(t, coeffs: DerivedCoefficients):
    """Lower bound on each transmit power at deadline ``t``.

    ``zeta (2^(gamma/eta) - 1)`` with ``gamma = H / b_max``,
    ``eta = t - delta - J / f_max`` and ``zeta = N0 b_max / h``: the power that
    just meets ``t`` with the whole band and the fastest CPU. ``inf`` where
    ``eta <= 0``.
    """
    gamma = coeffs.H / coeffs.b_max
    eta = t - coeffs.delta - coeffs.J / coeffs.f_max
    zeta = coeffs.noise_density * coeffs.b_max / coeffs.h
    with np.errstate(over="ignore", divide="ignore"):
        bound = zeta * np.expm1(LN2 * gamma / np.where(eta > 0, eta, 1.0))
    return np.where(eta > 0, np.maximum(0.0, bound), np.inf)


# -- nested searches -----------------------------------------------------------


@dataclass
class BFResult:
    feasible: bool
    b: np.ndarray
    f: np.ndarray
    b_sum: float
    iterations: int = 0
    b_iterations: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class PResult:
    feasible: bool
    p: np.ndarray
    b: np.ndarray
    f: np.ndarray
    b_sum: float
    energy: float
    iterations: int = 0
    f_iterations: int = 0
    b_iterations: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)
    price: float = math.nan


def _max_rel_gap(lo, up) -> float:
    return float(np.max((up - lo) / up))


def optimize_bf(p, t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None,
                record: bool = False) -> BFResult:
    """Energy-minimal ``(b, f)`` for fixed powers ``p`` and deadline ``t``.

    Dispatches on ``cfg.method``; see :func:`bf_shared` and :func:`bf_price`.
    """
    cfg = cfg or SolverConfig()
    if cfg.method == "price":
        return bf_price(p, t, coeffs, cfg)
    return bf_shared(p, t, coeffs, cfg, record)


def bf_shared(p, t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None,
              record: bool = False) -> BFResult:
    """Lowest shared frequency position whose minimal bandwidths fit into ``B``.

    All users move together: ``f_n = f_low_n + theta (f_max_n - f_low_n)``.
    The returned point is the upper end of the final bracket, so a feasible
    result always satisfies ``sum(b) <= B``. ``history`` collects
    ``(theta, b_sum)`` pairs when ``record`` is set.
    """
    cfg = cfg or SolverConfig()
    p = np.broadcast_to(np.asarray(p, dtype=float), coeffs.h.shape)
    f_low0 = f_lower_bound(t, p, coeffs)
    if np.any(~(f_low0 < coeffs.f_max)):
        return BFResult(False, np.full(coeffs.n, np.inf), coeffs.f_max.copy(), math.inf)
    b = np.empty(coeffs.n)
    f = np.empty(coeffs.n)
    hist_theta = np.empty(cfg.max_iters + 1)
    hist_bsum = np.empty(cfg.max_iters + 1)
    feasible, b_sum, it, steps = _kernels.shared_frequency_search(
        np.ascontiguousarray(coeffs.G(p)), f_low0, coeffs.f_max, float(t),
        coeffs.delta, coeffs.J, coeffs.H, float(coeffs.total_bandwidth), float(coeffs.b_max),
        float(cfg.eps0), float(cfg.eps3), int(cfg.max_iters), b, f, hist_theta, hist_bsum,
    )
    history = list(zip(hist_theta[: it + 1].tolist(), hist_bsum[: it + 1].tolist())) if record else []
    return BFResult(bool(feasible), b, f, float(b_sum), int(it), int(steps), history)


def bf_price(p, t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None) -> BFResult:
    """Fixed-power counterpart of :func:`optimize_price`.

    For a bandwidth price ``mu`` each user picks its upload time ``tau``
    minimising ``A f^2 + p tau + mu b`` on the deadline, where ``f`` and the
    minimal bandwidth ``b`` both follow from ``tau``; that cost is convex in
    ``tau``, so its derivative is bisected (all users at once, to ``eps1``).
    ``mu`` is then bisected (to ``eps0``) until the bandwidths fit into ``B``.
    """
    cfg = cfg or SolverConfig()
    n = coeffs.n
    p = np.broadcast_to(np.asarray(p, dtype=float), (n,))
    G = np.ascontiguousarray(coeffs.G(p))
    s = t - coeffs.delta
    a = coeffs.A * coeffs.J**2
    b_max = float(coeffs.b_max)
    budget = coeffs.total_bandwidth
    tau_lo = coeffs.H / coeffs.throughput(np.full(n, b_max), p) * (1 + 1e-12)
    tau_hi = s - coeffs.J / coeffs.f_max
    infeasible = BFResult(False, np.full(n, np.inf), coeffs.f_max.copy(), math.inf)
    if not np.all(tau_lo < tau_hi):
        return infeasible
    iters = np.empty(n, dtype=np.int64)
    steps = 0

    def min_b(tau):
        nonlocal steps
        out = np.empty(n)
        _kernels.min_bandwidth(coeffs.H / tau, G, b_max, float(cfg.eps3), int(cfg.max_iters), out, iters)
        steps += int(iters.sum())
        return np.minimum(out, b_max)

    b_floor = min_b(tau_hi)
    if b_floor.sum() > budget:
        return BFResult(False, b_floor, coeffs.f_max.copy(), float(b_floor.sum()))

    def slope(tau, mu):
        b = min_b(tau)
        dthr = np.log1p(G / b) / LN2 - G / (LN2 * (b + G))
        return 2 * a / (s - tau) ** 3 + p - mu * coeffs.H / (tau**2 * dthr)

    def respond(mu):
        top = slope(tau_hi, mu) <= 0
        bottom = slope(tau_lo, mu) >= 0
        lo, hi = tau_lo.copy(), tau_hi.copy()
        k = 0
        while _max_rel_gap(lo, hi) > cfg.eps1 and k < cfg.max_iters:
            k += 1
            mid = 0.5 * (lo + hi)
            up = slope(mid, mu) > 0
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        return np.where(top, tau_hi, np.where(bottom, tau_lo, hi))

    def at(mu):
        tau = respond(mu)
        b = min_b(tau)
        return tau, b, float(b.sum())

    tau, b, total = at(0.0)
    it = 0
    if total > budget:
        # bracket the price, keeping the upper end feasible
        lo, hi = 0.0, float(np.max(p * tau_hi) / budget)
        best = None
        while it < cfg.max_iters:
            it += 1
            cand = at(hi)
            if cand[2] <= budget:
                best = cand
                break
            lo, hi = hi, 2.0 * hi
        if best is None:
            return infeasible
        while (hi - lo) > cfg.eps0 * hi and it < cfg.max_iters:
            it += 1
            mid = 0.5 * (lo + hi)
            cand = at(mid)
            if cand[2] <= budget:
                hi, best = mid, cand
            else:
                lo = mid
        tau, b, total = best
    f = np.minimum(coeffs.J / (s - tau), coeffs.f_max)
    return BFResult(True, b, f, total, it, steps)


def optimize_p(t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None,
               record: bool = False) -> PResult:
    """Energy-minimal ``(p, b, f)`` at a fixed deadline ``t``.

    Dispatches on ``cfg.method``; see :func:`p_shared` and :func:`optimize_price`.
    """
    cfg = cfg or SolverConfig()
    if cfg.method == "price":
        return optimize_price(t, coeffs, cfg)
    return p_shared(t, coeffs, cfg, record)


def p_shared(t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None,
             record: bool = False) -> PResult:
    """Shared-position search over transmit powers at a fixed deadline ``t``.

    Bracket: the analytic lower bounds (:func:`p_lower_bound`) up to ``p_max``.
    A midpoint whose frequency/bandwidth step overflows ``B`` raises the lower
    end. Otherwise the literal rule lowers the upper end; the descent rule
    compares energies at the midpoint and a probe just above it.
    ``history`` collects ``(theta, b_sum)`` pairs when ``record`` is set.
    """
    cfg = cfg or SolverConfig()
    empty = np.full(coeffs.n, np.nan)
    p_low0 = p_lower_bound(t, coeffs)
    if np.any(~(p_low0 <= coeffs.p_max)):
        return PResult(False, coeffs.p_max.copy(), empty, empty, math.inf, math.inf)
    span = coeffs.p_max - p_low0
    counters = {"f": 0, "b": 0}
    history: list[tuple[float, float]] = []

    def run(theta):
        p = p_low0 + theta * span
        r = bf_shared(p, t, coeffs, cfg)
        counters["f"] += r.iterations
        counters["b"] += r.b_iterations
        if record:
            history.append((theta, r.b_sum))
        e = coeffs.energy(r.b, r.f, p) if r.feasible else math.inf
        return p, r, e

    p_top, top, e_top = run(1.0)
    if not top.feasible:
        return PResult(False, p_top, top.b, top.f, top.b_sum, math.inf, 0,
                       counters["f"], counters["b"], history)
    best = (e_top, p_top, top)

    lo, hi = 0.0, 1.0
    p_lo, p_hi = p_low0, coeffs.p_max
    it = 0
    while _max_rel_gap(p_lo, p_hi) > cfg.eps1 and it < cfg.max_iters:
        it += 1
        theta = 0.5 * (lo + hi)
        p, r, e = run(theta)
        if not r.feasible:
            lo, p_lo = theta, p
            continue
        if cfg.search_rule == "literal":
            # the literal rule reports the latest feasible point, not the best
            best = (e, p, r)
            if r.b_sum >= coeffs.total_bandwidth:
                break
            hi, p_hi = theta, p
            continue
        if e < best[0]:
            best = (e, p, r)
        probe = theta + cfg.probe * (hi - lo)
        p2, r2, e2 = run(probe)
        if e2 < best[0]:
            best = (e2, p2, r2)
        if e > e2:
            lo, p_lo = theta, p
        else:
            hi, p_hi = probe, p2
    e, p, r = best
    return PResult(True, p, r.b, r.f, r.b_sum, e, it, counters["f"], counters["b"], history)


def optimize_price(t, coeffs: DerivedCoefficients, cfg: SolverConfig | None = None,
                   mu_guess: float = 0.0) -> PResult:
    """Exact energy-minimal ``(p, b, f)`` at deadline ``t`` by bandwidth pricing.

    Each user answers a price ``mu`` on bandwidth with its own best upload
    time and spectral efficiency; ``mu`` is bisected until the answers fit
    into ``B`` (``eps0``), each user's search stops at relative width
    ``eps1`` and the scalar inversions at ``eps3``. Unlike the shared-position
    searches this lets every user settle at its own point.
    ``iterations`` counts price steps and ``f_iterations`` the per-user steps.
    """
    cfg = cfg or SolverConfig()
    n = coeffs.n
    s = t - coeffs.delta
    c = coeffs.noise_density * coeffs.H / coeffs.h
    tau_lo = coeffs.H / coeffs.throughput(np.full(n, coeffs.b_max), coeffs.p_max)
    tau_hi = s - coeffs.J / coeffs.f_max
    empty = np.full(n, np.nan)
    if not np.all(tau_lo < tau_hi):
        return PResult(False, coeffs.p_max.copy(), empty, empty, math.inf, math.inf)
    tau = np.empty(n)
    x = np.empty(n)
    feasible, mu, b_sum, it, steps = _kernels.price_allocation(
        np.ascontiguousarray(s), coeffs.A * coeffs.J**2, c, coeffs.H, coeffs.J, coeffs.f_max,
        coeffs.p_max / c, float(coeffs.b_max), tau_lo, float(coeffs.total_bandwidth),
        float(mu_guess), float(cfg.eps0), float(cfg.eps1), int(cfg.max_iters), tau, x,
    )
    if not feasible:
        return PResult(False, coeffs.p_max.copy(), empty, empty, float(b_sum), math.inf, int(it), int(steps))
    b = np.minimum(coeffs.H / (tau * x), coeffs.b_max)
    f = np.minimum(coeffs.J / (s - tau), coeffs.f_max)
    p = np.minimum(c * np.expm1(LN2 * x) / (x * tau), coeffs.p_max)
    return PResult(True, p, b, f, float(b.sum()), coeffs.energy(b, f, p), int(it), int(steps),
                   price=float(mu))


def deadline_bounds(coeffs: DerivedCoefficients, cfg: SolverConfig) -> tuple[float, float]:
    """Bracket for the deadline search.

    Lower: every user at ``f_max`` and ``p_max`` with unlimited bandwidth (the
    Shannon cap), which no finite allocation can beat. Upper: ``t_up_factor``
    times the delay of the equal-split, full-power, full-speed allocation.
    """
    if cfg.t_bounds_policy == "explicit":
        return float(cfg.t_low), float(cfg.t_up)
    g_max = coeffs.G(coeffs.p_max)
    t_low = float(np.max(coeffs.delta + coeffs.J / coeffs.f_max + LN2 * coeffs.H / g_max))
    b_eq = np.full(coeffs.n, coeffs.total_bandwidth / coeffs.n)
    t_eq = float(np.max(coeffs.user_delay(b_eq, coeffs.f_max, coeffs.p_max)))
    return t_low, cfg.t_up_factor * t_eq


@dataclass
class SroaResult:
    feasible: bool
    allocation: Allocation | None
    t_star: float
    objective: float
    edge_bandwidth: np.ndarray | None
    report: CostReport | None
    iterations: dict
    search_objective: float = math.inf

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "t_star": self.t_star if math.isfinite(self.t_star) else None,
            "objective": self.objective if math.isfinite(self.objective) else None,
            "edge_bandwidth": None if self.edge_bandwidth is None else self.edge_bandwidth.tolist(),
            "allocation": None if self.allocation is None else self.allocation.to_dict(),
            "cost": None if self.report is None else self.report.to_dict(),
            "iterations": dict(self.iterations),
        }


def sroa(scenario: Scenario, assignment: Assignment, cfg: SolverConfig | None = None) -> SroaResult:
    """Minimise ``E_sum + lambda T_sum`` over ``(b, f, p)`` for a fixed assignment.

    Infeasibility is reported through ``SroaResult.feasible``; it is never
    raised. The returned objective is recomputed with :func:`total_cost`, so it
    includes the constant cloud terms and uses the achieved (not the target)
    delay.
    """
    cfg = cfg or SolverConfig()
    coeffs = derive_coefficients(scenario, assignment, cfg)
    lam = coeffs.importance_weight
    t_low, t_up = deadline_bounds(coeffs, cfg)
    counts = {"t": 0, "p": 0, "f": 0, "b": 0}
    last_price = 0.0

    def run(t):
        nonlocal last_price
        if cfg.method == "price":
            r = optimize_price(t, coeffs, cfg, last_price)
            if r.feasible and r.price > 0:
                last_price = r.price
        else:
            r = p_shared(t, coeffs, cfg)
        counts["p"] += r.iterations
        counts["f"] += r.f_iterations
        counts["b"] += r.b_iterations
        return r, (r.energy + lam * t if r.feasible else math.inf)

    best: tuple[float, float, PResult] | None = None

    def consider(t, r, val):
        nonlocal best
        if r.feasible and (best is None or val < best[0]):
            best = (val, t, r)

    r_star = math.inf
    t = t_up
    while (t_up - t_low) / t_up > cfg.eps2 and counts["t"] < cfg.max_iters:
        counts["t"] += 1
        t = 0.5 * (t_low + t_up)
        r, val = run(t)
        if not r.feasible:
            t_low = t
            continue
        consider(t, r, val)
        if cfg.search_rule == "literal":
            if val > r_star:
                t_low = t
            else:
                t_up, r_star = t, val
            continue
        t2 = t + cfg.probe * (t_up - t_low)
        r2, val2 = run(t2)
        consider(t2, r2, val2)
        if val > val2:
            t_low = t
        else:
            t_up = t2

    if cfg.search_rule == "literal" or best is None:
        # final solve at the last deadline (and at t_up if nothing feasible yet)
        for t_final in (t, t_up):
            r, val = run(t_final)
            consider(t_final, r, val)
            if best is not None:
                break

    if best is None:
        return SroaResult(False, None, math.inf, math.inf, None, None, counts)
    val, t_star, r = best
    alloc = Allocation(r.b, r.f, r.p)
    report = total_cost(scenario, assignment, alloc)
    return SroaResult(
        feasible=True,
        allocation=alloc,
        t_star=t_star,
        objective=report.objective,
        edge_bandwidth=alloc.edge_bandwidth(assignment),
        report=report,
        iterations=counts,
        search_objective=val,
    )


def with_tolerance(cfg: SolverConfig, tol: float) -> SolverConfig:
    return replace(cfg, eps0=tol, eps1=tol, eps2=tol, eps3=tol)

"""Compiled inner loops of the resource solver."""

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)


@njit(cache=True)
def shannon_throughput(b, G):
    """``b log2(1 + G/b)``; increasing in ``b`` and bounded by ``G/ln 2``."""
    return b * math.log1p(G / b) / LN2


@njit(cache=True)
def min_bandwidth(rho, G, b_max, tol, max_iters, out, iters):
    """Smallest ``b`` in ``(0, b_max]`` with ``b log2(1 + G/b) >= rho``, per user.

    Writes ``inf`` where even ``b_max`` falls short. Bisection on the monotone
    throughput; the bracket is seeded from ``phi(b) = rho / log2(1 + G/b)``,
    which maps lower bounds of the root to lower bounds and upper to upper.
    """
    for n in range(rho.size):
        r = rho[n]
        g = G[n]
        iters[n] = 0
        if r <= 0.0:
            out[n] = 0.0
            continue
        if r * LN2 >= g or shannon_throughput(b_max, g) < r:
            out[n] = np.inf
            continue
        hi = min(b_max, r * LN2 / math.log1p(g / b_max))
        lo = r * LN2 / math.log1p(g / (hi * 1e-12))
        lo = r * LN2 / math.log1p(g / lo)
        if lo > hi:
            lo = hi * 0.5
        if shannon_throughput(lo, g) >= r:
            lo = 0.0
        k = 0
        while (hi - lo) > tol * hi and k < max_iters:
            mid = 0.5 * (lo + hi)
            if shannon_throughput(mid, g) >= r:
                hi = mid
            else:
                lo = mid
            k += 1
        iters[n] = k
        out[n] = hi


@njit(cache=True)
def deadline_bandwidths(f, G, t, delta, J, H, b_max, tol, max_iters, out, iters):
    """Minimal bandwidths meeting deadline ``t`` at CPU frequencies ``f``; returns their sum."""
    n = f.size
    rho = np.empty(n)
    for i in range(n):
        slack = t - delta[i] - J[i] / f[i]
        rho[i] = H[i] / slack if slack > 0.0 else np.inf
    min_bandwidth(rho, G, b_max, tol, max_iters, out, iters)
    total = 0.0
    for i in range(n):
        total += out[i]
    return total


@njit(cache=True)
def shared_frequency_search(G, f_low0, f_max, t, delta, J, H, budget, b_max,
                            eps0, eps3, max_iters, b_out, f_out, hist_theta, hist_bsum):
    """Bisection on the shared position ``theta`` of ``f = f_low0 + theta (f_max - f_low0)``.

    Keeps the upper end feasible (``sum(b) <= budget``). Returns
    ``(feasible, b_sum, iterations, bandwidth_bisection_steps)``; the
    ``(theta, b_sum)`` trail goes to the history arrays (first entry is
    ``theta = 1``).
    """
    n = G.size
    b = np.empty(n)
    f = np.empty(n)
    iters = np.empty(n, dtype=np.int64)
    steps = 0
    for i in range(n):
        f_out[i] = f_max[i]
    b_sum = deadline_bandwidths(f_out, G, t, delta, J, H, b_max, eps3, max_iters, b_out, iters)
    steps += iters.sum()
    hist_theta[0] = 1.0
    hist_bsum[0] = b_sum
    if not b_sum <= budget:
        return False, b_sum, 0, steps

    lo = 0.0
    hi = 1.0
    it = 0
    while it < max_iters:
        gap = 0.0
        for i in range(n):
            f_lo = f_low0[i] + lo * (f_max[i] - f_low0[i])
            g = (f_out[i] - f_lo) / f_out[i]
            if g > gap:
                gap = g
        if gap <= eps0:
            break
        theta = 0.5 * (lo + hi)
        for i in range(n):
            f[i] = f_low0[i] + theta * (f_max[i] - f_low0[i])
        s = deadline_bandwidths(f, G, t, delta, J, H, b_max, eps3, max_iters, b, iters)
        steps += iters.sum()
        it += 1
        hist_theta[it] = theta
        hist_bsum[it] = s
        if s <= budget:
            hi = theta
            b_sum = s
            for i in range(n):
                f_out[i] = f[i]
                b_out[i] = b[i]
            if s == budget:
                break
        else:
            lo = theta
    return True, b_sum, it, steps


# -- bandwidth-price decomposition ---------------------------------------------
#
# In terms of a user's run-long upload time ``tau`` and spectral efficiency
# ``x = r / b`` (bit/s/Hz) the per-user energy at deadline ``t`` is
#
#     a / (s - tau)^2 + c q(x),    q(x) = (2^x - 1) / x,
#
# with ``s = t - delta``, ``a = A J^2``, ``c = N0 H / h``, bandwidth
# ``b = H / (tau x)`` and power ``p = c q(x) / tau``. Everything is convex in
# ``(tau, x)``, so a price ``mu`` on bandwidth decouples the users.


@njit(cache=True)
def _w(y):
    """``y^2 dq/dy`` up to the ``ln 2`` scale: ``e^y (y - 1) + 1``."""
    if y < 1e-2:
        return y * y * (0.5 + y * (1.0 / 3.0 + y * (0.125 + y * (1.0 / 30.0 + y * (1.0 / 144.0 + y / 840.0)))))
    return (y - 1.0) * math.exp(y) + 1.0


@njit(cache=True)
def _g(y):
    """``expm1(y) / y`` with its limit 1 at 0."""
    if y < 1e-12:
        return 1.0 + 0.5 * y
    return math.expm1(y) / y


@njit(cache=True)
def inv_w(k, tol):
    """``y >= 0`` with ``e^y (y - 1) + 1 = k``; Newton from the right."""
    if k <= 0.0:
        return 0.0
    y = math.sqrt(2.0 * k)
    lk = math.log(k)
    if 2.0 <= lk < y:
        y = lk
    for _ in range(200):
        step = (_w(y) - k) / (y * math.exp(y))
        y_new = y - step
        if y_new <= 0.0:
            y_new = 0.5 * y
        if abs(y - y_new) <= tol * y_new:
            return y_new
        y = y_new
    return y


@njit(cache=True)
def inv_g(u, tol):
    """``y > 0`` with ``expm1(y) / y = u`` for ``u > 1``; Newton from the right."""
    if u <= 1.0:
        return 0.0
    y = 1.0
    while _g(y) < u:
        y *= 2.0
    if 2.0 * (u - 1.0) < y:
        y = 2.0 * (u - 1.0)
    for _ in range(200):
        gp = _w(y) / (y * y)
        y_new = y - (_g(y) - u) / gp
        if y_new <= 0.0:
            y_new = 0.5 * y
        if abs(y - y_new) <= tol * y_new:
            return y_new
        y = y_new
    return y


@njit(cache=True)
def _spectral_efficiency(tau, mu, c, H, P, b_max, tol):
    """Best ``x`` at upload time ``tau`` and price ``mu``; returns ``(x, case)``.

    ``case`` is 0 when ``b = b_max`` binds, 1 when interior, 2 when
    ``p = p_max`` binds.
    """
    x_lo = H / (tau * b_max)
    x_u = inv_w(mu * H / (c * tau), tol) / LN2 if mu > 0.0 else 0.0
    if x_u <= x_lo:
        return x_lo, 0
    if LN2 * _g(x_u * LN2) <= P * tau:
        return x_u, 1
    return inv_g(P * tau / LN2, tol) / LN2, 2


@njit(cache=True)
def _dphi(tau, s, a, c, H, P, b_max, mu, tol):
    """Derivative of the per-user value ``min_x Phi(tau, x)`` w.r.t. ``tau``."""
    x, case = _spectral_efficiency(tau, mu, c, H, P, b_max, tol)
    d = 2.0 * a / (s - tau) ** 3
    y = x * LN2
    if case == 0:
        return d - c * _w(y) / (x * tau)
    if case == 1:
        return d - mu * H / (tau * tau * x)
    qp = LN2 * _w(y) / (y * y) * LN2
    dx = P / qp
    return d + c * P - mu * H * (x + tau * dx) / (tau * x) ** 2


@njit(cache=True)
def user_best_response(s, a, c, H, J, f_max, P, b_max, mu, tau_lo, tol, max_iters):
    """Minimise ``Phi + mu b`` for one user; returns ``(tau, x, iterations)``.

    ``tau`` is bracketed by the upload time at full band and power
    (``tau_lo``) and the time left at ``f_max``. The value is convex in
    ``tau``; its derivative is located by Illinois regula falsi on
    ``v = log(s - tau)`` (log compute time), where it is far less steep.
    """
    tau_hi = s - J / f_max
    d_hi = _dphi(tau_hi, s, a, c, H, P, b_max, mu, tol)
    if d_hi <= 0.0:
        x, _ = _spectral_efficiency(tau_hi, mu, c, H, P, b_max, tol)
        return tau_hi, x, 0
    d_lo = _dphi(tau_lo, s, a, c, H, P, b_max, mu, tol)
    if d_lo >= 0.0:
        x, _ = _spectral_efficiency(tau_lo, mu, c, H, P, b_max, tol)
        return tau_lo, x, 0
    # v decreases as tau increases: v_a <-> tau_hi (d > 0), v_b <-> tau_lo (d < 0)
    va = math.log(s - tau_hi)
    vb = math.log(s - tau_lo)
    da = d_hi
    db = d_lo
    side = 0
    k = 0
    tau = tau_lo
    while k < max_iters:
        k += 1
        v = (va * db - vb * da) / (db - da)
        if not (va < v < vb):
            v = 0.5 * (va + vb)
        tau = s - math.exp(v)
        d = _dphi(tau, s, a, c, H, P, b_max, mu, tol)
        if d > 0.0:
            va, da = v, d
            if side == 1:
                db *= 0.5
            side = 1
        elif d < 0.0:
            vb, db = v, d
            if side == -1:
                da *= 0.5
            side = -1
        else:
            break
        if math.exp(vb) - math.exp(va) <= tol * (s - math.exp(vb)):
            tau = s - 0.5 * (math.exp(va) + math.exp(vb))
            break
    x, _ = _spectral_efficiency(tau, mu, c, H, P, b_max, tol)
    return tau, x, k


@njit(cache=True)
def _responses(mu, s, a, c, H, J, f_max, P, b_max, tau_lo, tol, max_iters, tau, x):
    total = 0.0
    steps = 0
    for n in range(s.size):
        tn, xn, k = user_best_response(s[n], a[n], c[n], H[n], J[n], f_max[n], P[n],
                                       b_max, mu, tau_lo[n], tol, max_iters)
        tau[n] = tn
        x[n] = xn
        total += H[n] / (tn * xn)
        steps += k
    return total, steps


@njit(cache=True)
def price_allocation(s, a, c, H, J, f_max, P, b_max, tau_lo, budget, mu_guess,
                     eps_mu, eps_tau, max_iters, tau_out, x_out):
    """Bisection on the bandwidth price so that the best responses fit ``budget``.

    Returns ``(feasible, mu, b_sum, price_iterations, user_iterations)``; the
    chosen ``(tau, x)`` per user go to the output arrays and always satisfy
    ``sum(b) <= budget``. Callers must ensure ``tau_lo < s - J / f_max``.
    """
    n = s.size
    tau = np.empty(n)
    x = np.empty(n)
    steps = 0
    # cheapest bandwidth any user can live with: full CPU speed and power
    b_min_sum = 0.0
    for i in range(n):
        tau_hi = s[i] - J[i] / f_max[i]
        x_hi = inv_g(P[i] * tau_hi / LN2, eps_tau) / LN2
        b_min_sum += H[i] / (tau_hi * x_hi)
    if b_min_sum > budget:
        return False, np.inf, b_min_sum, 0, 0

    total, k = _responses(0.0, s, a, c, H, J, f_max, P, b_max, tau_lo, eps_tau, max_iters, tau_out, x_out)
    steps += k
    if total <= budget:
        return True, 0.0, total, 0, steps

    it = 0
    hi = mu_guess if mu_guess > 0.0 else 1e-12
    lo = 0.0
    total, k = _responses(hi, s, a, c, H, J, f_max, P, b_max, tau_lo, eps_tau, max_iters, tau, x)
    steps += k
    it += 1
    if total <= budget:
        for i in range(n):
            tau_out[i] = tau[i]
            x_out[i] = x[i]
        b_sum = total
        while it < max_iters:
            trial = 0.5 * hi
            total, k = _responses(trial, s, a, c, H, J, f_max, P, b_max, tau_lo, eps_tau, max_iters, tau, x)
            steps += k
            it += 1
            if total > budget:
                lo = trial
                break
            hi = trial
            b_sum = total
            for i in range(n):
                tau_out[i] = tau[i]
                x_out[i] = x[i]
    else:
        b_sum = np.inf
        while it < max_iters:
            lo = hi
            hi = 2.0 * hi
            total, k = _responses(hi, s, a, c, H, J, f_max, P, b_max, tau_lo, eps_tau, max_iters, tau, x)
            steps += k
            it += 1
            if total <= budget:
                b_sum = total
                for i in range(n):
                    tau_out[i] = tau[i]
                    x_out[i] = x[i]
                break
        if not b_sum <= budget:
            return False, np.inf, b_sum, it, steps

    while (hi - lo) > eps_mu * hi and it < max_iters:
        mid = 0.5 * (lo + hi)
        total, k = _responses(mid, s, a, c, H, J, f_max, P, b_max, tau_lo, eps_tau, max_iters, tau, x)
        steps += k
        it += 1
        if total <= budget:
            hi = mid
            b_sum = total
            for i in range(n):
                tau_out[i] = tau[i]
                x_out[i] = x[i]
        else:
            lo = mid
    return True, hi, b_sum, it, steps

"""Hot loops of the step simulator and the miss generator.

Each kernel is written once in numba-compatible numpy; ``*_py`` is the plain
Python version, the unsuffixed name is the jitted one (or the same function
when numba is disabled).
"""
import numpy as np

from .._accel import jit

# kernel status codes
OK = 0
BAD_FIRST = 1
INADMISSIBLE = 2


def step_sim_py(A, B, Bw, C, D, Dw, gains, trans, init_node, mu, w, x0, u0, skip, hold, stop_tol, w_end):
    """Delayed-input plant under Kill/Skip and Zero/Hold.

    Returns ``(x, u, ua, uc, z, node, status, steps, bad_t)``; ``x`` and ``u``
    carry ``steps + 1`` meaningful rows, the rest up to ``N`` rows.
    """
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    q = Bw.shape[1]
    N = mu.shape[0]
    nx = n + m
    nlab = trans.shape[1]
    x = np.zeros((N + 1, n))
    u = np.zeros((N + 1, m))
    ua = np.zeros((N, m))
    uc = np.full((N, m), np.nan)
    z = np.zeros((N, p))
    node = np.zeros(N, dtype=np.int64)
    x[0] = x0
    u[0] = u0
    xt = np.zeros(nx)
    latched = np.zeros(nx)
    nd = init_node
    job_node = init_node
    last_hit = 0
    act = 0
    if N > 0 and mu[0] != 1:
        return x, u, ua, uc, z, node, BAD_FIRST, 0, 0
    steps = N
    for t in range(N):
        xt[:n] = x[t]
        xt[n:] = u[t]
        if skip and t == act:
            latched[:] = xt
            job_node = nd
        node[t] = job_node if skip else nd
        if mu[t] == 1:
            if skip:
                a = t - act
                nxt = trans[job_node, a] if a < nlab else -1
                if nxt < 0:
                    return x, u, ua, uc, z, node, INADMISSIBLE, t, t
                v = np.dot(gains[job_node], latched)
                nd = nxt
                act = t + 1
            else:
                if t > 0:
                    a = t - last_hit - 1
                    nxt = trans[nd, a] if a < nlab else -1
                    if nxt < 0:
                        return x, u, ua, uc, z, node, INADMISSIBLE, t, t
                    nd = nxt
                    node[t] = nd
                last_hit = t
                v = np.dot(gains[nd], xt)
            uc[t] = v
            ua[t] = v
        elif hold:
            ua[t] = u[t]
        # Zero: ua[t] stays 0
        xn = np.dot(A, x[t]) + np.dot(B, u[t])
        if p > 0:
            zt = np.dot(C, x[t]) + np.dot(D, u[t])
            if q > 0:
                zt += np.dot(Dw, w[t])
            z[t] = zt
        if q > 0:
            xn += np.dot(Bw, w[t])
        x[t + 1] = xn
        u[t + 1] = ua[t]
        if stop_tol > 0.0 and t + 1 >= w_end:
            small = np.sqrt(np.sum(x[t + 1] ** 2) + np.sum(u[t + 1] ** 2)) < stop_tol
            if skip:
                # a pending job still carries its latched state
                small = small and (act == t + 1 or np.sqrt(np.sum(latched ** 2)) < stop_tol)
            if small:
                steps = t + 1
                break
    return x, u, ua, uc, z, node, OK, steps, -1


def gen_mu_py(r, s, pmiss, draws, warmup):
    """Greedy random hit/miss sequence: miss with probability ``pmiss`` when admissible."""
    N = draws.shape[0]
    mu = np.ones(N, dtype=np.int64)
    zeros = 0  # misses among the previous s-1 entries
    for t in range(1, N):
        if t - s >= 0 and mu[t - s] == 0:
            zeros -= 1
        if t >= warmup and zeros + 1 <= r and draws[t] < pmiss:
            mu[t] = 0
            zeros += 1
    return mu


def window_max_zeros_py(mu, s):
    """Largest number of zeros in any length-``s`` window (whole sequence if shorter)."""
    N = mu.shape[0]
    zeros = 0
    best = 0
    for t in range(N):
        if mu[t] == 0:
            zeros += 1
        if t >= s and mu[t - s] == 0:
            zeros -= 1
        if zeros > best:
            best = zeros
    return best


step_sim = jit(step_sim_py)
gen_mu = jit(gen_mu_py)
window_max_zeros = jit(window_max_zeros_py)

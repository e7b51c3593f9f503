import itertools

import numpy as np
import pytest

from whsyn.constraints import WHConstraint, admits, build_graph
from whsyn.lifting import ALL_STRATEGIES, Plant, closed_loop, lift
from whsyn.lmi import Controller
from whsyn.sim import MissGeneratorConfig, generate_mu, lifted_schedule, simulate_lifted, simulate_steps, stack_w


def random_plant(rng, n=None, m=None, q=None, p=None, scale=0.6):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 3))
    q = int(rng.integers(1, 3)) if q is None else q
    p = int(rng.integers(1, 3)) if p is None else p
    return Plant(A=scale * rng.standard_normal((n, n)), B=rng.standard_normal((n, m)),
                 Bw=rng.standard_normal((n, q)), C=rng.standard_normal((p, n)),
                 D=rng.standard_normal((p, m)), Dw=rng.standard_normal((p, q)))


def brute_alpha_words(r, s, L):
    """alpha-words of length <= L from all admissible mu strings (oracle)."""
    words = {()}
    c = WHConstraint.any_miss(r, s)
    # enough mu length to realise L steps with up to r misses each, preceded by a clean history
    for n_steps in range(1, L + 1):
        for word in itertools.product(range(r + 1), repeat=n_steps):
            mu = [1] * s
            for a in word:
                mu += [0] * a + [1]
            if admits(mu, c):
                words.add(tuple(word))
    return words


def random_case(seed):
    """Random plant, gains, admissible mu (length <= 40) and w for one equivalence check."""
    rng = np.random.default_rng(seed)
    pl = random_plant(rng, scale=0.7)
    s = int(rng.integers(2, 7))
    r = int(rng.integers(1, s))
    c = WHConstraint.any_miss(r, s)
    g = build_graph(c)
    sp = ALL_STRATEGIES[seed % 4]
    nx = pl.n + pl.m
    if seed % 2:
        ctrl = Controller.per_node({i: 0.3 * rng.standard_normal((pl.m, nx)) for i in g.nodes})
    else:
        ctrl = Controller.nonswitching(0.3 * rng.standard_normal((pl.m, nx)))
    N = int(rng.integers(2, 41))
    mu = generate_mu(MissGeneratorConfig(c, float(rng.random()), N, seed=seed))
    w = rng.standard_normal((N, pl.q))
    x0 = rng.standard_normal(pl.n)
    return pl, g, sp, ctrl, mu, w, x0


def compare(pl, g, sp, ctrl, mu, w, x0):
    """(state error, z error, stepwise energy, lifted energy) between the two simulators."""
    tr = simulate_steps(pl, ctrl, sp, g, mu, w, x0)
    tau, alpha = lifted_schedule(mu, sp.overrun)
    ls = lift(pl, sp, g.max_label)
    cl = closed_loop(ls, ctrl, g if ctrl.switching else None)
    lt = simulate_lifted(cl, alpha, stack_w(w, tau, alpha), np.concatenate([x0, np.zeros(pl.m)]), g)
    ref = tr.lifted_state[tau]
    ex = np.max(np.abs(lt.x - ref) / (1 + np.abs(ref)))
    # step z between the first and last effective instants
    zs = tr.z[tau[0]:tau[-1]].ravel()
    zl = np.concatenate(lt.z) if lt.z else np.zeros(0)
    ez = np.max(np.abs(zs - zl) / (1 + np.abs(zs)), initial=0.0)
    return ex, ez, float(np.sum(zs ** 2)), lt.energy_z()


def hinf_sweep(A, Bw, C, Dw, points=10_000):
    """Peak singular value of the transfer matrix over a unit-circle grid."""
    n = A.shape[0]
    best = 0.0
    for w in np.linspace(0.0, np.pi, points):
        G = C @ np.linalg.solve(np.exp(1j * w) * np.eye(n) - A, Bw) + Dw
        best = max(best, np.linalg.svd(G, compute_uv=False)[0])
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

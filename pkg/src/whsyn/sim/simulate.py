"""Step-level and lifted simulation, miss-sequence generation and the tau/alpha maps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..constraints import InadmissibleLabel, WHConstraint, WHGraph, admits, advance, convert
from ..lifting import Overrun, Plant, StrategyPair
from ..lmi.certificate import Controller
from . import _kernels
from .trace import LiftedTrace, Trace


class InadmissibleSequence(ValueError):
    """Hit/miss sequence violating the constraint or starting with a miss."""


@dataclass(frozen=True)
class MissGeneratorConfig:
    constraint: WHConstraint
    pmiss: float
    length: int
    seed: int = 0
    warmup_steps: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pmiss <= 1.0:
            raise ValueError(f"pmiss must lie in [0, 1], got {self.pmiss}")
        if self.length < 1:
            raise ValueError("length must be >= 1")


def rng_for(seed: int) -> np.random.Generator:
    """PCG64 stream for ``seed``; identical on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


def generate_mu(cfg: MissGeneratorConfig) -> np.ndarray:
    """Admissible hit/miss sequence; misses are taken greedily with probability ``pmiss``."""
    c = convert(cfg.constraint)
    draws = rng_for(cfg.seed).random(cfg.length)
    mu = _kernels.gen_mu(c.k, c.s, float(cfg.pmiss), draws, int(cfg.warmup_steps))
    if _kernels.window_max_zeros(mu, c.s) > c.k:
        raise AssertionError("generator produced an inadmissible sequence")
    return mu


def mu_to_tau_alpha(mu: Sequence[int], overrun) -> tuple[np.ndarray, np.ndarray]:
    """Controller-effective instants and the miss counts between them.

    Kill: ``tau = {t | mu(t) = 1}``; Skip: ``tau = {t | mu(t-1) = 1}``.
    """
    mu = np.asarray(mu)
    if mu.size == 0 or mu[0] != 1:
        raise InadmissibleSequence("mu must start with a hit")
    hits = np.flatnonzero(mu == 1)
    alpha = np.diff(hits) - 1
    tau = hits + 1 if Overrun(overrun) is Overrun.SKIP else hits
    return tau, alpha


def lifted_schedule(mu: Sequence[int], overrun) -> tuple[np.ndarray, np.ndarray]:
    """``(tau, alpha)`` covering a step trace from ``t = 0``.

    Under Skip the first job activates at 0 and reads the initial state, so a
    leading label-0 step from ``t = 0`` is prepended; the initial node carries
    a label-0 self-loop, so the node sequence is unchanged.
    """
    tau, alpha = mu_to_tau_alpha(mu, overrun)
    if Overrun(overrun) is Overrun.SKIP:
        tau = np.concatenate([[0], tau])
        alpha = np.concatenate([[0], alpha])
    return tau, alpha


def _as_controller(controller) -> Controller:
    return controller if isinstance(controller, Controller) else Controller.nonswitching(controller)


def _prepare(plant: Plant, controller, g: WHGraph, mu, w, x0, u0, check: bool):
    mu = np.ascontiguousarray(mu, dtype=np.int64)
    N = mu.shape[0]
    if N == 0 or mu[0] != 1:
        raise InadmissibleSequence("mu must start with a hit")
    if check and g.constraint is not None and not admits(mu, g.constraint):
        raise InadmissibleSequence(f"mu violates {g.constraint}")
    ctrl = _as_controller(controller)
    nx = plant.n + plant.m
    gains = np.ascontiguousarray(ctrl.gain_stack(g), dtype=float)
    if gains.shape[1:] != (plant.m, nx):
        raise ValueError(f"gain shape {gains.shape[1:]} does not match ({plant.m}, {nx})")
    wfull = np.zeros((N, plant.q))
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(-1, plant.q) if plant.q else np.zeros((0, 0))
        k = min(len(w), N)
        wfull[:k] = w[:k]
    x0 = np.zeros(plant.n) if x0 is None else np.asarray(x0, dtype=float).reshape(plant.n)
    u0 = np.zeros(plant.m) if u0 is None else np.asarray(u0, dtype=float).reshape(plant.m)
    return mu, gains, wfull, x0, u0


def simulate_steps(plant: Plant, controller, sp: StrategyPair, g: WHGraph, mu, w=None, x0=None, u0=None,
                   *, check: bool = True, stop_tol: float = 0.0, w_end: Optional[int] = None) -> Trace:
    """Period-by-period closed loop.

    ``w`` may be shorter than ``mu``; it is zero afterwards.  With
    ``stop_tol > 0`` the run ends early once the lifted state norm falls
    below it after ``w_end``.
    """
    mu, gains, wfull, x0, u0 = _prepare(plant, controller, g, mu, w, x0, u0, check)
    if g.nodes != tuple(range(g.n_nodes)):
        raise ValueError("simulation needs nodes numbered 0..n-1")
    trans = g.transition_table()
    if w_end is None:
        w_end = int(np.max(np.flatnonzero(np.any(wfull != 0, axis=1)), initial=-1)) + 1
    A, B, Bw, C, D, Dw = (np.array(M, dtype=float, order="C") for M in (plant.A, plant.B, plant.Bw, plant.C, plant.D, plant.Dw))
    x, u, ua, uc, z, node, status, steps, bad_t = _kernels.step_sim(
        A, B, Bw, C, D, Dw, gains, trans, int(g.initial), mu, wfull, x0, u0,
        sp.overrun is Overrun.SKIP, sp.actuator.value == "Hold", float(stop_tol), int(w_end))
    if status == _kernels.INADMISSIBLE:
        raise InadmissibleLabel(f"miss burst ending at t={bad_t} has no edge in the graph")
    if status != _kernels.OK:
        raise InadmissibleSequence("mu must start with a hit")
    N = steps
    meta = {"strategy": str(sp), "constraint": None if g.constraint is None else str(g.constraint)}
    return Trace(mu=mu[:N], x=x[:N + 1], u=u[:N + 1], ua=ua[:N], uc=uc[:N], w=wfull[:N], z=z[:N],
                 node=node[:N], meta=meta)


def run_until_decay(plant: Plant, controller, sp: StrategyPair, g: WHGraph, mu, w, x0=None,
                    *, tol: float = 1e-9, cap: int = 200_000) -> Trace:
    """Extend ``mu`` with hits and ``w`` with zeros; stop once the state is below ``tol``."""
    mu = np.asarray(mu, dtype=np.int64)
    w = np.asarray(w, dtype=float).reshape(-1, plant.q)
    N = max(cap, len(mu), len(w))
    mu_ext = np.ones(N, dtype=np.int64)
    mu_ext[:len(mu)] = mu
    w_end = max(len(w), len(mu))
    return simulate_steps(plant, controller, sp, g, mu_ext, w, x0, stop_tol=tol, w_end=w_end)


def stack_w(w: np.ndarray, tau: np.ndarray, alpha: np.ndarray) -> list:
    """Per lifted step, the disturbance samples ``w(tau_k) .. w(tau_{k+1} - 1)`` as one column."""
    out = []
    for k, a in enumerate(alpha):
        t0 = tau[k]
        out.append(np.asarray(w[t0:t0 + a + 1]).reshape(-1))
    return out


def simulate_lifted(closed, alpha: Sequence[int], w_tilde: Optional[list], x0, graph: Optional[WHGraph] = None,
                    start_node=None) -> LiftedTrace:
    """Iterate the switched closed loop along ``alpha``.

    ``closed`` is the output of :func:`whsyn.lifting.closed_loop`: a list per
    label, or a dict per edge ``(i, j, l)`` which then needs ``graph``.
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    x = np.zeros((len(alpha) + 1, np.size(x0)))
    x[0] = np.asarray(x0, dtype=float).ravel()
    zs = []
    nodes = np.zeros(len(alpha) + 1, dtype=np.int64)
    node = start_node if start_node is not None else (graph.initial if graph is not None else 0)
    nodes[0] = node
    for k, a in enumerate(alpha):
        if graph is not None:
            nxt = advance(graph, node, int(a))
        if isinstance(closed, dict):
            md = closed[(node, nxt, int(a))]
        else:
            if a >= len(closed):
                raise InadmissibleLabel(f"label {a} beyond the lifted system")
            md = closed[a]
        wk = np.zeros(md.Bw.shape[1]) if w_tilde is None else np.asarray(w_tilde[k], dtype=float)
        x[k + 1] = md.A @ x[k] + md.Bw @ wk
        zs.append(md.C @ x[k] + md.Dw @ wk)
        if graph is not None:
            node = nxt
        nodes[k + 1] = node
    return LiftedTrace(x=x, z=zs, alpha=alpha, nodes=nodes)

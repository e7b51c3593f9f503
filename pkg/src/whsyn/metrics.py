"""Empirical performance measures over simulated traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .constraints import WHGraph
from .lifting import Plant, StrategyPair
from .sim import MissGeneratorConfig, generate_mu, rng_for, run_until_decay, simulate_steps
from .sim.trace import Trace


class ZeroEnergy(ValueError):
    """The disturbance carries no energy, so the ratio is undefined."""


class EmptyWindow(ValueError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    upright_state_index: int = 0
    upright_threshold: float = 0.2
    velocity_indices: tuple = ()
    discard_prefix: int = 0

    def __post_init__(self):
        object.__setattr__(self, "velocity_indices", tuple(int(i) for i in self.velocity_indices))
        if not self.upright_threshold > 0:
            raise ValueError("upright_threshold must be positive")
        if self.upright_state_index < 0 or any(i < 0 for i in self.velocity_indices):
            raise ValueError("state indices must be non-negative")
        if self.discard_prefix < 0:
            raise ValueError("discard_prefix must be non-negative")

    def check(self, n: int) -> None:
        for i in (self.upright_state_index, *self.velocity_indices):
            if i >= n:
                raise ValueError(f"state index {i} out of range for n={n}")

    def to_json(self) -> dict:
        return {"upright_state_index": self.upright_state_index, "upright_threshold": self.upright_threshold,
                "velocity_indices": list(self.velocity_indices), "discard_prefix": self.discard_prefix}


def _states(trace) -> np.ndarray:
    # per-step states x(0..N-1); the terminal row of a Trace is not a step
    if isinstance(trace, Trace):
        return trace.x[:len(trace)]
    return np.atleast_2d(np.asarray(trace, dtype=float))


def _window(trace, cfg: MetricConfig) -> np.ndarray:
    x = _states(trace)
    cfg.check(x.shape[1])
    if x.shape[0] <= cfg.discard_prefix:
        raise EmptyWindow(f"trace of {x.shape[0]} steps has nothing after discard_prefix={cfg.discard_prefix}")
    return x[cfg.discard_prefix:]


def percent_within(trace, cfg: MetricConfig) -> float:
    """Fraction of evaluated steps with ``|x_idx| < threshold``."""
    x = _window(trace, cfg)
    return float(np.mean(np.abs(x[:, cfg.upright_state_index]) < cfg.upright_threshold))


def mean_square(trace, index: int, cfg: MetricConfig) -> float:
    x = _window(trace, cfg)
    if not 0 <= index < x.shape[1]:
        raise ValueError(f"state index {index} out of range")
    return float(np.mean(x[:, index] ** 2))


def empirical_l2_ratio(trace: Trace, *, require_zero_x0: bool = True) -> float:
    """``sqrt(sum |z|^2 / sum |w|^2)`` over the whole trace.

    The trace should run until the state has decayed; a truncated tail only
    lowers the ratio.
    """
    if require_zero_x0 and (np.any(trace.x[0] != 0) or np.any(trace.u[0] != 0)):
        raise ValueError("the l2 ratio needs a zero initial state")
    ew = trace.energy_w()
    if ew <= 0.0:
        raise ZeroEnergy("disturbance has zero energy")
    return float(np.sqrt(trace.energy_z() / ew))


def sample_disturbances(q: int, count: int, rng: np.random.Generator, max_len: int = 20) -> list[np.ndarray]:
    """Unit impulses on each channel first, then Gaussian bursts of random length <= ``max_len``."""
    if q < 1:
        raise ValueError("plant has no disturbance input")
    out = []
    for j in range(min(q, count)):
        w = np.zeros((1, q))
        w[0, j] = 1.0
        out.append(w)
    while len(out) < count:
        L = int(rng.integers(1, max_len + 1))
        out.append(rng.standard_normal((L, q)))
    return out


@dataclass
class L2Check:
    worst_ratio: float
    gamma: Optional[float]
    ratios: np.ndarray
    truncated: int = 0

    @property
    def passed(self) -> bool:
        return self.gamma is not None and self.worst_ratio <= self.gamma * (1 + 1e-6)

    def to_json(self) -> dict:
        return {"worst_ratio": self.worst_ratio, "gamma": self.gamma, "pairs": int(self.ratios.size),
                "truncated": self.truncated, "passed": self.passed}


def l2_check(plant: Plant, controller, sp: StrategyPair, g: WHGraph, gamma: Optional[float], *,
             pairs: int = 500, seed: int = 0, length: int = 60, cap: int = 20_000, tol: float = 1e-9) -> L2Check:
    """Worst empirical l2 ratio over seeded (mu, w) pairs with random miss rates."""
    rng = rng_for(seed)
    ws = sample_disturbances(plant.q, pairs, rng)
    ratios = np.zeros(pairs)
    truncated = 0
    for k, w in enumerate(ws):
        pm = float(rng.random())
        mu = generate_mu(MissGeneratorConfig(g.constraint, pm, max(length, len(w)), seed=seed * 100_003 + k))
        tr = run_until_decay(plant, controller, sp, g, mu, w, tol=tol, cap=cap)
        truncated += len(tr) >= cap
        ratios[k] = empirical_l2_ratio(tr)
    return L2Check(float(ratios.max()), gamma, ratios, truncated)


@dataclass
class DecayCheck:
    worst: float
    patterns: int
    steps: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst < self.tol

    def to_json(self) -> dict:
        return {"worst_relative_norm": self.worst, "patterns": self.patterns, "steps": self.steps,
                "tol": self.tol, "passed": self.passed}


def decay_check(plant: Plant, controller, sp: StrategyPair, g: WHGraph, *, patterns: int = 100,
                steps: int = 2000, tol: float = 1e-6, seed: int = 0, pmiss: Optional[float] = None) -> DecayCheck:
    """Free response (w = 0) from random ``x0``: worst ``|x(steps)| / |x0|`` across patterns.

    ``pmiss=None`` draws a fresh miss rate per pattern.
    """
    rng = rng_for(seed)
    worst = 0.0
    for k in range(patterns):
        pm = float(rng.random()) if pmiss is None else pmiss
        x0 = rng.standard_normal(plant.n)
        mu = generate_mu(MissGeneratorConfig(g.constraint, pm, steps, seed=seed * 100_003 + k))
        tr = simulate_steps(plant, controller, sp, g, mu, None, x0)
        rel = float(np.linalg.norm(tr.x[-1]) / np.linalg.norm(x0))
        worst = max(worst, rel if np.isfinite(rel) else np.inf)
    return DecayCheck(worst, patterns, steps, tol)


def summarize(traces: Sequence[Trace], cfg: MetricConfig) -> dict:
    """Mean and standard deviation of the per-trace metrics."""
    pu = np.array([percent_within(t, cfg) for t in traces])
    out = {"runs": len(traces), "percupright_avg": float(pu.mean()), "percupright_std": float(pu.std())}
    for i in cfg.velocity_indices:
        ms = np.array([mean_square(t, i, cfg) for t in traces])
        out[f"errsq_x{i}_avg"] = float(ms.mean())
        out[f"errsq_x{i}_std"] = float(ms.std())
    return out


def format_table(rows: Iterable[tuple[str, dict]], velocity_indices: Sequence[int] = ()) -> str:
    """Plain-text table, one row per labelled summary."""
    rows = list(rows)
    cols = ["percupright avg", "percupright std"] + [f"errsq x{i} avg" for i in velocity_indices]
    keys = ["percupright_avg", "percupright_std"] + [f"errsq_x{i}_avg" for i in velocity_indices]
    w0 = max([len("case")] + [len(r[0]) for r in rows])
    lines = ["  ".join(["case".ljust(w0)] + [c.rjust(16) for c in cols])]
    for name, d in rows:
        cells = []
        for k in keys:
            v = d.get(k)
            cells.append(("—" if v is None else f"{v:.4f}").rjust(16))
        lines.append("  ".join([name.ljust(w0)] + cells))
    return "\n".join(lines) + "\n"

"""Plant model and the lifted switched-system matrices.

One lifted step spans a controller-effective instant, ``l`` misses and the
next effective instant.  The lifted state is ``[x; u]`` with ``u(t)`` the
input applied during period ``t`` (the one-period-delayed actuation).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np


class Actuator(str, enum.Enum):
    ZERO = "Zero"
    HOLD = "Hold"


class Overrun(str, enum.Enum):
    KILL = "Kill"
    SKIP = "Skip"


@dataclass(frozen=True)
class StrategyPair:
    actuator: Actuator
    overrun: Overrun

    def __post_init__(self):
        object.__setattr__(self, "actuator", Actuator(self.actuator))
        object.__setattr__(self, "overrun", Overrun(self.overrun))

    @classmethod
    def parse(cls, text: str) -> "StrategyPair":
        """Parse ``"Kill+Zero"`` / ``"Skip+Hold"`` (either order)."""
        parts = [p.strip().capitalize() for p in text.replace("-", "+").split("+")]
        act = [p for p in parts if p in ("Zero", "Hold")]
        ovr = [p for p in parts if p in ("Kill", "Skip")]
        if len(parts) != 2 or len(act) != 1 or len(ovr) != 1:
            raise ValueError(f"strategy pair must be Kill|Skip + Zero|Hold, got {text!r}")
        return cls(Actuator(act[0]), Overrun(ovr[0]))

    def __str__(self):
        return f"{self.overrun.value}+{self.actuator.value}"


ALL_STRATEGIES = tuple(StrategyPair(a, o) for o in Overrun for a in Actuator)


def _mat(a, rows: int, cols: int, name: str) -> np.ndarray:
    """Coerce ``a`` to ``rows x cols``; -1 infers one side, empty or scalar 0 means zeros."""
    a = np.asarray(a, dtype=float)
    if a.size == 0 or (a.ndim == 0 and a == 0 and -1 not in (rows, cols)):
        return np.zeros((max(rows, 0), max(cols, 0)))
    try:
        a = a.reshape(rows, cols)
    except ValueError:
        raise ValueError(f"{name}: cannot read shape {a.shape} as ({rows}, {cols})") from None
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class Plant:
    """``x+ = A x + B u + Bw w``, ``z = C x + D u + Dw w`` (discrete time).

    ``q`` or ``p`` may be zero for stability-only workflows.
    """

    A: np.ndarray
    B: np.ndarray
    Bw: np.ndarray = ()
    C: np.ndarray = ()
    D: np.ndarray = 0.0
    Dw: np.ndarray = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or not np.all(np.isfinite(A)):
            raise ValueError(f"A must be a finite square matrix, got shape {A.shape}")
        B = _mat(self.B, n, -1, "B")
        m = B.shape[1]
        if m < 1:
            raise ValueError("plant needs at least one input")
        Bw = _mat(self.Bw, n, -1, "Bw") if np.size(self.Bw) else np.zeros((n, 0))
        q = Bw.shape[1]
        C = _mat(self.C, -1, n, "C") if np.size(self.C) else np.zeros((0, n))
        p = C.shape[0]
        D = _mat(self.D, p, m, "D")
        Dw = _mat(self.Dw, p, q, "Dw")
        for name, M in (("A", A), ("B", B), ("Bw", Bw), ("C", C), ("D", D), ("Dw", Dw)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.Bw.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.n, self.m, self.q, self.p

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "B", "Bw", "C", "D", "Dw")}

    @classmethod
    def from_json(cls, d: Mapping) -> "Plant":
        return cls(A=d["A"], B=d["B"], Bw=d.get("Bw", []), C=d.get("C", []),
                   D=d.get("D", 0.0), Dw=d.get("Dw", 0.0))


@dataclass(frozen=True, eq=False)
class Mode:
    A: np.ndarray
    B: np.ndarray
    Bw: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Dw: np.ndarray

    def to_json(self) -> dict:
        return {k: {"shape": list(getattr(self, k).shape), "data": getattr(self, k).ravel().tolist()}
                for k in ("A", "B", "Bw", "C", "D", "Dw")}


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    """Mode matrices indexed by the number of consecutive misses ``l``."""

    modes: tuple
    plant: Plant
    strategy: StrategyPair
    r: int

    @property
    def nx(self) -> int:
        """Dimension of the lifted state ``[x; u]``."""
        return self.plant.n + self.plant.m

    def __getitem__(self, l: int) -> Mode:
        return self.modes[l]

    def __len__(self):
        return len(self.modes)

    def check(self) -> None:
        n, m, q, p = self.plant.dims
        nx = n + m
        for l, md in enumerate(self.modes):
            k = l + 1
            expected = {"A": (nx, nx), "B": (nx, m), "Bw": (nx, k * q), "C": (k * p, nx),
                        "D": (k * p, m), "Dw": (k * p, k * q)}
            for name, shape in expected.items():
                got = getattr(md, name).shape
                if got != shape:
                    raise AssertionError(f"mode {l}: {name} has shape {got}, expected {shape}")

    def to_json(self) -> dict:
        return {
            "plant": self.plant.to_json(),
            "strategy": {"actuator": self.strategy.actuator.value, "overrun": self.strategy.overrun.value},
            "r": self.r,
            "modes": [md.to_json() for md in self.modes],
        }


def lift(plant: Plant, sp: StrategyPair, r: int) -> LiftedSystem:
    """Mode matrices for ``l = 0..r`` under the strategy pair ``sp``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    A, B, Bw, C, D, Dw = plant.A, plant.B, plant.Bw, plant.C, plant.D, plant.Dw
    n, m, q, p = plant.dims
    hold = sp.actuator is Actuator.HOLD
    skip = sp.overrun is Overrun.SKIP

    # powers[k] = A^k, gsum[k] = sum_{i<k} A^i B
    powers = [np.eye(n)]
    gsum = [np.zeros((n, m))]
    for _ in range(r + 1):
        gsum.append(gsum[-1] + powers[-1] @ B)
        powers.append(A @ powers[-1])

    zero_row = np.zeros((m, n + m))
    modes = []
    for l in range(r + 1):
        k = l + 1
        drift = gsum[l + 1] if (skip and hold) else powers[l] @ B
        Al = np.block([[powers[l + 1], drift], [zero_row]])

        if skip or l == 0:
            Bl = np.vstack([np.zeros((n, m)), np.eye(m)])
        elif hold:
            Bl = np.vstack([gsum[l], np.eye(m)])
        else:
            Bl = np.vstack([powers[l - 1] @ B, np.zeros((m, m))])

        Cl = np.zeros((k * p, n + m))
        Dl = np.zeros((k * p, m))
        for i in range(k):
            rows = slice(i * p, (i + 1) * p)
            Cl[rows, :n] = C @ powers[i]
            if skip and hold:
                Cl[rows, n:] = D + C @ gsum[i]
            else:
                Cl[rows, n:] = D if i == 0 else C @ powers[i - 1] @ B
            if not skip and i >= 1:
                if i == 1:
                    Dl[rows] = D
                elif hold:
                    Dl[rows] = D + C @ gsum[i - 1]
                else:
                    Dl[rows] = C @ powers[i - 2] @ B

        Bwl = np.zeros((n + m, k * q))
        Dwl = np.zeros((k * p, k * q))
        for j in range(k):
            cols = slice(j * q, (j + 1) * q)
            Bwl[:n, cols] = powers[l - j] @ Bw
            for i in range(k):
                rows = slice(i * p, (i + 1) * p)
                if i == j:
                    Dwl[rows, cols] = Dw
                elif i > j:
                    Dwl[rows, cols] = C @ powers[i - 1 - j] @ Bw
        modes.append(Mode(Al, Bl, Bwl, Cl, Dl, Dwl))

    ls = LiftedSystem(modes=tuple(modes), plant=plant, strategy=sp, r=r)
    ls.check()
    return ls


@dataclass(frozen=True, eq=False)
class ClosedLoopMode:
    A: np.ndarray
    Bw: np.ndarray
    C: np.ndarray
    Dw: np.ndarray


def closed_loop(ls: LiftedSystem, controller, graph=None):
    """Closed-loop mode families.

    With a non-switching gain returns a list indexed by ``l``.  With a
    switching controller (``graph`` required) returns a dict keyed by the
    edge ``(i, j, l)``, each using the gain of the source node ``i``.
    """
    from .lmi.certificate import Controller

    if not isinstance(controller, Controller):
        controller = Controller.nonswitching(controller)
    _check_gain_shapes(ls, controller)

    def one(l, K):
        md = ls[l]
        return ClosedLoopMode(md.A + md.B @ K, md.Bw, md.C + md.D @ K, md.Dw)

    if not controller.switching:
        K = controller.gain()
        return [one(l, K) for l in range(len(ls))]
    if graph is None:
        raise ValueError("switching controller needs the graph")
    return {(i, j, l): one(l, controller.gain(i)) for i, j, l in graph.edges}


def _check_gain_shapes(ls: LiftedSystem, controller) -> None:
    shape = (ls.plant.m, ls.nx)
    for K in controller.gains.values():
        if K.shape != shape:
            raise ValueError(f"gain has shape {K.shape}, expected {shape}")

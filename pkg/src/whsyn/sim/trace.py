from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trace:
    """Step-indexed record of one run.

    ``x`` and ``u`` hold ``N + 1`` rows (the last is the terminal state);
    every other signal holds ``N`` rows.  ``uc`` is NaN on missed periods.
    ``node`` is the graph node whose gain the job running at ``t`` uses.
    """

    mu: np.ndarray
    x: np.ndarray
    u: np.ndarray
    ua: np.ndarray
    uc: np.ndarray
    w: np.ndarray
    z: np.ndarray
    node: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.mu.shape[0]

    @property
    def lifted_state(self) -> np.ndarray:
        """``[x; u]`` for ``t = 0..N``."""
        return np.hstack([self.x, self.u])

    def energy_z(self) -> float:
        return float(np.sum(self.z ** 2))

    def energy_w(self) -> float:
        return float(np.sum(self.w ** 2))

    def header(self) -> list[str]:
        n, m = self.x.shape[1], self.u.shape[1]
        q, p = self.w.shape[1], self.z.shape[1]

        def names(base, k):
            return [base] if k == 1 and base.startswith("u") else [f"{base}_{i}" for i in range(k)]

        return (["t", "mu", "node"] + names("x", n) + names("u", m) + names("u_a", m) + names("u_c", m)
                + names("w", q) + names("z", p))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.header())
        N = len(self)
        for t in range(N):
            row = [t, int(self.mu[t]), int(self.node[t])]
            for arr in (self.x[t], self.u[t], self.ua[t], self.uc[t], self.w[t], self.z[t]):
                row.extend("" if np.isnan(v) else repr(float(v)) for v in arr)
            wr.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass
class LiftedTrace:
    """Trajectory of the switched system: one row of ``x`` per lifted step."""

    x: np.ndarray
    z: list
    alpha: np.ndarray
    nodes: np.ndarray

    def energy_z(self) -> float:
        return float(sum(np.sum(zk ** 2) for zk in self.z))

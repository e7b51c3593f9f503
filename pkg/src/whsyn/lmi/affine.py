"""Affine matrix expressions over a flat vector of scalar decision variables.

An :class:`Affine` is ``const + reshape(lin @ x)`` with ``lin`` a sparse
``(rows*cols, N)`` matrix in row-major vectorization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class Layout:
    """Registry of named matrix variables inside the flat decision vector."""

    size: int = 0
    blocks: dict = field(default_factory=dict)

    def _take(self, k: int) -> np.ndarray:
        idx = np.arange(self.size, self.size + k)
        self.size += k
        return idx

    def scalar(self, name) -> None:
        self.blocks[name] = ("scalar", (1, 1), self._take(1))

    def full(self, name, rows: int, cols: int) -> None:
        self.blocks[name] = ("full", (rows, cols), self._take(rows * cols))

    def symmetric(self, name, n: int) -> None:
        self.blocks[name] = ("sym", (n, n), self._take(n * (n + 1) // 2))

    def __contains__(self, name) -> bool:
        return name in self.blocks

    def index_matrix(self, name) -> np.ndarray:
        """Integer matrix mapping each entry to its decision-vector index."""
        kind, (r, c), idx = self.blocks[name]
        if kind == "sym":
            out = np.empty((r, r), dtype=np.int64)
            iu = np.triu_indices(r)
            out[iu] = idx
            out[iu[1], iu[0]] = idx
            return out
        return idx.reshape(r, c)

    def var(self, name) -> "Affine":
        ind = self.index_matrix(name)
        r, c = ind.shape
        lin = sp.csr_matrix((np.ones(r * c), (np.arange(r * c), ind.ravel())), shape=(r * c, self.size))
        return Affine(np.zeros((r, c)), lin)

    def value(self, name, x: np.ndarray) -> np.ndarray:
        ind = self.index_matrix(name)
        out = np.asarray(x)[ind]
        return out[0, 0] if self.blocks[name][0] == "scalar" else out


class Affine:
    __slots__ = ("const", "lin")
    # make ndarray @ Affine dispatch to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, const: np.ndarray, lin):
        self.const = np.asarray(const, dtype=float)
        self.lin = sp.csr_matrix(lin)

    @property
    def shape(self):
        return self.const.shape

    @property
    def nvars(self) -> int:
        return self.lin.shape[1]

    @classmethod
    def constant(cls, M, nvars: int) -> "Affine":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(M, sp.csr_matrix((M.size, nvars)))

    def __add__(self, other):
        if not isinstance(other, Affine):
            other = Affine.constant(other, self.nvars)
        return Affine(self.const + other.const, self.lin + other.lin)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, -self.lin)

    def __sub__(self, other):
        return self + (-other)

    def __rmatmul__(self, M):
        """``M @ self`` for a constant matrix ``M``."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        c = self.shape[1]
        op = sp.kron(sp.csr_matrix(M), sp.identity(c), format="csr")
        return Affine(M @ self.const, op @ self.lin)

    def __matmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        r = self.shape[0]
        op = sp.kron(sp.identity(r), sp.csr_matrix(M.T), format="csr")
        return Affine(self.const @ M, op @ self.lin)

    def __mul__(self, a: float):
        return Affine(a * self.const, a * self.lin)

    __rmul__ = __mul__

    @property
    def T(self) -> "Affine":
        r, c = self.shape
        perm = np.arange(r * c).reshape(r, c).T.ravel()
        return Affine(self.const.T, self.lin[perm])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.const + (self.lin @ x).reshape(self.shape)


def block(rows: list[list], nvars: int) -> Affine:
    """Assemble a block matrix; ``None`` entries are zero blocks.

    Every block row must contain at least one non-``None`` entry that fixes
    its height, and likewise for every block column.
    """
    heights = [next(b.shape[0] for b in row if b is not None) for row in rows]
    widths = [next(rows[i][j].shape[1] for i in range(len(rows)) if rows[i][j] is not None)
              for j in range(len(rows[0]))]
    R, C = sum(heights), sum(widths)
    const = np.zeros((R, C))
    parts = []
    r0 = 0
    for i, row in enumerate(rows):
        c0 = 0
        for j, b in enumerate(row):
            if b is not None:
                h, w = b.shape
                if (h, w) != (heights[i], widths[j]):
                    raise ValueError(f"block ({i},{j}) has shape {b.shape}, expected {(heights[i], widths[j])}")
                const[r0:r0 + h, c0:c0 + w] = b.const
                coo = b.lin.tocoo()
                rr, cc = np.divmod(coo.row, w)
                parts.append(((rr + r0) * C + cc + c0, coo.col, coo.data))
            c0 += widths[j]
        r0 += heights[i]
    if parts:
        ri = np.concatenate([p[0] for p in parts])
        ci = np.concatenate([p[1] for p in parts])
        dv = np.concatenate([p[2] for p in parts])
    else:
        ri = ci = np.zeros(0, dtype=np.int64)
        dv = np.zeros(0)
    lin = sp.csr_matrix((dv, (ri, ci)), shape=(R * C, nvars))
    return Affine(const, lin)

"""Per-edge LMI assembly for analysis and controller synthesis."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..constraints import WHGraph
from ..lifting import LiftedSystem
from .affine import Affine, Layout, block


class ProblemKind(str, enum.Enum):
    ANALYSIS = "analysis"
    NONSWITCHING = "synthesis-nonswitching"
    SWITCHING = "synthesis-switching"


@dataclass
class PSDConstraint:
    """``F0 + reshape(F @ x) >= eps * I`` for one graph edge."""

    F0: np.ndarray
    F: sp.csr_matrix
    edge: tuple

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        M = self.F0 + (self.F @ x).reshape(self.F0.shape)
        return 0.5 * (M + M.T)


@dataclass
class SDPProblem:
    """Minimize ``c @ x`` subject to every constraint map being >= ``eps * I``."""

    c: np.ndarray
    constraints: list
    layout: Layout
    kind: ProblemKind
    eps: float = 1e-6
    stability_only: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.layout.size

    @property
    def n_constraints(self) -> int:
        """Edge inequalities only; optional variable bounds are not counted."""
        return sum(1 for c in self.constraints if not _is_bound(c.edge))


def _is_bound(edge) -> bool:
    """True for the optional extras (variable bounds, decay-rate blocks)."""
    return isinstance(edge, tuple) and len(edge) > 0 and edge[0] in ("bound", "rate")


def _check(ls: LiftedSystem, g: WHGraph, stability_only: bool) -> None:
    if not g.edges:
        raise ValueError("empty graph")
    if g.max_label > ls.r:
        raise ValueError(f"graph uses label {g.max_label} but the lifted system stops at r={ls.r}")
    if not stability_only and (ls.plant.q == 0 or ls.plant.p == 0):
        raise ValueError("performance problem needs q >= 1 and p >= 1; use stability_only")


def _edge_matrix(ls, l, top_left, lower, S_j, gamma, stability_only, nv):
    """Lower block triangle of one edge matrix, mirrored into a symmetric map.

    ``lower`` is the closed-loop ``(A G, C G)`` pair of affine blocks.
    """
    md = ls[l]
    AG, CG = lower
    if stability_only:
        L = [[top_left, None], [AG, S_j]]
    else:
        kq, kp = md.Bw.shape[1], md.C.shape[0]
        gI_q = _scaled_identity(gamma, kq)
        gI_p = _scaled_identity(gamma, kp)
        L = [
            [top_left, None, None, None],
            [AG, S_j, None, None],
            [Affine.constant(np.zeros((kq, ls.nx)), nv), Affine.constant(md.Bw.T, nv), gI_q, None],
            [CG, Affine.constant(np.zeros((kp, ls.nx)), nv), Affine.constant(md.Dw, nv), gI_p],
        ]
    return block(L, nv) + block(_strict_lower(L, nv), nv).T


def _strict_lower(L, nv):
    """Copy of ``L`` with the diagonal blocks replaced by explicit zeros."""
    out = []
    for i, row in enumerate(L):
        new = []
        for j, b in enumerate(row):
            if i == j:
                new.append(Affine.constant(np.zeros(b.shape), nv))
            elif j < i:
                new.append(b)
            else:
                new.append(None)
        out.append(new)
    return out


def _scaled_identity(gamma: Affine, k: int) -> Affine:
    """``gamma * I_k`` for a scalar affine ``gamma``."""
    col = gamma.lin.tocoo()
    rows = np.repeat(np.arange(k) * (k + 1), col.nnz)
    cols = np.tile(col.col, k)
    data = np.tile(col.data, k)
    lin = sp.csr_matrix((data, (rows, cols)), shape=(k * k, gamma.nvars))
    return Affine(gamma.const[0, 0] * np.eye(k), lin)


def _finish(constraints, layout, kind, eps, stability_only, g, ls) -> SDPProblem:
    c = np.zeros(layout.size)
    if not stability_only:
        c[layout.index_matrix("gamma")[0, 0]] = 1.0
    out = []
    for edge, M in constraints:
        out.append(PSDConstraint(F0=M.const, F=M.lin, edge=edge))
    return SDPProblem(c=c, constraints=out, layout=layout, kind=kind, eps=eps,
                      stability_only=stability_only,
                      meta={"n_nodes": g.n_nodes, "n_edges": g.n_edges, "nx": ls.nx, "m": ls.plant.m,
                            "strategy": str(ls.strategy)})


def _layout(ls, g, kind, stability_only) -> Layout:
    nx, m = ls.nx, ls.plant.m
    lay = Layout()
    if not stability_only:
        lay.scalar("gamma")
    for i in g.nodes:
        lay.symmetric(("S", i), nx)
    if kind is ProblemKind.NONSWITCHING:
        lay.full("G", nx, nx)
        lay.full("R", m, nx)
    else:
        for i in g.nodes:
            lay.full(("G", i), nx, nx)
            if kind is ProblemKind.SWITCHING:
                lay.full(("R", i), m, nx)
    return lay


def _norm_bound(X: Affine, bound: float, nv: int) -> Affine:
    """``[[b I, X], [X^T, b I]]``, PSD iff the spectral norm of ``X`` is at most ``b``."""
    r, c = X.shape
    L = [[Affine.constant(bound * np.eye(r), nv), None], [X.T, Affine.constant(bound * np.eye(c), nv)]]
    return block(L, nv) + block(_strict_lower(L, nv), nv).T


def _bound_constraints(lay: Layout, nx: int, bound: float) -> list:
    nv = lay.size
    out = []
    for name in lay.blocks:
        if name == "gamma":
            continue
        X = lay.var(name)
        if isinstance(name, tuple) and name[0] == "S":
            out.append((("bound",) + name, Affine.constant(bound * np.eye(nx), nv) - X))
        else:
            out.append((("bound",) + (name if isinstance(name, tuple) else (name,)), _norm_bound(X, bound, nv)))
    return out


def assemble(ls: LiftedSystem, g: WHGraph, kind: ProblemKind, controller=None, *,
             eps: float = 1e-6, stability_only: bool = False, bound: Optional[float] = None,
             decay_rate: Optional[float] = None) -> SDPProblem:
    """One edge inequality per graph edge ``(i, j, l)``.

    ``bound`` adds ``S_i <= bound I`` and spectral-norm limits on every
    ``G`` and ``R``.  Off by default; it helps when the optimum is only
    approached with unbounded variables (e.g. cheap-control designs with no
    input weight in ``z``).  Any solution stays a valid certificate, the
    bound only makes ``gamma`` more conservative.

    ``decay_rate`` (``rho`` in (0, 1]) adds, per edge, the stability block
    with the closed loop divided by ``rho**(l+1)``.  The Lyapunov function
    ``x' S_i^{-1} x`` then shrinks by ``rho**(2(l+1))`` over every lifted
    step, so free responses decay at least like ``rho**t`` per period.
    """
    kind = ProblemKind(kind)
    _check(ls, g, stability_only)
    if kind is ProblemKind.ANALYSIS and controller is None:
        raise ValueError("analysis needs a controller")
    if decay_rate is not None and not 0 < decay_rate <= 1:
        raise ValueError("decay_rate must lie in (0, 1]")
    lay = _layout(ls, g, kind, stability_only)
    nv = lay.size
    gamma = None if stability_only else lay.var("gamma")
    S = {i: lay.var(("S", i)) for i in g.nodes}
    if kind is ProblemKind.NONSWITCHING:
        G_glob, R_glob = lay.var("G"), lay.var("R")
    else:
        G = {i: lay.var(("G", i)) for i in g.nodes}
        R = {i: lay.var(("R", i)) for i in g.nodes} if kind is ProblemKind.SWITCHING else None

    cons = []
    for (i, j, l) in g.edges:
        md = ls[l]
        if kind is ProblemKind.ANALYSIS:
            K = controller.gain(i)
            Gi = G[i]
            AG = (md.A + md.B @ K) @ Gi
            CG = (md.C + md.D @ K) @ Gi
        else:
            Gi, Ri = (G_glob, R_glob) if kind is ProblemKind.NONSWITCHING else (G[i], R[i])
            AG = md.A @ Gi + md.B @ Ri
            CG = md.C @ Gi + md.D @ Ri
        top_left = Gi + Gi.T - S[i]
        M = _edge_matrix(ls, l, top_left, (AG, CG), S[j], gamma, stability_only, nv)
        cons.append(((i, j, l), M))
        if decay_rate is not None:
            k = 1.0 / decay_rate ** (l + 1)
            cons.append((("rate", i, j, l), _edge_matrix(ls, l, top_left, (k * AG, None), S[j], None, True, nv)))
    if bound is not None:
        if not bound > 0:
            raise ValueError("bound must be positive")
        cons.extend(_bound_constraints(lay, ls.nx, float(bound)))
    prob = _finish(cons, lay, kind, eps, stability_only, g, ls)
    prob.meta["bound"] = bound
    prob.meta["decay_rate"] = decay_rate
    return prob


def assemble_analysis(ls, g, controller, **kw) -> SDPProblem:
    return assemble(ls, g, ProblemKind.ANALYSIS, controller, **kw)


def assemble_synthesis_nonswitching(ls, g, **kw) -> SDPProblem:
    return assemble(ls, g, ProblemKind.NONSWITCHING, **kw)


def assemble_synthesis_switching(ls, g, **kw) -> SDPProblem:
    return assemble(ls, g, ProblemKind.SWITCHING, **kw)


def decision_count(kind: ProblemKind, n_nodes: int, nx: int, m: int, stability_only: bool = False) -> int:
    """Closed-form number of scalar decision variables."""
    kind = ProblemKind(kind)
    sym = nx * (nx + 1) // 2
    g = 0 if stability_only else 1
    if kind is ProblemKind.ANALYSIS:
        return n_nodes * (sym + nx * nx) + g
    if kind is ProblemKind.NONSWITCHING:
        return n_nodes * sym + nx * nx + m * nx + g
    return n_nodes * (sym + nx * nx + m * nx) + g


def edge_matrix_numeric(md, S_i, S_j, G_i, AG, CG, gamma: Optional[float], stability_only: bool) -> np.ndarray:
    """Dense edge matrix from numeric blocks (independent of the affine path)."""
    nx = S_i.shape[0]
    tl = G_i + G_i.T - S_i
    if stability_only:
        return np.block([[tl, AG.T], [AG, S_j]])
    kq, kp = md.Bw.shape[1], md.C.shape[0]
    Zq = np.zeros((kq, nx))
    Zp = np.zeros((kp, nx))
    return np.block([
        [tl, AG.T, Zq.T, CG.T],
        [AG, S_j, md.Bw, Zp.T],
        [Zq, md.Bw.T, gamma * np.eye(kq), md.Dw.T],
        [CG, Zp, md.Dw, gamma * np.eye(kp)],
    ])


def gamma_feasibility(problem: SDPProblem, cap: float) -> SDPProblem:
    """Feasibility version of ``problem``: is there a certificate with ``gamma <= cap``?

    Used by the bisection fallback for backends without an objective.  The
    cap constraint is shifted like every other one, so the effective cap is
    slightly below ``cap``.
    """
    if problem.stability_only:
        raise ValueError("stability-only problems carry no gamma")
    k = problem.layout.index_matrix("gamma")[0, 0]
    F = sp.csr_matrix(([-1.0], ([0], [k])), shape=(1, problem.n_vars))
    cons = list(problem.constraints) + [PSDConstraint(F0=np.array([[float(cap)]]), F=F, edge=("bound", "gamma"))]
    return SDPProblem(c=np.zeros(problem.n_vars), constraints=cons, layout=problem.layout, kind=problem.kind,
                      eps=problem.eps, stability_only=False, meta=dict(problem.meta, gamma_cap=cap))

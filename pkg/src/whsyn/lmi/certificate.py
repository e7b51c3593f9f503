"""Controllers, certificates and their numerical re-check."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..constraints import WHGraph
from ..lifting import LiftedSystem
from .backends import Solution, SolverOptions, Status, solve
from .problems import ProblemKind, SDPProblem, assemble, edge_matrix_numeric

log = logging.getLogger(__name__)

SINGULAR_COND = 1e12


class SingularG(ArithmeticError):
    """G (or some G_i) is too ill-conditioned to invert; try a larger eps."""


@dataclass
class Controller:
    """State feedback on ``[x; u]``: one gain, or one gain per graph node."""

    gains: dict
    switching: bool = False

    @classmethod
    def nonswitching(cls, K) -> "Controller":
        return cls({None: np.atleast_2d(np.asarray(K, dtype=float))}, switching=False)

    @classmethod
    def per_node(cls, gains: dict) -> "Controller":
        return cls({k: np.atleast_2d(np.asarray(v, dtype=float)) for k, v in gains.items()}, switching=True)

    def gain(self, node=None) -> np.ndarray:
        if not self.switching:
            return self.gains[None]
        return self.gains[node]

    def covers(self, g: WHGraph) -> bool:
        return not self.switching or set(g.nodes) <= set(self.gains)

    def gain_stack(self, g: WHGraph) -> np.ndarray:
        """``(n_nodes, m, n+m)`` array in node order (repeated when non-switching)."""
        return np.stack([self.gain(i) for i in g.nodes])

    def to_json(self) -> dict:
        if not self.switching:
            return {"type": "nonswitching", "K": self.gain().tolist()}
        return {"type": "switching", "gains": {str(k): v.tolist() for k, v in sorted(self.gains.items())}}

    @classmethod
    def from_json(cls, d: dict) -> "Controller":
        if d.get("type", "nonswitching") == "nonswitching":
            return cls.nonswitching(d["K"])
        return cls.per_node({int(k): v for k, v in d["gains"].items()})


@dataclass
class Certificate:
    kind: ProblemKind
    gamma: Optional[float]
    eps: float
    S: dict
    G: dict
    R: dict = field(default_factory=dict)
    stability_only: bool = False
    status: Status = Status.OPTIMAL
    info: dict = field(default_factory=dict)
    decay_rate: Optional[float] = None

    def G_of(self, node) -> np.ndarray:
        return self.G[None] if None in self.G else self.G[node]

    def R_of(self, node) -> np.ndarray:
        return self.R[None] if None in self.R else self.R[node]

    def halved(self) -> "Certificate":
        return Certificate(self.kind, self.gamma / 2, self.eps, self.S, self.G, self.R,
                           self.stability_only, self.status, dict(self.info), self.decay_rate)

    def to_json(self) -> dict:
        def node_entry(i):
            d = {"S": self.S[i].tolist()}
            if i in self.G:
                d["G"] = self.G[i].tolist()
            if i in self.R:
                d["R"] = self.R[i].tolist()
            return d
        out = {
            "kind": self.kind.value,
            "gamma": self.gamma,
            "epsilon": self.eps,
            "stability_only": self.stability_only,
            "per_node": {str(i): node_entry(i) for i in sorted(self.S)},
        }
        if self.decay_rate is not None:
            out["decay_rate"] = self.decay_rate
        if None in self.G:
            out["G"] = self.G[None].tolist()
        if None in self.R:
            out["R"] = self.R[None].tolist()
        return out


def certificate_from_solution(sol: Solution, problem: SDPProblem, g: WHGraph) -> Certificate:
    if not sol.optimal:
        raise ValueError(f"solution status is {sol.status.value}")
    lay, x = problem.layout, sol.x
    gamma = None if problem.stability_only else float(lay.value("gamma", x))
    S = {i: lay.value(("S", i), x) for i in g.nodes}
    if problem.kind is ProblemKind.NONSWITCHING:
        G = {None: lay.value("G", x)}
        R = {None: lay.value("R", x)}
    else:
        G = {i: lay.value(("G", i), x) for i in g.nodes}
        R = {i: lay.value(("R", i), x) for i in g.nodes} if problem.kind is ProblemKind.SWITCHING else {}
    return Certificate(problem.kind, gamma, problem.eps, S, G, R, problem.stability_only,
                       sol.status, {"backend": sol.backend, **sol.info}, problem.meta.get("decay_rate"))


def extract_controller(cert: Certificate, g: WHGraph) -> Controller:
    """``K = R G^{-1}`` (per node for switching synthesis)."""
    if cert.kind is ProblemKind.ANALYSIS:
        raise ValueError("analysis certificates carry no controller")
    conds = {}

    def solve_gain(key):
        G, R = cert.G[key], cert.R[key]
        cond = float(np.linalg.cond(G))
        conds[key] = cond
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise SingularG(f"G{'' if key is None else '_' + str(key)} has condition number {cond:.3g}; "
                            "raise eps and solve again")
        return np.linalg.solve(G.T, R.T).T

    if cert.kind is ProblemKind.NONSWITCHING:
        ctrl = Controller.nonswitching(solve_gain(None))
    else:
        ctrl = Controller.per_node({i: solve_gain(i) for i in g.nodes})
    cert.info["condition_numbers"] = {str(k): v for k, v in conds.items()}
    return ctrl


@dataclass
class VerifyReport:
    passed: bool
    min_eig_per_edge: dict
    threshold: float

    @property
    def worst(self) -> float:
        return min(self.min_eig_per_edge.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "threshold": self.threshold,
                "min_eig_per_edge": {"-".join(map(str, e)): v for e, v in self.min_eig_per_edge.items()}}


def verify_certificate(cert: Certificate, ls: LiftedSystem, g: WHGraph,
                       controller: Optional[Controller] = None, tol_verify: float = 1e-7) -> VerifyReport:
    """Rebuild every edge matrix from the solved values and check its spectrum."""
    mins = {}
    for (i, j, l) in g.edges:
        md = ls[l]
        Gi = cert.G_of(i)
        if cert.kind is ProblemKind.ANALYSIS:
            K = controller.gain(i)
            AG = (md.A + md.B @ K) @ Gi
            CG = (md.C + md.D @ K) @ Gi
        else:
            Ri = cert.R_of(i)
            AG = md.A @ Gi + md.B @ Ri
            CG = md.C @ Gi + md.D @ Ri
        M = edge_matrix_numeric(md, cert.S[i], cert.S[j], Gi, AG, CG, cert.gamma, cert.stability_only)
        mins[(i, j, l)] = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        if cert.decay_rate is not None:
            M = edge_matrix_numeric(md, cert.S[i], cert.S[j], Gi, AG / cert.decay_rate ** (l + 1), None, None, True)
            mins[("rate", i, j, l)] = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    thr = cert.eps - tol_verify
    return VerifyReport(all(v >= thr for v in mins.values()), mins, thr)


@dataclass
class Result:
    """Outcome of one analysis or synthesis run."""

    status: Status
    problem: SDPProblem
    solution: Solution
    certificate: Optional[Certificate] = None
    controller: Optional[Controller] = None
    report: Optional[VerifyReport] = None

    @property
    def gamma(self) -> Optional[float]:
        return None if self.certificate is None else self.certificate.gamma

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def to_json(self) -> dict:
        out = {"status": self.status.value, "kind": self.problem.kind.value,
               "n_vars": self.problem.n_vars, "n_constraints": self.problem.n_constraints,
               "solver": {k: _jsonable(v) for k, v in self.solution.info.items()},
               "backend": self.solution.backend}
        if self.certificate is not None:
            out.update(self.certificate.to_json())
        if self.controller is not None:
            out["controller"] = self.controller.to_json()
        if self.report is not None:
            out["verify"] = self.report.to_json()
        return out


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def run(ls: LiftedSystem, g: WHGraph, kind, controller: Optional[Controller] = None, *,
        eps: float = 1e-6, stability_only: bool = False, bound: Optional[float] = None,
        decay_rate: Optional[float] = None, opts: Optional[SolverOptions] = None) -> Result:
    """Assemble, solve, extract and verify in one go.

    Without an explicit ``bound``, a breakdown of the solver is retried once
    with ``opts.fallback_bound``.  Infeasibility of that bounded retry proves
    nothing about the original problem; only a certified-infeasible
    stability-only problem turns the breakdown into ``INFEASIBLE``.
    ``decay_rate`` is passed through to :func:`assemble`.
    """
    kind = ProblemKind(kind)
    opts = opts or SolverOptions()
    if controller is not None and not controller.covers(g):
        raise ValueError("switching controller does not cover every graph node")
    problem = assemble(ls, g, kind, controller, eps=eps, stability_only=stability_only, bound=bound,
                       decay_rate=decay_rate)
    sol = solve(problem, opts)
    if sol.status is Status.NUMERICAL_TROUBLE and bound is None and opts.fallback_bound:
        log.info("solver trouble; retrying with variable bound %g", opts.fallback_bound)
        bounded = assemble(ls, g, kind, controller, eps=eps, stability_only=stability_only,
                           bound=opts.fallback_bound, decay_rate=decay_rate)
        retry = solve(bounded, opts)
        if retry.optimal:
            retry.info["bound_fallback"] = opts.fallback_bound
            problem, sol = bounded, retry
        else:
            sol.info["bound_fallback_status"] = retry.status.value
    if sol.status is Status.NUMERICAL_TROUBLE and not stability_only:
        # the stability blocks are principal submatrices of the performance ones,
        # so a certified-infeasible stability problem settles the question
        stab = solve(assemble(ls, g, kind, controller, eps=eps, stability_only=True,
                              decay_rate=decay_rate), opts)
        sol.info["stability_only_status"] = stab.status.value
        if stab.status is Status.INFEASIBLE:
            sol.status = Status.INFEASIBLE
    if not sol.optimal:
        return Result(sol.status, problem, sol)
    cert = certificate_from_solution(sol, problem, g)
    if kind is ProblemKind.ANALYSIS:
        ctrl = controller
    else:
        ctrl = extract_controller(cert, g)
    report = verify_certificate(cert, ls, g, ctrl)
    return Result(Status.OPTIMAL, problem, sol, cert, ctrl, report)


def analyze(ls, g, controller, **kw) -> Result:
    if not isinstance(controller, Controller):
        controller = Controller.nonswitching(controller)
    return run(ls, g, ProblemKind.ANALYSIS, controller, **kw)


def synthesize(ls, g, switching: bool = True, **kw) -> Result:
    return run(ls, g, ProblemKind.SWITCHING if switching else ProblemKind.NONSWITCHING, **kw)


def header_text(controller: Controller, g: WHGraph, name: str = "WHSYN") -> str:
    """C header with the gains as one flat row-major array and the node transition table."""
    K0 = controller.gain(g.nodes[0] if controller.switching else None)
    m, nx = K0.shape
    stack = controller.gain_stack(g) if controller.switching else K0[None]
    table = g.transition_table()
    flat = ", ".join(f"{v:.17g}" for v in stack.ravel())
    trans = ", ".join(str(int(v)) for v in table.ravel())
    lines = [
        f"#ifndef {name}_GAINS_H",
        f"#define {name}_GAINS_H",
        "",
        f"#define {name}_N_NODES {stack.shape[0]}",
        f"#define {name}_N_INPUTS {m}",
        f"#define {name}_N_STATE {nx}",
        f"#define {name}_N_LABELS {table.shape[1]}",
        f"#define {name}_INITIAL_NODE {g.initial}",
        "",
        f"/* gains[node][input][state], {stack.size} coefficients */",
        f"static const double {name.lower()}_gains[{stack.size}] = {{{flat}}};",
        "",
        "/* next_node[node][label], -1 where the miss burst is inadmissible */",
        f"static const int {name.lower()}_next_node[{table.size}] = {{{trans}}};",
        "",
        f"#endif /* {name}_GAINS_H */",
    ]
    return "\n".join(lines) + "\n"


def dumps(result: Result) -> str:
    return json.dumps(result.to_json(), indent=2, default=_jsonable)

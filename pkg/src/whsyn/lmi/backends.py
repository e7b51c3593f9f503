"""Conic solver adapters.

Every backend receives an :class:`SDPProblem` and returns a :class:`Solution`.
Infeasibility is a status, not an exception.
"""
from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problems import SDPProblem

log = logging.getLogger(__name__)

DEFAULT_BACKEND = "cvxopt"
# primal residual at the iteration cap beyond which a cvxopt run counts as diverged
DIVERGED = 1e3
# how far below eps a returned point may sit and still count as a solution
ACCEPT_SLACK = 1e-7


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass
class SolverOptions:
    backend: Optional[str] = None
    # relative/absolute gap and feasibility tolerances handed to the backend
    tolerance: float = 1e-8
    max_iters: int = 100
    # solve with eps * (1 + margin) so the returned point clears eps after round-off
    margin: float = 0.5
    # variable bound tried when an unbounded solve breaks down; None disables the retry
    fallback_bound: Optional[float] = 1e4
    verbose: bool = False

    def resolved_backend(self) -> str:
        return (self.backend or os.environ.get("WHSYN_BACKEND") or DEFAULT_BACKEND).lower()


@dataclass
class Solution:
    status: Status
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    backend: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


_BACKENDS: dict[str, Callable[[SDPProblem, SolverOptions], Solution]] = {}


def register_backend(name: str):
    def deco(fn):
        _BACKENDS[name.lower()] = fn
        return fn
    return deco


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def solve(problem: SDPProblem, opts: Optional[SolverOptions] = None) -> Solution:
    opts = opts or SolverOptions()
    name = opts.resolved_backend()
    try:
        fn = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown SDP backend {name!r}; available: {available_backends()}") from None
    try:
        sol = fn(problem, opts)
    except (ArithmeticError, ValueError) as exc:
        log.warning("backend %s failed: %s", name, exc)
        return Solution(Status.NUMERICAL_TROUBLE, backend=name, info={"error": str(exc)})
    sol.backend = name
    if sol.optimal:
        sol.info["min_eig_margin"] = margin = min_margin(problem, sol.x)
        # inexact solvers may call a point optimal that misses the inequalities outright
        if margin < -ACCEPT_SLACK:
            log.warning("backend %s returned a point violating the inequalities by %.2e", name, -margin)
            sol.status = Status.NUMERICAL_TROUBLE
    return sol


def min_margin(problem: SDPProblem, x: np.ndarray) -> float:
    """Smallest eigenvalue of any constraint map minus ``eps``."""
    return min(np.linalg.eigvalsh(c.evaluate(x))[0] for c in problem.constraints) - problem.eps


def _shift(problem: SDPProblem, opts: SolverOptions) -> float:
    return problem.eps * (1.0 + opts.margin)


@register_backend("cvxopt")
def _solve_cvxopt(problem: SDPProblem, opts: SolverOptions) -> Solution:
    """Interior-point solve; loosens the tolerance when the tight run breaks down.

    Tight tolerances occasionally fail on (near-)infeasible instances; the
    looser rerun is used to classify, not to weaken an optimal answer.
    """
    ladder = [opts.tolerance] + [t for t in (1e-8, 1e-7, 1e-6) if t > opts.tolerance]
    tried = []
    for tol in ladder:
        try:
            sol = _cvxopt_once(problem, opts, tol)
        except ArithmeticError as exc:
            tried.append(f"{tol:g}: {exc}")
            continue
        sol.info["tolerance_used"] = tol
        if tried:
            sol.info["retries"] = tried
        if sol.status is not Status.NUMERICAL_TROUBLE:
            return sol
        tried.append(f"{tol:g}: {sol.info.get('raw_status')}")
        # iterates running off to infinity ignore the tolerance; loosening only repeats the run
        if (sol.info.get("iterations") or 0) >= opts.max_iters and \
                (sol.info.get("primal_infeasibility") or 0.0) > DIVERGED:
            tried.append("diverged")
            break
    return Solution(Status.NUMERICAL_TROUBLE, info={"retries": tried})


def _cvxopt_once(problem: SDPProblem, opts: SolverOptions, tol: float) -> Solution:
    import cvxopt
    from cvxopt import solvers

    shift = _shift(problem, opts)
    c = cvxopt.matrix(problem.c.astype(float))
    Gs, hs = [], []
    for con in problem.constraints:
        # s = F0 - shift*I + F x >= 0  <=>  G x + s = h with G = -F, h = F0 - shift*I
        k = con.dim
        coo = (-con.F).tocoo()
        Gs.append(cvxopt.spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), (k * k, problem.n_vars)))
        hs.append(cvxopt.matrix(con.F0 - shift * np.eye(k)))
    options = {
        "show_progress": opts.verbose,
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
        "maxiters": opts.max_iters,
    }
    res = solvers.sdp(c, Gs=Gs, hs=hs, options=options)
    status = res["status"]
    info = {"raw_status": status, "iterations": res.get("iterations"),
            "primal_infeasibility": res.get("primal infeasibility"),
            "dual_infeasibility": res.get("dual infeasibility"), "gap": res.get("gap")}
    if status == "optimal":
        x = np.array(res["x"]).ravel()
        return Solution(Status.OPTIMAL, x, float(problem.c @ x), info=info)
    if status == "primal infeasible":
        return Solution(Status.INFEASIBLE, info=info)
    if status == "dual infeasible":
        return Solution(Status.UNBOUNDED, info=info)
    # 'unknown': accept the iterate only if it is clearly feasible and the gap is small
    if res.get("x") is not None:
        x = np.array(res["x"]).ravel()
        pinf = res.get("primal infeasibility") or np.inf
        dinf = res.get("dual infeasibility") or np.inf
        if min_margin(problem, x) >= -1e-9 and pinf < 1e-6 and dinf < 1e-6:
            info["accepted_inaccurate"] = True
            return Solution(Status.OPTIMAL, x, float(problem.c @ x), info=info)
    return Solution(Status.NUMERICAL_TROUBLE, info=info)


def _cvxpy_backend(solver_name: str):
    def run(problem: SDPProblem, opts: SolverOptions) -> Solution:
        import cvxpy as cp

        shift = _shift(problem, opts)
        x = cp.Variable(problem.n_vars)
        cons = []
        for con in problem.constraints:
            k = con.dim
            M = cp.reshape(con.F @ x, (k, k), order="C") + (con.F0 - shift * np.eye(k))
            cons.append(0.5 * (M + M.T) >> 0)
        prob = cp.Problem(cp.Minimize(problem.c @ x), cons)
        kwargs = {"verbose": opts.verbose}
        if solver_name == "CLARABEL":
            kwargs.update(tol_gap_abs=opts.tolerance, tol_gap_rel=opts.tolerance, tol_feas=opts.tolerance,
                          max_iter=opts.max_iters)
        elif solver_name == "SCS":
            kwargs.update(eps_abs=max(opts.tolerance, 1e-9), eps_rel=max(opts.tolerance, 1e-9), max_iters=100000)
        try:
            prob.solve(solver=solver_name, **kwargs)
        except cp.error.SolverError as exc:
            return Solution(Status.NUMERICAL_TROUBLE, info={"error": str(exc)})
        st = prob.status
        info = {"raw_status": st}
        if st in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and x.value is not None:
            info["inaccurate"] = st == cp.OPTIMAL_INACCURATE
            return Solution(Status.OPTIMAL, np.asarray(x.value), float(problem.c @ x.value), info=info)
        if st in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return Solution(Status.INFEASIBLE, info=info)
        if st in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return Solution(Status.UNBOUNDED, info=info)
        return Solution(Status.NUMERICAL_TROUBLE, info=info)
    return run


register_backend("clarabel")(_cvxpy_backend("CLARABEL"))
register_backend("scs")(_cvxpy_backend("SCS"))


def bisect_gamma(problem_for_gamma: Callable[[float], SDPProblem], lo: float, hi: float,
                 opts: Optional[SolverOptions] = None, rel_tol: float = 1e-6, max_steps: int = 100):
    """Smallest feasible ``gamma`` in ``[lo, hi]`` via feasibility solves.

    ``problem_for_gamma`` must return a pure feasibility problem with
    ``gamma`` fixed.  Returns ``(gamma, solution)`` or ``(None, last)``.
    """
    best = None
    sol_hi = solve(problem_for_gamma(hi), opts)
    if not sol_hi.optimal:
        return None, sol_hi
    best = (hi, sol_hi)
    for _ in range(max_steps):
        if hi - lo <= rel_tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        sol = solve(problem_for_gamma(mid), opts)
        if sol.optimal:
            hi, best = mid, (mid, sol)
        else:
            lo = mid
    return best

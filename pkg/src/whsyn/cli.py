"""``whsyn`` command line: graph, lift, synthesize, analyze, simulate, sweep.

Exit codes: 0 success, 1 usage or config error, 2 no guarantee (infeasible),
3 numerical trouble.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, load
from .constraints import ConstraintError, WHGraph, build_graph, convert, predicted_size
from .lifting import LiftedSystem, lift
from .lmi import Result, SingularG, Status, analyze, header_text, synthesize
from .lmi.certificate import dumps
from .metrics import empirical_l2_ratio, format_table, mean_square, percent_within, summarize
from .sim import MissGeneratorConfig, generate_mu, run_until_decay, simulate_steps

log = logging.getLogger("whsyn")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TROUBLE = 0, 1, 2, 3
NO_GUARANTEE = "no guarantee with this method; try a harder constraint"
DASH = "—"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _need_constraint(cfg: RunConfig):
    if cfg.constraint is None:
        raise CliError("config has no constraint")
    return cfg.constraint


def _graph_and_lift(cfg: RunConfig, sp=None, c=None) -> tuple[WHGraph, LiftedSystem]:
    c = c or _need_constraint(cfg)
    g = build_graph(c)
    return g, lift(cfg.plant, sp or cfg.strategy, convert(c).k)


# subcommands ---------------------------------------------------------------

def cmd_graph(cfg: RunConfig, out: Path) -> int:
    c = _need_constraint(cfg)
    g = build_graph(c)
    pn, pe = predicted_size(c)
    _write(out, "graph.json", g.dumps() + "\n")
    _write(out, "graph.dot", g.to_dot())
    print(f"constraint {c} (as {convert(c)})")
    print(f"predicted nodes={pn} edges={pe}")
    print(f"nodes={g.n_nodes} edges={g.n_edges}")
    return EXIT_OK


def cmd_lift(cfg: RunConfig, out: Path) -> int:
    c = _need_constraint(cfg)
    r = convert(c).k
    ls = lift(cfg.plant, cfg.strategy, r)
    _write(out, "lifted.json", _json(ls.to_json()))
    print(f"strategy {cfg.strategy} r={r} nx={ls.nx}")
    print(f"{'l':>3}  {'A':>8}  {'B':>8}  {'Bw':>8}  {'C':>8}  {'D':>8}  {'Dw':>8}")
    for l, md in enumerate(ls.modes):
        cells = ["x".join(str(d) for d in getattr(md, k).shape) for k in ("A", "B", "Bw", "C", "D", "Dw")]
        print(f"{l:>3}  " + "  ".join(f"{s:>8}" for s in cells))
    return EXIT_OK


def _run_solver(cfg: RunConfig, ls, g, action: str) -> Result:
    kw = dict(eps=cfg.eps, stability_only=cfg.stability_only, bound=cfg.bound, decay_rate=cfg.decay_rate,
              opts=cfg.solver)
    try:
        if action == "analyze":
            if cfg.controller is None:
                raise CliError("analyze needs a controller (controller.K, controller.gains or controller.file)")
            return analyze(ls, g, cfg.controller, **kw)
        switching = cfg.mode != "synthesize-nonswitching"
        return synthesize(ls, g, switching=switching, **kw)
    except SingularG as exc:
        raise CliError(str(exc), EXIT_TROUBLE) from None


def _status_code(res: Result) -> int:
    if res.status is Status.OPTIMAL:
        return EXIT_OK
    if res.status is Status.INFEASIBLE:
        print(NO_GUARANTEE, file=sys.stderr)
        return EXIT_INFEASIBLE
    hint = "" if res.problem.meta.get("bound") else "; setting solver.bound may help"
    print(f"numerical trouble ({res.status.value}){hint}", file=sys.stderr)
    return EXIT_TROUBLE


def _report(res: Result, out: Path, g: WHGraph) -> int:
    code = _status_code(res)
    _write(out, "certificate.json", dumps(res) + "\n")
    print(f"status={res.status.value}")
    if code != EXIT_OK:
        return code
    if res.gamma is not None:
        print(f"gamma={res.gamma:.10g}")
    else:
        print("stability certificate found")
    if res.controller is not None:
        _write(out, "controller.json", _json({"controller": res.controller.to_json(), "gamma": res.gamma}))
        _write(out, "gains.h", header_text(res.controller, g))
    rep = res.report
    print(f"verify={'PASS' if rep.passed else 'FAIL'} min_eig={rep.worst:.3e} threshold={rep.threshold:.3e}")
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig, out: Path) -> int:
    g, ls = _graph_and_lift(cfg)
    return _report(_run_solver(cfg, ls, g, "synthesize"), out, g)


def cmd_analyze(cfg: RunConfig, out: Path) -> int:
    g, ls = _graph_and_lift(cfg)
    return _report(_run_solver(cfg, ls, g, "analyze"), out, g)


def _disturbance(cfg: RunConfig, seed: int) -> np.ndarray:
    d = cfg.simulation.disturbance
    q = cfg.plant.q
    w = np.zeros((cfg.simulation.horizon, q))
    if d.kind == "none" or q == 0:
        return w
    end = min(d.start + (1 if d.kind == "impulse" else d.length), len(w))
    if d.kind == "impulse":
        w[d.start:end] = d.amplitude
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
        w[d.start:end] = d.amplitude * rng.standard_normal((end - d.start, q))
    return w


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    c = _need_constraint(cfg)
    g, ls = _graph_and_lift(cfg)
    gamma = None
    if cfg.mode == "analyze-given":
        if cfg.controller is None:
            raise CliError("simulate with analyze-given needs a controller")
        ctrl = cfg.controller
        res = _run_solver(cfg, ls, g, "analyze")
        gamma = res.gamma if res.optimal else None
    else:
        res = _run_solver(cfg, ls, g, "synthesize")
        code = _status_code(res)
        if code != EXIT_OK:
            return code
        ctrl, gamma = res.controller, res.gamma
    sim = cfg.simulation
    x0 = np.zeros(cfg.plant.n) if sim.x0 is None else np.array(sim.x0)
    traces, runs = [], []
    tdir = out / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    for k in range(sim.runs):
        seed = sim.seed + k
        mu = generate_mu(MissGeneratorConfig(c, sim.pmiss, sim.horizon, seed=seed, warmup_steps=sim.warmup))
        w = _disturbance(cfg, seed)
        tr = simulate_steps(cfg.plant, ctrl, cfg.strategy, g, mu, w, x0)
        tr.meta.update(seed=seed, pmiss=sim.pmiss)
        tr.to_csv(tdir / f"trace_{k:04d}.csv")
        entry = {"seed": seed, "misses": int(np.sum(mu == 0)),
                 "percupright": percent_within(tr, cfg.metrics)}
        for i in cfg.metrics.velocity_indices:
            entry[f"errsq_x{i}"] = mean_square(tr, i, cfg.metrics)
        if tr.energy_w() > 0:
            # ratio from rest with the same (mu, w), run until the state has decayed
            tz = run_until_decay(cfg.plant, ctrl, cfg.strategy, g, mu, w[:np.flatnonzero(np.any(w != 0, 1))[-1] + 1])
            entry["l2_ratio"] = empirical_l2_ratio(tz)
        traces.append(tr)
        runs.append(entry)
    summary = summarize(traces, cfg.metrics)
    ratios = [r["l2_ratio"] for r in runs if "l2_ratio" in r]
    summary.update(gamma=gamma, max_l2_ratio=max(ratios) if ratios else None,
                   within_bound=None if gamma is None or not ratios else max(ratios) <= gamma * (1 + 1e-6))
    doc = {"constraint": str(c), "strategy": str(cfg.strategy), "controller": ctrl.to_json(),
           "metrics_config": cfg.metrics.to_json(), "summary": summary, "runs": runs}
    _write(out, "summary.json", _json(doc))
    table = format_table([(f"{cfg.strategy} {c}", summary)], cfg.metrics.velocity_indices)
    g_txt = DASH if gamma is None else f"{gamma:.6g}"
    r_txt = DASH if not ratios else f"{max(ratios):.6g}"
    table += f"gamma={g_txt} max_empirical_l2_ratio={r_txt}\n"
    _write(out, "table.txt", table)
    print(table, end="")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    cons = cfg.sweep_constraints or [_need_constraint(cfg)]
    strategies = cfg.sweep_strategies or [cfg.strategy]
    rows = []
    for sp in strategies:
        for c in cons:
            g, ls = _graph_and_lift(cfg, sp, c)
            row = {"strategy": str(sp), "constraint": str(c), "nodes": g.n_nodes, "edges": g.n_edges}
            for label, sw in (("switching", True), ("nonswitching", False)):
                try:
                    res = synthesize(ls, g, switching=sw, eps=cfg.eps, stability_only=cfg.stability_only,
                                     bound=cfg.bound, decay_rate=cfg.decay_rate, opts=cfg.solver)
                    row[f"{label}_status"] = res.status.value
                    row[f"gamma_{label}"] = res.gamma if res.optimal else None
                    if cfg.stability_only:
                        row[f"gamma_{label}"] = None
                except SingularG:
                    row[f"{label}_status"] = "singular_G"
                    row[f"gamma_{label}"] = None
            rows.append(row)
    _write(out, "sweep.json", _json(rows))

    def cell(r, label):
        if cfg.stability_only:
            return "feasible" if r[f"{label}_status"] == "optimal" else DASH
        v = r[f"gamma_{label}"]
        return DASH if v is None else f"{v:.6g}"

    lines = [f"{'strategy':<10} {'constraint':<14} {'nodes':>5} {'edges':>5} {'gamma_sw':>12} {'gamma_nsw':>12}"]
    for r in rows:
        lines.append(f"{r['strategy']:<10} {r['constraint']:<14} {r['nodes']:>5} {r['edges']:>5} "
                     f"{cell(r, 'switching'):>12} {cell(r, 'nonswitching'):>12}")
    text = "\n".join(lines) + "\n"
    _write(out, "sweep.txt", text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "graph": cmd_graph,
    "lift": cmd_lift,
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="whsyn", description="Controller design for control tasks that may miss deadlines.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML or JSON run configuration")
    p.add_argument("--out", help="output directory (default: config 'output' or ./out)")
    p.add_argument("--seed", type=int, help="base simulation seed")
    p.add_argument("--stability-only", action="store_true", help="drop the performance blocks")
    p.add_argument("--eps", type=float, help="strictness margin for the inequalities")
    p.add_argument("--backend", help="SDP backend (cvxopt, clarabel, scs)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg.simulation = dataclasses.replace(cfg.simulation, seed=args.seed)
    if args.stability_only:
        cfg.mode = "stability-only"
    if args.eps is not None:
        if not args.eps > 0:
            raise ConfigError("--eps must be positive")
        cfg.eps = args.eps
    if args.backend:
        cfg.solver = dataclasses.replace(cfg.solver, backend=args.backend)
    return cfg


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(load(args.config), args)
        out = Path(args.out or cfg.output)
        return COMMANDS[args.command](cfg, out)
    except CliError as exc:
        print(f"whsyn: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ConstraintError, ValueError) as exc:
        # ValueError covers dimension mismatches and unknown backends
        print(f"whsyn: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

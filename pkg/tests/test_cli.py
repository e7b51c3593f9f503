import json

import pytest

from whsyn.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, NO_GUARANTEE, main

SCALAR = {"plant": {"A": [[1.2]], "B": [[1.0]], "Bw": [[1.0]], "C": [[1.0], [0.0]], "D": [[0.0], [0.1]]},
          "strategy": "Kill+Hold", "constraint": {"kind": "AnyMiss", "r": 1, "s": 5}}


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, command, doc, *extra, name="run.json"):
    out = tmp_path / f"out_{command}"
    code = main([command, "--config", write(tmp_path, doc, name), "--out", str(out), *extra])
    return code, out


def test_graph(tmp_path, capsys):
    doc = dict(SCALAR, constraint={"kind": "AnyMiss", "r": 3, "s": 5})
    code, out = run(tmp_path, "graph", doc)
    assert code == EXIT_OK
    assert "nodes=4 edges=10" in capsys.readouterr().out
    d = json.loads((out / "graph.json").read_text())
    assert len(d["nodes"]) == 4 and len(d["edges"]) == 10
    assert (out / "graph.dot").read_text().startswith("digraph")

    code, _ = run(tmp_path, "graph", dict(SCALAR, constraint={"kind": "AnyMiss", "r": 0, "s": 1}))
    assert code == EXIT_OK and "nodes=1 edges=1" in capsys.readouterr().out


def test_rowhit_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "graph", dict(SCALAR, constraint={"kind": "RowHit", "h": 1, "s": 2}))
    assert code == EXIT_USAGE
    assert "RowHit" in capsys.readouterr().err


def test_lift(tmp_path, capsys):
    doc = dict(SCALAR, strategy="Skip+Zero", constraint={"kind": "AnyMiss", "r": 2, "s": 4})
    code, out = run(tmp_path, "lift", doc)
    assert code == EXIT_OK
    assert "r=2" in capsys.readouterr().out
    d = json.loads((out / "lifted.json").read_text())
    assert d["r"] == 2 and len(d["modes"]) == 3
    Bs = [m["B"]["data"] for m in d["modes"]]
    assert all(b == Bs[0] for b in Bs)


def test_synthesize(tmp_path, capsys):
    code, out = run(tmp_path, "synthesize", SCALAR)
    text = capsys.readouterr().out
    assert code == EXIT_OK
    assert "gamma=" in text and "verify=PASS" in text
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["status"] == "optimal"
    ctrl = json.loads((out / "controller.json").read_text())
    assert ctrl["gamma"] > 0
    assert "#define" in (out / "gains.h").read_text() or "static" in (out / "gains.h").read_text()


def test_decay_rate_in_certificate(tmp_path, capsys):
    doc = dict(SCALAR, solver=dict(SCALAR.get("solver", {}), decay_rate=0.95))
    code, out = run(tmp_path, "synthesize", doc)
    assert code == EXIT_OK
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["decay_rate"] == 0.95
    assert any(k.startswith("rate-") for k in cert["verify"]["min_eig_per_edge"])


def test_stability_only_flag(tmp_path, capsys):
    code, _ = run(tmp_path, "synthesize", SCALAR, "--stability-only")
    assert code == EXIT_OK
    assert "stability certificate found" in capsys.readouterr().out


def test_infeasible_exit_code(tmp_path, capsys):
    doc = dict(SCALAR, plant={"A": [[2.0]], "B": [[1.0]], "Bw": [[1.0]], "C": [[1.0]]}, strategy="Kill+Zero",
               controller={"mode": "analyze-given", "K": [[0.0, 0.0]]})
    code, out = run(tmp_path, "analyze", doc)
    assert code == EXIT_INFEASIBLE
    assert NO_GUARANTEE in capsys.readouterr().err
    assert json.loads((out / "certificate.json").read_text())["status"] == "infeasible"


def test_simulate_and_determinism(tmp_path, capsys):
    doc = dict(SCALAR, simulation={"pmiss": 0.4, "runs": 3, "seed": 5, "horizon": 80, "x0": [0.0],
                                   "disturbance": {"kind": "burst", "amplitude": 1.0, "length": 5, "start": 2}},
               metrics={"upright_threshold": 0.5})
    code, out = run(tmp_path, "simulate", doc)
    assert code == EXIT_OK
    files = sorted((out / "traces").glob("trace_*.csv"))
    assert len(files) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary"]["runs"] == 3
    assert summary["summary"]["within_bound"] is True
    first = {f.name: f.read_bytes() for f in files}
    first_summary = (out / "summary.json").read_bytes()

    code, out2 = run(tmp_path, "simulate", doc)
    assert code == EXIT_OK
    again = {f.name: f.read_bytes() for f in sorted((out2 / "traces").glob("trace_*.csv"))}
    assert again == first
    assert (out2 / "summary.json").read_bytes() == first_summary

    code, out3 = run(tmp_path, "simulate", doc, "--seed", "6")
    assert (out3 / "traces" / "trace_0000.csv").read_bytes() == first["trace_0001.csv"]


def test_sweep(tmp_path, capsys):
    doc = dict(SCALAR, sweep={"constraints": [{"kind": "AnyMiss", "r": r, "s": 5} for r in range(4)],
                              "strategies": ["Kill+Zero", "Skip+Hold"]},
               plant={"A": [[1.6]], "B": [[1.0]], "Bw": [[1.0]], "C": [[1.0], [0.0]], "D": [[0.0], [0.1]]})
    code, out = run(tmp_path, "sweep", doc)
    assert code == EXIT_OK
    rows = json.loads((out / "sweep.json").read_text())
    assert len(rows) == 8
    text = (out / "sweep.txt").read_text()
    for sp in ("Kill+Zero", "Skip+Hold"):
        g = [r["gamma_switching"] for r in rows if r["strategy"] == sp]
        finite = [v for v in g if v is not None]
        # feasible entries come first and gamma grows with r
        assert g[:len(finite)] == finite
        assert all(b >= a * (1 - 1e-6) for a, b in zip(finite, finite[1:]))
        for r in rows:
            if r["strategy"] == sp and r["gamma_switching"] is not None and r["gamma_nonswitching"] is not None:
                assert r["gamma_switching"] <= r["gamma_nonswitching"] * (1 + 1e-6) + 1e-6
    # a single gain cannot cover Skip+Hold with A = 1.6 and two or more misses
    assert any(r["gamma_nonswitching"] is None for r in rows)
    assert "—" in text


def test_toml_config(tmp_path, capsys):
    p = tmp_path / "g.toml"
    p.write_text('strategy = "Kill+Zero"\n[plant]\nbuiltin = "double_integrator"\n'
                 '[constraint]\nkind = "AnyHit"\nh = 2\ns = 5\n')
    assert main(["graph", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "nodes=4 edges=10" in capsys.readouterr().out


@pytest.mark.parametrize("doc", [
    {"plant": {"A": [[1.0]], "B": [[1.0]]}, "strategy": "Kill+Zero"},
    dict(SCALAR, strategy="Queue+Zero"),
    dict(SCALAR, constraint={"kind": "AnyMiss", "r": 5, "s": 5}),
    dict(SCALAR, plant={"A": [[1.0, 0.0]], "B": [[1.0]]}),
    dict(SCALAR, unknown_key=1),
])
def test_bad_configs(tmp_path, capsys, doc):
    code, _ = run(tmp_path, "synthesize", doc)
    assert code == EXIT_USAGE
    assert capsys.readouterr().err.startswith("whsyn:")


def test_bad_cli_usage(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["graph"])
    assert e.value.code == EXIT_USAGE
    code = main(["graph", "--config", str(tmp_path / "missing.json")])
    assert code == EXIT_USAGE
    code, _ = run(tmp_path, "synthesize", SCALAR, "--eps", "-1")
    assert code == EXIT_USAGE

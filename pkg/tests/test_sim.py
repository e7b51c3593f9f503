import numpy as np
import pytest

from conftest import compare, random_case, random_plant
from whsyn.constraints import InadmissibleLabel, WHConstraint, admits, build_graph
from whsyn.lifting import Plant, StrategyPair, closed_loop, lift
from whsyn.lmi import Controller
from whsyn.sim import (InadmissibleSequence, MissGeneratorConfig, generate_mu, mu_to_tau_alpha, run_until_decay,
                       simulate_lifted, simulate_steps)
from whsyn.sim import _kernels


class TestTauAlpha:
    def test_fig2(self):
        mu = (1, 0, 0, 1, 1, 0, 1)
        tk, a = mu_to_tau_alpha(mu, "Kill")
        ts, a2 = mu_to_tau_alpha(mu, "Skip")
        assert tuple(tk) == (0, 3, 4, 6)
        assert tuple(ts) == (1, 4, 5, 7)
        assert tuple(a) == tuple(a2) == (2, 0, 1)

    def test_small(self):
        tk, a = mu_to_tau_alpha((1, 1, 1), "Kill")
        assert tuple(tk) == (0, 1, 2) and tuple(a) == (0, 0)
        tk, a = mu_to_tau_alpha((1, 0, 1), "Kill")
        ts, _ = mu_to_tau_alpha((1, 0, 1), "Skip")
        assert tuple(tk) == (0, 2) and tuple(ts) == (1, 3) and tuple(a) == (1,)

    def test_first_must_hit(self):
        with pytest.raises(InadmissibleSequence):
            mu_to_tau_alpha((0, 1), "Kill")


class TestGenerator:
    def test_pmiss_zero(self):
        mu = generate_mu(MissGeneratorConfig(WHConstraint.any_miss(3, 5), 0.0, 50))
        assert mu.tolist() == [1] * 50

    def test_greedy_pattern(self):
        mu = generate_mu(MissGeneratorConfig(WHConstraint.any_miss(3, 5), 1.0, 15))
        assert mu.tolist()[:10] == [1, 0, 0, 0, 1, 1, 0, 0, 0, 1]
        assert mu.tolist()[10:15] == [1, 0, 0, 0, 1]

    def test_warmup(self):
        mu = generate_mu(MissGeneratorConfig(WHConstraint.any_miss(1, 2), 1.0, 20, warmup_steps=10))
        assert mu[:10].tolist() == [1] * 10 and 0 in mu[10:]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MissGeneratorConfig(WHConstraint.any_miss(1, 2), 1.5, 10)
        with pytest.raises(ValueError):
            MissGeneratorConfig(WHConstraint.any_miss(1, 2), 0.5, 0)

    def test_many_sequences_admissible(self):
        cons = [WHConstraint.any_miss(r, s) for s in range(1, 9) for r in range(s)]
        cons += [WHConstraint.any_hit(2, 5), WHConstraint.row_miss(2)]
        count = 0
        rng = np.random.default_rng(7)
        while count < 100_000:
            c = cons[count % len(cons)]
            cfg = MissGeneratorConfig(c, float(rng.random()), 30, seed=count)
            mu = generate_mu(cfg)
            assert mu[0] == 1 and admits(mu, c)
            count += 1

    def test_seeded_determinism(self):
        cfg = MissGeneratorConfig(WHConstraint.any_miss(3, 5), 0.4, 200, seed=99)
        a, b = generate_mu(cfg), generate_mu(cfg)
        assert np.array_equal(a, b)
        pl, g, sp, ctrl, mu, w, x0 = random_case(3)
        t1 = simulate_steps(pl, ctrl, sp, g, mu, w, x0)
        t2 = simulate_steps(pl, ctrl, sp, g, mu, w, x0)
        assert t1.to_csv() == t2.to_csv()


class TestStepSimulator:
    def test_equivalence_random(self):
        worst = 0.0
        for seed in range(200):
            ex, ez, e_step, e_lift = compare(*random_case(seed))
            worst = max(worst, ex, ez, abs(e_step - e_lift) / max(1.0, e_step))
        assert worst <= 1e-8

    def test_scalar_kill_zero_by_hand(self):
        pl = Plant(A=2.0, B=1.0, Bw=1.0, C=1.0, D=0.0, Dw=0.0)
        g = build_graph(WHConstraint.any_miss(1, 2))
        k1, k2 = -1.5, 0.25
        tr = simulate_steps(pl, Controller.nonswitching([[k1, k2]]), StrategyPair.parse("Kill+Zero"), g,
                            [1, 0, 1], None, [1.0])
        # t=0: u_c = k1, x1 = 2, u1 = k1; t=1 miss: x2 = 4 + k1, u2 = 0
        assert tr.x[2, 0] == pytest.approx(4 + k1)
        assert tr.u[2, 0] == 0.0
        md = lift(pl, StrategyPair.parse("Kill+Zero"), 1)[1]
        xt = md.A @ np.array([1.0, 0.0]) + md.B @ np.array([k1])
        assert np.allclose(tr.lifted_state[2], xt)

    def test_hold_repeats_input(self):
        pl = Plant(A=0.5, B=1.0, Bw=1.0, C=1.0, D=0.0, Dw=0.0)
        g = build_graph(WHConstraint.any_miss(1, 2))
        tr = simulate_steps(pl, Controller.nonswitching([[0.7, 0.1]]), StrategyPair.parse("Kill+Hold"), g,
                            [1, 0], None, [1.0])
        assert tr.ua[1, 0] == tr.ua[0, 0]
        assert np.isnan(tr.uc[1, 0])

    def test_all_hits_decay(self):
        pl = Plant(A=[[1.1, 0.1], [0.0, 0.9]], B=[[0.0], [1.0]], Bw=[[1.0], [0.0]], C=[[1.0, 0.0]])
        K = np.array([[-1.0, -0.3, 0.0]])
        g = build_graph(WHConstraint.any_miss(0, 1))
        tr = simulate_steps(pl, Controller.nonswitching(K), StrategyPair.parse("Kill+Zero"), g, np.ones(400),
                            None, [1.0, -1.0])
        norms = np.linalg.norm(tr.lifted_state, axis=1)
        assert norms[-1] < 1e-8 * norms[0]

    def test_z_recomputable(self):
        pl, g, sp, ctrl, mu, w, x0 = random_case(11)
        tr = simulate_steps(pl, ctrl, sp, g, mu, w, x0)
        z = tr.x[:-1] @ pl.C.T + tr.u[:-1] @ pl.D.T + tr.w @ pl.Dw.T
        assert np.allclose(z, tr.z)

    def test_errors(self):
        pl = Plant(A=0.5, B=1.0, Bw=1.0, C=1.0)
        g = build_graph(WHConstraint.any_miss(1, 3))
        ctrl = Controller.nonswitching([[0.1, 0.0]])
        sp = StrategyPair.parse("Kill+Zero")
        with pytest.raises(InadmissibleSequence):
            simulate_steps(pl, ctrl, sp, g, [0, 1, 1])
        with pytest.raises(InadmissibleSequence):
            simulate_steps(pl, ctrl, sp, g, [1, 0, 0, 1])
        with pytest.raises(InadmissibleLabel):
            simulate_steps(pl, ctrl, sp, g, [1, 0, 0, 1], check=False)
        with pytest.raises(ValueError):
            simulate_steps(pl, Controller.nonswitching([[0.1, 0.0, 0.0]]), sp, g, [1, 1])

    def test_jit_and_python_kernels_agree(self):
        pl, g, sp, ctrl, mu, w, x0 = random_case(5)
        args = (*(np.array(M, dtype=float, order="C") for M in (pl.A, pl.B, pl.Bw, pl.C, pl.D, pl.Dw)),
                ctrl.gain_stack(g), g.transition_table(), g.initial, mu.astype(np.int64), w, x0,
                np.zeros(pl.m), sp.overrun.value == "Skip", sp.actuator.value == "Hold", 0.0, len(mu))
        a = _kernels.step_sim(*args)
        b = _kernels.step_sim_py(*args)
        for u, v in zip(a[:5], b[:5]):
            assert np.allclose(u, v, rtol=1e-12, atol=1e-12, equal_nan=True)
        assert np.array_equal(a[5], b[5])
        assert tuple(a[6:]) == tuple(b[6:])

    def test_run_until_decay_stops(self):
        pl = Plant(A=0.5, B=1.0, Bw=1.0, C=1.0)
        g = build_graph(WHConstraint.any_miss(0, 1))
        tr = run_until_decay(pl, Controller.nonswitching([[0.0, 0.0]]), StrategyPair.parse("Kill+Zero"), g,
                             [1], [[1.0]])
        assert len(tr) < 100
        assert np.linalg.norm(tr.lifted_state[-1]) < 1e-9


class TestLifted:
    def test_all_zero_alpha_is_nominal(self, rng):
        pl = random_plant(rng, n=2, m=1)
        ls = lift(pl, StrategyPair.parse("Kill+Hold"), 0)
        K = rng.standard_normal((1, 3)) * 0.2
        cl = closed_loop(ls, Controller.nonswitching(K))
        x0 = rng.standard_normal(3)
        lt = simulate_lifted(cl, [0] * 5, None, x0)
        Acl = ls[0].A + ls[0].B @ K
        assert np.allclose(lt.x[5], np.linalg.matrix_power(Acl, 5) @ x0)

    def test_single_step_and_stack_size(self, rng):
        pl = random_plant(rng, n=2, m=1, q=1, p=2)
        ls = lift(pl, StrategyPair.parse("Kill+Zero"), 2)
        cl = closed_loop(ls, Controller.nonswitching(np.zeros((1, 3))))
        x0 = rng.standard_normal(3)
        lt = simulate_lifted(cl, [2], None, x0)
        assert np.allclose(lt.x[1], cl[2].A @ x0)
        assert lt.z[0].shape == (3 * pl.p,)

    def test_unrealizable_alpha(self, rng):
        pl = random_plant(rng)
        g = build_graph(WHConstraint.any_miss(3, 5))
        ls = lift(pl, StrategyPair.parse("Kill+Zero"), 3)
        cl = closed_loop(ls, Controller.per_node({i: np.zeros((pl.m, pl.n + pl.m)) for i in g.nodes}), g)
        with pytest.raises(InadmissibleLabel):
            simulate_lifted(cl, [3, 3], None, np.zeros(pl.n + pl.m), g)


def test_csv_header_and_rows(tmp_path):
    pl = Plant(A=[[0.5, 0.0], [0.0, 0.5]], B=[[1.0], [0.0]], Bw=[[1.0], [0.0]], C=[[1.0, 0.0]])
    g = build_graph(WHConstraint.any_miss(1, 3))
    tr = simulate_steps(pl, Controller.nonswitching([[0.1, 0.0, 0.0]]), StrategyPair.parse("Skip+Hold"), g,
                        [1, 0, 1, 1], [[1.0]], [0.0, 0.0])
    text = tr.to_csv(tmp_path / "t.csv")
    lines = text.splitlines()
    assert lines[0] == "t,mu,node,x_0,x_1,u,u_a,u_c,w_0,z_0"
    assert len(lines) == 5
    assert (tmp_path / "t.csv").read_text() == text

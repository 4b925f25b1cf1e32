import numpy as np
import pytest

from gcsanneal import gcs
from gcsanneal.anneal import (
    AnnealConfig,
    OptimizerState,
    adam_step,
    adam_update,
    init_params,
    round_state,
    run,
)
from gcsanneal.gcs import GcsParams, NumericalError, classical_params
from gcsanneal.qubo import QuboInstance, energy, fold_bias, gen_ea3d, unfold_spins
from gcsanneal.statevector import brute_force_min, build_state, expval


class TestConfig:
    def test_defaults(self):
        cfg = AnnealConfig()
        assert (cfg.n_t, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (1000, 0.1, 0.9, 0.999, 1e-8)
        assert cfg.init_scale == 0.01

    def test_linear_grid(self):
        f = AnnealConfig(n_t=5).fractions()
        np.testing.assert_array_equal(f, [0, 0.25, 0.5, 0.75, 1])

    def test_custom_schedule(self):
        cfg = AnnealConfig(n_t=3, schedule=[0, 0.9, 1])
        np.testing.assert_array_equal(cfg.fractions(), [0, 0.9, 1])

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_t": 1},
            {"learning_rate": 0},
            {"mode": "lqa"},
            {"init_scale": -1},
            {"n_t": 3, "schedule": [0, 1]},
            {"n_t": 3, "schedule": [0, 0.6, 0.5]},
            {"n_t": 3, "schedule": [0.1, 0.5, 1]},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            AnnealConfig(**kw)


class TestInit:
    def test_zero_scale_gives_transverse_ground(self):
        inst = gen_ea3d(2, 0)
        p = init_params(inst, AnnealConfig(init_scale=0))
        assert np.all(p.x == 0)
        assert gcs.loss(p, 0.0, inst) == -8.0

    def test_default_near_plus_state(self):
        inst = gen_ea3d(2, 0)
        p = init_params(inst, AnnealConfig())
        sx = [gcs.expval_sx(p, i) for i in range(8)]
        assert np.all(np.abs(np.array(sx) - 1) < 1e-3)
        assert np.all(p.m == 0) and np.all(p.y == 0)
        assert np.all(np.abs(p.x) <= 0.01)

    def test_seeded(self):
        inst = gen_ea3d(2, 0)
        a = init_params(inst, AnnealConfig(seed=3))
        b = init_params(inst, AnnealConfig(seed=3))
        np.testing.assert_array_equal(a.x, b.x)


class TestAdam:
    def test_zero_gradient(self):
        p = GcsParams.random(3, np.random.default_rng(0))
        state = OptimizerState.like(p)
        q = adam_step(p, (np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3))), state, AnnealConfig())
        assert state.step == 1
        np.testing.assert_array_equal(q.x, p.x)
        np.testing.assert_array_equal(q.m, p.m)
        np.testing.assert_array_equal(q.y, p.y)

    def test_first_step_moves_by_lr(self):
        theta, _, _ = adam_update(np.array(1.0), np.array(2.0), 0.0, 0.0, 1, 0.1)
        assert 1.0 - theta == pytest.approx(0.1, abs=1e-9)

    def test_product_mode_masks(self):
        rng = np.random.default_rng(1)
        p = GcsParams(3, rng.normal(size=(3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))
        state = OptimizerState.like(p)
        grads = (rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
        q = adam_step(p, grads, state, AnnealConfig(mode="product"))
        assert q.m.tobytes() == p.m.tobytes()
        assert q.y.tobytes() == p.y.tobytes()
        assert not np.array_equal(q.x, p.x)

    def test_nonfinite_update(self):
        p = GcsParams.zeros(2)
        state = OptimizerState.like(p)
        bad = np.full((2, 3), np.nan)
        with pytest.raises(NumericalError, match="block x"):
            adam_step(p, (bad, np.zeros((2, 2)), np.zeros((2, 3))), state, AnnealConfig())

    def test_moments_persist(self):
        p = GcsParams.zeros(2)
        state = OptimizerState.like(p)
        g = (np.ones((2, 3)), np.zeros((2, 2)), np.zeros((2, 3)))
        p = adam_step(p, g, state, AnnealConfig())
        adam_step(p, g, state, AnnealConfig())
        assert state.step == 2
        np.testing.assert_allclose(state.m["x"], 0.19)


class TestRound:
    def test_classical(self):
        inst = gen_ea3d(2, 2)
        s = np.random.default_rng(2).choice([-1, 1], 8)
        sol, _ = round_state(classical_params(s), inst)
        np.testing.assert_array_equal(sol.s, s)

    def test_ties_to_plus(self):
        sol, z = round_state(GcsParams.zeros(8), gen_ea3d(2, 0))
        assert np.all(z == 0)
        assert np.all(sol.s == 1)

    def test_oracle(self):
        p = GcsParams.random(4, np.random.default_rng(3))
        _, z = round_state(p, QuboInstance(4, [0], [1], [1.0]))
        st = build_state(p)
        np.testing.assert_allclose(z, [expval(st, [("Z", i)]) for i in range(4)], atol=1e-10)


class TestRun:
    def test_folded_single_spin(self):
        inst = QuboInstance(1, [], [], [], c=[1.0])
        folded = fold_bias(inst)
        res = run(folded, AnnealConfig(n_t=200))
        assert unfold_spins(res.solution.s).tolist() == [-1]
        assert res.energy == brute_force_min(folded)[0]

    def test_rejects_bias(self):
        with pytest.raises(ValueError):
            run(QuboInstance(1, [], [], [], c=[1.0]), AnnealConfig(n_t=5))

    def test_deterministic(self):
        inst = gen_ea3d(2, 4)
        a = run(inst, AnnealConfig(n_t=50, seed=1))
        b = run(inst, AnnealConfig(n_t=50, seed=1))
        assert a.losses.tobytes() == b.losses.tobytes()
        assert a.n_gradients == a.n_updates == 50

    def test_reported_energy_recomputed(self):
        inst = gen_ea3d(2, 9)
        res = run(inst, AnnealConfig(n_t=100))
        assert res.energy == energy(inst, res.solution.s)
        assert res.energy >= brute_force_min(inst)[0]

    def test_product_mode_keeps_entangler_zero(self):
        res = run(gen_ea3d(2, 5), AnnealConfig(n_t=50, mode="product"))
        assert not res.params.m.any() and not res.params.y.any()
        assert res.meta["mode"] == "product"

    def test_sparse_m_support(self):
        inst = gen_ea3d(2, 6, "open")
        res = run(inst, AnnealConfig(n_t=50, sparse_m=True))
        support = np.zeros((8, 8), dtype=bool)
        support[inst.rows, inst.cols] = support[inst.cols, inst.rows] = True
        assert not res.params.m[~support].any()
        assert res.params.m[support].any()

    def test_rescale_reports_true_energy(self):
        inst = gen_ea3d(2, 7)
        res = run(inst, AnnealConfig(n_t=100, rescale=True))
        assert res.energy >= brute_force_min(inst)[0]

    def test_loss_trace_ends_near_energy(self):
        inst = gen_ea3d(2, 8)
        res = run(inst, AnnealConfig(n_t=400))
        # each spin starts within 1e-3 of <X> = 1
        assert res.losses[0] == pytest.approx(-8.0, abs=8e-3)
        assert res.losses[-1] == pytest.approx(res.energy, rel=0.05)


@pytest.mark.slow
def test_cube_success_rate():
    hits = 0
    for k in range(100):
        inst = gen_ea3d(2, k)
        e0 = brute_force_min(inst)[0]
        hits += run(inst, AnnealConfig(seed=k)).energy <= e0 + 1e-9 * abs(e0)
    assert hits >= 90

import numpy as np
import pytest

from gcsanneal.baselines import SaConfig, sa_run, simulated_annealing
from gcsanneal.qubo import QuboInstance, energy, gen_ea3d
from gcsanneal.statevector import brute_force_min


class TestConfig:
    def test_geometric(self):
        b = SaConfig(sweeps=3, beta_start=1, beta_end=4).betas()
        np.testing.assert_allclose(b, [1, 2, 4])

    def test_linear(self):
        b = SaConfig(sweeps=3, beta_start=1, beta_end=3, schedule="linear").betas()
        np.testing.assert_allclose(b, [1, 2, 3])

    @pytest.mark.parametrize("kw", [{"sweeps": 0}, {"beta_start": 0}, {"beta_start": 6}, {"schedule": "cosine"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SaConfig(**kw)


class TestAnneal:
    def test_free_spins(self):
        inst = QuboInstance(4, [], [], [], offset=2.0)
        assert simulated_annealing(inst, SaConfig(sweeps=10)).energy == 2.0

    def test_ferromagnetic_bond(self):
        inst = QuboInstance(2, [0], [1], [-1.0])
        hits = sum(simulated_annealing(inst, SaConfig(sweeps=200, seed=k)).energy == -2.0 for k in range(100))
        assert hits >= 99

    def test_never_below_ground(self):
        for k in range(10):
            inst = gen_ea3d(2, k)
            e0 = brute_force_min(inst)[0]
            assert simulated_annealing(inst, SaConfig(seed=k)).energy >= e0 - 1e-9

    def test_tracked_energy_consistent(self):
        inst = gen_ea3d(3, 1)
        res = sa_run(inst, SaConfig(sweeps=50, seed=2))
        assert res.tracked_energy == pytest.approx(energy(inst, res.final), abs=1e-9)
        assert res.solution.energy <= res.tracked_energy + 1e-12

    def test_metropolis_acceptance(self):
        # at very large beta only downhill or neutral moves survive
        inst = gen_ea3d(3, 3)
        res = sa_run(inst, SaConfig(sweeps=20, beta_start=1e6, beta_end=1e6, seed=0))
        assert np.all(res.accepted_deltas <= 1e-12)

    def test_bias_handled(self):
        inst = QuboInstance(3, [0, 1], [1, 2], [0.5, -0.25], c=[1.0, -2.0, 0.3])
        e0 = brute_force_min(inst)[0]
        assert simulated_annealing(inst, SaConfig(sweeps=200)).energy == pytest.approx(e0)

    def test_deterministic(self):
        inst = gen_ea3d(3, 4)
        a = sa_run(inst, SaConfig(sweeps=30, seed=5))
        b = sa_run(inst, SaConfig(sweeps=30, seed=5))
        np.testing.assert_array_equal(a.final, b.final)
        np.testing.assert_array_equal(a.accepted_deltas, b.accepted_deltas)

import json

import numpy as np
import pytest

import pbmdp


def config(**overrides):
    cfg = {
        "mdp": {"generator": "uniform_layered", "H": 3, "S_prime": 2, "K": 2},
        "environment": {"family": "pref_lb", "epsilon": 0.05, "seed": 1},
        "algorithm": "global",
        "params": {"gamma": 0.2, "eta": 0.1},
        "T": 300,
        "seeds": [0, 1],
        "log_every": 100,
    }
    cfg.update(overrides)
    return json.dumps(cfg)


def test_uniform_occupancy():
    mdp = pbmdp.uniform_layered_mdp(3, 2, 2)
    assert mdp.num_states == 6
    policy = np.full((5, 4), 0.25)
    q = pbmdp.occupancy(mdp, policy)
    assert q.shape == (5, 4)
    np.testing.assert_allclose(q[1:], 1.0 / 8.0, atol=1e-15)
    assert pbmdp.initial_value(mdp, policy, np.ones((5, 4))) == pytest.approx(3.0)


def test_best_fixed_policy_and_ftrl():
    mdp = pbmdp.random_layered_mdp(2, 2, 2, 3)
    rng = np.random.default_rng(0)
    loss = rng.random((mdp.num_states - 1, mdp.num_actions))
    policy, value = pbmdp.best_fixed_policy(mdp, loss)
    assert set(np.unique(policy)) <= {0.0, 1.0}
    assert pbmdp.initial_value(mdp, policy, loss) == pytest.approx(value)
    q = pbmdp.ftrl_update(mdp, loss, 0.5)
    assert q[0].sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pbmdp.ftrl_update(mdp, np.zeros((2, 2)), 0.5)


def test_borda_and_extremal():
    b = pbmdp.borda_scores(np.array(pbmdp.block_preference_matrix(4, 0.05)).reshape(4, 4))
    np.testing.assert_allclose(b, [-0.3, -0.3, -0.7, -0.7], atol=1e-15)
    p = pbmdp.extremal_transition([1.0, 0.0], [0.5, 0.5], [0.2, 0.2])
    np.testing.assert_allclose(p, [0.7, 0.3])


def test_philox_known_answer():
    out = pbmdp.philox4x32([0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], [0xA4093822, 0x299F31D0])
    assert list(out) == [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]


def test_run_experiment_is_deterministic():
    traces = pbmdp.run_experiment(config())
    assert [t["seed"] for t in traces] == [0, 1]
    assert traces[0]["t"] == [100, 200, 300]
    assert pbmdp.run_experiment_csv(config()) == pbmdp.run_experiment_csv(config(), threads=2)
    assert pbmdp.run_experiment(config(), episodes=1)[0]["final_regret"] >= -1e-10


def test_invalid_config_raises():
    with pytest.raises(ValueError):
        pbmdp.validate_config(config(T=0))
    with pytest.raises(ValueError):
        pbmdp.validate_config(config(algorithm="nope"))


def test_slope_fit():
    grid = [1000, 2000, 4000, 8000]
    regrets = [[2.0 * t ** (2.0 / 3.0)] * 10 for t in grid]
    slope, intercept, stderr = pbmdp.slope_fit(grid, regrets)
    assert slope == pytest.approx(2.0 / 3.0, abs=1e-9)

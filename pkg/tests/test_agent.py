import numpy as np
import pytest

from grlstop.agent import (
    CheckpointError,
    PolicyCheckpoint,
    PolicyNetwork,
    TrainerConfig,
    TrainingDiverged,
    load_checkpoint,
    save_checkpoint,
    train,
)
from grlstop.agent.checkpoint import read_header
from grlstop.agent.policy import Adam
from grlstop.corpus import RankedTopic, make_batches
from grlstop.environment import CONTINUE, STOP, EnvConfig, StoppingEnv


def toy_env(seed=0):
    # B=2, the single relevant doc is in batch 1, so T=1 for every target
    br = make_batches(RankedTopic.from_labels("toy", [1, 0]), 2)
    return StoppingEnv(EnvConfig(B=2, use_classifier=False), br, seed=seed)


def fd_grad(f, x, h=1e-6):
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestPolicy:
    def test_probabilities(self, rng):
        net = PolicyNetwork(12, seed=1)
        p = net.action_probs(rng.uniform(-1, 1, (50, 12)))
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_greedy_tie_is_stop(self):
        net = PolicyNetwork(4, seed=0)
        for k in ("actor.W3", "actor.b3"):
            net.params[k][:] = 0.0
        assert net.act(np.zeros(4)) == STOP

    def test_greedy_follows_logits(self):
        net = PolicyNetwork(4, seed=0)
        net.params["actor.W3"][:] = 0.0
        net.params["actor.b3"][:] = [10.0, -10.0]
        assert net.act(np.zeros(4)) == STOP
        net.params["actor.b3"][:] = [-10.0, 10.0]
        assert net.act(np.zeros(4)) == CONTINUE

    def test_seeded_init(self):
        a, b = PolicyNetwork(6, seed=3), PolicyNetwork(6, seed=3)
        np.testing.assert_array_equal(a.get_flat(), b.get_flat())
        assert not np.array_equal(a.get_flat(), PolicyNetwork(6, seed=4).get_flat())

    def test_wrong_observation_length(self):
        with pytest.raises(ValueError, match="length"):
            PolicyNetwork(6).act(np.zeros(5))

    def test_sample_needs_rng(self):
        with pytest.raises(ValueError):
            PolicyNetwork(3).act(np.zeros(3), mode="sample")


class TestGradient:
    def test_matches_finite_differences(self, rng):
        for trial in range(20):
            d, n = 5, 16
            net = PolicyNetwork(d, hidden=4, seed=trial)
            flat = net.get_flat() + rng.normal(scale=0.5, size=net.get_flat().size)
            net.set_flat(flat)
            obs = rng.uniform(-1, 1, (n, d))
            actions = rng.integers(0, 2, n)
            logp_now = np.log(net.action_probs(obs)[np.arange(n), actions])
            # ratios spread across both sides of the clip window, away from the kinks
            shift = rng.choice([-0.5, -0.03, 0.03, 0.5], size=n)
            old = logp_now + shift
            adv = rng.normal(size=n)
            ret = rng.normal(size=n)
            args = (obs, actions, old, adv, ret, 0.1, 0.05, 0.5)
            _, grads, _ = net.ppo_loss(*args)
            analytic = np.concatenate([grads[k].ravel() for k in net.params])

            def f(x):
                probe = net.copy()
                probe.set_flat(x)
                return probe.ppo_loss(*args)[0]

            numeric = fd_grad(f, flat)
            scale = np.maximum(np.abs(numeric), 1e-3)
            assert np.max(np.abs(analytic - numeric) / scale) < 1e-4

    def test_advantage_scale_keeps_argmax(self, rng):
        for trial in range(30):
            net = PolicyNetwork(3, hidden=8, seed=trial)
            obs = rng.uniform(-1, 1, (1, 3))
            a = rng.integers(0, 2, 1)
            old = np.log(net.action_probs(obs)[0, a])
            adv = rng.normal(size=1)
            picks = []
            for c in (1.0, 7.5, 1e3):
                probe = net.copy()
                _, g, _ = probe.ppo_loss(obs, a, old, c * adv, np.zeros(1), 0.1, 0.0, 0.0)
                Adam(probe.params, lr=1e-2).step(probe.params, g)
                picks.append(probe.act(obs[0]))
            assert len(set(picks)) == 1


class TestTraining:
    def test_toy_converges(self):
        cfg = TrainerConfig(n_steps=16, batch_size=32, min_steps=0, max_steps=5000, patience=10_000, seed=0)
        res = train([toy_env(k) for k in range(4)], cfg)
        env = toy_env()
        obs = env.reset(0.8).observation
        assert res.policy.act(obs) == STOP
        assert res.policy.action_probs(obs)[STOP] > 0.95
        assert res.best_mean_return >= 0.95

    def test_single_topic_return_near_one(self):
        labels = np.zeros(200, dtype=bool)
        labels[[0, 3, 15, 22, 41, 47, 60, 95, 130]] = True
        br = make_batches(RankedTopic.from_labels("t", labels), 10)
        cfg_env = EnvConfig(B=10, use_classifier=False, targets=(0.8,))
        envs = [StoppingEnv(cfg_env, br, seed=k) for k in range(4)]
        res = train(envs, TrainerConfig.defaults_for(False, n_steps=32, min_steps=0, max_steps=20_000, seed=1))
        assert res.best_mean_return == pytest.approx(1.0, abs=0.1)
        assert res.best_mean_return <= 1.0

    def test_patience_on_frozen_reward(self):
        class Flat(StoppingEnv):
            def reward(self, i):
                return 0.0

        br = make_batches(RankedTopic.from_labels("t", [1, 0, 0, 1, 0]), 5)
        envs = [Flat(EnvConfig(B=5, use_classifier=False), br, seed=k) for k in range(2)]
        for patience in (1, 3, 10):
            res = train(envs, TrainerConfig(patience=patience, min_steps=0, seed=2))
            assert res.stopped_early
            assert res.rollouts == 1 + patience
            assert [e["improved"] for e in res.log] == [True] + [False] * patience

    def test_min_steps_delays_stop(self):
        class Flat(StoppingEnv):
            def reward(self, i):
                return 0.0

        br = make_batches(RankedTopic.from_labels("t", [1, 0, 0, 1, 0]), 5)
        env = Flat(EnvConfig(B=5, use_classifier=False), br)
        res = train([env], TrainerConfig(patience=2, min_steps=100, seed=2))
        assert res.steps >= 100 and res.stopped_early

    def test_logged_returns_in_unit_interval(self):
        topics = [RankedTopic.from_labels(f"t{k}", np.random.default_rng(k).random(60) < 0.2) for k in range(3)]
        envs = [StoppingEnv(EnvConfig(B=6, use_classifier=False), make_batches(t, 6), seed=k) for k, t in enumerate(topics)]
        returns = []
        orig = StoppingEnv.step

        def spy(self, action):
            out = orig(self, action)
            if out.done:
                returns.append((self.state.stop_batch, self.T, self._ep_return + out.reward))
            self._ep_return = 0.0 if out.done else self._ep_return + out.reward
            return out

        for env in envs:
            env._ep_return = 0.0
        StoppingEnv.step = spy
        try:
            res = train(envs, TrainerConfig(min_steps=0, max_steps=3000, seed=5))
        finally:
            StoppingEnv.step = orig
        assert returns
        for stop, T, r in returns:
            assert -1e-12 <= r <= 1.0 + 1e-12
            if abs(r - 1.0) <= 1e-12:
                assert stop == T
            if stop == T:
                assert r == pytest.approx(1.0, abs=1e-12)
        for entry in res.log:
            if entry["rolling_mean_return"] is not None:
                assert -1e-12 <= entry["rolling_mean_return"] <= 1.0 + 1e-12

    def test_entropy_bonus_direction(self, rng):
        br = make_batches(RankedTopic.from_labels("t", [1, 0, 1, 0, 0, 0, 0, 1]), 4)
        env_cfg = EnvConfig(B=4, use_classifier=False)

        def mean_entropy(ent):
            cfg = TrainerConfig(ent_coef=ent, min_steps=4000, max_steps=4000, seed=3)
            res = train([StoppingEnv(env_cfg, br, seed=k) for k in range(2)], cfg)
            p = res.policy.action_probs(rng.uniform(-1, 1, (200, env_cfg.obs_dim)))
            return float(np.mean(-(p * np.log(p)).sum(axis=1)))

        assert mean_entropy(100.0) >= mean_entropy(0.1)

    def test_divergence_raises(self):
        class Broken(StoppingEnv):
            def reward(self, i):
                return float("nan")

        br = make_batches(RankedTopic.from_labels("t", [1, 0, 0, 1]), 2)
        with pytest.raises(TrainingDiverged, match="non-finite"):
            train([Broken(EnvConfig(B=2, use_classifier=False), br)], TrainerConfig(min_steps=0, seed=0))

    def test_deterministic(self):
        cfg = TrainerConfig(min_steps=0, max_steps=600, seed=7)
        a = train([toy_env(1), toy_env(2)], cfg)
        b = train([toy_env(1), toy_env(2)], cfg)
        np.testing.assert_array_equal(a.policy.get_flat(), b.policy.get_flat())
        assert a.log == b.log

    def test_step_budget_is_a_cap(self):
        cfg = TrainerConfig(n_steps=16, min_steps=0, max_steps=1000, patience=10_000, seed=0)
        res = train([toy_env(0), toy_env(1)], cfg)
        assert res.steps == 992  # 31 full rollouts of 32 steps
        with pytest.raises(ValueError, match="max_steps"):
            train([toy_env(0)], TrainerConfig(n_steps=16, max_steps=10, seed=0))

    def test_mixed_batch_counts_rejected(self):
        br2 = make_batches(RankedTopic.from_labels("a", [1, 0]), 2)
        br3 = make_batches(RankedTopic.from_labels("b", [1, 0, 0]), 3)
        envs = [StoppingEnv(EnvConfig(B=2, use_classifier=False), br2), StoppingEnv(EnvConfig(B=3, use_classifier=False), br3)]
        with pytest.raises(ValueError):
            train(envs, TrainerConfig(seed=0))

    def test_defaults_without_classifier(self):
        cfg = TrainerConfig.defaults_for(False)
        assert (cfg.n_steps, cfg.ent_coef) == (100, 0.001)
        cfg = TrainerConfig.defaults_for(True)
        assert (cfg.n_steps, cfg.ent_coef, cfg.clip_range, cfg.n_epochs) == (10, 0.1, 0.1, 10)
        assert (cfg.gamma, cfg.learning_rate, cfg.hidden) == (0.99, 3e-4, 64)
        with pytest.raises(ValueError):
            TrainerConfig(patience=0)


class TestCheckpoint:
    def _ckpt(self, B=100, **meta):
        env_cfg = EnvConfig(B=B, m=4, n=0.25)
        return PolicyCheckpoint(PolicyNetwork(env_cfg.obs_dim, seed=9), TrainerConfig(seed=9), env_cfg, meta)

    def test_round_trip(self, tmp_path, rng):
        ck = self._ckpt(rollouts=5)
        save_checkpoint(tmp_path / "m.ckpt", ck)
        back = load_checkpoint(tmp_path / "m.ckpt")
        obs = rng.uniform(-1, 1, (100, 102))
        np.testing.assert_array_equal(back.policy.action_probs(obs), ck.policy.action_probs(obs))
        assert back.trainer_config == ck.trainer_config
        assert back.env_config == ck.env_config
        assert back.meta == {"rollouts": 5}
        assert read_header(tmp_path / "m.ckpt")["env_config"]["m"] == 4

    def test_truncated(self, tmp_path):
        p = tmp_path / "m.ckpt"
        save_checkpoint(p, self._ckpt())
        raw = p.read_bytes()
        p.write_bytes(raw[:-8])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(p)
        p.write_bytes(raw[:40])
        with pytest.raises(CheckpointError):
            load_checkpoint(p)

    def test_trailing_bytes(self, tmp_path):
        p = tmp_path / "m.ckpt"
        save_checkpoint(p, self._ckpt())
        p.write_bytes(p.read_bytes() + b"\0")
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "m.ckpt"
        save_checkpoint(p, self._ckpt())
        raw = p.read_bytes()
        p.write_bytes(raw.replace(b"GRLSTOP-CHECKPOINT 1\n", b"GRLSTOP-CHECKPOINT 7\n", 1))
        with pytest.raises(CheckpointError, match="7.*1"):
            load_checkpoint(p)

    def test_not_a_checkpoint(self, tmp_path):
        p = tmp_path / "junk"
        p.write_bytes(b"hello\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(p)

    def test_batch_count_guard(self):
        ck = self._ckpt(B=100)
        ck.check_env(EnvConfig(B=100))
        with pytest.raises(CheckpointError, match="B=100"):
            ck.check_env(EnvConfig(B=50))

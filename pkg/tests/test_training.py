"""Unit tests for the bank, the two learning rules, and reconstruction."""

import numpy as np
import pytest

import factoredq as fq
from factoredq import neuralnet as nn
from factoredq import training as tr
from factoredq.errors import ConfigurationError, InvalidInputError
from factoredq.factorization import Factor, Factorization, Scheme


def fq_config(**kwargs) -> tr.TrainConfig:
    defaults = dict(rule=tr.LearningRule.FACTORED_Q, samples=0, seed=77)
    defaults.update(kwargs)
    return tr.TrainConfig(**defaults)


def zero_bank(spec, factorization, seed=0) -> tr.FactorNetworkBank:
    bank = tr.build_bank(spec, factorization, fq_config(seed=seed))
    for layer in range(len(bank.weights)):
        bank.weights[layer][:] = 0.0
        bank.biases[layer][:] = 0.0
    return bank


def reference_step(bank: tr.FactorNetworkBank, a, reward, theta, shared: bool) -> None:
    """The scalar path: compose forward/backward/rmsprop factor by factor."""
    config = bank.net_config
    factors = bank.factorization.factors
    inputs, locals_, predictions = [], [], []
    for e, factor in enumerate(factors):
        x = np.asarray(tr.factor_input(bank.game, factor.agents, theta or ()))
        li = fq.local_action_of(factor, a)
        predictions.append(nn.forward(bank.params_of(e), x, config)[li])
        inputs.append(x)
        locals_.append(li)
    if shared:
        residuals = [reward - sum(predictions)] * len(factors)
    else:
        residuals = [reward - p for p in predictions]
    for e in range(len(factors)):
        grads = nn.backward(bank.params_of(e), inputs[e], locals_[e], residuals[e], config)
        nn.rmsprop_update(bank.params_of(e), bank.state_of(e), grads, config)


def bank_arrays(bank):
    return bank.weights + bank.biases + bank.mean_sq_weights + bank.mean_sq_biases


class TestBankConstruction:
    def test_shapes(self):
        spec = fq.make_game("climb")
        fz = fq.build_factorization("complete", 6, 3, f=2)
        bank = tr.build_bank(spec, fz, fq_config())
        assert [w.shape for w in bank.weights] == [(15, 16, 1), (15, 9, 16)]
        assert [b.shape for b in bank.biases] == [(15, 16), (15, 9)]

    def test_firefighting_input_dims(self):
        spec = fq.make_game("generalized_firefighting")
        pair = tr.build_bank(spec, fq.build_factorization("complete", 6, 2, f=2), fq_config())
        assert pair.net_config.input_dim == 5  # constant + 2 bits per member
        single = tr.build_bank(spec, fq.build_factorization("single_agent", 6, 2), fq_config())
        assert single.net_config.input_dim == 3
        joint = tr.build_bank(spec, fq.build_factorization("joint", 6, 2), fq_config())
        assert joint.net_config.input_dim == 8  # constant + one bit per house

    def test_rebuild_is_identical(self):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("complete", 6, 2, f=2)
        a = tr.build_bank(spec, fz, fq_config(seed=5))
        b = tr.build_bank(spec, fz, fq_config(seed=5))
        for x, y in zip(bank_arrays(a), bank_arrays(b)):
            assert np.array_equal(x, y)

    def test_factor_seed_depends_on_members_not_position(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        forward_order = Factorization(
            Scheme.OVERLAPPING, 3, 2, (Factor((0, 1), 2), Factor((0, 2), 2))
        )
        # Construction canonicalises the order, so a permuted tuple builds
        # the same bank.
        permuted = Factorization(
            Scheme.OVERLAPPING, 3, 2, (Factor((0, 2), 2), Factor((0, 1), 2))
        )
        a = tr.build_bank(spec, forward_order, fq_config(seed=9))
        b = tr.build_bank(spec, permuted, fq_config(seed=9))
        for x, y in zip(bank_arrays(a), bank_arrays(b)):
            assert np.array_equal(x, y)

    def test_game_mismatch_rejected(self):
        spec = fq.make_game("dispersion")
        with pytest.raises(ConfigurationError):
            tr.build_bank(spec, fq.build_factorization("single_agent", 4, 2), fq_config())
        with pytest.raises(ConfigurationError):
            tr.build_bank(spec, fq.build_factorization("single_agent", 6, 3), fq_config())


class TestStepsMatchScalarPath:
    @pytest.mark.parametrize("shared", [False, True])
    def test_count_game(self, shared):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("complete", 6, 2, f=2)
        fast = tr.build_bank(spec, fz, fq_config(seed=3))
        slow = tr.build_bank(spec, fz, fq_config(seed=3))
        rng = np.random.default_rng(0)
        step = tr.fq_step if shared else tr.moe_step
        for _ in range(30):
            a = tuple(int(v) for v in rng.integers(0, 2, 6))
            reward = fq.evaluate_reward(spec, a)
            step(fast, a, reward)
            reference_step(slow, a, reward, None, shared)
        for x, y in zip(bank_arrays(fast), bank_arrays(slow)):
            assert np.allclose(x, y, atol=1e-12)

    @pytest.mark.parametrize("shared", [False, True])
    def test_bayesian_game(self, shared):
        spec = fq.make_game("generalized_firefighting")
        fz = fq.build_factorization("single_agent", 6, 2)
        fast = tr.build_bank(spec, fz, fq_config(seed=4))
        slow = tr.build_bank(spec, fz, fq_config(seed=4))
        rng = np.random.default_rng(1)
        step = tr.fq_step if shared else tr.moe_step
        for _ in range(30):
            a = tuple(int(v) for v in rng.integers(0, 2, 6))
            theta = tuple(int(v) for v in rng.integers(0, 2, 7))
            reward = fq.evaluate_reward(spec, a, theta)
            step(fast, a, reward, theta)
            reference_step(slow, a, reward, theta, shared)
        for x, y in zip(bank_arrays(fast), bank_arrays(slow)):
            assert np.allclose(x, y, atol=1e-12)

    @pytest.mark.parametrize("layers", [2, 3])
    def test_deeper_networks(self, layers):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("single_agent", 6, 2)
        config = fq_config(net=nn.NetConfig(hidden_layers=layers, hidden_units=6))
        fast = tr.build_bank(spec, fz, config)
        slow = tr.build_bank(spec, fz, config)
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = tuple(int(v) for v in rng.integers(0, 2, 6))
            reward = fq.evaluate_reward(spec, a)
            tr.fq_step(fast, a, reward)
            reference_step(slow, a, reward, None, True)
        for x, y in zip(bank_arrays(fast), bank_arrays(slow)):
            assert np.allclose(x, y, atol=1e-12)


class TestStepContracts:
    def test_moe_no_change_when_predictions_match_reward(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 2, 2)
        bank = zero_bank(spec, fq.build_factorization("single_agent", 2, 2))
        bank.biases[-1][:, :] = 1.0  # every output unit predicts exactly 1
        before = [w.copy() for w in bank.weights] + [b.copy() for b in bank.biases]
        tr.moe_step(bank, (0, 1), reward=1.0)
        after = bank.weights + bank.biases
        for x, y in zip(before, after):
            assert np.array_equal(x, y)

    def test_fq_no_change_when_sum_matches_reward(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 2, 2)
        bank = zero_bank(spec, fq.build_factorization("single_agent", 2, 2))
        bank.biases[-1][0, :] = 2.0
        bank.biases[-1][1, :] = 1.0  # sum of selected outputs = 3
        before = [b.copy() for b in bank.biases]
        tr.fq_step(bank, (1, 0), reward=3.0)
        for x, y in zip(before, bank.biases):
            assert np.array_equal(x, y)

    def test_fq_identical_networks_get_identical_updates(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 4, 2)
        fz = Factorization(
            Scheme.OVERLAPPING, 4, 2, (Factor((0, 1), 2), Factor((2, 3), 2))
        )
        bank = tr.build_bank(spec, fz, fq_config())
        for layer in range(len(bank.weights)):  # clone factor 0 into factor 1
            bank.weights[layer][1] = bank.weights[layer][0]
            bank.biases[layer][1] = bank.biases[layer][0]
        tr.fq_step(bank, (1, 0, 1, 0), reward=2.0)  # same local action for both
        for layer in range(len(bank.weights)):
            assert np.array_equal(bank.weights[layer][0], bank.weights[layer][1])

    def test_single_factor_bank_moe_equals_fq(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        fz = fq.build_factorization("joint", 3, 2)
        a_bank = tr.build_bank(spec, fz, fq_config(seed=8))
        b_bank = tr.build_bank(spec, fz, fq_config(seed=8))
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = tuple(int(v) for v in rng.integers(0, 2, 3))
            reward = fq.evaluate_reward(spec, a)
            tr.moe_step(a_bank, a, reward)
            tr.fq_step(b_bank, a, reward)
        for x, y in zip(bank_arrays(a_bank), bank_arrays(b_bank)):
            assert np.array_equal(x, y)

    def test_moe_update_touches_only_selected_output_rows(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 2, 2)
        fz = fq.build_factorization("single_agent", 2, 2)
        bank = tr.build_bank(spec, fz, fq_config(seed=2))
        out_before = bank.biases[-1].copy()
        tr.moe_step(bank, (0, 1), reward=5.0)
        changed = bank.biases[-1] != out_before
        assert changed[0, 0] and changed[1, 1]
        assert not changed[0, 1] and not changed[1, 0]

    def test_theta_validation(self):
        spec = fq.make_game("generalized_firefighting")
        bank = tr.build_bank(spec, fq.build_factorization("single_agent", 6, 2), fq_config())
        with pytest.raises(InvalidInputError):
            tr.moe_step(bank, (0,) * 6, 1.0)  # missing theta
        with pytest.raises(InvalidInputError):
            tr.moe_step(bank, (0,) * 6, 1.0, (0,) * 3)  # wrong length
        plain = tr.build_bank(
            fq.make_game("dispersion"), fq.build_factorization("single_agent", 6, 2), fq_config()
        )
        with pytest.raises(InvalidInputError):
            tr.moe_step(plain, (0,) * 6, 1.0, (0,) * 7)


class TestReconstruct:
    def test_zero_networks_zero_table(self):
        spec = fq.make_game("dispersion")
        bank = zero_bank(spec, fq.build_factorization("complete", 6, 2, f=2))
        recon = tr.reconstruct(bank, tr.LearningRule.FACTORED_Q)
        assert np.array_equal(recon.qtable.values, np.zeros((1, 64)))

    def test_hand_set_sum_and_mean(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 2, 2)
        bank = zero_bank(spec, fq.build_factorization("single_agent", 2, 2))
        bank.biases[-1][0] = [1.0, 0.0]
        bank.biases[-1][1] = [2.0, 0.0]
        summed = tr.reconstruct(bank, tr.LearningRule.FACTORED_Q)
        averaged = tr.reconstruct(bank, tr.LearningRule.MIXTURE_OF_EXPERTS)
        assert summed.qtable.values[0, 0] == 3.0
        assert averaged.qtable.values[0, 0] == 1.5

    def test_fq_linearity_by_brute_force(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        fz = fq.build_factorization("complete", 3, 2, f=2)
        bank = tr.build_bank(spec, fz, fq_config(seed=21))
        recon = tr.reconstruct(bank, tr.LearningRule.FACTORED_Q)
        config = bank.net_config
        for j, a in enumerate(fq.enumerate_joint_actions(spec)):
            expected = sum(
                nn.forward(bank.params_of(e), [1.0], config)[
                    fq.local_action_of(factor, a)
                ]
                for e, factor in enumerate(fz.factors)
            )
            assert recon.qtable.values[0, j] == pytest.approx(expected, abs=1e-12)

    def test_moe_mean_uses_factor_count(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        fz = fq.build_factorization("complete", 3, 2, f=2)  # C=3 > n would differ under 1/n
        bank = zero_bank(spec, fz)
        bank.biases[-1][:, :] = 1.0
        recon = tr.reconstruct(bank, tr.LearningRule.MIXTURE_OF_EXPERTS)
        assert np.allclose(recon.qtable.values, 1.0)


class TestTrain:
    def test_zero_samples_untrained_reconstruction_empty_curve(self):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("single_agent", 6, 2)
        config = fq_config(samples=0)
        bank, recon, curve = tr.train(spec, fz, config)
        untrained = tr.reconstruct(tr.build_bank(spec, fz, config), config.rule)
        assert np.array_equal(recon.qtable.values, untrained.qtable.values)
        assert curve.steps == [] and curve.mse_all == [] and curve.value_loss == []

    def test_deterministic_replay(self):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("complete", 6, 2, f=2)
        config = fq_config(samples=1500, eval_every=500)
        _, r1, c1 = tr.train(spec, fz, config)
        _, r2, c2 = tr.train(spec, fz, config)
        assert np.array_equal(r1.qtable.values, r2.qtable.values)
        assert c1.steps == c2.steps and c1.mse_all == c2.mse_all

    def test_curve_checkpoint_arithmetic(self):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("single_agent", 6, 2)
        _, _, curve = tr.train(spec, fz, fq_config(samples=2000, eval_every=400))
        assert curve.steps == [400, 800, 1200, 1600, 2000]
        assert all(b > a for a, b in zip(curve.steps, curve.steps[1:]))

    def test_factor_order_invariance(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        base = Factorization(
            Scheme.OVERLAPPING, 3, 2, (Factor((0, 1), 2), Factor((1, 2), 2))
        )
        permuted = Factorization(
            Scheme.OVERLAPPING, 3, 2, (Factor((1, 2), 2), Factor((0, 1), 2))
        )
        config = fq_config(samples=800)
        _, r1, _ = tr.train(spec, base, config)
        _, r2, _ = tr.train(spec, permuted, config)
        assert np.allclose(r1.qtable.values, r2.qtable.values, atol=1e-9)

    def test_moe_factor_trajectories_are_independent(self):
        # Training the same factor inside two different banks under the
        # experts rule yields identical parameters: updates never mix factors.
        spec = fq.GameSpec(fq.GameId.DISPERSION, 3, 2)
        small = Factorization(
            Scheme.OVERLAPPING, 3, 2, (Factor((0, 1), 2), Factor((0, 2), 2))
        )
        big = fq.build_factorization("complete", 3, 2, f=2)
        config = tr.TrainConfig(
            rule=tr.LearningRule.MIXTURE_OF_EXPERTS, samples=600, seed=31
        )
        bank_small, _, _ = tr.train(spec, small, config)
        bank_big, _, _ = tr.train(spec, big, config)
        for agents in [(0, 1), (0, 2)]:
            e_small = [f.agents for f in small.factors].index(agents)
            e_big = [f.agents for f in big.factors].index(agents)
            ps, pb = bank_small.params_of(e_small), bank_big.params_of(e_big)
            for x, y in zip(ps.weights + ps.biases, pb.weights + pb.biases):
                assert np.array_equal(x, y)

    def test_joint_fq_converges_to_exact_table_on_toy(self):
        spec = fq.GameSpec(fq.GameId.DISPERSION, 2, 2)
        fz = fq.build_factorization("joint", 2, 2)
        config = tr.TrainConfig(
            rule=tr.LearningRule.FACTORED_Q,
            samples=60_000,
            seed=13,
            eval_every=60_000,
            net=nn.NetConfig(learning_rate=1e-3),
        )
        _, recon, _ = tr.train(spec, fz, config)
        truth = fq.true_q_table(spec)
        assert np.max(np.abs(recon.qtable.values - truth.values)) < 1e-2


class TestPersistence:
    def test_bank_roundtrip(self):
        spec = fq.make_game("generalized_firefighting")
        fz = fq.build_factorization("single_agent", 6, 2)
        bank, _, _ = tr.train(spec, fz, fq_config(samples=300))
        loaded = tr.bank_from_json(tr.bank_to_json(bank))
        assert loaded.net_config == bank.net_config
        assert loaded.factorization == bank.factorization
        for x, y in zip(bank_arrays(bank), bank_arrays(loaded)):
            assert np.array_equal(x, y)

    def test_reconstruction_roundtrip(self):
        spec = fq.make_game("dispersion")
        fz = fq.build_factorization("complete", 6, 2, f=2)
        _, recon, _ = tr.train(spec, fz, fq_config(samples=300))
        loaded = tr.reconstruction_from_json(tr.reconstruction_to_json(recon))
        assert np.array_equal(loaded.qtable.values, recon.qtable.values)
        assert loaded.rule == recon.rule
        assert loaded.factorization == recon.factorization

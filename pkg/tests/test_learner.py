import copy
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from aerharvest.learner import (
    Batch,
    DDQNLearner,
    Experience,
    Hyperparams,
    ModelFormatError,
    NetworkSpec,
    QNetwork,
    ReplayMemory,
    ddqn_loss,
    ddqn_targets,
    greedy_action,
    load_model,
    save_model,
    soft_update,
    softmax_action,
    softmax_probabilities,
)
from aerharvest.obsmap import Observation

SMALL = NetworkSpec(local_size=5, global_size=5, conv_layers=1, conv_filters=2, kernel_size=3, hidden=(8,))


def obs(rng, spec=SMALL, b=None):
    return Observation(
        rng.random((spec.local_size, spec.local_size, 6)),
        rng.random((spec.global_size, spec.global_size, 6)),
        float(rng.integers(1, 20) if b is None else b),
    )


def zero_net(spec=SMALL, bias=None):
    net = QNetwork(spec, seed=0)
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
        if bias is not None:
            net.head[-1].bias.copy_(torch.as_tensor(bias, dtype=net.spec.torch_dtype))
    return net


def q(net, o):
    from aerharvest.learner.ddqn import obs_tensors

    with torch.no_grad():
        return net(*obs_tensors([o], net.spec.torch_dtype))[0].numpy()


def single_batch(o, action, reward, o2, terminal):
    return Batch(
        local=o.local[None],
        global_=o.global_[None],
        scalar=np.array([o.scalar_b]),
        action=np.array([action]),
        reward=np.array([reward]),
        next_local=o2.local[None],
        next_global=o2.global_[None],
        next_scalar=np.array([o2.scalar_b]),
        terminal=np.array([terminal]),
    )


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------


def test_parameter_counts_match_reference_sizes():
    assert QNetwork(NetworkSpec.for_map(32, 17, 3)).num_parameters() == 1_175_302
    assert QNetwork(NetworkSpec.for_map(50, 17, 5)).num_parameters() == 978_694


def test_forward_shape_and_finite():
    rng = np.random.default_rng(0)
    net = QNetwork(SMALL, seed=3)
    values = q(net, obs(rng))
    assert values.shape == (6,) and np.isfinite(values).all()


def test_zero_parameters_give_zero_output():
    rng = np.random.default_rng(0)
    assert np.array_equal(q(zero_net(), obs(rng)), np.zeros(6))


def test_copy_gives_identical_outputs():
    rng = np.random.default_rng(1)
    net = QNetwork(SMALL, seed=5)
    twin = copy.deepcopy(net)
    o = obs(rng)
    assert np.array_equal(q(net, o), q(twin, o))


def test_output_bias_shifts_one_action():
    rng = np.random.default_rng(2)
    net = QNetwork(SMALL, seed=5)
    o = obs(rng)
    before = q(net, o)
    with torch.no_grad():
        net.head[-1].bias[3] += 1.0
    after = q(net, o)
    delta = after - before
    assert delta[3] == pytest.approx(1.0, abs=1e-6)
    assert np.abs(np.delete(delta, 3)).max() == 0.0


def test_seeded_init_is_reproducible():
    a, b = QNetwork(SMALL, seed=9), QNetwork(SMALL, seed=9)
    assert np.array_equal(a.flat_parameters(), b.flat_parameters())
    assert not np.array_equal(a.flat_parameters(), QNetwork(SMALL, seed=10).flat_parameters())


def test_dimension_mismatch_raises():
    net = QNetwork(SMALL)
    bad = Observation(np.zeros((7, 7, 6)), np.zeros((5, 5, 6)), 1.0)
    with pytest.raises(RuntimeError):
        q(net, bad)


def test_input_scaling():
    spec = NetworkSpec(**{**SMALL.__dict__, "data_scale": 20.0, "flying_time_scale": 100.0})
    net = QNetwork(spec, seed=1)
    ref = QNetwork(SMALL, seed=1)
    rng = np.random.default_rng(4)
    o = obs(rng)
    local, glob = o.local.copy(), o.global_.copy()
    local[..., 3] /= 20.0
    glob[..., 3] /= 20.0
    local[..., 4] /= 100.0
    glob[..., 4] /= 100.0
    scaled = Observation(local, glob, o.scalar_b / 100.0)
    assert np.allclose(q(net, o), q(ref, scaled), rtol=1e-5, atol=1e-6)


def test_model_roundtrip(tmp_path):
    net = QNetwork(SMALL, seed=4)
    save_model(net, tmp_path / "m.ahnet")
    raw = (tmp_path / "m.ahnet").read_bytes()
    assert raw[:8] == b"AHNET\x00\x00\x01"
    again = load_model(tmp_path / "m.ahnet")
    assert again.spec == net.spec
    assert np.array_equal(again.flat_parameters(), net.flat_parameters().astype(np.float32))


def test_model_bad_files(tmp_path):
    (tmp_path / "x").write_bytes(b"garbage!")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "x")
    save_model(QNetwork(SMALL), tmp_path / "m")
    raw = (tmp_path / "m").read_bytes()
    (tmp_path / "t").write_bytes(raw[:-4])
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "t")


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


def test_greedy_examples():
    assert greedy_action([0, 0, 0, 5, 0, 0]) == 3
    assert greedy_action([1, 1, 1, 1, 1, 1]) == 0
    with pytest.raises(ValueError):
        greedy_action([0, np.nan, 0, 0, 0, 0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(-50, 50), min_size=6, max_size=6),
    st.floats(0.01, 100),
    st.floats(-100, 100),
)
def test_greedy_affine_invariance(values, scale, shift):
    # integer values keep ties exact under the transform
    q_values = np.array(values, dtype=float)
    assert greedy_action(q_values) == greedy_action(scale * q_values + shift)


def test_softmax_examples():
    assert np.allclose(softmax_probabilities(np.zeros(6), 0.1), np.full(6, 1 / 6))
    p = softmax_probabilities([1, 0, 0, 0, 0, 0], 0.1)
    assert p[0] == pytest.approx(math.exp(10) / (math.exp(10) + 5), rel=1e-12)
    assert p[0] == pytest.approx(0.99977, abs=1e-5)
    wide = softmax_probabilities([3, -2, 7, 0, 1, 5], 1e6)
    assert 0.5 * np.abs(wide - 1 / 6).sum() < 1e-4
    with pytest.raises(ValueError):
        softmax_probabilities(np.zeros(6), 0.0)


def test_softmax_sampling_frequencies():
    rng = np.random.default_rng(0)
    q_values = [0.0, 0.1, 0.2, 0.0, -0.1, 0.05]
    p = softmax_probabilities(q_values, 0.1)
    n = 60000
    counts = np.bincount([softmax_action(q_values, 0.1, rng) for _ in range(n)], minlength=6)
    sigma = np.sqrt(n * p * (1 - p))
    assert (np.abs(counts - n * p) <= 4 * sigma).all()


def test_softmax_stable_for_large_values():
    p = softmax_probabilities([1e6, 1e6 - 1, 0, 0, 0, 0], 0.1)
    assert np.isfinite(p).all() and p[0] > 0.99


# ---------------------------------------------------------------------------
# Replay memory
# ---------------------------------------------------------------------------


def make_exp(k, rng=None):
    o = Observation(np.full((3, 3, 6), float(k)), np.full((2, 2, 6), float(k)), float(k))
    return Experience(o, k % 6, float(k), o, False)


def test_replay_single_item_batch_of_two():
    mem = ReplayMemory(10)
    mem.push(make_exp(7))
    batch = mem.sample_cer(2, np.random.default_rng(0))
    assert batch.reward.tolist() == [7.0, 7.0]


def test_replay_fifo_eviction():
    mem = ReplayMemory(3)
    for k in range(4):
        mem.push(make_exp(k))
    assert len(mem) == 3
    stored = set(mem.gather(np.arange(3)).reward.tolist())
    assert stored == {1.0, 2.0, 3.0}
    assert mem.gather(np.array([mem.latest_index])).reward[0] == 3.0


def test_replay_latest_always_in_batch():
    rng = np.random.default_rng(1)
    mem = ReplayMemory(7)
    for k in range(40):
        mem.push(make_exp(k))
        if len(mem) >= 3:
            batch = mem.sample_cer(4, rng)
            assert batch.reward[-1] == float(k)


def test_replay_insufficient():
    mem = ReplayMemory(5)
    mem.push(make_exp(0))
    with pytest.raises(ValueError):
        mem.sample_cer(4, np.random.default_rng(0))
    with pytest.raises(IndexError):
        ReplayMemory(2).latest_index


# ---------------------------------------------------------------------------
# DDQN
# ---------------------------------------------------------------------------


def test_target_terminal_and_bootstrap():
    rng = np.random.default_rng(0)
    o, o2 = obs(rng), obs(rng)
    online = zero_net(bias=[0, 0, 5, 0, 0, 0])
    target = zero_net(bias=[9, 9, 2, 9, 9, 9])
    terminal = ddqn_targets(single_batch(o, 1, 1.0, o2, True), online, target, 0.95)
    assert terminal.item() == pytest.approx(1.0)
    boot = ddqn_targets(single_batch(o, 1, 1.0, o2, False), online, target, 0.95)
    assert boot.item() == pytest.approx(2.9)


def test_target_reduces_to_dqn_with_identical_nets():
    rng = np.random.default_rng(3)
    net = QNetwork(SMALL, seed=2)
    o, o2 = obs(rng), obs(rng)
    y = ddqn_targets(single_batch(o, 0, 0.5, o2, False), net, copy.deepcopy(net), 0.9).item()
    assert y == pytest.approx(0.5 + 0.9 * q(net, o2).max(), rel=1e-6)


def test_zero_td_error_leaves_parameters():
    rng = np.random.default_rng(4)
    spec = SMALL
    learner = DDQNLearner(spec, Hyperparams(batch_size=1, capacity=4), seed=0)
    bias = [0.25, -0.5, 1.0, 0.125, 0.0, -0.5]
    for net in (learner.online, learner.target):
        with torch.no_grad():
            for p in net.parameters():
                p.zero_()
            net.head[-1].bias.copy_(torch.tensor(bias))
    o, o2 = obs(rng), obs(rng)
    # a terminal transition whose reward equals the prediction exactly
    learner.memory.push(Experience(o, 1, bias[1], o2, True))
    before = learner.online.flat_parameters().copy()
    loss = learner.train_step()
    assert loss == 0.0
    assert np.array_equal(learner.online.flat_parameters(), before)


def test_single_transition_step_matches_hand_computation():
    # with zero weights only the output bias receives gradient, so Q(s, a) = b_a
    rng = np.random.default_rng(5)
    spec = NetworkSpec(**{**SMALL.__dict__, "dtype": "float64"})
    hyper = Hyperparams(batch_size=1, capacity=4, learning_rate=0.01)
    learner = DDQNLearner(spec, hyper, seed=0)
    for net in (learner.online, learner.target):
        with torch.no_grad():
            for p in net.parameters():
                p.zero_()
            net.head[-1].bias.copy_(torch.tensor([0.0, 2.0, 0.0, 0.0, 0.0, 0.0], dtype=torch.float64))
    o, o2 = obs(rng), obs(rng)
    learner.memory.push(Experience(o, 1, 3.0, o2, True))
    learner.train_step()
    grad = 2 * (2.0 - 3.0)
    # first Adam step: m_hat = g, v_hat = g^2
    expected = 2.0 - 0.01 * grad / (abs(grad) + 1e-8)
    bias = learner.online.head[-1].bias.detach().numpy()
    assert bias[1] == pytest.approx(expected, rel=1e-12)
    assert np.array_equal(np.delete(bias, 1), np.zeros(5))


def test_soft_update_examples():
    a, b = zero_net(), QNetwork(SMALL, seed=1)
    soft_update(a, b, 1.0)
    assert np.array_equal(a.flat_parameters(), b.flat_parameters())
    zero, ones = zero_net(), zero_net()
    with torch.no_grad():
        for p in ones.parameters():
            p.fill_(1.0)
    soft_update(zero, ones, 0.005)
    assert np.allclose(zero.flat_parameters(), 0.005)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    spec = NetworkSpec(**{**SMALL.__dict__, "dtype": "float64", "conv_filters": 1})
    online = QNetwork(spec, seed=1)
    target = QNetwork(spec, seed=2)
    batch = random_batch(rng, spec, 8)
    y = ddqn_targets(batch, online, target, 0.95)
    loss = ddqn_loss(batch, online, y)
    grads = torch.autograd.grad(loss, list(online.parameters()))
    analytic = np.concatenate([g.numpy().ravel() for g in grads])
    params = list(online.parameters())
    flat_index = [(pi, j) for pi, p in enumerate(params) for j in range(p.numel())]
    h = 1e-3
    with torch.no_grad():
        for n in rng.choice(len(flat_index), size=60, replace=False):
            pi, j = flat_index[n]
            view = params[pi].view(-1)
            orig = view[j].item()
            view[j] = orig + h
            up = ddqn_loss(batch, online, y).item()
            view[j] = orig - h
            down = ddqn_loss(batch, online, y).item()
            view[j] = orig
            numeric = (up - down) / (2 * h)
            assert abs(numeric - analytic[n]) <= 1e-4 * max(abs(numeric), abs(analytic[n])) + 1e-10


def random_batch(rng, spec, n):
    pieces = [obs(rng, spec) for _ in range(2 * n)]
    return Batch(
        local=np.stack([p.local for p in pieces[:n]]),
        global_=np.stack([p.global_ for p in pieces[:n]]),
        scalar=np.array([p.scalar_b for p in pieces[:n]]),
        action=rng.integers(6, size=n),
        reward=rng.normal(size=n),
        next_local=np.stack([p.local for p in pieces[n:]]),
        next_global=np.stack([p.global_ for p in pieces[n:]]),
        next_scalar=np.array([p.scalar_b for p in pieces[n:]]),
        terminal=rng.random(n) < 0.3,
    )


def test_learner_ready_and_training_reduces_loss():
    rng = np.random.default_rng(8)
    learner = DDQNLearner(SMALL, Hyperparams(batch_size=8, capacity=64, learning_rate=1e-2), seed=0)
    fixed = [Experience(obs(rng), int(rng.integers(6)), float(rng.normal()), obs(rng), True) for _ in range(16)]
    for e in fixed[:7]:
        learner.memory.push(e)
    assert not learner.ready()
    for e in fixed[7:]:
        learner.memory.push(e)
    assert learner.ready()
    batch = learner.memory.gather(np.arange(16))

    def full_loss():
        return ddqn_loss(batch, learner.online, ddqn_targets(batch, learner.online, learner.target, 0.95)).item()
    start = full_loss()
    for _ in range(300):
        learner.train_step()
    assert full_loss() < 0.5 * start
    assert learner.train_steps == 300

"""Guidance policy, demand oracle modules, and the monotone mixer."""

import numpy as np
import pytest

from dcmac.guidance import (
    DemandInferParams,
    GlobalDemandParams,
    GuidanceParams,
    MixerParams,
    demand_infer,
    global_demand,
    guidance_encode,
    guidance_q,
    qmix_mix,
)
from dcmac.numcore import Tensor, grad_check, no_grad


def _guidance(seed=0, n_agents=2, n_actions=3, d_hidden=8, entity_cols=7):
    return GuidanceParams.init(np.random.default_rng(seed), entity_cols, n_agents, n_actions, d_hidden)


def _hiddens(params, seed=1, batch=2):
    rng = np.random.default_rng(seed)
    return [Tensor(rng.standard_normal((batch, params.d_hidden))) for _ in range(params.n_agents)]


def test_joint_head_input_width():
    params = GuidanceParams.init(np.random.default_rng(0), 7, 2, 3, d_hidden=64)
    assert params.head1.W.shape == (2 * 64 + 2, 64)


def test_guidance_q_shape_and_id_conditioning():
    params = _guidance()
    hs = _hiddens(params)
    q0 = guidance_q(params, hs, 0)
    q1 = guidance_q(params, hs, 1)
    assert q0.shape == (2, 3)
    assert np.abs(q0.data - q1.data).max() > 1e-8


def test_guidance_q_sensitive_to_teammate_order():
    params = _guidance(n_agents=3)
    hs = _hiddens(params)
    base = guidance_q(params, hs, 0).data
    swapped = guidance_q(params, [hs[0], hs[2], hs[1]], 0).data
    assert np.abs(base - swapped).max() > 1e-8


def test_guidance_q_validates_inputs():
    params = _guidance()
    hs = _hiddens(params)
    with pytest.raises(Exception):
        guidance_q(params, hs[:1], 0)
    with pytest.raises(ValueError):
        guidance_q(params, hs, 5)


def test_guidance_full_path_gradients():
    params = _guidance(d_hidden=6, entity_cols=4)
    rng = np.random.default_rng(2)
    obs = [Tensor(rng.standard_normal((2, 8))) for _ in range(2)]
    h0 = [Tensor(np.zeros((2, 6))) for _ in range(2)]

    def loss():
        hs = [guidance_encode(params, o, h, (2, 4)) for o, h in zip(obs, h0)]
        hs = [guidance_encode(params, o, h, (2, 4)) for o, h in zip(obs, hs)]
        total = guidance_q(params, hs, 0).sum() + guidance_q(params, hs, 1).sum()
        return total

    report = grad_check(loss, params.named_params())
    assert report.max_error < 1e-5


def test_global_demand_zero_weights_standard_normal_params():
    gd = GlobalDemandParams.init(np.random.default_rng(3), d_hidden=6, d_dem=4)
    gd.net.W.data[:] = 0.0
    gd.net.b.data[:] = 0.0
    gp = global_demand(gd, Tensor(np.ones((2, 6))))
    assert np.array_equal(gp.mean.data, np.zeros((2, 4)))
    assert np.array_equal(gp.log_var.data, np.zeros((2, 4)))


def test_global_demand_deterministic_and_clamped():
    gd = GlobalDemandParams.init(np.random.default_rng(4), d_hidden=6, d_dem=4)
    h = Tensor(np.random.default_rng(5).standard_normal((3, 6)))
    a = global_demand(gd, h)
    b = global_demand(gd, h)
    assert np.array_equal(a.mean.data, b.mean.data)
    gd.net.b.data[:] = 1000.0
    clamped = global_demand(gd, h)
    assert clamped.log_var.data.max() <= 10.0


def test_demand_infer_action_conditioning():
    di = DemandInferParams.init(np.random.default_rng(6), d_hidden=6, n_actions=3, d_dem=4)
    h = Tensor(np.random.default_rng(7).standard_normal((1, 6)))
    means = [demand_infer(di, h, np.array([a])).mean.data for a in range(3)]
    assert np.abs(means[0] - means[1]).max() > 1e-8
    assert np.abs(means[1] - means[2]).max() > 1e-8


def test_demand_infer_rejects_bad_action():
    di = DemandInferParams.init(np.random.default_rng(8), d_hidden=6, n_actions=3)
    with pytest.raises(ValueError):
        demand_infer(di, Tensor(np.zeros((1, 6))), np.array([3]))


def test_demand_infer_deterministic():
    di = DemandInferParams.init(np.random.default_rng(9), d_hidden=6, n_actions=3, d_dem=4)
    h = Tensor(np.random.default_rng(10).standard_normal((4, 6)))
    acts = np.array([0, 1, 2, 1])
    a = demand_infer(di, h, acts)
    b = demand_infer(di, h, acts)
    assert np.array_equal(a.mean.data, b.mean.data)
    assert np.array_equal(a.log_var.data, b.log_var.data)


def _mixer(seed=11, state_dim=5, n_agents=3, d_mix=8):
    return MixerParams.init(np.random.default_rng(seed), state_dim, n_agents, d_mix)


def test_mixer_monotone_under_finite_differences():
    mixer = _mixer()
    rng = np.random.default_rng(12)
    eps = 1e-5
    with no_grad():
        for _ in range(100):
            q = rng.standard_normal(3)
            s = rng.standard_normal(5)
            state = Tensor(s[None])
            for i in range(3):
                up, down = q.copy(), q.copy()
                up[i] += eps
                down[i] -= eps
                hi = qmix_mix(mixer, Tensor(up[None]), state).data[0]
                lo = qmix_mix(mixer, Tensor(down[None]), state).data[0]
                assert (hi - lo) / (2 * eps) >= -1e-9


def test_mixer_unit_increase_never_decreases():
    mixer = _mixer(seed=13)
    rng = np.random.default_rng(14)
    with no_grad():
        for _ in range(50):
            q = rng.standard_normal(3)
            s = Tensor(rng.standard_normal((1, 5)))
            base = qmix_mix(mixer, Tensor(q[None]), s).data[0]
            for i in range(3):
                bumped = q.copy()
                bumped[i] += 1.0
                assert qmix_mix(mixer, Tensor(bumped[None]), s).data[0] >= base - 1e-12


def test_mixer_vdn_degenerate_configuration():
    mixer = _mixer(seed=15, n_agents=3, d_mix=4)
    # Freeze hypernetworks to constants: W1 = rows of identity, w2 = ones on
    # the first n slots, all biases 0. ELU is identity for q >= 0, so the
    # mixer collapses to the plain sum of the agent values.
    mixer.hyper_w1.W.data[:] = 0.0
    w1 = np.zeros((3, 4))
    w1[np.arange(3), np.arange(3)] = 1.0
    mixer.hyper_w1.b.data[:] = w1.reshape(-1)
    mixer.hyper_b1.W.data[:] = 0.0
    mixer.hyper_b1.b.data[:] = 0.0
    mixer.hyper_w2.W.data[:] = 0.0
    mixer.hyper_w2.b.data[:] = np.array([1.0, 1.0, 1.0, 0.0])
    mixer.hyper_b2.W.data[:] = 0.0
    mixer.hyper_b2.b.data[:] = 0.0
    rng = np.random.default_rng(16)
    q = rng.random((4, 3))  # nonnegative probes
    s = Tensor(rng.standard_normal((4, 5)))
    out = qmix_mix(mixer, Tensor(q), s)
    assert np.allclose(out.data, q.sum(axis=1), atol=1e-12)


def test_mixer_gradients():
    mixer = _mixer(seed=17, n_agents=2, d_mix=3, state_dim=4)
    rng = np.random.default_rng(18)
    qs = Tensor(rng.standard_normal((3, 2)))
    state = Tensor(rng.standard_normal((3, 4)))

    def loss():
        out = qmix_mix(mixer, qs, state)
        return (out * out).sum()

    report = grad_check(loss, mixer.named_params("mixer"))
    assert report.max_error < 1e-5


def test_two_mixers_share_no_parameters():
    a = _mixer(seed=19)
    b = _mixer(seed=19)
    tensors_a = {id(t) for _, t in a.named_params("a")}
    tensors_b = {id(t) for _, t in b.named_params("b")}
    assert tensors_a.isdisjoint(tensors_b)

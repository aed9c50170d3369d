"""GTrXL actor-critic: forward, memory, action decoding, checkpoints."""

import math

import numpy as np
import pytest
import torch

from exploresparse.policy import (
    CheckpointMismatchError,
    EpisodicMemory,
    GtrxlBlock,
    PolicyConfig,
    gaussian_entropy,
    gaussian_log_prob,
    init_params,
    load_checkpoint,
    sample_action,
    save_checkpoint,
    to_gmm,
)

TINY = PolicyConfig(
    env_size=16, patch_size=8, n_layers=2, n_heads=2, head_size=8,
    pwff_size=16, layer_size=16, memory_len=8,
    actor_hidden=(32, 16), critic_hidden=(32, 16),
)


def _tokens(config: PolicyConfig, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random((config.n_tokens, config.token_dim)).astype(np.float32)


# -- config -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        PolicyConfig(env_size=100, patch_size=30).validate()
    with pytest.raises(ValueError):
        PolicyConfig(n_layers=0).validate()
    with pytest.raises(ValueError):
        PolicyConfig(memory_len=-1).validate()


def test_config_action_dim():
    assert PolicyConfig(n_components=8).action_dim == 40
    assert PolicyConfig(n_components=8, with_gates=True).action_dim == 48


def test_scaled_preserves_structure():
    base = PolicyConfig()
    small = base.scaled(1 / 8)
    assert small.n_layers == base.n_layers
    assert small.n_heads == base.n_heads
    assert len(small.actor_hidden) == len(base.actor_hidden)
    assert small.layer_size == 128
    assert small.memory_len == 50


def test_forward_succeeds_across_scale_factors():
    for factor in (1 / 64, 1 / 8, 1):
        cfg = PolicyConfig().scaled(factor)
        cfg.env_size = 100
        model = init_params(cfg, 0)
        out = model.act(_tokens(cfg), EpisodicMemory.empty(cfg))
        assert np.isfinite(out.action_mean).all()
        assert math.isfinite(out.value)


# -- forward / memory ---------------------------------------------------------


def test_forward_pure_bitwise():
    model = init_params(TINY, 1)
    tokens = torch.as_tensor(_tokens(TINY)).unsqueeze(0)
    mem = torch.zeros(TINY.n_layers, 1, TINY.memory_len, TINY.layer_size)
    valid = torch.tensor([0])
    m1, v1, _, _ = model.forward(tokens, mem, valid)
    m2, v2, _, _ = model.forward(tokens, mem, valid)
    assert torch.equal(m1, m2) and torch.equal(v1, v2)


def test_empty_memory_equals_memoryless_pass():
    model = init_params(TINY, 2)
    tokens = torch.as_tensor(_tokens(TINY)).unsqueeze(0)
    mem = torch.zeros(TINY.n_layers, 1, TINY.memory_len, TINY.layer_size)
    with_mem, val_mem, _, _ = model.forward(tokens, mem, torch.tensor([0]))
    without, val_no, _, _ = model.forward(tokens)
    assert torch.allclose(with_mem, without, atol=1e-6)
    assert torch.allclose(val_mem, val_no, atol=1e-6)


def test_memory_is_consumed():
    model = init_params(TINY, 3)
    tokens = _tokens(TINY)
    mem = EpisodicMemory.empty(TINY)
    first = model.act(tokens, mem)
    second = model.act(tokens, first.new_memory)
    assert first.new_memory.valid == min(TINY.n_tokens, TINY.memory_len)
    assert not np.allclose(first.action_mean, second.action_mean)


def test_memory_rolls_and_caps_valid():
    model = init_params(TINY, 4)
    mem = EpisodicMemory.empty(TINY)
    for _ in range(5):
        out = model.act(_tokens(TINY), mem)
        mem = out.new_memory
    assert mem.valid == TINY.memory_len
    assert mem.data.shape == (TINY.n_layers, TINY.memory_len, TINY.layer_size)


def test_gate_identity_initialization():
    # with a strongly identity-favoring bias, block output stays near its input
    cfg = PolicyConfig(**{**TINY.__dict__, "gate_bias_init": 8.0})
    torch.manual_seed(0)
    block = GtrxlBlock(cfg)
    x = torch.randn(1, cfg.n_tokens, cfg.layer_size)
    with torch.no_grad():
        y = block(x, None, None)
    assert float((y - x).abs().max()) < 0.05


def test_memory_detached_from_gradients():
    model = init_params(TINY, 5)
    tokens = torch.as_tensor(_tokens(TINY)).unsqueeze(0)
    mem = torch.zeros(TINY.n_layers, 1, TINY.memory_len, TINY.layer_size)
    _, _, new_mem, _ = model.forward(tokens, mem, torch.tensor([0]))
    assert not new_mem.requires_grad


def test_forward_rejects_wrong_token_shape():
    model = init_params(TINY, 6)
    with pytest.raises(ValueError):
        model.forward(torch.zeros(1, 3, TINY.token_dim))


# -- to_gmm -------------------------------------------------------------------


def test_to_gmm_zero_vector_symmetry():
    raw = np.zeros(TINY.action_dim)
    gmm = to_gmm(raw, 100, 80, TINY)
    assert np.allclose(gmm.weights, 1 / TINY.n_components)
    assert np.allclose(gmm.means[:, 0], 99 / 2)
    assert np.allclose(gmm.means[:, 1], 79 / 2)
    assert np.allclose(gmm.stds, TINY.sigma_min + math.log(2))


def test_to_gmm_weight_logit_fixture():
    cfg = PolicyConfig(**{**TINY.__dict__, "n_components": 8})
    raw = np.zeros(cfg.action_dim)
    raw[0] = math.log(2)
    gmm = to_gmm(raw, 50, 50, cfg)
    assert gmm.weights[0] == pytest.approx(2 / 9, abs=1e-12)
    assert np.allclose(gmm.weights[1:], 1 / 9)


def test_to_gmm_means_clamped_to_map_edge():
    raw = np.zeros(TINY.action_dim)
    k = TINY.n_components
    raw[k:3 * k] = 1e4  # extreme mean logits
    gmm = to_gmm(raw, 64, 32, TINY)
    assert np.allclose(gmm.means[:, 0], 63.0)
    assert np.allclose(gmm.means[:, 1], 31.0)


def test_to_gmm_invariants_hold_for_random_raws():
    rng = np.random.default_rng(0)
    cfg = PolicyConfig(**{**TINY.__dict__, "with_gates": True})
    for _ in range(10_000):
        scale = 10 ** rng.uniform(-2, 8)
        raw = rng.standard_normal(cfg.action_dim) * scale
        gmm = to_gmm(raw, 100, 100, cfg)
        gmm.validate(bounds=(100, 100), sigma_min=cfg.sigma_min)
        assert np.isfinite(gmm.weights).all()
        assert np.isfinite(gmm.means).all()
        assert np.isfinite(gmm.stds).all()


def test_to_gmm_rejects_nonfinite_and_bad_shape():
    with pytest.raises(ValueError):
        to_gmm(np.full(TINY.action_dim, np.nan), 10, 10, TINY)
    with pytest.raises(ValueError):
        to_gmm(np.zeros(3), 10, 10, TINY)


# -- sampling / distributions -------------------------------------------------


def test_sample_deterministic_mode_returns_mean():
    from exploresparse.policy import PolicyOutput

    mean = np.linspace(-1, 1, TINY.action_dim)
    out = PolicyOutput(action_mean=mean, action_log_std=np.zeros(TINY.action_dim), value=0.0)
    raw, logp = sample_action(out, np.random.default_rng(0), deterministic=True)
    assert np.array_equal(raw, mean)
    d = TINY.action_dim
    assert logp == pytest.approx(-d / 2 * math.log(2 * math.pi), abs=1e-12)


def test_log_prob_round_trip():
    from exploresparse.policy import PolicyOutput

    rng = np.random.default_rng(1)
    mean = rng.standard_normal(10)
    log_std = rng.uniform(-1, 0.5, 10)
    out = PolicyOutput(action_mean=mean, action_log_std=log_std, value=0.0)
    for _ in range(100):
        raw, logp = sample_action(out, rng)
        assert gaussian_log_prob(mean, log_std, raw) == pytest.approx(logp, abs=1e-12)


def test_sampling_statistics():
    from exploresparse.policy import PolicyOutput

    rng = np.random.default_rng(2)
    mean = np.array([0.3, -0.7, 1.1])
    log_std = np.array([0.0, -0.5, 0.2])
    out = PolicyOutput(action_mean=mean, action_log_std=log_std, value=0.0)
    n = 100_000
    draws = np.stack([sample_action(out, rng)[0] for _ in range(n)])
    se = np.exp(log_std) / math.sqrt(n)
    assert (np.abs(draws.mean(axis=0) - mean) < 3 * se).all()


def test_entropy_fixtures():
    assert gaussian_entropy(np.zeros(1)) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-12)
    log_std = np.random.default_rng(0).uniform(-1, 1, 7)
    assert gaussian_entropy(log_std + math.log(2)) - gaussian_entropy(log_std) == pytest.approx(
        7 * math.log(2), abs=1e-12
    )


# -- init / gradients / checkpoints -------------------------------------------


def test_init_params_seed_deterministic():
    a = init_params(TINY, 7)
    b = init_params(TINY, 7)
    c = init_params(TINY, 8)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


def test_critic_bias_gradient_linear_layer():
    model = init_params(TINY, 9)
    tokens = torch.as_tensor(_tokens(TINY)).unsqueeze(0)
    _, value, _, _ = model.forward(tokens)
    y = 0.7
    loss = 0.5 * (value[0] - y) ** 2
    loss.backward()
    final_bias = model.critic[-1].bias
    assert float(final_bias.grad[0]) == pytest.approx(float(value.detach()[0]) - y, abs=1e-6)


def test_checkpoint_round_trip(tmp_path):
    model = init_params(TINY, 10)
    path = tmp_path / "ckpt.pt"
    save_checkpoint(path, model, extra={"note": 1})
    loaded, payload = load_checkpoint(path, TINY)
    for pa, pb in zip(model.parameters(), loaded.parameters()):
        assert torch.equal(pa, pb)
    assert payload["extra"] == {"note": 1}


def test_checkpoint_hash_mismatch_refused(tmp_path):
    model = init_params(TINY, 11)
    path = tmp_path / "ckpt.pt"
    save_checkpoint(path, model)
    other = PolicyConfig(**{**TINY.__dict__, "layer_size": 32})
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, other)


def test_checkpoint_restores_double_precision(tmp_path):
    model = init_params(TINY, 12).double()
    path = tmp_path / "ckpt64.pt"
    save_checkpoint(path, model)
    loaded, _ = load_checkpoint(path)
    assert loaded.action_log_std.dtype == torch.float64

"""Gated Transformer-XL actor-critic over patch tokens.

Tokens are linearly embedded with learned positional embeddings, pass
through gated transformer layers with relative-position attention over an
episodic memory of past timesteps, and feed mean-pooled features to actor
and critic MLP heads. The actor parameterizes a diagonal Gaussian over the
raw GMM-parameter vector; decoding that vector to mixture parameters is
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .pruner import GmmAction


@dataclass
class PolicyConfig:
    env_size: int = 250
    channels: int = 4
    patch_size: int = 25
    n_layers: int = 3
    n_heads: int = 8
    head_size: int = 512
    pwff_size: int = 512
    layer_size: int = 1024
    memory_len: int = 400
    n_components: int = 8
    with_gates: bool = False  # noise variant: per-component activation gates
    actor_hidden: tuple[int, ...] = (6400, 1600, 512, 512, 512, 512)
    critic_hidden: tuple[int, ...] = (6400, 1600, 512, 512, 512, 512)
    gate_bias_init: float = 2.0
    action_log_std_init: float = -0.5
    sigma_min: float = 0.05
    std_scale: float = 1.0

    def validate(self) -> None:
        if self.env_size % self.patch_size:
            raise ValueError(
                f"env_size {self.env_size} not divisible by patch_size {self.patch_size}"
            )
        for name in ("n_layers", "n_heads", "head_size", "pwff_size", "layer_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.memory_len < 0:
            raise ValueError("memory_len must be >= 0")

    @property
    def tokens_per_side(self) -> int:
        return self.env_size // self.patch_size

    @property
    def n_tokens(self) -> int:
        return self.tokens_per_side ** 2

    @property
    def token_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size

    @property
    def action_dim(self) -> int:
        # per component: 1 weight + 2 mean + 2 std (+1 gate in the noise variant)
        per = 6 if self.with_gates else 5
        return self.n_components * per

    def scaled(self, factor: float) -> "PolicyConfig":
        """Shrink widths/memory by `factor`, preserving the layer structure."""

        def s(v: int) -> int:
            return max(1, int(round(v * factor)))

        return PolicyConfig(
            env_size=self.env_size,
            channels=self.channels,
            patch_size=self.patch_size,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            head_size=s(self.head_size),
            pwff_size=s(self.pwff_size),
            layer_size=s(self.layer_size),
            memory_len=max(0, int(round(self.memory_len * factor))),
            n_components=self.n_components,
            with_gates=self.with_gates,
            actor_hidden=tuple(s(v) for v in self.actor_hidden),
            critic_hidden=tuple(s(v) for v in self.critic_hidden),
            gate_bias_init=self.gate_bias_init,
            action_log_std_init=self.action_log_std_init,
            sigma_min=self.sigma_min,
            std_scale=self.std_scale,
        )

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class EpisodicMemory:
    """Per-layer cache of up to memory_len past token activations (one env).

    data is zero left-padded; `valid` counts the used slots at the right end.
    Cleared at episode boundaries; always detached from gradient history.
    """

    data: torch.Tensor  # (n_layers, memory_len, layer_size)
    valid: int = 0

    @classmethod
    def empty(cls, config: PolicyConfig, dtype=torch.float32) -> "EpisodicMemory":
        return cls(torch.zeros(config.n_layers, config.memory_len, config.layer_size, dtype=dtype))

    def clone(self) -> "EpisodicMemory":
        return EpisodicMemory(self.data.clone(), self.valid)


@dataclass
class PolicyOutput:
    action_mean: np.ndarray
    action_log_std: np.ndarray
    value: float
    new_memory: EpisodicMemory | None = None


class GruGate(nn.Module):
    """GRU-style gate; with a large bias the output stays near the residual input."""

    def __init__(self, d: int, bias_init: float):
        super().__init__()
        self.wr = nn.Linear(d, d, bias=False)
        self.ur = nn.Linear(d, d, bias=False)
        self.wz = nn.Linear(d, d, bias=False)
        self.uz = nn.Linear(d, d, bias=False)
        self.wg = nn.Linear(d, d, bias=False)
        self.ug = nn.Linear(d, d, bias=False)
        self.bias = nn.Parameter(torch.full((d,), float(bias_init)))

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        r = torch.sigmoid(self.wr(y) + self.ur(x))
        z = torch.sigmoid(self.wz(y) + self.uz(x) - self.bias)
        h = torch.tanh(self.wg(y) + self.ug(r * x))
        return (1.0 - z) * x + z * h


def sinusoidal_positions(distances: torch.Tensor, d: int, dtype, device) -> torch.Tensor:
    """Sinusoidal encodings for signed relative distances; (n, d)."""
    inv_freq = 1.0 / (10000 ** (torch.arange(0, d, 2, dtype=dtype, device=device) / d))
    ang = distances.to(dtype)[:, None] * inv_freq[None, :]
    enc = torch.zeros(len(distances), d, dtype=dtype, device=device)
    enc[:, 0::2] = torch.sin(ang)
    enc[:, 1::2] = torch.cos(ang[:, : enc[:, 1::2].shape[1]])
    return enc


class RelativeMultiheadAttention(nn.Module):
    """Multi-head attention with Transformer-XL style relative position terms.

    Queries come from the current segment; keys/values span the concatenated
    [memory, current] sequence. Full (non-causal) attention within the
    current segment; padded memory slots are masked out.
    """

    def __init__(self, d: int, n_heads: int, head_size: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_size = head_size
        inner = n_heads * head_size
        self.q_proj = nn.Linear(d, inner, bias=False)
        self.k_proj = nn.Linear(d, inner, bias=False)
        self.v_proj = nn.Linear(d, inner, bias=False)
        self.r_proj = nn.Linear(d, inner, bias=False)
        self.out_proj = nn.Linear(inner, d, bias=False)
        self.u_bias = nn.Parameter(torch.zeros(n_heads, head_size))
        self.v_bias = nn.Parameter(torch.zeros(n_heads, head_size))

    def forward(self, cur: torch.Tensor, mem: torch.Tensor | None, mem_valid: torch.Tensor | None) -> torch.Tensor:
        # cur: (B, T, d); mem: (B, M, d) or None; mem_valid: (B,) used slots
        b, t, d = cur.shape
        m = 0 if mem is None else mem.shape[1]
        seq = cur if mem is None else torch.cat([mem, cur], dim=1)  # (B, M+T, d)
        h, hs = self.n_heads, self.head_size
        q = self.q_proj(cur).view(b, t, h, hs)
        k = self.k_proj(seq).view(b, m + t, h, hs)
        v = self.v_proj(seq).view(b, m + t, h, hs)

        # signed relative distance of query i (global pos m+i) to key j: (m+i) - j
        dist = torch.arange(-(t - 1), m + t, device=cur.device)  # ascending unique values
        r = self.r_proj(sinusoidal_positions(dist, d, cur.dtype, cur.device))
        r = r.view(len(dist), h, hs)

        ac = torch.einsum("bihd,bjhd->bhij", q + self.u_bias, k)
        # score against every distance value, then gather per (i, j) pair
        s = torch.einsum("bihd,nhd->bhin", q + self.v_bias, r)  # (B, H, T, n_dist)
        i_idx = torch.arange(t, device=cur.device)[:, None]
        j_idx = torch.arange(m + t, device=cur.device)[None, :]
        gather_idx = (m + i_idx - j_idx) + (t - 1)  # index into ascending `dist`
        bd = s.gather(3, gather_idx.expand(b, h, t, m + t).contiguous())
        scores = (ac + bd) / math.sqrt(hs)

        if m > 0 and mem_valid is not None:
            pad = j_idx.expand(b, m + t) < (m - mem_valid[:, None])  # (B, M+T)
            scores = scores.masked_fill(pad[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = torch.einsum("bhij,bjhd->bihd", attn, v).reshape(b, t, h * hs)
        return self.out_proj(out)


class GtrxlBlock(nn.Module):
    def __init__(self, config: PolicyConfig):
        super().__init__()
        d = config.layer_size
        self.ln_attn = nn.LayerNorm(d)
        self.attn = RelativeMultiheadAttention(d, config.n_heads, config.head_size)
        self.gate_attn = GruGate(d, config.gate_bias_init)
        self.ln_ff = nn.LayerNorm(d)
        self.ff = nn.Sequential(
            nn.Linear(d, config.pwff_size), nn.ReLU(), nn.Linear(config.pwff_size, d)
        )
        self.gate_ff = GruGate(d, config.gate_bias_init)

    def forward(self, x: torch.Tensor, mem: torch.Tensor | None, mem_valid: torch.Tensor | None) -> torch.Tensor:
        mem_normed = None if mem is None else self.ln_attn(mem)
        y = torch.relu(self.attn(self.ln_attn(x), mem_normed, mem_valid))
        x = self.gate_attn(x, y)
        y = torch.relu(self.ff(self.ln_ff(x)))
        return self.gate_ff(x, y)


def _mlp(in_dim: int, hidden: tuple[int, ...], out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = in_dim
    for hdim in hidden:
        layers += [nn.Linear(prev, hdim), nn.ReLU()]
        prev = hdim
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class GtrxlPolicy(nn.Module):
    """Actor-critic transformer; forward is pure given (tokens, memory, params)."""

    def __init__(self, config: PolicyConfig):
        super().__init__()
        config.validate()
        self.config = config
        d = config.layer_size
        self.embed = nn.Linear(config.token_dim, d)
        self.pos_embed = nn.Parameter(torch.zeros(config.n_tokens, d))
        self.blocks = nn.ModuleList(GtrxlBlock(config) for _ in range(config.n_layers))
        self.ln_out = nn.LayerNorm(d)
        self.actor = _mlp(d, config.actor_hidden, config.action_dim)
        self.critic = _mlp(d, config.critic_hidden, 1)
        self.action_log_std = nn.Parameter(
            torch.full((config.action_dim,), float(config.action_log_std_init))
        )

    def forward(
        self,
        tokens: torch.Tensor,                 # (B, T, token_dim)
        memory: torch.Tensor | None = None,   # (n_layers, B, M, d)
        mem_valid: torch.Tensor | None = None,  # (B,)
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None, torch.Tensor | None]:
        """Returns (action_mean (B, A), value (B,), new_memory, new_valid)."""
        cfg = self.config
        if tokens.shape[1] != cfg.n_tokens or tokens.shape[2] != cfg.token_dim:
            raise ValueError(
                f"token shape {tuple(tokens.shape[1:])} does not match config "
                f"({cfg.n_tokens}, {cfg.token_dim})"
            )
        b = tokens.shape[0]
        use_mem = cfg.memory_len > 0 and memory is not None
        h = self.embed(tokens) + self.pos_embed
        new_layers = []
        for i, block in enumerate(self.blocks):
            if use_mem:
                mem_i = memory[i]
                # roll the cache: drop the oldest, append this segment's inputs
                new_layers.append(torch.cat([mem_i, h.detach()], dim=1)[:, -cfg.memory_len:])
                h = block(h, mem_i, mem_valid)
            else:
                h = block(h, None, None)
        pooled = self.ln_out(h).mean(dim=1)
        mean = self.actor(pooled)
        value = self.critic(pooled).squeeze(-1)
        if use_mem:
            new_memory = torch.stack(new_layers)
            new_valid = torch.clamp(mem_valid + cfg.n_tokens, max=cfg.memory_len)
            return mean, value, new_memory, new_valid
        return mean, value, None, None

    @torch.no_grad()
    def act(self, tokens_np: np.ndarray, memory: EpisodicMemory | None) -> PolicyOutput:
        """Single-environment convenience forward returning numpy outputs."""
        dtype = self.action_log_std.dtype
        tokens = torch.as_tensor(tokens_np, dtype=dtype).unsqueeze(0)
        if self.config.memory_len > 0 and memory is not None:
            mem = memory.data.unsqueeze(1)  # (L, 1, M, d)
            valid = torch.tensor([memory.valid])
            mean, value, new_mem, new_valid = self.forward(tokens, mem, valid)
            out_mem = EpisodicMemory(new_mem[:, 0].detach(), int(new_valid[0]))
        else:
            mean, value, _, _ = self.forward(tokens)
            out_mem = None
        return PolicyOutput(
            action_mean=mean[0].cpu().numpy(),
            action_log_std=self.action_log_std.detach().cpu().numpy().copy(),
            value=float(value[0]),
            new_memory=out_mem,
        )


def init_params(config: PolicyConfig, seed: int) -> GtrxlPolicy:
    """Seeded deterministic construction: same seed, same parameters."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = GtrxlPolicy(config)
        nn.init.normal_(model.pos_embed, std=0.02)
    return model


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def to_gmm(raw: np.ndarray, width: int, height: int, config: PolicyConfig) -> GmmAction:
    """Deterministic decode of a raw action vector into valid GMM parameters.

    Every finite raw vector decodes: weights via softmax, means squashed to
    map extents via tanh, stds via softplus plus sigma_min, gates (noise
    variant) via sigmoid thresholded at 0.5.
    """
    k = config.n_components
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (config.action_dim,):
        raise ValueError(f"raw action length {raw.shape} != {config.action_dim}")
    if not np.isfinite(raw).all():
        raise ValueError("raw action vector must be finite")
    weights = _softmax(raw[:k])
    mean_logits = raw[k:3 * k].reshape(k, 2)
    means = np.empty((k, 2))
    means[:, 0] = (np.tanh(mean_logits[:, 0]) + 1.0) / 2.0 * (width - 1)
    means[:, 1] = (np.tanh(mean_logits[:, 1]) + 1.0) / 2.0 * (height - 1)
    stds = config.sigma_min + _softplus(raw[3 * k:5 * k].reshape(k, 2)) * config.std_scale
    gates = None
    if config.with_gates:
        gates = raw[5 * k:6 * k] > 0.0  # sigmoid(x) > 0.5
    return GmmAction(weights=weights, means=means, stds=stds, gates=gates)


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, x: np.ndarray) -> float:
    """Exact joint log-density of a diagonal Gaussian."""
    var = np.exp(2.0 * log_std)
    return float(
        -0.5 * np.sum((x - mean) ** 2 / var) - np.sum(log_std) - 0.5 * len(mean) * math.log(2 * math.pi)
    )


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std) + 0.5 * len(log_std) * math.log(2 * math.pi * math.e))


def sample_action(
    output: PolicyOutput, rng: np.random.Generator, deterministic: bool = False
) -> tuple[np.ndarray, float]:
    """Draw raw ~ N(mean, exp(log_std)) (or the mean) and its exact log-prob."""
    if deterministic:
        raw = output.action_mean.copy()
    else:
        std = np.exp(output.action_log_std)
        raw = output.action_mean + std * rng.standard_normal(len(output.action_mean))
    return raw, gaussian_log_prob(output.action_mean, output.action_log_std, raw)


def save_checkpoint(path, model: GtrxlPolicy, optimizer=None, extra: dict | None = None) -> None:
    payload = {
        "config": asdict(model.config),
        "config_hash": model.config.hash(),
        "state_dict": model.state_dict(),
        "optimizer": None if optimizer is None else optimizer.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)


class CheckpointMismatchError(RuntimeError):
    pass


def load_checkpoint(path, config: PolicyConfig | None = None):
    """Load a checkpoint; refuses a config-hash mismatch when config is given.

    Returns (model, payload).
    """
    payload = torch.load(path, weights_only=False)
    stored = PolicyConfig(**payload["config"])
    if config is not None and config.hash() != payload["config_hash"]:
        raise CheckpointMismatchError(
            f"checkpoint config hash {payload['config_hash']} != expected {config.hash()}"
        )
    model = GtrxlPolicy(stored)
    dtype = next(iter(payload["state_dict"].values())).dtype
    if dtype == torch.float64:
        model.double()
    model.load_state_dict(payload["state_dict"])
    return model, payload

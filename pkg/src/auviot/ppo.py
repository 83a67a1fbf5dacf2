"""Centralized actor-critic PPO, implemented from scratch on numpy.

A shared two-hidden-layer tanh trunk feeds 4*N categorical action heads
(heading, speed, WET node, DATA node per AUV) and a scalar value head.
Gradients of the clipped-surrogate objective are backpropagated by hand,
which keeps the whole update loop dependency-free and bit-reproducible
under a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codec import ActionIndices, CodecSpec, action_space_size, schema_hash
from .dynamics import ALL_DOCKED, HORIZON

CHECKPOINT_VERSION = 1


@dataclass
class PpoConfig:
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    epochs_per_update: int = 4
    minibatch_size: int = 64
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    grad_clip_norm: float = 0.5
    total_env_steps: int = 100_000
    episodes_per_update: int = 16
    hidden_width: int = 128
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        for name in ("gamma", "gae_lambda"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {val}")
        for name in ("learning_rate", "minibatch_size", "epochs_per_update",
                     "episodes_per_update", "hidden_width", "total_env_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(eq=False)
class NetworkParams:
    """Weights of the shared trunk, the categorical heads, and the value head.

    Shapes: w1 (obs_dim, h), b1 (h,), w2 (h, h), b2 (h,),
    head_w[i] (h, head_sizes[i]), head_b[i] (head_sizes[i],),
    vw (h,), vb scalar.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    head_w: list
    head_b: list
    vw: np.ndarray
    vb: float

    @property
    def head_sizes(self) -> list:
        return [w.shape[1] for w in self.head_w]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            head_w=[w.copy() for w in self.head_w],
            head_b=[b.copy() for b in self.head_b],
            vw=self.vw.copy(), vb=float(self.vb))


class NonFiniteLossError(RuntimeError):
    """Raised when an update produces a non-finite loss; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}; diagnostics: {diagnostics}")
        self.diagnostics = diagnostics


def _orthogonal(rows: int, cols: int, gain: float, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(obs_dim: int, head_sizes, hidden: int,
                rng: np.random.Generator) -> NetworkParams:
    """Orthogonal initialization; head projections get a small gain so the
    initial policy is near uniform."""
    return NetworkParams(
        w1=_orthogonal(obs_dim, hidden, 1.0, rng),
        b1=np.zeros(hidden),
        w2=_orthogonal(hidden, hidden, 1.0, rng),
        b2=np.zeros(hidden),
        head_w=[_orthogonal(hidden, s, 0.01, rng) for s in head_sizes],
        head_b=[np.zeros(s) for s in head_sizes],
        vw=_orthogonal(hidden, 1, 1.0, rng)[:, 0],
        vb=0.0)


def flatten_params(params: NetworkParams) -> np.ndarray:
    parts = [params.w1.ravel(), params.b1, params.w2.ravel(), params.b2]
    for w, b in zip(params.head_w, params.head_b):
        parts.extend([w.ravel(), b])
    parts.extend([params.vw, np.array([params.vb])])
    return np.concatenate(parts)


def unflatten_params(flat: np.ndarray, like: NetworkParams) -> NetworkParams:
    out = like.copy()
    i = 0

    def take(shape):
        nonlocal i
        size = int(np.prod(shape))
        chunk = flat[i:i + size].reshape(shape)
        i += size
        return chunk.copy()

    out.w1 = take(like.w1.shape)
    out.b1 = take(like.b1.shape)
    out.w2 = take(like.w2.shape)
    out.b2 = take(like.b2.shape)
    head_w, head_b = [], []
    for w, b in zip(like.head_w, like.head_b):
        head_w.append(take(w.shape))
        head_b.append(take(b.shape))
    out.head_w = head_w
    out.head_b = head_b
    out.vw = take(like.vw.shape)
    out.vb = float(flat[i])
    i += 1
    if i != flat.size:
        raise ValueError(f"flat vector has {flat.size} entries, expected {i}")
    return out


def forward(params: NetworkParams, obs: np.ndarray):
    """Evaluate the network. 1-D input gives per-head logit vectors and a
    scalar value; 2-D input (batch, obs_dim) gives batched outputs."""
    single = obs.ndim == 1
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(f"obs dim {x.shape[1]} != network input {params.w1.shape[0]}")
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    logits = [h2 @ w + b for w, b in zip(params.head_w, params.head_b)]
    value = h2 @ params.vw + params.vb
    if single:
        return [z[0] for z in logits], float(value[0])
    return logits, value


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def head_log_probs(logits) -> list:
    return [_log_softmax(np.asarray(z, dtype=np.float64)) for z in logits]


def sample_action(logits, rng: np.random.Generator, n_auvs: int):
    """Sample each categorical head independently.

    `logits` holds 4*n_auvs per-head vectors ordered (theta, v, wet, data)
    per AUV. Returns the per-AUV ActionIndices (node heads converted to
    1-based selections) and the per-head log-probabilities of the draw.
    """
    if len(logits) != 4 * n_auvs:
        raise ValueError(f"expected {4 * n_auvs} heads, got {len(logits)}")
    raw = []
    logps = []
    for z in logits:
        logp = _log_softmax(np.asarray(z, dtype=np.float64))
        p = np.exp(logp)
        p = p / p.sum()
        idx = int(rng.choice(len(p), p=p))
        raw.append(idx)
        logps.append(logp[idx])
    actions = [ActionIndices(theta_idx=raw[4 * i], v_idx=raw[4 * i + 1],
                             wet_node=raw[4 * i + 2] + 1,
                             data_node=raw[4 * i + 3] + 1)
               for i in range(n_auvs)]
    return actions, np.array(logps)


def greedy_head_indices(logits) -> list:
    return [int(np.argmax(z)) for z in logits]


def compute_gae(rewards, values, dones, gamma: float, lam: float,
                bootstrap_value: float = 0.0):
    """GAE(gamma, lam) over a rollout.

    `dones[t]` marks hard terminals (no value beyond); a trailing truncated
    segment bootstraps from `bootstrap_value`. Returns raw (unnormalized)
    advantages and the matching returns; normalization happens per update
    batch inside ppo_update.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    t_len = len(rewards)
    if not (len(values) == len(dones) == t_len):
        raise ValueError("rewards, values, dones must have equal length")
    adv = np.zeros(t_len)
    next_value = float(bootstrap_value)
    next_adv = 0.0
    for t in range(t_len - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        adv[t] = delta + gamma * lam * nonterminal * next_adv
        next_adv = adv[t]
        next_value = values[t]
    return adv, adv + values


@dataclass(eq=False)
class RolloutBuffer:
    """Flat storage for one update's worth of transitions.

    Actions and log-probs are stored per head (0-based head indices);
    advantages/returns are filled per episode during collection and the
    buffer is discarded after the policy update that consumed it.
    """

    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)     # (4N,) int per step
    logps: list = field(default_factory=list)       # (4N,) float per step
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    advantages: list = field(default_factory=list)
    returns: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.obs)

    def arrays(self) -> dict:
        return {
            "obs": np.asarray(self.obs, dtype=np.float64),
            "actions": np.asarray(self.actions, dtype=np.int64),
            "logps": np.asarray(self.logps, dtype=np.float64),
            "values": np.asarray(self.values, dtype=np.float64),
            "rewards": np.asarray(self.rewards, dtype=np.float64),
            "dones": np.asarray(self.dones, dtype=bool),
            "advantages": np.asarray(self.advantages, dtype=np.float64),
            "returns": np.asarray(self.returns, dtype=np.float64),
        }


def ppo_loss_and_grad(params: NetworkParams, obs, actions, old_logp_sum,
                      advantages, returns, config: PpoConfig):
    """One minibatch of the clipped PPO loss and its analytic gradient.

    Returns (loss, grad NetworkParams, diagnostics dict). The gradient is
    exact for the sampled minimum branch of the clipped surrogate.
    """
    x = np.asarray(obs, dtype=np.float64)
    batch = x.shape[0]
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    value = h2 @ params.vw + params.vb

    n_heads = len(params.head_w)
    logp_sum = np.zeros(batch)
    probs = []
    logprobs = []
    entropies = []
    for i in range(n_heads):
        z = h2 @ params.head_w[i] + params.head_b[i]
        logp = _log_softmax(z)
        p = np.exp(logp)
        logp_sum += logp[np.arange(batch), actions[:, i]]
        probs.append(p)
        logprobs.append(logp)
        entropies.append(-(p * logp).sum(axis=1))
    entropy = np.sum(entropies, axis=0)

    ratio = np.exp(logp_sum - old_logp_sum)
    clipped = np.clip(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    policy_loss = -np.minimum(surr1, surr2).mean()
    value_err = value - returns
    value_loss = np.mean(value_err ** 2)
    entropy_mean = entropy.mean()
    loss = (policy_loss + config.value_coef * value_loss
            - config.entropy_coef * entropy_mean)

    diagnostics = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy_mean),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > config.clip_eps)),
        "approx_kl": float(np.mean((ratio - 1.0) - np.log(ratio))),
    }
    if not np.isfinite(loss):
        raise NonFiniteLossError("non-finite PPO loss", diagnostics)

    # backward pass
    unclipped_active = (surr1 <= surr2)
    d_logp_sum = np.where(unclipped_active, -advantages * ratio, 0.0) / batch
    d_value = config.value_coef * 2.0 * value_err / batch

    d_h2 = np.outer(d_value, params.vw)
    g_head_w = []
    g_head_b = []
    for i in range(n_heads):
        p = probs[i]
        onehot = np.zeros_like(p)
        onehot[np.arange(batch), actions[:, i]] = 1.0
        d_z = d_logp_sum[:, None] * (onehot - p)
        # entropy term: dH/dz = -p * (logp + H_head)
        h_head = entropies[i]
        d_z += (config.entropy_coef / batch) * p * (logprobs[i] + h_head[:, None])
        g_head_w.append(h2.T @ d_z)
        g_head_b.append(d_z.sum(axis=0))
        d_h2 += d_z @ params.head_w[i].T
    g_vw = h2.T @ d_value
    g_vb = float(d_value.sum())

    d_a2 = d_h2 * (1.0 - h2 ** 2)
    g_w2 = h1.T @ d_a2
    g_b2 = d_a2.sum(axis=0)
    d_h1 = d_a2 @ params.w2.T
    d_a1 = d_h1 * (1.0 - h1 ** 2)
    g_w1 = x.T @ d_a1
    g_b1 = d_a1.sum(axis=0)

    grad = NetworkParams(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2,
                         head_w=g_head_w, head_b=g_head_b, vw=g_vw, vb=g_vb)
    return float(loss), grad, diagnostics


@dataclass(eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), step=0)


def adam_update(flat_params: np.ndarray, flat_grad: np.ndarray, state: AdamState,
                lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> np.ndarray:
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * flat_grad
    state.v = beta2 * state.v + (1.0 - beta2) * flat_grad ** 2
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    return flat_params - lr * m_hat / (np.sqrt(v_hat) + eps)


def ppo_update(params: NetworkParams, buffer: RolloutBuffer, config: PpoConfig,
               adam: AdamState | None = None,
               rng: np.random.Generator | None = None):
    """Run epochs_per_update shuffled-minibatch passes over the buffer.

    Returns (new params, adam state, diagnostics averaged over minibatches).
    """
    if len(buffer) == 0:
        raise ValueError("buffer is empty")
    data = buffer.arrays()
    adv = data["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    old_logp_sum = data["logps"].sum(axis=1)
    if rng is None:
        rng = np.random.default_rng(config.seed)

    flat = flatten_params(params)
    if adam is None:
        adam = AdamState.zeros(flat.size)
    current = params.copy()
    agg: dict = {}
    n_batches = 0
    n = len(buffer)
    for _ in range(config.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            sel = order[start:start + config.minibatch_size]
            _, grad, diag = ppo_loss_and_grad(
                current, data["obs"][sel], data["actions"][sel],
                old_logp_sum[sel], adv[sel], data["returns"][sel], config)
            flat_grad = flatten_params(grad)
            norm = float(np.linalg.norm(flat_grad))
            if config.grad_clip_norm > 0 and norm > config.grad_clip_norm:
                flat_grad *= config.grad_clip_norm / norm
            flat = adam_update(flat, flat_grad, adam, config.learning_rate)
            current = unflatten_params(flat, current)
            for key, val in diag.items():
                agg[key] = agg.get(key, 0.0) + val
            n_batches += 1
    diagnostics = {key: val / n_batches for key, val in agg.items()}
    return current, adam, diagnostics


def collect_rollouts(env, params: NetworkParams, config: PpoConfig,
                     n_episodes: int, rng_env: np.random.Generator,
                     rng_sample: np.random.Generator, n_auvs: int):
    """Play n_episodes full episodes and return (buffer, per-episode rewards)."""
    buffer = RolloutBuffer()
    episode_rewards = []
    for _ in range(n_episodes):
        state, obs = env.reset(rng_env)
        ep_rewards, ep_values, ep_dones = [], [], []
        total = 0.0
        done = False
        reason = None
        while not done:
            logits, value = forward(params, obs)
            action_list, logps = sample_action(logits, rng_sample, n_auvs)
            raw = []
            for a in action_list:
                raw.extend([a.theta_idx, a.v_idx, a.wet_node - 1, a.data_node - 1])
            outcome, next_obs = env.step(state, action_list)
            buffer.obs.append(obs)
            buffer.actions.append(raw)
            buffer.logps.append(logps)
            buffer.values.append(value)
            buffer.rewards.append(outcome.reward)
            ep_rewards.append(outcome.reward)
            ep_values.append(value)
            total += outcome.reward
            done = outcome.done
            reason = outcome.done_reason
            ep_dones.append(done and reason == ALL_DOCKED)
            state, obs = outcome.next, next_obs
        # horizon truncation bootstraps with the critic; docking terminals with 0
        if reason == HORIZON:
            _, bootstrap = forward(params, obs)
        else:
            bootstrap = 0.0
        buffer.dones.extend(ep_dones)
        adv, ret = compute_gae(ep_rewards, ep_values, ep_dones,
                               config.gamma, config.gae_lambda, bootstrap)
        buffer.advantages.extend(adv)
        buffer.returns.extend(ret)
        episode_rewards.append(total)
    return buffer, episode_rewards


def train(env_factory, config: PpoConfig, codec_spec: CodecSpec):
    """Alternate rollout collection and PPO updates until total_env_steps.

    Returns (trained params, learning-curve rows). Fully reproducible under
    a fixed config.seed: rollouts, minibatch order, and final parameters are
    all derived from one seed sequence.
    """
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    rng_init = np.random.default_rng(seeds[0])
    rng_env = np.random.default_rng(seeds[1])
    rng_sample = np.random.default_rng(seeds[2])
    rng_shuffle = np.random.default_rng(seeds[3])

    env = env_factory()
    params = init_params(codec_spec.obs_dim, action_space_size(codec_spec),
                         config.hidden_width, rng_init)
    adam = AdamState.zeros(flatten_params(params).size)
    curves = []
    steps = 0
    update_idx = 0
    while steps < config.total_env_steps:
        buffer, ep_rewards = collect_rollouts(
            env, params, config, config.episodes_per_update,
            rng_env, rng_sample, codec_spec.n_auvs)
        steps += len(buffer)
        params, adam, diag = ppo_update(params, buffer, config, adam, rng_shuffle)
        update_idx += 1
        curves.append({
            "update": update_idx,
            "env_steps": steps,
            "mean_episode_reward": float(np.mean(ep_rewards)),
            **diag,
        })
    return params, curves


def save_checkpoint(path, params: NetworkParams, config: PpoConfig,
                    codec_spec: CodecSpec) -> None:
    """Write a versioned npz checkpoint with the codec schema hash baked in."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "schema_hash": schema_hash(codec_spec),
        "codec": {
            "n_auvs": codec_spec.n_auvs, "n_nodes": codec_spec.n_nodes,
            "k_theta": codec_spec.k_theta, "k_v": codec_spec.k_v,
        },
        "config": {k: getattr(config, k) for k in PpoConfig.__dataclass_fields__},
        "n_heads": len(params.head_w),
    }
    arrays = {"w1": params.w1, "b1": params.b1, "w2": params.w2, "b2": params.b2,
              "vw": params.vw, "vb": np.array([params.vb])}
    for i, (w, b) in enumerate(zip(params.head_w, params.head_b)):
        arrays[f"head_w_{i}"] = w
        arrays[f"head_b_{i}"] = b
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Read a checkpoint; returns (params, meta dict)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        n_heads = meta["n_heads"]
        params = NetworkParams(
            w1=data["w1"], b1=data["b1"], w2=data["w2"], b2=data["b2"],
            head_w=[data[f"head_w_{i}"] for i in range(n_heads)],
            head_b=[data[f"head_b_{i}"] for i in range(n_heads)],
            vw=data["vw"], vb=float(data["vb"][0]))
    return params, meta

"""Architecture-generating policy: one categorical decision per edge slot
(absent/present) and per middle-node slot (which real op), trained with
REINFORCE plus an exact entropy bonus.

Every sample fills all max_nodes slots; draws that fail validation are
rejected and redrawn, and log-probs are NOT renormalized over the valid set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import IN, OUT, Architecture, SpaceSpec, edge_pairs, validate
from .tensor import Tensor

REJECT_BUDGET = 10 ** 4


@dataclass
class PolicyParams:
    spec: SpaceSpec
    edge_logits: Tensor  # (E, 2), class 1 = edge present
    op_logits: Tensor    # (max_nodes - 2, |real ops|)

    def tensors(self) -> list[Tensor]:
        return [self.edge_logits, self.op_logits]


@dataclass
class SampleTrace:
    arch: Architecture
    log_prob: float
    edge_bits: tuple[int, ...]
    op_choices: tuple[int, ...]


def init_policy(spec: SpaceSpec) -> PolicyParams:
    """Zero logits: every decision starts uniform."""
    n_edges = len(edge_pairs(spec.max_nodes))
    n_mid = spec.max_nodes - 2
    return PolicyParams(
        spec=spec,
        edge_logits=Tensor(np.zeros((n_edges, 2)), requires_grad=True),
        op_logits=Tensor(np.zeros((n_mid, len(spec.real_ops))), requires_grad=True),
    )


def _log_softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _build_arch(spec: SpaceSpec, edge_bits: np.ndarray,
                op_choices: np.ndarray) -> Architecture:
    n = spec.max_nodes
    adj = [[0] * n for _ in range(n)]
    for k, (i, j) in enumerate(edge_pairs(n)):
        if edge_bits[k]:
            adj[i][j] = 1
    mids = tuple(spec.real_ops[int(c)] for c in op_choices)
    return Architecture(n=n, ops=(IN, *mids, OUT),
                        adj=tuple(tuple(row) for row in adj))


def _trace_log_prob(policy: PolicyParams, edge_bits: np.ndarray,
                    op_choices: np.ndarray) -> float:
    lp_e = _log_softmax_np(policy.edge_logits.data)
    lp_o = _log_softmax_np(policy.op_logits.data)
    total = lp_e[np.arange(len(edge_bits)), edge_bits].sum()
    if len(op_choices):
        total += lp_o[np.arange(len(op_choices)), op_choices].sum()
    return float(total)


def sample(policy: PolicyParams, spec: SpaceSpec, rng: np.random.Generator,
           retries: int = REJECT_BUDGET) -> SampleTrace:
    """Draw decisions from per-slot softmaxes; reject invalid architectures."""
    p_edge = np.exp(_log_softmax_np(policy.edge_logits.data))[:, 1]
    cdf_op = np.cumsum(np.exp(_log_softmax_np(policy.op_logits.data)), axis=1)
    n_mid = policy.op_logits.data.shape[0]
    for _ in range(retries):
        edge_bits = (rng.random(p_edge.size) < p_edge).astype(np.int64)
        u = rng.random(n_mid)
        op_choices = (u[:, None] > cdf_op).sum(axis=1).astype(np.int64)
        # float cumsum can undershoot 1.0; clamp the tail draw into range
        np.minimum(op_choices, cdf_op.shape[1] - 1, out=op_choices)
        arch = _build_arch(spec, edge_bits, op_choices)
        if not validate(arch, spec):
            return SampleTrace(
                arch=arch,
                log_prob=_trace_log_prob(policy, edge_bits, op_choices),
                edge_bits=tuple(int(b) for b in edge_bits),
                op_choices=tuple(int(c) for c in op_choices),
            )
    raise RuntimeError(f"no valid sample in {retries} draws")


def log_prob(policy: PolicyParams, trace: SampleTrace) -> float:
    """Log-probability of a trace under the current policy."""
    n_edges = policy.edge_logits.data.shape[0]
    n_mid, n_ops = policy.op_logits.data.shape
    bits = np.asarray(trace.edge_bits, dtype=np.int64)
    chosen = np.asarray(trace.op_choices, dtype=np.int64)
    if bits.shape != (n_edges,) or not np.isin(bits, (0, 1)).all():
        raise ValueError("trace edge decisions do not fit this policy")
    if chosen.shape != (n_mid,) or (len(chosen) and (chosen < 0).any()) \
            or (len(chosen) and (chosen >= n_ops).any()):
        raise ValueError("trace op decisions do not fit this policy")
    return _trace_log_prob(policy, bits, chosen)


def entropy(policy: PolicyParams) -> float:
    """Exact policy entropy: sum of per-slot categorical entropies."""
    total = 0.0
    for logits in (policy.edge_logits.data, policy.op_logits.data):
        lp = _log_softmax_np(logits)
        total -= float((np.exp(lp) * lp).sum())
    return total


def _one_hot(indices: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(indices.shape + (k,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def reinforce_update(policy: PolicyParams, traces: list[SampleTrace],
                     rewards: list[float] | np.ndarray, lr: float,
                     entropy_weight: float = 0.0,
                     baseline: float | None = None) -> PolicyParams:
    """One ascent step on (1/N) sum_j log pi(alpha_j) * reward_j plus the
    entropy bonus. Plain gradient ascent with step size lr."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if len(traces) != rewards.size:
        raise ValueError("traces/rewards length mismatch")
    if rewards.size == 0:
        raise ValueError("need at least one trace")
    adv = rewards - baseline if baseline is not None else rewards

    bits = np.stack([np.asarray(t.edge_bits, dtype=np.int64) for t in traces])
    ops = np.stack([np.asarray(t.op_choices, dtype=np.int64) for t in traces])
    edge_mask = _one_hot(bits, 2)                                # (N, E, 2)
    op_mask = _one_hot(ops, policy.op_logits.data.shape[1])      # (N, S, k)

    lp_e = policy.edge_logits.log_softmax()
    lp_o = policy.op_logits.log_softmax()
    per_sample = (lp_e * edge_mask).sum(axis=(1, 2)) \
        + (lp_o * op_mask).sum(axis=(1, 2))                      # (N,)
    objective = (per_sample * adv).sum() * (1.0 / rewards.size)
    if entropy_weight:
        ent = -((lp_e.exp() * lp_e).sum() + (lp_o.exp() * lp_o).sum())
        objective = objective + entropy_weight * ent

    loss = -objective
    loss.backward()
    for t in policy.tensors():
        if t.grad is not None:
            t.data -= lr * t.grad
            t.grad = None
    return policy


def policy_to_json(policy: PolicyParams) -> dict:
    return {"edge_logits": policy.edge_logits.data.tolist(),
            "op_logits": policy.op_logits.data.tolist()}

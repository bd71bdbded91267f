"""Search orchestration: alternate comparator training, policy-gradient
steps rewarded by comparisons against a baseline architecture, confidence-
filtered pseudo-labeling of sampled pairs, and curriculum baseline updates.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .controller import PolicyParams, init_policy, reinforce_update, sample
from .nac import (ArchCodec, LabeledPair, NacComparator, NacConfig, NacParams,
                  build_pairs, init_nac, train_nac)
from .optim import init_adam
from .oracle import OracleComparator
from .space import Architecture, SpaceSpec, arch_key
from .util import canonical_json


@dataclass
class SearchConfig:
    M: int = 423              # labeled architecture budget
    N: int = 1                # policy samples per step
    K: int = 256              # pseudo pairs kept per round
    T: int = 10_000           # total controller steps
    update_every: int = 1000  # steps per outer round (baseline + NAC refresh)
    nac_iters: int = 200      # comparator training iterations per round
    eta: float = 0.1          # policy step size
    r: float = 0.5            # per-batch pseudo proportion
    entropy_weight: float = 5e-4
    nac_batch: int = 256
    pseudo_pool: int = 512    # ordered-pair pool size fed to exploration
    d: int = 32
    lr: float = 2e-4
    weight_decay: float = 5e-4
    seed: int = 0
    comparator: str = "nac"   # "oracle" substitutes the perfect comparator
    baseline_scheme: str = "curriculum"  # or "fixed" | "random"
    augment: bool = True
    h_cap: int = 64           # recent distinct candidates scored per update
    pseudo_keep_rounds: int = 10  # ring buffer holds this many rounds of K

    def to_json(self) -> dict:
        return asdict(self)


def validate_config(cfg: SearchConfig) -> list[str]:
    bad = []
    if cfg.M < 2:
        bad.append("M must be >= 2")
    if cfg.N < 1:
        bad.append("N must be >= 1")
    if cfg.K < 1:
        bad.append("K must be >= 1")
    if cfg.T < 1:
        bad.append("T must be >= 1")
    if cfg.update_every < 1:
        bad.append("update_every must be >= 1")
    if cfg.nac_iters < 0:
        bad.append("nac_iters must be >= 0")
    if not (0.0 <= cfg.r < 1.0):
        bad.append("r must be in [0, 1)")
    if cfg.eta <= 0:
        bad.append("eta must be positive")
    if cfg.nac_batch < 1:
        bad.append("nac_batch must be >= 1")
    if cfg.pseudo_pool < 2:
        bad.append("pseudo_pool must be >= 2")
    if cfg.d < 1:
        bad.append("d must be >= 1")
    if cfg.comparator not in ("nac", "oracle"):
        bad.append(f"unknown comparator {cfg.comparator!r}")
    if cfg.baseline_scheme not in ("curriculum", "fixed", "random"):
        bad.append(f"unknown baseline_scheme {cfg.baseline_scheme!r}")
    return bad


@dataclass
class SearchState:
    gt_pairs: list[LabeledPair]
    pseudo: deque
    baseline_history: list[Architecture]
    beta: Architecture
    t: int = 0
    reward_trace: list[float] = field(default_factory=list)


class SearchError(RuntimeError):
    """Engine failure carrying a state snapshot for post-mortems."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


def pool_arch_count(pool_pairs: int) -> int:
    """Smallest s with s(s-1) >= pool_pairs (ordered distinct pairs)."""
    s = max(2, math.ceil((1.0 + math.sqrt(1.0 + 4.0 * pool_pairs)) / 2.0))
    while (s - 1) * (s - 2) >= pool_pairs:
        s -= 1
    return s


def bootstrap(config: SearchConfig, spec: SpaceSpec, oracle,
              rng: np.random.Generator,
              policy: PolicyParams | None = None):
    """Labeled records, their full pair set, and the initial baseline
    (sampled from the fresh policy)."""
    archs = oracle.sample_archs(config.M, rng)
    records = [(a, oracle.mean_acc(a)) for a in archs]
    pairs = build_pairs(records, augment=config.augment)
    policy = policy or init_policy(spec)
    beta = sample(policy, spec, rng).arch
    return records, pairs, beta


def explore_data(sampled: list[Architecture], cmp, K: int) -> list[LabeledPair]:
    """Pseudo-label all ordered distinct pairs of the sampled set and keep
    the K the comparator is most confident about (|p - 0.5|, stable order)."""
    if len(sampled) < 2:
        raise ValueError("need at least 2 sampled architectures")
    keys = [arch_key(a) for a in sampled]
    if len(set(keys)) != len(keys):
        raise ValueError("sampled architectures must be distinct")
    pairs = [(a, b) for i, a in enumerate(sampled)
             for j, b in enumerate(sampled) if i != j]
    probs = np.asarray(cmp.many(pairs), dtype=np.float64)
    if K > len(pairs):
        warnings.warn(f"requested {K} pseudo pairs, pool has {len(pairs)}")
        K = len(pairs)
    conf = np.abs(probs - 0.5)
    order = np.argsort(-conf, kind="stable")[:K]
    return [LabeledPair(a=pairs[int(i)][0], b=pairs[int(i)][1],
                        y=int(probs[int(i)] >= 0.5), source="pseudo")
            for i in order]


def update_baseline(baselines: list[Architecture], sampled: list[Architecture],
                    cmp) -> Architecture:
    """Argmax of mean comparison score over the deduplicated candidate set;
    the earliest listed candidate wins ties. Singleton sets pass through."""
    cands: list[Architecture] = []
    seen: set[str] = set()
    for a in list(baselines) + list(sampled):
        k = arch_key(a)
        if k not in seen:
            seen.add(k)
            cands.append(a)
    if not cands:
        raise ValueError("no candidates to score")
    if len(cands) == 1:
        return cands[0]
    pairs = [(a, b) for i, a in enumerate(cands)
             for j, b in enumerate(cands) if i != j]
    probs = np.asarray(cmp.many(pairs), dtype=np.float64)
    scores = probs.reshape(len(cands), len(cands) - 1).mean(axis=1)
    return cands[int(np.argmax(scores))]


def _recent_distinct(archs: list[Architecture], cap: int,
                     exclude: set[str]) -> list[Architecture]:
    out: list[Architecture] = []
    seen = set(exclude)
    for a in reversed(archs):
        k = arch_key(a)
        if k not in seen:
            seen.add(k)
            out.append(a)
            if len(out) == cap:
                break
    return out


def _sample_distinct(policy: PolicyParams, spec: SpaceSpec,
                     rng: np.random.Generator, count: int) -> list[Architecture]:
    """Up to `count` distinct-key policy samples (small spaces may give fewer)."""
    out: list[Architecture] = []
    seen: set[str] = set()
    for _ in range(50 * count):
        arch = sample(policy, spec, rng).arch
        k = arch_key(arch)
        if k not in seen:
            seen.add(k)
            out.append(arch)
            if len(out) == count:
                break
    return out


def _true_acc(oracle, arch: Architecture) -> float | None:
    try:
        return oracle.mean_acc(arch)
    except KeyError:
        return None


def run_search(config: SearchConfig, spec: SpaceSpec, oracle,
               rng: np.random.Generator | None = None) -> dict:
    """Full search: returns the report as a plain JSON-ready dict."""
    bad = validate_config(config)
    if bad:
        raise ValueError("bad config: " + "; ".join(bad))
    rng = rng if rng is not None else np.random.default_rng(config.seed)

    policy = init_policy(spec)
    nac_cfg = NacConfig(d=config.d)
    nac_params = init_nac(spec, rng, nac_cfg)
    adam = init_adam(nac_params.tensors(), lr=config.lr,
                     weight_decay=config.weight_decay)
    codec = ArchCodec(spec, nac_cfg)
    if config.comparator == "oracle":
        cmp = OracleComparator(oracle)
    else:
        cmp = NacComparator(nac_params, codec)

    records, gt_pairs, beta = bootstrap(config, spec, oracle, rng, policy)
    state = SearchState(
        gt_pairs=gt_pairs,
        pseudo=deque(maxlen=config.pseudo_keep_rounds * config.K),
        baseline_history=[],
        beta=beta,
    )
    sampled_log: dict[str, Architecture] = {arch_key(beta): beta}
    rounds: list[dict] = []
    baseline_accs = [_true_acc(oracle, beta)]
    n_rounds = math.ceil(config.T / config.update_every)

    def snapshot() -> dict:
        return {
            "t": state.t,
            "round": len(rounds) + 1,
            "baseline_key": arch_key(state.beta),
            "baseline_history": [arch_key(a) for a in state.baseline_history],
            "gt_pairs": len(state.gt_pairs),
            "pseudo_pairs": len(state.pseudo),
        }

    for rnd in range(1, n_rounds + 1):
        try:
            # refresh the comparator on ground truth + recent pseudo pairs
            round_loss = None
            if config.comparator == "nac" and config.nac_iters > 0:
                _, losses = train_nac(
                    state.gt_pairs, nac_params, adam, config.nac_batch,
                    config.nac_iters, rng, pseudo_pairs=list(state.pseudo),
                    pseudo_fraction=config.r, codec=codec)
                round_loss = float(np.mean(losses))

            # policy-gradient steps against the current baseline
            steps = min(config.update_every, config.T - state.t)
            reward_sum = 0.0
            for _ in range(steps):
                traces = [sample(policy, spec, rng) for _ in range(config.N)]
                rewards = cmp.many([(tr.arch, state.beta) for tr in traces])
                reinforce_update(policy, traces, rewards, config.eta,
                                 config.entropy_weight)
                for tr in traces:
                    sampled_log.setdefault(arch_key(tr.arch), tr.arch)
                step_reward = float(np.mean(rewards))
                state.reward_trace.append(step_reward)
                reward_sum += step_reward
            state.t += steps

            # explore: pseudo-label the most confident sampled pairs
            pool = _sample_distinct(policy, spec, rng,
                                    pool_arch_count(config.pseudo_pool))
            for a in pool:
                sampled_log.setdefault(arch_key(a), a)
            if len(pool) >= 2:
                state.pseudo.extend(explore_data(pool, cmp, config.K))

            if any(p.source != "ground_truth" for p in state.gt_pairs) or \
                    any(p.source != "pseudo" for p in state.pseudo):
                raise RuntimeError("pair source audit failed")

            # baseline update over the capped candidate history
            state.baseline_history.append(state.beta)
            beta_key = arch_key(state.beta)
            cands = [state.beta] + _recent_distinct(
                state.baseline_history + pool, config.h_cap, {beta_key})
            if config.baseline_scheme == "curriculum":
                state.beta = update_baseline(cands, [], cmp)
            elif config.baseline_scheme == "random":
                state.beta = cands[int(rng.integers(0, len(cands)))]
            # "fixed" keeps the bootstrap baseline

            baseline_accs.append(_true_acc(oracle, state.beta))
            rounds.append({
                "round": rnd,
                "baseline_key": arch_key(state.beta),
                "baseline_acc": baseline_accs[-1],
                "mean_reward": reward_sum / steps if steps else None,
                "nac_loss": round_loss,
            })
        except SearchError:
            raise
        except Exception as e:
            raise SearchError(f"round {rnd} failed: {e}", snapshot()) from e

    best_key, best_acc = None, None
    for key, arch in sampled_log.items():
        acc = _true_acc(oracle, arch)
        if acc is not None and (best_acc is None or acc > best_acc):
            best_key, best_acc = key, acc

    final_acc = _true_acc(oracle, state.beta)
    return {
        "config": {"search": config.to_json(), "space": spec.to_json()},
        "bootstrap": {
            "labeled": len(records),
            "pairs": len(gt_pairs),
            "initial_baseline": {"arch_key": arch_key(beta),
                                 "true_acc": baseline_accs[0]},
        },
        "rounds": rounds,
        "final": {"arch": state.beta.to_json(),
                  "arch_key": arch_key(state.beta),
                  "true_acc": final_acc},
        "best_sampled": {
            "arch": sampled_log[best_key].to_json() if best_key else None,
            "arch_key": best_key,
            "true_acc": best_acc,
        },
        "reward_trace": state.reward_trace,
        "baseline_accs": baseline_accs,
    }


ROUND_CSV_HEADER = "round,baseline_key,baseline_acc,mean_reward,nac_loss"


def report_round_csv(report: dict) -> str:
    """Rounds table as CSV; architecture keys contain commas, so fields are
    quoted per RFC 4180 where needed."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUND_CSV_HEADER.split(","))
    for row in report["rounds"]:
        cells = [str(row["round"]), row["baseline_key"]]
        for col in ("baseline_acc", "mean_reward", "nac_loss"):
            cells.append("" if row[col] is None else repr(row[col]))
        writer.writerow(cells)
    return buf.getvalue()


def report_json(report: dict) -> str:
    return canonical_json(report) + "\n"

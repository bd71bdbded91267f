"""The architecture comparator: a two-layer GCN over each padded DAG, a
flatten-and-concat readout, and one sigmoid output giving the probability
that the first architecture beats the second. Trained with BCE on pairs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .optim import AdamState, adam_step
from .oracle import label_pair
from .space import Architecture, SpaceSpec, arch_key, pad, spec_hash
from .tensor import Tensor, sigmoid, xavier_uniform
from .util import canonical_json, map_ordered, worker_count

D_DEFAULT = 32
NAC_BATCH = 256
# inference batching keeps peak memory flat no matter how many pairs come in
_CHUNK = 1024


@dataclass
class NacConfig:
    d: int = D_DEFAULT
    raw_adjacency: bool = False  # True reproduces the unnormalized propagation rule
    readout: str = "flatten"  # or "mean"


@dataclass
class NacParams:
    spec: SpaceSpec
    cfg: NacConfig
    emb: Tensor   # (|vocab|+1, d), last row is PAD
    W0: Tensor    # (d, d)
    W1: Tensor    # (d, d)
    W_fc: Tensor  # (2*max_nodes*d, 1) flattened readout, (2*d, 1) mean readout

    def tensors(self) -> list[Tensor]:
        return [self.emb, self.W0, self.W1, self.W_fc]


@dataclass
class LabeledPair:
    a: Architecture
    b: Architecture
    y: int
    source: str = "ground_truth"  # or "pseudo"


def fc_width(spec: SpaceSpec, cfg: NacConfig) -> int:
    if cfg.readout == "flatten":
        return 2 * spec.max_nodes * cfg.d
    if cfg.readout == "mean":
        return 2 * cfg.d
    raise ValueError(f"unknown readout {cfg.readout!r}")


def init_nac(spec: SpaceSpec, rng: np.random.Generator,
             cfg: NacConfig | None = None) -> NacParams:
    cfg = cfg or NacConfig()
    d = cfg.d
    vocab = len(spec.op_vocab) + 1  # + PAD
    width = fc_width(spec, cfg)
    return NacParams(
        spec=spec, cfg=cfg,
        emb=Tensor(xavier_uniform((vocab, d), rng), requires_grad=True),
        W0=Tensor(xavier_uniform((d, d), rng), requires_grad=True),
        W1=Tensor(xavier_uniform((d, d), rng), requires_grad=True),
        W_fc=Tensor(xavier_uniform((width, 1), rng), requires_grad=True),
    )


def norm_adjacency(adj: np.ndarray, raw: bool = False) -> np.ndarray:
    """Propagation matrix for one padded adjacency.

    Default: transpose (row i gathers from i's predecessors), add self-loops,
    row-normalize. raw=True returns the adjacency untouched.
    """
    if raw:
        return adj.astype(np.float64)
    a_hat = adj.T + np.eye(adj.shape[0])
    return a_hat / a_hat.sum(axis=1, keepdims=True)


class ArchCodec:
    """Per-architecture (propagation matrix, padded op ids), cached by key."""

    def __init__(self, spec: SpaceSpec, cfg: NacConfig):
        self.spec = spec
        self.cfg = cfg
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def encode(self, arch: Architecture) -> tuple[np.ndarray, np.ndarray]:
        key = arch_key(arch)
        hit = self._cache.get(key)
        if hit is None:
            adj, ids = pad(arch, self.spec)
            hit = (norm_adjacency(adj, raw=self.cfg.raw_adjacency), ids)
            self._cache[key] = hit
        return hit

    def encode_batch(self, archs: list[Architecture]) -> tuple[np.ndarray, np.ndarray]:
        pairs = [self.encode(a) for a in archs]
        return (np.stack([p[0] for p in pairs]),
                np.stack([p[1] for p in pairs]))


def embed(arch: Architecture, params: NacParams) -> np.ndarray:
    """Node feature matrix X (max_nodes x d): one embedding row per op id,
    PAD rows using the PAD embedding."""
    _, ids = pad(arch, params.spec)
    return params.emb.data[ids]


def gcn_forward(a_hat: np.ndarray, x: np.ndarray, params: NacParams) -> np.ndarray:
    """Two propagation layers: Z = A_hat . relu(A_hat . X . W0) . W1."""
    if a_hat.shape[-1] != x.shape[-2]:
        raise ValueError(f"adjacency {a_hat.shape} does not match X {x.shape}")
    h = a_hat @ x @ params.W0.data
    return a_hat @ np.maximum(h, 0.0) @ params.W1.data


def _readout_np(z: np.ndarray, cfg: NacConfig) -> np.ndarray:
    # z is (B, n, d)
    if cfg.readout == "flatten":
        return z.reshape(z.shape[0], -1)
    return z.mean(axis=1)


def compare_many(pairs: list[tuple[Architecture, Architecture]],
                 params: NacParams, codec: ArchCodec | None = None) -> np.ndarray:
    """Batched probabilities for (a beats b) over a pair list. Pure numpy,
    chunked; worker fan-out keeps output order."""
    if not pairs:
        return np.zeros(0)
    codec = codec or ArchCodec(params.spec, params.cfg)
    chunks = [pairs[i:i + _CHUNK] for i in range(0, len(pairs), _CHUNK)]

    def run(chunk: list[tuple[Architecture, Architecture]]) -> np.ndarray:
        ah_a, ids_a = codec.encode_batch([p[0] for p in chunk])
        ah_b, ids_b = codec.encode_batch([p[1] for p in chunk])
        za = gcn_forward(ah_a, params.emb.data[ids_a], params)
        zb = gcn_forward(ah_b, params.emb.data[ids_b], params)
        feats = np.concatenate([_readout_np(za, params.cfg),
                                _readout_np(zb, params.cfg)], axis=1)
        return sigmoid(feats @ params.W_fc.data[:, 0])

    if worker_count() == 1 or len(chunks) == 1:
        outs = [run(c) for c in chunks]
    else:
        outs = map_ordered(run, chunks)
    return np.concatenate(outs)


def compare(a: Architecture, b: Architecture, params: NacParams,
            codec: ArchCodec | None = None) -> float:
    """p(a beats b) for one pair."""
    return float(compare_many([(a, b)], params, codec)[0])


def forward_pairs(pairs_a: list[Architecture], pairs_b: list[Architecture],
                  params: NacParams, codec: ArchCodec) -> Tensor:
    """Differentiable batch forward; returns probabilities (B, 1)."""
    ah_a, ids_a = codec.encode_batch(pairs_a)
    ah_b, ids_b = codec.encode_batch(pairs_b)

    def tower(ah: np.ndarray, ids: np.ndarray) -> Tensor:
        x = params.emb.gather_rows(ids)                      # (B, n, d)
        h = (Tensor(ah) @ x) @ params.W0
        z = (Tensor(ah) @ h.relu()) @ params.W1              # (B, n, d)
        if params.cfg.readout == "flatten":
            return z.reshape(z.shape[0], -1)
        return z.sum(axis=1) * (1.0 / z.shape[1])

    feats = Tensor.concat([tower(ah_a, ids_a), tower(ah_b, ids_b)], axis=1)
    return (feats @ params.W_fc).sigmoid()


def pair_loss(batch: list[LabeledPair], params: NacParams, codec: ArchCodec) -> Tensor:
    probs = forward_pairs([p.a for p in batch], [p.b for p in batch], params, codec)
    y = np.array([[float(p.y)] for p in batch])
    return probs.bce_mean(y)


def build_pairs(records: list[tuple[Architecture, float]],
                augment: bool = True) -> list[LabeledPair]:
    """All unordered combinations of m records as labeled pairs: m(m-1)/2,
    doubled when swap augmentation is on (the swapped copy gets 1-y)."""
    keys = [arch_key(a) for a, _ in records]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate architecture keys in records")
    out: list[LabeledPair] = []
    for i in range(len(records)):
        a, ra = records[i]
        for j in range(i + 1, len(records)):
            b, rb = records[j]
            y = label_pair(ra, rb)
            out.append(LabeledPair(a=a, b=b, y=y))
            if augment:
                out.append(LabeledPair(a=b, b=a, y=1 - y))
    return out


def train_nac(pairs: list[LabeledPair], params: NacParams, state: AdamState,
              batch_size: int, iterations: int, rng: np.random.Generator,
              pseudo_pairs: list[LabeledPair] | None = None,
              pseudo_fraction: float = 0.0,
              codec: ArchCodec | None = None) -> tuple[NacParams, list[float]]:
    """Minimize mean BCE over uniformly-resampled batches; returns the
    per-iteration loss trace. When pseudo pairs are supplied, each batch is
    pseudo_fraction pseudo (rounded to whole pairs) and the rest labeled.
    """
    if not pairs:
        raise ValueError("no training pairs")
    codec = codec or ArchCodec(params.spec, params.cfg)
    n_pseudo = 0
    if pseudo_pairs and pseudo_fraction > 0.0:
        n_pseudo = int(round(batch_size * pseudo_fraction))
    losses: list[float] = []
    for _ in range(iterations):
        take = batch_size - n_pseudo
        batch = [pairs[int(i)] for i in rng.integers(0, len(pairs), size=take)]
        if n_pseudo:
            batch += [pseudo_pairs[int(i)]
                      for i in rng.integers(0, len(pseudo_pairs), size=n_pseudo)]
        loss = pair_loss(batch, params, codec)
        loss.backward()
        adam_step(params.tensors(), None, state)
        losses.append(loss.item())
    return params, losses


class NacComparator:
    """Comparator interface over trained params (shared encode cache)."""

    def __init__(self, params: NacParams, codec: ArchCodec | None = None):
        self.params = params
        self.codec = codec or ArchCodec(params.spec, params.cfg)

    def many(self, pairs: list[tuple[Architecture, Architecture]]) -> np.ndarray:
        return compare_many(pairs, self.params, self.codec)

    def pair(self, a: Architecture, b: Architecture) -> float:
        return float(self.many([(a, b)])[0])


# -- serialization -------------------------------------------------------------


def nac_to_json(params: NacParams) -> dict:
    def dump(t: Tensor) -> dict:
        return {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}

    return {
        "spec": params.spec.to_json(),
        "spec_hash": spec_hash(params.spec),
        "config": {"d": params.cfg.d, "raw_adjacency": params.cfg.raw_adjacency,
                   "readout": params.cfg.readout},
        "tensors": {"emb": dump(params.emb), "W0": dump(params.W0),
                    "W1": dump(params.W1), "W_fc": dump(params.W_fc)},
    }


def save_nac(params: NacParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(nac_to_json(params)) + "\n")


def load_nac(path: str) -> NacParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = SpaceSpec.from_json(doc["spec"])
    if doc.get("spec_hash") != spec_hash(spec):
        raise ValueError(f"{path}: spec hash mismatch")
    c = doc["config"]
    cfg = NacConfig(d=int(c["d"]), raw_adjacency=bool(c["raw_adjacency"]),
                    readout=str(c["readout"]))

    def load(name: str) -> Tensor:
        entry = doc["tensors"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        return Tensor(arr, requires_grad=True)

    return NacParams(spec=spec, cfg=cfg, emb=load("emb"), W0=load("W0"),
                     W1=load("W1"), W_fc=load("W_fc"))

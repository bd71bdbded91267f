"""Cell search space: small DAGs with IN/OUT terminals and per-node ops.

Adjacency is stored strictly upper-triangular (edge i->j implies i < j), so
every representable architecture is acyclic by construction. Validation,
padding, enumeration, and random sampling all live here.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass

import numpy as np

from .util import canonical_json

IN = "IN"
OUT = "OUT"


@dataclass(frozen=True)
class SpaceSpec:
    max_nodes: int = 7
    op_vocab: tuple[str, ...] = (IN, "conv3", "conv1", "maxpool3", OUT)
    max_edges: int = 9

    def __post_init__(self):
        object.__setattr__(self, "op_vocab", tuple(self.op_vocab))
        if self.max_nodes < 3:
            raise ValueError("max_nodes must be >= 3")
        if IN not in self.op_vocab or OUT not in self.op_vocab:
            raise ValueError("op_vocab must include IN and OUT")
        if len(set(self.op_vocab)) != len(self.op_vocab):
            raise ValueError("op_vocab has duplicate entries")
        if not self.real_ops:
            raise ValueError("op_vocab needs at least one real op")

    @property
    def real_ops(self) -> tuple[str, ...]:
        return tuple(o for o in self.op_vocab if o not in (IN, OUT))

    @property
    def pad_id(self) -> int:
        # the PAD embedding sits one past the named vocab
        return len(self.op_vocab)

    def op_id(self, name: str) -> int:
        try:
            return self.op_vocab.index(name)
        except ValueError:
            raise ValueError(f"unknown op {name!r}") from None

    def to_json(self) -> dict:
        return {"max_nodes": self.max_nodes, "op_vocab": list(self.op_vocab),
                "max_edges": self.max_edges}

    @staticmethod
    def from_json(d: dict) -> "SpaceSpec":
        return SpaceSpec(max_nodes=int(d["max_nodes"]),
                         op_vocab=tuple(d["op_vocab"]),
                         max_edges=int(d["max_edges"]))


@dataclass(frozen=True)
class Architecture:
    n: int
    ops: tuple[str, ...]
    adj: tuple[tuple[int, ...], ...]

    @property
    def n_edges(self) -> int:
        return sum(sum(row) for row in self.adj)

    def to_json(self) -> dict:
        return {"n": self.n, "ops": list(self.ops),
                "adj": ["".join(str(b) for b in row) for row in self.adj]}

    @staticmethod
    def from_json(d: dict) -> "Architecture":
        adj = tuple(tuple(int(c) for c in row) for row in d["adj"])
        return Architecture(n=int(d["n"]), ops=tuple(d["ops"]), adj=adj)


def spec_hash(spec: SpaceSpec) -> str:
    """Short stable fingerprint of a space, stored in model/report files."""
    blob = canonical_json(spec.to_json(), indent=None).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def arch_key(arch: Architecture) -> str:
    """Canonical serialization-based key; distinct matrices give distinct
    keys even when the graphs are isomorphic."""
    rows = "-".join("".join(str(b) for b in row) for row in arch.adj)
    return f"{arch.n}|{','.join(arch.ops)}|{rows}"


def _reach_sets(arch: Architecture) -> tuple[set[int], set[int]]:
    """(nodes reachable from IN, nodes that can reach OUT), both inclusive."""
    n = arch.n
    fwd = {0}
    for i in range(n):  # topological order is just index order here
        if i in fwd:
            for j in range(i + 1, n):
                if arch.adj[i][j]:
                    fwd.add(j)
    bwd = {n - 1}
    for j in range(n - 1, -1, -1):
        if j in bwd:
            for i in range(j):
                if arch.adj[i][j]:
                    bwd.add(i)
    return fwd, bwd


def validate(arch: Architecture, spec: SpaceSpec) -> list[str]:
    """Return every violated constraint; empty list means valid."""
    bad: list[str] = []
    n = arch.n
    if n < 2 or n > spec.max_nodes:
        bad.append(f"node budget: n={n} outside [2, {spec.max_nodes}]")
        return bad  # shape checks below assume a sane n
    if len(arch.ops) != n or len(arch.adj) != n or any(len(r) != n for r in arch.adj):
        bad.append("malformed: ops/adjacency size disagrees with n")
        return bad
    if any(b not in (0, 1) for row in arch.adj for b in row):
        bad.append("malformed: adjacency entries must be 0/1")
        return bad
    if any(arch.adj[i][j] for i in range(n) for j in range(i + 1)):
        bad.append("not upper-triangular: edge i->j needs i < j")
    if arch.ops[0] != IN or arch.ops[-1] != OUT:
        bad.append("op vocab: node 0 must be IN and node n-1 must be OUT")
    real = set(spec.real_ops)
    for i in range(1, n - 1):
        if arch.ops[i] not in real:
            bad.append(f"op vocab: node {i} op {arch.ops[i]!r} not a real op")
    if arch.n_edges > spec.max_edges:
        bad.append(f"edge budget: {arch.n_edges} > {spec.max_edges}")
    fwd, bwd = _reach_sets(arch)
    if (n - 1) not in fwd:
        bad.append("no route: OUT unreachable from IN")
    for i in range(1, n - 1):
        if i not in fwd or i not in bwd:
            bad.append(f"dangling node: {i} is not on any IN->OUT path")
    return bad


def pad(arch: Architecture, spec: SpaceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad adjacency to max_nodes and op ids with the PAD id.

    Returns (adjacency float64 (max_nodes, max_nodes), op ids int64
    (max_nodes,)). Padding an already-full architecture is the identity.
    """
    m = spec.max_nodes
    if arch.n > m:
        raise ValueError(f"cannot pad {arch.n} nodes into {m}")
    adj = np.zeros((m, m), dtype=np.float64)
    adj[:arch.n, :arch.n] = np.asarray(arch.adj, dtype=np.float64)
    ids = np.full(m, spec.pad_id, dtype=np.int64)
    ids[:arch.n] = [spec.op_id(o) for o in arch.ops]
    return adj, ids


def unpad(adj: np.ndarray, ids: np.ndarray, spec: SpaceSpec) -> Architecture:
    """Strip PAD rows (inverse of pad for valid inputs)."""
    n = int(np.sum(ids != spec.pad_id))
    ops = tuple(spec.op_vocab[int(i)] for i in ids[:n])
    trimmed = tuple(tuple(int(v) for v in row[:n]) for row in adj[:n])
    return Architecture(n=n, ops=ops, adj=trimmed)


def edge_pairs(n: int) -> list[tuple[int, int]]:
    """Fixed slot order for edges: (0,1), (0,2), ..., row-major upper triangle."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def enumerate_space(spec: SpaceSpec, cap: int = 10 ** 6):
    """Yield every valid architecture exactly once, in a deterministic order:
    node count ascending, then edge bitmask ascending, then op tuples in
    vocab order. Raises once more than `cap` valid members have been seen.
    """
    count = 0
    for n in range(2, spec.max_nodes + 1):
        pairs = edge_pairs(n)
        for mask in range(1 << len(pairs)):
            adj = [[0] * n for _ in range(n)]
            for k, (i, j) in enumerate(pairs):
                if (mask >> k) & 1:
                    adj[i][j] = 1
            adj_t = tuple(tuple(row) for row in adj)
            for mids in itertools.product(spec.real_ops, repeat=n - 2):
                arch = Architecture(n=n, ops=(IN, *mids, OUT), adj=adj_t)
                if not validate(arch, spec):
                    count += 1
                    if count > cap:
                        raise RuntimeError(
                            f"enumeration cap {cap} exceeded (at least {count} members)")
                    yield arch


def random_arch(spec: SpaceSpec, rng: np.random.Generator,
                retries: int = 10 ** 4) -> Architecture:
    """Rejection-sample a valid architecture: uniform node count, fair-coin
    edges, uniform real ops."""
    real = spec.real_ops
    for _ in range(retries):
        n = int(rng.integers(2, spec.max_nodes + 1))
        pairs = edge_pairs(n)
        bits = rng.random(len(pairs)) < 0.5
        adj = [[0] * n for _ in range(n)]
        for k, (i, j) in enumerate(pairs):
            if bits[k]:
                adj[i][j] = 1
        mids = tuple(real[int(t)] for t in rng.integers(0, len(real), size=n - 2))
        arch = Architecture(n=n, ops=(IN, *mids, OUT),
                            adj=tuple(tuple(row) for row in adj))
        if not validate(arch, spec):
            return arch
    raise RuntimeError(f"no valid architecture after {retries} draws")


def longest_path_len(arch: Architecture) -> int:
    """Number of nodes on the longest IN->OUT path (0 when OUT unreachable)."""
    n = arch.n
    dist = [0] * n
    dist[0] = 1
    for j in range(1, n):
        best = 0
        for i in range(j):
            if arch.adj[i][j] and dist[i] > 0:
                best = max(best, dist[i] + 1)
        dist[j] = best
    return dist[n - 1]

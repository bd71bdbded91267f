"""Ground-truth performance without training networks.

A closed-form synthetic scorer maps architecture features through a fixed
random linear form and a sigmoid, giving a smooth, deterministic accuracy
in (0.80, 0.95). Seeded Gaussian jitter models run-to-run fluctuation.
Tabular benchmarks (JSON-lines) can be loaded as an alternative source.
"""
from __future__ import annotations

import functools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .space import Architecture, SpaceSpec, arch_key, longest_path_len, random_arch, validate
from .tensor import sigmoid
from .util import canonical_json, stable_seed

ACC_BASE = 0.80
ACC_SPAN = 0.15
SIGMA_NOISE = 0.002


@dataclass(frozen=True)
class PerfRecord:
    arch_key: str
    mean_acc: float
    per_seed_accs: tuple[float, ...] = ()

    def __post_init__(self):
        accs = (self.mean_acc, *self.per_seed_accs)
        if any(not (0.0 <= a <= 1.0) for a in accs):
            raise ValueError(f"accuracy outside [0,1] for {self.arch_key}")


@dataclass
class BenchTable:
    spec: SpaceSpec
    provenance: str = "synthetic"  # or "loaded"
    records: dict[str, PerfRecord] = field(default_factory=dict)
    archs: dict[str, Architecture] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def add(self, arch: Architecture, rec: PerfRecord) -> None:
        self.records[rec.arch_key] = rec
        self.archs[rec.arch_key] = arch


def _features(arch: Architecture, spec: SpaceSpec) -> np.ndarray:
    counts = [arch.ops.count(op) / spec.max_nodes for op in spec.real_ops]
    return np.array(counts + [arch.n_edges / spec.max_edges,
                              longest_path_len(arch) / spec.max_nodes])


@functools.lru_cache(maxsize=64)
def _oracle_weights(oracle_seed: int, dim: int) -> tuple[float, ...]:
    rng = np.random.default_rng(oracle_seed)
    return tuple(rng.standard_normal(dim))


def synth_perf(arch: Architecture, spec: SpaceSpec, oracle_seed: int) -> float:
    """Deterministic mean accuracy in (0.80, 0.95)."""
    bad = validate(arch, spec)
    if bad:
        raise ValueError(f"invalid architecture: {bad}")
    phi = _features(arch, spec)
    w = np.array(_oracle_weights(oracle_seed, phi.size))
    return ACC_BASE + ACC_SPAN * sigmoid(float(w @ phi))


def noisy_eval(arch: Architecture, spec: SpaceSpec, oracle_seed: int,
               train_seed: int, sigma_noise: float = SIGMA_NOISE) -> float:
    """synth_perf plus seeded Gaussian jitter, clamped to [0,1]. The jitter
    depends only on (arch_key, train_seed), not on call order."""
    acc = synth_perf(arch, spec, oracle_seed)
    if sigma_noise > 0.0:
        rng = np.random.default_rng(stable_seed(arch_key(arch), train_seed))
        acc += rng.normal(0.0, sigma_noise)
    return min(1.0, max(0.0, acc))


def label_pair(r_a: float, r_b: float) -> int:
    """1 iff the first accuracy is at least the second (ties label 1)."""
    return 1 if r_a >= r_b else 0


def save_table(table: BenchTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, rec in table.records.items():
            row = table.archs[key].to_json()
            row["acc"] = rec.mean_acc
            fh.write(canonical_json(row, indent=None) + "\n")


def load_table(path: str, spec: SpaceSpec, provenance: str = "loaded") -> BenchTable:
    table = BenchTable(spec=spec, provenance=provenance)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                arch = Architecture.from_json(row)
                acc = float(row["acc"])
            except (KeyError, ValueError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: bad benchmark line ({e})") from e
            if not (0.0 <= acc <= 1.0):
                raise ValueError(f"{path}:{lineno}: accuracy {acc} outside [0,1]")
            bad = validate(arch, spec)
            if bad:
                raise ValueError(f"{path}:{lineno}: invalid architecture: {bad}")
            key = arch_key(arch)
            if key in table.records:
                warnings.warn(f"{path}:{lineno}: duplicate key {key}, last wins")
            table.add(arch, PerfRecord(arch_key=key, mean_acc=acc))
    return table


class SyntheticOracle:
    """Closed-form oracle over a space; draws fresh random architectures."""

    def __init__(self, spec: SpaceSpec, oracle_seed: int,
                 sigma_noise: float = SIGMA_NOISE):
        self.spec = spec
        self.oracle_seed = oracle_seed
        self.sigma_noise = sigma_noise

    def mean_acc(self, arch: Architecture) -> float:
        return synth_perf(arch, self.spec, self.oracle_seed)

    def noisy(self, arch: Architecture, train_seed: int) -> float:
        return noisy_eval(arch, self.spec, self.oracle_seed, train_seed,
                          self.sigma_noise)

    def sample_archs(self, m: int, rng: np.random.Generator,
                     exclude: set[str] | None = None) -> list[Architecture]:
        """m architectures with distinct keys (also distinct from exclude)."""
        seen = set(exclude or ())
        out: list[Architecture] = []
        budget = 200 * m + 1000
        for _ in range(budget):
            if len(out) == m:
                return out
            arch = random_arch(self.spec, rng)
            key = arch_key(arch)
            if key not in seen:
                seen.add(key)
                out.append(arch)
        if len(out) == m:
            return out
        raise RuntimeError(f"could not draw {m} distinct architectures "
                           f"({len(out)} found in {budget} tries)")


class OracleComparator:
    """Perfect comparator: emits the ground-truth pair label as probability."""

    def __init__(self, oracle):
        self.oracle = oracle

    def many(self, pairs) -> np.ndarray:
        return np.array([float(label_pair(self.oracle.mean_acc(a),
                                          self.oracle.mean_acc(b)))
                         for a, b in pairs])

    def pair(self, a, b) -> float:
        return float(self.many([(a, b)])[0])


class ConstantComparator:
    """Always answers the same probability (diagnostics)."""

    def __init__(self, p: float = 0.5):
        self.p = p

    def many(self, pairs) -> np.ndarray:
        return np.full(len(pairs), self.p)

    def pair(self, a, b) -> float:
        return self.p


class TableOracle:
    """Oracle backed by a loaded benchmark table."""

    def __init__(self, table: BenchTable):
        self.table = table
        self.spec = table.spec

    def mean_acc(self, arch: Architecture) -> float:
        key = arch_key(arch)
        rec = self.table.records.get(key)
        if rec is None:
            raise KeyError(f"architecture {key} not in benchmark table")
        return rec.mean_acc

    def sample_archs(self, m: int, rng: np.random.Generator,
                     exclude: set[str] | None = None) -> list[Architecture]:
        keys = [k for k in self.table.records if k not in (exclude or ())]
        if m > len(keys):
            raise RuntimeError(f"table has {len(keys)} usable records, need {m}")
        picked = rng.choice(len(keys), size=m, replace=False)
        return [self.table.archs[keys[int(i)]] for i in picked]

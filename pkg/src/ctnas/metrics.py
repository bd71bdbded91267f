"""Ranking-quality metrics: Kendall's tau (tau-a, sign convention sgn(0)=0),
percentile rank with best-rank ties, pairwise 0-1 ranking risk, and the BCE
surrogate risk. All take a comparator with a .many(pairs) method.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import Architecture
from .tensor import BCE_EPS


@dataclass(frozen=True)
class RankEval:
    ktau: float
    n: int
    concordant: int
    discordant: int


def kendall_tau(pred, truth) -> RankEval:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred/truth must be equal-length vectors")
    n = pred.size
    if n < 2:
        raise ValueError("need at least 2 items")
    sp = np.sign(pred[:, None] - pred[None, :])
    st = np.sign(truth[:, None] - truth[None, :])
    prod = sp * st
    upper = np.triu_indices(n, k=1)
    vals = prod[upper]
    concordant = int((vals > 0).sum())
    discordant = int((vals < 0).sum())
    tau = float(vals.sum() / (n * (n - 1) / 2))
    return RankEval(ktau=tau, n=n, concordant=concordant, discordant=discordant)


def nac_scores(cmp, archs: list[Architecture]) -> np.ndarray:
    """score_i = mean over j != i of p(arch_i beats arch_j)."""
    if len(archs) < 2:
        raise ValueError("need at least 2 architectures")
    pairs = [(a, b) for i, a in enumerate(archs)
             for j, b in enumerate(archs) if i != j]
    probs = np.asarray(cmp.many(pairs), dtype=np.float64)
    return probs.reshape(len(archs), len(archs) - 1).mean(axis=1)


def percentile_rank(acc: float, all_accs) -> float:
    """Percent position in descending order; ties take the best rank."""
    accs = np.asarray(all_accs, dtype=np.float64)
    if accs.size == 0:
        raise ValueError("empty population")
    rank = 1 + int((accs > acc).sum())
    return 100.0 * rank / accs.size


def ranking_risk(cmp, items: list[tuple[Architecture, float]]) -> float:
    """Fraction of distinct-accuracy pairs the comparator orders wrongly;
    p = 0.5 counts as wrong. Tied-accuracy pairs are skipped."""
    pairs = []
    gaps = []
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i][1] != items[j][1]:
                pairs.append((items[i][0], items[j][0]))
                gaps.append(items[i][1] - items[j][1])
    if not pairs:
        raise ValueError("no pairs with distinct accuracies")
    probs = np.asarray(cmp.many(pairs), dtype=np.float64)
    margin = np.asarray(gaps) * (probs - 0.5)
    return float((margin <= 0.0).mean())


def surrogate_risk(cmp, pairs) -> float:
    """Mean BCE of comparator probabilities against pair labels."""
    if not pairs:
        raise ValueError("no pairs")
    probs = np.asarray(cmp.many([(p.a, p.b) for p in pairs]), dtype=np.float64)
    y = np.asarray([p.y for p in pairs], dtype=np.float64)
    pc = np.clip(probs, BCE_EPS, 1.0 - BCE_EPS)
    return float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean())


def _rank_with_ties(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_corr(xs, ys) -> float:
    """Spearman rank correlation (Pearson on average ranks)."""
    x = _rank_with_ties(np.asarray(xs, dtype=np.float64))
    y = _rank_with_ties(np.asarray(ys, dtype=np.float64))
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("constant input has no rank correlation")
    return float((xc * yc).sum() / denom)


METRICS_CSV_HEADER = "ktau,ranking_risk,surrogate_risk,checkpoint"


def metrics_csv(rows: list[tuple[float, float, float, str]]) -> str:
    lines = [METRICS_CSV_HEADER]
    for ktau, rrisk, srisk, checkpoint in rows:
        lines.append(f"{ktau!r},{rrisk!r},{srisk!r},{checkpoint}")
    return "\n".join(lines) + "\n"

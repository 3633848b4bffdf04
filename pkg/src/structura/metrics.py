"""Homogeneity, completeness and V-measure of a flat clustering."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyScoreSet


@dataclass(frozen=True)
class LabeledPartition:
    true_labels: tuple
    pred_labels: tuple

    def __init__(self, true_labels, pred_labels):
        true_labels, pred_labels = tuple(true_labels), tuple(pred_labels)
        if len(true_labels) != len(pred_labels):
            raise ValueError("label sequences differ in length")
        if not true_labels:
            raise ValueError("empty partition")
        object.__setattr__(self, "true_labels", true_labels)
        object.__setattr__(self, "pred_labels", pred_labels)


@dataclass(frozen=True)
class Scores:
    homogeneity: float
    completeness: float
    v_measure: float
    n: int = 0

    def as_tuple(self):
        return (self.homogeneity, self.completeness, self.v_measure)


def _entropy(counts, n):
    return -sum(c / n * math.log(c / n) for c in counts if c)


def _conditional_entropy(joint, marginal, n):
    # H(X|Y) with joint keyed (x, y) and marginal the counts of y
    return -sum(c / n * math.log(c / marginal[y]) for (_, y), c in joint.items())


def _parts(p: LabeledPartition):
    n = len(p.true_labels)
    joint = Counter(zip(p.true_labels, p.pred_labels))
    classes = Counter(p.true_labels)
    clusters = Counter(p.pred_labels)
    return n, joint, classes, clusters


def homogeneity(p: LabeledPartition) -> float:
    n, joint, classes, clusters = _parts(p)
    h_c = _entropy(classes.values(), n)
    if h_c == 0:
        return 1.0
    h_c_given_k = _conditional_entropy(joint, clusters, n)
    return max(0.0, 1.0 - h_c_given_k / h_c)


def completeness(p: LabeledPartition) -> float:
    n, joint, classes, clusters = _parts(p)
    h_k = _entropy(clusters.values(), n)
    if h_k == 0:
        return 1.0
    flipped = Counter({(k, c): v for (c, k), v in joint.items()})
    h_k_given_c = _conditional_entropy(flipped, classes, n)
    return max(0.0, 1.0 - h_k_given_c / h_k)


def harmonic(h: float, c: float) -> float:
    if h + c == 0:
        return 0.0
    return 2 * h * c / (h + c)


def v_measure(p: LabeledPartition) -> float:
    return harmonic(homogeneity(p), completeness(p))


def score(true_labels, pred_labels) -> Scores:
    p = LabeledPartition(true_labels, pred_labels)
    h, c = homogeneity(p), completeness(p)
    return Scores(h, c, harmonic(h, c), len(p.true_labels))


def mean_scores(per_piece, micro: bool = False) -> Scores:
    """Average per-piece scores; each piece counts once unless ``micro``.

    ``micro`` weights each piece by its number of transcriptions.
    """
    per_piece = list(per_piece)
    if not per_piece:
        raise EmptyScoreSet("no piece scores to average")
    weights = [s.n if micro else 1 for s in per_piece]
    total = sum(weights)
    if total == 0:
        raise EmptyScoreSet("micro average over pieces with n = 0")
    mean = [sum(w * s.as_tuple()[k] for w, s in zip(weights, per_piece)) / total for k in range(3)]
    return Scores(*mean, n=sum(s.n for s in per_piece))


def score_report(per_piece: dict[str, Scores], micro: bool = False) -> dict:
    mean = mean_scores(per_piece.values(), micro)
    return {
        "per_piece": [{"piece_id": pid, "h": s.homogeneity, "c": s.completeness, "v": s.v_measure, "n": s.n}
                      for pid, s in per_piece.items()],
        "mean": {"h": mean.homogeneity, "c": mean.completeness, "v": mean.v_measure},
    }

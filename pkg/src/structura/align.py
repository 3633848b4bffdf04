"""Pairwise DTW over chord sequences.

The local cost mixes Jaccard distance of pitch-class sets with the absolute
difference of normalised onsets. Steps are (1,0), (0,1), (1,1) with unit
weight and no band.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chordify import Chord, ChordSequence
from .errors import EmptySequence, PathUnavailable

DEFAULT_CELL_BUDGET = 25_000_000

_POPCOUNT = np.array([bin(m).count("1") for m in range(1 << 12)], dtype=np.int64)


@dataclass(frozen=True)
class AlignParams:
    alpha: float = 0.5
    cell_budget: int = DEFAULT_CELL_BUDGET

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class AlignmentResult:
    path: tuple[tuple[int, int], ...] | None
    cumulative_cost: float
    len_i: int
    len_j: int
    id_i: str = ""
    id_j: str = ""

    def to_dict(self) -> dict:
        return {
            "i_id": self.id_i,
            "j_id": self.id_j,
            "cost": self.cumulative_cost,
            "I": self.len_i,
            "J": self.len_j,
            "path": None if self.path is None else [list(s) for s in self.path],
        }


def jaccard_distance(a, b) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def time_distance(a: Chord, b: Chord) -> float:
    return abs(a.onset_norm - b.onset_norm)


def chord_cost(a: Chord, b: Chord, p: AlignParams) -> float:
    return p.alpha * jaccard_distance(a.pitch_classes, b.pitch_classes) + (1.0 - p.alpha) * time_distance(a, b)


def _features(cs: ChordSequence):
    masks = np.fromiter((c.mask for c in cs.chords), dtype=np.int64, count=len(cs))
    onsets = np.fromiter((c.onset_norm for c in cs.chords), dtype=np.float64, count=len(cs))
    return masks, onsets


def _block_cost(mi, ti, mj, tj, alpha):
    # same arithmetic as chord_cost, so scalar and matrix paths agree bitwise
    inter = _POPCOUNT[mi[:, None] & mj[None, :]]
    union = _POPCOUNT[mi[:, None] | mj[None, :]]
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = np.where(union == 0, 0.0, 1.0 - inter / np.where(union == 0, 1, union))
    return alpha * jac + (1.0 - alpha) * np.abs(ti[:, None] - tj[None, :])


def cost_matrix(ci: ChordSequence, cj: ChordSequence, p: AlignParams) -> np.ndarray:
    """Local cost for every chord pair, shape (I, J)."""
    mi, ti = _features(ci)
    mj, tj = _features(cj)
    return _block_cost(mi, ti, mj, tj, p.alpha)


def _accumulate(cost: np.ndarray) -> np.ndarray:
    """Cumulative DTW matrix, filled one anti-diagonal at a time."""
    n_i, n_j = cost.shape
    acc = np.full((n_i, n_j), np.inf)
    acc[0, 0] = cost[0, 0]
    for k in range(1, n_i + n_j - 1):
        i = np.arange(max(0, k - n_j + 1), min(k, n_i - 1) + 1)
        j = k - i
        best = np.full(i.shape, np.inf)
        ok = (i > 0) & (j > 0)
        best[ok] = acc[i[ok] - 1, j[ok] - 1]
        ok = i > 0
        best[ok] = np.minimum(best[ok], acc[i[ok] - 1, j[ok]])
        ok = j > 0
        best[ok] = np.minimum(best[ok], acc[i[ok], j[ok] - 1])
        acc[i, j] = cost[i, j] + best
    return acc


def _accumulate_cost_only(mi, ti, mj, tj, alpha) -> float:
    """Final DTW cost keeping only two rows; local costs are built per row."""
    n_j = len(mj)
    prev = None
    for r in range(len(mi)):
        c = _block_cost(mi[r:r + 1], ti[r:r + 1], mj, tj, alpha)[0]
        row = np.empty(n_j)
        if prev is None:
            row = np.cumsum(c)
        else:
            # vertical and diagonal predecessors are vectorised, horizontal is sequential
            up = prev.copy()
            up[1:] = np.minimum(prev[1:], prev[:-1])
            row[0] = c[0] + prev[0]
            for j in range(1, n_j):
                row[j] = c[j] + min(up[j], row[j - 1])
        prev = row
    return float(prev[-1])


def _backtrack(acc: np.ndarray) -> tuple[tuple[int, int], ...]:
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    return tuple(reversed(path))


def dtw_align(ci: ChordSequence, cj: ChordSequence, p: AlignParams | None = None,
              need_path: bool = True) -> AlignmentResult:
    """Globally optimal monotone alignment of two chord sequences.

    Ties during backtracking prefer the diagonal step, then the step that
    advances only in ``ci``, then the one that advances only in ``cj``.
    When ``I * J`` exceeds ``p.cell_budget`` only the cost is computed;
    asking for a path in that regime raises :class:`PathUnavailable`.
    """
    p = p or AlignParams()
    n_i, n_j = len(ci), len(cj)
    if n_i == 0 or n_j == 0:
        raise EmptySequence(f"cannot align empty sequence ({ci.transcription_id!r}: {n_i}, "
                            f"{cj.transcription_id!r}: {n_j})")
    if n_i * n_j > p.cell_budget:
        if need_path:
            raise PathUnavailable(f"{n_i}x{n_j} cells exceed budget {p.cell_budget}")
        mi, ti = _features(ci)
        mj, tj = _features(cj)
        total = _accumulate_cost_only(mi, ti, mj, tj, p.alpha)
        return AlignmentResult(None, total, n_i, n_j, ci.transcription_id, cj.transcription_id)

    acc = _accumulate(cost_matrix(ci, cj, p))
    path = _backtrack(acc) if need_path else None
    return AlignmentResult(path, float(acc[-1, -1]), n_i, n_j, ci.transcription_id, cj.transcription_id)

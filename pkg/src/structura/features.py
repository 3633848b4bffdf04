"""Pairwise structural distance matrices and their weighted combination."""
from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .align import AlignmentResult, AlignParams, dtw_align
from .chordify import ChordSequence
from .errors import MissingPath, PairAlignmentError, StructuraError, UnclusterablePiece

MATRIX_NAMES = ("cost", "warp_opt", "warp_mean", "len")
COST_NORMS = ("path", "max_len", "none")


@dataclass(frozen=True)
class PairFeatures:
    d_cost: float
    d_warp_opt: float
    d_warp_mean: float
    d_len: float

    def as_tuple(self):
        return (self.d_cost, self.d_warp_opt, self.d_warp_mean, self.d_len)


@dataclass(frozen=True, init=False)
class FeatureWeights:
    """Non-negative weights for (cost, warp_opt, warp_mean, len), stored summing to 1."""

    w_cost: float
    w_warp_opt: float
    w_warp_mean: float
    w_len: float

    def __init__(self, w_cost=0.25, w_warp_opt=0.25, w_warp_mean=0.25, w_len=0.25):
        raw = (w_cost, w_warp_opt, w_warp_mean, w_len)
        if any(not np.isfinite(w) or w < 0 for w in raw):
            raise ValueError(f"weights must be finite and non-negative, got {raw}")
        total = sum(raw)
        if total <= 0:
            raise ValueError("at least one weight must be positive")
        for name, w in zip(("w_cost", "w_warp_opt", "w_warp_mean", "w_len"), raw):
            object.__setattr__(self, name, w / total)

    def as_tuple(self):
        return (self.w_cost, self.w_warp_opt, self.w_warp_mean, self.w_len)

    def __repr__(self):
        return "FeatureWeights(%s)" % ", ".join(f"{w:g}" for w in self.as_tuple())


@dataclass
class FeatureMatrices:
    ids: list[str]
    m_cost: np.ndarray
    m_warp_opt: np.ndarray
    m_warp_mean: np.ndarray
    m_len: np.ndarray

    def stack(self) -> list[np.ndarray]:
        return [self.m_cost, self.m_warp_opt, self.m_warp_mean, self.m_len]

    def named(self) -> dict[str, np.ndarray]:
        return dict(zip(MATRIX_NAMES, self.stack()))

    def __len__(self):
        return len(self.ids)


def pair_features(a: AlignmentResult, cost_norm: str = "path") -> PairFeatures:
    """Four structural dissimilarities from one alignment.

    With ``L`` the path length, the warp amount is how far ``L`` exceeds the
    shortest admissible path ``max(I, J)``.

    ``cost_norm`` selects the divisor for the cumulative cost: path length
    (default), ``max(I, J)``, or none.
    """
    if a.path is None:
        raise MissingPath(f"alignment {a.id_i!r} vs {a.id_j!r} carries no path")
    n_path = len(a.path)
    longest = max(a.len_i, a.len_j)
    shortest = min(a.len_i, a.len_j)
    if cost_norm == "path":
        d_cost = a.cumulative_cost / n_path
    elif cost_norm == "max_len":
        d_cost = a.cumulative_cost / longest
    elif cost_norm == "none":
        d_cost = a.cumulative_cost
    else:
        raise ValueError(f"unknown cost_norm {cost_norm!r}")
    excess = n_path - longest
    return PairFeatures(
        d_cost=d_cost,
        d_warp_opt=excess / longest,
        d_warp_mean=excess / ((a.len_i + a.len_j) / 2),
        d_len=1.0 - shortest / longest,
    )


def _align_pair(seqs, i, j, p):
    try:
        return dtw_align(seqs[i], seqs[j], p)
    except StructuraError as exc:
        raise PairAlignmentError(seqs[i].transcription_id, seqs[j].transcription_id, exc) from exc


def align_all(piece: list[ChordSequence], p: AlignParams | None = None,
              threads: int = 1) -> dict[tuple[int, int], AlignmentResult]:
    """DTW for every unordered pair ``i < j``, keyed by index pair."""
    p = p or AlignParams()
    pairs = list(itertools.combinations(range(len(piece)), 2))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda ij: _align_pair(piece, *ij, p), pairs))
    else:
        results = [_align_pair(piece, i, j, p) for i, j in pairs]
    return dict(zip(pairs, results))


def matrices_from_alignments(ids: list[str], alignments: dict[tuple[int, int], AlignmentResult],
                             cost_norm: str = "path") -> FeatureMatrices:
    n = len(ids)
    mats = np.zeros((4, n, n))
    for (i, j), res in alignments.items():
        f = pair_features(res, cost_norm).as_tuple()
        mats[:, i, j] = f
        mats[:, j, i] = f
    return FeatureMatrices(list(ids), *mats)


def build_matrices(piece: list[ChordSequence], p: AlignParams | None = None,
                   threads: int = 1, cost_norm: str = "path") -> FeatureMatrices:
    if len(piece) < 2:
        raise UnclusterablePiece(f"need at least 2 transcriptions, got {len(piece)}")
    alignments = align_all(piece, p, threads)
    return matrices_from_alignments([cs.transcription_id for cs in piece], alignments, cost_norm)


def minmax_offdiag(m: np.ndarray) -> np.ndarray:
    """Scale off-diagonal entries to [0, 1]; constant matrices become all zeros."""
    n = m.shape[0]
    out = np.zeros_like(m, dtype=float)
    if n < 2:
        return out
    off = ~np.eye(n, dtype=bool)
    lo, hi = m[off].min(), m[off].max()
    if hi > lo:
        out[off] = (m[off] - lo) / (hi - lo)
    return out


def combine(m: FeatureMatrices, w: FeatureWeights, normalize: bool = True) -> np.ndarray:
    mats = m.stack()
    if normalize:
        mats = [minmax_offdiag(x) for x in mats]
    out = np.zeros_like(mats[0], dtype=float)
    for wk, mk in zip(w.as_tuple(), mats):
        if wk:
            out = out + wk * mk
    # exact symmetry regardless of rounding
    out = np.triu(out, 1)
    return out + out.T


def matrix_csv(ids: list[str], m: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + list(ids))
    for tid, row in zip(ids, m):
        writer.writerow([tid] + [repr(float(x)) for x in row])
    return buf.getvalue()


def matrices_json(m: FeatureMatrices, combined: np.ndarray | None = None) -> dict:
    out = {"ids": list(m.ids), "matrices": {k: v.tolist() for k, v in m.named().items()}}
    if combined is not None:
        out["combined"] = combined.tolist()
    return out

"""Exhaustive grid search over weights, linkage, threshold and alpha."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .align import AlignParams
from .chordify import ChordifyParams
from .cluster import LINKAGE_METHODS, cut, linkage
from .errors import MissingLabels, PieceError, StructuraError, UnclusterablePiece
from .features import FeatureMatrices, FeatureWeights, combine
from .ingest import Corpus
from .metrics import Scores, mean_scores, score
from .pipeline import piece_matrices

logger = logging.getLogger(__name__)

OBJECTIVES = ("homogeneity", "completeness", "v_measure")


def simplex_lattice(step: float = 0.25, dims: int = 4) -> list[FeatureWeights]:
    """All weight vectors on the simplex whose entries are multiples of ``step``."""
    k = round(1 / step)
    if not np.isclose(k * step, 1.0):
        raise ValueError("step must divide 1")
    out = []
    for combo in itertools.product(range(k + 1), repeat=dims):
        if sum(combo) == k:
            out.append(FeatureWeights(*(c / k for c in combo)))
    return out


DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(21))
DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ParamSet:
    weights: FeatureWeights
    method: str
    threshold: float
    alpha: float

    def sort_key(self):
        return (self.weights.as_tuple(), self.method, self.threshold, self.alpha)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights.as_tuple()), "method": self.method,
                "threshold": self.threshold, "alpha": self.alpha}


@dataclass
class ParamGrid:
    weight_candidates: list[FeatureWeights] = field(default_factory=simplex_lattice)
    methods: list[str] = field(default_factory=lambda: list(LINKAGE_METHODS))
    thresholds: list[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    alpha_candidates: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    objective: str = "homogeneity"
    chordify: ChordifyParams = field(default_factory=ChordifyParams)
    normalize: bool = True
    cost_norm: str = "path"

    def __post_init__(self):
        for name in ("weight_candidates", "methods", "thresholds", "alpha_candidates"):
            if not getattr(self, name):
                raise ValueError(f"grid field {name} is empty")
        if any(t < 0 for t in self.thresholds):
            raise ValueError("thresholds must be non-negative")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        bad = set(self.methods) - set(LINKAGE_METHODS)
        if bad:
            raise ValueError(f"unknown linkage methods {sorted(bad)}")

    def __len__(self):
        return (len(self.weight_candidates) * len(self.methods) * len(self.thresholds)
                * len(self.alpha_candidates))

    def param_sets(self):
        for a, w, m, t in itertools.product(self.alpha_candidates, self.weight_candidates,
                                            self.methods, self.thresholds):
            yield ParamSet(w, m, t, a)

    @classmethod
    def from_mapping(cls, d: dict) -> "ParamGrid":
        kw = {}
        if "weights" in d:
            kw["weight_candidates"] = [FeatureWeights(*map(float, w)) for w in d["weights"]]
        elif "weight_step" in d:
            kw["weight_candidates"] = simplex_lattice(float(d["weight_step"]))
        if "methods" in d:
            kw["methods"] = list(d["methods"])
        if "thresholds" in d:
            kw["thresholds"] = [float(t) for t in d["thresholds"]]
        if "alphas" in d:
            kw["alpha_candidates"] = [float(a) for a in d["alphas"]]
        for k in ("objective", "normalize", "cost_norm"):
            if k in d:
                kw[k] = d[k]
        cp = {k: float(d[k]) for k in ("tau_ioi", "tau_chord") if k in d}
        if cp:
            kw["chordify"] = ChordifyParams(**cp)
        return cls(**kw)


@dataclass(frozen=True)
class LeaderboardEntry:
    params: ParamSet
    scores: Scores

    def objective(self, name: str) -> float:
        return getattr(self.scores, name)

    def to_dict(self) -> dict:
        return {**self.params.to_dict(), "h": self.scores.homogeneity,
                "c": self.scores.completeness, "v": self.scores.v_measure}


@dataclass
class TuneResult:
    leaderboard: list[LeaderboardEntry]
    objective: str

    @property
    def best(self) -> LeaderboardEntry:
        return self.leaderboard[0]

    @property
    def best_params(self) -> ParamSet:
        return self.best.params

    @property
    def best_score(self) -> float:
        return self.best.objective(self.objective)


def rank(entries, objective: str) -> list[LeaderboardEntry]:
    """One descending sort over (objective, completeness, params).

    The parameter tuple is compared lexicographically in the same descending
    direction, so on a plateau of equal scores heavier cost weighting wins.
    """
    return sorted(entries, key=lambda e: (e.objective(objective), e.scores.completeness,
                                          e.params.sort_key()), reverse=True)


def _check_pieces(corpus: Corpus):
    if not corpus.pieces:
        raise StructuraError("corpus has no pieces")
    for pid, ts in corpus.pieces.items():
        if len(ts) < 2:
            raise PieceError(pid, UnclusterablePiece(f"{len(ts)} transcription(s)"))
        missing = [t.id for t in ts if not corpus.labels or t.id not in corpus.labels]
        if missing:
            raise MissingLabels(f"piece {pid!r}: no label for {missing}")


class AlignmentCache:
    """Feature matrices per (piece, alpha); weights and thresholds reuse them."""

    def __init__(self, corpus: Corpus, chordify_params: ChordifyParams, cost_norm="path", threads=1):
        self.corpus = corpus
        self.chordify_params = chordify_params
        self.cost_norm = cost_norm
        self.threads = threads
        self._store: dict[tuple[str, float], FeatureMatrices] = {}

    def compute(self, piece_id: str, alpha: float) -> FeatureMatrices:
        try:
            return piece_matrices(self.corpus.pieces[piece_id], self.chordify_params,
                                  AlignParams(alpha), self.threads, self.cost_norm)
        except StructuraError as exc:
            raise PieceError(piece_id, exc) from exc

    def get(self, piece_id: str, alpha: float) -> FeatureMatrices:
        key = (piece_id, alpha)
        if key not in self._store:
            self._store[key] = self.compute(piece_id, alpha)
        return self._store[key]


def _piece_scores(corpus, m: FeatureMatrices, params: ParamSet, normalize: bool) -> Scores:
    d = combine(m, params.weights, normalize)
    assignment = cut(linkage(d, params.method, m.ids), params.threshold)
    return score([corpus.labels[i] for i in m.ids], assignment.as_list(m.ids))


def evaluate_params(corpus: Corpus, params: ParamSet, chordify_params: ChordifyParams | None = None,
                    normalize: bool = True, cost_norm: str = "path",
                    cache: AlignmentCache | None = None) -> Scores:
    """Mean (h, c, V) over all pieces of a labelled corpus for one parameter set."""
    _check_pieces(corpus)
    cache = cache or AlignmentCache(corpus, chordify_params or ChordifyParams(), cost_norm)
    per_piece = []
    for pid in corpus.pieces:
        m = cache.get(pid, params.alpha)
        per_piece.append(_piece_scores(corpus, m, params, normalize))
    return mean_scores(per_piece)


def grid_search(corpus: Corpus, grid: ParamGrid | None = None, use_cache: bool = True,
                threads: int = 1) -> TuneResult:
    """Score every point of the grid and rank them.

    With the cache, DTW runs once per (piece, alpha) and each linkage once
    per (piece, alpha, weights, method); thresholds only re-cut the tree.
    """
    grid = grid or ParamGrid()
    _check_pieces(corpus)
    logger.info("grid search: %d parameter sets over %d pieces", len(grid), len(corpus.pieces))

    if not use_cache:
        entries = []
        for params in grid.param_sets():
            cache = AlignmentCache(corpus, grid.chordify, grid.cost_norm, threads)
            entries.append(LeaderboardEntry(params, evaluate_params(
                corpus, params, grid.chordify, grid.normalize, grid.cost_norm, cache)))
        return TuneResult(rank(entries, grid.objective), grid.objective)

    cache = AlignmentCache(corpus, grid.chordify, grid.cost_norm, threads)
    per_params: dict[ParamSet, list[Scores]] = {}
    for pid in corpus.pieces:
        truth = [corpus.labels[t.id] for t in corpus.pieces[pid]]
        for alpha in grid.alpha_candidates:
            m = cache.get(pid, alpha)
            for w in grid.weight_candidates:
                d = combine(m, w, grid.normalize)
                for method in grid.methods:
                    dgm = linkage(d, method, m.ids)
                    for t in grid.thresholds:
                        s = score(truth, cut(dgm, t).as_list(m.ids))
                        per_params.setdefault(ParamSet(w, method, t, alpha), []).append(s)
        logger.info("scored piece %s", pid)
    entries = [LeaderboardEntry(p, mean_scores(s)) for p, s in per_params.items()]
    return TuneResult(rank(entries, grid.objective), grid.objective)


def leaderboard_csv(result: TuneResult) -> str:
    lines = ["rank,w_cost,w_warp_opt,w_warp_mean,w_len,method,threshold,alpha,h,c,v"]
    for k, e in enumerate(result.leaderboard):
        w = e.params.weights.as_tuple()
        lines.append(",".join([str(k + 1), *(repr(x) for x in w), e.params.method,
                               repr(e.params.threshold), repr(e.params.alpha),
                               repr(e.scores.homogeneity), repr(e.scores.completeness),
                               repr(e.scores.v_measure)]))
    return "\n".join(lines) + "\n"

"""Run configuration and the per-piece chordify -> align -> cluster chain."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .align import AlignParams
from .chordify import ChordifyParams, chordify
from .cluster import LINKAGE_METHODS, ClusterAssignment, Dendrogram, cut, linkage
from .features import COST_NORMS, FeatureMatrices, FeatureWeights, build_matrices, combine
from .ingest import Transcription

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_WEIGHTS = (0.75, 0.0, 0.0, 0.25)
DEFAULT_METHOD = "average"
DEFAULT_THRESHOLD = 0.3


@dataclass
class RunConfig:
    chordify: ChordifyParams = field(default_factory=ChordifyParams)
    align: AlignParams = field(default_factory=AlignParams)
    weights: FeatureWeights = field(default_factory=lambda: FeatureWeights(*DEFAULT_WEIGHTS))
    normalize: bool = True
    cost_norm: str = "path"
    method: str = DEFAULT_METHOD
    threshold: float = DEFAULT_THRESHOLD
    threads: int = 1
    out: Path | None = None

    def __post_init__(self):
        if self.method not in LINKAGE_METHODS:
            raise ValueError(f"unknown linkage method {self.method!r}")
        if self.cost_norm not in COST_NORMS:
            raise ValueError(f"unknown cost_norm {self.cost_norm!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_mapping(cls, d: dict) -> "RunConfig":
        """Build from a flat or sectioned mapping (e.g. a parsed TOML file).

        Recognised keys: tau_ioi, tau_chord, alpha, cell_budget, weights
        (4-list), normalize, cost_norm, method, threshold, threads, out.
        Sections ``[chordify]``, ``[align]``, ``[features]``, ``[cluster]``
        are flattened first.
        """
        flat = {}
        for k, v in d.items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        known = {"tau_ioi", "tau_chord", "alpha", "cell_budget", "weights", "normalize",
                 "cost_norm", "method", "threshold", "threads", "out"}
        unknown = set(flat) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cp = ChordifyParams(**{k: float(flat[k]) for k in ("tau_ioi", "tau_chord") if k in flat})
        ap = AlignParams(**{k: (float if k == "alpha" else int)(flat[k])
                            for k in ("alpha", "cell_budget") if k in flat})
        kw = {"chordify": cp, "align": ap}
        if "weights" in flat:
            w = flat["weights"]
            if isinstance(w, dict):
                w = [w.get(k, 0.0) for k in ("cost", "warp_opt", "warp_mean", "len")]
            if len(w) != 4:
                raise ValueError("weights needs four entries")
            kw["weights"] = FeatureWeights(*map(float, w))
        for k in ("normalize", "cost_norm", "method"):
            if k in flat:
                kw[k] = flat[k]
        if "threshold" in flat:
            kw["threshold"] = float(flat["threshold"])
        if "threads" in flat:
            kw["threads"] = int(flat["threads"])
        if "out" in flat:
            kw["out"] = Path(flat["out"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "tau_ioi": self.chordify.tau_ioi,
            "tau_chord": self.chordify.tau_chord,
            "alpha": self.align.alpha,
            "weights": list(self.weights.as_tuple()),
            "normalize": self.normalize,
            "cost_norm": self.cost_norm,
            "method": self.method,
            "threshold": self.threshold,
        }


def read_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def piece_matrices(transcriptions: list[Transcription], cp: ChordifyParams, ap: AlignParams,
                   threads: int = 1, cost_norm: str = "path") -> FeatureMatrices:
    seqs = [chordify(t, cp) for t in transcriptions]
    return build_matrices(seqs, ap, threads, cost_norm)


@dataclass
class PieceResult:
    matrices: FeatureMatrices
    combined: object
    dendrogram: Dendrogram
    assignment: ClusterAssignment


def run_piece(transcriptions: list[Transcription], config: RunConfig) -> PieceResult:
    m = piece_matrices(transcriptions, config.chordify, config.align, config.threads, config.cost_norm)
    d = combine(m, config.weights, config.normalize)
    dgm = linkage(d, config.method, m.ids)
    return PieceResult(m, d, dgm, cut(dgm, config.threshold))

"""Reference-free grouping of piano transcriptions by structural realisation."""
from .align import AlignmentResult, AlignParams, chord_cost, dtw_align, jaccard_distance, time_distance
from .chordify import Chord, ChordifyParams, ChordSequence, chordify, group_chords, normalize_onsets
from .cluster import ClusterAssignment, Dendrogram, cut, linkage
from .features import FeatureMatrices, FeatureWeights, PairFeatures, build_matrices, combine, pair_features
from .ingest import Corpus, Note, Transcription, load_corpus, parse_midi
from .metrics import LabeledPartition, completeness, homogeneity, mean_scores, v_measure
from .pipeline import RunConfig, run_piece
from .tune import ParamGrid, ParamSet, TuneResult, evaluate_params, grid_search

__version__ = "0.1.0"

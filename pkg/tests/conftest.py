import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from structura.synth import generate_corpus  # noqa: E402

NOISY = {"p_miss": 0.02, "p_insert": 0.01, "onset_jitter_sd": 0.01, "tempo_range": [0.85, 1.15]}
CLEAN = {"p_miss": 0.0, "p_insert": 0.0, "onset_jitter_sd": 0.0, "tempo_range": [1.0, 1.0]}
PIECES = ["minuet", "rondo", "sonata", "edition", "aaba"]


def corpus_spec(artifacts, seed=7, holdout=None, pieces=PIECES, per_variant=4):
    return {
        "seed": seed,
        "performances_per_variant": per_variant,
        "artifacts": artifacts,
        "pieces": [{"template": p, "holdout": p == holdout} for p in pieces],
    }


@pytest.fixture(scope="session")
def clean_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("clean")
    return generate_corpus(corpus_spec(CLEAN), out)


@pytest.fixture(scope="session")
def noisy_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("noisy")
    return generate_corpus(corpus_spec(NOISY, holdout="edition"), out)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    return generate_corpus(corpus_spec(NOISY, seed=3, pieces=["aaba", "minuet"], per_variant=2), out)

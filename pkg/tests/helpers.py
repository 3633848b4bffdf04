import random

from structura.chordify import Chord, ChordSequence, normalize_onsets


def random_sequence(rng: random.Random, length: int, name: str = "s") -> ChordSequence:
    """Random pitch-class sets at random increasing onsets, normalised."""
    onsets = sorted(rng.uniform(0, 10) for _ in range(length))
    chords = tuple(Chord(frozenset(rng.sample(range(12), rng.randint(1, 4))), 0.0, t, 1) for t in onsets)
    return normalize_onsets(ChordSequence(name, chords))


def as_pairs(cs: ChordSequence):
    """Oracle-side view: (pitch-class set, normalised onset) tuples."""
    return [(set(c.pitch_classes), c.onset_norm) for c in cs.chords]


def seq_from(pcs_and_times, name="s"):
    return ChordSequence(name, tuple(Chord(frozenset(p), t, t, 1) for p, t in pcs_and_times))

"""Chordwise representation of a transcription."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .ingest import Note, Transcription


@dataclass(frozen=True)
class ChordifyParams:
    tau_ioi: float = 0.05
    tau_chord: float = 0.30

    def __post_init__(self):
        if not 0 < self.tau_ioi <= self.tau_chord:
            raise ValueError(f"need 0 < tau_ioi <= tau_chord, got {self.tau_ioi}, {self.tau_chord}")


@dataclass(frozen=True)
class Chord:
    pitch_classes: frozenset[int]
    onset_norm: float
    onset_raw: float
    note_count: int

    @property
    def mask(self) -> int:
        """Pitch-class set as a 12-bit integer."""
        m = 0
        for pc in self.pitch_classes:
            m |= 1 << pc
        return m


@dataclass(frozen=True)
class ChordSequence:
    transcription_id: str
    chords: tuple[Chord, ...]
    params: ChordifyParams = ChordifyParams()

    def __len__(self):
        return len(self.chords)

    def to_dict(self) -> dict:
        return {
            "id": self.transcription_id,
            "params": {"tau_ioi": self.params.tau_ioi, "tau_chord": self.params.tau_chord},
            "chords": [{"pcs": sorted(c.pitch_classes), "t": c.onset_norm, "t_raw": c.onset_raw}
                       for c in self.chords],
        }


def group_chords(t: Transcription, p: ChordifyParams) -> list[list[Note]]:
    """Greedy left-to-right grouping of notes into chords.

    A note joins the open chord when it follows the previous note by at most
    ``tau_ioi`` and the chord's first note by at most ``tau_chord``.
    """
    notes = sorted(t.notes, key=lambda n: (n.onset, n.pitch))
    groups: list[list[Note]] = []
    for note in notes:
        if groups:
            current = groups[-1]
            if (note.onset - current[-1].onset <= p.tau_ioi
                    and note.onset - current[0].onset <= p.tau_chord):
                current.append(note)
                continue
        groups.append([note])
    return groups


def normalize_onsets(cs: ChordSequence) -> ChordSequence:
    """Rescale onsets affinely so the first chord sits at 0 and the last at 1.

    A zero span (one chord, or all chords simultaneous) maps every onset to 0.
    """
    first = cs.chords[0].onset_raw
    span = cs.chords[-1].onset_raw - first
    if span > 0:
        chords = tuple(replace(c, onset_norm=min(1.0, (c.onset_raw - first) / span)) for c in cs.chords)
    else:
        chords = tuple(replace(c, onset_norm=0.0) for c in cs.chords)
    return replace(cs, chords=chords)


def chordify(t: Transcription, p: ChordifyParams | None = None) -> ChordSequence:
    p = p or ChordifyParams()
    chords = []
    for group in group_chords(t, p):
        onset = sum(n.onset for n in group) / len(group)
        chords.append(Chord(frozenset(n.pitch % 12 for n in group), 0.0, onset, len(group)))
    return normalize_onsets(ChordSequence(t.id, tuple(chords), p))

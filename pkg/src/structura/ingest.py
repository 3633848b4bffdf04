"""Reading Standard MIDI Files and corpus manifests.

Byte-level event decoding is delegated to :mod:`mido`; everything that
decides what counts as a note (tempo map, note pairing, percussion
filtering, repair of unterminated notes) lives here.
"""
from __future__ import annotations

import io
import json
import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import mido

from .errors import (DuplicateId, EmptyTranscription, MalformedMidi,
                     ManifestParseError, MissingFile, StructuraError,
                     UnsupportedFormat)

logger = logging.getLogger(__name__)

DEFAULT_TEMPO = 500000  # µs per quarter note
PERCUSSION_CHANNEL = 9  # channel 10, zero-based


@dataclass(frozen=True, order=True)
class Note:
    onset: float
    pitch: int
    duration: float
    velocity: int = 64

    def __post_init__(self):
        if not self.onset >= 0:
            raise ValueError(f"negative onset {self.onset}")
        if not self.duration > 0:
            raise ValueError(f"non-positive duration {self.duration}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch out of range {self.pitch}")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity out of range {self.velocity}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass
class Transcription:
    """One performed rendition: notes sorted by (onset, pitch)."""

    id: str
    notes: list[Note]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.notes = sorted(self.notes, key=lambda n: (n.onset, n.pitch))

    def __len__(self):
        return len(self.notes)


@dataclass
class Corpus:
    pieces: dict[str, list[Transcription]]
    labels: dict[str, str] | None = None
    holdout: set[str] = field(default_factory=set)
    failures: dict[str, list[str]] = field(default_factory=dict)

    @property
    def unclusterable(self) -> list[str]:
        """Pieces holding fewer than two transcriptions."""
        return [pid for pid, ts in self.pieces.items() if len(ts) < 2]

    def transcription_ids(self) -> list[str]:
        return [t.id for ts in self.pieces.values() for t in ts]

    def piece_of(self, transcription_id: str) -> str:
        for pid, ts in self.pieces.items():
            if any(t.id == transcription_id for t in ts):
                return pid
        raise KeyError(transcription_id)

    def subset(self, piece_ids) -> "Corpus":
        keep = [p for p in self.pieces if p in set(piece_ids)]
        pieces = {p: self.pieces[p] for p in keep}
        labels = None
        if self.labels is not None:
            ids = {t.id for p in keep for t in pieces[p]}
            labels = {k: v for k, v in self.labels.items() if k in ids}
        return Corpus(pieces, labels, self.holdout & set(keep),
                      {p: f for p, f in self.failures.items() if p in keep})


class _TempoMap:
    """Piecewise-linear tick to seconds conversion."""

    def __init__(self, changes, ticks_per_beat):
        # changes: list of (tick, µs per quarter), sorted by tick
        self.ticks = [0]
        self.tempi = [DEFAULT_TEMPO]
        self.seconds = [0.0]
        self.tpb = ticks_per_beat
        for tick, tempo in changes:
            if tick == self.ticks[-1]:
                self.tempi[-1] = tempo
                continue
            self.seconds.append(self._at(tick))
            self.ticks.append(tick)
            self.tempi.append(tempo)

    def _at(self, tick):
        k = len(self.ticks) - 1
        return self.seconds[k] + (tick - self.ticks[k]) * self.tempi[k] / (1e6 * self.tpb)

    def __call__(self, tick):
        k = bisect_right(self.ticks, tick) - 1
        return self.seconds[k] + (tick - self.ticks[k]) * self.tempi[k] / (1e6 * self.tpb)


def _smpte_seconds(division):
    fps = 256 - (division >> 8)
    tpf = division & 0xFF
    if fps == 29:
        fps = 29.97
    if fps <= 0 or tpf == 0:
        raise MalformedMidi(f"invalid SMPTE division {division:#06x}")
    return lambda tick: tick / (fps * tpf)


def parse_midi(data: bytes, transcription_id: str = "") -> Transcription:
    """Parse SMF bytes into a :class:`Transcription`.

    All tracks are merged, channel 10 is dropped and note times are
    converted to seconds through the global tempo map. A note-on for a pitch
    that is still sounding closes the earlier note at the new onset. Notes
    left open at the end of their track are closed at the track's final
    event; each such repair is recorded in ``Transcription.warnings``.
    """
    try:
        mid = mido.MidiFile(file=io.BytesIO(data))
    except (OSError, EOFError, ValueError, KeyError, IndexError) as exc:
        raise MalformedMidi(str(exc) or type(exc).__name__) from exc
    if mid.type == 2:
        raise UnsupportedFormat("SMF type 2 (asynchronous tracks) is not supported")

    division = mid.ticks_per_beat
    tempo_changes = []
    tracks = []
    for k, track in enumerate(mid.tracks):
        tick = 0
        events = []
        for msg in track:
            tick += msg.time
            if msg.type == "set_tempo":
                tempo_changes.append((tick, k, msg.tempo))
            elif msg.type in ("note_on", "note_off"):
                events.append((tick, msg))
        tracks.append((events, tick))
    tempo_changes.sort(key=lambda c: (c[0], c[1]))

    if division & 0x8000:
        to_seconds = _smpte_seconds(division)
    else:
        if division == 0:
            raise MalformedMidi("division of zero ticks per quarter")
        to_seconds = _TempoMap([(t, v) for t, _, v in tempo_changes], division)

    warnings = []
    notes = []

    def close(start, end, pitch, velocity):
        on, off = to_seconds(start), to_seconds(end)
        if off <= on:
            warnings.append(f"dropped zero-length note pitch={pitch} tick={start}")
            return
        notes.append(Note(on, pitch, off - on, max(1, velocity)))

    for k, (events, end_tick) in enumerate(tracks):
        sounding = {}
        for tick, msg in events:
            if msg.channel == PERCUSSION_CHANNEL:
                continue
            key = (msg.channel, msg.note)
            if msg.type == "note_on" and msg.velocity > 0:
                if key in sounding:
                    start, vel = sounding.pop(key)
                    warnings.append(f"retrigger pitch={msg.note} tick={tick} track={k}")
                    close(start, tick, msg.note, vel)
                sounding[key] = (tick, msg.velocity)
            elif key in sounding:
                start, vel = sounding.pop(key)
                close(start, tick, msg.note, vel)
        for (channel, pitch), (start, vel) in sorted(sounding.items(), key=lambda kv: kv[1][0]):
            warnings.append(f"unclosed note pitch={pitch} tick={start} track={k} closed at tick={end_tick}")
            close(start, end_tick, pitch, vel)

    if not notes:
        raise EmptyTranscription(f"no resolvable notes in {transcription_id or 'input'}")
    return Transcription(transcription_id, notes, warnings)


def _resolve(base: Path, path: str) -> Path:
    # manifest paths use forward slashes; relative ones hang off the manifest directory
    p = Path(path)
    return p if p.is_absolute() else base / Path(*path.split("/"))


def read_midi(path, transcription_id: str | None = None) -> Transcription:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    return parse_midi(path.read_bytes(), transcription_id or path.stem)


def read_manifest(manifest) -> list[dict]:
    """Validate a manifest file and return its entries with resolved paths."""
    manifest = Path(manifest)
    if not manifest.is_file():
        raise MissingFile(str(manifest))
    try:
        entries = json.loads(manifest.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{manifest}: {exc}") from exc
    if not isinstance(entries, list):
        raise ManifestParseError(f"{manifest}: top level must be a JSON array")

    out = []
    seen = set()
    for n, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ManifestParseError(f"entry {n} is not an object")
        for key in ("piece_id", "transcription_id", "path"):
            if not isinstance(entry.get(key), str) or not entry[key]:
                raise ManifestParseError(f"entry {n}: {key!r} must be a non-empty string")
        label = entry.get("group_label")
        if label is not None and not isinstance(label, str):
            raise ManifestParseError(f"entry {n}: group_label must be a string or null")
        holdout = entry.get("holdout", False)
        if not isinstance(holdout, bool):
            raise ManifestParseError(f"entry {n}: holdout must be a boolean")
        tid = entry["transcription_id"]
        if tid in seen:
            raise DuplicateId(tid)
        seen.add(tid)
        out.append({
            "piece_id": entry["piece_id"],
            "transcription_id": tid,
            "path": _resolve(manifest.parent, entry["path"]),
            "group_label": label,
            "holdout": holdout,
        })
    return out


def load_corpus(manifest, strict: bool = True) -> Corpus:
    """Load every transcription listed in a manifest.

    With ``strict=False`` a MIDI file that fails to parse is recorded in
    ``Corpus.failures`` under its piece instead of aborting the load.
    Missing files always raise.
    """
    entries = read_manifest(manifest)
    pieces: dict[str, list[Transcription]] = {}
    labels = {}
    holdout = set()
    failures: dict[str, list[str]] = {}
    for e in entries:
        pid, tid = e["piece_id"], e["transcription_id"]
        pieces.setdefault(pid, [])
        if not e["path"].is_file():
            raise MissingFile(str(e["path"]))
        try:
            t = read_midi(e["path"], tid)
        except StructuraError as exc:
            if strict:
                raise
            logger.warning("piece %s: skipping %s (%s)", pid, tid, exc)
            failures.setdefault(pid, []).append(f"{tid}: {exc}")
            continue
        for w in t.warnings:
            logger.debug("%s: %s", tid, w)
        pieces[pid].append(t)
        if e["group_label"] is not None:
            labels[tid] = e["group_label"]
        if e["holdout"]:
            holdout.add(pid)
    for pid in pieces:
        if len(pieces[pid]) < 2:
            logger.info("piece %s has %d transcription(s); marked unclusterable", pid, len(pieces[pid]))
    return Corpus(pieces, labels or None, holdout, failures)

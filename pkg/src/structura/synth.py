"""Synthetic corpora with planted structural variants.

Randomness comes from Philox4x64-10 (``numpy.random.Philox``) keyed with
``[seed, perf_seed]`` and read through :meth:`random_raw`, so the stream is
independent of numpy's distribution code. Derived draws:

* uniform in [0, 1): ``(word >> 11) * 2**-53``
* standard normal: Box-Muller on two uniforms, cosine branch only
* integer in [lo, hi]: ``lo + floor(u * (hi - lo + 1))``
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import mido
import numpy as np

from ._io import write_atomic
from .errors import InvalidSpec
from .ingest import Corpus, Note, Transcription

TICKS_PER_BEAT = 480
MIDI_TEMPO = 500000
TICK = MIDI_TEMPO / 1e6 / TICKS_PER_BEAT  # seconds per tick
INSERT_WINDOW = 0.04  # spurious notes land within this many seconds of a real onset
INSERT_PITCH_RANGE = (36, 96)
VELOCITY = 80


class PhiloxStream:
    """Pinned uniform/normal/integer draws on top of Philox4x64-10."""

    def __init__(self, seed: int, perf_seed: int = 0):
        key = [seed & 0xFFFFFFFFFFFFFFFF, perf_seed & 0xFFFFFFFFFFFFFFFF]
        self._bits = np.random.Philox(key=key, counter=0)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        word = int(self._bits.random_raw())
        return lo + (hi - lo) * ((word >> 11) * 2.0 ** -53)

    def normal(self, sd: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return sd * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def integer(self, lo: int, hi: int) -> int:
        return lo + int(self.uniform() * (hi - lo + 1))


@dataclass(frozen=True)
class StructureVariant:
    variant_id: str
    section_order: tuple[str, ...]

    def __post_init__(self):
        if not self.section_order:
            raise InvalidSpec(f"variant {self.variant_id!r} has an empty section order")


@dataclass(frozen=True)
class ChordEvent:
    beat: float
    pitches: tuple[int, ...]
    dur: float


@dataclass(frozen=True)
class Section:
    label: str
    length_beats: float
    events: tuple[ChordEvent, ...]


@dataclass(frozen=True)
class ScoreTemplate:
    piece_id: str
    sections: tuple[Section, ...]
    variants: tuple[StructureVariant, ...]
    tempo_bpm: float = 100.0

    def __post_init__(self):
        if not self.sections:
            raise InvalidSpec(f"template {self.piece_id!r} has no sections")
        labels = {s.label for s in self.sections}
        for v in self.variants:
            unknown = set(v.section_order) - labels
            if unknown:
                raise InvalidSpec(f"variant {v.variant_id!r} uses unknown sections {sorted(unknown)}")

    def section(self, label) -> Section:
        return next(s for s in self.sections if s.label == label)

    def variant(self, variant_id) -> StructureVariant:
        for v in self.variants:
            if v.variant_id == variant_id:
                return v
        raise InvalidSpec(f"template {self.piece_id!r} has no variant {variant_id!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreTemplate":
        try:
            sections = tuple(
                Section(s["label"], float(s["length_beats"]),
                        tuple(ChordEvent(float(e["beat"]), tuple(int(p) for p in e["pitches"]),
                                         float(e.get("dur", 1.0))) for e in s["events"]))
                for s in d["sections"])
            variants = tuple(StructureVariant(v["variant_id"], tuple(v["section_order"]))
                             for v in d["variants"])
            return cls(d["piece_id"], sections, variants, float(d.get("tempo_bpm", 100.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed template: {exc}") from exc


def builtin_templates() -> list[str]:
    root = resources.files("structura") / "templates"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_template(name_or_path) -> ScoreTemplate:
    """Load a built-in template by name, or a template JSON file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("structura") / "templates" / f"{name_or_path}.json"
        if not res.is_file():
            raise InvalidSpec(f"unknown template {name_or_path!r}; built-ins: {builtin_templates()}")
        text = res.read_text(encoding="utf-8")
    return ScoreTemplate.from_dict(json.loads(text))


@dataclass(frozen=True)
class ArtifactModel:
    p_miss: float = 0.0
    p_insert: float = 0.0
    onset_jitter_sd: float = 0.0
    tempo_range: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("p_miss", "p_insert"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise InvalidSpec(f"{name} must lie in [0, 1), got {v}")
        if self.onset_jitter_sd < 0:
            raise InvalidSpec("onset_jitter_sd must be non-negative")
        lo, hi = self.tempo_range
        if not 0 < lo <= hi:
            raise InvalidSpec(f"tempo_range needs 0 < min <= max, got {self.tempo_range}")

    @property
    def drift(self) -> float:
        """Half-width of the per-section tempo factor around 1."""
        lo, hi = self.tempo_range
        return (hi - lo) / 4

    @classmethod
    def from_dict(cls, d: dict, seed: int = 0) -> "ArtifactModel":
        d = dict(d)
        if "tempo_range" in d:
            d["tempo_range"] = tuple(float(x) for x in d["tempo_range"])
        d.setdefault("seed", seed)
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(f"bad artifact model: {exc}") from exc


def _timeline(t: ScoreTemplate, v: StructureVariant):
    """(absolute beat, section index, beat within section, event) in play order."""
    out = []
    offset = 0.0
    for k, label in enumerate(v.section_order):
        sec = t.section(label)
        for e in sec.events:
            out.append((offset + e.beat, k, e.beat / sec.length_beats, e))
        offset += sec.length_beats
    return out


def render_performance(t: ScoreTemplate, v: StructureVariant, a: ArtifactModel,
                       perf_seed: int, transcription_id: str | None = None) -> Transcription:
    rng = PhiloxStream(a.seed, perf_seed)
    seconds_per_beat = 60.0 / t.tempo_bpm
    g = rng.uniform(*a.tempo_range)
    drift = [rng.uniform(1 - a.drift, 1 + a.drift) for _ in v.section_order]

    def factor(section, frac):
        # linear glide from the previous section's factor to this one's
        start = drift[section - 1] if section else drift[0]
        return g * (start + (drift[section] - start) * frac)

    timeline = _timeline(t, v)
    notes = []
    clock = 0.0
    prev_beat = 0.0
    prev_factor = factor(0, 0.0)
    for beat, section, frac, event in timeline:
        clock += (beat - prev_beat) * seconds_per_beat / prev_factor
        prev_beat = beat
        prev_factor = factor(section, frac)
        for pitch in event.pitches:
            if a.p_miss and rng.uniform() < a.p_miss:
                continue
            onset = clock + (rng.normal(a.onset_jitter_sd) if a.onset_jitter_sd else 0.0)
            notes.append([max(0.0, onset), pitch, event.dur * seconds_per_beat / prev_factor])
            if a.p_insert and rng.uniform() < a.p_insert:
                notes.append([max(0.0, clock + rng.uniform(-INSERT_WINDOW, INSERT_WINDOW)),
                              rng.integer(*INSERT_PITCH_RANGE), 0.1])

    tid = transcription_id or f"{t.piece_id}-{v.variant_id}-{perf_seed}"
    return Transcription(tid, _playable(notes))


def _playable(raw) -> list[Note]:
    """Snap to the MIDI tick grid and keep same-pitch notes from overlapping.

    This makes a rendering survive a round trip through a MIDI file intact.
    """
    raw = sorted(((round(on / TICK), p, max(2, round(d / TICK))) for on, p, d in raw),
                 key=lambda n: (n[0], n[1]))
    last_on = {}
    keep = []
    for on, p, d in raw:
        if p in last_on and on - last_on[p][0] < 2:
            continue
        if p in last_on:
            prev = last_on[p]
            prev[2] = min(prev[2], on - prev[0])
        entry = [on, p, d]
        last_on[p] = entry
        keep.append(entry)
    return [Note(on * TICK, p, d * TICK, VELOCITY) for on, p, d in keep]


def to_midi_bytes(t: Transcription) -> bytes:
    """Encode a transcription as SMF format 0 at 480 tpq and 120 bpm."""
    events = []
    for n in t.notes:
        on = round(n.onset / TICK)
        off = max(on + 1, round(n.offset / TICK))
        events.append((off, 0, n.pitch, 0))
        events.append((on, 1, n.pitch, n.velocity))
    events.sort()
    track = mido.MidiTrack()
    track.append(mido.MetaMessage("set_tempo", tempo=MIDI_TEMPO, time=0))
    now = 0
    for tick, kind, pitch, vel in events:
        msg = "note_on" if kind else "note_off"
        track.append(mido.Message(msg, note=pitch, velocity=vel if kind else 0, time=tick - now))
        now = tick
    track.append(mido.MetaMessage("end_of_track", time=0))
    mid = mido.MidiFile(type=0, ticks_per_beat=TICKS_PER_BEAT)
    mid.tracks.append(track)
    buf = io.BytesIO()
    mid.save(file=buf)
    return buf.getvalue()


@dataclass
class CorpusSpec:
    pieces: list[dict]
    artifacts: ArtifactModel = field(default_factory=ArtifactModel)
    performances_per_variant: int = 4
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        if not isinstance(d, dict) or not d.get("pieces"):
            raise InvalidSpec("corpus spec needs a non-empty 'pieces' list")
        seed = int(d.get("seed", 0))
        return cls([p if isinstance(p, dict) else {"template": p} for p in d["pieces"]],
                   ArtifactModel.from_dict(d.get("artifacts", {}), seed),
                   int(d.get("performances_per_variant", 4)), seed)


def generate_corpus(spec: CorpusSpec | dict, out_dir) -> tuple[Corpus, Path]:
    """Render every (piece, variant, performance), write MIDI files and a manifest.

    Each piece entry names a template (built-in name, JSON path, or inline
    dict) and may restrict ``variants``, override
    ``performances_per_variant`` or set ``holdout``. Performances of a
    piece are interleaved across variants and numbered ``<piece>-pNN``.
    """
    if isinstance(spec, dict):
        spec = CorpusSpec.from_dict(spec)
    out_dir = Path(out_dir)

    plan = []
    for k, entry in enumerate(spec.pieces):
        src = entry.get("template")
        template = ScoreTemplate.from_dict(src) if isinstance(src, dict) else load_template(src)
        if "piece_id" in entry:
            template = ScoreTemplate(entry["piece_id"], template.sections, template.variants, template.tempo_bpm)
        variants = [template.variant(vid) for vid in entry.get("variants", [v.variant_id for v in template.variants])]
        count = int(entry.get("performances_per_variant", spec.performances_per_variant))
        if count < 1 or not variants:
            raise InvalidSpec(f"piece {template.piece_id!r} would have no performances")
        plan.append((k, template, variants, count, bool(entry.get("holdout", False))))
    if len({t.piece_id for _, t, _, _, _ in plan}) != len(plan):
        raise InvalidSpec("duplicate piece ids in corpus spec")

    manifest = []
    pieces = {}
    labels = {}
    holdout = set()
    for k, template, variants, count, held in plan:
        piece_dir = out_dir / template.piece_id
        piece_dir.mkdir(parents=True, exist_ok=True)
        pieces[template.piece_id] = []
        serial = 0
        for r in range(count):
            for vi, variant in enumerate(variants):
                tid = f"{template.piece_id}-p{serial:02d}"
                perf_seed = k * 1_000_000 + vi * 1_000 + r
                t = render_performance(template, variant, spec.artifacts, perf_seed, tid)
                write_atomic(piece_dir / f"{tid}.mid", to_midi_bytes(t))
                pieces[template.piece_id].append(t)
                labels[tid] = variant.variant_id
                manifest.append({"piece_id": template.piece_id, "transcription_id": tid,
                                 "path": f"{template.piece_id}/{tid}.mid",
                                 "group_label": variant.variant_id, "holdout": held})
                serial += 1
        if held:
            holdout.add(template.piece_id)
    manifest_path = out_dir / "manifest.json"
    write_atomic(manifest_path, (json.dumps(manifest, indent=1) + "\n").encode())
    return Corpus(pieces, labels, holdout), manifest_path

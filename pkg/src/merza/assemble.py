"""Glue between the learned policy and the generated strings: builds the
executable TidalCycles code lines, the Suggestion records the session
service hands out, and the normalized-weights exchange file.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .affect import (
    AffectCoordinate,
    ContourParams,
    LoudnessParams,
    clamp,
    loudness_range,
    mode_for_valence,
)
from .mininotation import (
    DEFAULT_MELODY_BANK,
    DEFAULT_RHYTHM_BANKS,
    Note,
    Pattern,
    RhythmGenConfig,
    Group,
    Term,
    assign_samples,
    generate_melody,
    generate_rhythm,
    parse,
)
from .qlearn import LOUDNESS_BINS, QTable, greedy_policy

WEIGHTS_VERSION = "merza-weights/1"

_CONNECTION = re.compile(r"^d[1-9]$")


def db_to_gain(db: float, ceiling: float = 1.5) -> float:
    """Decibels to Tidal's linear gain, clamped to [0, ceiling]. The
    default ceiling of 1.5 is the customary safe maximum."""
    return clamp(10.0 ** (db / 20.0), 0.0, ceiling)


@dataclass(frozen=True)
class AssembleConfig:
    bank: str = "saw"
    melody_connection: str = "d1"
    rhythm_connection: str = "d2"

    def __post_init__(self):
        for conn in (self.melody_connection, self.rhythm_connection):
            if not _CONNECTION.match(conn):
                raise ValueError(f"connection must be d1..d9, got {conn!r}")


@dataclass(frozen=True)
class Suggestion:
    """An assembled piece of code awaiting the performer's verdict."""

    id: str
    code: str
    coords: AffectCoordinate
    seed: int
    loudness_db: float
    pitch_register: int
    mode: str


def suggestion_id(coords: AffectCoordinate, seed: int) -> str:
    digest = hashlib.sha256(f"{coords.valence!r}:{coords.arousal!r}:{seed}".encode())
    return digest.hexdigest()[:12]


def _degree_terms(terms) -> tuple:
    out = []
    for t in terms:
        if isinstance(t.atom, Group):
            out.append(Term(Group(_degree_terms(t.atom.terms)), t.repeat, t.elongate))
        elif isinstance(t.atom, Note):
            name = t.atom.name if t.atom.index is None else str(t.atom.index)
            out.append(Term(Note(name), t.repeat, t.elongate))
        else:
            out.append(t)
    return tuple(out)


def melody_degree_string(melody: str) -> str:
    """Strip bank names from a melody string, keeping the degrees and
    all timing structure: "~ saw:4 saw:6*2" becomes "~ 4 6*2"."""
    return str(Pattern(_degree_terms(parse(melody).terms)))


def assemble(
    policy_out: tuple[float, int],
    rhythm: str,
    melody: str,
    cfg: AssembleConfig,
    *,
    coords: AffectCoordinate,
    seed: int,
) -> Suggestion:
    """Build the two code lines for a generation run.

    Both strings must parse; a ParseError propagates to the caller. The
    melody line plays scale degrees through the configured bank with the
    learned register and gain, the rhythm line plays the sample pattern
    at the same gain.
    """
    parse(rhythm)
    loudness_db, register = policy_out
    gain = db_to_gain(loudness_db)
    degrees = melody_degree_string(melody)
    code = (
        f'{cfg.melody_connection} $ n "{degrees}" '
        f'# sound "{cfg.bank}" # note {register} # gain {gain:.2f}\n'
        f'{cfg.rhythm_connection} $ sound "{rhythm}" # gain {gain:.2f}'
    )
    return Suggestion(
        id=suggestion_id(coords, seed),
        code=code,
        coords=coords,
        seed=seed,
        loudness_db=loudness_db,
        pitch_register=register,
        mode=mode_for_valence(coords.valence),
    )


@dataclass
class WeightsFile:
    """The exchange document other pattern models can consume: for each
    Tidal function a list of (value, weight) tuples, the generated
    strings, and enough provenance to regenerate them."""

    gain: list[tuple[float, float]]
    note: list[tuple[int, float]]
    patterns: list[str]
    valence: float
    arousal: float
    seed: int
    version: str = WEIGHTS_VERSION


def _smoothed_onehot(n: int, chosen: int) -> list[float]:
    base = 0.1 / n
    return [base + 0.9 if i == chosen else base for i in range(n)]


def build_weights(
    policy_out: tuple[float, int],
    strings: list[str],
    *,
    coords: AffectCoordinate,
    seed: int,
    params: LoudnessParams = LoudnessParams(),
) -> WeightsFile:
    loudness_db, register = policy_out
    r = loudness_range(coords, params)
    centers = [r.lo + (b + 0.5) * r.width / LOUDNESS_BINS for b in range(LOUDNESS_BINS)]
    chosen = min(range(LOUDNESS_BINS), key=lambda b: abs(centers[b] - loudness_db))
    gain_weights = _smoothed_onehot(LOUDNESS_BINS, chosen)
    gain = [(db_to_gain(c), w) for c, w in zip(centers, gain_weights)]
    note_weights = _smoothed_onehot(25, register + 12)
    note = [(value - 12, w) for value, w in enumerate(note_weights)]
    return WeightsFile(
        gain=gain,
        note=note,
        patterns=list(strings),
        valence=coords.valence,
        arousal=coords.arousal,
        seed=seed,
    )


def write_weights_file(
    policy_out: tuple[float, int],
    strings: list[str],
    path,
    *,
    coords: AffectCoordinate,
    seed: int,
    params: LoudnessParams = LoudnessParams(),
) -> WeightsFile:
    """Build and serialize the weights document. Serialization is sorted
    and indented JSON with a trailing newline, so identical inputs give
    byte-identical files."""
    wf = build_weights(policy_out, strings, coords=coords, seed=seed, params=params)
    doc = {
        "version": wf.version,
        "gain": [[v, w] for v, w in wf.gain],
        "note": [[v, w] for v, w in wf.note],
        "patterns": wf.patterns,
        "provenance": {"valence": wf.valence, "arousal": wf.arousal, "seed": wf.seed},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return wf


def read_weights_file(path) -> WeightsFile:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weights file version {doc.get('version')!r}")
    for entry in ("gain", "note"):
        total = sum(w for _, w in doc[entry])
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{entry} weights sum to {total}, expected 1")
    prov = doc["provenance"]
    return WeightsFile(
        gain=[(float(v), float(w)) for v, w in doc["gain"]],
        note=[(int(v), float(w)) for v, w in doc["note"]],
        patterns=list(doc["patterns"]),
        valence=float(prov["valence"]),
        arousal=float(prov["arousal"]),
        seed=int(prov["seed"]),
    )


def build_suggestion(
    table: QTable,
    coords: AffectCoordinate,
    seed: int,
    *,
    params: LoudnessParams = LoudnessParams(),
    gen_cfg: RhythmGenConfig = RhythmGenConfig(),
    assemble_cfg: AssembleConfig = AssembleConfig(),
    contour: ContourParams = ContourParams(),
    melody_bank=DEFAULT_MELODY_BANK,
    rhythm_banks=DEFAULT_RHYTHM_BANKS,
    per_slot_samples: bool = False,
) -> tuple[Suggestion, str, str]:
    """The whole generation pipeline for one coordinate and seed: query
    the policy, generate rhythm and melody off one seeded rng, assemble.
    Returns (suggestion, melody string, rhythm string); identical inputs
    give identical outputs.
    """
    policy_out = greedy_policy(table, coords, params)
    rng = np.random.default_rng(seed)
    skeleton = generate_rhythm(coords.arousal, gen_cfg, rng)
    rhythm = assign_samples(skeleton, rhythm_banks, rng, per_slot=per_slot_samples)
    melody = generate_melody(coords.valence, coords.arousal, melody_bank, gen_cfg, rng, contour)
    suggestion = assemble(policy_out, rhythm, melody, assemble_cfg, coords=coords, seed=seed)
    return suggestion, melody, rhythm

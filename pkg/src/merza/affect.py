"""Mappings from valence-arousal coordinates to musical control parameters.

Both coordinates live on [-1, 1]. Arousal drives energy-like qualities
(loudness headroom, rhythmic density), valence drives pleasantness-like
qualities (register, mode brightness, melodic direction). Everything in
here is a pure function so the learning agent and the generators can
share one source of truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LOUDNESS_FLOOR_DB = -18.0

# Diatonic modes ordered bright to dark. Degrees are semitone offsets
# from the root across one octave, eight entries so a melody can land on
# the octave itself.
MODES = {
    "lydian": [0, 2, 4, 6, 7, 9, 11, 12],
    "ionian": [0, 2, 4, 5, 7, 9, 11, 12],
    "mixolydian": [0, 2, 4, 5, 7, 9, 10, 12],
    "dorian": [0, 2, 3, 5, 7, 9, 10, 12],
    "aeolian": [0, 2, 3, 5, 7, 8, 10, 12],
    "phrygian": [0, 1, 3, 5, 7, 8, 10, 12],
    "locrian": [0, 1, 3, 5, 6, 8, 10, 12],
}

MODE_NAMES = list(MODES)


def clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero.

    Python's round() goes to even on ties, which would make the register
    mapping asymmetric between positive and negative valence.
    """
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


@dataclass(frozen=True)
class AffectCoordinate:
    """A point in the valence-arousal plane, clamped to the unit square."""

    valence: float
    arousal: float

    def __post_init__(self):
        v = float(self.valence)
        a = float(self.arousal)
        if math.isnan(v) or math.isnan(a):
            raise ValueError("affect coordinate must not be NaN")
        object.__setattr__(self, "valence", clamp(v, -1.0, 1.0))
        object.__setattr__(self, "arousal", clamp(a, -1.0, 1.0))


@dataclass(frozen=True)
class LoudnessParams:
    """Gains for the loudness headroom model.

    The usable loudness span above the floor grows with arousal at rate
    arousal_gain and is nudged by valence at rate valence_gain.
    """

    floor_db: float = LOUDNESS_FLOOR_DB
    arousal_gain: float = 9.0
    valence_gain: float = 3.0

    def __post_init__(self):
        for name in ("floor_db", "arousal_gain", "valence_gain"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class LoudnessRange:
    """A closed dB interval [lo, hi] with lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("loudness bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"inverted loudness range [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def midpoint(self) -> float:
        return self.lo + self.width / 2.0


@dataclass(frozen=True)
class ContourParams:
    """Shape of the melodic step kernel.

    interval_scale is the e-folding distance in semitones: steps of about
    this size stay likely, larger leaps decay exponentially.
    """

    interval_scale: float = 4.0

    def __post_init__(self):
        if not (math.isfinite(self.interval_scale) and self.interval_scale > 0):
            raise ValueError("interval_scale must be positive and finite")


def loudness_range(c: AffectCoordinate, p: LoudnessParams = LoudnessParams()) -> LoudnessRange:
    """Usable loudness interval for a coordinate.

    The span away from the floor is arousal_gain * arousal +
    valence_gain * valence. A negative span opens the interval downward
    instead of upward, so low-arousal coordinates sit below the floor
    rather than collapsing onto it.
    """
    span = p.arousal_gain * c.arousal + p.valence_gain * c.valence
    if span >= 0:
        return LoudnessRange(p.floor_db, p.floor_db + span)
    return LoudnessRange(p.floor_db + span, p.floor_db)


def sample_loudness(r: LoudnessRange, rng) -> float:
    """Uniform draw from the range; degenerate ranges return the floor."""
    if r.width == 0:
        return r.lo
    return r.lo + rng.random() * r.width


def pitch_register(c: AffectCoordinate) -> int:
    """Semitone transposition of the melodic register, in [-12, 12].

    Positive valence maps straight onto register height. Non-positive
    valence splits on arousal: agitated-unpleasant states sit at
    (a - v) / 2 octave fractions, calm-unpleasant states at (a + v) / 2,
    so sadness sinks and anger stays mid-high.
    """
    v, a = c.valence, c.arousal
    if v > 0:
        frac = v
    elif a >= 0:
        frac = (a - v) / 2.0
    else:
        frac = (a + v) / 2.0
    return round_half_away(frac * 12.0)


def mode_for_valence(v: float) -> str:
    """Pick a diatonic mode, brighter for pleasant, darker for unpleasant.

    The index 3 - 3.5v walks the bright-to-dark mode list; v = 1 reaches
    lydian, v = -1 reaches locrian, v = 0 lands on dorian in the middle.
    """
    idx = clamp(round_half_away(3.0 - 3.5 * float(v)), 0, len(MODE_NAMES) - 1)
    return MODE_NAMES[idx]


def rest_probability(arousal: float, n: int) -> float:
    """Probability that a generated slot stays silent.

    (1 - a)^(n + 1) / 2, clamped to [0, 1]. At a = -1 everything rests,
    at a = 1 nothing does. n is a nonnegative roughness argument; the
    rhythm generator passes the current nesting depth by default, so
    nested groups thin out faster when arousal is low.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return clamp((1.0 - float(arousal)) ** (n + 1) / 2.0, 0.0, 1.0)


def contour_distribution(
    v: float,
    i: int,
    degrees: list[int],
    p: ContourParams = ContourParams(),
) -> list[float]:
    """Step distribution over target degree indices for a melody at degree i.

    Each candidate j != i gets weight direction(j) * exp(-|deltaK| / s)
    where deltaK is the semitone interval degrees[j] - degrees[i], s is
    p.interval_scale, and direction is (1 + v) / 2 for upward motion and
    (1 - v) / 2 for downward. The result is normalised to sum to 1 and
    returned as a full-length vector with entry i fixed at 0.

    At v = +/-1 an edge degree can zero out every candidate; the kernel
    alone then decides, keeping the walk alive instead of dividing by
    zero.
    """
    n = len(degrees)
    if not 0 <= i < n:
        raise ValueError(f"degree index {i} out of range for {n} degrees")
    up = (1.0 + float(v)) / 2.0
    down = (1.0 - float(v)) / 2.0
    weights = [0.0] * n
    for j in range(n):
        if j == i:
            continue
        interval = degrees[j] - degrees[i]
        kernel = math.exp(-abs(interval) / p.interval_scale)
        weights[j] = (up if interval > 0 else down) * kernel
    total = sum(weights)
    if total == 0.0:
        for j in range(n):
            if j != i:
                weights[j] = math.exp(-abs(degrees[j] - degrees[i]) / p.interval_scale)
        total = sum(weights)
    return [w / total for w in weights]

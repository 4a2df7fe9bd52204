"""TidalCycles mini-notation: a parser for the subset we generate, exact
cycle-time flattening, and the affect-driven rhythm and melody generators.

Grammar subset: whitespace-separated terms; a term is "~" (rest), a
sample name with an optional ":index", or a bracketed group, with at
most one trailing "*k" (repeat) or "@k" (elongate) modifier. Polymeter,
alternation and the other exotic operators are out of scope.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from .affect import (
    MODES,
    ContourParams,
    contour_distribution,
    mode_for_valence,
    rest_probability,
)

NAME_CHARS = set(string.ascii_letters + string.digits + "_")


class ParseError(ValueError):
    """Raised on malformed mini-notation, with the byte offset at fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Rest:
    pass


@dataclass(frozen=True)
class Note:
    name: str
    index: int | None = None


@dataclass(frozen=True)
class Group:
    terms: tuple["Term", ...]


@dataclass(frozen=True)
class Term:
    atom: Rest | Note | Group
    repeat: int = 1
    elongate: int = 1


@dataclass(frozen=True)
class Pattern:
    terms: tuple[Term, ...]

    def __str__(self) -> str:
        return " ".join(_term_str(t) for t in self.terms)


@dataclass(frozen=True)
class Event:
    """A sounding slot placed in cycle time. Fractions, never floats."""

    name: str
    index: int | None
    onset: Fraction
    duration: Fraction


def _atom_str(atom) -> str:
    if isinstance(atom, Rest):
        return "~"
    if isinstance(atom, Note):
        return atom.name if atom.index is None else f"{atom.name}:{atom.index}"
    return "[" + " ".join(_term_str(t) for t in atom.terms) + "]"


def _term_str(t: Term) -> str:
    s = _atom_str(t.atom)
    if t.repeat > 1:
        s += f"*{t.repeat}"
    if t.elongate > 1:
        s += f"@{t.elongate}"
    return s


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else None

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse_terms(self, closing: str | None) -> list[Term]:
        terms = []
        self.skip_ws()
        while True:
            c = self.peek()
            if c is None or c == closing:
                return terms
            terms.append(self.parse_term())
            self.skip_ws()

    def parse_term(self) -> Term:
        c = self.peek()
        if c == "[":
            open_at = self.pos
            self.pos += 1
            inner = self.parse_terms("]")
            if self.peek() != "]":
                raise ParseError("unbalanced '['", open_at)
            if not inner:
                raise ParseError("empty group", open_at)
            self.pos += 1
            atom = Group(tuple(inner))
        elif c == "~":
            self.pos += 1
            atom = Rest()
        elif c in NAME_CHARS:
            atom = self.parse_note()
        else:
            raise ParseError(f"unexpected character {c!r}", self.pos)
        return self.parse_modifier(atom)

    def parse_note(self) -> Note:
        start = self.pos
        while self.peek() in NAME_CHARS:
            self.pos += 1
        name = self.text[start:self.pos]
        index = None
        if self.peek() == ":":
            self.pos += 1
            index = self.parse_int("sample index")
        return Note(name, index)

    def parse_modifier(self, atom) -> Term:
        repeat = 1
        elongate = 1
        c = self.peek()
        if c in ("*", "@"):
            self.pos += 1
            at = self.pos
            factor = self.parse_int("factor")
            if factor < 1:
                raise ParseError(f"factor must be >= 1, got {factor}", at)
            if c == "*":
                repeat = factor
            else:
                elongate = factor
            if self.peek() in ("*", "@"):
                raise ParseError("at most one modifier per term", self.pos)
        return Term(atom, repeat, elongate)

    def parse_int(self, what: str) -> int:
        start = self.pos
        while self.peek() is not None and self.peek().isdigit():
            self.pos += 1
        if self.pos == start:
            raise ParseError(f"expected {what}", start)
        return int(self.text[start:self.pos])


def parse(text: str) -> Pattern:
    """Parse mini-notation text into a Pattern, or raise ParseError."""
    p = _Parser(text)
    terms = p.parse_terms(None)
    if p.pos < len(text):
        raise ParseError(f"unexpected character {text[p.pos]!r}", p.pos)
    if not terms:
        raise ParseError("empty pattern", 0)
    return Pattern(tuple(terms))


def _spans(terms, start: Fraction, duration: Fraction, out):
    total = sum(t.elongate for t in terms)
    at = start
    for t in terms:
        d = duration * Fraction(t.elongate, total)
        slice_d = d / t.repeat
        for k in range(t.repeat):
            s = at + k * slice_d
            if isinstance(t.atom, Group):
                _spans(t.atom.terms, s, slice_d, out)
            else:
                out.append((s, slice_d, t.atom))
        at += d


def cycle_spans(ast: Pattern):
    """Every atom (rests included) with its exact (onset, duration) slice
    of one cycle. Durations always sum to exactly 1."""
    out = []
    _spans(ast.terms, Fraction(0), Fraction(1), out)
    return out


def flatten_events(ast: Pattern) -> list[Event]:
    """Sounding events of one cycle, sorted by onset, rests dropped."""
    return [
        Event(atom.name, atom.index, onset, dur)
        for onset, dur, atom in cycle_spans(ast)
        if isinstance(atom, Note)
    ]


@dataclass(frozen=True)
class RhythmGenConfig:
    """Shape of generated rhythms.

    roughness_arg picks what feeds the rest-probability exponent:
    "depth" (nesting depth, the default), "position" (slot position in
    its sequence), or "length" (the sequence length).
    """

    length: int = 8
    max_depth: int = 2
    group_size: int = 2
    seed: int = 0
    roughness_arg: str = "depth"

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.roughness_arg not in ("depth", "position", "length"):
            raise ValueError(f"unknown roughness_arg {self.roughness_arg!r}")


@dataclass(frozen=True)
class SoundBank:
    name: str
    chromatic: bool = False
    size: int = 1

    def __post_init__(self):
        if not self.name:
            raise ValueError("bank name must be non-empty")
        if self.size < 1:
            raise ValueError("bank size must be >= 1")


DEFAULT_RHYTHM_BANKS = (
    SoundBank("bd", size=4),
    SoundBank("sd", size=4),
    SoundBank("hh", size=4),
    SoundBank("kick", size=4),
    SoundBank("808oh", size=4),
)

DEFAULT_MELODY_BANK = SoundBank("saw", chromatic=True, size=25)


def load_soundbanks(path) -> list[SoundBank]:
    """Read bank definitions from a JSON file: a list of objects with
    name, size and chromatic keys (size and chromatic optional)."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValueError("soundbank config must be a JSON list")
    banks = []
    for entry in raw:
        banks.append(
            SoundBank(
                entry["name"],
                chromatic=bool(entry.get("chromatic", False)),
                size=int(entry.get("size", 1)),
            )
        )
    return banks


def _roughness_n(cfg: RhythmGenConfig, depth: int, position: int, length: int) -> int:
    if cfg.roughness_arg == "depth":
        return depth
    if cfg.roughness_arg == "position":
        return position
    return length


def _gen_terms(a: float, cfg: RhythmGenConfig, rng, depth: int, length: int) -> tuple[Term, ...]:
    terms = []
    for slot in range(length):
        n = _roughness_n(cfg, depth, slot, length)
        if rng.random() < rest_probability(a, n):
            terms.append(Term(Rest()))
            continue
        # non-rest slot: pick a token kind, weights tilt with arousal
        kinds = ["hit", "repeat", "elongate"]
        weights = [1.0, (a + 1.0) / 2.0, (1.0 - a) / 2.0]
        if depth < cfg.max_depth:
            kinds.append("group")
            weights.append((a + 1.0) / 4.0)
        total = sum(weights)
        u = rng.random() * total
        acc = 0.0
        kind = kinds[-1]
        for k, w in zip(kinds, weights):
            acc += w
            if u < acc:
                kind = k
                break
        if kind == "hit":
            terms.append(Term(Note("1")))
        elif kind == "repeat":
            terms.append(Term(Note("1"), repeat=2))
        elif kind == "elongate":
            terms.append(Term(Note("1"), elongate=2))
        else:
            inner = _gen_terms(a, cfg, rng, depth + 1, cfg.group_size)
            terms.append(Term(Group(inner)))
    return tuple(terms)


def generate_rhythm(a: float, cfg: RhythmGenConfig, rng) -> Pattern:
    """Skeleton rhythm for arousal a: cfg.length top-level slots, each a
    rest or a placeholder hit named "1", possibly repeated, elongated or
    grouped. Substitute real samples with assign_samples."""
    if not -1.0 <= a <= 1.0:
        raise ValueError("arousal must be in [-1, 1]")
    return Pattern(_gen_terms(a, cfg, rng, 0, cfg.length))


def _substitute(terms, pick) -> tuple[Term, ...]:
    new = []
    for t in terms:
        if isinstance(t.atom, Group):
            new.append(replace(t, atom=Group(_substitute(t.atom.terms, pick))))
        elif isinstance(t.atom, Note):
            new.append(replace(t, atom=Note(pick(), t.atom.index)))
        else:
            new.append(t)
    return tuple(new)


def assign_samples(pattern: Pattern, banks, rng, per_slot: bool = False) -> str:
    """Replace every placeholder hit with a sample name.

    banks is one SoundBank or a sequence of them. By default one bank is
    drawn for the whole pattern; per_slot=True draws independently for
    each sounding slot instead.
    """
    if isinstance(banks, SoundBank):
        banks = [banks]
    else:
        banks = list(banks)
    if not banks:
        raise ValueError("no sound banks to draw from")
    if per_slot:
        pick = lambda: banks[int(rng.integers(len(banks)))].name
    else:
        name = banks[int(rng.integers(len(banks)))].name
        pick = lambda: name
    return str(Pattern(_substitute(pattern.terms, pick)))


def generate_melody(
    v: float,
    a: float,
    bank: SoundBank,
    cfg: RhythmGenConfig,
    rng,
    contour: ContourParams = ContourParams(),
) -> str:
    """Melody string for a coordinate: the rhythm skeleton of a supplies
    the timing, the mode of v supplies the pitch degrees, and the contour
    distribution walks between them. Sounding slots come out as
    "name:degree" with every degree in the chosen mode's set.
    """
    if not bank.chromatic:
        raise ValueError(f"bank {bank.name!r} is not chromatic")
    if bank.size < 13:
        raise ValueError("chromatic bank needs at least 13 samples for one octave")
    skeleton = generate_rhythm(a, cfg, rng)
    degrees = MODES[mode_for_valence(v)]
    state = {"i": None}

    def next_degree() -> int:
        if state["i"] is None:
            state["i"] = int(rng.integers(len(degrees)))
        else:
            probs = contour_distribution(v, state["i"], degrees, contour)
            u = rng.random()
            acc = 0.0
            nxt = len(probs) - 1
            for j, p in enumerate(probs):
                acc += p
                if u < acc:
                    nxt = j
                    break
            state["i"] = nxt
        return degrees[state["i"]]

    def walk(terms) -> tuple[Term, ...]:
        new = []
        for t in terms:
            if isinstance(t.atom, Group):
                new.append(replace(t, atom=Group(walk(t.atom.terms))))
            elif isinstance(t.atom, Note):
                new.append(replace(t, atom=Note(bank.name, next_degree())))
            else:
                new.append(t)
        return tuple(new)

    return str(Pattern(walk(skeleton.terms)))

"""Tabular Q-learning over the discretized valence-arousal plane.

States are the 100 cells of a 10x10 grid over [-1,1]^2. Actions pair a
loudness bin with a pitch bin, 25 of each, 625 in total. The reward
pushes the greedy action towards the loudness interval and pitch
register the affect mappings prescribe for the state's cell center.

Q-learning algorithm, per step:
    1. pick an action by the epsilon-greedy rule
    2. observe reward r against the state's targets
    3. Q(s,x) <- Q(s,x) + alpha * (r + gamma * max Q(s',.) - Q(s,x))
The state is held fixed within an episode (a musical action does not
move the performer's affect target) and redrawn uniformly per episode.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .affect import (
    AffectCoordinate,
    LoudnessParams,
    LoudnessRange,
    loudness_range,
    pitch_register,
    sample_loudness,
)

STATE_BINS = 10
N_STATES = STATE_BINS * STATE_BINS
LOUDNESS_BINS = 25
PITCH_BINS = 25
N_ACTIONS = LOUDNESS_BINS * PITCH_BINS

POLICY_MAGIC = "merza-policy/1"


def discretize_state(c: AffectCoordinate) -> int:
    """State index 10 * v_bin + a_bin, each axis cut into 10 bins.

    Multiplying by 5 instead of dividing by 0.2 keeps the bin edges
    exact in floating point.
    """
    v_bin = min(STATE_BINS - 1, int((c.valence + 1.0) * 5.0))
    a_bin = min(STATE_BINS - 1, int((c.arousal + 1.0) * 5.0))
    return STATE_BINS * v_bin + a_bin


def state_center(s: int) -> AffectCoordinate:
    """Coordinate at the center of state cell s."""
    if not 0 <= s < N_STATES:
        raise ValueError(f"state index {s} out of range")
    v_bin, a_bin = divmod(s, STATE_BINS)
    return AffectCoordinate(-1.0 + (v_bin + 0.5) / 5.0, -1.0 + (a_bin + 0.5) / 5.0)


def split_action(x: int) -> tuple[int, int]:
    if not 0 <= x < N_ACTIONS:
        raise ValueError(f"action index {x} out of range")
    return divmod(x, PITCH_BINS)


def decode_action(x: int, r: LoudnessRange) -> tuple[float, int]:
    """Action index to (loudness dB, pitch register semitones).

    The loudness bin maps to the center of its 25th of the range, the
    pitch bin b maps to register b - 12.
    """
    loudness_bin, pitch_bin = split_action(x)
    loudness = r.lo + (loudness_bin + 0.5) * r.width / LOUDNESS_BINS
    return loudness, pitch_bin - 12


@dataclass
class TrainConfig:
    episodes: int = 12000
    steps_per_episode: int = 50
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.9995
    epsilon_floor: float = 0.05
    seed: int = 0
    reward_target: str = "expected"

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon_start must be in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if not 0.0 <= self.epsilon_floor <= 1.0:
            raise ValueError("epsilon_floor must be in [0, 1]")
        if self.reward_target not in ("expected", "sampled"):
            raise ValueError(f"unknown reward_target {self.reward_target!r}")


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls) -> "QTable":
        return cls(
            np.zeros((N_STATES, N_ACTIONS), dtype=np.float64),
            np.zeros((N_STATES, N_ACTIONS), dtype=np.int64),
        )

    def __post_init__(self):
        if self.values.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"values shape {self.values.shape} != ({N_STATES}, {N_ACTIONS})")
        if self.visits.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"visits shape {self.visits.shape} != ({N_STATES}, {N_ACTIONS})")

    def save(self, path, config: TrainConfig | None = None) -> None:
        """Write the table to a binary container: a magic line, a JSON
        header line, then raw little-endian row-major values and visit
        counts. Byte-stable for identical contents."""
        header = {
            "states": N_STATES,
            "actions": N_ACTIONS,
            "seed": None if config is None else config.seed,
            "config": None if config is None else asdict(config),
        }
        with open(path, "wb") as fh:
            fh.write(POLICY_MAGIC.encode() + b"\n")
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.visits, dtype="<i8").tobytes())

    @classmethod
    def load(cls, path) -> tuple["QTable", dict]:
        with open(path, "rb") as fh:
            magic = fh.readline().rstrip(b"\n").decode()
            if magic != POLICY_MAGIC:
                raise ValueError(f"not a policy file (magic {magic!r})")
            header = json.loads(fh.readline().decode())
            if header.get("states") != N_STATES or header.get("actions") != N_ACTIONS:
                raise ValueError("policy file has unexpected table geometry")
            n = N_STATES * N_ACTIONS
            raw = fh.read(n * 8)
            if len(raw) != n * 8:
                raise ValueError("policy file truncated")
            values = np.frombuffer(raw, dtype="<f8").reshape(N_STATES, N_ACTIONS).copy()
            raw = fh.read(n * 8)
            if len(raw) != n * 8:
                raise ValueError("policy file truncated")
            visits = np.frombuffer(raw, dtype="<i8").reshape(N_STATES, N_ACTIONS).copy()
        return cls(values.astype(np.float64), visits.astype(np.int64)), header


@dataclass
class RewardTrace:
    rewards: list[float] = field(default_factory=list)
    window: int = 100

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")

    def moving_average(self) -> np.ndarray:
        """Trailing mean over the last `window` episodes, shorter at the
        start of the trace."""
        xs = np.asarray(self.rewards, dtype=np.float64)
        if xs.size == 0:
            return xs
        sums = np.cumsum(xs)
        out = np.empty_like(xs)
        w = self.window
        out[:w] = sums[:w] / np.arange(1, min(w, xs.size) + 1)
        if xs.size > w:
            out[w:] = (sums[w:] - sums[:-w]) / w
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "cumulative_reward"])
            for i, r in enumerate(self.rewards):
                writer.writerow([i, repr(r)])

    @classmethod
    def from_csv(cls, path) -> "RewardTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader)
            if head != ["episode", "cumulative_reward"]:
                raise ValueError(f"unexpected CSV header {head}")
            rewards = [float(row[1]) for row in reader]
        return cls(rewards)


def reward(s: int, x: int, p: LoudnessParams, rng, target: str = "sampled") -> float:
    """Reward for taking action x in state s, in [-2, 0].

    Both terms are negative absolute differences, each normalized into
    [-1, 0]: loudness against the state's usable range width (floored at
    1 dB so narrow ranges do not explode), pitch against the 24-semitone
    register span. The loudness target is a fresh uniform draw from the
    range by default; target="expected" scores against the range
    midpoint instead.
    """
    c = state_center(s)
    r = loudness_range(c, p)
    chosen_l, chosen_p = decode_action(x, r)
    if target == "sampled":
        target_l = sample_loudness(r, rng)
    elif target == "expected":
        target_l = r.lo + r.width / 2.0
    else:
        raise ValueError(f"unknown reward target {target!r}")
    target_p = pitch_register(c)
    loud_term = abs(chosen_l - target_l) / max(r.width, 1.0)
    pitch_term = abs(chosen_p - target_p) / 24.0
    return -loud_term - pitch_term


def select_action(q: QTable, s: int, epsilon: float, rng) -> int:
    """Epsilon-greedy: explore uniformly with probability epsilon, else
    the row argmax (ties to the lowest index)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(q.values[s]))


def q_update(q: QTable, s: int, x: int, r: float, s_next: int, cfg: TrainConfig) -> None:
    row_max = q.values[s_next].max()
    q.values[s, x] += cfg.alpha * (r + cfg.gamma * row_max - q.values[s, x])


def epsilon_at(cfg: TrainConfig, episode: int) -> float:
    return max(cfg.epsilon_floor, cfg.epsilon_start * cfg.epsilon_decay**episode)


def train(cfg: TrainConfig, p: LoudnessParams = LoudnessParams(), progress=None):
    """Run the full training loop; returns (QTable, RewardTrace).

    Deterministic for a fixed config: one rng seeded with cfg.seed
    drives state draws, exploration and reward sampling. progress, if
    given, is called as progress(done_episodes, total) once per episode.
    """
    rng = np.random.default_rng(cfg.seed)
    q = QTable.zeros()
    trace = []
    for episode in range(cfg.episodes):
        eps = epsilon_at(cfg, episode)
        s = int(rng.integers(N_STATES))
        total = 0.0
        for _ in range(cfg.steps_per_episode):
            x = select_action(q, s, eps, rng)
            r = reward(s, x, p, rng, cfg.reward_target)
            q_update(q, s, x, r, s, cfg)
            q.visits[s, x] += 1
            total += r
        trace.append(total)
        if progress is not None:
            progress(episode + 1, cfg.episodes)
    return q, RewardTrace(trace)


def greedy_policy(q: QTable, c: AffectCoordinate, p: LoudnessParams = LoudnessParams()) -> tuple[float, int]:
    """Best known (loudness dB, pitch register) for a coordinate,
    decoded against that coordinate's own loudness range."""
    s = discretize_state(c)
    x = int(np.argmax(q.values[s]))
    return decode_action(x, loudness_range(c, p))


@dataclass
class PolicyAccuracy:
    """Per-state check of the greedy action against the analytic targets.

    Grids are indexed [v_bin, a_bin]. Pitch passes within one bin of the
    register target at the cell center, loudness within two bins of the
    range midpoint bin.
    """

    pitch_ok: np.ndarray
    loudness_ok: np.ndarray

    @property
    def both_ok(self) -> np.ndarray:
        return self.pitch_ok & self.loudness_ok

    @property
    def n_pitch(self) -> int:
        return int(self.pitch_ok.sum())

    @property
    def n_loudness(self) -> int:
        return int(self.loudness_ok.sum())

    @property
    def n_both(self) -> int:
        return int(self.both_ok.sum())


MIDPOINT_BIN = 12  # the range midpoint always falls in the centre of bin 12 of 25


def policy_accuracy(q: QTable, p: LoudnessParams = LoudnessParams()) -> PolicyAccuracy:
    pitch_ok = np.zeros((STATE_BINS, STATE_BINS), dtype=bool)
    loudness_ok = np.zeros((STATE_BINS, STATE_BINS), dtype=bool)
    for s in range(N_STATES):
        c = state_center(s)
        loudness_bin, pitch_bin = split_action(int(np.argmax(q.values[s])))
        target_bin = pitch_register(c) + 12
        v_bin, a_bin = divmod(s, STATE_BINS)
        pitch_ok[v_bin, a_bin] = abs(pitch_bin - target_bin) <= 1
        loudness_ok[v_bin, a_bin] = abs(loudness_bin - MIDPOINT_BIN) <= 2
    return PolicyAccuracy(pitch_ok, loudness_ok)

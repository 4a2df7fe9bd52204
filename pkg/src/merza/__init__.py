"""merza: valence-arousal coordinates in, TidalCycles pattern code out.

A tabular Q-learning agent learns per-coordinate loudness and register
targets; a grammar generator writes rhythm and melody mini-notation; an
assembler joins both into executable code lines, served live over a
small session protocol.
"""

from .affect import (
    MODES,
    AffectCoordinate,
    ContourParams,
    LoudnessParams,
    LoudnessRange,
    contour_distribution,
    loudness_range,
    mode_for_valence,
    pitch_register,
    rest_probability,
    sample_loudness,
)
from .assemble import (
    AssembleConfig,
    Suggestion,
    WeightsFile,
    assemble,
    build_suggestion,
    db_to_gain,
    read_weights_file,
    write_weights_file,
)
from .mininotation import (
    Event,
    ParseError,
    Pattern,
    RhythmGenConfig,
    SoundBank,
    assign_samples,
    flatten_events,
    generate_melody,
    generate_rhythm,
    load_soundbanks,
    parse,
)
from .qlearn import (
    QTable,
    RewardTrace,
    TrainConfig,
    decode_action,
    discretize_state,
    greedy_policy,
    policy_accuracy,
    train,
)
from .service import ServeConfig, SessionState, handle, serve

__version__ = "0.1.0"

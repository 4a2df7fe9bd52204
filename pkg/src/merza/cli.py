"""Batch entry points: train a policy, generate code for a coordinate,
evaluate a trained policy, or run the live session service."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .affect import AffectCoordinate, LoudnessParams
from .assemble import AssembleConfig, build_suggestion, write_weights_file
from .mininotation import (
    DEFAULT_RHYTHM_BANKS,
    RhythmGenConfig,
    SoundBank,
    load_soundbanks,
)
from .qlearn import (
    QTable,
    TrainConfig,
    policy_accuracy,
    train,
)
from .service import ServeConfig, default_policy_path, serve


def add_loudness_flags(parser):
    g = parser.add_argument_group("loudness model")
    g.add_argument("--loudness-floor", type=float, default=-18.0,
                   help="dB floor of the loudness range (default -18)")
    g.add_argument("--arousal-gain", type=float, default=9.0,
                   help="dB of range per arousal unit (default 9)")
    g.add_argument("--valence-gain", type=float, default=3.0,
                   help="dB of range per valence unit (default 3)")


def add_train_flags(parser):
    g = parser.add_argument_group("training")
    g.add_argument("--episodes", type=int, default=12000)
    g.add_argument("--steps-per-episode", type=int, default=50)
    g.add_argument("--alpha", type=float, default=0.1, help="learning rate")
    g.add_argument("--gamma", type=float, default=0.9, help="discount factor")
    g.add_argument("--epsilon-start", type=float, default=1.0)
    g.add_argument("--epsilon-decay", type=float, default=0.9995)
    g.add_argument("--epsilon-floor", type=float, default=0.05)
    g.add_argument("--reward-target", choices=["expected", "sampled"], default="expected",
                   help="score loudness against the range midpoint or a fresh draw")


def add_generation_flags(parser):
    g = parser.add_argument_group("generation")
    g.add_argument("--length", type=int, default=8, help="top-level slots per pattern")
    g.add_argument("--max-depth", type=int, default=2, help="group nesting limit")
    g.add_argument("--group-size", type=int, default=2, help="slots per group")
    g.add_argument("--roughness-arg", choices=["depth", "position", "length"],
                   default="depth", help="what feeds the rest-probability exponent")
    g.add_argument("--bank", default="saw", help="chromatic bank for the melody line")
    g.add_argument("--soundbank-config", help="JSON file of sound bank definitions")
    g.add_argument("--per-slot-samples", action="store_true",
                   help="draw a sample per slot instead of one per pattern")
    g.add_argument("--melody-connection", default="d1")
    g.add_argument("--rhythm-connection", default="d2")


def loudness_params(args) -> LoudnessParams:
    return LoudnessParams(args.loudness_floor, args.arousal_gain, args.valence_gain)


def train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        episodes=args.episodes,
        steps_per_episode=args.steps_per_episode,
        alpha=args.alpha,
        gamma=args.gamma,
        epsilon_start=args.epsilon_start,
        epsilon_decay=args.epsilon_decay,
        epsilon_floor=args.epsilon_floor,
        seed=seed,
        reward_target=args.reward_target,
    )


def gen_config(args, seed: int) -> RhythmGenConfig:
    return RhythmGenConfig(
        length=args.length,
        max_depth=args.max_depth,
        group_size=args.group_size,
        seed=seed,
        roughness_arg=args.roughness_arg,
    )


def resolve_banks(args):
    """--bank names the melody bank; a soundbank config can supply its
    definition plus replacement rhythm banks."""
    melody_bank = None
    rhythm_banks = DEFAULT_RHYTHM_BANKS
    if args.soundbank_config:
        banks = load_soundbanks(args.soundbank_config)
        rhythmic = [b for b in banks if not b.chromatic]
        if rhythmic:
            rhythm_banks = rhythmic
        for b in banks:
            if b.name == args.bank and b.chromatic:
                melody_bank = b
    if melody_bank is None:
        melody_bank = SoundBank(args.bank, chromatic=True, size=25)
    return melody_bank, rhythm_banks


def load_policy(args, params: LoudnessParams):
    """Policy resolution for generate/evaluate: an explicit file, the
    default under MERZA_HOME, or a fresh training run."""
    if args.policy_file:
        table, _ = QTable.load(args.policy_file)
        return table
    if default_policy_path().exists():
        table, _ = QTable.load(default_policy_path())
        return table
    print("no policy file found, training one now", file=sys.stderr)
    cfg = train_config(args, args.seed)
    table, _ = train(cfg, params)
    return table


def cmd_train(args) -> int:
    params = loudness_params(args)
    cfg = train_config(args, args.seed)
    done = {"n": 0}

    def tick(done_eps, total):
        if total and done_eps * 20 // total > done["n"]:
            done["n"] = done_eps * 20 // total
            print(f"  {done_eps}/{total} episodes", file=sys.stderr)

    table, trace = train(cfg, params, progress=tick)
    policy_path = Path(args.policy_file)
    table.save(policy_path, cfg)
    trace_path = Path(args.trace_csv)
    trace.to_csv(trace_path)
    print(f"policy written to {policy_path}")
    print(f"reward trace written to {trace_path}")
    if not args.no_plot:
        from .report import save_reward_curve

        plot_path = Path(args.plot_file) if args.plot_file else trace_path.with_suffix(".png")
        save_reward_curve(trace, plot_path)
        print(f"reward curve written to {plot_path}")
    return 0


def cmd_generate(args) -> int:
    params = loudness_params(args)
    coords = AffectCoordinate(args.valence, args.arousal)
    table = load_policy(args, params)
    melody_bank, rhythm_banks = resolve_banks(args)
    assemble_cfg = AssembleConfig(
        bank=melody_bank.name,
        melody_connection=args.melody_connection,
        rhythm_connection=args.rhythm_connection,
    )
    suggestion, melody, rhythm = build_suggestion(
        table,
        coords,
        args.seed,
        params=params,
        gen_cfg=gen_config(args, args.seed),
        assemble_cfg=assemble_cfg,
        melody_bank=melody_bank,
        rhythm_banks=rhythm_banks,
        per_slot_samples=args.per_slot_samples,
    )
    print(suggestion.code)
    if args.weights_file:
        policy_out = (suggestion.loudness_db, suggestion.pitch_register)
        write_weights_file(
            policy_out,
            [melody, rhythm],
            args.weights_file,
            coords=coords,
            seed=args.seed,
            params=params,
        )
        print(f"weights written to {args.weights_file}", file=sys.stderr)
    return 0


GRID_KEY = ". both ok   P pitch off   L loudness off   X both off"


def accuracy_symbol(pitch_ok: bool, loudness_ok: bool) -> str:
    if pitch_ok and loudness_ok:
        return "."
    if loudness_ok:
        return "P"
    if pitch_ok:
        return "L"
    return "X"


def cmd_evaluate(args) -> int:
    params = loudness_params(args)
    table = load_policy(args, params)
    acc = policy_accuracy(table, params)
    print(f"states passing both targets: {acc.n_both}/100 "
          f"(pitch {acc.n_pitch}, loudness {acc.n_loudness})")
    print(GRID_KEY)
    header = "      " + " ".join(f"a{b}" for b in range(10))
    print(header)
    for v_bin in range(9, -1, -1):
        cells = " ".join(
            f" {accuracy_symbol(acc.pitch_ok[v_bin, a_bin], acc.loudness_ok[v_bin, a_bin])}"
            for a_bin in range(10)
        )
        print(f"v{v_bin} {state_label(v_bin):>4} {cells}")
    if args.report_dir:
        from .report import save_accuracy_grid

        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "accuracy.csv"
        with open(csv_path, "w") as fh:
            fh.write("v_bin,a_bin,pitch_ok,loudness_ok\n")
            for v_bin in range(10):
                for a_bin in range(10):
                    fh.write(f"{v_bin},{a_bin},{int(acc.pitch_ok[v_bin, a_bin])},"
                             f"{int(acc.loudness_ok[v_bin, a_bin])}\n")
        png_path = save_accuracy_grid(acc, out / "accuracy.png")
        print(f"report written to {csv_path} and {png_path}")
    return 0


def state_label(v_bin: int) -> str:
    return f"{-0.9 + 0.2 * v_bin:+.1f}"


def cmd_serve(args) -> int:
    cfg = ServeConfig(
        host=args.host,
        port=args.port,
        ws_port=args.ws_port,
        policy_file=args.policy_file,
        train_on_start=args.train_on_start,
        train_config=train_config(args, args.seed),
        params=loudness_params(args),
        soundbank_config=args.soundbank_config,
        seed_base=args.seed,
        log_file=args.log_file,
    )
    serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="merza",
        description="Affect-driven TidalCycles pattern generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy and write it out")
    add_train_flags(p)
    add_loudness_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy-file", default="merza-policy.bin")
    p.add_argument("--trace-csv", default="reward-trace.csv")
    p.add_argument("--plot-file", help="reward curve PNG (default: trace path with .png)")
    p.add_argument("--no-plot", action="store_true", help="skip the reward curve figure")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate code for a coordinate")
    p.add_argument("--valence", type=float, default=0.5)
    p.add_argument("--arousal", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy-file", help="trained policy (default: train on the fly)")
    p.add_argument("--weights-file", default="merza-weights.json",
                   help="weights document path; empty string to skip")
    add_generation_flags(p)
    add_loudness_flags(p)
    add_train_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="check a policy against its targets")
    p.add_argument("--policy-file", help="trained policy (default: train on the fly)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report-dir", help="write accuracy.csv and accuracy.png here")
    add_loudness_flags(p)
    add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9191)
    p.add_argument("--ws-port", type=int, help="browser endpoint (default: port + 1)")
    p.add_argument("--policy-file")
    p.add_argument("--train-on-start", action="store_true")
    p.add_argument("--soundbank-config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-file", help="session log (default: under MERZA_HOME)")
    add_loudness_flags(p)
    add_train_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())

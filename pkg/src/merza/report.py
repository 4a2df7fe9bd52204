"""Figure output for training runs: the reward curve next to its CSV,
and a heatmap of the per-state policy check."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .qlearn import PolicyAccuracy, RewardTrace


def save_reward_curve(trace: RewardTrace, path) -> Path:
    """Per-episode cumulative reward, raw behind its trailing moving
    average."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    episodes = np.arange(len(trace.rewards))
    ax.plot(episodes, trace.rewards, color="#9bb5ce", linewidth=0.4, label="per episode")
    if len(trace.rewards):
        ax.plot(episodes, trace.moving_average(), color="#1f4e79", linewidth=1.6,
                label=f"moving average ({trace.window})")
    ax.set_xlabel("episode")
    ax.set_ylabel("cumulative reward")
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_accuracy_grid(acc: PolicyAccuracy, path) -> Path:
    """10x10 heatmap of the greedy policy check, valence on y and
    arousal on x. 2 = both targets hit, 1 = one hit, 0 = neither."""
    path = Path(path)
    score = acc.pitch_ok.astype(int) + acc.loudness_ok.astype(int)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(score, origin="lower", extent=(-1, 1, -1, 1),
                   cmap="RdYlGn", vmin=0, vmax=2)
    ax.set_xlabel("arousal")
    ax.set_ylabel("valence")
    ax.set_title(f"greedy policy vs targets: {acc.n_both}/100 states")
    cbar = fig.colorbar(im, ax=ax, ticks=[0, 1, 2])
    cbar.ax.set_yticklabels(["neither", "one", "both"])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

"""Figure rendering for campaign reports.

Produces the standard two-by-two panel (mean Bures distance and mean
Lyapunov value, linear on top, semi-log below, with the exponential
reference) plus an optional sample-trajectory overlay, written as PNG
files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .ensemble import EnsembleSummary  # noqa: E402

__all__ = ["render_campaign_figures"]

_RC = {
    "figure.figsize": (9.0, 6.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}

# strip the creation-software PNG chunk so reruns are byte-identical
_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def _distance_label(summary: EnsembleSummary) -> str:
    if summary.config.is_reduction_run:
        return r"$d_B(\rho_t,\,\mathrm{Bell\ set})$"
    return r"$d_B(\rho_t,\,\mathrm{target})$"


def render_campaign_figures(summary: EnsembleSummary,
                            out_dir: Path | str,
                            max_samples: int = 10) -> list[Path]:
    """Write <name>_summary.png (and <name>_samples.png when per-trajectory
    series were kept). Returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = summary.config.name
    t = summary.times
    written: list[Path] = []

    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, sharex=True)
        for row, log_scale in enumerate((False, True)):
            ax = axes[row, 0]
            ax.plot(t, summary.mean_bures, color="black", label="ensemble mean")
            ax.plot(t, summary.reference, color="red", linestyle="--",
                    label="exponential reference")
            ax.set_ylabel(_distance_label(summary))
            if log_scale:
                ax.set_yscale("log")
                ax.set_xlabel("t")
            ax = axes[row, 1]
            ax.plot(t, summary.mean_lyapunov, color="black")
            ax.set_ylabel(r"$V(\rho_t)$ (mean)")
            if log_scale:
                ax.set_yscale("log")
                ax.set_xlabel("t")
        axes[0, 0].legend(loc="upper right")
        fig.suptitle(name)
        fig.tight_layout()
        path = out_dir / f"{name}_summary.png"
        fig.savefig(path, **_SAVE_KW)
        plt.close(fig)
        written.append(path)

        if summary.trajectories:
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4), sharex=True)
            for traj in summary.trajectories[:max_samples]:
                ax1.plot(traj["times"], traj["bures"], color="black", alpha=0.45,
                         linewidth=0.8)
                ax2.plot(traj["times"], traj["fidelity"], color="black", alpha=0.45,
                         linewidth=0.8)
            ax1.plot(t, summary.reference, color="red", linestyle="--")
            ax1.set_ylabel(_distance_label(summary))
            ax1.set_xlabel("t")
            ax2.set_ylabel("target fidelity")
            ax2.set_xlabel("t")
            fig.suptitle(f"{name}: sample trajectories")
            fig.tight_layout()
            path = out_dir / f"{name}_samples.png"
            fig.savefig(path, **_SAVE_KW)
            plt.close(fig)
            written.append(path)
    return written

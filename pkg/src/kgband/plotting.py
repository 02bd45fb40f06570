"""Figures written next to the CSV output. Uses the non-interactive Agg backend."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_trajectory(result, path, title=None):
    """Truth vs estimate, plus the X/Y coordinate tracks against time."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
        ax = axes[0]
        ax.plot(result.truth[:, 0], result.truth[:, 1], "k-", lw=1.5, label="truth")
        ax.plot(result.est_trajectory[:, 0], result.est_trajectory[:, 1], "C1.-", ms=2, lw=0.8, label="estimate")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend()
        for ax, c, name in ((axes[1], 0, "x"), (axes[2], 1, "y")):
            ax.plot(result.t, result.truth[:, c], "k-", lw=1.2, label="truth")
            ax.plot(result.t, result.est_trajectory[:, c], "C1-", lw=0.8, label="estimate")
            ax.set_xlabel("t [s]")
            ax.set_ylabel(f"{name} [m]")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_errors(results, path):
    """Per-step absolute error for every run."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
        for r in results:
            axes[0].plot(r.t, r.error_x, lw=0.7, alpha=0.8)
            axes[1].plot(r.t, r.error_y, lw=0.7, alpha=0.8)
        axes[0].set_ylabel(r"$\hat{e}_x$ [m]")
        axes[1].set_ylabel(r"$\hat{e}_y$ [m]")
        axes[1].set_xlabel("t [s]")
        return _save(fig, path)


def plot_comparison(stats, results, path):
    """Boxplots of X/Y error per policy and the mean selection time."""
    labels = [s.label for s in stats]
    ex = [np.concatenate([r.error_x for r in res]) for res in results]
    ey = [np.concatenate([r.error_y for r in res]) for res in results]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
        axes[0].boxplot(ex, whis=(0, 100))
        axes[0].set_ylabel(r"$\hat{e}_x$ [m]")
        axes[1].boxplot(ey, whis=(0, 100))
        axes[1].set_ylabel(r"$\hat{e}_y$ [m]")
        axes[2].bar(np.arange(len(stats)) + 1, [s.mean_selection_time for s in stats], color="C0")
        axes[2].set_ylabel("selection time [s]")
        for ax in axes:
            ax.set_xticks(np.arange(len(labels)) + 1)
            ax.set_xticklabels(labels, rotation=30, ha="right")
        return _save(fig, path)

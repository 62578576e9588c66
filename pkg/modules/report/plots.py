"""Static PNG plots of training traces (Agg backend, no display)."""
import logging
import os

import matplotlib as mpl
mpl.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from modules.trainer.report import TraceRow

log = logging.getLogger(__name__)

mpl.rcParams.update({
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 3.6),
})

# fixed metadata keeps PNG bytes reproducible
_PNG_META = {"Software": None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    log.debug("Plot written: %s", path)
    return path


def plot_weights(rows: list[TraceRow], path: str, title: str = "") -> str:
    """r1 and r2 against iteration for one competitive run."""
    rows = [r for r in rows if r.r1 is not None]
    steps = [r.step for r in rows]
    fig, ax = plt.subplots()
    ax.plot(steps, [r.r1 for r in rows], label="r1 (seg student)", lw=0.8)
    ax.plot(steps, [r.r2 for r in rows], label="r2 (SDF student)", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("ensembling weight")
    ax.set_ylim(-0.05, 1.05)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    return _save(fig, path)


def plot_training_dice(series: dict[str, list[TraceRow]], path: str, title: str = "") -> str:
    """Training Dice (1 - batch dice loss of M1) per method."""
    fig, ax = plt.subplots()
    for label, rows in series.items():
        ax.plot([r.step for r in rows], [1.0 - r.dice_l1 for r in rows], label=label, lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("training Dice")
    ax.set_ylim(0.0, 1.0)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(loc="lower right")
    return _save(fig, path)

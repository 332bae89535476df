"""CSV reports and companion figures.

CSVs are the canonical output: fields are formatted with repr() so the
bytes are identical across runs with the same inputs.  Figures are drawn
next to the CSVs for quick inspection and carry no guarantee beyond
matching the data they plot.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import TradeoffPoint, pareto_front  # noqa: E402
from .training import TrainingHistory  # noqa: E402

TRADEOFF_HEADER = "method,lambda1,lambda2,lambda3,utility,p1,p2,log_p2,score"
HISTORY_HEADER = "epoch,c_u,c_p1,c_p2,c_sum"


def _num(x) -> str:
    return repr(float(x))


def format_tradeoff_rows(rows: list[tuple[str, TradeoffPoint]]) -> str:
    lines = [TRADEOFF_HEADER]
    for method, p in rows:
        if "," in method or "\n" in method:
            raise ValueError("method label %r cannot appear in a CSV field" % method)
        lines.append(",".join([
            method,
            _num(p.lambda1), _num(p.lambda2), _num(p.lambda3),
            _num(p.utility),
            "" if p.p1 is None else _num(p.p1),
            _num(p.p2), _num(p.log_p2), _num(p.score),
        ]))
    return "\n".join(lines) + "\n"


def write_tradeoff_csv(path, rows: list[tuple[str, TradeoffPoint]]) -> None:
    Path(path).write_text(format_tradeoff_rows(rows), encoding="utf-8")


def format_history(history: TrainingHistory) -> str:
    lines = [HISTORY_HEADER]
    for r in history.records:
        lines.append(",".join([str(r.epoch), _num(r.c_u), _num(r.c_p1), _num(r.c_p2), _num(r.c_sum)]))
    return "\n".join(lines) + "\n"


def write_history_csv(path, history: TrainingHistory) -> None:
    Path(path).write_text(format_history(history), encoding="utf-8")


def plot_history(path, history: TrainingHistory) -> None:
    """Per-epoch curves of the four tracked losses."""
    epochs = [r.epoch for r in history.records]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, [r.c_u for r in history.records], label="task loss")
    ax.plot(epochs, [r.c_p1 for r in history.records], label="attribute loss")
    ax.plot(epochs, [r.c_p2 for r in history.records], label="reconstruction loss")
    ax.plot(epochs, [r.c_sum for r in history.records], label="combined objective", linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_tradeoff(path, rows: list[tuple[str, TradeoffPoint]]) -> None:
    """Utility against reconstruction risk, Pareto front highlighted."""
    points = [p for _, p in rows]
    front = set(id(p) for p in pareto_front(points))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, p in rows:
        on_front = id(p) in front
        ax.scatter(
            p.log_p2, p.utility,
            color="tab:red" if on_front else "tab:blue",
            zorder=3 if on_front else 2,
        )
        ax.annotate(method, (p.log_p2, p.utility), fontsize=7,
                    textcoords="offset points", xytext=(4, 4))
    ordered = sorted((p for p in points if id(p) in front), key=lambda p: p.log_p2)
    if len(ordered) > 1:
        ax.plot([p.log_p2 for p in ordered], [p.utility for p in ordered],
                color="tab:red", alpha=0.5, label="Pareto front")
        ax.legend()
    ax.set_xlabel("log10(1 + reconstruction mse)")
    ax.set_ylabel("task accuracy (%)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

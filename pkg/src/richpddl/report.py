"""Timeline figures for validation reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .model import format_number  # noqa: E402

BAR_HEIGHT = 0.6
VIOLATION_COLOR = "#c0392b"
STEP_COLOR = "#5b7fa6"
BREAK_COLOR = "#1f2d3d"


def plot_timeline(plan, verdict, path, breakpoints=None, title=None):
    """Draw one bar per plan step and mark violations, then save to ``path``.

    ``breakpoints`` maps a step index to absolute interior boundary times;
    they show as ticks across the bar. The figure has no timestamps so
    repeated runs write the same picture.
    """
    plan = list(plan)
    breakpoints = breakpoints or {}
    height = max(2.0, 0.5 * len(plan) + 1.2)
    fig, ax = plt.subplots(figsize=(8, height))
    labels = []
    for row, step in enumerate(plan):
        y = len(plan) - 1 - row
        start, dur = float(step.time), float(step.duration)
        ax.broken_barh([(start, dur)], (y - BAR_HEIGHT / 2, BAR_HEIGHT),
                       facecolors=STEP_COLOR, edgecolor="black", linewidth=0.5)
        for t in breakpoints.get(row, ()):
            ax.vlines(float(t), y - BAR_HEIGHT / 2, y + BAR_HEIGHT / 2, colors=BREAK_COLOR, linewidth=1.2)
        labels.append(f"{row}: {step.action} {' '.join(step.args)}".rstrip())

    for v in verdict.violations:
        if v.step_index is not None and 0 <= v.step_index < len(plan):
            y = len(plan) - 1 - v.step_index
        else:
            y = -0.8
        ax.plot(float(v.time), y, marker="x", color=VIOLATION_COLOR, markersize=9, mew=2)
        ax.annotate(v.kind, (float(v.time), y), textcoords="offset points", xytext=(4, 6),
                    fontsize=7, color=VIOLATION_COLOR)

    ax.set_yticks(range(len(plan)))
    ax.set_yticklabels(list(reversed(labels)), fontsize=8)
    ax.set_ylim(-1.3, max(len(plan), 1) - 0.2)
    ax.set_xlabel("time")
    ax.grid(axis="x", linestyle=":", linewidth=0.5)
    n = len(verdict.violations)
    status = "valid" if verdict.valid else f"invalid ({n} violation{'s' if n != 1 else ''})"
    ax.set_title(title or f"plan {status}", fontsize=10)
    if plan:
        end = max(s.time + s.duration for s in plan)
        ax.set_xlim(-0.02 * float(end), 1.05 * float(end))
        ax.set_xticks(sorted({float(s.time) for s in plan} | {float(end)}))
        ax.set_xticklabels([format_number(t) for t in sorted({s.time for s in plan} | {end})],
                           fontsize=7, rotation=45)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)
    return path

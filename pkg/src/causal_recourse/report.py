"""Report artifacts: canonical JSON, a CSV table, PNG figures, and a plain text table.

Everything written here is a pure function of its inputs so repeated runs
produce byte-identical files.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .serialization import dump_json  # noqa: E402

_PNG_META = {"Software": None}


def format_table(rows: Sequence[dict]) -> str:
    """Fixed-width text table for standard output."""
    if not rows:
        return "(no rows)\n"
    cols = list(rows[0])
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def csv_text(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def write_report(out: str | Path, document: dict, rows: Sequence[dict], figures=()) -> list[Path]:
    """Write ``out`` (JSON), ``<stem>.csv`` and one ``<stem>_<name>.png`` per figure.

    ``figures`` is a sequence of ``(name, draw)`` where ``draw(ax)`` fills a
    matplotlib axes.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_json(document))
    table = out.with_suffix(".csv")
    table.write_text(csv_text(rows))
    written = [out, table]
    for name, draw in figures:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        draw(ax)
        fig.tight_layout()
        path = out.with_name(f"{out.stem}_{name}.png")
        fig.savefig(path, dpi=100, metadata=_PNG_META)
        plt.close(fig)
        written.append(path)
    return written


# --- figure painters ---------------------------------------------------------

def loan_world_painter(data: np.ndarray, weights, bias: float, record: dict):
    """Scatter of the sample, the decision boundary, the factual and both recourse targets."""

    def draw(ax):
        ax.scatter(data[:, 0], data[:, 1], s=3, alpha=0.25, color="0.6", label="sample")
        xs = np.linspace(data[:, 0].min(), data[:, 0].max(), 2)
        ax.plot(xs, -(weights[0] * xs + bias) / weights[1], color="k", lw=1, label="decision boundary")
        f = record["factual"]
        names = list(f)
        ax.scatter([f[names[0]]], [f[names[1]]], color="tab:red", zorder=3, label="factual")
        for key, colour, label in (("cfe", "tab:orange", "CFE"), ("mint", "tab:blue", "intervention")):
            cf = record.get(key, {}).get("counterfactual")
            if cf:
                ax.annotate("", (cf[names[0]], cf[names[1]]), (f[names[0]], f[names[1]]),
                            arrowprops={"arrowstyle": "->", "color": colour})
                ax.scatter([cf[names[0]]], [cf[names[1]]], color=colour, zorder=3, label=label)
        ax.set_xlabel(names[0])
        ax.set_ylabel(names[1])
        ax.legend(loc="upper right", fontsize=8)

    return draw


def extra_cost_painter(records: Sequence[dict]):
    """Histogram of (cost_CFE_action - cost_MINT) / cost_MINT per classifier."""

    def draw(ax):
        groups: dict[str, list[float]] = {}
        for r in records:
            if r.get("relative_extra_cost") is not None and r.get("id") != "reference":
                groups.setdefault(r.get("classifier", ""), []).append(r["relative_extra_cost"])
        allv = [v for vals in groups.values() for v in vals]
        bins = np.linspace(min(allv + [0.0]), max(allv + [1e-9]), 31)
        for name, vals in sorted(groups.items()):
            ax.hist(vals, bins=bins, alpha=0.6, label=f"{name} (n={len(vals)})")
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_xlabel("relative extra cost of the CFE-based action")
        ax.set_ylabel("individuals")
        if groups:
            ax.legend(fontsize=8)

    return draw


def cost_scatter_painter(records: Sequence[dict]):
    """CFE-action cost against MINT cost; points on or above the diagonal favour MINT."""

    def draw(ax):
        hi = 0.0
        for name in sorted({r.get("classifier", "") for r in records}):
            pts = [(r["mint"]["cost"], r["cfe_action"]["cost"]) for r in records
                   if r.get("both") and r.get("classifier", "") == name]
            if pts:
                a = np.array(pts)
                ax.scatter(a[:, 0], a[:, 1], s=12, label=name or "cost")
                hi = max(hi, float(a.max()))
        ax.plot([0, hi], [0, hi], color="k", lw=0.8)
        ax.set_xlabel("MINT cost")
        ax.set_ylabel("CFE-based action cost")
        if hi > 0:
            ax.legend(fontsize=8)

    return draw


def cost_bar_painter(costs: dict[str, float]):
    def draw(ax):
        names = list(costs)
        ax.bar(names, [costs[n] for n in names], color=["tab:orange", "tab:green", "tab:blue"][: len(names)])
        ax.set_ylabel("normalised l1 cost")

    return draw

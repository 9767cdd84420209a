"""Figure rendering for sweep reports.

Figures are written next to the delimited reports; they are a view of the
TSV content, never an extra source of numbers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_MODE_LABELS = {"n21": "many-to-one", "12n": "one-to-many"}


def _figure_key(mode: str, condition: str, metric: str) -> str:
    return f"{mode}_{condition}_{metric}"


def render_summary_figures(summary_rows, out_dir: str | Path) -> dict[str, Path]:
    """One metric-versus-document-proportion curve per (mode, condition, metric).

    The shaded band is one standard deviation over runs; a dashed line marks
    the sentence-level baseline when the summary contains one.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves: dict[str, list] = {}
    baselines: dict[str, float] = {}
    for row in summary_rows:
        key = _figure_key(row.mode, row.condition, row.metric)
        if row.stage == "baseline":
            baselines[key] = row.mean
        elif row.stage == "doc":
            curves.setdefault(key, []).append(row)
    paths: dict[str, Path] = {}
    for key in sorted(curves):
        rows = sorted(curves[key], key=lambda r: r.p)
        ps = [r.p for r in rows]
        means = [r.mean for r in rows]
        stds = [r.std for r in rows]
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(ps, means, marker="o", color="tab:blue", label="document finetune")
        ax.fill_between(ps, [m - s for m, s in zip(means, stds)],
                        [m + s for m, s in zip(means, stds)],
                        color="tab:blue", alpha=0.2, linewidth=0)
        if key in baselines:
            ax.axhline(baselines[key], color="tab:gray", linestyle="--",
                       label="sentence baseline")
        mode = rows[0].mode
        ax.set_xlabel("document proportion p")
        ax.set_ylabel(rows[0].metric)
        ax.set_title(f"{_MODE_LABELS.get(mode, mode)} / {rows[0].condition}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out / f"{key}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths[key] = path
    return paths

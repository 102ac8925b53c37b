"""Figure rendering for experiment outputs.

Consumes the delimited files an experiment run writes (``accuracy.csv``,
``bias.csv``, ``curves.csv``) and renders matplotlib figures next to them:
RMSE and bias versus the true smoothness per scenario and separation, and
the bundles of score curves across replications.  Purely a consumer of the
CSVs — rerunning it never touches the experiment data.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_report", "render_accuracy", "render_bias", "render_curves"]

_METHOD_COLOR = {"prior": "tab:red", "post": "tab:cyan"}
_VARIANT_STYLE = {
    "prior": ("tab:red", "-"),
    "post": ("tab:cyan", "-"),
    "prior_ml": ("tab:red", "--"),
    "post_ml": ("tab:cyan", "--"),
    "prior_icm": ("tab:red", ":"),
    "post_icm": ("tab:cyan", ":"),
}


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fnum(s: str) -> float:
    return float(s)


def _group_cells(rows: list[dict]) -> dict:
    """(scenario, k) -> (L, method) -> sorted [(beta, value)] mapping."""
    cells: dict = defaultdict(lambda: defaultdict(list))
    for row in rows:
        key = (row["scenario"], _fnum(row["k"]))
        cells[key][(int(row["L"]), row["method"])].append(row)
    return cells


def _render_metric(rows: list[dict], metric: str, out_dir: Path,
                   stem: str, ylabel: str) -> list[Path]:
    written = []
    for (scenario, k), series in sorted(_group_cells(rows).items()):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for (L, method), pts in sorted(series.items()):
            pts = sorted(pts, key=lambda r: _fnum(r["beta"]))
            betas = [_fnum(r["beta"]) for r in pts]
            vals = [_fnum(r[metric]) for r in pts]
            ax.plot(betas, vals, marker="o", markersize=3,
                    color=_METHOD_COLOR.get(method, "gray"),
                    linestyle="-" if L == 2 else ("--" if L == 3 else ":"),
                    label=f"L={L} {method}")
        if metric == "bias":
            ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_xlabel("true smoothness")
        ax.set_ylabel(ylabel)
        ax.set_title(f"scenario={scenario}  k={k:g}")
        ax.legend(fontsize=7)
        fig.tight_layout()
        out = out_dir / f"{stem}_{scenario}_k{k:g}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        written.append(out)
    return written


def render_accuracy(accuracy_csv: Path, out_dir: Path) -> list[Path]:
    rows = _read_rows(accuracy_csv)
    rows = [r for r in rows if r["rmse"] != "nan"]
    return _render_metric(rows, "rmse", out_dir, "rmse", "root mean square error")


def render_bias(bias_csv: Path, out_dir: Path) -> list[Path]:
    rows = _read_rows(bias_csv)
    rows = [r for r in rows if r["bias"] != "nan"]
    return _render_metric(rows, "bias", out_dir, "bias", "bias")


def render_curves(curves_csv: Path, out_dir: Path) -> list[Path]:
    rows = _read_rows(curves_csv)
    if not rows:
        return []
    by_line: dict = defaultdict(list)
    for r in rows:
        by_line[(r["variant"], int(r["replication"]))].append(
            (_fnum(r["beta"]), _fnum(r["score"])))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    seen = set()
    for (variant, _rep), pts in sorted(by_line.items()):
        pts.sort()
        color, style = _VARIANT_STYLE.get(variant, ("gray", "-"))
        label = variant if variant not in seen else None
        seen.add(variant)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], color=color,
                linestyle=style, linewidth=0.6, alpha=0.45, label=label)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("smoothness")
    ax.set_ylabel("score")
    ax.set_title("score curve bundles")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = out_dir / "curves.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_report(in_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render every figure the available CSVs support; returns written paths."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if (in_dir / "accuracy.csv").exists():
        written += render_accuracy(in_dir / "accuracy.csv", out_dir)
    if (in_dir / "bias.csv").exists():
        written += render_bias(in_dir / "bias.csv", out_dir)
    if (in_dir / "curves.csv").exists():
        written += render_curves(in_dir / "curves.csv", out_dir)
    return written

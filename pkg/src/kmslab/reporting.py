"""Deterministic serialization and figure rendering for experiment outputs.

Every floating-point value is printed with 17 significant digits
(``%.17g``), which round-trips float64 exactly: rerunning a seeded
experiment must reproduce every output byte, so JSON is emitted by a local
writer (sorted keys, fixed separators, uniform float formatting) rather
than ``json.dumps``.  Figures are rendered on the Agg backend with pinned
metadata so repeated renders of the same data also agree byte-for-byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidSpec

__all__ = [
    "dumps17",
    "fmt",
    "markdown_table",
    "read_csv",
    "render_figure",
    "write_csv",
    "write_json",
]


def fmt(value) -> str:
    """One CSV/markdown cell.  Floats get 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            raise InvalidSpec("refusing to serialize a non-finite value")
        return format(value, ".17g")
    if isinstance(value, str):
        if any(c in value for c in ",\n\r"):
            raise InvalidSpec(f"cell {value!r} would break the CSV layout")
        return value
    raise InvalidSpec(f"cannot format {type(value).__name__} as a cell")


def _json_fragment(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_fragment(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_fragment(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise InvalidSpec("JSON object keys must be strings")
            items.append(json.dumps(key) + ": " + _json_fragment(obj[key]))
        return "{" + ", ".join(items) + "}"
    raise InvalidSpec(f"cannot serialize {type(obj).__name__} to JSON")


def dumps17(obj) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    return _json_fragment(obj)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps17(obj) + "\n")


def write_csv(path, header, rows) -> None:
    """Comma-separated text with a header row; cells through ``fmt``."""
    lines = [",".join(header)]
    for row in rows:
        cells = row if not isinstance(row, dict) else [row[h] for h in header]
        lines.append(",".join(fmt(c) for c in cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> list[dict]:
    """Rows as dicts; cells parsed back to float/int/bool where they look
    like one (the inverse of ``fmt`` for the types we emit)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        return []
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        row = {}
        for key, cell in zip(header, cells):
            if cell in ("true", "false"):
                row[key] = cell == "true"
            else:
                try:
                    row[key] = int(cell)
                except ValueError:
                    try:
                        row[key] = float(cell)
                    except ValueError:
                        row[key] = cell
        out.append(row)
    return out


def markdown_table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        cells = row if not isinstance(row, dict) else [row[h] for h in header]
        lines.append("| " + " | ".join(fmt(c) for c in cells) + " |")
    return "\n".join(lines)


# ---------- figures ----------

_PNG_META = {"Software": "kmslab"}


def _plt():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    _plt().close(fig)


def _fig_param_vs_gap(rows, summary, path) -> None:
    plt = _plt()
    xs = [r["param"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    ax.plot(xs, [r["gap"] for r in rows], "o-")
    ax.set_xlabel(summary.get("param_name", "parameter"))
    ax.set_ylabel("spectral gap")
    ax.set_title(f"{summary.get('family', '')} gap sweep".strip())
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def _fig_loglog_scaling(rows, summary, path, xkey="alpha", ykey="distance",
                        title="channel vs semigroup") -> None:
    plt = _plt()
    xs = np.array([r[xkey] for r in rows], dtype=float)
    ys = np.array([r[ykey] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    ax.loglog(xs, ys, "o", label="measured")
    slope = summary.get("slope")
    if slope is not None and np.all(ys > 0):
        anchor = ys[0] / xs[0] ** slope
        ax.loglog(xs, anchor * xs ** slope, "--",
                  label=f"slope {slope:.3f}")
    ax.set_xlabel(xkey)
    ax.set_ylabel(ykey)
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def _fig_fixed_point(rows, summary, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.0, 3.4), constrained_layout=True)
    ax.semilogy([r["kappa"] for r in rows], [r["fp_error"] for r in rows],
                "o-")
    ax.set_xlabel("kappa")
    ax.set_ylabel("|| rho_fix - rho_beta ||_1")
    ax.set_title("channel fixed-point error")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def _fig_trajectory(rows, summary, path) -> None:
    plt = _plt()
    ts = [r["t"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.4, 3.4), constrained_layout=True)
    ax.semilogy(ts, [max(r["distance"], 1e-18) for r in rows],
                label="trace distance")
    ax.semilogy(ts, [r["mixing_bound"] for r in rows], "--",
                label="mixing bound")
    ax.semilogy(ts, [r["certificate"] for r in rows], ":",
                label="certificate")
    ax.set_xlabel("t")
    ax.set_ylabel("distance to Gibbs")
    ax.set_title("macroscopic-bath thermalization")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def _fig_davies(rows, summary, path) -> None:
    plt = _plt()
    xs = [r["alpha"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.4, 3.4), constrained_layout=True)
    ax.loglog(xs, [max(r["coeff_dist"], 1e-18) for r in rows], "o-",
              label="coefficient distance")
    ax.loglog(xs, [max(r["traj_dist"], 1e-18) for r in rows], "s-",
              label="trajectory distance")
    ax.set_xlabel("alpha")
    ax.set_ylabel("distance to Davies generator")
    ax.set_title("weak-coupling collapse")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def _fig_mlsi(rows, summary, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(4.2, 3.4), constrained_layout=True)
    labels = ["2 x gap", "sampled estimate"]
    values = [2.0 * summary["gap"], summary["mlsi"]]
    ax.bar(labels, values, color=["#888888", "#336699"])
    ax.set_ylabel("entropy decay rate")
    ax.set_title("modified log-Sobolev estimate")
    ax.grid(True, axis="y", alpha=0.3)
    _save(fig, path)


_FIGURES = {
    "gap-sweep": ("gaps.csv", _fig_param_vs_gap),
    "monotonicity": ("gaps.csv", _fig_param_vs_gap),
    "ri-scaling": ("scaling.csv", _fig_loglog_scaling),
    "ri-fixed-point": ("fixed_point.csv", _fig_fixed_point),
    "mb-demo": ("trajectory.csv", _fig_trajectory),
    "davies-compare": ("compare.csv", _fig_davies),
    "mlsi": ("mlsi.csv", _fig_mlsi),
}


def render_figure(kind: str, run_dir, png_name: str = "figure.png") -> bool:
    """Render the figure for one run directory next to its CSV.

    Returns False when the kind has no figure (``validate``) or the CSV is
    missing; report generation treats that as a non-event.
    """
    run_dir = Path(run_dir)
    entry = _FIGURES.get(kind)
    if entry is None:
        return False
    csv_name, renderer = entry
    csv_path = run_dir / csv_name
    if not csv_path.exists():
        return False
    summary_path = run_dir / "summary.json"
    summary = (json.loads(summary_path.read_text())
               if summary_path.exists() else {})
    rows = read_csv(csv_path)
    if not rows:
        return False
    renderer(rows, summary, run_dir / png_name)
    return True

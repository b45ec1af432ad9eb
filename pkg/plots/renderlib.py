"""Figure rendering from experiment CSVs (schema_version 1).

Five figure kinds: cosine-scatter, cosine-scatter-3d, error-vs-n,
error-vs-p-over-n, scaling-loglog. Figure specs are TOML files in the same
key/value format as experiment configs; inputs are the documented CSV
schemas, never ad hoc columns. Guide overlays (unit circle, 2/sqrt(d)
circle, bisectrix, prediction rays) carry SVG group ids so their presence
is testable in the rendered file.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

FIGURE_KINDS = ("cosine-scatter", "cosine-scatter-3d", "error-vs-n",
                "error-vs-p-over-n", "scaling-loglog")

plt.rcParams.update({
    "figure.figsize": (4.2, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.25,
    "svg.hashsalt": "giantstep",      # deterministic SVG ids
})

_MARKERS = ["o", "s", "^", "v", "D", "P", "X", "*"]
_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


class SpecError(ValueError):
    """Figure spec or input CSV does not match the documented schema."""


def read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def require_columns(rows, columns, path):
    if not rows:
        return
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise SpecError(f"{path}: missing columns {missing}")


def _annotate_empty(ax, message="no data in input CSV"):
    ax.text(0.5, 0.5, message, transform=ax.transAxes, ha="center", va="center",
            fontsize=10, color="crimson")


def _add_circle_guides(ax, spec):
    theta = np.linspace(0, 2 * math.pi, 256)
    if spec.get("unit_circle", True):
        (line,) = ax.plot(np.cos(theta), np.sin(theta), color="black", lw=1.0)
        line.set_gid("guide-unit-circle")
    d = spec.get("noise_circle_d")
    if d:
        radius = 2.0 / math.sqrt(float(d))
        (line,) = ax.plot(radius * np.cos(theta), radius * np.sin(theta),
                          color="tab:blue", lw=1.0)
        line.set_gid("guide-noise-circle")
    if spec.get("bisectrix", False):
        (line,) = ax.plot([-1.2, 1.2], [-1.2, 1.2], color="black", lw=0.8, ls="-")
        line.set_gid("guide-bisectrix")


def _add_rays(ax, rays_path):
    rows = read_rows(rays_path)
    require_columns(rows, ["a_sign", "v_1", "v_2"], rays_path)
    for i, row in enumerate(rows):
        v = np.array([float(row["v_1"]), float(row["v_2"])])
        v = 1.2 * v / np.linalg.norm(v)
        color = "tab:blue" if int(row["a_sign"]) > 0 else "tab:purple"
        (line,) = ax.plot([0, v[0]], [0, v[1]], color=color, lw=1.6)
        line.set_gid(f"guide-prediction-ray-{i}")
        ax.plot([0, -v[0]], [0, -v[1]], color=color, lw=0.8, ls=":")


def render_cosine_scatter(spec, base_dir) -> plt.Figure:
    rows = read_rows(base_dir / spec["inputs"]["alignment"])
    fig, ax = plt.subplots()
    guides = spec.get("guides", {})
    _add_circle_guides(ax, guides)
    if rows:
        xcol, ycol = spec.get("x_column", "cos_1"), spec.get("y_column", "cos_2")
        require_columns(rows, [xcol, ycol], spec["inputs"]["alignment"])
        group_col = spec.get("group_by", "step")
        groups = sorted({row.get(group_col, "") for row in rows})
        for gi, g in enumerate(groups):
            sel = [r for r in rows if r.get(group_col, "") == g]
            x = np.array([float(r[xcol]) for r in sel])
            y = np.array([float(r[ycol]) for r in sel])
            ax.scatter(x, y, s=14, alpha=0.75, marker=_MARKERS[gi % len(_MARKERS)],
                       color=_COLORS[gi % len(_COLORS)],
                       label=f"{group_col}={g}" if len(groups) > 1 else None)
        if len(groups) > 1:
            ax.legend(fontsize=7, loc="upper left")
    else:
        _annotate_empty(ax)
    if "rays" in spec.get("guides", {}):
        _add_rays(ax, base_dir / spec["guides"]["rays"])
    ax.set_xlabel(spec.get("xlabel", "cosine with teacher direction 1"))
    ax.set_ylabel(spec.get("ylabel", "cosine with teacher direction 2"))
    ax.set_xlim(-1.3, 1.3)
    ax.set_ylim(-1.3, 1.3)
    ax.set_aspect("equal")
    return fig


def render_cosine_scatter_3d(spec, base_dir) -> plt.Figure:
    rows = read_rows(base_dir / spec["inputs"]["alignment"])
    fig = plt.figure()
    ax = fig.add_subplot(projection="3d")
    if rows:
        require_columns(rows, ["cos_1", "cos_2", "cos_3"], spec["inputs"]["alignment"])
        group_col = spec.get("group_by", "step")
        groups = sorted({row.get(group_col, "") for row in rows})
        for gi, g in enumerate(groups):
            sel = [r for r in rows if r.get(group_col, "") == g]
            pts = np.array([[float(r["cos_1"]), float(r["cos_2"]), float(r["cos_3"])]
                            for r in sel])
            ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=12,
                       marker=_MARKERS[gi % len(_MARKERS)],
                       color=_COLORS[gi % len(_COLORS)],
                       label=f"{group_col}={g}" if len(groups) > 1 else None)
        if len(groups) > 1:
            ax.legend(fontsize=7)
    ax.set_xlabel("cos 1")
    ax.set_ylabel("cos 2")
    ax.set_zlabel("cos 3")
    for lim in (ax.set_xlim, ax.set_ylim, ax.set_zlim):
        lim(-1.1, 1.1)
    return fig


def _series_plot(spec, base_dir, x_of_row, xlabel, logx=False):
    path = base_dir / spec["inputs"]["errors"]
    rows = read_rows(path)
    fig, ax = plt.subplots()
    if not rows:
        _annotate_empty(ax)
        return fig
    y_columns = spec.get("y_columns")
    if y_columns:
        require_columns(rows, y_columns, path)
        series = {col: [(x_of_row(r), float(r[col])) for r in rows] for col in y_columns}
    else:
        ycol = spec.get("y_column", "test_mse_normalized")
        group_col = spec.get("group_by", "method")
        require_columns(rows, [ycol], path)
        series = {}
        for row in rows:
            series.setdefault(row.get(group_col, "all"), []).append(
                (x_of_row(row), float(row[ycol])))
    for si, (label, pts) in enumerate(sorted(series.items())):
        xs = sorted({x for x, _ in pts})
        med = [float(np.median([y for x, y in pts if x == xv])) for xv in xs]
        lo = [float(np.quantile([y for x, y in pts if x == xv], 0.25)) for xv in xs]
        hi = [float(np.quantile([y for x, y in pts if x == xv], 0.75)) for xv in xs]
        color = _COLORS[si % len(_COLORS)]
        ax.plot(xs, med, marker=_MARKERS[si % len(_MARKERS)], color=color, label=label)
        ax.fill_between(xs, lo, hi, alpha=0.2, color=color)
    if logx:
        ax.set_xscale("log")
    if spec.get("logy", True):
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(spec.get("ylabel", "test error"))
    ax.legend(fontsize=7)
    return fig


def render_error_vs_n(spec, base_dir) -> plt.Figure:
    xcol = spec.get("x_column", "n")
    return _series_plot(spec, base_dir, lambda r: float(r[xcol]),
                        spec.get("xlabel", xcol), logx=spec.get("logx", True))


def render_error_vs_p_over_n(spec, base_dir) -> plt.Figure:
    return _series_plot(spec, base_dir, lambda r: float(r["p"]) / float(r["n"]),
                        spec.get("xlabel", "p / n"), logx=True)


def render_scaling_loglog(spec, base_dir) -> plt.Figure:
    path = base_dir / spec["inputs"]["scaling"]
    rows = read_rows(path)
    fig, ax = plt.subplots()
    if not rows:
        _annotate_empty(ax)
        return fig
    require_columns(rows, ["d", "seed", "statistic", "value"], path)
    stats = spec.get("statistics") or sorted({r["statistic"] for r in rows})
    for si, stat in enumerate(stats):
        sel = [r for r in rows if r["statistic"] == stat]
        dims = sorted({int(r["d"]) for r in sel})
        med = [float(np.median([float(r["value"]) for r in sel if int(r["d"]) == dv]))
               for dv in dims]
        color = _COLORS[si % len(_COLORS)]
        ax.loglog(dims, med, marker=_MARKERS[si % len(_MARKERS)], color=color, label=stat)
        if len(dims) >= 2:
            slope = np.polyfit(np.log(dims), np.log(med), 1)[0]
            guide = med[0] * (np.array(dims) / dims[0]) ** slope
            ax.loglog(dims, guide, ls="--", lw=0.8, color=color)
            ax.annotate(f"slope {slope:.2f}", (dims[-1], med[-1]), fontsize=7,
                        textcoords="offset points", xytext=(4, 4), color=color)
    ax.set_xlabel("d")
    ax.set_ylabel(spec.get("ylabel", "median statistic"))
    ax.legend(fontsize=7)
    return fig


RENDERERS = {
    "cosine-scatter": render_cosine_scatter,
    "cosine-scatter-3d": render_cosine_scatter_3d,
    "error-vs-n": render_error_vs_n,
    "error-vs-p-over-n": render_error_vs_p_over_n,
    "scaling-loglog": render_scaling_loglog,
}


def load_figure_spec(path) -> dict:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if "figure" not in data:
        raise SpecError("figure spec needs a [figure] table")
    spec = data["figure"]
    spec["inputs"] = data.get("inputs", {})
    spec["guides"] = data.get("guides", {})
    if spec.get("kind") not in FIGURE_KINDS:
        raise SpecError(f"figure.kind must be one of {FIGURE_KINDS}")
    if "output" not in spec:
        raise SpecError("figure.output is required")
    return spec


def render_spec(path) -> Path:
    """Render one figure spec; returns the written image path."""
    path = Path(path)
    spec = load_figure_spec(path)
    base_dir = path.parent
    fig = RENDERERS[spec["kind"]](spec, base_dir)
    if spec.get("title"):
        fig.suptitle(spec["title"], fontsize=9)
    out = base_dir / spec["output"]
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=out.suffix.lstrip("."), metadata=_deterministic_metadata(out))
    plt.close(fig)
    return out


def _deterministic_metadata(out: Path):
    # strip the embedded timestamp so re-rendering is idempotent
    if out.suffix == ".svg":
        return {"Date": None}
    if out.suffix == ".pdf":
        return {"CreationDate": None}
    return None

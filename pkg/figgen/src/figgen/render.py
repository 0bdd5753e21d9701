"""Render diagnostic CSV bundles into figures.

Three figure kinds:
  diag-trace        per-step orthogonality levels and residual-stack norm,
                    log y-axis, one panel per input CSV
  ritz-convergence  watched Ritz values vs k with horizontal reference
                    lines and right-edge rug marks at the true values
  error-curve       |s_1 - s_2| (first two watched columns) vs k

Rendering is deterministic: fixed figure geometry, no timestamps, pinned
PNG metadata.
"""

import csv
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("diag-trace", "ritz-convergence", "error-curve")

plt.rcParams["figure.figsize"] = (6.4, 4.2)
plt.rcParams["font.size"] = 9
plt.rcParams["svg.hashsalt"] = "figgen"


class RenderError(RuntimeError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    refs: list = field(default_factory=list)
    logy: bool = False
    caption: str = ""


def read_columns(path):
    """CSV -> dict of float columns; header row is mandatory."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file, no header") from None
        rows = [r for r in reader if r]
    if not rows:
        raise RenderError(f"{path}: zero data rows")
    cols = {}
    for j, name in enumerate(header):
        cols[name] = [float(r[j]) for r in rows]
    return cols


def need(cols, name, path):
    if name not in cols:
        raise RenderError(f"{path}: missing column {name!r}")
    return cols[name]


def _finite_pairs(ks, ys):
    pts = [(k, y) for k, y in zip(ks, ys) if math.isfinite(y)]
    if not pts:
        return [], []
    return [p[0] for p in pts], [p[1] for p in pts]


def _save(fig, output):
    fig.savefig(output, dpi=150, metadata={"Software": "figgen"})
    plt.close(fig)


def _render_diag_trace(spec):
    n = len(spec.inputs)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 3.2 * nrows), squeeze=False
    )
    series = [
        ("normXk_over_normA", "residual stack / matrix norm"),
        ("mu", "left level"),
        ("nu", "right level"),
        ("omega_u", "pairwise left"),
        ("omega_v", "pairwise right"),
    ]
    for idx, path in enumerate(spec.inputs):
        ax = axes[idx // ncols][idx % ncols]
        cols = read_columns(path)
        ks = need(cols, "k", path)
        for name, label in series:
            if name not in cols:
                if name in ("normXk_over_normA",):
                    raise RenderError(f"{path}: missing column {name!r}")
                continue
            xs, ys = _finite_pairs(ks, cols[name])
            if xs:
                ax.plot(xs, ys, label=label, linewidth=1.0)
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_title(_basename(path), fontsize=8)
        ax.legend(fontsize=6, loc="best")
    for idx in range(n, nrows * ncols):
        axes[idx // ncols][idx % ncols].set_axis_off()
    if spec.caption:
        fig.suptitle(spec.caption, fontsize=10)
    fig.tight_layout()
    _save(fig, spec.output)


def _ritz_columns(cols, path):
    names = [c for c in cols if c.startswith("s_")]
    if not names:
        raise RenderError(f"{path}: missing column 's_1'")
    return names


def _render_ritz_convergence(spec):
    path = spec.inputs[0]
    cols = read_columns(path)
    ks = need(cols, "k", path)
    fig, ax = plt.subplots()
    for name in _ritz_columns(cols, path):
        xs, ys = _finite_pairs(ks, cols[name])
        if xs:
            ax.plot(xs, ys, linewidth=1.0, label=name)
    for ref in spec.refs:
        ax.axhline(ref, color="0.7", linewidth=0.5, zorder=0)
    if spec.refs:
        # rug marks at the right edge, like reference spectra ticks
        xmax = max(ks)
        ax.plot(
            [xmax] * len(spec.refs), spec.refs,
            marker="_", linestyle="none", color="k", markersize=6,
        )
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel("approximate singular values")
    ax.legend(fontsize=7)
    if spec.caption:
        ax.set_title(spec.caption, fontsize=10)
    fig.tight_layout()
    _save(fig, spec.output)


def _render_error_curve(spec):
    path = spec.inputs[0]
    cols = read_columns(path)
    ks = need(cols, "k", path)
    names = _ritz_columns(cols, path)
    if len(names) < 2:
        raise RenderError(f"{path}: missing column 's_2'")
    s1 = cols[names[0]]
    s2 = cols[names[1]]
    diffs = [abs(a - b) for a, b in zip(s1, s2)]
    xs, ys = _finite_pairs(ks, diffs)
    fig, ax = plt.subplots()
    ax.plot(xs, ys, linewidth=1.0, label=f"|{names[0]} - {names[1]}|")
    ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel("separation of the leading pair")
    ax.legend(fontsize=7)
    if spec.caption:
        ax.set_title(spec.caption, fontsize=10)
    fig.tight_layout()
    _save(fig, spec.output)


def render(spec):
    """Render one figure; raises RenderError on schema problems."""
    if spec.kind not in KINDS:
        raise RenderError(f"unknown figure kind {spec.kind!r}")
    if not spec.inputs:
        raise RenderError("no input CSVs")
    if spec.kind == "diag-trace":
        _render_diag_trace(spec)
    elif spec.kind == "ritz-convergence":
        _render_ritz_convergence(spec)
    else:
        _render_error_curve(spec)
    return spec.output


def _basename(path):
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0]

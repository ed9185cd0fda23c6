"""SVG and matplotlib renderings of parameter-domain results and benchmark reports."""
from __future__ import annotations

import numpy as np


def polylines_svg(spec, lines, source=None, size=800):
    u0, u1, v0, v1 = spec.domain
    sx = size / (u1 - u0)
    sy = size * (v1 - v0) / (u1 - u0) / (v1 - v0)
    h = size * (v1 - v0) / (u1 - u0)

    def path(uv):
        x = (uv[:, 0] - u0) * sx
        y = h - (uv[:, 1] - v0) * sy
        return " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h:.0f}" '
           f'viewBox="0 0 {size} {h:.0f}">',
           f'<rect width="{size}" height="{h:.0f}" fill="white" stroke="black"/>']
    if source is not None:
        for uv, closed in source:
            tag = "polygon" if closed else "polyline"
            out.append(f'<{tag} points="{path(np.asarray(uv))}" fill="none" stroke="red" stroke-width="1"/>')
    for uv, closed in lines:
        tag = "polygon" if closed else "polyline"
        out.append(f'<{tag} points="{path(np.asarray(uv))}" fill="none" stroke="blue" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _label_color(k):
    import colorsys
    r, g, b = colorsys.hsv_to_rgb((0.618034 * k) % 1.0, 0.45, 0.95)
    return f"#{int(255 * r):02x}{int(255 * g):02x}{int(255 * b):02x}"


def voronoi_svg(labeled, size=800):
    """Refined faces filled by site label, label boundaries (bisectors) stroked."""
    spec = labeled.spec
    u0, u1, v0, v1 = spec.domain
    sc = size / (u1 - u0)
    h = (v1 - v0) * sc
    fuv = labeled.face_uv()
    lab = labeled.labels

    def pts(q):
        return " ".join(f"{(a - u0) * sc:.2f},{h - (b - v0) * sc:.2f}" for a, b in q)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h:.0f}" '
           f'viewBox="0 0 {size} {h:.0f}">',
           f'<rect width="{size}" height="{h:.0f}" fill="white" stroke="black"/>']
    for f in np.flatnonzero(lab >= 0):
        out.append(f'<polygon points="{pts(fuv[f])}" fill="{_label_color(int(lab[f]))}" stroke="none"/>')
    # edges shared by faces with different labels
    F = labeled.faces
    a = F.ravel()
    b = np.roll(F, -1, axis=1).ravel()
    key = np.minimum(a, b) * np.int64(len(labeled.uv)) + np.maximum(a, b)
    face = np.repeat(np.arange(len(F)), 3)
    corner = np.tile(np.arange(3), len(F))
    order = np.argsort(key, kind="mergesort")
    ks = key[order]
    same = np.flatnonzero(ks[1:] == ks[:-1])
    for i in same:
        fa, fb = face[order[i]], face[order[i + 1]]
        if lab[fa] != lab[fb] and lab[fa] >= 0 and lab[fb] >= 0:
            c = corner[order[i]]
            seg = np.stack([fuv[fa, c], fuv[fa, (c + 1) % 3]])
            out.append(f'<polyline points="{pts(seg)}" fill="none" stroke="black" stroke-width="0.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# matplotlib report figures
# ---------------------------------------------------------------------------

STYLE = {
    "lines.linewidth": 1.5,
    "font.size": 10.0,
    "axes.linewidth": 1.0,
    "axes.labelsize": "medium",
    "xtick.direction": "out",
    "ytick.direction": "out",
    "legend.fontsize": 8,
    "legend.frameon": False,
    "figure.figsize": (5.0, 3.5),
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_scaling(rows, fit, path):
    """Wall time against segment count with the least-squares line."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.array([r["segments"] for r in rows], float)
        y = np.array([r["seconds"] for r in rows], float)
        ax.plot(x, y, "o", label="measured")
        xs = np.linspace(0, x.max() * 1.05, 50)
        ax.plot(xs, fit["slope"] * xs + fit["intercept"], "--",
                label=f"fit, R$^2$ = {fit['r2']:.3f}")
        ax.set_xlabel("source segments")
        ax.set_ylabel("time (s)")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)


def plot_distance_sweep(rows, path):
    """Stacked phase times against offset distance."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        d = np.array([r["d"] for r in rows], float)
        bottom = np.zeros(len(rows))
        w = 0.6 * (np.min(np.diff(d)) if len(d) > 1 else 0.1)
        for key, lab in (("phase_field", "field"), ("phase_voronoi", "Voronoi"),
                         ("phase_extract", "extract")):
            h = np.array([r[key] for r in rows], float)
            ax.bar(d, h, w, bottom=bottom, label=lab)
            bottom += h
        ax.set_xlabel("offset distance")
        ax.set_ylabel("time (s)")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)


def _wrapped_pieces(spec, uv, closed):
    """Split a polyline where it jumps across a periodic seam after wrapping."""
    uv = spec.wrap(np.asarray(uv, dtype=float))
    if closed:
        uv = np.vstack([uv, uv[:1]])
    jump = np.any(np.abs(np.diff(uv, axis=0)) > 0.5 * spec.extent, axis=1)
    return np.split(uv, np.flatnonzero(jump) + 1)


def plot_offsets(spec, lines, source, path, title=None):
    """Parameter-domain view of source (red) and offset (blue) polylines."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for group, color in ((source or [], "tab:red"), (lines, "tab:blue")):
            for uv, closed in group:
                for piece in _wrapped_pieces(spec, uv, closed):
                    ax.plot(piece[:, 0], piece[:, 1], color=color, lw=1.0)
        u0, u1, v0, v1 = spec.domain
        ax.set_xlim(u0, u1)
        ax.set_ylim(v0, v1)
        ax.set_aspect("equal")
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)


def plot_geodesic_deviation(rows, path):
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        f = np.array([r["faces"] for r in rows], float)
        ax.loglog(f, [r["mean_rel_dev"] * 100 for r in rows], "o-", label="mean")
        ax.loglog(f, [r["max_rel_dev"] * 100 for r in rows], "s--", label="max")
        ax.set_xlabel("faces")
        ax.set_ylabel("deviation (%)")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)

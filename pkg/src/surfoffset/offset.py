"""Offset level-set extraction over a labeled mesh.

Each refined face holds a linear distance function; its ``d`` level is a
single segment.  Crossing points live on undirected edges and are computed
once per edge, so the segments of neighbouring faces share endpoints
exactly and stitch without any tolerance matching.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .surface import evaluate

log = logging.getLogger(__name__)

SOS = 1e-12


@dataclass
class Polyline:
    uv: np.ndarray          # (n, 2), consecutive points unwrapped on periodic axes
    closed: bool
    sites: np.ndarray       # (n,) source site per vertex
    xyz: np.ndarray | None = None   # densified lift

    def __len__(self):
        return len(self.uv)


@dataclass
class OffsetResult:
    polylines: list
    offset_distance: float
    spec: object = None
    warnings: list = field(default_factory=list)

    @property
    def n_closed(self):
        return sum(p.closed for p in self.polylines)

    def points_xyz(self):
        if not self.polylines:
            return np.zeros((0, 3))
        return np.vstack([p.xyz for p in self.polylines])

    def sample(self, n):
        """``n`` points spread by arc length over the lifted polylines."""
        segs = []
        for p in self.polylines:
            x = p.xyz
            if p.closed:
                x = np.vstack([x, x[:1]])
            if len(x) > 1:
                segs.append(np.stack([x[:-1], x[1:]], axis=1))
        if not segs:
            return np.zeros((0, 3))
        s = np.concatenate(segs)
        return sample_segments(s, n)

    def to_dict(self):
        return {
            "offset_distance": self.offset_distance,
            "polylines": [
                {
                    "closed": bool(p.closed),
                    "uv": np.round(p.uv, 15).tolist(),
                    "sites": p.sites.tolist(),
                    "xyz": np.round(p.xyz, 15).tolist(),
                }
                for p in self.polylines
            ],
            "warnings": list(self.warnings),
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    def write_obj(self, path):
        with open(path, "w") as fh:
            base = 1
            for p in self.polylines:
                for x, y, z in p.xyz:
                    fh.write(f"v {x:.12g} {y:.12g} {z:.12g}\n")
                idx = list(range(base, base + len(p.xyz)))
                if p.closed:
                    idx.append(base)
                fh.write("l " + " ".join(map(str, idx)) + "\n")
                base += len(p.xyz)

    def write_svg(self, path, source=None, size=800):
        from .plotting import polylines_svg
        Path(path).write_text(polylines_svg(self.spec, [(p.uv, p.closed) for p in self.polylines],
                                            source=source, size=size))


def sample_segments(segs, n):
    """Uniform-by-length samples on 3D segments ``(m, 2, 3)``."""
    L = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
    cum = np.concatenate([[0.0], np.cumsum(L)])
    if cum[-1] == 0:
        return segs[:, 0][:1].repeat(n, 0)
    s = (np.arange(n) + 0.5) * cum[-1] / n
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(L) - 1)
    t = ((s - cum[k]) / np.where(L[k] > 0, L[k], 1.0))[:, None]
    return segs[k, 0] + t * (segs[k, 1] - segs[k, 0])


# ---------------------------------------------------------------------------
# per-face level segment
# ---------------------------------------------------------------------------

def face_level_segment(dists, unfolded, d):
    """Segment of the ``d`` level of the linear field over one triangle.

    Returns ``None`` or a ``(2, 2)`` array of endpoints in the unfolded frame.
    Values exactly equal to ``d`` are nudged up by ``1e-12 * d``.
    """
    v = np.asarray(dists, dtype=float).copy()
    tri = np.asarray(unfolded, dtype=float)
    v[v == d] += SOS * max(abs(d), 1e-300)
    if d < v.min() or d > v.max():
        return None
    pts = []
    for i in range(3):
        j = (i + 1) % 3
        if (v[i] - d) * (v[j] - d) < 0:
            t = (d - v[i]) / (v[j] - v[i])
            pts.append(tri[i] + t * (tri[j] - tri[i]))
    if len(pts) != 2:
        return None
    return np.array(pts)


# ---------------------------------------------------------------------------
# marching and stitching
# ---------------------------------------------------------------------------

def march(faces, values, d):
    """Directed level segments over a triangle mesh with per-vertex values.

    Returns ``(edges, t, seg, seg_face)``: the crossed undirected edges as
    vertex pairs ``(a, b)`` with ``a < b``, the crossing parameter from ``a``,
    and per face segment the pair of crossing indices, oriented so the side
    below ``d`` lies on the left for counterclockwise faces.
    """
    faces = np.asarray(faces, np.int64)
    val = np.asarray(values, dtype=float).copy()
    val[val == d] += SOS * max(abs(d), 1e-300)
    above = val[faces] > d
    cnt = above.sum(axis=1)
    fsel = np.flatnonzero((cnt == 1) | (cnt == 2))
    if len(fsel) == 0:
        return np.zeros((0, 2), np.int64), np.zeros(0), np.zeros((0, 2), np.int64), np.zeros(0, np.int64)
    F = faces[fsel]
    A = above[fsel]
    # edge k runs from corner k to corner k+1; "up" edges go from below to above
    a_k = A
    b_k = np.roll(A, -1, axis=1)
    up = ~a_k & b_k
    down = a_k & ~b_k
    ku = np.argmax(up, axis=1)
    kd = np.argmax(down, axis=1)
    rows = np.arange(len(F))

    def edge_of(k):
        p = F[rows, k]
        q = F[rows, (k + 1) % 3]
        return np.minimum(p, q), np.maximum(p, q)

    ua, ub = edge_of(ku)
    da, db = edge_of(kd)
    keys = np.concatenate([ua * (faces.max() + 1) + ub, da * (faces.max() + 1) + db])
    uniq, inv = np.unique(keys, return_inverse=True)
    n = len(F)
    seg = np.stack([inv[:n], inv[n:]], axis=1)
    nv = faces.max() + 1
    ea, eb = uniq // nv, uniq % nv
    t = (d - val[ea]) / (val[eb] - val[ea])
    return np.stack([ea, eb], axis=1), t, seg, fsel


def stitch(seg, n_nodes):
    """Chain directed segments ``(tail, head)`` into maximal polylines.

    Returns a list of ``(node_indices, segment_indices, closed)``.
    """
    nxt = np.full(n_nodes, -1, np.int64)
    nseg = np.full(n_nodes, -1, np.int64)
    has_in = np.zeros(n_nodes, bool)
    for i, (a, b) in enumerate(seg):
        if a == b:
            continue
        if nxt[a] >= 0:
            # a crossing can only start one segment on a manifold mesh; keep the first
            log.debug("crossing %d starts two segments", a)
            continue
        nxt[a] = b
        nseg[a] = i
        has_in[b] = True
    used = np.zeros(n_nodes, bool)
    out = []
    starts = [v for v in range(n_nodes) if nxt[v] >= 0 and not has_in[v]]
    for s in starts:
        nodes, segs = [s], []
        used[s] = True
        v = s
        while nxt[v] >= 0 and not used[nxt[v]]:
            segs.append(nseg[v])
            v = nxt[v]
            nodes.append(v)
            used[v] = True
        out.append((nodes, segs, False))
    for s in range(n_nodes):
        if used[s] or nxt[s] < 0:
            continue
        nodes, segs = [s], []
        used[s] = True
        v = s
        closed = False
        while nxt[v] >= 0:
            segs.append(nseg[v])
            w = nxt[v]
            if w == s:
                closed = True
                break
            if used[w]:
                break
            v = w
            nodes.append(v)
            used[v] = True
        out.append((nodes, segs, closed))
    return out


def densify_lift(spec, uv, closed, tol, max_depth=12):
    """Lift a parameter polyline, subdividing segments whose lifted midpoint
    strays more than ``tol`` from the chord."""
    pts = np.asarray(uv, dtype=float)
    if closed:
        pts = np.vstack([pts, spec.unwrap_near(pts[0], pts[-1])])
    out_uv = [pts[:1]]
    a, b = pts[:-1], pts[1:]
    pieces = _refine(spec, a, b, tol, max_depth)
    # pieces is a list (per segment) of interior+end points in order
    for seg in pieces:
        out_uv.append(seg)
    allp = np.vstack(out_uv)
    if closed:
        allp = allp[:-1]
    return evaluate(spec, spec.wrap(allp)), allp


def _refine(spec, a, b, tol, depth):
    """Per segment, the subdivision points after ``a`` up to and including ``b``."""
    if len(a) == 0:
        return []
    xa = evaluate(spec, spec.wrap(a))
    xb = evaluate(spec, spec.wrap(b))
    m = 0.5 * (a + b)
    xm = evaluate(spec, spec.wrap(m))
    dev = np.linalg.norm(xm - 0.5 * (xa + xb), axis=1)
    split = (dev > tol) & (depth > 0)
    out = [None] * len(a)
    idx = np.flatnonzero(split)
    for i in np.flatnonzero(~split):
        out[i] = b[i:i + 1]
    if len(idx):
        left = _refine(spec, a[idx], m[idx], tol, depth - 1)
        right = _refine(spec, m[idx], b[idx], tol, depth - 1)
        for j, i in enumerate(idx):
            out[i] = np.vstack([left[j], right[j]])
    return out


def extract_offset(labeled, d, cutoff=None, diameter=None):
    """Offset polylines at distance ``d`` from a labeled mesh."""
    if not d > 0:
        raise ConfigurationError("offset distance must be positive")
    if cutoff is not None and d >= cutoff:
        raise ConfigurationError(f"offset distance {d} is not below the field cutoff {cutoff}")
    spec = labeled.spec
    edges, t, seg, fsel = march(labeled.faces, labeled.distance, d)
    res = OffsetResult([], float(d), spec)
    if len(seg) == 0:
        return res
    pa = labeled.uv[edges[:, 0]]
    pb = spec.unwrap_near(labeled.uv[edges[:, 1]], pa)
    cross = spec.wrap(pa + t[:, None] * (pb - pa))
    seg_label = labeled.labels[fsel]
    node_label = np.full(len(edges), -1, np.int64)
    node_label[seg[:, 0]] = seg_label
    node_label[seg[:, 1]] = np.where(node_label[seg[:, 1]] < 0, seg_label, node_label[seg[:, 1]])
    if diameter is None:
        diameter = spec.diameter_estimate()
    tol = 1e-4 * diameter
    n_open = 0
    for nodes, _, closed in stitch(seg, len(edges)):
        if len(nodes) < 2:
            continue
        uv = cross[nodes].copy()
        for i in range(1, len(uv)):
            uv[i] = spec.unwrap_near(uv[i], uv[i - 1])
        pl = Polyline(uv, closed, node_label[nodes])
        pl.xyz, _ = densify_lift(spec, uv, closed, tol)
        res.polylines.append(pl)
        n_open += not closed
    if n_open:
        msg = f"{n_open} offset polylines are open (clipped at the domain or band boundary)"
        res.warnings.append(msg)
        log.warning(msg)
    return res


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

def brute_force_offset(mesh, sites, d, refine=2):
    """Level-``d`` crossing points of an exhaustive nearest-site field.

    A grid ``refine`` times denser than ``mesh`` gets the same sites; every
    vertex then takes the minimum flip-shortened distance over all sites and
    the crossings of all edges are returned as ``(uv, xyz)``.  Intended only
    for small instances.
    """
    from . import _kernels as K
    from .mesh import build_uniform
    spec = mesh.spec
    nu, nv = mesh.grid["shape"]
    fine = build_uniform(spec, refine * (nu - 1) + 1, refine * (nv - 1) + 1)
    ids = np.array([fine.insert_site(p) for p in sites.uv], np.int64)
    start, adj = fine.prepare()
    cache = K.new_cache()
    ns = len(ids)
    qv = np.repeat(np.arange(fine.n_v), ns)
    qs = np.tile(np.arange(ns), fine.n_v)
    K.pair_distances(fine.kmesh(), start, adj, fine.n_v, qv, qs, ids, fine.undo_log,
                     1e-10, 10_000, 4096, cache)
    D = np.array([cache[int(k)] for k in (qv * ns + qs)]).reshape(fine.n_v, ns)
    val = D.min(axis=1)
    e = np.arange(fine.n_e)
    a, b = fine.he_vert[2 * e], fine.he_vert[2 * e + 1]
    va, vb = val[a], val[b]
    hit = (va - d) * (vb - d) < 0
    tt = (d - va[hit]) / (vb[hit] - va[hit])
    pa = fine.uv[a[hit]]
    pb = spec.unwrap_near(fine.uv[b[hit]], pa)
    # edges touching a collapsed pole stand for meridians through that pole
    pa[fine.pole[a[hit]], 0] = pb[fine.pole[a[hit]], 0]
    pb[fine.pole[b[hit]], 0] = pa[fine.pole[b[hit]], 0]
    uv = spec.wrap(pa + tt[:, None] * (pb - pa))
    return uv, evaluate(spec, uv)

"""Geodesic Voronoi decomposition by cutting each triangle with distance planes.

Inside an unfolded triangle the distance to a candidate site is the linear
interpolation of its three corner distances, i.e. a plane over the triangle.
The lower envelope of these planes splits the triangle into convex pieces,
one per winning site.  Pieces from all triangles are stitched into a refined
triangle mesh whose faces each carry one site label.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InternalError

log = logging.getLogger(__name__)

ORIGINAL, VORONOI_VERTEX, SITE, FAN = 0, 1, 2, 3
KIND_NAMES = ("original", "voronoi_vertex", "site", "fan")

# candidate sites between corner labels are added when the labels span at
# most this many consecutive curve sites
WINDOW = 48


@dataclass
class LabeledMesh:
    """Refined triangulation of the working band with one site label per face."""
    uv: np.ndarray
    distance: np.ndarray
    kind: np.ndarray
    faces: np.ndarray
    labels: np.ndarray
    parent: np.ndarray
    spec: object = None
    n_original_faces: int = 0
    timings: dict = field(default_factory=dict)

    @property
    def n_faces(self):
        return len(self.faces)

    def face_uv(self):
        """Corner parameter coordinates with periodic unwrapping per face."""
        p = self.uv[self.faces]
        ref = p[:, 0]
        return np.stack([ref, self.spec.unwrap_near(p[:, 1], ref),
                         self.spec.unwrap_near(p[:, 2], ref)], axis=1)


# ---------------------------------------------------------------------------
# per-triangle lower envelope
# ---------------------------------------------------------------------------

@njit(cache=True)
def _plane(tri, d):
    """Coefficients ``(c0, c1, c2)`` of the linear function through corner values."""
    x1 = tri[1, 0]
    x2, y2 = tri[2, 0], tri[2, 1]
    c0 = d[0]
    c1 = (d[1] - d[0]) / x1
    c2 = (d[2] - d[0] - c1 * x2) / y2
    return c0, c1, c2


@njit(cache=True)
def _clip(px, py, a, b, c, strict):
    """Keep the part of a convex polygon where ``a + b x + c y <= 0`` (``< 0`` if strict)."""
    n = len(px)
    ox = np.empty(2 * n + 2)
    oy = np.empty(2 * n + 2)
    m = 0
    for i in range(n):
        j = (i + 1) % n
        fi = a + b * px[i] + c * py[i]
        fj = a + b * px[j] + c * py[j]
        ini = fi < 0.0 if strict else fi <= 0.0
        inj = fj < 0.0 if strict else fj <= 0.0
        if ini:
            ox[m] = px[i]
            oy[m] = py[i]
            m += 1
        if ini != inj:
            t = fi / (fi - fj)
            ox[m] = px[i] + t * (px[j] - px[i])
            oy[m] = py[i] + t * (py[j] - py[i])
            m += 1
    return ox[:m], oy[:m]


@njit(cache=True)
def _area(px, py):
    s = 0.0
    n = len(px)
    for i in range(n):
        j = (i + 1) % n
        s += px[i] * py[j] - px[j] * py[i]
    return 0.5 * s


@njit(cache=True)
def cut_triangle_kernel(tri, sites, dists, min_area):
    """Lower-envelope pieces of candidate planes over one unfolded triangle.

    ``dists[k]`` holds the three corner distances of ``sites[k]``.  Returns
    flat ``(xs, ys, starts, labels, owner)`` where piece ``p`` spans
    ``xs[starts[p]:starts[p+1]]`` and ``owner[p]`` indexes the candidate.
    Identical planes go to the smaller site id.
    """
    k = len(sites)
    coef = np.empty((k, 3))
    for i in range(k):
        c0, c1, c2 = _plane(tri, dists[i])
        coef[i, 0] = c0
        coef[i, 1] = c1
        coef[i, 2] = c2
    xs = []
    ys = []
    starts = [0]
    labels = []
    owner = []
    for i in range(k):
        px = tri[:, 0].copy()
        py = tri[:, 1].copy()
        for j in range(k):
            if j == i or len(px) == 0:
                continue
            strict = sites[j] < sites[i]
            px, py = _clip(px, py, coef[i, 0] - coef[j, 0], coef[i, 1] - coef[j, 1],
                           coef[i, 2] - coef[j, 2], strict)
        if len(px) < 3 or _area(px, py) <= min_area:
            continue
        for q in range(len(px)):
            xs.append(px[q])
            ys.append(py[q])
        starts.append(len(xs))
        labels.append(sites[i])
        owner.append(i)
    return (np.array(xs), np.array(ys), np.array(starts), np.array(labels, np.int64),
            np.array(owner, np.int64))


def cut_triangle(unfolded, candidates):
    """Split an unfolded triangle among candidate sites by their distance planes.

    ``candidates`` is a list of ``(site_id, (d0, d1, d2))``.  Returns a list of
    ``(polygon, site_id)`` with counterclockwise ``(m, 2)`` polygons.
    """
    tri = np.asarray(unfolded, dtype=float)
    if not candidates:
        raise ValueError("cut_triangle needs at least one candidate")
    sites = np.array([c[0] for c in candidates], np.int64)
    d = np.array([c[1] for c in candidates], dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("candidate distances must be finite")
    diam = float(np.max(np.linalg.norm(tri[:, None] - tri[None], axis=-1)))
    xs, ys, starts, labels, _ = cut_triangle_kernel(tri, sites, d, 1e-12 * diam * diam)
    return [(np.stack([xs[a:b], ys[a:b]], axis=1), int(s))
            for a, b, s in zip(starts[:-1], starts[1:], labels)]


# ---------------------------------------------------------------------------
# candidate sets
# ---------------------------------------------------------------------------

@njit(cache=True)
def face_candidates(fv, nearest, site_curve, site_pos, curve_start, curve_len,
                    curve_closed, window):
    """Candidate sites per face: corner labels plus the curve sites between them."""
    nf = len(fv)
    ptr = np.zeros(nf + 1, np.int64)
    out = []
    for f in range(nf):
        l0, l1, l2 = nearest[fv[f, 0]], nearest[fv[f, 1]], nearest[fv[f, 2]]
        c = site_curve[l0]
        added = False
        if site_curve[l1] == c and site_curve[l2] == c:
            n = curve_len[c]
            a0, a1, a2 = site_pos[l0], site_pos[l1], site_pos[l2]
            lo = min(a0, a1, a2)
            hi = max(a0, a1, a2)
            if curve_closed[c]:
                # smallest cyclic arc covering the three positions
                ps = np.sort(np.array([a0, a1, a2]))
                gaps = np.array([ps[1] - ps[0], ps[2] - ps[1], ps[0] + n - ps[2]])
                g = np.argmax(gaps)
                start = ps[(g + 1) % 3]
                span = n - gaps[g]
            else:
                start = lo
                span = hi - lo
            if span <= window:
                for q in range(span + 1):
                    out.append(curve_start[c] + (start + q) % n)
                added = True
        if not added:
            out.append(l0)
            if l1 != l0:
                out.append(l1)
            if l2 != l0 and l2 != l1:
                out.append(l2)
        ptr[f + 1] = len(out)
    return ptr, np.array(out, np.int64)


@njit(cache=True)
def missing_pairs(fv, ptr, cands, n_sites, cache):
    vs = []
    ss = []
    seen = {}
    for f in range(len(fv)):
        for q in range(ptr[f], ptr[f + 1]):
            s = cands[q]
            for k in range(3):
                v = fv[f, k]
                key = v * n_sites + s
                if key in cache or key in seen:
                    continue
                seen[key] = True
                vs.append(v)
                ss.append(s)
    return np.array(vs, np.int64), np.array(ss, np.int64)


@njit(cache=True)
def gather_dists(fv, ptr, cands, n_sites, cache):
    out = np.empty((len(cands), 3))
    for f in range(len(fv)):
        for q in range(ptr[f], ptr[f + 1]):
            for k in range(3):
                out[q, k] = cache[fv[f, k] * n_sites + cands[q]]
    return out


# ---------------------------------------------------------------------------
# cutting all faces and stitching the pieces
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cut_all(tris, ptr, cands, dists):
    """Cut every face; returns flattened pieces with their face and plane."""
    xs = []
    ys = []
    pstart = [0]
    pface = []
    plabel = []
    pcoef = []
    for f in range(len(tris)):
        tri = tris[f]
        a = ptr[f]
        b = ptr[f + 1]
        diam = 0.0
        for i in range(3):
            for j in range(3):
                dx = tri[i, 0] - tri[j, 0]
                dy = tri[i, 1] - tri[j, 1]
                diam = max(diam, dx * dx + dy * dy)
        px, py, st, lab, own = cut_triangle_kernel(tri, cands[a:b], dists[a:b], 1e-12 * diam)
        for p in range(len(lab)):
            for q in range(st[p], st[p + 1]):
                xs.append(px[q])
                ys.append(py[q])
            pstart.append(len(xs))
            pface.append(f)
            plabel.append(lab[p])
            c0, c1, c2 = _plane(tri, dists[a + own[p]])
            pcoef.append((c0, c1, c2))
    coef = np.empty((len(pcoef), 3))
    for i in range(len(pcoef)):
        coef[i, 0] = pcoef[i][0]
        coef[i, 1] = pcoef[i][1]
        coef[i, 2] = pcoef[i][2]
    return (np.array(xs), np.array(ys), np.array(pstart, np.int64),
            np.array(pface, np.int64), np.array(plabel, np.int64), coef)


@njit(cache=True)
def _classify_points(tris, xs, ys, pstart, pface, fhe, tol_rel):
    """Locate every piece vertex: corner ``k`` (0..2), edge ``k`` with local
    parameter ``t`` (3..5), or interior (6)."""
    n = len(xs)
    where = np.full(n, 6, np.int64)
    tloc = np.zeros(n)
    for p in range(len(pface)):
        f = pface[p]
        tri = tris[f]
        lmax = 0.0
        for k in range(3):
            ax, ay = tri[k, 0], tri[k, 1]
            bx, by = tri[(k + 1) % 3, 0], tri[(k + 1) % 3, 1]
            lmax = max(lmax, np.hypot(bx - ax, by - ay))
        tol = tol_rel * lmax
        for q in range(pstart[p], pstart[p + 1]):
            x, y = xs[q], ys[q]
            best = 6
            for k in range(3):
                if np.hypot(x - tri[k, 0], y - tri[k, 1]) <= tol:
                    best = k
                    break
            if best == 6:
                for k in range(3):
                    ax, ay = tri[k, 0], tri[k, 1]
                    bx, by = tri[(k + 1) % 3, 0], tri[(k + 1) % 3, 1]
                    ex, ey = bx - ax, by - ay
                    L = np.hypot(ex, ey)
                    dist = abs(ex * (y - ay) - ey * (x - ax)) / L
                    if dist <= tol:
                        t = ((x - ax) * ex + (y - ay) * ey) / (L * L)
                        best = 3 + k
                        tloc[q] = min(max(t, 0.0), 1.0)
                        break
            where[q] = best
    return where, tloc


@njit(cache=True)
def _on_edge(w, tl, k):
    """Local parameter of a classified point along edge ``k``, or -1."""
    if w == 3 + k:
        return tl
    if w == k:
        return 0.0
    if w == (k + 1) % 3:
        return 1.0
    return -1.0


@njit(cache=True)
def _assemble(tris, xs, ys, pstart, pface, plabel, coef, where, tloc, fhe, fverts, tol_t):
    """Stitch pieces into a conforming refined mesh.

    Breakpoints on an original edge are collected from the pieces on both
    sides and merged, then inserted into every piece boundary running along
    that edge, so the two sides share vertices.  A refined vertex takes the
    smallest plane value among the pieces touching it.  Pieces with more
    than three corners are fanned from their centroid.

    Returns per refined vertex: kind, source face, barycentric coordinates
    and distance; and refined faces with labels and parent faces.
    """
    pe = []
    pt = []
    for p in range(len(pface)):
        f = pface[p]
        for q in range(pstart[p], pstart[p + 1]):
            w = where[q]
            if w >= 3 and w <= 5:
                h = fhe[f, w - 3]
                pe.append(h >> 1)
                pt.append(tloc[q] if (h & 1) == 0 else 1.0 - tloc[q])
    pe_a = np.array(pe, np.int64)
    pt_a = np.array(pt)
    o1 = np.argsort(pt_a, kind="mergesort")
    o2 = np.argsort(pe_a[o1], kind="mergesort")
    order = o1[o2]
    merged_t = []
    edge_rng = {}
    i = 0
    while i < len(order):
        e = pe_a[order[i]]
        first = len(merged_t)
        merged_t.append(pt_a[order[i]])
        i += 1
        while i < len(order) and pe_a[order[i]] == e:
            t = pt_a[order[i]]
            if t - merged_t[-1] > tol_t:
                merged_t.append(t)
            i += 1
        edge_rng[e] = (first, len(merged_t))
    all_t = np.array(merged_t)

    vkind = []
    vface = []
    vb0 = []
    vb1 = []
    vb2 = []
    vdist = []
    orig_id = {}
    edge_id = {}
    out_faces = []
    out_label = []
    out_parent = []
    cur_face = -1
    face_first = 0

    for p in range(len(pface)):
        f = pface[p]
        if f != cur_face:
            cur_face = f
            face_first = len(vkind)
        tri = tris[f]
        c0, c1, c2 = coef[p, 0], coef[p, 1], coef[p, 2]
        a = pstart[p]
        m = pstart[p + 1] - a
        # boundary ring as (where, local t, x, y) with breakpoints inserted
        rw = []
        rt = []
        rx = []
        ry = []
        for qi in range(m):
            q = a + qi
            qn = a + (qi + 1) % m
            rw.append(where[q])
            rt.append(tloc[q])
            rx.append(xs[q])
            ry.append(ys[q])
            for k in range(3):
                tq = _on_edge(where[q], tloc[q], k)
                tn = _on_edge(where[qn], tloc[qn], k)
                if tq < 0.0 or tn < 0.0:
                    continue
                h = fhe[f, k]
                e = h >> 1
                if e in edge_rng:
                    r0, r1 = edge_rng[e]
                    lo = min(tq, tn)
                    hi = max(tq, tn)
                    sel = []
                    for t in all_t[r0:r1]:
                        tl = t if (h & 1) == 0 else 1.0 - t
                        if tl > lo + tol_t and tl < hi - tol_t:
                            sel.append(tl)
                    if len(sel) > 0:
                        sa = np.sort(np.array(sel))
                        if tn < tq:
                            sa = sa[::-1]
                        ax, ay = tri[k, 0], tri[k, 1]
                        bx, by = tri[(k + 1) % 3, 0], tri[(k + 1) % 3, 1]
                        for tl in sa:
                            rw.append(3 + k)
                            rt.append(tl)
                            rx.append(ax + tl * (bx - ax))
                            ry.append(ay + tl * (by - ay))
                break
        ids = []
        pxs = []
        pys = []
        for r in range(len(rw)):
            w = rw[r]
            x = rx[r]
            y = ry[r]
            if w < 3:
                key = fverts[f, w]
                x, y = tri[w, 0], tri[w, 1]
                if key in orig_id:
                    vid = orig_id[key]
                else:
                    vid = len(vkind)
                    orig_id[key] = vid
                    vkind.append(ORIGINAL)
                    vface.append(f)
                    vb0.append(1.0 if w == 0 else 0.0)
                    vb1.append(1.0 if w == 1 else 0.0)
                    vb2.append(1.0 if w == 2 else 0.0)
                    vdist.append(np.inf)
            elif w <= 5:
                k = w - 3
                h = fhe[f, k]
                e = h >> 1
                t = rt[r] if (h & 1) == 0 else 1.0 - rt[r]
                r0, r1 = edge_rng[e]
                ts = all_t[r0:r1]
                j = np.searchsorted(ts, t)
                if j == len(ts) or (j > 0 and t - ts[j - 1] <= ts[j] - t):
                    j -= 1
                tc = ts[j]
                tl = tc if (h & 1) == 0 else 1.0 - tc
                ax, ay = tri[k, 0], tri[k, 1]
                bx, by = tri[(k + 1) % 3, 0], tri[(k + 1) % 3, 1]
                x = ax + tl * (bx - ax)
                y = ay + tl * (by - ay)
                key = e * 4194304 + j
                if key in edge_id:
                    vid = edge_id[key]
                else:
                    vid = len(vkind)
                    edge_id[key] = vid
                    vkind.append(VORONOI_VERTEX)
                    vface.append(f)
                    bb0 = 0.0
                    bb1 = 0.0
                    bb2 = 0.0
                    if k == 0:
                        bb0, bb1 = 1.0 - tl, tl
                    elif k == 1:
                        bb1, bb2 = 1.0 - tl, tl
                    else:
                        bb2, bb0 = 1.0 - tl, tl
                    vb0.append(bb0)
                    vb1.append(bb1)
                    vb2.append(bb2)
                    vdist.append(np.inf)
            else:
                # interior bisector junctions are shared by pieces of this face only
                w2 = y / tri[2, 1]
                w1 = (x - w2 * tri[2, 0]) / tri[1, 0]
                w0 = 1.0 - w1 - w2
                vid = -1
                for u in range(face_first, len(vkind)):
                    if vkind[u] != VORONOI_VERTEX or vface[u] != f:
                        continue
                    if abs(vb0[u] - w0) + abs(vb1[u] - w1) + abs(vb2[u] - w2) <= tol_t:
                        vid = u
                        break
                if vid < 0:
                    vid = len(vkind)
                    vkind.append(VORONOI_VERTEX)
                    vface.append(f)
                    vb0.append(w0)
                    vb1.append(w1)
                    vb2.append(w2)
                    vdist.append(np.inf)
            val = c0 + c1 * x + c2 * y
            if val < vdist[vid]:
                vdist[vid] = val
            if len(ids) == 0 or ids[-1] != vid:
                ids.append(vid)
                pxs.append(x)
                pys.append(y)
        if len(ids) > 1 and ids[-1] == ids[0]:
            ids.pop()
            pxs.pop()
            pys.pop()
        n = len(ids)
        if n < 3:
            continue
        if n == 3:
            out_faces.append((ids[0], ids[1], ids[2]))
            out_label.append(plabel[p])
            out_parent.append(f)
            continue
        cx = 0.0
        cy = 0.0
        for i in range(n):
            cx += pxs[i]
            cy += pys[i]
        cx /= n
        cy /= n
        cid = len(vkind)
        vkind.append(FAN)
        vface.append(f)
        w2 = cy / tri[2, 1]
        w1 = (cx - w2 * tri[2, 0]) / tri[1, 0]
        vb0.append(1.0 - w1 - w2)
        vb1.append(w1)
        vb2.append(w2)
        vdist.append(c0 + c1 * cx + c2 * cy)
        for i in range(n):
            out_faces.append((cid, ids[i], ids[(i + 1) % n]))
            out_label.append(plabel[p])
            out_parent.append(f)

    nv = len(vkind)
    kind = np.empty(nv, np.int64)
    face = np.empty(nv, np.int64)
    bary = np.empty((nv, 3))
    dist = np.empty(nv)
    for i in range(nv):
        kind[i] = vkind[i]
        face[i] = vface[i]
        bary[i, 0] = vb0[i]
        bary[i, 1] = vb1[i]
        bary[i, 2] = vb2[i]
        dist[i] = vdist[i]
    nfo = len(out_faces)
    faces = np.empty((nfo, 3), np.int64)
    for i in range(nfo):
        faces[i, 0] = out_faces[i][0]
        faces[i, 1] = out_faces[i][1]
        faces[i, 2] = out_faces[i][2]
    return (kind, face, bary, dist, faces, np.array(out_label, np.int64),
            np.array(out_parent, np.int64))


def _site_layout(sites):
    """Per-site curve id and position, plus per-curve start/length/closedness."""
    n = len(sites.prev)
    curve = np.asarray(sites.curve, np.int64)
    ncur = int(curve.max()) + 1 if n else 0
    start = np.array([np.flatnonzero(curve == c)[0] for c in range(ncur)], np.int64)
    length = np.bincount(curve, minlength=ncur).astype(np.int64)
    pos = np.arange(n) - start[curve]
    closed = np.array([sites.prev[start[c]] >= 0 for c in range(ncur)])
    return curve, pos, start, length, closed


def compute_voronoi(mesh, field, sites, window=WINDOW):
    """Cut every fully finalized face and stitch the pieces into a LabeledMesh."""
    t0 = time.perf_counter()
    fv_all = mesh.face_vertices()
    ok = field.finalized[fv_all].all(axis=1)
    faces = np.flatnonzero(ok)
    site_faces = np.flatnonzero(mesh.is_site[fv_all].any(axis=1) & ~ok)
    if len(site_faces):
        raise InternalError(
            f"{len(site_faces)} faces touching sites lie outside the finalized band; raise the cutoff")
    fv = fv_all[faces]
    curve, pos, start, length, closed = _site_layout(sites)
    ptr, cands = face_candidates(fv, field.nearest, curve, pos, start, length, closed, window)
    ns = field.n_sites
    qv, qs = missing_pairs(fv, ptr, cands, ns, field.cache)
    t1 = time.perf_counter()
    if len(qv):
        field.pair_distances(mesh, qv, qs)
    dists = gather_dists(fv, ptr, cands, ns, field.cache)
    if not np.all(np.isfinite(dists)):
        raise InternalError("candidate distance missing after refinement")
    t2 = time.perf_counter()
    tris = mesh.unfold(None)[faces]
    fhe = np.stack(mesh.face_halfedges(faces), axis=1).astype(np.int64)
    xs, ys, pstart, pface, plabel, coef = _cut_all(tris, ptr, cands, dists)
    where, tloc = _classify_points(tris, xs, ys, pstart, pface, fhe, 1e-10)
    kind, vface, bary, dist, rfaces, labels, parent = _assemble(
        tris, xs, ys, pstart, pface, plabel, coef, where, tloc, fhe, fv, 1e-10)
    # parameter coordinates by barycentric transfer from the parent face
    fuv = mesh.face_uv(None)[faces]
    uv = np.einsum("nk,nkd->nd", bary, fuv[vface])
    uv = mesh.spec.wrap(_clip_nonperiodic(mesh.spec, uv))
    # original vertices carry their field value; mark site vertices
    orig = kind == ORIGINAL
    ov = fv[vface[orig], np.argmax(bary[orig], axis=1)]
    dist[orig] = field.distance[ov]
    kind[orig] = np.where(mesh.is_site[ov], SITE, ORIGINAL)
    t3 = time.perf_counter()
    lm = LabeledMesh(uv, dist, kind, rfaces, labels, faces[parent], mesh.spec, len(faces))
    lm.timings = {"pairs": t2 - t1, "candidates": t1 - t0, "cut": t3 - t2,
                  "n_pair_queries": int(len(qv))}
    log.debug("voronoi: %d faces -> %d pieces, %d extra pair queries",
              len(faces), len(rfaces), len(qv))
    return lm


def _clip_nonperiodic(spec, uv):
    lo = np.array([spec.domain[0], spec.domain[2]])
    hi = np.array([spec.domain[1], spec.domain[3]])
    out = uv.copy()
    for ax in range(2):
        if not spec.periodic[ax]:
            out[:, ax] = np.clip(out[:, ax], lo[ax], hi[ax])
    return out

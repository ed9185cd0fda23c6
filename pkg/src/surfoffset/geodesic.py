"""Vertex-to-vertex geodesics and nearest-site distance fields.

Paths start as shortest paths on the edge graph or on a Steiner-point graph
and are straightened by intrinsic edge flips.  Flips made during a query are rolled back before the
query returns, so every query sees the same triangulation.
"""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, ConnectivityError

log = logging.getLogger(__name__)

MAX_ITER = 10_000
ANGLE_EPS = 1e-10
MAX_DEGREE = 4096


@dataclass
class VertexPath:
    vertices: np.ndarray
    halfedges: np.ndarray
    total_length: float


@dataclass
class GeodesicResult:
    """A flip-shortened path.

    ``crossings`` lists ``(face, barycentric)`` points where the straightened
    path crosses edges of the unflipped triangulation, endpoints included;
    ``uv`` gives the same points in parameter coordinates (consecutive points
    unwrapped next to each other on periodic axes).
    """
    length: float
    init_length: float
    iterations: int
    converged: bool
    vertices: np.ndarray
    crossings: list = field(default_factory=list)
    uv: np.ndarray | None = None
    history: np.ndarray | None = None


def dijkstra_path(mesh, s, t):
    """Shortest edge-graph path from ``s`` to ``t`` under stored edge lengths."""
    if s == t:
        raise ConfigurationError("dijkstra_path needs distinct endpoints")
    start, adj = mesh.prepare()
    m = mesh.kmesh()
    n = mesh.n_v
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, np.int64)
    done = np.zeros(n, bool)
    touched = _typed_int_list()
    K.dijkstra(m, start, adj, int(s), int(t), np.inf, dist, pred, done, touched)
    if not done[t]:
        raise ConnectivityError(f"vertex {t} unreachable from {s}")
    hes = K.path_to(m, pred, int(s), int(t))
    verts = np.concatenate([[s], mesh.he_vert[hes ^ 1]]).astype(np.int64)
    return VertexPath(verts, hes, float(K.path_length(m, hes)))


def _typed_int_list():
    from numba.typed import List
    lst = List.empty_list(K.types.int64)
    return lst


def flip_shorten(mesh, init, max_iter=MAX_ITER, trace=True, history=False):
    """Straighten ``init`` by intrinsic flips (the mesh is restored afterwards)."""
    mesh.prepare()
    m = mesh.kmesh()
    lg = mesh.undo_log
    p0 = int(lg.pos[0])
    hist = np.full(max_iter if history else 0, np.nan)
    path, length, iters, conv = K.flip_shorten(
        m, np.asarray(init.halfedges, np.int64), max_iter, lg, ANGLE_EPS, MAX_DEGREE, hist
    )
    verts = np.concatenate([[mesh.he_vert[path[0]]], mesh.he_vert[path ^ 1]]).astype(np.int64)
    rays = [(int(mesh.he_vert[h]), float(mesh.he_phi[h]), float(mesh.elen[h >> 1]),
             int(mesh.he_vert[h ^ 1])) for h in path] if trace else []
    K.undo(m, lg, p0)
    if not conv:
        log.warning("path shortening hit the %d-iteration cap", max_iter)
    res = GeodesicResult(float(length), init.total_length, int(iters), bool(conv), verts,
                         history=hist[:iters] if history else None)
    if trace:
        res.crossings, res.uv = trace_rays(mesh, rays)
    return res


STEINER_K = 4
INITS = ("best", "dijkstra", "steiner")
# near-tie search for "best": detour slack, via-vertex restarts tried always
# and at most (when shortened lengths disagree), via separation in mean edges
NEAR_SLACK = 0.05
BASE_ALTERNATIVES = 2
ALTERNATIVES = 24
VIA_SEPARATION = 1.0
TREE_CACHE_BYTES = 256 << 20


def _steiner(mesh, k=STEINER_K):
    """Steiner graph of the current triangulation, cached until the next edit."""
    csr = mesh.prepare()
    cached = getattr(mesh, "_steiner_cache", None)
    if cached is not None and cached[0] is csr and cached[1] == k:
        return cached[2]
    pos = np.ascontiguousarray(mesh.unfold(), dtype=float)
    g = K.steiner_graph(mesh.kmesh(), mesh.n_v, mesh.n_e, mesh.n_f, pos, k)
    mesh._steiner_cache = (csr, k, g)
    return g


def steiner_path(mesh, s, t, k=STEINER_K):
    """Edge path from ``s`` to ``t`` snapped from a Steiner-graph shortest path.

    The Steiner graph adds ``k`` points per edge joined straight across faces,
    so its shortest paths follow the true geodesic far more closely than
    edge-graph paths do and usually pick the right way around handles.
    """
    if s == t:
        raise ConfigurationError("steiner_path needs distinct endpoints")
    start, adj = mesh.prepare()
    gs, gn, gw = _steiner(mesh, k)
    pred = K.steiner_pred(gs, gn, gw, int(s), int(t))
    if pred[t] < 0:
        raise ConnectivityError(f"vertex {t} unreachable from {s}")
    m = mesh.kmesh()
    hes = K._steiner_to_edges(m, start, adj, mesh.n_v, k, pred, int(s), int(t))
    if len(hes) == 0:
        raise ConnectivityError(f"snapped Steiner path from {s} to {t} is not an edge path")
    verts = np.concatenate([[s], mesh.he_vert[hes ^ 1]]).astype(np.int64)
    return VertexPath(verts, hes, float(K.path_length(m, hes)))


class _TreeCache:
    """Full Steiner shortest-path trees per root vertex, least recently used first out."""

    def __init__(self, gs, gn, gw, budget=TREE_CACHE_BYTES):
        self.g = (gs, gn, gw)
        self.cap = max(2, budget // (16 * (len(gs) - 1)))
        self.trees = OrderedDict()
        self._none = np.empty(0, np.int64)

    def get(self, v):
        tree = self.trees.get(v)
        if tree is None:
            tree = K.steiner_tree(*self.g, v, self._none, 0.0)
            self.trees[v] = tree
            if len(self.trees) > self.cap:
                self.trees.popitem(last=False)
        else:
            self.trees.move_to_end(v)
        return tree


def geodesic_distances(mesh, pairs, init="best", max_iter=MAX_ITER, k=STEINER_K):
    """Flip-shortened lengths for an ``(n, 2)`` array of vertex pairs.

    ``init`` picks the initial path: ``"dijkstra"`` (edge graph),
    ``"steiner"`` (Steiner graph, see :func:`steiner_path`) or ``"best"``.
    ``"best"`` shortens the Dijkstra path, the Steiner path (three snaps)
    and Steiner paths forced through via vertices whose detour is within
    ``NEAR_SLACK`` of the Steiner distance, and keeps the shortest.  The via
    search stops after ``BASE_ALTERNATIVES`` restarts unless their lengths
    disagree, then runs up to ``ALTERNATIVES``.
    Flip shortening only finds a locally shortest path, so near ties between
    paths going different ways around curvature need these restarts.  Every
    candidate is the length of an actual surface path, so the minimum is
    still an upper bound on the distance.
    Pairs are canonicalized so that ``d(s, t) == d(t, s)`` exactly.
    """
    if init not in INITS:
        raise ConfigurationError(f"init must be one of {INITS}, got {init!r}")
    pairs = np.asarray(pairs, np.int64).reshape(-1, 2)
    a = np.minimum(pairs[:, 0], pairs[:, 1])
    b = np.maximum(pairs[:, 0], pairs[:, 1])
    order = np.lexsort((b, a))
    sa, sb = a[order], b[order]
    keep = sa != sb
    sa, sb = sa[keep], sb[keep]
    start, adj = mesh.prepare()
    m = mesh.kmesh()
    out = np.full(len(sa), np.inf)
    n_bad = 0
    if init in ("best", "dijkstra"):
        cache = K.new_cache()
        # every vertex acts as its own site, so cache keys are a * n_v + b
        n_bad += K.pair_distances(m, start, adj, mesh.n_v, sa, sb,
                                  np.arange(mesh.n_v, dtype=np.int64), mesh.undo_log,
                                  ANGLE_EPS, max_iter, MAX_DEGREE, cache)
        d = np.array([cache[x] for x in (sa * mesh.n_v + sb).tolist()])
        out = np.minimum(out, d)
    if init == "steiner":
        gs, gn, gw = _steiner(mesh, k)
        d, bad = K.steiner_paths(m, start, adj, gs, gn, gw, mesh.n_v, k, sa, sb,
                                 mesh.undo_log, ANGLE_EPS, max_iter, MAX_DEGREE, True)
        out = np.minimum(out, d)
        n_bad += bad
    if init == "best":
        gs, gn, gw = _steiner(mesh, k)
        trees = _TreeCache(gs, gn, gw)
        used = np.zeros(mesh.n_v, bool)
        sep = VIA_SEPARATION * mesh.mean_edge_length()
        d = np.empty(len(sa))
        for i, (s, t) in enumerate(zip(sa.tolist(), sb.tolist())):
            ds, ps = trees.get(s)
            dt, pt = trees.get(t)
            d[i], bad, _ = K.multistart_pair(m, start, adj, mesh.n_v, k, s, t, ds, ps, dt, pt,
                                             NEAR_SLACK, ALTERNATIVES, sep, used, mesh.undo_log,
                                             ANGLE_EPS, max_iter, MAX_DEGREE, BASE_ALTERNATIVES)
            n_bad += bad
        out = np.minimum(out, d)
    if n_bad:
        log.warning("%d path shortenings hit the %d-iteration cap", n_bad, max_iter)
    full = np.zeros(len(pairs))
    full[keep] = out
    res = np.empty(len(pairs))
    res[order] = full
    return res


def geodesic_path(mesh, s, t, init="best", max_iter=MAX_ITER, history=False):
    """Shortened path from ``s`` to ``t`` (see :func:`geodesic_distances` for ``init``)."""
    if init not in INITS:
        raise ConfigurationError(f"init must be one of {INITS}, got {init!r}")
    if s == t:
        raise ConfigurationError("geodesic_path needs distinct endpoints")
    inits = []
    if init in ("dijkstra", "best"):
        inits.append(dijkstra_path(mesh, s, t))
    if init == "steiner":
        inits.append(steiner_path(mesh, s, t))
    if init == "best":
        start, adj = mesh.prepare()
        gs, gn, gw = _steiner(mesh)
        trees = _TreeCache(gs, gn, gw)
        (ds, ps), (dt, pt) = trees.get(int(s)), trees.get(int(t))
        _, _, hes = K.multistart_pair(mesh.kmesh(), start, adj, mesh.n_v, STEINER_K, int(s), int(t),
                                      ds, ps, dt, pt, NEAR_SLACK, ALTERNATIVES,
                                      VIA_SEPARATION * mesh.mean_edge_length(),
                                      np.zeros(mesh.n_v, bool), mesh.undo_log, ANGLE_EPS,
                                      max_iter, MAX_DEGREE, BASE_ALTERNATIVES)
        if len(hes) == 0:
            raise ConnectivityError(f"vertex {t} unreachable from {s}")
        verts = np.concatenate([[s], mesh.he_vert[hes ^ 1]]).astype(np.int64)
        inits.append(VertexPath(verts, hes, float(K.path_length(mesh.kmesh(), hes))))
    res = None
    for p in inits:
        r = flip_shorten(mesh, p, max_iter, history=history)
        if res is None or r.length < res.length:
            res = r
    return res


def geodesic_distance(mesh, s, t, max_iter=MAX_ITER, init="best"):
    if s == t:
        return 0.0
    return float(geodesic_distances(mesh, [[s, t]], init, max_iter)[0])


# ---------------------------------------------------------------------------
# tracing shortened edges over the unflipped triangulation
# ---------------------------------------------------------------------------

def _face_frame(mesh, h):
    """Unfolded corners of ``face(h)`` with ``tail(h)`` at the origin along +x."""
    h1 = mesh.he_next[h]
    h2 = mesh.he_next[h1]
    from .mesh import unfold_lengths
    pos = unfold_lengths([mesh.elen[h >> 1], mesh.elen[h1 >> 1], mesh.elen[h2 >> 1]])
    return [h, h1, h2], pos


def _third_point(a, b, la, lb):
    """Point at distances ``la`` from ``a`` and ``lb`` from ``b``, right of a->b."""
    d = b - a
    L = math.hypot(*d)
    x = (la * la - lb * lb + L * L) / (2 * L)
    y = math.sqrt(max(la * la - x * x, 0.0))
    ex = d / L
    ey = np.array([-ex[1], ex[0]])
    return a + x * ex - y * ey


def _bary2(p, tri):
    a, b, c = tri
    m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
    wb, wc = np.linalg.solve(m, p - a)
    return np.array([1 - wb - wc, wb, wc])


def trace_rays(mesh, rays):
    """Walk each ``(vertex, angle, length, target)`` ray across the faces."""
    crossings = []
    for v, phi, length, tgt in rays:
        pts = _trace_one(mesh, v, phi, length)
        if crossings:
            pts = pts[1:]
        crossings.extend(pts)
        # snap the segment end onto its target vertex
        f, b = crossings[-1]
        fv = mesh.face_vertices(f)
        if tgt in fv:
            b = np.zeros(3)
            b[fv.index(tgt)] = 1.0
            crossings[-1] = (f, b)
    uv = []
    for f, b in crossings:
        p = b @ mesh.face_uv(f)
        if uv:
            p = mesh.spec.unwrap_near(p, uv[-1])
        uv.append(p)
    return crossings, np.array(uv)


def _in_face_order(mesh, hs, b):
    """Reorder barycentrics given per ``hs`` corner to the face's own corner order."""
    r = list(mesh.face_halfedges(int(mesh.he_face[hs[0]]))).index(hs[0])
    return np.roll(b, r)


def _trace_one(mesh, v, phi, length):
    # find the face wedge at v containing direction phi
    h = mesh.v_he[v]
    first = h
    for _ in range(MAX_DEGREE):
        c = K.corner(mesh.kmesh(), h)
        if mesh.he_phi[h] - 1e-12 <= phi <= mesh.he_phi[h] + c + 1e-12 or mesh.he_face[h] < 0:
            break
        nxt = K.ccw_out(mesh.kmesh(), h)
        if mesh.he_face[nxt] < 0 or nxt == first:
            break
        h = nxt
    hs, pos = _face_frame(mesh, h)
    ang = phi - mesh.he_phi[h]
    direction = np.array([math.cos(ang), math.sin(ang)])
    origin = pos[0]
    out = [(int(mesh.he_face[h]), _in_face_order(mesh, hs, np.array([1.0, 0.0, 0.0])))]
    enter = -1
    for _ in range(100000):
        f = int(mesh.he_face[hs[0]])
        best_t, best_k = math.inf, -1
        for k in range(3):
            if k == enter:
                continue
            a, b = pos[k], pos[(k + 1) % 3]
            e = b - a
            den = direction[0] * (-e[1]) + direction[1] * e[0]
            if abs(den) < 1e-300:
                continue
            r = a - origin
            t = (r[0] * (-e[1]) + r[1] * e[0]) / den
            s = (direction[0] * r[1] - direction[1] * r[0]) / den
            if t > 1e-14 * length and -1e-9 <= s <= 1 + 1e-9 and t < best_t:
                best_t, best_k = t, k
        if best_k < 0 or best_t >= length:
            end = origin + direction * length
            out.append((f, _in_face_order(mesh, hs, _bary2(end, pos))))
            return out
        hit = origin + direction * best_t
        out.append((f, _in_face_order(mesh, hs, _bary2(hit, pos))))
        he = hs[best_k]
        tw = he ^ 1
        if mesh.he_face[tw] < 0:
            return out
        # unfold the neighbour across edge (a, b) = (pos[k], pos[k+1])
        a, b = pos[best_k], pos[(best_k + 1) % 3]
        t1 = mesh.he_next[tw]
        t2 = mesh.he_next[t1]
        # the neighbour lies right of a->b; t1 runs a->c and t2 runs c->b
        c = _third_point(a, b, mesh.elen[t1 >> 1], mesh.elen[t2 >> 1])
        hs = [tw, t1, t2]
        pos = np.array([b, a, c])
        enter = 0
    return out


# ---------------------------------------------------------------------------
# nearest-site distance field
# ---------------------------------------------------------------------------

@dataclass
class DistanceField:
    """Per-vertex nearest site and distance within a propagation cutoff."""
    distance: np.ndarray
    nearest: np.ndarray
    finalized: np.ndarray
    cutoff: float
    graph_distance: np.ndarray
    site_vertices: np.ndarray
    site_prev: np.ndarray
    site_next: np.ndarray
    cache: object = None
    n_queries: int = 0
    n_nonconverged: int = 0
    seconds: float = 0.0

    @property
    def n_sites(self):
        return len(self.site_vertices)

    def pair_distance(self, mesh, v, s):
        return self.pair_distances(mesh, np.array([v]), np.array([s]))[0]

    def pair_distances(self, mesh, vs, ss):
        """Geodesic distances for vertex/site pairs, reusing and filling the cache."""
        vs = np.asarray(vs, np.int64)
        ss = np.asarray(ss, np.int64)
        order = np.lexsort((ss, vs))
        start, adj = mesh.prepare()
        self.n_nonconverged += K.pair_distances(
            mesh.kmesh(), start, adj, mesh.n_v, vs[order], ss[order], self.site_vertices,
            mesh.undo_log, ANGLE_EPS, MAX_ITER, MAX_DEGREE, self.cache)
        ns = self.n_sites
        return np.array([self.cache[int(v) * ns + int(s)] for v, s in zip(vs, ss)])


def build_distance_field(mesh, site_vertices, cutoff, site_prev=None, site_next=None,
                         alpha=0.2, init="dijkstra", waypoints=3, seed=42, repair_sweeps=8):
    """Label vertices within ``cutoff`` by their nearest site.

    ``site_prev``/``site_next`` give each site's neighbours along the source
    curve (``-1`` at open ends); they default to an open chain in index order.
    ``init="random_waypoints"`` starts every refinement from a Dijkstra path
    routed through random intermediate vertices, which is useful only as a
    stress test of the field checks.  ``repair_sweeps`` caps the passes that
    re-seed each vertex from its neighbours' labels.
    """
    import time
    t0 = time.perf_counter()
    sv = np.asarray(site_vertices, np.int64)
    n = len(sv)
    if n == 0:
        raise ConfigurationError("no sites")
    if site_prev is None:
        site_prev = np.arange(n) - 1
    if site_next is None:
        site_next = np.arange(n) + 1
        site_next[-1] = -1
    if not cutoff > 0:
        raise ConfigurationError("cutoff must be positive")
    modes = {"dijkstra": 0, "random_waypoints": 1}
    if init not in modes:
        raise ConfigurationError(f"unknown path initialization {init!r}")
    start, adj = mesh.prepare()
    cache = K.new_cache()
    dist, nearest, fin, g, nq, nbad = K.nearest_site_field(
        mesh.kmesh(), start, adj, mesh.n_v, sv, np.asarray(site_prev, np.int64),
        np.asarray(site_next, np.int64), float(cutoff), float(alpha), mesh.undo_log,
        ANGLE_EPS, MAX_ITER, MAX_DEGREE, modes[init], int(waypoints), int(seed), cache,
        int(repair_sweeps))
    over = fin & (dist > cutoff)
    fin = fin & ~over
    if not fin.any():
        raise ConfigurationError("cutoff too small: no vertex was finalized")
    dist = np.where(fin, dist, np.inf)
    nearest = np.where(fin, nearest, -1)
    if nbad:
        log.warning("%d of %d path refinements did not converge", nbad, nq)
    return DistanceField(dist, nearest, fin, float(cutoff), g, sv,
                         np.asarray(site_prev, np.int64), np.asarray(site_next, np.int64),
                         cache, int(nq), int(nbad), time.perf_counter() - t0)


def detect_field_inconsistency(mesh, field, rtol=1e-6):
    """Edges whose endpoint distances differ by more than the edge length.

    A distance field with unit gradient norm changes by at most the length
    of any edge; a violation exposes a refinement that got stuck in a
    non-shortest geodesic.
    """
    e = np.arange(mesh.n_e)
    a = mesh.he_vert[2 * e]
    b = mesh.he_vert[2 * e + 1]
    ok = field.finalized[a] & field.finalized[b]
    with np.errstate(invalid="ignore"):
        gap = np.abs(field.distance[a] - field.distance[b])
    bad = ok & (gap > mesh.elen[: mesh.n_e] * (1.0 + rtol))
    return np.flatnonzero(bad)

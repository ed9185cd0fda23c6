"""Compiled half-edge kernels.

Half-edges come in twin pairs ``(2e, 2e + 1)`` so ``twin(h) == h ^ 1`` and the
undirected edge of ``h`` is ``h >> 1``.  A half-edge with ``he_face == -1``
lies on the mesh boundary and belongs to no face.  ``he_vert`` stores the
tail vertex; the head is ``he_vert[h ^ 1]``.

Every mutation goes through :func:`flip`, which appends a fixed-size record
to an undo log so that geodesic queries can shorten paths on the shared mesh
and then restore it exactly.
"""
import heapq
import math
from collections import namedtuple

import numpy as np
from numba import njit, types
from numba.typed import Dict

KMesh = namedtuple(
    "KMesh", "he_next he_vert he_face he_phi elen v_he v_theta v_bnd f_he"
)
UndoLog = namedtuple("UndoLog", "ints floats pos")

LOG_INTS = 23
LOG_FLOATS = 3
INF = np.inf
# relative triangle-inequality slack a flip must leave on both new faces
FLIP_SLACK = 1e-12


def new_log(capacity=1 << 16):
    return UndoLog(
        np.zeros((capacity, LOG_INTS), np.int64),
        np.zeros((capacity, LOG_FLOATS), np.float64),
        np.zeros(1, np.int64),
    )


def new_cache():
    return Dict.empty(key_type=types.int64, value_type=types.float64)


# ---------------------------------------------------------------------------
# local geometry
# ---------------------------------------------------------------------------

@njit(cache=True)
def corner(m, h):
    """Interior angle at the tail of ``h`` inside ``face(h)``."""
    n = m.he_next[h]
    a = m.elen[h >> 1]
    b = m.elen[m.he_next[n] >> 1]
    c = m.elen[n >> 1]
    x = (a * a + b * b - c * c) / (2.0 * a * b)
    if x > 1.0:
        x = 1.0
    elif x < -1.0:
        x = -1.0
    return math.acos(x)


@njit(cache=True)
def ccw_out(m, h):
    """Next outgoing half-edge counterclockwise around ``tail(h)``."""
    return m.he_next[m.he_next[h]] ^ 1


@njit(cache=True)
def wedge_angle(m, x, y, max_deg):
    """Angle swept counterclockwise from ray ``x`` to ray ``y`` at a shared tail.

    Returns ``inf`` if the sweep crosses the boundary.
    """
    total = 0.0
    h = x
    for _ in range(max_deg):
        if h == y:
            return total
        if m.he_face[h] < 0:
            return INF
        total += corner(m, h)
        h = ccw_out(m, h)
    return INF


@njit(cache=True)
def compute_signposts(m, n_v):
    """Recompute per-vertex cone angles, boundary flags and half-edge angles.

    ``v_he`` is normalized so boundary vertices point at their first
    (clockwise-most) interior half-edge.
    """
    for v in range(n_v):
        h0 = m.v_he[v]
        if h0 < 0:
            continue
        if m.he_face[h0] < 0:
            # boundary half-edge: step to an interior one around v
            h0 = m.he_next[h0 ^ 1] if m.he_face[h0 ^ 1] >= 0 else -1
            if h0 < 0:
                continue
        h = h0
        bnd = False
        for _ in range(1 << 20):
            t = h ^ 1
            if m.he_face[t] < 0:
                bnd = True
                break
            g = m.he_next[t]
            if g == h0:
                break
            h = g
        first = h if bnd else h0
        m.v_he[v] = first
        m.v_bnd[v] = bnd
        phi = 0.0
        h = first
        for _ in range(1 << 20):
            m.he_phi[h] = phi
            phi += corner(m, h)
            g = ccw_out(m, h)
            if m.he_face[g] < 0:
                m.he_phi[g] = phi
                break
            if g == first:
                break
            h = g
        m.v_theta[v] = phi


@njit(cache=True)
def build_csr(n_v, n_he, he_vert):
    start = np.zeros(n_v + 1, np.int64)
    for h in range(n_he):
        start[he_vert[h] + 1] += 1
    for v in range(n_v):
        start[v + 1] += start[v]
    fill = start[:-1].copy()
    adj = np.empty(n_he, np.int64)
    for h in range(n_he):
        v = he_vert[h]
        adj[fill[v]] = h
        fill[v] += 1
    return start, adj


# ---------------------------------------------------------------------------
# flips and undo
# ---------------------------------------------------------------------------

@njit(cache=True)
def can_flip(m, h, eps):
    t = h ^ 1
    if m.he_face[h] < 0 or m.he_face[t] < 0 or m.he_face[h] == m.he_face[t]:
        return False
    h1 = m.he_next[h]
    h2 = m.he_next[h1]
    t1 = m.he_next[t]
    t2 = m.he_next[t1]
    if m.he_vert[h2] == m.he_vert[t2]:
        return False
    ai = corner(m, h) + corner(m, t1)
    aj = corner(m, t) + corner(m, h1)
    if not (ai < math.pi - eps and aj < math.pi - eps):
        return False
    # both new faces must keep a strict triangle inequality after rounding
    lik = m.elen[h2 >> 1]
    lil = m.elen[t1 >> 1]
    ljk = m.elen[h1 >> 1]
    ljl = m.elen[t2 >> 1]
    d2 = lik * lik + lil * lil - 2.0 * lik * lil * math.cos(ai)
    lkl = math.sqrt(d2) if d2 > 0.0 else 0.0
    tol = FLIP_SLACK * (lik + lil + ljk + ljl)
    return (lik + lil - lkl > tol and lkl + lik - lil > tol and lkl + lil - lik > tol
            and ljk + ljl - lkl > tol and lkl + ljk - ljl > tol and lkl + ljl - ljk > tol)


@njit(cache=True)
def _wrap_phi(m, v, x):
    if m.v_bnd[v]:
        return x
    th = m.v_theta[v]
    x = x % th
    return x


@njit(cache=True)
def flip(m, h, log):
    """Flip the edge of ``h`` in place (caller checks :func:`can_flip`)."""
    t = h ^ 1
    h1 = m.he_next[h]
    h2 = m.he_next[h1]
    t1 = m.he_next[t]
    t2 = m.he_next[t1]
    i = m.he_vert[h]
    j = m.he_vert[t]
    k = m.he_vert[h2]
    l = m.he_vert[t2]
    A = m.he_face[h]
    B = m.he_face[t]
    lik = m.elen[h2 >> 1]
    lil = m.elen[t1 >> 1]
    theta = corner(m, h) + corner(m, t1)
    d2 = lik * lik + lil * lil - 2.0 * lik * lil * math.cos(theta)
    newlen = math.sqrt(d2) if d2 > 0.0 else 0.0

    p = log.pos[0]
    if p >= log.ints.shape[0]:
        return False
    r = log.ints[p]
    r[0] = h
    r[1] = m.he_next[h]
    r[2] = m.he_next[t]
    r[3] = m.he_next[h1]
    r[4] = m.he_next[h2]
    r[5] = m.he_next[t1]
    r[6] = m.he_next[t2]
    r[7] = h1
    r[8] = h2
    r[9] = t1
    r[10] = t2
    r[11] = i
    r[12] = j
    r[13] = m.he_face[h1]
    r[14] = m.he_face[t1]
    r[15] = A
    r[16] = B
    r[17] = m.f_he[A]
    r[18] = m.f_he[B]
    r[19] = m.v_he[i]
    r[20] = m.v_he[j]
    r[21] = 0
    r[22] = 0
    f = log.floats[p]
    f[0] = m.he_phi[h]
    f[1] = m.he_phi[t]
    f[2] = m.elen[h >> 1]
    log.pos[0] = p + 1

    m.he_vert[h] = l
    m.he_vert[t] = k
    m.he_next[h] = h2
    m.he_next[h2] = t1
    m.he_next[t1] = h
    m.he_next[t] = t2
    m.he_next[t2] = h1
    m.he_next[h1] = t
    m.he_face[t1] = A
    m.he_face[h1] = B
    m.f_he[A] = h
    m.f_he[B] = t
    if m.v_he[i] == h:
        m.v_he[i] = t1
    if m.v_he[j] == t:
        m.v_he[j] = h1
    m.elen[h >> 1] = newlen
    m.he_phi[h] = _wrap_phi(m, l, m.he_phi[t2] + corner(m, t2))
    m.he_phi[t] = _wrap_phi(m, k, m.he_phi[h2] + corner(m, h2))
    return True


@njit(cache=True)
def undo(m, log, target):
    """Roll back flips until the log position equals ``target``."""
    p = log.pos[0]
    while p > target:
        p -= 1
        r = log.ints[p]
        f = log.floats[p]
        h = r[0]
        t = h ^ 1
        h1, h2, t1, t2 = r[7], r[8], r[9], r[10]
        m.he_next[h] = r[1]
        m.he_next[t] = r[2]
        m.he_next[h1] = r[3]
        m.he_next[h2] = r[4]
        m.he_next[t1] = r[5]
        m.he_next[t2] = r[6]
        m.he_vert[h] = r[11]
        m.he_vert[t] = r[12]
        m.he_face[h1] = r[13]
        m.he_face[t1] = r[14]
        m.f_he[r[15]] = r[17]
        m.f_he[r[16]] = r[18]
        m.v_he[r[11]] = r[19]
        m.v_he[r[12]] = r[20]
        m.he_phi[h] = f[0]
        m.he_phi[t] = f[1]
        m.elen[h >> 1] = f[2]
    log.pos[0] = p


# ---------------------------------------------------------------------------
# Dijkstra on the edge graph
# ---------------------------------------------------------------------------

@njit(cache=True)
def dijkstra(m, start, adj, src, tgt, radius, dist, pred, done, touched):
    """Single-source Dijkstra from ``src``.

    Stops when ``tgt`` is settled (``tgt >= 0``) or when the next vertex is
    farther than ``radius``.  ``dist``/``pred``/``done`` are caller-owned work
    arrays (``inf``/``-1``/``False`` on entry); every vertex written is
    appended to ``touched`` so the caller can reset them.  Ties are broken by
    smallest vertex id, both in pop order and in predecessor choice.
    """
    dist[src] = 0.0
    pred[src] = -1
    touched.append(src)
    heap = [(0.0, src)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u] or d > dist[u]:
            continue
        if d > radius:
            break
        done[u] = True
        if u == tgt:
            break
        for k in range(start[u], start[u + 1]):
            h = adj[k]
            w = m.he_vert[h ^ 1]
            if done[w]:
                continue
            nd = d + m.elen[h >> 1]
            if nd < dist[w]:
                if dist[w] == INF:
                    touched.append(w)
                dist[w] = nd
                pred[w] = h
                heapq.heappush(heap, (nd, w))
            elif nd == dist[w] and u < m.he_vert[pred[w]]:
                pred[w] = h


@njit(cache=True)
def reset_work(touched, dist, pred, done):
    for v in touched:
        dist[v] = INF
        pred[v] = -1
        done[v] = False


@njit(cache=True)
def path_to(m, pred, src, tgt):
    """Half-edges of the predecessor-tree path ``src -> tgt``."""
    rev = []
    x = tgt
    while x != src:
        h = pred[x]
        rev.append(h)
        x = m.he_vert[h]
    out = np.empty(len(rev), np.int64)
    for i in range(len(rev)):
        out[i] = rev[len(rev) - 1 - i]
    return out


@njit(cache=True)
def multi_source(m, start, adj, n_v, src_vertices, src_labels, cutoff):
    """Multi-source Dijkstra; returns graph distance and source label per vertex."""
    dist = np.full(n_v, INF)
    lab = np.full(n_v, -1, np.int64)
    done = np.zeros(n_v, np.bool_)
    heap = [(0.0, 0, 0)]
    heap.pop()
    for i in range(len(src_vertices)):
        v = src_vertices[i]
        if dist[v] > 0.0 or src_labels[i] < lab[v]:
            dist[v] = 0.0
            lab[v] = src_labels[i]
    for v in range(n_v):
        if dist[v] == 0.0:
            heapq.heappush(heap, (0.0, lab[v], v))
    while len(heap) > 0:
        d, s, u = heapq.heappop(heap)
        if done[u] or d > dist[u] or s != lab[u]:
            continue
        if d > cutoff:
            break
        done[u] = True
        for k in range(start[u], start[u + 1]):
            h = adj[k]
            w = m.he_vert[h ^ 1]
            if done[w]:
                continue
            nd = d + m.elen[h >> 1]
            if nd < dist[w] or (nd == dist[w] and s < lab[w]):
                dist[w] = nd
                lab[w] = s
                heapq.heappush(heap, (nd, s, w))
    for v in range(n_v):
        if not done[v]:
            dist[v] = INF
            lab[v] = -1
    return dist, lab


# ---------------------------------------------------------------------------
# path shortening by intrinsic flips
# ---------------------------------------------------------------------------

@njit(cache=True)
def path_length(m, path):
    s = 0.0
    for h in path:
        s += m.elen[h >> 1]
    return s


@njit(cache=True)
def remove_loops(m, path):
    """Drop closed sub-walks so no vertex is visited twice."""
    verts = [m.he_vert[path[0]]]
    out = []
    for h in path:
        w = m.he_vert[h ^ 1]
        cut = -1
        for q in range(len(verts)):
            if verts[q] == w:
                cut = q
                break
        if cut >= 0:
            del verts[cut + 1:]
            del out[cut:]
        else:
            out.append(h)
            verts.append(w)
    res = np.empty(len(out), np.int64)
    for i in range(len(out)):
        res[i] = out[i]
    return res


@njit(cache=True)
def _shorten_wedge(m, x, y, max_deg, log, eps):
    """Flip inner wedge edges from ``x`` CCW to ``y`` until none can flip.

    Returns the outer chain ``next(e_0) .. next(e_k)`` from ``head(x)`` to
    ``head(y)``, or an empty array if the log overflowed.
    """
    inner = []
    h = ccw_out(m, x)
    for _ in range(max_deg):
        if h == y:
            break
        inner.append(h)
        h = ccw_out(m, h)
    changed = True
    while changed and len(inner) > 0:
        changed = False
        for idx in range(len(inner)):
            e = inner[idx]
            if can_flip(m, e, eps):
                if not flip(m, e, log):
                    return np.empty(0, np.int64)
                del inner[idx]
                changed = True
                break
    chain = [m.he_next[x]]
    h = ccw_out(m, x)
    for _ in range(max_deg):
        if h == y:
            break
        chain.append(m.he_next[h])
        h = ccw_out(m, h)
    out = np.empty(len(chain), np.int64)
    for i in range(len(chain)):
        out[i] = chain[i]
    return out


@njit(cache=True)
def flip_shorten(m, path, max_iter, log, eps, max_deg, trace):
    """Straighten ``path`` until every interior wedge angle is >= pi - eps.

    A wedge whose shortening does not reduce the length (its flips are
    refused because the new faces would be degenerate, which only happens a
    hair below pi) is skipped until the path changes elsewhere; such wedges
    count as straight.  Returns ``(path, length, iterations, converged)``.
    Mesh flips are left in place; the caller rolls them back with
    :func:`undo`.  When ``trace`` has room, the length after each iteration
    is recorded into it.
    """
    path = remove_loops(m, path)
    length = path_length(m, path)
    it = 0
    converged = False
    stuck = [(0, 0)]
    stuck.pop()
    while it < max_iter:
        best = math.pi - eps
        bi = -1
        bside = 0
        for i in range(1, len(path)):
            b = path[i]
            a = path[i - 1] ^ 1
            w0 = wedge_angle(m, b, a, max_deg)
            if w0 < best and not _is_stuck(stuck, b, 2 * a):
                best, bi, bside = w0, i, 0
            w1 = wedge_angle(m, a, b, max_deg)
            if w1 < best and not _is_stuck(stuck, b, 2 * a + 1):
                best, bi, bside = w1, i, 1
        if bi < 0:
            converged = True
            break
        b = path[bi]
        a = path[bi - 1] ^ 1
        if bside == 0:
            chain = _shorten_wedge(m, b, a, max_deg, log, eps)
            if len(chain) == 0:
                break
            seg = np.empty(len(chain), np.int64)
            for q in range(len(chain)):
                seg[q] = chain[len(chain) - 1 - q] ^ 1
        else:
            seg = _shorten_wedge(m, a, b, max_deg, log, eps)
            if len(seg) == 0:
                break
        newpath = np.concatenate((path[: bi - 1], seg, path[bi + 1:]))
        newpath = remove_loops(m, newpath)
        newlen = path_length(m, newpath)
        it += 1
        if newlen < length:
            path = newpath
            length = newlen
            stuck.clear()
        else:
            stuck.append((b, 2 * a + bside))
        if it - 1 < len(trace):
            trace[it - 1] = length
    return path, length, it, converged


@njit(cache=True)
def _is_stuck(stuck, b, key):
    for q in range(len(stuck)):
        if stuck[q][0] == b and stuck[q][1] == key:
            return True
    return False


# ---------------------------------------------------------------------------
# multi-source nearest-site field
# ---------------------------------------------------------------------------

@njit(cache=True)
def _query(m, start, adj, v, s_vtx, pred, done, log, eps, max_iter, max_deg,
           init_mode, n_way, n_v, wdist, wpred, wdone):
    """Flip-shortened distance from ``v`` to vertex ``s_vtx``.

    ``init_mode == 0`` starts from the ball's predecessor path; ``1`` builds a
    deliberately poor start by chaining Dijkstra paths through random
    waypoints.
    """
    if init_mode == 0 and done[s_vtx]:
        path = path_to(m, pred, v, s_vtx)
    elif init_mode == 0:
        # target outside the ball: its own graph path
        touched = [0]
        touched.pop()
        dijkstra(m, start, adj, v, s_vtx, INF, wdist, wpred, wdone, touched)
        path = path_to(m, wpred, v, s_vtx)
        reset_work(touched, wdist, wpred, wdone)
    else:
        pieces = []
        cur = v
        for _ in range(n_way + 1):
            nxt = s_vtx if len(pieces) == n_way else np.random.randint(0, n_v)
            if nxt == cur:
                continue
            touched = [0]
            touched.pop()
            dijkstra(m, start, adj, cur, nxt, INF, wdist, wpred, wdone, touched)
            pieces.append(path_to(m, wpred, cur, nxt))
            reset_work(touched, wdist, wpred, wdone)
            cur = nxt
        if cur != s_vtx:
            touched = [0]
            touched.pop()
            dijkstra(m, start, adj, cur, s_vtx, INF, wdist, wpred, wdone, touched)
            pieces.append(path_to(m, wpred, cur, s_vtx))
            reset_work(touched, wdist, wpred, wdone)
        total = 0
        for pc in pieces:
            total += len(pc)
        path = np.empty(total, np.int64)
        o = 0
        for pc in pieces:
            path[o:o + len(pc)] = pc
            o += len(pc)
    if len(path) == 0:
        return 0.0, True
    p0 = log.pos[0]
    trace = np.empty(0)
    _, length, _, conv = flip_shorten(m, path, max_iter, log, eps, max_deg, trace)
    undo(m, log, p0)
    return length, conv


@njit(cache=True)
def _descend(m, start, adj, v, s0, site_vtx, site_prev, site_next, pred, done, log,
             eps, max_iter, max_deg, init_mode, n_way, n_v, wdist, wpred, wdone,
             cache, stats):
    """Walk from site ``s0`` along the curve while the distance to ``v`` drops.

    Returns ``(distance, site)``.  ``stats`` counts queries and non-converged
    refinements.
    """
    n_s = len(site_vtx)
    cur = s0
    key = v * n_s + cur
    if key in cache:
        dcur = cache[key]
    else:
        dcur, conv = _query(m, start, adj, v, site_vtx[cur], pred, done, log, eps,
                            max_iter, max_deg, init_mode, n_way, n_v, wdist, wpred, wdone)
        cache[key] = dcur
        stats[0] += 1
        if not conv:
            stats[1] += 1
    while True:
        nb_best = dcur
        nb_s = -1
        for nb in (site_prev[cur], site_next[cur]):
            if nb < 0:
                continue
            key = v * n_s + nb
            if key in cache:
                dn = cache[key]
            else:
                dn, conv = _query(m, start, adj, v, site_vtx[nb], pred, done, log, eps,
                                  max_iter, max_deg, init_mode, n_way, n_v, wdist, wpred, wdone)
                cache[key] = dn
                stats[0] += 1
                if not conv:
                    stats[1] += 1
            if dn < nb_best or (dn == nb_best and nb_s >= 0 and nb < nb_s):
                nb_best = dn
                nb_s = nb
        if nb_s >= 0 and nb_best < dcur:
            cur = nb_s
            dcur = nb_best
        else:
            break
    return dcur, cur


@njit(cache=True)
def nearest_site_field(m, start, adj, n_v, site_vtx, site_prev, site_next,
                       cutoff, alpha, log, eps, max_iter, max_deg,
                       init_mode, n_way, seed, cache, max_sweeps):
    """Label every vertex within ``cutoff`` with its geodesically nearest site.

    Candidate sites for a vertex are the sites settled by a Dijkstra ball of
    radius ``(1 + alpha) * g`` (``g`` = multi-source graph distance).  They are
    grouped into runs of consecutive curve sites; flip-shortened distances are
    then minimized by walking downhill along the curve from the best graph
    candidate of each run, from the graph-nearest site, and from the labels of
    already finalized neighbours.  Repair sweeps then re-seed every vertex
    from all neighbour labels until nothing improves, which catches sites
    the ball missed because graph distances overestimate.  Every refined pair
    is stored in ``cache`` under key ``v * n_sites + s``.
    """
    np.random.seed(seed)
    n_s = len(site_vtx)
    labels = np.arange(n_s)
    g, gsite = multi_source(m, start, adj, n_v, site_vtx, labels, cutoff)
    vsite = np.full(n_v, -1, np.int64)
    for s in range(n_s - 1, -1, -1):
        vsite[site_vtx[s]] = s
    field = np.full(n_v, INF)
    nearest = np.full(n_v, -1, np.int64)
    finalized = np.zeros(n_v, np.bool_)
    order = np.argsort(g, kind="mergesort")
    dist = np.full(n_v, INF)
    pred = np.full(n_v, -1, np.int64)
    done = np.zeros(n_v, np.bool_)
    wdist = np.full(n_v, INF)
    wpred = np.full(n_v, -1, np.int64)
    wdone = np.zeros(n_v, np.bool_)
    member = np.zeros(n_s, np.bool_)
    stats = np.zeros(2, np.int64)
    for oi in range(n_v):
        v = order[oi]
        if g[v] == INF:
            break
        if vsite[v] >= 0:
            s = vsite[v]
            field[v] = 0.0
            nearest[v] = s
            finalized[v] = True
            cache[v * n_s + s] = 0.0
            continue
        touched = [0]
        touched.pop()
        dijkstra(m, start, adj, v, -1, (1.0 + alpha) * g[v], dist, pred, done, touched)
        cands = []
        for w in touched:
            if done[w] and vsite[w] >= 0:
                cands.append(vsite[w])
                member[vsite[w]] = True
        seeds = [gsite[v]]
        for s in cands:
            p = site_prev[s]
            if p >= 0 and member[p]:
                continue
            # start of a run: follow it and seed at its graph-closest site
            best_s = s
            best_d = dist[site_vtx[s]]
            q = site_next[s]
            while q >= 0 and member[q] and q != s:
                if dist[site_vtx[q]] < best_d:
                    best_d = dist[site_vtx[q]]
                    best_s = q
                q = site_next[q]
            seeds.append(best_s)
        # neighbour labels may lie outside the ball when graph distances
        # overestimate badly; they are still valid starting points
        for k in range(start[v], start[v + 1]):
            w = m.he_vert[adj[k] ^ 1]
            if finalized[w] and nearest[w] >= 0:
                seeds.append(nearest[w])
        best = INF
        lab = -1
        for s0 in seeds:
            dcur, cur = _descend(m, start, adj, v, s0, site_vtx, site_prev, site_next,
                                 pred, done, log, eps, max_iter, max_deg, init_mode,
                                 n_way, n_v, wdist, wpred, wdone, cache, stats)
            if dcur < best or (dcur == best and cur < lab):
                best = dcur
                lab = cur
        field[v] = best
        nearest[v] = lab
        finalized[v] = True
        for s in cands:
            member[s] = False
        reset_work(touched, dist, pred, done)
    # repair sweeps; ``done`` is all false here so queries route their own paths
    for _ in range(max_sweeps):
        changed = 0
        for oi in range(n_v):
            v = order[oi]
            if g[v] == INF:
                break
            if vsite[v] >= 0:
                continue
            for k in range(start[v], start[v + 1]):
                w = m.he_vert[adj[k] ^ 1]
                if not finalized[w] or nearest[w] < 0 or nearest[w] == nearest[v]:
                    continue
                # an already refined pair was explored by an earlier descent
                if v * n_s + nearest[w] in cache:
                    continue
                dcur, cur = _descend(m, start, adj, v, nearest[w], site_vtx, site_prev,
                                     site_next, pred, done, log, eps, max_iter, max_deg,
                                     init_mode, n_way, n_v, wdist, wpred, wdone, cache, stats)
                if dcur < field[v] or (dcur == field[v] and cur < nearest[v]):
                    field[v] = dcur
                    nearest[v] = cur
                    changed += 1
        if changed == 0:
            break
    return field, nearest, finalized, g, stats[0], stats[1]


@njit(cache=True)
def pair_distances(m, start, adj, n_v, qv, qs, site_vtx, log, eps, max_iter,
                   max_deg, cache):
    """Fill ``cache`` for pairs ``(qv[i], qs[i])``; ``qv`` must be sorted."""
    n_s = len(site_vtx)
    dist = np.full(n_v, INF)
    pred = np.full(n_v, -1, np.int64)
    done = np.zeros(n_v, np.bool_)
    wdist = np.full(n_v, INF)
    wpred = np.full(n_v, -1, np.int64)
    wdone = np.zeros(n_v, np.bool_)
    need = np.zeros(n_v, np.bool_)
    n_nonconv = 0
    i = 0
    n = len(qv)
    while i < n:
        v = qv[i]
        j = i
        while j < n and qv[j] == v:
            j += 1
        remaining = 0
        for q in range(i, j):
            if v * n_s + qs[q] in cache:
                continue
            tv = site_vtx[qs[q]]
            if not need[tv]:
                need[tv] = True
                remaining += 1
        if remaining > 0:
            touched = [0]
            touched.pop()
            # grow the ball until every requested site vertex is settled
            dist[v] = 0.0
            touched.append(v)
            heap = [(0.0, v)]
            while len(heap) > 0 and remaining > 0:
                d, u = heapq.heappop(heap)
                if done[u] or d > dist[u]:
                    continue
                done[u] = True
                if need[u]:
                    remaining -= 1
                for k in range(start[u], start[u + 1]):
                    h = adj[k]
                    w = m.he_vert[h ^ 1]
                    if done[w]:
                        continue
                    nd = d + m.elen[h >> 1]
                    if nd < dist[w]:
                        if dist[w] == INF:
                            touched.append(w)
                        dist[w] = nd
                        pred[w] = h
                        heapq.heappush(heap, (nd, w))
                    elif nd == dist[w] and u < m.he_vert[pred[w]]:
                        pred[w] = h
            for q in range(i, j):
                key = v * n_s + qs[q]
                if key in cache:
                    continue
                tv = site_vtx[qs[q]]
                need[tv] = False
                if not done[tv]:
                    cache[key] = INF
                    continue
                d, conv = _query(m, start, adj, v, tv, pred, done, log, eps, max_iter,
                                 max_deg, 0, 0, n_v, wdist, wpred, wdone)
                cache[key] = d
                if not conv:
                    n_nonconv += 1
            reset_work(touched, dist, pred, done)
        i = j
    return n_nonconv


# ---------------------------------------------------------------------------
# Steiner-point graph for initial paths
# ---------------------------------------------------------------------------

@njit(cache=True)
def steiner_graph(m, n_v, n_e, n_f, pos, k):
    """Graph on the vertices plus ``k`` evenly spaced points per edge.

    Node ``n_v + e * k + j`` sits at fraction ``(j + 1) / (k + 1)`` of edge
    ``e`` measured from ``he_vert[2 e]``.  Points on different edges of a face
    are joined by straight segments of the unfolded face ``pos[f]`` (corners
    in ``f_he`` order); points on one edge are chained along it.  Returns CSR
    arrays ``(start, nbr, weight)``.
    """
    n_nodes = n_v + n_e * k
    src = [0]
    dst = [0]
    wt = [0.0]
    src.pop()
    dst.pop()
    wt.pop()
    nb = 3 * (k + 1)
    node = np.empty(nb, np.int64)
    px = np.empty(nb)
    py = np.empty(nb)
    blk = np.empty(nb, np.int64)
    is_corner = np.empty(nb, np.bool_)
    for f in range(n_f):
        h = m.f_he[f]
        q = 0
        for c in range(3):
            c1 = (c + 1) % 3
            node[q] = m.he_vert[h]
            px[q] = pos[f, c, 0]
            py[q] = pos[f, c, 1]
            blk[q] = c
            is_corner[q] = True
            q += 1
            e = h >> 1
            for j in range(k):
                t = (j + 1) / (k + 1)
                if h & 1:
                    t = 1.0 - t
                node[q] = n_v + e * k + j
                px[q] = pos[f, c, 0] + t * (pos[f, c1, 0] - pos[f, c, 0])
                py[q] = pos[f, c, 1] + t * (pos[f, c1, 1] - pos[f, c, 1])
                blk[q] = c
                is_corner[q] = False
                q += 1
            h = m.he_next[h]
        for a in range(nb):
            for b in range(a + 1, nb):
                # corner c lies on edges c and c - 1, other points on their own edge
                ea0, eb0 = blk[a], blk[b]
                ea1 = (ea0 + 2) % 3 if is_corner[a] else ea0
                eb1 = (eb0 + 2) % 3 if is_corner[b] else eb0
                if ea0 == eb0 or ea0 == eb1 or ea1 == eb0 or ea1 == eb1:
                    continue
                d = math.hypot(px[a] - px[b], py[a] - py[b])
                src.append(node[a])
                dst.append(node[b])
                wt.append(d)
                src.append(node[b])
                dst.append(node[a])
                wt.append(d)
    for e in range(n_e):
        step = m.elen[e] / (k + 1)
        prev = m.he_vert[2 * e]
        for j in range(k + 1):
            nxt = n_v + e * k + j if j < k else m.he_vert[2 * e + 1]
            src.append(prev)
            dst.append(nxt)
            wt.append(step)
            src.append(nxt)
            dst.append(prev)
            wt.append(step)
            prev = nxt
    n = len(src)
    start = np.zeros(n_nodes + 1, np.int64)
    for i in range(n):
        start[src[i] + 1] += 1
    for v in range(n_nodes):
        start[v + 1] += start[v]
    fill = start[:-1].copy()
    nbr = np.empty(n, np.int64)
    weight = np.empty(n)
    for i in range(n):
        s = src[i]
        nbr[fill[s]] = dst[i]
        weight[fill[s]] = wt[i]
        fill[s] += 1
    return start, nbr, weight


@njit(cache=True)
def _steiner_snap(m, n_v, k, node):
    if node < n_v:
        return node
    e = (node - n_v) // k
    j = (node - n_v) % k
    if (j + 1) / (k + 1) < 0.5:
        return m.he_vert[2 * e]
    return m.he_vert[2 * e + 1]


@njit(cache=True)
def _node_face_he(m, n_v, k, p, q):
    """Half-edge of ``p``'s edge inside the face that also holds node ``q``, or -1."""
    e = (p - n_v) // k
    if q == m.he_vert[2 * e] or q == m.he_vert[2 * e + 1]:
        return -1
    for h in (2 * e, 2 * e + 1):
        f = m.he_face[h]
        if f < 0:
            continue
        g = h
        for _ in range(3):
            if q < n_v:
                if m.he_vert[g] == q:
                    return h
            elif g >> 1 == (q - n_v) // k and g >> 1 != e:
                return h
            g = m.he_next[g]
    return -1


@njit(cache=True)
def _snap_side(m, n_v, k, nodes, i, side):
    """End of the edge under Steiner node ``nodes[i]`` left (side 1) or right (side 2) of the route."""
    p = nodes[i]
    left = -1
    if i + 1 < len(nodes):
        h = _node_face_he(m, n_v, k, p, nodes[i + 1])
        if h >= 0:
            # leaving through face(h): its interior is left of h, so tail(h) is on the left
            left = m.he_vert[h]
    if left < 0 and i > 0:
        h = _node_face_he(m, n_v, k, p, nodes[i - 1])
        if h >= 0:
            left = m.he_vert[h ^ 1]
    if left < 0:
        return _steiner_snap(m, n_v, k, p)
    e = (p - n_v) // k
    other = m.he_vert[2 * e] + m.he_vert[2 * e + 1] - left
    return left if side == 1 else other


@njit(cache=True)
def _chain_to_edges(m, start, adj, n_v, k, nodes, side):
    """Edge path along a Steiner node chain.

    Each Steiner point snaps to an end of its edge: the nearer one
    (``side`` 0), or consistently the one left (1) or right (2) of the route.
    Consecutive snapped vertices share a face, hence an edge.  Loops are
    erased.  An empty array means the chain could not be turned into an
    edge path.
    """
    verts = [nodes[0]]
    verts.pop()
    for i in range(len(nodes)):
        if nodes[i] < n_v or side == 0:
            w = _steiner_snap(m, n_v, k, nodes[i])
        else:
            w = _snap_side(m, n_v, k, nodes, i, side)
        if len(verts) > 0 and verts[len(verts) - 1] == w:
            continue
        cut = -1
        for q in range(len(verts)):
            if verts[q] == w:
                cut = q
                break
        if cut >= 0:
            del verts[cut + 1:]
        else:
            verts.append(w)
    out = np.empty(max(len(verts) - 1, 0), np.int64)
    for i in range(len(verts) - 1):
        u, w = verts[i], verts[i + 1]
        found = -1
        for q in range(start[u], start[u + 1]):
            if m.he_vert[adj[q] ^ 1] == w:
                found = adj[q]
                break
        if found < 0:
            return np.empty(0, np.int64)
        out[i] = found
    return out


@njit(cache=True)
def _tree_chain(gpred, s, t, reverse):
    """Node chain ``s .. t`` from a predecessor tree rooted at ``s`` (``t .. s`` if ``reverse``)."""
    rev = [t]
    x = t
    while x != s:
        x = gpred[x]
        rev.append(x)
    if reverse:
        return rev
    out = [t]
    out.pop()
    for i in range(len(rev) - 1, -1, -1):
        out.append(rev[i])
    return out


@njit(cache=True)
def _steiner_to_edges(m, start, adj, n_v, k, gpred, s, t):
    return _chain_to_edges(m, start, adj, n_v, k, _tree_chain(gpred, s, t, False), 0)


@njit(cache=True)
def steiner_paths(m, start, adj, gstart, gnbr, gw, n_v, k, src, dst, log, eps, max_iter,
                  max_deg, shorten):
    """Flip-shortened lengths of Steiner-initialized paths for pairs ``(src, dst)``.

    ``src`` must be sorted.  One Steiner-graph Dijkstra per distinct source
    settles all of its targets.  With ``shorten`` false the initial edge
    path lengths are returned instead.  Returns ``(lengths, n_nonconverged)``;
    pairs whose snapped path cannot be formed get ``inf``.
    """
    n_nodes = len(gstart) - 1
    dist = np.full(n_nodes, INF)
    gpred = np.full(n_nodes, -1, np.int64)
    done = np.zeros(n_nodes, np.bool_)
    need = np.zeros(n_nodes, np.bool_)
    out = np.full(len(src), INF)
    n_bad = 0
    i = 0
    n = len(src)
    trace = np.empty(0)
    while i < n:
        s = src[i]
        j = i
        remaining = 0
        while j < n and src[j] == s:
            if not need[dst[j]] and dst[j] != s:
                need[dst[j]] = True
                remaining += 1
            j += 1
        touched = [s]
        dist[s] = 0.0
        heap = [(0.0, s)]
        while len(heap) > 0 and remaining > 0:
            d, u = heapq.heappop(heap)
            if done[u] or d > dist[u]:
                continue
            done[u] = True
            if need[u]:
                remaining -= 1
            for q in range(gstart[u], gstart[u + 1]):
                w = gnbr[q]
                if done[w]:
                    continue
                nd = d + gw[q]
                if nd < dist[w]:
                    if dist[w] == INF:
                        touched.append(w)
                    dist[w] = nd
                    gpred[w] = u
                    heapq.heappush(heap, (nd, w))
        for q in range(i, j):
            t = dst[q]
            need[t] = False
            if t == s:
                out[q] = 0.0
                continue
            if not done[t]:
                continue
            path = _steiner_to_edges(m, start, adj, n_v, k, gpred, s, t)
            if len(path) == 0:
                continue
            if not shorten:
                out[q] = path_length(m, path)
                continue
            p0 = log.pos[0]
            _, length, _, conv = flip_shorten(m, path, max_iter, log, eps, max_deg, trace)
            undo(m, log, p0)
            out[q] = length
            if not conv:
                n_bad += 1
        for v in touched:
            dist[v] = INF
            gpred[v] = -1
            done[v] = False
        i = j
    return out, n_bad


@njit(cache=True)
def steiner_pred(gstart, gnbr, gw, s, t):
    """Predecessor array of a Steiner-graph Dijkstra from ``s`` stopped at ``t``."""
    n = len(gstart) - 1
    dist = np.full(n, INF)
    pred = np.full(n, -1, np.int64)
    done = np.zeros(n, np.bool_)
    dist[s] = 0.0
    heap = [(0.0, s)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u] or d > dist[u]:
            continue
        done[u] = True
        if u == t:
            break
        for q in range(gstart[u], gstart[u + 1]):
            w = gnbr[q]
            nd = d + gw[q]
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = u
                heapq.heappush(heap, (nd, w))
    return pred


@njit(cache=True)
def steiner_tree(gstart, gnbr, gw, s, targets, slack):
    """Steiner-graph Dijkstra from ``s`` until every target is settled, then on
    to ``(1 + slack)`` times the farthest target distance.

    Returns ``(dist, pred)``; nodes beyond the radius keep ``inf``.
    """
    n = len(gstart) - 1
    dist = np.full(n, INF)
    pred = np.full(n, -1, np.int64)
    done = np.zeros(n, np.bool_)
    need = np.zeros(n, np.bool_)
    remaining = 0
    for t in targets:
        if not need[t]:
            need[t] = True
            remaining += 1
    radius = INF
    dist[s] = 0.0
    heap = [(0.0, s)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u] or d > dist[u]:
            continue
        if d > radius:
            break
        done[u] = True
        if need[u]:
            remaining -= 1
            if remaining == 0:
                radius = d * (1.0 + slack)
        for q in range(gstart[u], gstart[u + 1]):
            w = gnbr[q]
            nd = d + gw[q]
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = u
                heapq.heappush(heap, (nd, w))
    for u in range(n):
        if not done[u]:
            dist[u] = INF
    return dist, pred


@njit(cache=True)
def _vertex_sep(m, start, adj, n_v, used):
    """Edge-graph distance of every vertex from the marked set ``used``."""
    dist = np.full(n_v, INF)
    heap = [(0.0, 0)]
    heap.pop()
    for v in range(n_v):
        if used[v]:
            dist[v] = 0.0
            heap.append((0.0, v))
    heapq.heapify(heap)
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for q in range(start[u], start[u + 1]):
            h = adj[q]
            w = m.he_vert[h ^ 1]
            nd = d + m.elen[h >> 1]
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


@njit(cache=True)
def _shorten_len(m, path, log, eps, max_iter, max_deg):
    p0 = log.pos[0]
    _, length, _, conv = flip_shorten(m, path, max_iter, log, eps, max_deg, np.empty(0))
    undo(m, log, p0)
    return length, conv


@njit(cache=True)
def multistart_pair(m, start, adj, n_v, k, s, t, ds, ps, dt, pt, slack, n_alt, min_sep, used,
                    log, eps, max_iter, max_deg, n_base):
    """Shortest flip-shortened length over several initial paths from ``s`` to ``t``.

    ``(ds, ps)`` and ``(dt, pt)`` are Steiner-graph shortest-path trees rooted
    at ``s`` and ``t``.  The Steiner path from ``s`` to ``t`` is snapped three
    ways (nearest edge ends, all left, all right) and each is shortened.
    Then via vertices ``x`` with detour ``ds[x] + dt[x]`` within
    ``(1 + slack)`` of ``ds[t]`` and at least ``min_sep`` away from every
    initial path tried so far give further initial paths, alternating
    between the farthest such vertex and the cheapest one.  After ``n_base``
    via paths the search stops unless some shortened length differed from
    the first, in which case it continues up to ``n_alt``.  Differing lengths
    mean several local geodesics compete, which is where flip shortening of
    a single path can stop at a longer one.  ``used`` is scratch of size
    ``n_v``.  Returns ``(length, n_nonconverged, initial_path)`` where the
    path is the initial half-edge path that shortened to ``length``.
    """
    none = np.empty(0, np.int64)
    if s == t or ds[t] == INF:
        return (0.0 if s == t else INF), 0, none
    n_bad = 0
    best = INF
    winner = none
    used[:] = False
    used[s] = True
    primary = _tree_chain(ps, s, t, False)
    for side in range(3):
        path = _chain_to_edges(m, start, adj, n_v, k, primary, side)
        if len(path) == 0:
            continue
        length, conv = _shorten_len(m, path, log, eps, max_iter, max_deg)
        if not conv:
            n_bad += 1
        if length < best:
            best = length
            winner = path
        for h in path:
            used[m.he_vert[h ^ 1]] = True
    if len(winner) == 0:
        return INF, n_bad, none
    bound = ds[t] * (1.0 + slack)
    first = best
    split = False
    for a_i in range(n_alt):
        if a_i >= n_base and not split:
            break
        sep = _vertex_sep(m, start, adj, n_v, used)
        x = -1
        if a_i % 2 == 0:
            far = min_sep
            for v in range(n_v):
                if sep[v] > far and ds[v] + dt[v] <= bound:
                    far = sep[v]
                    x = v
        else:
            cheap = bound
            for v in range(n_v):
                if sep[v] > min_sep and ds[v] + dt[v] <= cheap:
                    cheap = ds[v] + dt[v]
                    x = v
        if x < 0:
            break
        chain = _tree_chain(ps, s, x, False)
        back = _tree_chain(pt, t, x, True)
        for r in range(1, len(back)):
            chain.append(back[r])
        alt = _chain_to_edges(m, start, adj, n_v, k, chain, 0)
        used[x] = True
        if len(alt) == 0:
            continue
        for h in alt:
            used[m.he_vert[h ^ 1]] = True
        length, conv = _shorten_len(m, alt, log, eps, max_iter, max_deg)
        if not conv:
            n_bad += 1
        if abs(length - first) > 1e-9 * first:
            split = True
        if length < best:
            best = length
            winner = alt
    return best, n_bad, winner

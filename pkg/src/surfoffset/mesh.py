"""Intrinsic triangulation of the parameter domain.

Vertices keep their parameter coordinates, but all geometry lives in the edge
lengths, which start out as induced-metric lengths of straight parameter
segments.  Edge flips change the connectivity and set the new edge length
from the unfolded quad, so after a flip an edge is no longer a straight
parameter segment.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, InternalError, RefinementError
from .surface import segment_lengths

log = logging.getLogger(__name__)

# barycentric coordinate below which a point is treated as lying on an edge
EDGE_SNAP = 1e-9


def _grow(arr, n, fill):
    if n <= len(arr):
        return arr
    cap = max(n, 2 * len(arr))
    out = np.full((cap,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[: len(arr)] = arr
    return out


class IntrinsicMesh:
    """Half-edge intrinsic triangulation over a :class:`SurfaceSpec` domain.

    Half-edges ``2e`` and ``2e + 1`` are twins of edge ``e``.  Boundary
    half-edges carry face ``-1``.  Arrays are over-allocated; only the first
    ``n_v`` / ``2 * n_e`` / ``n_f`` entries are meaningful.
    """

    def __init__(self, spec, uv, faces, grid=None, pole=None):
        self.spec = spec
        uv = np.asarray(uv, dtype=float)
        faces = np.asarray(faces, dtype=np.int64)
        self.n_v = len(uv)
        self.n_f = len(faces)
        self.uv = uv.copy()
        self.is_site = np.zeros(self.n_v, bool)
        # collapsed pole rows: the vertex stands for a whole row, so its u
        # coordinate follows whichever neighbour it is measured against
        self.pole = np.zeros(self.n_v, bool) if pole is None else np.asarray(pole, bool).copy()
        self.grid = grid
        self._build_connectivity(faces)
        self.elen = self._edge_lengths_from_params(np.arange(self.n_e))
        self.v_theta = np.zeros(self.n_v)
        self.v_bnd = np.zeros(self.n_v, bool)
        self.he_phi = np.zeros(len(self.he_next))
        self._log = K.new_log()
        self._dirty = True
        self._csr = None
        self._cell_faces = None
        if grid is not None:
            self._init_cells()

    # -- construction ------------------------------------------------------

    def _build_connectivity(self, faces):
        nf = len(faces)
        tails = faces.ravel()
        heads = np.roll(faces, -1, axis=1).ravel()
        lo = np.minimum(tails, heads)
        hi = np.maximum(tails, heads)
        keys = lo * np.int64(self.n_v) + hi
        uniq, inv = np.unique(keys, return_inverse=True)
        self.n_e = len(uniq)
        he = 2 * inv + (tails > heads)
        if len(np.unique(he)) != len(he):
            raise ConfigurationError("non-manifold or inconsistently oriented face list")
        n_he = 2 * self.n_e
        self.he_next = np.full(n_he, -1, np.int64)
        self.he_face = np.full(n_he, -1, np.int64)
        self.he_vert = np.empty(n_he, np.int64)
        self.he_vert[0::2] = uniq // self.n_v
        self.he_vert[1::2] = uniq % self.n_v
        loc = he.reshape(nf, 3)
        self.he_next[loc[:, 0]] = loc[:, 1]
        self.he_next[loc[:, 1]] = loc[:, 2]
        self.he_next[loc[:, 2]] = loc[:, 0]
        self.he_face[loc] = np.arange(nf)[:, None]
        self.f_he = loc[:, 0].copy()
        self.v_he = np.full(self.n_v, -1, np.int64)
        self.v_he[tails] = he

    def _edge_lengths_from_params(self, edges):
        va, vb = self.he_vert[2 * edges], self.he_vert[2 * edges + 1]
        a = self.uv[va].copy()
        b = self.spec.unwrap_near(self.uv[vb], a)
        a[self.pole[va], 0] = b[self.pole[va], 0]
        b[self.pole[vb], 0] = a[self.pole[vb], 0]
        return segment_lengths(self.spec, a, b)

    def _init_cells(self):
        """Map every face to the parameter grid cell it was generated in."""
        ncu, ncv = self.grid["cells"]
        self._cell_faces = [[] for _ in range(ncu * ncv)]
        self._face_cell = np.asarray(self.grid["face_cell"], np.int64).copy()
        for f, c in enumerate(self._face_cell):
            self._cell_faces[c].append(f)

    # -- sizes -----------------------------------------------------------

    @property
    def n_he(self):
        return 2 * self.n_e

    def euler(self):
        return self.n_v - self.n_e + self.n_f

    def mean_edge_length(self):
        return float(self.elen[: self.n_e].mean())

    # -- views for the compiled kernels ------------------------------------

    def kmesh(self):
        return K.KMesh(self.he_next, self.he_vert, self.he_face, self.he_phi,
                       self.elen, self.v_he, self.v_theta, self.v_bnd, self.f_he)

    def prepare(self):
        """Refresh signpost angles and the vertex adjacency after edits."""
        if self._dirty:
            K.compute_signposts(self.kmesh(), self.n_v)
            self._csr = K.build_csr(self.n_v, self.n_he, self.he_vert)
            self._dirty = False
        return self._csr

    @property
    def undo_log(self):
        return self._log

    # -- queries ---------------------------------------------------------

    def edge_vertices(self, e):
        return int(self.he_vert[2 * e]), int(self.he_vert[2 * e + 1])

    def face_halfedges(self, f):
        h0 = self.f_he[f]
        h1 = self.he_next[h0]
        return h0, h1, self.he_next[h1]

    def face_vertices(self, f=None):
        """Corner vertex ids of face ``f`` (or an ``(n_f, 3)`` array of all)."""
        if f is None:
            h0 = self.f_he[: self.n_f]
            h1 = self.he_next[h0]
            h2 = self.he_next[h1]
            return np.stack([self.he_vert[h0], self.he_vert[h1], self.he_vert[h2]], axis=1)
        return tuple(int(self.he_vert[h]) for h in self.face_halfedges(f))

    def face_lengths(self, f=None):
        """Edge lengths opposite nothing in particular: ``(l01, l12, l20)``."""
        if f is None:
            h0 = self.f_he[: self.n_f]
            h1 = self.he_next[h0]
            h2 = self.he_next[h1]
            return np.stack([self.elen[h0 >> 1], self.elen[h1 >> 1], self.elen[h2 >> 1]], axis=1)
        return tuple(float(self.elen[h >> 1]) for h in self.face_halfedges(f))

    def face_uv(self, f=None):
        """Corner parameter coordinates, unwrapped next to the first corner.

        A collapsed pole corner takes the mean ``u`` of the other two.
        """
        fv = np.atleast_2d(np.asarray(self.face_vertices(f)))
        return self._corner_uv(fv)[0] if f is not None else self._corner_uv(fv)

    def _corner_uv(self, fv, ref=None):
        p = self.uv[fv]
        if ref is None:
            ref = np.where(self.pole[fv[:, 0]][:, None], p[:, 1], p[:, 0])
        q = self.spec.unwrap_near(p, ref[:, None, :])
        pl = self.pole[fv]
        if pl.any():
            for k in range(3):
                rows = np.flatnonzero(pl[:, k])
                if len(rows):
                    o = [j for j in range(3) if j != k]
                    q[rows, k, 0] = q[rows][:, o, 0].mean(axis=1)
        return q

    def unfold(self, f=None):
        """Planar layout of face corners: first at the origin, second on +x."""
        l = np.asarray(self.face_lengths(f), dtype=float)
        return unfold_lengths(l)

    def validate(self, slack=0.0):
        """Smallest triangle-inequality slack over all faces; raises if <= ``slack``."""
        l = self.face_lengths()
        s = np.minimum.reduce([l[:, 0] + l[:, 1] - l[:, 2],
                               l[:, 1] + l[:, 2] - l[:, 0],
                               l[:, 2] + l[:, 0] - l[:, 1]])
        worst = float(s.min()) if len(s) else math.inf
        if worst <= slack:
            f = int(np.argmin(s))
            raise RefinementError(
                f"face {f} violates the triangle inequality (slack {worst:.3e}); use a denser grid"
            )
        return worst

    def repair_lengths(self, rel=1e-9, rounds=50):
        """Clamp edges that are longer than a two-edge detour inside a face.

        A straight parameter segment only bounds the geodesic distance from
        above, and near metric degeneracies (sphere poles) on coarse grids
        it can exceed the sum of the other two sides of its triangle.  The
        detour is an upper bound too, so taking the minimum keeps every length
        an upper bound while restoring the triangle inequality.  Returns the
        number of edges changed.
        """
        changed = set()
        for _ in range(rounds):
            h0 = self.f_he[: self.n_f]
            h1 = self.he_next[h0]
            h2 = self.he_next[h1]
            e = np.stack([h0 >> 1, h1 >> 1, h2 >> 1], axis=1)
            l = self.elen[e]
            # sum the other two sides directly: s - l cancels when nearly degenerate
            detour = (np.roll(l, -1, axis=1) + np.roll(l, -2, axis=1)) * (1.0 - rel)
            bad = l > detour
            if not bad.any():
                break
            for f, k in zip(*np.nonzero(bad)):
                ed = e[f, k]
                self.elen[ed] = min(self.elen[ed], detour[f, k])
                changed.add(int(ed))
        return len(changed)

    def check_connectivity(self):
        """Structural consistency checks used by tests; raises InternalError."""
        n_he = self.n_he
        nx = self.he_next[:n_he]
        fc = self.he_face[:n_he]
        inner = np.flatnonzero(fc >= 0)
        if np.any(nx[nx[nx[inner]]] != inner):
            raise InternalError("face cycle is not a triangle")
        if np.any(fc[nx[inner]] != fc[inner]):
            raise InternalError("next pointer leaves its face")
        heads = self.he_vert[inner ^ 1]
        if np.any(self.he_vert[nx[inner]] != heads):
            raise InternalError("half-edge heads and next tails disagree")
        if np.any(self.he_face[self.f_he[: self.n_f]] != np.arange(self.n_f)):
            raise InternalError("face anchor half-edge points elsewhere")
        if np.any(self.he_vert[self.v_he[: self.n_v]] != np.arange(self.n_v)):
            raise InternalError("vertex anchor half-edge has the wrong tail")

    # -- edits -----------------------------------------------------------

    def flip_edge(self, e):
        """Intrinsically flip edge ``e`` and return its id (ids are reused).

        Raises :class:`RefinementError` without touching the mesh when the
        unfolded quad is not strictly convex at the two off-edge vertices.
        """
        self.prepare()
        m = self.kmesh()
        if not K.can_flip(m, 2 * e, 1e-12):
            raise RefinementError(f"edge {e} is not flippable")
        self._log.pos[0] = 0
        K.flip(m, 2 * e, self._log)
        self._log.pos[0] = 0
        self._csr = K.build_csr(self.n_v, self.n_he, self.he_vert)
        return e

    def _reserve(self, dv, de, df):
        nv, nhe, nf = self.n_v + dv, self.n_he + 2 * de, self.n_f + df
        self.uv = _grow(self.uv, nv, 0.0)
        self.is_site = _grow(self.is_site, nv, False)
        self.pole = _grow(self.pole, nv, False)
        self.v_he = _grow(self.v_he, nv, -1)
        self.v_theta = _grow(self.v_theta, nv, 0.0)
        self.v_bnd = _grow(self.v_bnd, nv, False)
        self.he_next = _grow(self.he_next, nhe, -1)
        self.he_vert = _grow(self.he_vert, nhe, -1)
        self.he_face = _grow(self.he_face, nhe, -1)
        self.he_phi = _grow(self.he_phi, nhe, 0.0)
        self.elen = _grow(self.elen, self.n_e + de, 0.0)
        self.f_he = _grow(self.f_he, nf, -1)
        if self._cell_faces is not None:
            self._face_cell = _grow(self._face_cell, nf, -1)

    def _new_vertex(self, p):
        v = self.n_v
        self.uv[v] = p
        self.n_v += 1
        return v

    def _new_edge(self, a, b):
        e = self.n_e
        self.he_vert[2 * e] = a
        self.he_vert[2 * e + 1] = b
        self.n_e += 1
        return e

    def _set_face(self, f, hs):
        nx = self.he_next
        nx[hs[0]], nx[hs[1]], nx[hs[2]] = hs[1], hs[2], hs[0]
        for h in hs:
            self.he_face[h] = f
        self.f_he[f] = hs[0]

    def _register_child(self, parent, child):
        if self._cell_faces is not None:
            c = self._face_cell[parent]
            self._face_cell[child] = c
            if c >= 0:
                self._cell_faces[c].append(child)

    def locate(self, p):
        """Face containing parameter point ``p`` and its barycentric coordinates."""
        p = self.spec.wrap(p)
        cands = None
        if self._cell_faces is not None:
            g = self.grid
            u0, _, v0, _ = g["domain"]
            ncu, ncv = g["cells"]
            iu = int(np.clip(math.floor((p[0] - u0) / g["du"]), 0, ncu - 1))
            iv = int(np.clip(math.floor((p[1] - v0) / g["dv"]), 0, ncv - 1))
            cands = []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a, b = iu + di, iv + dj
                    if self.spec.periodic[0]:
                        a %= ncu
                    if self.spec.periodic[1]:
                        b %= ncv
                    if 0 <= a < ncu and 0 <= b < ncv:
                        cands.extend(self._cell_faces[a + ncu * b])
            cands = np.array(sorted(set(cands)), np.int64)
        hit = self._locate_in(p, cands)
        if hit is None:
            hit = self._locate_in(p, None)
        if hit is None:
            raise RefinementError(f"point {p.tolist()} is not inside any face")
        return hit

    def _locate_in(self, p, faces):
        if faces is None:
            faces = np.arange(self.n_f)
        if len(faces) == 0:
            return None
        fv = self.face_vertices()[faces]
        q = self._corner_uv(fv, np.broadcast_to(p, (len(fv), 2)))
        bary = _barycentric(p, q[:, 0], q[:, 1], q[:, 2])
        score = bary.min(axis=1)
        k = int(np.argmax(score))
        if score[k] < -1e-9:
            return None
        return int(faces[k]), bary[k]

    def insert_site(self, p):
        """Insert parameter point ``p`` as a site vertex and return its id.

        Points within ``1e-12`` of the domain extent from an existing corner
        return that corner.  Points on an edge split the edge, others split
        their face into three.
        """
        p = self.spec.wrap(np.asarray(p, dtype=float))
        f, bary = self.locate(p)
        fv = self.face_vertices(f)
        tol = 1e-12 * float(self.spec.extent.max())
        for v in fv:
            if self.spec.param_distance(self.uv[v], p) < tol:
                self.is_site[v] = True
                return int(v)
        hs = self.face_halfedges(f)
        k = int(np.argmin(bary))
        if bary[k] <= EDGE_SNAP:
            # bary[k] ~ 0 puts p on the edge opposite corner k
            v = self._split_edge(hs[(k + 1) % 3], p)
        else:
            v = self._split_face(f, p)
            if v is None:
                log.debug("face split of %d failed the triangle inequality; splitting edge", f)
                v = self._split_edge(hs[(k + 1) % 3], p)
        self.is_site[v] = True
        self._repair_local(self._touched)
        self._dirty = True
        return v

    def _repair_local(self, faces, rel=1e-9, max_steps=100_000):
        """Detour clamp of :meth:`repair_lengths` spreading out from ``faces``.

        Straight parameter segments to a new vertex close to an old edge can
        make that edge a hair longer than the two-spoke detour.
        """
        work = [int(f) for f in faces]
        for _ in range(max_steps):
            if not work:
                return
            f = work.pop()
            hs = self.face_halfedges(f)
            e = [h >> 1 for h in hs]
            l = self.elen[e]
            for k in range(3):
                detour = (l[(k + 1) % 3] + l[(k + 2) % 3]) * (1.0 - rel)
                if l[k] > detour:
                    self.elen[e[k]] = detour
                    for g in (self.he_face[hs[k]], self.he_face[hs[k] ^ 1]):
                        if g >= 0:
                            work.append(int(g))
                    break
        raise InternalError("local length repair did not settle")

    def _lengths_from(self, p, verts):
        verts = np.asarray(verts)
        q = self.spec.unwrap_near(self.uv[verts], p)
        q[self.pole[verts], 0] = p[0]
        return segment_lengths(self.spec, np.repeat(p[None], len(verts), 0), q)

    def _split_face(self, f, p):
        a0, a1, a2 = self.face_halfedges(f)
        i, j, k = (int(self.he_vert[h]) for h in (a0, a1, a2))
        lens = self._lengths_from(p, [i, j, k])
        li, lj, lk = lens
        lij, ljk, lki = (self.elen[h >> 1] for h in (a0, a1, a2))
        for x, y, z in ((li, lj, lij), (lj, lk, ljk), (lk, li, lki)):
            if not (x + y > z and y + z > x and z + x > y):
                return None
        self._reserve(1, 3, 2)
        n = self._new_vertex(p)
        ei = self._new_edge(i, n)
        ej = self._new_edge(j, n)
        ek = self._new_edge(k, n)
        self.elen[[ei, ej, ek]] = lens
        xi, xj, xk = 2 * ei, 2 * ej, 2 * ek
        f1, f2 = self.n_f, self.n_f + 1
        self.n_f += 2
        self._set_face(f, (a0, xj, xi ^ 1))
        self._set_face(f1, (a1, xk, xj ^ 1))
        self._set_face(f2, (a2, xi, xk ^ 1))
        self.v_he[n] = xi ^ 1
        self._register_child(f, f1)
        self._register_child(f, f2)
        self._touched = (f, f1, f2)
        return n

    def _split_edge(self, h, p):
        t = h ^ 1
        i, j = int(self.he_vert[h]), int(self.he_vert[t])
        A, B = int(self.he_face[h]), int(self.he_face[t])
        if A < 0:
            h, t = t, h
            i, j = j, i
            A, B = B, A
        h1 = self.he_next[h]
        h2 = self.he_next[h1]
        k = int(self.he_vert[h2])
        others = [i, j, k]
        if B >= 0:
            t1 = self.he_next[t]
            t2 = self.he_next[t1]
            l = int(self.he_vert[t2])
            others.append(l)
        lens = self._lengths_from(p, others)
        self._reserve(1, 3, 2)
        n = self._new_vertex(p)
        y = 2 * self._new_edge(n, j)
        z = 2 * self._new_edge(n, k)
        self.elen[h >> 1] = lens[0]
        self.elen[y >> 1] = lens[1]
        self.elen[z >> 1] = lens[2]
        self.he_vert[t] = n
        if self.v_he[j] == t:
            self.v_he[j] = y ^ 1
        a2 = self.n_f
        self.n_f += 1
        self._set_face(A, (h, z, h2))
        self._set_face(a2, (y, h1, z ^ 1))
        self._register_child(A, a2)
        self._touched = (A, a2)
        if B >= 0:
            w = 2 * self._new_edge(n, l)
            self.elen[w >> 1] = lens[3]
            b2 = self.n_f
            self.n_f += 1
            self._set_face(B, (t, t1, w ^ 1))
            self._set_face(b2, (y ^ 1, w, t2))
            self._register_child(B, b2)
            self._touched = (A, a2, B, b2)
        else:
            self.he_next[y ^ 1] = -1
            self.he_face[y ^ 1] = -1
            self.he_next[t] = -1
        self.v_he[n] = y
        return n

    # -- copies and dumps --------------------------------------------------

    def copy(self):
        other = object.__new__(IntrinsicMesh)
        for k, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                v = v.copy()
            elif k == "_cell_faces" and v is not None:
                v = [list(c) for c in v]
            elif k == "_log":
                v = K.new_log(len(v.ints))
            other.__dict__[k] = v
        other._dirty = True
        return other

    def write_obj(self, path):
        """Parameter-domain triangulation at z=0 plus a sidecar edge-length JSON."""
        path = Path(path)
        fv = self.face_vertices()
        with open(path, "w") as fh:
            for u, v in self.uv[: self.n_v]:
                fh.write(f"v {u:.17g} {v:.17g} 0\n")
            for a, b, c in fv + 1:
                fh.write(f"f {a} {b} {c}\n")
        side = path.with_suffix(".lengths.json")
        edges = [[int(self.he_vert[2 * e]), int(self.he_vert[2 * e + 1]), float(self.elen[e])]
                 for e in range(self.n_e)]
        side.write_text(json.dumps({"edges": edges}))
        return path, side


def _barycentric(p, a, b, c):
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = np.sum(v0 * v0, -1)
    d01 = np.sum(v0 * v1, -1)
    d11 = np.sum(v1 * v1, -1)
    d20 = np.sum(v2 * v0, -1)
    d21 = np.sum(v2 * v1, -1)
    den = d00 * d11 - d01 * d01
    wb = (d11 * d20 - d01 * d21) / den
    wc = (d00 * d21 - d01 * d20) / den
    return np.stack([1.0 - wb - wc, wb, wc], axis=-1)


def unfold_lengths(l):
    """Lay out triangles with side lengths ``(l01, l12, l20)`` in the plane.

    Returns ``(..., 3, 2)`` positions with corner 0 at the origin, corner 1 on
    the +x axis and corner 2 in the upper half plane.
    """
    l = np.asarray(l, dtype=float)
    a, b, c = l[..., 0], l[..., 1], l[..., 2]
    x = (a * a + c * c - b * b) / (2.0 * a)
    y = np.sqrt(np.maximum(c * c - x * x, 0.0))
    out = np.zeros(l.shape[:-1] + (3, 2))
    out[..., 1, 0] = a
    out[..., 2, 0] = x
    out[..., 2, 1] = y
    return out


def build_uniform(spec, nu, nv):
    """Regular ``nu x nv`` sample grid, two triangles per cell.

    Each cell ``(i, j)`` is split along its ``(i, j)-(i+1, j+1)`` diagonal.  On
    periodic axes the last sample row is glued to the first.
    """
    nu, nv = int(nu), int(nv)
    if nu < 2 or nv < 2:
        raise ConfigurationError("grid needs at least 2 samples per axis")
    pu, pv = spec.periodic
    if (pu and nu < 4) or (pv and nv < 4):
        raise ConfigurationError("periodic axes need at least 4 samples")
    u0, u1, v0, v1 = spec.usable_domain()
    caps = (False, False)
    if spec.kind == "sphere" and not pv:
        # Rows at the poles image to single points; they are collapsed into
        # one vertex each, placed exactly on the pole.  Only the open meridian
        # segments ending there are ever integrated, and the metric is
        # regular on those.
        caps = (spec.domain[2] <= -math.pi / 2, spec.domain[3] >= math.pi / 2)
        v0 = -math.pi / 2 if caps[0] else v0
        v1 = math.pi / 2 if caps[1] else v1
    us = np.linspace(u0, u1, nu)
    vs = np.linspace(v0, v1, nv)
    mu = nu - 1 if pu else nu
    mv = nv - 1 if pv else nv
    uu, vv = np.meshgrid(us[:mu], vs[:mv])
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)

    ii, jj = np.meshgrid(np.arange(nu - 1), np.arange(nv - 1))
    ii, jj = ii.ravel(), jj.ravel()

    def vid(i, j):
        return (i % mu) + mu * (j % mv)

    a, b = vid(ii, jj), vid(ii + 1, jj)
    c, d = vid(ii + 1, jj + 1), vid(ii, jj + 1)
    faces = np.empty((2 * len(ii), 3), np.int64)
    faces[0::2] = np.stack([a, b, c], 1)
    faces[1::2] = np.stack([a, c, d], 1)
    cell = np.repeat(np.arange(len(ii)), 2)

    pole = np.zeros(len(uv), bool)
    remap = np.arange(len(uv))
    if any(caps):
        for flag, row in ((caps[0], 0), (caps[1], mv - 1)):
            if flag:
                ids = np.arange(mu) + mu * row
                remap[ids] = ids[0]
                pole[ids[0]] = True
        keep_v, remap = np.unique(remap, return_inverse=True)
        uv, pole = uv[keep_v], pole[keep_v]
        faces = remap[faces]
        ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 2] != faces[:, 0])
        faces, cell = faces[ok], cell[ok]
    grid = {
        "domain": (u0, u1, v0, v1),
        "cells": (nu - 1, nv - 1),
        "du": (u1 - u0) / (nu - 1),
        "dv": (v1 - v0) / (nv - 1),
        "shape": (nu, nv),
        "face_cell": cell,
    }
    mesh = IntrinsicMesh(spec, uv, faces, grid, pole=pole)
    n = mesh.repair_lengths()
    if n:
        log.info("shortened %d edge lengths to two-edge detours", n)
    mesh.validate(0.0)
    return mesh

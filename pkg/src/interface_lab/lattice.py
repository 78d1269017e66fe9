"""Slab geometry: vertices, edges, dual faces and their adjacency.

Conventions
-----------
A vertex ``(i, j, k)`` sits at the real point ``(i+1/2, j+1/2, k+1/2)``.  The box
is ``0 <= i, j < n`` and ``kmin <= k <= kmax`` with ``kmin = -m + offset`` and
``kmax = m - 1 + offset``.  The plane splitting TOP from BOTTOM stays at height 0
whatever the offset, so ``offset`` shifts the box relative to the split.

Heights are stored doubled so that they stay integral: a vertex at layer ``k``
has doubled height ``2k+1``.

A face is the unit square dual to an edge.  It is identified by ``(axis, anchor)``
where ``axis`` (1, 2 or 3) is the direction of the dual edge and ``anchor`` is the
lower endpoint of that edge.  The square lies in the plane
``x_axis = anchor_axis + 1`` and spans ``[anchor_b, anchor_b + 1]`` in the other
two coordinates.  Horizontal faces (axis 3) have integer height ``k + 1``.

Edges come in three kinds: interior edges, boundary edges from an upper-half box
vertex to the exterior (attached to the TOP ghost), and boundary edges from a
lower-half box vertex to the exterior (attached to the BOTTOM ghost).  The
exterior vertical edges crossing height 0 are forced closed; their faces form
the ring that seeds the interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

INTERIOR, TOP_BOUNDARY, BOTTOM_BOUNDARY, RING = 0, 1, 2, 3

UNIT = np.eye(3, dtype=np.int64)


class FaceId(NamedTuple):
    axis: int
    anchor: tuple[int, int, int]


class ProjectionCell(NamedTuple):
    """A face ``("f", (i, j))`` or an edge ``("e2", (x, y))`` / ``("e1", (x, y))``
    of the height-0 plane.  ``e2`` edges run from ``(x, y)`` to ``(x, y+1)``."""

    kind: str
    coords: tuple[int, int]


def face_doubled_height(axis: int, anchor) -> int:
    return 2 * (anchor[2] + 1) if axis == 3 else 2 * anchor[2] + 1


def face_corners(axis: int, anchor) -> list[tuple[int, int, int]]:
    a = axis - 1
    b, c = [t for t in range(3) if t != a]
    out = []
    for db in (0, 1):
        for dc in (0, 1):
            p = list(anchor)
            p[a] += 1
            p[b] += db
            p[c] += dc
            out.append(tuple(p))
    return out


def face_segments(axis: int, anchor) -> list[tuple[int, tuple[int, int, int]]]:
    """The four unit segments bounding the face as ``(direction, start point)``."""
    a = axis - 1
    b, c = [t for t in range(3) if t != a]
    base = list(anchor)
    base[a] += 1
    segs = []
    for d, o in ((b, c), (c, b)):
        for shift in (0, 1):
            p = list(base)
            p[o] += shift
            segs.append((d + 1, tuple(p)))
    return segs


def project_face(axis: int, anchor) -> ProjectionCell:
    i, j, _ = anchor
    if axis == 3:
        return ProjectionCell("f", (i, j))
    if axis == 1:
        return ProjectionCell("e2", (i + 1, j))
    return ProjectionCell("e1", (i, j + 1))


def projection_points(cell: ProjectionCell) -> list[tuple[int, int]]:
    x, y = cell.coords
    if cell.kind == "f":
        return [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
    if cell.kind == "e2":
        return [(x, y), (x, y + 1)]
    return [(x, y), (x + 1, y)]


def candidate_neighbors(face: FaceId, mode: int) -> set[FaceId]:
    """Faces of Z^3 sharing a segment (mode 1) or a point (mode 0) with ``face``.

    Computed without any clipping to a finite box.
    """
    if mode == 1:
        keys = set(face_segments(face.axis, face.anchor))
        getter = face_segments
    else:
        keys = set(face_corners(face.axis, face.anchor))
        getter = face_corners
    out: set[FaceId] = set()
    x0 = np.array(face.anchor)
    for axis in (1, 2, 3):
        for d in np.ndindex(3, 3, 3):
            anchor = tuple(int(t) for t in x0 + np.array(d) - 1)
            if (axis, anchor) == (face.axis, face.anchor):
                continue
            if keys.intersection(getter(axis, anchor)):
                out.add(FaceId(axis, anchor))
    return out


def _csr_from_pairs(a: np.ndarray, b: np.ndarray, size: int) -> sp.csr_matrix:
    data = np.ones(len(a), dtype=np.int8)
    mat = sp.coo_matrix((data, (a, b)), shape=(size, size)).tocsr()
    mat.sum_duplicates()
    mat.data[:] = 1
    mat.sort_indices()
    return mat


def _pairs_sharing(keys: np.ndarray, owners: np.ndarray, max_group: int):
    order = np.argsort(keys, kind="stable")
    ks, fs = keys[order], owners[order]
    aa, bb = [], []
    for off in range(1, max_group):
        same = ks[off:] == ks[:-off]
        aa.append(fs[:-off][same])
        bb.append(fs[off:][same])
    a = np.concatenate(aa)
    b = np.concatenate(bb)
    keep = a != b
    a, b = a[keep], b[keep]
    return np.concatenate([a, b]), np.concatenate([b, a])


@dataclass(frozen=True)
class LatticeGeometry:
    """Finite slab ``[0,n)^2 x [kmin, kmax]`` with ghosts and the universe of faces."""

    n: int
    m: int
    offset: int = 0

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ValueError(f"n must be even and >= 2, got {self.n}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        tables = _build_tables(self.n, self.m, self.offset)
        object.__setattr__(self, "_t", tables)

    # basic sizes -----------------------------------------------------------
    @property
    def kmin(self) -> int:
        return -self.m + self.offset

    @property
    def kmax(self) -> int:
        return self.m - 1 + self.offset

    @property
    def depth(self) -> int:
        return 2 * self.m

    @property
    def num_vertices(self) -> int:
        return self.n * self.n * self.depth

    @property
    def top_ghost(self) -> int:
        return self.num_vertices

    @property
    def bottom_ghost(self) -> int:
        return self.num_vertices + 1

    def __getattr__(self, name):
        t = object.__getattribute__(self, "_t")
        if name in t:
            return t[name]
        raise AttributeError(name)

    def __hash__(self) -> int:
        return hash((self.n, self.m, self.offset))

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticeGeometry) and (self.n, self.m, self.offset) == (
            other.n,
            other.m,
            other.offset,
        )

    def __repr__(self) -> str:
        return f"LatticeGeometry(n={self.n}, m={self.m}, offset={self.offset})"

    # vertices --------------------------------------------------------------
    def vertex_index(self, i: int, j: int, k: int) -> int:
        if not self.in_box(i, j, k):
            raise IndexError((i, j, k))
        return ((k - self.kmin) * self.n + j) * self.n + i

    def in_box(self, i: int, j: int, k: int) -> bool:
        return 0 <= i < self.n and 0 <= j < self.n and self.kmin <= k <= self.kmax

    def vertex_coords(self, v: int) -> tuple[int, int, int]:
        c = self.coords[v]
        return int(c[0]), int(c[1]), int(c[2])

    def vertices(self) -> Iterator[tuple[int, int, int]]:
        for v in range(self.num_vertices):
            yield self.vertex_coords(v)

    def is_upper(self, v: int) -> bool:
        return bool(self.coords[v, 2] >= 0)

    def layer(self, k: int) -> np.ndarray:
        """Vertex indices of layer ``k`` in row-major ``(j, i)`` order."""
        start = (k - self.kmin) * self.n * self.n
        return np.arange(start, start + self.n * self.n)

    def geometry_hash(self) -> str:
        import hashlib

        return hashlib.sha256(f"slab:{self.n}:{self.m}:{self.offset}".encode()).hexdigest()[:16]

    # edges -----------------------------------------------------------------
    @property
    def num_edges(self) -> int:
        return len(self.edge_u)

    def interior_degree(self, v: int) -> int:
        return int(np.count_nonzero(self.edge_u[: self.num_interior_edges] == v)) + int(
            np.count_nonzero(self.edge_v[: self.num_interior_edges] == v)
        )

    def edge_between(self, a, b) -> int:
        """Index of the edge between two box vertices (coordinates)."""
        key = (tuple(int(t) for t in a), tuple(int(t) for t in b))
        return self.edge_lookup[key]

    # faces -----------------------------------------------------------------
    @property
    def num_faces(self) -> int:
        return len(self.face_axis)

    def face_id(self, f: int) -> FaceId:
        a = self.face_anchor[f]
        return FaceId(int(self.face_axis[f]), (int(a[0]), int(a[1]), int(a[2])))

    def face_index(self, face) -> int:
        axis, anchor = face
        return self.face_lookup[(int(axis), tuple(int(t) for t in anchor))]

    def has_face(self, face) -> bool:
        axis, anchor = face
        return (int(axis), tuple(int(t) for t in anchor)) in self.face_lookup

    def face_of(self, e: int) -> int:
        return int(self.edge_face[e])

    def edge_of(self, f: int) -> int:
        """Dual edge of a face, or -1 for ring faces."""
        return int(self.face_edge[f])

    def dual_vertices(self, f: int) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
        axis, anchor = self.face_id(f)
        hi = list(anchor)
        hi[axis - 1] += 1
        return anchor, tuple(hi)

    def face_neighbors(self, f: int, mode: int) -> np.ndarray:
        mat = self.nbr1 if mode == 1 else self.nbr0
        return mat.indices[mat.indptr[f] : mat.indptr[f + 1]]

    def project(self, f: int) -> ProjectionCell:
        axis, anchor = self.face_id(f)
        return project_face(axis, anchor)

    def face_height(self, f: int) -> float:
        return self.face_h2[f] / 2.0

    def face_below(self, i: int, j: int, k: int) -> int:
        """Face dual to the edge between ``(i,j,k)`` and ``(i,j,k-1)``."""
        return self.face_index((3, (i, j, k - 1)))

    def face_above(self, i: int, j: int, k: int) -> int:
        return self.face_index((3, (i, j, k)))

    def side_faces(self, i: int, j: int, k: int) -> list[int]:
        """The four vertical faces around vertex ``(i,j,k)``."""
        return [
            self.face_index((1, (i - 1, j, k))),
            self.face_index((1, (i, j, k))),
            self.face_index((2, (i, j - 1, k))),
            self.face_index((2, (i, j, k))),
        ]

    def bounding_faces(self, i: int, j: int, k: int) -> list[int]:
        return self.side_faces(i, j, k) + [self.face_below(i, j, k), self.face_above(i, j, k)]

    def point_is_upper(self, p) -> bool:
        """Exterior side of a boundary edge belongs to TOP iff its height is positive."""
        return p[2] >= 0


@lru_cache(maxsize=32)
def _build_tables(n: int, m: int, offset: int) -> dict:
    kmin, kmax = -m + offset, m - 1 + offset
    depth = kmax - kmin + 1
    nv = n * n * depth
    kk, jj, ii = np.meshgrid(np.arange(kmin, kmax + 1), np.arange(n), np.arange(n), indexing="ij")
    coords = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1).astype(np.int64)

    def vidx(c):
        return ((c[:, 2] - kmin) * n + c[:, 1]) * n + c[:, 0]

    lo = np.array([0, 0, kmin])
    hi = np.array([n - 1, n - 1, kmax])

    eu, ev, eaxis, ekind, eanchor, eext = [], [], [], [], [], []
    # interior edges first, axis by axis
    for a in range(3):
        ok = coords[:, a] < hi[a]
        src = coords[ok]
        dst = src + UNIT[a]
        eu.append(vidx(src))
        ev.append(vidx(dst))
        eaxis.append(np.full(len(src), a + 1))
        ekind.append(np.full(len(src), INTERIOR))
        eanchor.append(src)
        eext.append(dst)
    n_int = sum(len(x) for x in eu)
    # boundary edges to the exterior
    bu, banchor, baxis, bext = [], [], [], []
    for a in range(3):
        for s in (-1, 1):
            edge_side = coords[:, a] == (lo[a] if s < 0 else hi[a])
            src = coords[edge_side]
            dst = src + s * UNIT[a]
            bu.append(vidx(src))
            banchor.append(np.minimum(src, dst))
            baxis.append(np.full(len(src), a + 1))
            bext.append(dst)
    bu = np.concatenate(bu)
    banchor = np.concatenate(banchor)
    baxis = np.concatenate(baxis)
    bext = np.concatenate(bext)
    upper = coords[bu, 2] >= 0
    # canonical order: by source vertex then axis
    order = np.lexsort((baxis, bu))
    bu, banchor, baxis, bext, upper = bu[order], banchor[order], baxis[order], bext[order], upper[order]
    bv = np.where(upper, nv, nv + 1)
    bkind = np.where(upper, TOP_BOUNDARY, BOTTOM_BOUNDARY)

    edge_u = np.concatenate(eu + [bu]).astype(np.int64)
    edge_v = np.concatenate(ev + [bv]).astype(np.int64)
    edge_axis = np.concatenate(eaxis + [baxis]).astype(np.int64)
    edge_kind = np.concatenate(ekind + [bkind]).astype(np.int64)
    edge_anchor = np.concatenate(eanchor + [banchor]).astype(np.int64)
    ne = len(edge_u)

    # ring: exterior columns, vertical edge (i,j,-1)-(i,j,0)
    ring = []
    for i in range(-1, n + 1):
        for j in range(-1, n + 1):
            if 0 <= i < n and 0 <= j < n:
                continue
            ring.append((i, j, -1))
    ring = np.array(ring, dtype=np.int64)
    face_axis = np.concatenate([edge_axis, np.full(len(ring), 3)])
    face_anchor = np.concatenate([edge_anchor, ring])
    face_edge = np.concatenate([np.arange(ne), np.full(len(ring), -1)])
    face_kind = np.concatenate([edge_kind, np.full(len(ring), RING)])
    nf = len(face_axis)
    face_h2 = np.where(face_axis == 3, 2 * (face_anchor[:, 2] + 1), 2 * face_anchor[:, 2] + 1)

    face_lookup = {
        (int(face_axis[f]), (int(face_anchor[f, 0]), int(face_anchor[f, 1]), int(face_anchor[f, 2]))): f
        for f in range(nf)
    }
    edge_lookup = {}
    for e in range(n_int):
        a = tuple(int(t) for t in coords[edge_u[e]])
        b = tuple(int(t) for t in coords[edge_v[e]])
        edge_lookup[(a, b)] = e
        edge_lookup[(b, a)] = e
    edge_face = np.arange(ne)

    # corner points and segments, encoded as integers
    span = n + 4
    zspan = depth + 4

    def pid(p):
        return ((p[..., 2] - kmin + 2) * span + (p[..., 1] + 2)) * span + (p[..., 0] + 2)

    corners = np.zeros((nf, 4, 3), dtype=np.int64)
    segs = np.zeros((nf, 4), dtype=np.int64)
    for a in range(3):
        sel = face_axis == a + 1
        b, c = [t for t in range(3) if t != a]
        base = face_anchor[sel].copy()
        base[:, a] += 1
        pts = []
        for db in (0, 1):
            for dc in (0, 1):
                pts.append(base + db * UNIT[b] + dc * UNIT[c])
        corners[sel] = np.stack(pts, axis=1)
        sg = []
        for d, o in ((b, c), (c, b)):
            for shift in (0, 1):
                p = base + shift * UNIT[o]
                sg.append(pid(p) * 3 + d)
        segs[sel] = np.stack(sg, axis=1)
    pids = pid(corners)
    owners = np.repeat(np.arange(nf), 4)
    a1, b1 = _pairs_sharing(segs.ravel(), owners, 4)
    nbr1 = _csr_from_pairs(a1, b1, nf)
    a0, b0 = _pairs_sharing(pids.ravel(), owners, 12)
    nbr0 = _csr_from_pairs(a0, b0, nf)
    assert zspan > 0

    return dict(
        coords=coords,
        num_interior_edges=n_int,
        edge_u=edge_u,
        edge_v=edge_v,
        edge_axis=edge_axis,
        edge_kind=edge_kind,
        edge_anchor=edge_anchor,
        edge_face=edge_face,
        edge_lookup=edge_lookup,
        face_axis=face_axis,
        face_anchor=face_anchor,
        face_edge=face_edge,
        face_kind=face_kind,
        face_h2=face_h2,
        face_lookup=face_lookup,
        face_segments=segs,
        face_points=pids,
        nbr1=nbr1,
        nbr0=nbr0,
        ring_faces=np.arange(ne, nf),
    )


def ring_separates(geom: LatticeGeometry) -> bool:
    """Closing every ring face and every height-0 face of the box disconnects TOP
    from BOTTOM when all other edges are open."""
    nv = geom.num_vertices
    h0 = (geom.face_axis == 3) & (geom.face_h2 == 0) & (geom.face_edge >= 0)
    closed_edges = set(int(geom.face_edge[f]) for f in np.flatnonzero(h0))
    keep = np.array([e not in closed_edges for e in range(geom.num_edges)])
    g = sp.coo_matrix(
        (np.ones(keep.sum()), (geom.edge_u[keep], geom.edge_v[keep])), shape=(nv + 2, nv + 2)
    )
    from scipy.sparse.csgraph import connected_components

    _, lab = connected_components(g, directed=False)
    return bool(lab[geom.top_ghost] != lab[geom.bottom_ghost])

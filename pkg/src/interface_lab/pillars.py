"""Pillars of the top interface: extraction, increments, events and local maps.

Faces are handled here as geometry-free tuples ``(axis, (i, j, k))`` (same
convention as :mod:`lattice`), vertices as ``(i, j, k)`` with ``k`` the layer, so
a vertex at layer ``k`` has height ``k + 1/2``.  The base vertex ``x`` of a pillar
is the layer-0 vertex of its column.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .interfaces import InterfaceBundle, InterfaceFaces, _components_within
from .lattice import LatticeGeometry
from .model import EdgeConfig
from .walls import Classified, WallFamily, classify, groups, reconstruct, standardize

DIRS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


class PhiDiagnostic(RuntimeError):
    """A local map could not certify its post-condition; ``ledger`` says why."""

    def __init__(self, message: str, ledger: dict):
        super().__init__(message)
        self.ledger = ledger


class NotInSpace(ValueError):
    """Input interface is outside the domain a map is defined on."""


# --------------------------------------------------------------- face helpers
def face_h2(f) -> int:
    axis, (_, _, k) = f
    return 2 * (k + 1) if axis == 3 else 2 * k + 1


def face_between(u, v):
    d = [b - a for a, b in zip(u, v)]
    axis = next(t for t in range(3) if d[t]) + 1
    return (axis, tuple(min(a, b) for a, b in zip(u, v)))


def side_faces(v):
    i, j, k = v
    return [(1, (i - 1, j, k)), (1, (i, j, k)), (2, (i, j - 1, k)), (2, (i, j, k))]


def cap_face(v):
    return (3, tuple(v))


def floor_face(v):
    i, j, k = v
    return (3, (i, j, k - 1))


def bounding_faces(V) -> set:
    """Faces separating ``V`` from its complement."""
    Vs = set(V)
    out = set()
    for v in Vs:
        for d in DIRS:
            u = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            if u not in Vs:
                out.add(face_between(v, u))
    return out


def shift_face(f, dx: int, dy: int, dz: int):
    axis, (i, j, k) = f
    return (axis, (i + dx, j + dy, k + dz))


def shift_vertex(v, dx: int, dy: int, dz: int):
    return (v[0] + dx, v[1] + dy, v[2] + dz)


def face_center2(f) -> tuple[int, int, int]:
    """Doubled coordinates of the face center."""
    axis, (i, j, k) = f
    c = [2 * i + 1, 2 * j + 1, 2 * k + 1]
    c[axis - 1] += 1
    return tuple(c)


def to_indices(geom: LatticeGeometry, faces) -> np.ndarray:
    return np.array(sorted(geom.face_index(f) for f in faces), dtype=np.int64)


def to_tuples(geom: LatticeGeometry, idx) -> set:
    return {tuple(geom.face_id(int(f))) for f in idx}


def cell_distance(a, b) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


# -------------------------------------------------------------- decomposition
@dataclass(frozen=True)
class Increment:
    lo: tuple  # lower cut-point
    hi: tuple | None  # upper cut-point (None for the remainder)
    top_layer: int  # layer of the highest vertex this increment counts up to
    faces: frozenset
    vertices: frozenset
    excess: int
    remainder: bool = False

    @property
    def rise(self) -> int:
        return self.top_layer - self.lo[2]

    @property
    def trivial(self) -> bool:
        if self.remainder:
            return self.excess == 0 and len(self.vertices) == 1
        return self.rise == 1 and len(self.faces) == 8 and len(self.vertices) == 2


@dataclass(frozen=True)
class Decomposition:
    cut_points: tuple
    base: frozenset
    spine: frozenset
    increments: tuple  # regular increments followed by the remainder (if any)

    @property
    def T(self) -> int:
        return max(len(self.cut_points) - 1, 0)

    def excesses(self) -> list[int]:
        return [inc.excess for inc in self.increments]


def cut_layers(vertices, faces) -> list[tuple]:
    by_layer: dict[int, list] = {}
    for v in vertices:
        by_layer.setdefault(v[2], []).append(v)
    vert_faces: dict[int, set] = {}
    for f in faces:
        h = face_h2(f)
        if h % 2:
            vert_faces.setdefault((h - 1) // 2, set()).add(f)
    cuts = []
    for k in sorted(by_layer):
        vs = by_layer[k]
        if len(vs) == 1 and vert_faces.get(k, set()) == set(side_faces(vs[0])):
            cuts.append(vs[0])
    return cuts


def decompose_faces(vertices, faces, height: int) -> Decomposition:
    """Cut-points, base, spine and increments of a pillar given as tuples.

    The remainder's excess is ``|F| - 4(rise + 1) - 1``: one face is the cap,
    which a capped stack of trivial increments also carries.
    """
    cuts = cut_layers(vertices, faces)
    if not cuts:
        return Decomposition((), frozenset(faces), frozenset(), ())
    h2s = {f: face_h2(f) for f in faces}
    lo0 = 2 * cuts[0][2] + 1
    base = frozenset(f for f in faces if h2s[f] < lo0)
    spine = frozenset(f for f in faces if h2s[f] >= lo0)
    incs = []
    for a, b in zip(cuts, cuts[1:]):
        lo, hi = 2 * a[2] + 1, 2 * b[2] + 1
        fs = frozenset(f for f in faces if lo <= h2s[f] <= hi)
        vs = frozenset(v for v in vertices if a[2] <= v[2] <= b[2])
        incs.append(Increment(a, b, b[2], fs, vs, len(fs) - 4 * (b[2] - a[2] + 1)))
    last = cuts[-1]
    lo = 2 * last[2] + 1
    fs = frozenset(f for f in faces if h2s[f] >= lo)
    vs = frozenset(v for v in vertices if v[2] >= last[2])
    top = height - 1
    incs.append(Increment(last, None, top, fs, vs, len(fs) - 4 * (top - last[2] + 1) - 1, True))
    return Decomposition(tuple(cuts), base, spine, tuple(incs))


# --------------------------------------------------------------------- pillar
@dataclass(frozen=True)
class Pillar:
    x: tuple  # (i, j) column of the base vertex
    height: int  # -1 encodes a negative height
    vertices: frozenset
    core: frozenset  # faces bounding the vertex set at height >= 1/2
    hairs: frozenset
    shell: bool = False
    tainted: bool = False

    @property
    def faces(self) -> frozenset:
        return self.core | self.hairs

    @property
    def base_vertex(self) -> tuple:
        return (self.x[0], self.x[1], 0)

    @cached_property
    def decomposition(self) -> Decomposition:
        return decompose_faces(self.vertices, self.faces, self.height)

    @property
    def cut_points(self) -> tuple:
        return self.decomposition.cut_points

    @property
    def increments(self) -> tuple:
        return self.decomposition.increments

    def layer_faces(self, h2: int) -> set:
        return {f for f in self.faces if face_h2(f) == h2}

    def same_as(self, other: "Pillar") -> bool:
        return (self.x == other.x and self.height == other.height and self.vertices == other.vertices
                and self.faces == other.faces)

    def to_json_obj(self) -> dict:
        dec = self.decomposition

        def fl(fs):
            return sorted([a, list(p)] for a, p in fs)

        return {
            "x": list(self.x),
            "height": self.height,
            "shell": self.shell,
            "cutPoints": [list(v) for v in dec.cut_points],
            "increments": [{"faces": fl(inc.faces), "m": inc.excess, "remainder": inc.remainder}
                           for inc in dec.increments],
            "hairs": fl(self.hairs),
        }


def make_pillar(x, vertices, hairs=(), shell=False) -> Pillar:
    """A pillar assembled from a vertex set (plus optional hair faces)."""
    V = frozenset(tuple(v) for v in vertices)
    core = frozenset(f for f in bounding_faces(V) if face_h2(f) >= 1)
    height = max(face_h2(f) for f in core) // 2 if core else 0
    return Pillar(tuple(x[:2]), height, V, core, frozenset(hairs), shell)


class _Context:
    """Per-bundle tables shared by every pillar of the configuration."""

    def __init__(self, bundle: InterfaceBundle):
        g = bundle.geometry
        self.geometry = g
        self.bundle = bundle
        comp = bundle.components
        self.notop = ~comp.Vh_top
        self.up_mask = self.notop & (g.coords[:, 2] >= 0)
        self.up_labels = _components_within(g, self.up_mask)
        full = bundle.full_mask
        top = bundle.top_mask
        self.full_mask = full
        self.top_mask = top
        hair = np.flatnonzero(full & ~top)
        self.hair_faces = hair
        if len(hair):
            _, lab = connected_components(g.nbr1[hair][:, hair], directed=False)
        else:
            lab = np.zeros(0, dtype=np.int64)
        self.hair_labels = lab
        span = g.n + 4
        seg = g.face_segments
        pid = seg // 3
        z = pid // (span * span) - 2 + g.kmin
        self.seg_h2 = np.where(seg % 3 == 2, 2 * z + 1, 2 * z)

    def label_of(self, i: int, j: int) -> int:
        return int(self.up_labels[self.geometry.vertex_index(i, j, 0)])


def _context(bundle: InterfaceBundle) -> _Context:
    ctx = bundle.__dict__.get("_pillar_ctx")
    if ctx is None:
        ctx = _Context(bundle)
        bundle.__dict__["_pillar_ctx"] = ctx
    return ctx


def pillar_at(bundle: InterfaceBundle, x, shell: bool = False) -> Pillar:
    """The pillar (or its shell) of the top interface above column ``x``."""
    ctx = _context(bundle)
    g = ctx.geometry
    i, j = int(x[0]), int(x[1])
    lab = ctx.label_of(i, j)
    if lab < 0:
        below = g.face_below(i, j, 0)
        h = 0 if ctx.top_mask[below] else -1
        return Pillar((i, j), h, frozenset(), frozenset(), frozenset(), shell)
    idx = np.flatnonzero(ctx.up_labels == lab)
    coords = g.coords[idx]
    V = frozenset((int(a), int(b), int(c)) for a, b, c in coords)
    tainted = bool(np.any(coords[:, 2] == g.kmax))
    core = frozenset(f for f in bounding_faces(V) if face_h2(f) >= 1)
    height = max(face_h2(f) for f in core) // 2
    hairs = frozenset()
    if len(ctx.hair_faces):
        core_idx = to_indices(g, core)
        segs = g.face_segments[core_idx]
        anchor_segs = np.unique(segs[ctx.seg_h2[core_idx] >= 1])
        touch = np.isin(g.face_segments[ctx.hair_faces], anchor_segs).any(axis=1)
        labs = np.unique(ctx.hair_labels[touch])
        chosen = ctx.hair_faces[np.isin(ctx.hair_labels, labs)]
        if shell:
            e = g.face_edge[chosen]
            ok = e >= 0
            inner = np.zeros(len(chosen), dtype=bool)
            nv = g.num_vertices
            u = g.edge_u[e[ok]]
            v = g.edge_v[e[ok]]
            both = (u < nv) & (v < nv)
            res = np.zeros(ok.sum(), dtype=bool)
            res[both] = ctx.notop[u[both]] & ctx.notop[v[both]]
            inner[ok] = res
            chosen = chosen[~inner]
        hairs = frozenset(to_tuples(g, chosen))
    return Pillar((i, j), height, V, core, hairs, shell, tainted)


def all_pillar_heights(bundle: InterfaceBundle) -> np.ndarray:
    """``hgt(P_x)`` for every column, as an ``(n, n)`` array indexed ``[i, j]``."""
    ctx = _context(bundle)
    g = ctx.geometry
    n = g.n
    lab = ctx.up_labels
    out = np.empty((n, n), dtype=np.int64)
    nl = int(lab.max()) + 1 if lab.max() >= 0 else 0
    top_layer = np.full(nl, -1, dtype=np.int64)
    sel = lab >= 0
    np.maximum.at(top_layer, lab[sel], g.coords[sel, 2])
    base = g.layer(0)
    for v in base:
        i, j, _ = g.coords[v]
        if lab[v] >= 0:
            out[i, j] = top_layer[lab[v]] + 1
        else:
            out[i, j] = 0 if ctx.top_mask[g.face_below(int(i), int(j), 0)] else -1
    return out


# --------------------------------------------------------------------- events
@dataclass
class EventReport:
    event: str
    value: bool
    witness: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.value)


def event_E(bundle: InterfaceBundle, x, h: int) -> EventReport:
    p = pillar_at(bundle, x)
    return EventReport("E", p.height >= h, {"height": p.height})


def capped(p: Pillar, h: int) -> bool:
    """Height exactly ``h`` and no faces at height >= h other than vertex caps."""
    if p.height != h:
        return False
    caps = {cap_face(v) for v in p.vertices}
    return all(f in caps for f in p.faces if face_h2(f) >= 2 * h)


def event_Etilde(bundle: InterfaceBundle, x, h: int) -> EventReport:
    p = pillar_at(bundle, x)
    return EventReport("Etilde", capped(p, h), {"height": p.height})


# ------------------------------------------------------------------ event A
def _exempt_edge(g: LatticeGeometry, y) -> int:
    i, j, k = y
    return int(g.face_edge[g.face_index((3, (i, j, k - 1)))])


def _clusters_without(omega: EdgeConfig, drop: int):
    g = omega.geometry
    nn = g.num_vertices + 2
    b = omega.bits.copy()
    b[drop] = False
    mat = sp.coo_matrix((np.ones(int(b.sum()), dtype=np.int8), (g.edge_u[b], g.edge_v[b])), shape=(nn, nn))
    _, lab = connected_components(mat, directed=False)
    return lab


def _fill_holes(g: LatticeGeometry, member: np.ndarray) -> np.ndarray:
    from .interfaces import _boundary_masks

    up, lo = _boundary_masks(g)
    return member | _finite_complement(g, member, up | lo)


def _finite_complement(g, member, seeds):
    comp = _components_within(g, ~member)
    inf = np.unique(comp[seeds & ~member])
    return (~member) & ~np.isin(comp, inf)


def event_A(omega: EdgeConfig, x, h: int, strict: bool = True) -> EventReport:
    """Decide whether a closed-face shell of some admissible vertex set exists.

    ``x`` may carry a base layer as third coordinate (default 0).  Any valid set
    is a union of open clusters of the graph without the exempt bottom edge, so
    the largest candidate is the lattice component of ``x`` among all admissible
    clusters; the event holds iff that candidate exists (and, when ``strict``,
    reaches the top admissible layer).
    """
    g = omega.geometry
    y = (int(x[0]), int(x[1]), int(x[2]) if len(x) > 2 else 0)
    k0 = y[2]
    ktop = k0 + h - 1
    nv = g.num_vertices
    lab = _clusters_without(omega, _exempt_edge(g, y))
    ghosts = {int(lab[g.top_ghost]), int(lab[g.bottom_ghost])}
    vl = lab[:nv]
    k = g.coords[:, 2]
    nl = int(lab.max()) + 1
    kmin_l = np.full(nl, np.iinfo(np.int64).max)
    kmax_l = np.full(nl, np.iinfo(np.int64).min)
    np.minimum.at(kmin_l, vl, k)
    np.maximum.at(kmax_l, vl, k)
    base_count = np.bincount(vl[k == k0], minlength=nl)
    lx = int(vl[g.vertex_index(*y)])
    wit = {"base_cluster_ok": False}
    if lx in ghosts or kmin_l[lx] < k0 or kmax_l[lx] > ktop or base_count[lx] != 1:
        return EventReport("A", False, wit)
    admissible = (kmin_l >= k0 + 1) & (kmax_l <= ktop)
    for t in ghosts:
        admissible[t] = False
    admissible[lx] = True
    U = admissible[vl]
    comp = _components_within(g, U)
    K = comp == comp[g.vertex_index(*y)]
    C = _fill_holes(g, K)
    reach = int(g.coords[C, 2].max())
    value = (reach == ktop) if strict else True
    wit = {"base_cluster_ok": True, "reach_layer": reach, "witness": C}
    return EventReport("A", bool(value), wit)


def check_A_witness(omega: EdgeConfig, x, h: int, C: np.ndarray, strict: bool = True) -> bool:
    """Directly verify the defining conditions for a proposed vertex set ``C``."""
    g = omega.geometry
    y = (int(x[0]), int(x[1]), int(x[2]) if len(x) > 2 else 0)
    k0 = y[2]
    vy = g.vertex_index(*y)
    if not C[vy]:
        return False
    kk = g.coords[C, 2]
    if kk.min() < k0 or kk.max() > k0 + h - 1 or int(np.count_nonzero(kk == k0)) != 1:
        return False
    if strict and kk.max() != k0 + h - 1:
        return False
    comp = _components_within(g, C)
    if len(np.unique(comp[C])) != 1:
        return False
    if np.any(_finite_complement(g, C, _outer_seeds(g))):
        return False
    ni = g.num_interior_edges
    u, v = g.edge_u, g.edge_v
    cut = np.zeros(g.num_edges, dtype=bool)
    cut[:ni] = C[u[:ni]] != C[v[:ni]]
    cut[ni:] = C[u[ni:]]
    cut[_exempt_edge(g, y)] = False
    return not bool(np.any(omega.bits[cut]))


def _outer_seeds(g):
    from .interfaces import _boundary_masks

    up, lo = _boundary_masks(g)
    return up | lo


# -------------------------------------------------------------- event Gamma
def _closed_upper_component(omega: EdgeConfig, seeds) -> np.ndarray:
    g = omega.geometry
    closed = np.zeros(g.num_faces, dtype=bool)
    closed[g.edge_face[~omega.bits]] = True
    closed &= g.face_h2 >= 1
    idx = np.flatnonzero(closed)
    _, lab = connected_components(g.nbr1[idx][:, idx], directed=False)
    pos = np.searchsorted(idx, seeds)
    keep = np.isin(lab, np.unique(lab[pos]))
    return idx[keep]


def boundary_distance(g: LatticeGeometry, x) -> int:
    i, j = x[0], x[1]
    return min(i + 1, j + 1, g.n - i, g.n - j)


def event_Gamma(omega: EdgeConfig, x, h1: int, components=None) -> EventReport:
    g = omega.geometry
    i, j = int(x[0]), int(x[1])
    xv = (i, j, 0)
    sides = [g.face_index(f) for f in side_faces(xv)]
    closed = ~omega.bits[g.face_edge[sides]]
    if not closed.all():
        return EventReport("Gamma", False, {"reason": "a side face of x is open"})
    H = _closed_upper_component(omega, np.array(sides))
    Ht = to_tuples(g, H)
    byh: dict[int, set] = {}
    for f in Ht:
        byh.setdefault(face_h2(f), set()).add(f)
    wit: dict = {"H_size": len(Ht)}
    if byh.get(1, set()) != set(side_faces(xv)):
        wit["reason"] = "no cut at x"
        return EventReport("Gamma", False, wit)
    top = byh.get(2 * h1 + 1, set())
    y = None
    if len(top) == 4:
        for f in top:
            for v in _side_owners(f):
                if set(side_faces(v)) == top:
                    y = v
    if y is None or v_layer(y) != h1:
        wit["reason"] = "no cut at height h1+1/2"
        return EventReport("Gamma", False, wit)
    yb = (y[0], y[1], y[2] - 1)
    if byh.get(2 * h1 - 1, set()) != set(side_faces(yb)):
        wit["reason"] = "no cut at height h1-1/2"
        return EventReport("Gamma", False, wit)
    if not byh.get(2 * h1, set()) <= {floor_face(y)}:
        wit["reason"] = "faces at height h1"
        return EventReport("Gamma", False, wit)
    wit["y"] = y
    from .interfaces import extract_components

    comps = components if components is not None else extract_components(omega)

    def in_top(v):
        if g.in_box(*v):
            return bool(comps.V_top[g.vertex_index(*v)])
        return v[2] >= 0

    ring = [(y[0] + a, y[1] + b, y[2]) for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    ring += [(i + a, j + b, 0) for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    if not all(in_top(v) for v in ring):
        wit["reason"] = "a neighbor is not in V_top"
        return EventReport("Gamma", False, wit)
    if not comps.V_bot[g.vertex_index(*xv)]:
        wit["reason"] = "x not in V_bot"
        return EventReport("Gamma", False, wit)
    if 2 * cell_distance((i, j), y) > boundary_distance(g, (i, j)):
        wit["reason"] = "y too far from x"
        return EventReport("Gamma", False, wit)
    return EventReport("Gamma", True, wit)


def v_layer(v) -> int:
    return v[2]


def _side_owners(f):
    axis, (i, j, k) = f
    if axis == 1:
        return [(i, j, k), (i + 1, j, k)]
    if axis == 2:
        return [(i, j, k), (i, j + 1, k)]
    return []


# ----------------------------------------------------------- truncation/walls
def truncated_faces(bundle: InterfaceBundle, p: Pillar, spine_only: bool = False) -> np.ndarray:
    """Face indices of the interface with the pillar (or its spine) cut off."""
    g = bundle.geometry
    full = set(int(f) for f in bundle.full.faces)
    if spine_only:
        dec = p.decomposition
        remove = dec.spine
        fill = [floor_face(dec.cut_points[0])] if dec.cut_points else []
    else:
        remove = p.faces
        fill = [floor_face(v) for v in p.vertices if v[2] == 0]
    for f in remove:
        full.discard(g.face_index(f))
    for f in fill:
        full.add(g.face_index(f))
    return np.array(sorted(full), dtype=np.int64)


def _classify_faces(g: LatticeGeometry, faces: np.ndarray) -> Classified:
    return classify(InterfaceFaces(g, "full", faces))


def _wall_distance(w, x) -> int:
    cells = w.cells if w.cells else [((a - 1) // 2, (b - 1) // 2) for a, b in w.positions]
    return min(cell_distance(c, x) for c in cells)


def wall_threshold(d: int, L: int, h: int) -> float:
    if d <= L:
        return 0.0
    if d < L ** 3 * h:
        return math.log(d)
    return math.inf


def increment_threshold(t: int, L: int) -> float:
    return 0.0 if t <= L ** 3 else float(t)


def _wall_violations(g, faces, x, L, h) -> list:
    ctx = _classify_faces(g, faces)
    bad = []
    for w in ctx.walls:
        d = _wall_distance(w, x)
        if w.excess > wall_threshold(d, L, h):
            bad.append({"index": w.index, "excess": w.excess, "distance": d})
    return bad


def pillar_iso_reasons(p: Pillar, L: int, h: int) -> list[str]:
    """Pillar-side conditions of the isolated-pillar space."""
    reasons = []
    if p.height < 1:
        return ["empty pillar"]
    dec = p.decomposition
    if not dec.cut_points or dec.cut_points[0] != p.base_vertex:
        reasons.append("non-empty base")
        return reasons
    for t, inc in enumerate(dec.increments, 1):
        if inc.excess > increment_threshold(t, L):
            reasons.append(f"increment {t} has excess {inc.excess}")
    if len(dec.spine) > 10 * h:
        reasons.append(f"spine has {len(dec.spine)} faces")
    return reasons


def membership_iso(bundle: InterfaceBundle, x, L: int, h: int, shell: bool = False) -> EventReport:
    g = bundle.geometry
    x = (int(x[0]), int(x[1]))
    p = pillar_at(bundle, x, shell)
    reasons = pillar_iso_reasons(p, L, h)
    below = g.face_below(x[0], x[1], 0)
    if bundle.full_mask[below]:
        reasons.append("face below x is in the interface")
    walls_bad = []
    if p.height >= 1:
        full_p = p if not shell else pillar_at(bundle, x, False)
        walls_bad = _wall_violations(g, truncated_faces(bundle, full_p), x, L, h)
        if walls_bad:
            reasons.append(f"{len(walls_bad)} walls too large")
    name = "Iso_o" if shell else "Iso"
    return EventReport(name, not reasons, {"reasons": reasons, "walls": walls_bad})


def first_increment_above(dec: Decomposition, h0: int) -> int | None:
    """1-based index of the first increment whose top vertex is above ``h0``."""
    for t, inc in enumerate(dec.increments, 1):
        if inc.top_layer >= h0:
            return t
    return None


def incr_reasons(p: Pillar, Lp: int, h0: int) -> list[str]:
    dec = p.decomposition
    j0 = first_increment_above(dec, h0)
    if j0 is None:
        return ["pillar does not reach h0"]
    reasons = []
    for t, inc in enumerate(dec.increments, 1):
        if t < j0:
            continue
        thr = 0 if t - j0 <= Lp else t - j0
        if inc.excess > thr:
            reasons.append(f"increment {t} has excess {inc.excess}")
    return reasons


def membership_incr(bundle: InterfaceBundle, x, Lp: int, h0: int) -> EventReport:
    p = pillar_at(bundle, x)
    if p.height < 1:
        return EventReport("Incr", False, {"reasons": ["empty pillar"]})
    r = incr_reasons(p, Lp, h0)
    return EventReport("Incr", not r, {"reasons": r, "j0": first_increment_above(p.decomposition, h0)})


def trivial_stretch(dec: Decomposition, k_lo: int, k_hi: int) -> bool:
    """Every layer in ``[k_lo, k_hi]`` is a cut layer and consecutive cuts form trivial increments."""
    cuts = {v[2]: v for v in dec.cut_points}
    if any(k not in cuts for k in range(k_lo, k_hi + 1)):
        return False
    for inc in dec.increments:
        if not inc.remainder and k_lo <= inc.lo[2] and inc.top_layer <= k_hi and not inc.trivial:
            return False
    return True


def omega_pillar_reasons(p: Pillar, L: int, h1: int, h2: int | None = None) -> list[str]:
    """Pillar-side conditions of the concatenable spaces (all but the wall item)."""
    h = h1 + (h2 or 0)
    reasons = pillar_iso_reasons(p, L, h)
    if reasons:
        return reasons
    dec = p.decomposition
    if not trivial_stretch(dec, max(0, h - 1 - L ** 3), h - 1):
        reasons.append("no trivial stretch below the top")
    if not capped(p, h):
        reasons.append("pillar not capped at h")
    if h2 is None:
        return reasons
    if not trivial_stretch(dec, max(0, h1 - 1 - L ** 3), h1):
        reasons.append("no trivial stretch around h1")
        return reasons
    j0 = next((t for t, inc in enumerate(dec.increments, 1) if inc.lo[2] == h1), None)
    if j0 is None:
        reasons.append("no increment starts at h1+1/2")
        return reasons
    for t, inc in enumerate(dec.increments, 1):
        if t < j0:
            continue
        thr = 0 if t - j0 <= L ** 3 else t - j0
        if inc.excess > thr:
            reasons.append(f"increment {t} above h1 has excess {inc.excess}")
    low = sum(1 for f in dec.spine if face_h2(f) <= 2 * h1)
    high = sum(1 for f in dec.spine if face_h2(f) >= 2 * h1)
    if low > 10 * h1:
        reasons.append("too many spine faces below h1")
    if high > 10 * h2:
        reasons.append("too many spine faces above h1")
    return reasons


def membership_omega(bundle: InterfaceBundle, x, L: int, h1: int, h2: int | None = None) -> EventReport:
    g = bundle.geometry
    x = (int(x[0]), int(x[1]))
    h = h1 + (h2 or 0)
    p = pillar_at(bundle, x)
    reasons = omega_pillar_reasons(p, L, h1, h2)
    if bundle.full_mask[g.face_below(x[0], x[1], 0)]:
        reasons.append("face below x is in the interface")
    if p.height >= 1:
        bad = _wall_violations(g, truncated_faces(bundle, p), x, L, h)
        if bad:
            reasons.append(f"{len(bad)} walls too large")
    name = "Omega_h" if h2 is None else "Omega_h1h2"
    return EventReport(name, not reasons, {"reasons": reasons})


# --------------------------------------------------------------- split/concat
def split(p: Pillar, h1: int, h2: int, L: int) -> tuple[Pillar, Pillar]:
    """Cut a concatenable pillar at height ``h1`` into a capped bottom and a top part."""
    r = omega_pillar_reasons(p, L, h1, h2)
    if r:
        raise NotInSpace("; ".join(r))
    if any(face_h2(f) == 2 * h1 for f in p.faces):
        raise NotInSpace("a face sits at the cut height")
    bot_v = frozenset(v for v in p.vertices if v[2] < h1)
    top_v = [v for v in p.vertices if v[2] >= h1]
    vb = next(v for v in bot_v if v[2] == h1 - 1)
    y = next(v for v in top_v if v[2] == h1)
    dx, dy = p.x[0] - y[0], p.x[1] - y[1]
    below = lambda fs: frozenset(f for f in fs if face_h2(f) < 2 * h1)  # noqa: E731
    above = lambda fs: frozenset(shift_face(f, dx, dy, -h1) for f in fs if face_h2(f) > 2 * h1)  # noqa: E731
    pb = Pillar(p.x, h1, bot_v, below(p.core) | {cap_face(vb)}, below(p.hairs), p.shell)
    pt = Pillar(p.x, p.height - h1, frozenset(shift_vertex(v, dx, dy, -h1) for v in top_v),
                above(p.core), above(p.hairs), p.shell)
    return pb, pt


def concat(pb: Pillar, pt: Pillar) -> Pillar:
    h1 = pb.height
    tops = [v for v in pb.vertices if v[2] == h1 - 1]
    if len(tops) != 1 or cap_face(tops[0]) not in pb.core:
        raise NotInSpace("bottom pillar is not capped by a single vertex")
    vb = tops[0]
    dx, dy = vb[0] - pt.x[0], vb[1] - pt.x[1]
    core = (pb.core - {cap_face(vb)}) | {shift_face(f, dx, dy, h1) for f in pt.core}
    hairs = pb.hairs | {shift_face(f, dx, dy, h1) for f in pt.hairs}
    verts = pb.vertices | {shift_vertex(v, dx, dy, h1) for v in pt.vertices}
    return Pillar(pb.x, h1 + pt.height, frozenset(verts), frozenset(core), frozenset(hairs), pb.shell)


# ------------------------------------------------------------------ fixtures
def config_from_regions(geom: LatticeGeometry, regions, extra_faces=(), removed_faces=()) -> EdgeConfig:
    """Configuration whose interface is the flat plane deformed by upward regions.

    ``regions`` is an iterable of vertex sets at layers >= 0.  Their bounding
    faces above height 0 are closed, the floor faces under their layer-0
    vertices are left open, and every edge inside a region is open.
    """
    U: set = set()
    for r in regions:
        U |= {tuple(v) for v in r}
    faces = {(3, (i, j, -1)) for i in range(geom.n) for j in range(geom.n)}
    faces -= {floor_face(v) for v in U if v[2] == 0}
    faces |= {f for f in bounding_faces(U) if face_h2(f) >= 1}
    faces |= set(extra_faces)
    faces -= set(removed_faces)
    idx = [geom.face_index(f) for f in faces] + [int(f) for f in geom.ring_faces]
    return EdgeConfig.from_closed_faces(geom, np.array(idx, dtype=np.int64))


def column(x, h: int, k0: int = 0) -> list[tuple]:
    return [(int(x[0]), int(x[1]), k0 + t) for t in range(h)]


def block(x0, y0, k0, wx, wy, wz) -> list[tuple]:
    return [(x0 + a, y0 + b, k0 + c) for a in range(wx) for b in range(wy) for c in range(wz)]


def stacked_pillar(x, layers) -> list[tuple]:
    """Vertex set from per-layer rectangles ``(dx, dy, wx, wy)`` relative to ``x``."""
    out = []
    for k, (dx, dy, wx, wy) in enumerate(layers):
        out += block(x[0] + dx, x[1] + dy, k, wx, wy, 1)
    return out


def random_iso_fixture(rng: np.random.Generator, n: int, m: int, h: int, L: int = 1, tries: int = 50):
    """A random interface in the isolated space: a pillar with a few fat increments
    high enough to be allowed, plus far-away bumps.  Returns ``(geometry, omega, x, layers)``."""
    geom = LatticeGeometry(n, m)
    x = (n // 2, n // 2)
    for _ in range(tries):
        layers = [(0, 0, 1, 1)] * h
        cursor = max(L ** 3 + 1, 7)
        while cursor < h - 2:
            if rng.random() < 0.5:
                wx, wy = (2, 1) if rng.random() < 0.5 else (1, 2)
                layers[cursor] = (0, 0, wx, wy)
                if rng.random() < 0.5 and cursor + 1 < h - 1:
                    layers[cursor + 1] = (0, 0, wx, wy)
                    cursor += 1
                cursor += 2
            else:
                cursor += 1
        regions = [stacked_pillar(x, layers)]
        for _ in range(int(rng.integers(0, 3))):
            a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
            if cell_distance((a, b), x) > max(L ** 3 * h, 3):
                regions.append([(a, b, 0)])
        omega = config_from_regions(geom, regions)
        if membership_iso(InterfaceBundle(omega), x, L, h):
            return geom, omega, x, layers
    raise RuntimeError("no isolated fixture found")


# ------------------------------------------------------------------- the maps
@dataclass
class PhiResult:
    omega: EdgeConfig
    bundle: InterfaceBundle
    identity: bool
    ledger: dict


def _rebuild(bundle: InterfaceBundle, p: Pillar, new_faces) -> tuple[EdgeConfig, set]:
    g = bundle.geometry
    keep = set(int(f) for f in bundle.full.faces) - {g.face_index(f) for f in p.faces}
    keep |= {g.face_index(f) for f in new_faces}
    return EdgeConfig.from_closed_faces(g, np.array(sorted(keep), dtype=np.int64)), keep


def _stack(col, k_from: int, k_to: int) -> tuple[set, set]:
    """Vertices and side faces of the column ``col`` between two layers."""
    vs = {(col[0], col[1], k) for k in range(k_from, k_to + 1)}
    fs = set()
    for v in vs:
        fs |= set(side_faces(v))
    return vs, fs


def phi_incr(bundle: InterfaceBundle, x, L: int, h: int, Lp: int, h0: int) -> PhiResult:
    """Straighten the increments of an isolated pillar from height ``h0`` upward."""
    x = (int(x[0]), int(x[1]))
    iso = membership_iso(bundle, x, L, h)
    if not iso:
        raise NotInSpace("input interface is not in the isolated space: " + "; ".join(iso.witness["reasons"]))
    p = pillar_at(bundle, x)
    if membership_incr(bundle, x, Lp, h0):
        return PhiResult(bundle.omega, bundle, True, {"j0": None, "jstar": None, "m_IJ": 0})
    dec = p.decomposition
    incs = dec.increments
    j0 = first_increment_above(dec, h0)
    s = j0
    for t in range(j0, len(incs) + 1):
        thr = 0 if t - j0 <= Lp else t - j0 - 1
        if incs[t - 1].excess >= thr:
            s = t
    jstar = s
    lo = incs[j0 - 1].lo
    top_inc = incs[jstar - 1]
    k_hi = top_inc.top_layer
    keep_low = {f for f in p.faces if face_h2(f) <= 2 * lo[2] + 1}
    _, stack_faces = _stack(lo, lo[2], k_hi)
    new_faces = keep_low | stack_faces
    if top_inc.remainder:
        new_faces.add(cap_face((lo[0], lo[1], k_hi)))
    else:
        hi = top_inc.hi
        dx, dy = lo[0] - hi[0], lo[1] - hi[1]
        new_faces |= {shift_face(f, dx, dy, 0) for f in p.faces if face_h2(f) >= 2 * hi[2] + 1}
    omega, faces = _rebuild(bundle, p, new_faces)
    nb = InterfaceBundle(omega)
    removed = sum(inc.excess for inc in incs[j0 - 1:jstar])
    m_IJ = len(bundle.full.faces) - len(nb.full.faces)
    ledger = {
        "j0": j0,
        "jstar": jstar,
        "removed_excess": removed,
        "m_IJ": m_IJ,
        "m_Xjstar": incs[jstar - 1].excess,
        "claim_bound": (jstar - j0 <= Lp) or (jstar - j0 <= incs[jstar - 1].excess + 1),
        "well_defined": set(int(f) for f in nb.full.faces) == faces,
    }
    return PhiResult(omega, nb, False, ledger)


def _nesting_or_containing(ctx: Classified, cells) -> set[int]:
    hit = set()
    for t, w in enumerate(ctx.walls):
        wc = set(w.cells)
        for c in cells:
            if c in wc or w.nests_cell(c):
                hit.add(t)
                break
    return hit


def _interior_ceiling_faces(ctx: Classified, w) -> list[int]:
    g = ctx.geometry
    out = []
    for f in ctx.ceilings:
        a = g.face_anchor[f]
        c = (int(a[0]), int(a[1]))
        if 0 <= c[0] < g.n and 0 <= c[1] < g.n and w.nests_cell(c):
            out.append(int(f))
    return out


def _set_distance(g: LatticeGeometry, faces_a: np.ndarray, faces_b) -> float:
    if len(faces_a) == 0 or len(faces_b) == 0:
        return math.inf
    a = np.array([face_center2(tuple(g.face_id(int(f)))) for f in faces_a])
    b = np.array([face_center2(f) for f in faces_b])
    return float(np.abs(a[:, None, :] - b[None, :, :]).max(axis=2).min()) / 2.0


def phi_iso(bundle: InterfaceBundle, x, L: int, h: int, h_prime: int = 0) -> PhiResult:
    """Map an interface with a pillar of height >= ``h_prime`` into the isolated space.

    The result is only returned once it has been re-extracted and found to be a
    genuine interface in the target space that satisfies the excess-area ledger;
    otherwise a :class:`PhiDiagnostic` is raised.
    """
    g = bundle.geometry
    x = (int(x[0]), int(x[1]))
    p = pillar_at(bundle, x)
    if p.height < h_prime:
        raise NotInSpace(f"pillar height {p.height} is below {h_prime}")
    if membership_iso(bundle, x, L, h):
        return PhiResult(bundle.omega, bundle, True, {"m_IJ": 0})
    dec = p.decomposition
    ledger: dict = {"height": p.height}
    if not dec.cut_points:
        raise PhiDiagnostic("pillar has no cut-point", ledger)
    v1 = dec.cut_points[0]
    hb = v1[2]
    trunc = truncated_faces(bundle, p, spine_only=True)
    ctx = _classify_faces(g, trunc)
    walls = ctx.walls
    marked: set[int] = set()
    xbar = [(x[0] + a, x[1] + b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    marked |= _nesting_or_containing(ctx, xbar + [(v1[0], v1[1])])
    incs = dec.increments
    s = 1
    ystar = None
    wall_geo = [np.concatenate([w.A, w.B, np.array(_interior_ceiling_faces(ctx, w), dtype=np.int64)])
                for w in walls]
    for t, inc in enumerate(incs, 1):
        thr = 0 if t <= L ** 3 else t - 1
        if inc.excess >= thr:
            s = t
        for widx in sorted(range(len(walls)), key=lambda q: walls[q].index):
            if _set_distance(g, wall_geo[widx], inc.faces) <= (t - 1) / 2:
                s = t
                ystar = widx
                break
    jstar = s
    if ystar is not None:
        marked.add(ystar)
    a3 = len(dec.spine) > 5 * h
    if a3:
        jstar = len(incs)
    for t, w in enumerate(walls):
        d = _wall_distance(w, x)
        if d <= L ** 3 * h:
            thr = 0 if d <= L else math.log(max(d, 1))
            if w.excess >= thr:
                marked.add(t)
    family = decompose_walls_safe(ctx, ledger)
    grp = groups(family)
    drop = set()
    for gr in grp:
        if marked & set(gr.members):
            drop |= set(gr.members)
    remaining = WallFamily([w for t, w in enumerate(family.walls) if t not in drop])
    ledger.update({"jstar": jstar, "A3": a3, "marked": sorted(marked), "deleted": sorted(drop),
                   "column": 4 * hb})
    try:
        K = reconstruct(remaining, g)
    except Exception as exc:  # geometry errors become diagnostics
        raise PhiDiagnostic(f"reconstruction failed: {exc}", ledger) from exc
    Kset = set(int(f) for f in K.faces)
    floor_x = g.face_index((3, (x[0], x[1], -1)))
    if floor_x not in Kset:
        raise PhiDiagnostic("the ceiling above x is not at height 0 after deletions", ledger)
    Kset.discard(floor_x)
    col_v, col_f = _stack((x[0], x[1]), 0, hb - 1) if hb > 0 else (set(), set())
    new_f = set(col_f)
    if a3:
        top_k = max(hb + (h - hb), hb)
        _, sf = _stack((x[0], x[1]), hb, top_k)
        new_f |= sf | {cap_face((x[0], x[1], top_k))}
    else:
        inc = incs[jstar - 1]
        k_hi = inc.top_layer
        _, sf = _stack((x[0], x[1]), hb, k_hi)
        new_f |= sf
        if inc.remainder:
            new_f.add(cap_face((x[0], x[1], k_hi)))
        else:
            hi = inc.hi
            dx, dy = x[0] - hi[0], x[1] - hi[1]
            new_f |= {shift_face(f, dx, dy, 0) for f in dec.spine if face_h2(f) >= 2 * hi[2] + 1}
    try:
        J = Kset | {g.face_index(f) for f in new_f}
    except KeyError as exc:
        raise PhiDiagnostic(f"new pillar leaves the box: {exc}", ledger) from exc
    omega = EdgeConfig.from_closed_faces(g, np.array(sorted(J), dtype=np.int64))
    nb = InterfaceBundle(omega)
    m_IJ = len(bundle.full.faces) - len(nb.full.faces)
    ledger["m_IJ"] = m_IJ
    ledger["well_defined"] = set(int(f) for f in nb.full.faces) == J
    try:
        q = pillar_at(nb, x)
        ledger["image_height"] = q.height
        ledger["in_E"] = q.height >= h_prime
        iso = membership_iso(nb, x, L, h)
        ledger["in_Iso"] = bool(iso)
        ledger["iso_reasons"] = iso.witness.get("reasons")
    except Exception as exc:
        raise PhiDiagnostic(f"image could not be analysed: {exc}", ledger) from exc
    ledger["column_bound"] = 4 * hb <= 4 * m_IJ
    if a3:
        ledger["spine_bound"] = h - hb <= m_IJ
    else:
        ledger["spine_bound"] = jstar - 1 <= max(2, L ** 3) * m_IJ
    checks = ("well_defined", "in_E", "in_Iso", "column_bound", "spine_bound")
    failed = [c for c in checks if not ledger[c]]
    if failed:
        raise PhiDiagnostic("post-condition failed: " + ", ".join(failed), ledger)
    return PhiResult(omega, nb, False, ledger)


def decompose_walls_safe(ctx: Classified, ledger: dict) -> WallFamily:
    try:
        return WallFamily([standardize(w, ctx) for w in ctx.walls])
    except Exception as exc:
        raise PhiDiagnostic(f"wall standardization failed: {exc}", ledger) from exc


# --------------------------------------------------------------- color events
COLOR_KINDS = ("nred", "blue", "bot")


def event_Acolor(bundle: InterfaceBundle, x, h: int, kind: str, method: str = "components") -> EventReport:
    """A path inside the pillar's vertices, within the set selected by ``kind``,
    from ``x`` to the layer ``h-1``.

    ``method="open"`` uses open connectivity inside the pillar instead, which is
    the same event for ``bot`` on isolated pillars.
    """
    if kind not in COLOR_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    g = bundle.geometry
    comp = bundle.components
    p = pillar_at(bundle, x)
    xv = (int(x[0]), int(x[1]), 0)
    if p.height < 1:
        return EventReport("A_" + kind, False, {"reason": "empty pillar"})
    inP = np.zeros(g.num_vertices, dtype=bool)
    inP[[g.vertex_index(*v) for v in p.vertices]] = True
    if method == "open":
        if kind != "bot":
            raise ValueError("open connectivity is only meaningful for bot")
        b = bundle.omega.bits[: g.num_interior_edges]
        u, v = g.edge_u[: g.num_interior_edges], g.edge_v[: g.num_interior_edges]
        sel = b & inP[u] & inP[v]
        nv = g.num_vertices
        mat = sp.coo_matrix((np.ones(int(sel.sum()), dtype=np.int8), (u[sel], v[sel])), shape=(nv, nv))
        _, lab = connected_components(mat, directed=False)
        reach = inP & (lab == lab[g.vertex_index(*xv)])
    else:
        if kind == "nred":
            if comp.Vh_red is None:
                raise ValueError("spins are required for the nred event")
            allowed = ~comp.Vh_red
        elif kind == "blue":
            if comp.Vh_blue is None:
                raise ValueError("spins are required for the blue event")
            allowed = comp.Vh_blue
        else:
            allowed = comp.Vh_bot
        mask = inP & allowed
        if not mask[g.vertex_index(*xv)]:
            return EventReport("A_" + kind, False, {"reason": "x not in the set"})
        lab = _components_within(g, mask)
        reach = mask & (lab == lab[g.vertex_index(*xv)])
    top = int(g.coords[reach, 2].max()) if reach.any() else -1
    return EventReport("A_" + kind, top >= h - 1, {"reach_layer": top})


# ----------------------------------------------------------- blocks and G
def simple_blocks(p: Pillar, h: int) -> int:
    """Shell increments below height ``h`` made of two stacked vertices only."""
    count = 0
    for inc in p.decomposition.increments:
        if inc.remainder or inc.top_layer > h - 1:
            continue
        if inc.rise == 1 and len(inc.vertices) == 2:
            count += 1
    return count


def event_G_script(p: Pillar, h: int, cstar: float, beta: float) -> EventReport:
    budget = 4 * h + 1 + cstar / (2 * beta) * h
    return EventReport("G_script", len(p.faces) < budget, {"faces": len(p.faces), "budget": budget})


def simple_block_implication(p: Pillar, h: int, cstar: float, beta: float) -> dict:
    """Face budget plus height >= h forces many simple blocks.

    The rise from height 1/2 to h - 1/2 is h - 1, which is the quantity the
    simple-block count is compared against.
    """
    g_ok = bool(event_G_script(p, h, cstar, beta)) and p.height >= h
    count = simple_blocks(p, h)
    bound = (h - 1) - h * cstar / beta
    return {"premise": g_ok, "count": count, "bound": bound, "holds": (not g_ok) or count >= bound}


def event_Gx(bundle: InterfaceBundle, x, h: int, kind: str = "top") -> EventReport:
    g = bundle.geometry
    x = (int(x[0]), int(x[1]))
    p = pillar_at(bundle, x)
    wit: dict = {"height": p.height}
    if p.height < h:
        return EventReport("G", False, wit | {"reason": "pillar too short"})
    dec = p.decomposition
    if not dec.cut_points or dec.cut_points[0] != p.base_vertex:
        return EventReport("G", False, wit | {"reason": "x is not a cut-point"})
    if kind == "top":
        if not capped(p, h):
            return EventReport("G", False, wit | {"reason": "pillar not capped"})
    elif not event_Acolor(bundle, x, h, kind):
        return EventReport("G", False, wit | {"reason": f"no {kind} path"})
    pf = to_indices(g, p.faces)
    pmask = np.zeros(g.num_faces, dtype=bool)
    pmask[pf] = True
    nbrs = np.unique(g.nbr1[pf].indices)
    touching = nbrs[bundle.full_mask[nbrs] & ~pmask[nbrs]]
    i, j = x
    allowed = {g.face_index(f) for f in [(3, (i + 1, j, -1)), (3, (i - 1, j, -1)), (3, (i, j + 1, -1)),
                                         (3, (i, j - 1, -1)), (3, (i, j, -1))] if g.has_face(f)}
    extra = sorted(set(int(f) for f in touching) - allowed)
    if extra:
        return EventReport("G", False, wit | {"reason": "interface faces touch the pillar", "faces": extra})
    return EventReport("G", True, wit)


# ------------------------------------------------------------ cone separation
def cone_regions(face, x, L: int, h: int) -> set[str]:
    """Names of the regions (tri, par, flat, vee, ex) containing a face tuple."""
    i, j = x
    c = face_center2(face)
    d = max(abs(c[0] - (2 * i + 1)), abs(c[1] - (2 * j + 1))) / 2.0
    hg = face_h2(face) / 2.0
    out = set()
    if hg > L ** 3 and d <= min(hg ** 2, 10 * h) and hg < 10 * h:
        out.add("tri")
    col = {(i, j, k) for k in range(L ** 3)}
    if face in bounding_faces(col):
        out.add("par")
    if hg == 0 and d <= L:
        out.add("flat")
    if d >= L and d >= 1 and hg <= math.log(d) ** 2:
        out.add("vee")
    if d > L ** 3 * h:
        out.add("ex")
    return out


def cone_separation(bundle: InterfaceBundle, x, L: int, h: int) -> dict:
    g = bundle.geometry
    x = (int(x[0]), int(x[1]))
    p = pillar_at(bundle, x)
    inner = {"tri", "par"}
    outer = {"flat", "vee", "ex"}
    pillar_ok = all(cone_regions(f, x, L, h) & inner for f in p.faces)
    rest = to_tuples(g, bundle.full.faces) - set(p.faces)
    rest = {f for f in rest if g.face_kind[g.face_index(f)] != 3}
    rest_ok = all(cone_regions(f, x, L, h) & outer for f in rest)
    disjoint = all(not (cone_regions(f, x, L, h) & inner and cone_regions(f, x, L, h) & outer)
                   for f in set(p.faces) | rest)
    return {"pillar_inside": pillar_ok, "rest_outside": rest_ok, "disjoint": disjoint}


def dump_pillar(p: Pillar, reports=()) -> str:
    obj = p.to_json_obj()
    obj["events"] = [{"event": r.event, "value": bool(r.value)} for r in reports]
    return json.dumps(obj, sort_keys=True)

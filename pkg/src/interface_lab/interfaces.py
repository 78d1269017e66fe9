"""Components, augmented components and interfaces of a configuration.

Augmentation: a complement component is finite unless it reaches the exterior
on the opposite side.  For the top/red sets that means containing a box vertex
below height 0 with an edge to the exterior (lateral sides or bottom layer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .lattice import LatticeGeometry
from .model import BLUE, RED, EdgeConfig, NotInDnError, SpinConfig

KINDS = ("top", "bot", "red", "blue", "full", "semi-extended")


@lru_cache(maxsize=32)
def _vertex_graph(geom: LatticeGeometry) -> sp.csr_matrix:
    ni = geom.num_interior_edges
    nv = geom.num_vertices
    u, v = geom.edge_u[:ni], geom.edge_v[:ni]
    return sp.coo_matrix((np.ones(ni, dtype=np.int8), (u, v)), shape=(nv, nv)).tocsr()


@lru_cache(maxsize=32)
def _boundary_masks(geom: LatticeGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Box vertices adjacent to the exterior above / below height 0."""
    ni = geom.num_interior_edges
    nv = geom.num_vertices
    up = np.zeros(nv, dtype=bool)
    lo = np.zeros(nv, dtype=bool)
    src = geom.edge_u[ni:]
    top = geom.edge_v[ni:] == geom.top_ghost
    up[src[top]] = True
    lo[src[~top]] = True
    return up, lo


def _components_within(geom: LatticeGeometry, mask: np.ndarray, extra: sp.csr_matrix | None = None):
    """Labels of components of the lattice restricted to ``mask`` (-1 outside)."""
    idx = np.flatnonzero(mask)
    graph = _vertex_graph(geom) if extra is None else extra
    sub = graph[idx][:, idx]
    _, lab = connected_components(sub, directed=False)
    out = np.full(geom.num_vertices, -1, dtype=np.int64)
    out[idx] = lab
    return out


def augment(geom: LatticeGeometry, member: np.ndarray, infinite_seeds: np.ndarray) -> np.ndarray:
    """``member`` plus every complement component containing no seed vertex."""
    comp = _components_within(geom, ~member)
    inf_labels = np.unique(comp[infinite_seeds & ~member])
    finite = (~member) & ~np.isin(comp, inf_labels)
    return member | finite


def _mono_component(geom: LatticeGeometry, colors: np.ndarray, color: int, seeds: np.ndarray) -> np.ndarray:
    """Vertices of ``color`` joined to a seed of that color by a monochromatic path."""
    ni = geom.num_interior_edges
    u, v = geom.edge_u[:ni], geom.edge_v[:ni]
    same = (colors[u] == color) & (colors[v] == color)
    nv = geom.num_vertices
    mat = sp.coo_matrix((np.ones(int(same.sum()), dtype=np.int8), (u[same], v[same])), shape=(nv, nv))
    _, lab = connected_components(mat, directed=False)
    good = seeds & (colors == color)
    return np.isin(lab, np.unique(lab[good])) & (colors == color)


@dataclass
class ComponentSets:
    geometry: LatticeGeometry
    V_top: np.ndarray
    Vh_top: np.ndarray
    V_bot: np.ndarray
    Vh_bot: np.ndarray
    V_red: np.ndarray | None = None
    Vh_red: np.ndarray | None = None
    V_blue: np.ndarray | None = None
    Vh_blue: np.ndarray | None = None
    taint: bool = False

    def augmented(self, kind: str) -> np.ndarray:
        arr = {"top": self.Vh_top, "bot": self.Vh_bot, "red": self.Vh_red, "blue": self.Vh_blue}[kind]
        if arr is None:
            raise ValueError(f"{kind} components need spins")
        return arr

    def ordering_holds(self) -> bool:
        ok = True
        if self.Vh_red is not None:
            ok &= bool(np.all(self.Vh_red[self.Vh_top]))
            ok &= bool(np.all(self.Vh_blue[self.Vh_bot]))
            ok &= not bool(np.any(self.Vh_red & self.Vh_blue))
        return ok


def extract_components(omega: EdgeConfig, sigma: SpinConfig | None = None) -> ComponentSets:
    g = omega.geometry
    nv = g.num_vertices
    b = omega.bits
    mat = sp.coo_matrix((np.ones(int(b.sum()), dtype=np.int8), (g.edge_u[b], g.edge_v[b])),
                        shape=(nv + 2, nv + 2))
    _, lab = connected_components(mat, directed=False)
    if lab[g.top_ghost] == lab[g.bottom_ghost]:
        raise NotInDnError("configuration is not in D_n")
    up, lo = _boundary_masks(g)
    V_top = lab[:nv] == lab[g.top_ghost]
    V_bot = lab[:nv] == lab[g.bottom_ghost]
    Vh_top = augment(g, V_top, lo)
    Vh_bot = augment(g, V_bot, up)
    top_layer = g.coords[:, 2] == g.kmax
    bottom_layer = g.coords[:, 2] == g.kmin
    taint = bool(np.any(~Vh_top & top_layer) or np.any(Vh_top & bottom_layer)
                 or np.any(Vh_bot & top_layer) or np.any(~Vh_bot & bottom_layer))
    cs = ComponentSets(g, V_top, Vh_top, V_bot, Vh_bot, taint=taint)
    if sigma is not None:
        c = sigma.colors
        cs.V_red = _mono_component(g, c, RED, up)
        cs.V_blue = _mono_component(g, c, BLUE, lo)
        cs.Vh_red = augment(g, cs.V_red, lo)
        cs.Vh_blue = augment(g, cs.V_blue, up)
        cs.taint |= bool(np.any(~cs.Vh_red & top_layer) or np.any(~cs.Vh_blue & bottom_layer))
    return cs


@dataclass
class InterfaceFaces:
    geometry: LatticeGeometry
    kind: str
    faces: np.ndarray
    taint: bool = False

    def __post_init__(self) -> None:
        f = np.unique(np.asarray(self.faces, dtype=np.int64))
        g = self.geometry
        a = g.face_anchor[f]
        order = np.lexsort((a[:, 2], a[:, 1], a[:, 0], g.face_axis[f]))
        self.faces = f[order]

    @property
    def max_height(self) -> float:
        return float(self.geometry.face_h2[self.faces].max()) / 2 if len(self.faces) else 0.0

    @property
    def min_height(self) -> float:
        return float(self.geometry.face_h2[self.faces].min()) / 2 if len(self.faces) else 0.0

    def __len__(self) -> int:
        return len(self.faces)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.geometry.num_faces, dtype=bool)
        m[self.faces] = True
        return m

    def face_set(self) -> set[int]:
        return set(int(f) for f in self.faces)

    def face_ids(self):
        return [self.geometry.face_id(int(f)) for f in self.faces]

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "faces": [[fid.axis, list(fid.anchor)] for fid in self.face_ids()],
            "maxHeight": self.max_height,
            "minHeight": self.min_height,
            "taint": self.taint,
        })


def interface_faces(components: ComponentSets, kind: str) -> InterfaceFaces:
    g = components.geometry
    inside = components.augmented(kind)
    ni = g.num_interior_edges
    u, v = g.edge_u, g.edge_v
    sep = np.zeros(g.num_edges, dtype=bool)
    sep[:ni] = inside[u[:ni]] != inside[v[:ni]]
    to_top = v[ni:] == g.top_ghost
    ext_inside = to_top if kind in ("top", "red") else ~to_top
    sep[ni:] = inside[u[ni:]] != ext_inside
    return InterfaceFaces(g, kind, g.edge_face[sep], components.taint)


def _touches_caps(g: LatticeGeometry, faces: np.ndarray) -> bool:
    h2 = g.face_h2[faces]
    return bool(np.any(h2 >= 2 * g.kmax + 1) or np.any(h2 <= 2 * g.kmin + 1))


def full_interface_from_closed(g: LatticeGeometry, closed_faces: np.ndarray) -> InterfaceFaces:
    """1-connected component of ``closed_faces`` (ring faces are always closed)."""
    closed = np.zeros(g.num_faces, dtype=bool)
    closed[closed_faces] = True
    closed[g.ring_faces] = True
    idx = np.flatnonzero(closed)
    sub = g.nbr1[idx][:, idx]
    _, lab = connected_components(sub, directed=False)
    pos = np.searchsorted(idx, g.ring_faces)
    keep = np.isin(lab, np.unique(lab[pos]))
    faces = idx[keep]
    return InterfaceFaces(g, "full", faces, _touches_caps(g, faces))


def full_interface(omega: EdgeConfig) -> InterfaceFaces:
    g = omega.geometry
    return full_interface_from_closed(g, g.edge_face[~omega.bits])


def semi_extended(interface: InterfaceFaces) -> InterfaceFaces:
    g = interface.geometry
    mask = interface.mask()
    nb = g.nbr1[interface.faces]
    cand = np.unique(nb.indices)
    horiz = cand[(g.face_axis[cand] == 3) & ~mask[cand]]
    return InterfaceFaces(g, "semi-extended", np.concatenate([interface.faces, horiz]), interface.taint)


def clusters_of_interface(interface: InterfaceFaces) -> int:
    from .model import kappa

    omega = EdgeConfig.from_closed_faces(interface.geometry, interface.faces)
    return kappa(omega)


def realize(geom: LatticeGeometry, faces) -> EdgeConfig:
    """Configuration whose closed edges are exactly the duals of ``faces``."""
    return EdgeConfig.from_closed_faces(geom, np.asarray(list(faces), dtype=np.int64))


def flat_fraction(top: InterfaceFaces) -> float:
    """Fraction of columns whose only top-interface face is the height-0 face."""
    g = top.geometry
    f = top.faces
    horiz = f[g.face_axis[f] == 3]
    a = g.face_anchor[horiz]
    counts = np.zeros((g.n, g.n), dtype=np.int64)
    flat = np.zeros((g.n, g.n), dtype=bool)
    inside = (a[:, 0] >= 0) & (a[:, 0] < g.n) & (a[:, 1] >= 0) & (a[:, 1] < g.n)
    np.add.at(counts, (a[inside, 0], a[inside, 1]), 1)
    at0 = inside & (g.face_h2[horiz] == 0)
    flat[a[at0, 0], a[at0, 1]] = True
    return float(np.mean(flat & (counts == 1)))


@dataclass
class InterfaceBundle:
    """All interface data of one configuration, computed lazily."""

    omega: EdgeConfig
    sigma: SpinConfig | None = None

    @property
    def geometry(self) -> LatticeGeometry:
        return self.omega.geometry

    @cached_property
    def components(self) -> ComponentSets:
        return extract_components(self.omega, self.sigma)

    @cached_property
    def top(self) -> InterfaceFaces:
        return interface_faces(self.components, "top")

    @cached_property
    def bot(self) -> InterfaceFaces:
        return interface_faces(self.components, "bot")

    @cached_property
    def red(self) -> InterfaceFaces:
        return interface_faces(self.components, "red")

    @cached_property
    def blue(self) -> InterfaceFaces:
        return interface_faces(self.components, "blue")

    @cached_property
    def full(self) -> InterfaceFaces:
        return full_interface(self.omega)

    @cached_property
    def semi(self) -> InterfaceFaces:
        return semi_extended(self.full)

    @cached_property
    def full_mask(self) -> np.ndarray:
        return self.full.mask()

    @cached_property
    def top_mask(self) -> np.ndarray:
        return self.top.mask()

    @property
    def taint(self) -> bool:
        return bool(self.components.taint or self.full.taint)


def reconstruct_top_component(top: InterfaceFaces) -> np.ndarray:
    """Vertices reachable from the upper exterior without crossing ``top``."""
    g = top.geometry
    ni = g.num_interior_edges
    blocked = top.mask()[: g.num_edges]
    keep = ~blocked
    keep_int = keep[:ni]
    nv = g.num_vertices
    u, v = g.edge_u[:ni][keep_int], g.edge_v[:ni][keep_int]
    bu = g.edge_u[ni:][keep[ni:]]
    bv = g.edge_v[ni:][keep[ni:]]
    mat = sp.coo_matrix((np.ones(len(u) + len(bu), dtype=np.int8),
                         (np.concatenate([u, bu]), np.concatenate([v, bv]))), shape=(nv + 2, nv + 2))
    _, lab = connected_components(mat, directed=False)
    return lab[:nv] == lab[g.top_ghost]

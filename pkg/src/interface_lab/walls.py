"""Ceilings, walls, standard walls and the wall-family representation of interfaces.

Plane cells are handled on a doubled grid: cell ``(i, j)`` sits at ``(2i+1, 2j+1)``,
the edge ``x = c`` between ``y = r`` and ``r+1`` at ``(2c, 2r+1)``, the edge
``y = r`` between ``x = c`` and ``c+1`` at ``(2c+1, 2r)`` and grid points at even,even
positions.  The grid is padded by one position on each side so that the ring of
cells around the box belongs to the unbounded region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import ndimage
from scipy.sparse.csgraph import connected_components

from .interfaces import InterfaceBundle, InterfaceFaces, semi_extended
from .lattice import LatticeGeometry


class InadmissibleFamily(ValueError):
    def __init__(self, i: int, j: int):
        super().__init__(f"walls {i} and {j} have 0-connected projections")
        self.pair = (i, j)


class WallGeometryError(RuntimeError):
    """A wall whose surrounding ceilings disagree; signals a classification bug."""


@lru_cache(maxsize=32)
def face_plane_positions(geom: LatticeGeometry) -> np.ndarray:
    """Doubled-grid position of the projection of every face, shape (F, 2)."""
    a = geom.face_anchor
    ax = geom.face_axis
    x = np.where(ax == 1, 2 * (a[:, 0] + 1), 2 * a[:, 0] + 1)
    y = np.where(ax == 2, 2 * (a[:, 1] + 1), 2 * a[:, 1] + 1)
    return np.stack([x, y], axis=1)


def position_points(pos: tuple[int, int]) -> list[tuple[int, int]]:
    """Grid points (doubled coordinates) in the closure of a cell or edge."""
    x, y = pos
    xs = [x] if x % 2 == 0 else [x - 1, x + 1]
    ys = [y] if y % 2 == 0 else [y - 1, y + 1]
    return [(a, b) for a in xs for b in ys]


def closure_points(positions) -> set[tuple[int, int]]:
    out: set[tuple[int, int]] = set()
    for p in positions:
        out.update(position_points(p))
    return out


@dataclass
class PlaneRegions:
    """Components of the complement of a projection."""

    n: int
    labels: np.ndarray
    infinite: int

    def label_at(self, pos) -> int:
        return int(self.labels[pos[0] + 1, pos[1] + 1])

    def is_infinite(self, pos) -> bool:
        return self.label_at(pos) == self.infinite

    def finite_labels(self) -> list[int]:
        return [int(t) for t in np.unique(self.labels) if t not in (0, self.infinite)]

    def cells_with_label(self, lab: int) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.labels == lab)
        out = []
        for x, y in zip(xs - 1, ys - 1):
            if x % 2 == 1 and y % 2 == 1 and 0 < x < 2 * self.n and 0 < y < 2 * self.n:
                out.append(((x - 1) // 2, (y - 1) // 2))
        return sorted(out)


_FOUR = ndimage.generate_binary_structure(2, 1)


def complement_regions(n: int, positions) -> PlaneRegions:
    size = 2 * n + 3
    free = np.ones((size, size), dtype=bool)
    xs = np.arange(size) - 1
    points = (xs[:, None] % 2 == 0) & (xs[None, :] % 2 == 0)
    free &= ~points
    for x, y in positions:
        free[x + 1, y + 1] = False
    labels, _ = ndimage.label(free, structure=_FOUR)
    return PlaneRegions(n, labels, int(labels[0, 0]))


def cell_pos(cell) -> tuple[int, int]:
    return (2 * cell[0] + 1, 2 * cell[1] + 1)


def cells_touching(points: set[tuple[int, int]], cells) -> list[tuple[int, int]]:
    out = []
    for c in cells:
        x, y = cell_pos(c)
        if any((x + dx, y + dy) in points for dx in (-1, 1) for dy in (-1, 1)):
            out.append(c)
    return out


def neighbor_cells(points: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Cells (possibly outside the box) whose closure contains one of ``points``."""
    out = set()
    for px, py in points:
        for dx in (-1, 1):
            for dy in (-1, 1):
                out.add(((px + dx - 1) // 2, (py + dy - 1) // 2))
    return out


# ------------------------------------------------------------------------ walls
@dataclass
class Wall:
    geometry: LatticeGeometry
    A: np.ndarray
    B: np.ndarray

    @cached_property
    def positions(self) -> frozenset:
        pp = face_plane_positions(self.geometry)
        f = np.concatenate([self.A, self.B])
        return frozenset((int(x), int(y)) for x, y in pp[f])

    @cached_property
    def cells(self) -> list[tuple[int, int]]:
        return sorted(((x - 1) // 2, (y - 1) // 2) for x, y in self.positions if x % 2 and y % 2)

    @property
    def N(self) -> int:
        return len(self.A)

    @property
    def size(self) -> int:
        return len(self.A) + len(self.B)

    @property
    def excess(self) -> int:
        return self.N - len(self.cells)

    @property
    def index(self) -> tuple[int, int, int]:
        i, j = self.cells[0] if self.cells else min(self.positions)
        return (i, j, 0)

    @cached_property
    def points(self) -> set:
        return closure_points(self.positions)

    @cached_property
    def regions(self) -> PlaneRegions:
        return complement_regions(self.geometry.n, self.positions)

    def nests_cell(self, cell) -> bool:
        return not self.regions.is_infinite(cell_pos(cell))

    def wall_inequalities(self) -> dict:
        rho = len(self.cells)
        return {
            "N>=14/13 rho": 13 * self.N >= 14 * rho,
            "m>=rho/13": 13 * self.excess >= rho,
            "m>=N/14": 14 * self.excess >= self.N,
            "N>=|W|/5": 5 * self.N >= self.size,
            "m>=1": self.excess >= 1,
        }


@dataclass
class Classified:
    geometry: LatticeGeometry
    full: InterfaceFaces
    semi: InterfaceFaces
    ceilings: np.ndarray
    ceiling_h2: dict
    walls: list[Wall]

    def wall_at(self, cell) -> Wall | None:
        for w in self.walls:
            if tuple(cell) in w.cells:
                return w
        return None


def classify(full: InterfaceFaces, semi: InterfaceFaces | None = None) -> Classified:
    g = full.geometry
    semi = semi if semi is not None else semi_extended(full)
    faces = semi.faces
    pp = face_plane_positions(g)[faces]
    key = pp[:, 0] * (4 * g.n + 16) + pp[:, 1]
    _, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    horiz = g.face_axis[faces] == 3
    is_ceiling = horiz & (counts[inv] == 1)
    ceilings = faces[is_ceiling]
    wall_faces = faces[~is_ceiling]
    in_full = full.mask()
    walls: list[Wall] = []
    if len(wall_faces):
        sub = g.nbr0[wall_faces][:, wall_faces]
        _, lab = connected_components(sub, directed=False)
        for c in range(lab.max() + 1):
            f = wall_faces[lab == c]
            walls.append(Wall(g, np.sort(f[in_full[f]]), np.sort(f[~in_full[f]])))
    walls.sort(key=lambda w: (w.index, min(w.positions)))
    ch = {}
    a = g.face_anchor[ceilings]
    for f, (i, j, k) in zip(ceilings, a):
        ch[(int(i), int(j))] = int(g.face_h2[f])
    return Classified(g, full, semi, ceilings, ch, walls)


def classify_bundle(bundle: InterfaceBundle) -> Classified:
    return classify(bundle.full, bundle.semi)


# -------------------------------------------------------------- standard walls
FaceTuple = tuple  # (axis, (i, j, k))


@dataclass(frozen=True)
class StandardWall:
    A: frozenset
    B: frozenset
    interiors: tuple  # ((cells tuple, relative doubled height), ...)
    displacement: int  # vertical translation applied to reach the reference height

    @cached_property
    def positions(self) -> frozenset:
        out = set()
        for axis, (i, j, k) in list(self.A) + list(self.B):
            x = 2 * (i + 1) if axis == 1 else 2 * i + 1
            y = 2 * (j + 1) if axis == 2 else 2 * j + 1
            out.add((x, y))
        return frozenset(out)

    @cached_property
    def cells(self) -> list[tuple[int, int]]:
        return sorted(((x - 1) // 2, (y - 1) // 2) for x, y in self.positions if x % 2 and y % 2)

    @property
    def index(self) -> tuple[int, int, int]:
        i, j = self.cells[0] if self.cells else min(self.positions)
        return (i, j, 0)

    @property
    def N(self) -> int:
        return len(self.A)

    @property
    def excess(self) -> int:
        return self.N - len(self.cells)

    @cached_property
    def points(self) -> set:
        return closure_points(self.positions)

    def translated(self, dz: int) -> "StandardWall":
        def sh(fs):
            return frozenset((a, (i, j, k + dz)) for a, (i, j, k) in fs)

        return StandardWall(sh(self.A), sh(self.B), self.interiors, self.displacement - dz)

    def to_json_obj(self) -> dict:
        def fl(fs):
            return sorted([int(a), [int(t) for t in x]] for a, x in fs)

        return {
            "index": [int(t) for t in self.index],
            "A": fl(self.A),
            "B": fl(self.B),
            "interiors": [[[[int(t) for t in c] for c in cells], int(rel)] for cells, rel in self.interiors],
            "displacement": int(self.displacement),
            "excess": int(self.excess),
        }


def _exterior_height(regions: PlaneRegions, points: set, height_of) -> int:
    cand = [c for c in neighbor_cells(points) if regions.is_infinite(cell_pos(c))]
    hs = {height_of(c) for c in cand}
    hs.discard(None)
    if len(hs) != 1:
        raise WallGeometryError(f"exterior ceilings at heights {sorted(hs)}")
    return hs.pop()


def standardize(w: Wall, ctx: Classified) -> StandardWall:
    g = ctx.geometry

    def height_of(c):
        i, j = c
        if 0 <= i < g.n and 0 <= j < g.n:
            return ctx.ceiling_h2.get((i, j))
        return 0  # the plane outside the box stays at height 0

    reg = w.regions
    H2 = _exterior_height(reg, w.points, height_of)
    dz = -H2 // 2
    interiors = []
    for lab in reg.finite_labels():
        cells = reg.cells_with_label(lab)
        if not cells:
            continue
        touching = cells_touching(w.points, cells)
        hs = {height_of(c) for c in touching} - {None}
        if len(hs) != 1:
            raise WallGeometryError(f"interior ceilings at heights {sorted(hs)}")
        interiors.append((tuple(cells), hs.pop() - H2))
    interiors.sort()

    def tup(fs):
        out = set()
        for f in fs:
            a, (i, j, k) = g.face_id(int(f))
            out.add((a, (i, j, k + dz)))
        return frozenset(out)

    return StandardWall(tup(w.A), tup(w.B), tuple(interiors), dz)


@dataclass
class WallFamily:
    walls: list[StandardWall]

    def admissibility(self) -> tuple[int, int] | None:
        for a in range(len(self.walls)):
            for b in range(a + 1, len(self.walls)):
                if self.walls[a].points & self.walls[b].points:
                    return (a, b)
        return None

    @property
    def admissible(self) -> bool:
        return self.admissibility() is None

    def to_json(self) -> str:
        return json.dumps({"walls": [w.to_json_obj() for w in self.walls]})


def decompose_walls(ctx: Classified) -> WallFamily:
    return WallFamily([standardize(w, ctx) for w in ctx.walls])


def _depths(n: int, walls) -> list[int]:
    regs = [complement_regions(n, w.positions) for w in walls]
    depth = []
    for b, wb in enumerate(walls):
        d = 0
        for a, ra in enumerate(regs):
            if a != b and all(not ra.is_infinite(p) for p in wb.positions):
                d += 1
        depth.append(d)
    return depth


def reconstruct(family: WallFamily, geom: LatticeGeometry, order_seed: int | None = None) -> InterfaceFaces:
    """The interface whose standard-wall representation is ``family``."""
    bad = family.admissibility()
    if bad is not None:
        raise InadmissibleFamily(*bad)
    n = geom.n
    walls = list(family.walls)
    if order_seed is not None:
        np.random.default_rng(order_seed).shuffle(walls)
    depth = _depths(n, walls)
    order = sorted(range(len(walls)), key=lambda t: (depth[t], walls[t].index, min(walls[t].positions)))
    h2 = np.zeros((n, n), dtype=np.int64)
    covered = np.zeros((n, n), dtype=bool)
    out = [int(f) for f in geom.ring_faces]

    def height_of(c):
        i, j = c
        if 0 <= i < n and 0 <= j < n:
            return None if covered[i, j] else int(h2[i, j])
        return 0

    for t in order:
        w = walls[t]
        reg = complement_regions(n, w.positions)
        H2 = _exterior_height(reg, w.points, height_of)
        dz = H2 // 2
        for axis, (i, j, k) in w.A:
            key = (axis, (i, j, k + dz))
            if not geom.has_face(key):
                raise WallGeometryError(f"face {key} lies outside the slab")
            out.append(geom.face_index(key))
        for cells, rel in w.interiors:
            for c in cells:
                h2[c] = H2 + rel
        for c in w.cells:
            covered[c] = True
    for i in range(n):
        for j in range(n):
            if not covered[i, j]:
                out.append(geom.face_index((3, (i, j, int(h2[i, j]) // 2 - 1))))
    return InterfaceFaces(geom, "full", np.array(out, dtype=np.int64))


def reconstruct_single(std: StandardWall, geom: LatticeGeometry) -> InterfaceFaces:
    return reconstruct(WallFamily([std]), geom)


def validate_standard(std: StandardWall, geom: LatticeGeometry) -> bool:
    """The single-wall interface is a genuine interface whose only wall is ``std``."""
    from .interfaces import full_interface

    iface = reconstruct_single(std, geom)
    omega = EdgeConfigFromFaces(geom, iface.faces)
    again = full_interface(omega)
    if not np.array_equal(again.faces, iface.faces):
        return False
    cl = classify(again)
    if len(cl.walls) != 1:
        return False
    back = standardize(cl.walls[0], cl)
    return back.A == std.A and back.B == std.B and back.interiors == std.interiors


def EdgeConfigFromFaces(geom, faces):
    from .model import EdgeConfig

    return EdgeConfig.from_closed_faces(geom, faces)


# ----------------------------------------------------------------------- groups
@dataclass
class GroupOfWalls:
    members: list[int]
    excess: int


def _cell_counts(w) -> dict:
    """N(f, W) for every cell f of the projection: faces projecting into the closed square."""
    counts = {}
    pos_count: dict = {}
    faces = list(w.A) + list(w.B) if isinstance(w, StandardWall) else None
    if faces is None:
        g = w.geometry
        pp = face_plane_positions(g)
        for f in np.concatenate([w.A, w.B]):
            p = (int(pp[f, 0]), int(pp[f, 1]))
            pos_count[p] = pos_count.get(p, 0) + 1
    else:
        for axis, (i, j, k) in faces:
            x = 2 * (i + 1) if axis == 1 else 2 * i + 1
            y = 2 * (j + 1) if axis == 2 else 2 * j + 1
            pos_count[(x, y)] = pos_count.get((x, y), 0) + 1
    for c in w.cells:
        x, y = cell_pos(c)
        counts[c] = sum(pos_count.get((x + dx, y + dy), 0)
                        for dx, dy in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)))
    return counts


def close(w1, w2) -> bool:
    c1, c2 = _cell_counts(w1), _cell_counts(w2)
    if not c1 or not c2:
        return False
    a = np.array(list(c1.keys()))
    b = np.array(list(c2.keys()))
    ra = np.sqrt(np.array(list(c1.values()), dtype=float))
    rb = np.sqrt(np.array(list(c2.values()), dtype=float))
    d = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return bool(np.any(d < ra[:, None] + rb[None, :]))


def groups(family) -> list[GroupOfWalls]:
    walls = family.walls if hasattr(family, "walls") else list(family)
    k = len(walls)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(k):
        for b in range(a + 1, k):
            if find(a) != find(b) and close(walls[a], walls[b]):
                parent[find(a)] = find(b)
    out: dict[int, list[int]] = {}
    for a in range(k):
        out.setdefault(find(a), []).append(a)
    return [GroupOfWalls(sorted(m), sum(walls[t].excess for t in m)) for m in
            sorted(out.values(), key=min)]


def nesting(family, x) -> list[int]:
    """Indices of walls nesting the column of ``x``, outermost first."""
    walls = family.walls if hasattr(family, "walls") else list(family)
    n = None
    if walls and isinstance(walls[0], Wall):
        n = walls[0].geometry.n
    cell = (int(x[0]), int(x[1]))
    hit = []
    for t, w in enumerate(walls):
        reg = w.regions if isinstance(w, Wall) else complement_regions(n or _family_n(walls), w.positions)
        if not reg.is_infinite(cell_pos(cell)):
            hit.append(t)
    depth = _depths(n or _family_n(walls), [walls[t] for t in hit]) if hit else []
    return [hit[t] for t in sorted(range(len(hit)), key=lambda t: depth[t])]


def _family_n(walls) -> int:
    return max(max(max(c) for c in w.cells) if w.cells else 0 for w in walls) + 2


def nest_region_faces(ctx: Classified, x) -> set[int]:
    """Faces of walls nesting ``x``, of walls interior to them, and their interior ceilings."""
    nest = nesting(ctx.walls, x)
    out: set[int] = set()
    regions = [ctx.walls[t].regions for t in nest]
    for t in nest:
        out.update(int(f) for f in ctx.walls[t].A)
        out.update(int(f) for f in ctx.walls[t].B)
    for w in ctx.walls:
        for reg in regions:
            if all(not reg.is_infinite(p) for p in w.positions):
                out.update(int(f) for f in w.A)
                out.update(int(f) for f in w.B)
                break
    g = ctx.geometry
    a = g.face_anchor[ctx.ceilings]
    for f, (i, j, _) in zip(ctx.ceilings, a):
        if 0 <= i < g.n and 0 <= j < g.n:
            if any(not reg.is_infinite(cell_pos((i, j))) for reg in regions):
                out.add(int(f))
    return out

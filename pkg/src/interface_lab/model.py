"""FK and Potts measures with Dobrushin boundary, cluster counting and coloring.

Boundary model: every box vertex keeps its edges to the exterior, and the
exterior is collapsed into two ghost nodes, TOP (above height 0) and BOTTOM
(below).  Exterior vertical edges crossing height 0 are forced closed.  With
TOP colored red and BOTTOM blue this is exactly the Potts model with those
fixed exterior spins.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .lattice import INTERIOR, LatticeGeometry

RED, BLUE = 1, 2


class NotInDnError(ValueError):
    """Raised when an operation requires TOP and BOTTOM to be disconnected."""


class NonIntegerQError(ValueError):
    """Raised when a coloring is requested for non-integer q."""


@dataclass(frozen=True)
class Params:
    beta: float
    q: float

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if self.q < 1:
            raise ValueError("q must be >= 1")

    @property
    def p(self) -> float:
        return -math.expm1(-self.beta)

    @property
    def integer_q(self) -> bool:
        return float(self.q).is_integer()

    def require_integer_q(self) -> int:
        if not self.integer_q or self.q < 2:
            raise NonIntegerQError(f"coloring needs an integer q >= 2, got {self.q}")
        return int(self.q)


@dataclass
class EdgeConfig:
    """Open/closed flag for every random edge (interior edges, then boundary edges)."""

    geometry: LatticeGeometry
    bits: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.geometry.num_edges,):
            raise ValueError("bit vector does not match geometry")

    @classmethod
    def closed(cls, geometry: LatticeGeometry) -> "EdgeConfig":
        return cls(geometry, np.zeros(geometry.num_edges, dtype=bool))

    @classmethod
    def from_closed_faces(cls, geometry: LatticeGeometry, faces) -> "EdgeConfig":
        """The configuration whose closed edges are exactly the duals of ``faces``."""
        bits = np.ones(geometry.num_edges, dtype=bool)
        for f in faces:
            e = geometry.face_edge[f]
            if e >= 0:
                bits[e] = False
        return cls(geometry, bits)

    def copy(self) -> "EdgeConfig":
        return EdgeConfig(self.geometry, self.bits.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EdgeConfig)
            and self.geometry == other.geometry
            and bool(np.array_equal(self.bits, other.bits))
        )


@dataclass
class SpinConfig:
    """Colors ``1..q`` for box vertices; the exterior is red above and blue below."""

    geometry: LatticeGeometry
    colors: np.ndarray
    q: int = 2

    def __post_init__(self) -> None:
        self.colors = np.asarray(self.colors, dtype=np.int64)


@dataclass
class ClusterIndex:
    """Open clusters of a configuration, ghosts included.

    ``labels`` has one entry per box vertex plus TOP and BOTTOM (last two slots).
    """

    geometry: LatticeGeometry
    labels: np.ndarray
    count: int = field(default=0)

    @classmethod
    def build(cls, omega: EdgeConfig) -> "ClusterIndex":
        g = omega.geometry
        nn = g.num_vertices + 2
        b = omega.bits
        mat = sp.coo_matrix(
            (np.ones(int(b.sum()), dtype=np.int8), (g.edge_u[b], g.edge_v[b])), shape=(nn, nn)
        )
        count, labels = connected_components(mat, directed=False)
        return cls(g, labels, count)

    def same(self, a: int, b: int) -> bool:
        return bool(self.labels[a] == self.labels[b])

    @property
    def top_label(self) -> int:
        return int(self.labels[self.geometry.top_ghost])

    @property
    def bottom_label(self) -> int:
        return int(self.labels[self.geometry.bottom_ghost])


def kappa(omega: EdgeConfig) -> int:
    return ClusterIndex.build(omega).count


def fk_weight(omega: EdgeConfig, params: Params) -> float:
    """Log of ``p^open (1-p)^closed q^kappa`` over all random edges."""
    o = int(omega.bits.sum())
    c = omega.bits.size - o
    k = kappa(omega)
    lp = math.log(params.p) if o else 0.0
    lq = math.log1p(-params.p) if c else 0.0
    return o * lp + c * lq + k * math.log(params.q)


def is_Dn(omega: EdgeConfig) -> bool:
    idx = ClusterIndex.build(omega)
    return idx.top_label != idx.bottom_label


def _connected_without(omega: EdgeConfig, e: int) -> tuple[bool, bool]:
    """(endpoints connected without e, opening e would join TOP and BOTTOM)."""
    g = omega.geometry
    saved = omega.bits[e]
    omega.bits[e] = False
    try:
        idx = ClusterIndex.build(omega)
    finally:
        omega.bits[e] = saved
    u, v = int(g.edge_u[e]), int(g.edge_v[e])
    if idx.same(u, v):
        return True, False
    lu, lv = idx.labels[u], idx.labels[v]
    ghosts = {idx.top_label, idx.bottom_label}
    joins = lu in ghosts and lv in ghosts and lu != lv
    return False, joins


def conditional_edge_prob(omega: EdgeConfig, e: int, params: Params, conditioned: bool = False) -> float:
    """Open probability of edge ``e`` given all other edges.

    Unconditioned: ``p`` if the endpoints are joined without ``e``, else
    ``p/(p+q(1-p))``.  With ``conditioned=True`` the law is the one given D_n, so
    an edge whose opening merges TOP and BOTTOM is closed with probability 1.
    """
    connected, joins = _connected_without(omega, e)
    if connected:
        return params.p
    if conditioned and joins:
        return 0.0
    p, q = params.p, params.q
    return p / (p + q * (1.0 - p))


def color_clusters(omega: EdgeConfig, rng: np.random.Generator, params: Params) -> SpinConfig:
    q = params.require_integer_q()
    idx = ClusterIndex.build(omega)
    if idx.top_label == idx.bottom_label:
        raise NotInDnError("TOP and BOTTOM share an open cluster")
    return _color_from_labels(omega.geometry, idx.labels, idx.count, q, rng)


def _color_from_labels(geom, labels, count, q, rng) -> SpinConfig:
    cl = rng.integers(1, q + 1, size=count)
    cl[labels[geom.top_ghost]] = RED
    cl[labels[geom.bottom_ghost]] = BLUE
    return SpinConfig(geom, cl[labels[: geom.num_vertices]], q)


def exterior_color(geom: LatticeGeometry, e: int) -> int:
    return RED if geom.edge_v[e] == geom.top_ghost else BLUE


def potts_energy(sigma: SpinConfig) -> int:
    """Number of disagreeing pairs, exterior pairs included."""
    g = sigma.geometry
    c = sigma.colors
    ni = g.num_interior_edges
    interior = int(np.count_nonzero(c[g.edge_u[:ni]] != c[g.edge_v[:ni]]))
    ext = np.where(g.edge_v[ni:] == g.top_ghost, RED, BLUE)
    boundary = int(np.count_nonzero(c[g.edge_u[ni:]] != ext))
    return interior + boundary


def spins_compatible(omega: EdgeConfig, sigma: SpinConfig) -> bool:
    """True iff sigma is constant on every open cluster (with ghost colors)."""
    g = omega.geometry
    full = np.concatenate([sigma.colors, [RED, BLUE]])
    b = omega.bits
    return bool(np.all(full[g.edge_u[b]] == full[g.edge_v[b]]))


# ---------------------------------------------------------------- serialization
def dump_config(omega: EdgeConfig, params: Params, sigma: SpinConfig | None = None) -> str:
    g = omega.geometry
    packed = np.packbits(omega.bits.astype(np.uint8), bitorder="little")
    obj = {
        "n": g.n,
        "m": g.m,
        "offset": g.offset,
        "beta": params.beta,
        "q": params.q,
        "num_edges": int(g.num_edges),
        "edges": base64.b64encode(packed.tobytes()).decode("ascii"),
    }
    if sigma is not None:
        obj["spins"] = [int(t) for t in sigma.colors]
    obj["sha256"] = _payload_digest(obj)
    return json.dumps(obj, sort_keys=True)


class ChecksumError(ValueError):
    """A configuration dump does not match its recorded digest."""


def _payload_digest(obj: dict) -> str:
    body = {k: v for k, v in obj.items() if k != "sha256"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def load_config(text: str) -> tuple[EdgeConfig, Params, SpinConfig | None]:
    obj = json.loads(text)
    if "sha256" in obj and obj["sha256"] != _payload_digest(obj):
        raise ChecksumError("configuration dump failed its checksum")
    g = LatticeGeometry(int(obj["n"]), int(obj["m"]), int(obj.get("offset", 0)))
    raw = np.frombuffer(base64.b64decode(obj["edges"]), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[: g.num_edges].astype(bool)
    if len(bits) != g.num_edges:
        raise ValueError("edge bitstring too short for geometry")
    params = Params(float(obj["beta"]), float(obj["q"]))
    sigma = None
    if obj.get("spins") is not None:
        sigma = SpinConfig(g, np.array(obj["spins"]), int(params.q))
    return EdgeConfig(g, bits), params, sigma


def interior_mask(geom: LatticeGeometry) -> np.ndarray:
    return geom.edge_kind == INTERIOR

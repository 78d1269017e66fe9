"""Markov chains for FK conditioned on D_n and the coupled Potts measure.

Two kernels:

* ``heat-bath``: single-edge resampling from the exact conditional given D_n,
  valid for real ``q >= 1``.
* ``sw``: Swendsen-Wang moves for integer ``q``.  Exterior spins are fixed (red
  above, blue below), so bonds never join TOP to BOTTOM and the edge marginal of
  the chain is the conditioned FK law without any rejection step.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from typing import Iterator

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .lattice import LatticeGeometry
from .model import BLUE, RED, EdgeConfig, Params, SpinConfig, is_Dn

CONNECTED, DISCONNECTED, JOINS_GHOSTS = 0, 1, 2


@dataclass
class SamplerConfig:
    params: Params
    geometry: LatticeGeometry
    burn_in: int = 100
    thinning: int = 1
    seed: int = 0
    schedule: str = "sequential"
    kernel: str = "heat-bath"
    init: str = "closed"
    colors: bool = False
    check_dn: bool = False

    def __post_init__(self) -> None:
        if self.schedule not in ("sequential", "random"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.kernel not in ("heat-bath", "sw"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.init not in ("closed", "flat"):
            raise ValueError(f"unknown initial state {self.init!r}")
        if self.kernel == "sw":
            self.params.require_integer_q()
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.thinning < 1 or self.burn_in < 0:
            raise ValueError("thinning must be >= 1 and burn-in >= 0")

    def to_dict(self) -> dict:
        return {
            "beta": self.params.beta,
            "q": self.params.q,
            "n": self.geometry.n,
            "m": self.geometry.m,
            "offset": self.geometry.offset,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "schedule": self.schedule,
            "kernel": self.kernel,
            "init": self.init,
        }


# ------------------------------------------------------------------ graph tables
@dataclass
class GraphTables:
    """CSR adjacency over ``nv`` ordinary nodes plus ghost nodes ``nv`` and ``nv+1``."""

    nv: int
    eu: np.ndarray
    ev: np.ndarray
    ptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray

    @classmethod
    def build(cls, nv: int, eu: np.ndarray, ev: np.ndarray) -> "GraphTables":
        nn = nv + 2
        ne = len(eu)
        src = np.concatenate([eu, ev])
        dst = np.concatenate([ev, eu])
        eid = np.concatenate([np.arange(ne), np.arange(ne)])
        order = np.argsort(src, kind="stable")
        src, dst, eid = src[order], dst[order], eid[order]
        ptr = np.zeros(nn + 1, dtype=np.int64)
        np.add.at(ptr, src + 1, 1)
        ptr = np.cumsum(ptr)
        return cls(nv, eu.astype(np.int64), ev.astype(np.int64), ptr, dst.astype(np.int64),
                   eid.astype(np.int64))

    @classmethod
    def from_geometry(cls, geom: LatticeGeometry) -> "GraphTables":
        return cls.build(geom.num_vertices, geom.edge_u, geom.edge_v)


@nb.njit(cache=True)
def _decide(bits, e, eu, ev, ptr, nbr, eid, nv, mark, stamp, qa, qb):
    """Classify edge ``e`` with ``e`` itself ignored.

    Returns CONNECTED if the endpoints are joined by other open edges,
    JOINS_GHOSTS if they are not joined but one side reaches TOP and the other
    BOTTOM, DISCONNECTED otherwise.  Ghost nodes are terminal.  ``mark`` holds
    ``2*stamp`` (side a) or ``2*stamp+1`` (side b).
    """
    ta = 2 * stamp
    tb = 2 * stamp + 1
    u = eu[e]
    v = ev[e]
    if u == v:
        return 0
    ga = -1
    gb = -1
    ha = 0
    la = 0
    hb = 0
    lb = 0
    if u >= nv:
        ga = u
    else:
        qa[0] = u
        la = 1
    mark[u] = ta
    if v >= nv:
        gb = v
        if ga == gb:
            return 0
    else:
        if mark[v] == ta:
            return 0
        qb[0] = v
        lb = 1
    mark[v] = tb
    done_a = False
    done_b = False
    while True:
        # expand one vertex of side a
        if not done_a:
            if ha == la:
                done_a = True
            else:
                x = qa[ha]
                ha += 1
                for t in range(ptr[x], ptr[x + 1]):
                    f = eid[t]
                    if f == e or not bits[f]:
                        continue
                    y = nbr[t]
                    if y >= nv:
                        if gb == y:
                            return 0
                        ga = y
                        continue
                    if mark[y] == tb:
                        return 0
                    if mark[y] != ta:
                        mark[y] = ta
                        qa[la] = y
                        la += 1
        if not done_b:
            if hb == lb:
                done_b = True
            else:
                x = qb[hb]
                hb += 1
                for t in range(ptr[x], ptr[x + 1]):
                    f = eid[t]
                    if f == e or not bits[f]:
                        continue
                    y = nbr[t]
                    if y >= nv:
                        if ga == y:
                            return 0
                        gb = y
                        continue
                    if mark[y] == ta:
                        return 0
                    if mark[y] != tb:
                        mark[y] = tb
                        qb[lb] = y
                        lb += 1
        if ga >= 0 and gb >= 0 and ga != gb:
            return 2
        if done_a and ga < 0:
            return 1
        if done_b and gb < 0:
            return 1
        if done_a and done_b:
            if ga >= 0 and gb >= 0 and ga != gb:
                return 2
            return 1


@nb.njit(cache=True)
def _sweep(bits, order, rand, pe, q, eu, ev, ptr, nbr, eid, nv, mark, stamp, qa, qb):
    for s in range(order.shape[0]):
        e = order[s]
        stamp += 1
        code = _decide(bits, e, eu, ev, ptr, nbr, eid, nv, mark, stamp, qa, qb)
        p = pe[e]
        if code == 0:
            po = p
        elif code == 1:
            po = p / (p + q * (1.0 - p))
        else:
            po = 0.0
        bits[e] = rand[s] < po
    return stamp


@nb.njit(cache=True)
def _open_prob_table(states, e, pe, q, eu, ev, ptr, nbr, eid, nv, mark, qa, qb):
    """Conditional open probability of edge ``e`` for each packed state."""
    ne = eu.shape[0]
    out = np.empty(states.shape[0])
    bits = np.zeros(ne, dtype=np.bool_)
    stamp = 0
    for s in range(states.shape[0]):
        code_state = states[s]
        for f in range(ne):
            bits[f] = (code_state >> f) & 1
        stamp += 1
        code = _decide(bits, e, eu, ev, ptr, nbr, eid, nv, mark, stamp, qa, qb)
        p = pe[e]
        if code == 0:
            out[s] = p
        elif code == 1:
            out[s] = p / (p + q * (1.0 - p))
        else:
            out[s] = 0.0
    return out


class HeatBath:
    """Single-edge heat bath on a graph with two terminal ghost nodes."""

    def __init__(self, tables: GraphTables, pe: np.ndarray, q: float):
        self.t = tables
        self.pe = np.asarray(pe, dtype=np.float64)
        self.q = float(q)
        nn = tables.nv + 2
        self.mark = np.zeros(nn, dtype=np.int64)
        self.qa = np.zeros(nn, dtype=np.int64)
        self.qb = np.zeros(nn, dtype=np.int64)
        self.stamp = 0

    def classify(self, bits: np.ndarray, e: int) -> int:
        self.stamp += 1
        t = self.t
        return int(_decide(bits, e, t.eu, t.ev, t.ptr, t.nbr, t.eid, t.nv, self.mark, self.stamp,
                           self.qa, self.qb))

    def open_prob(self, bits: np.ndarray, e: int) -> float:
        code = self.classify(bits, e)
        p = self.pe[e]
        return (p, p / (p + self.q * (1 - p)), 0.0)[code]

    def sweep(self, bits: np.ndarray, order: np.ndarray, rand: np.ndarray) -> None:
        t = self.t
        self.stamp = _sweep(bits, order.astype(np.int64), rand, self.pe, self.q, t.eu, t.ev, t.ptr,
                            t.nbr, t.eid, t.nv, self.mark, self.stamp, self.qa, self.qb)

    def open_prob_table(self, states: np.ndarray, e: int) -> np.ndarray:
        t = self.t
        self.mark[:] = 0
        return _open_prob_table(states.astype(np.int64), e, self.pe, self.q, t.eu, t.ev, t.ptr,
                                t.nbr, t.eid, t.nv, self.mark, self.qa, self.qb)


def exact_sweep(kernel: HeatBath, dist: np.ndarray, order) -> np.ndarray:
    """Apply one sweep of the kernel to a distribution over packed edge states."""
    states = np.arange(len(dist), dtype=np.int64)
    dist = np.asarray(dist, dtype=np.float64).copy()
    for e in order:
        bit = 1 << int(e)
        base = states[(states & bit) == 0]
        po = kernel.open_prob_table(base, int(e))
        mass = dist[base] + dist[base | bit]
        dist[base] = mass * (1.0 - po)
        dist[base | bit] = mass * po
    return dist


# ---------------------------------------------------------------------- chains
def heat_bath_step(state: EdgeConfig, e: int, params: Params, rng: np.random.Generator,
                   kernel: HeatBath | None = None) -> EdgeConfig:
    kernel = kernel or HeatBath(GraphTables.from_geometry(state.geometry),
                                np.full(state.geometry.num_edges, params.p), params.q)
    po = kernel.open_prob(state.bits, e)
    state.bits[e] = rng.random() < po
    return state


def flat_config(geom: LatticeGeometry) -> EdgeConfig:
    """All edges open except the vertical edges crossing height 0."""
    bits = np.ones(geom.num_edges, dtype=bool)
    ni = geom.num_interior_edges
    ku = geom.coords[geom.edge_u[:ni], 2]
    kv = geom.coords[geom.edge_v[:ni], 2]
    bits[:ni][(ku == -1) & (kv == 0)] = False
    return EdgeConfig(geom, bits)


class SWKernel:
    def __init__(self, geom: LatticeGeometry, params: Params):
        self.g = geom
        self.q = params.require_integer_q()
        self.p = params.p
        nn = geom.num_vertices + 2
        self.nn = nn

    def color(self, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        g = self.g
        mat = sp.coo_matrix((np.ones(int(bits.sum()), dtype=np.int8), (g.edge_u[bits], g.edge_v[bits])),
                            shape=(self.nn, self.nn))
        count, lab = connected_components(mat, directed=False)
        cl = rng.integers(1, self.q + 1, size=count)
        if lab[g.top_ghost] == lab[g.bottom_ghost]:
            raise RuntimeError("swendsen-wang state left D_n")
        cl[lab[g.top_ghost]] = RED
        cl[lab[g.bottom_ghost]] = BLUE
        return cl[lab]

    def bonds(self, full_colors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        g = self.g
        agree = full_colors[g.edge_u] == full_colors[g.edge_v]
        return agree & (rng.random(g.num_edges) < self.p)


def run_chain(config: SamplerConfig, samples: int | None = None,
              stats: dict | None = None) -> Iterator[tuple[EdgeConfig, SpinConfig | None]]:
    """Yield ``samples`` states (forever if None) after burn-in, every ``thinning`` sweeps."""
    g = config.geometry
    params = config.params
    rng = np.random.Generator(np.random.PCG64(config.seed))
    state = flat_config(g) if config.init == "flat" else EdgeConfig.closed(g)
    bits = state.bits
    stats = stats if stats is not None else {}
    stats.setdefault("sweeps", 0)
    ne = g.num_edges
    q_int = int(params.q) if params.integer_q and params.q >= 2 else None
    if config.kernel == "heat-bath":
        kernel = HeatBath(GraphTables.from_geometry(g), np.full(ne, params.p), params.q)
        seq = np.arange(ne, dtype=np.int64)

        def step():
            order = seq if config.schedule == "sequential" else rng.integers(0, ne, size=ne)
            kernel.sweep(bits, order, rng.random(ne))
    else:
        sw = SWKernel(g, params)
        holder = {"colors": None}

        def step():
            full = holder["colors"]
            if full is None:
                full = sw.color(bits, rng)
            bits[:] = sw.bonds(full, rng)
            holder["colors"] = sw.color(bits, rng)

    emitted = 0
    sweeps = 0
    while samples is None or emitted < samples:
        step()
        sweeps += 1
        stats["sweeps"] = sweeps
        if config.check_dn and not is_Dn(state):
            raise RuntimeError("chain left D_n")
        if sweeps <= config.burn_in or (sweeps - config.burn_in) % config.thinning:
            continue
        sigma = None
        if config.colors:
            if q_int is None:
                params.require_integer_q()
            if config.kernel == "sw":
                full = holder["colors"]
            else:
                full = SWKernel(g, params).color(bits, rng)
            sigma = SpinConfig(g, full[: g.num_vertices].copy(), q_int)
        emitted += 1
        yield EdgeConfig(g, bits.copy()), sigma


def interior_index(omega: EdgeConfig) -> int:
    """Packed index of the interior edges (bit e = edge e)."""
    ni = omega.geometry.num_interior_edges
    b = omega.bits[:ni]
    return int((b.astype(np.int64) << np.arange(ni)).sum())


def write_manifest(path, config: SamplerConfig, counts: dict, started: float) -> dict:
    man = {
        "config": config.to_dict(),
        "seed": config.seed,
        "geometry_hash": config.geometry.geometry_hash(),
        "kappa_convention": "TOP and BOTTOM ghost clusters counted once each",
        "counts": counts,
        "wall_clock_seconds": time.time() - started,
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(man, fh, indent=2, sort_keys=True)
    return man


def manifest_digest(man: dict) -> str:
    core = {k: v for k, v in man.items() if k != "wall_clock_seconds"}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()

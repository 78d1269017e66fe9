"""Exact computations on tiny slabs.

Three independent routes compute FK probabilities:

* ``brute`` enumerates interior edges together with one ghost link per vertex.
  A vertex with ``c`` edges to its ghost only matters through whether any of
  them is open, so that link is open with weight ``1-(1-p)^c``.
* ``cluster`` enumerates interior edges only and sums the ghost links in closed
  form, cluster by cluster.
* ``transfer`` is a layer-by-layer connectivity transfer over the frontier of
  the last ``n^2`` vertices.  It handles boxes far beyond brute-force reach and
  returns the joint law of a few marked edges.
"""

from __future__ import annotations

import builtins
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .lattice import LatticeGeometry
from .model import BLUE, RED, Params

DEFAULT_CAP = 26


class EnumerationTooLarge(ValueError):
    def __init__(self, needed: int, cap: int):
        super().__init__(f"exact enumeration needs {needed} binary variables, cap is {cap}")
        self.needed = needed
        self.cap = cap


def ghost_link_counts(geom: LatticeGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Per vertex: number of boundary edges and whether they go to TOP."""
    ni = geom.num_interior_edges
    c = np.bincount(geom.edge_u[ni:], minlength=geom.num_vertices)
    upper = geom.coords[:, 2] >= 0
    return c, upper


def batch_labels(states: np.ndarray, eu: np.ndarray, ev: np.ndarray, nn: int) -> np.ndarray:
    """Component labels (minimum node index) for a batch of edge states."""
    s = states.shape[0]
    labels = np.tile(np.arange(nn, dtype=np.int32), (s, 1))
    while True:
        changed = False
        for e in range(len(eu)):
            mask = states[:, e]
            if not mask.any():
                continue
            a = labels[mask, eu[e]]
            b = labels[mask, ev[e]]
            mn = np.minimum(a, b)
            if np.any(a != b):
                changed = True
                rows = np.flatnonzero(mask)
                labels[rows, eu[e]] = mn
                labels[rows, ev[e]] = mn
        # pointer jump so labels converge to the component minimum
        labels = np.take_along_axis(labels, labels, axis=1)
        if not changed:
            return labels


def _bits(count: int, n: int, start: int = 0) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


@dataclass
class ExactDistribution:
    """Law of the interior edges.  Index bit ``e`` is the state of interior edge ``e``."""

    geometry: LatticeGeometry
    params: Params
    probs: np.ndarray
    conditioned: bool = False
    partition_log: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def num_edges(self) -> int:
        return self.geometry.num_interior_edges

    def states(self, start: int = 0, count: int | None = None) -> np.ndarray:
        count = len(self.probs) - start if count is None else count
        return _bits(count, self.num_edges, start)

    def prob(self, event: Callable[[np.ndarray], np.ndarray]) -> float:
        """``event`` maps a boolean state batch (S, E) to a boolean vector (S,)."""
        total = 0.0
        chunk = 1 << 16
        for start in range(0, len(self.probs), chunk):
            cnt = min(chunk, len(self.probs) - start)
            total += float(self.probs[start : start + cnt][event(self.states(start, cnt))].sum())
        return total

    def edge_marginal(self, e: int) -> float:
        idx = np.arange(len(self.probs))
        return float(self.probs[(idx >> e) & 1 == 1].sum())


def _require_size(nvars: int, cap: int) -> None:
    if nvars > cap:
        raise EnumerationTooLarge(nvars, cap)


def enumerate(params: Params, geometry: LatticeGeometry, condition: str | None = None,
              cap: int = DEFAULT_CAP, method: str = "cluster") -> ExactDistribution:
    """Exact law of the interior edges under mu (``condition=None``) or mu given D_n."""
    if condition not in (None, "Dn"):
        raise ValueError(f"unknown condition {condition!r}")
    if method == "cluster":
        w_all, w_dn = _cluster_weights(params, geometry, cap)
    elif method == "brute":
        w_all, w_dn = _brute_weights(params, geometry, cap)
    else:
        raise ValueError(method)
    w = w_dn if condition == "Dn" else w_all
    z = w.sum()
    return ExactDistribution(geometry, params, w / z, condition == "Dn", math.log(z),
                             {"method": method})


def _cluster_weights(params: Params, geom: LatticeGeometry, cap: int):
    ni = geom.num_interior_edges
    _require_size(ni, cap)
    nv = geom.num_vertices
    p, q = params.p, params.q
    c, upper = ghost_link_counts(geom)
    l1p = math.log1p(-p) if p < 1 else -np.inf
    tlog = np.where(upper, c, 0) * l1p
    blog = np.where(~upper, c, 0) * l1p
    eu, ev = geom.edge_u[:ni], geom.edge_v[:ni]
    total = 1 << ni
    w_all = np.empty(total)
    w_dn = np.empty(total)
    chunk = 1 << 14
    for start in range(0, total, chunk):
        cnt = min(chunk, total - start)
        st = _bits(cnt, ni, start)
        lab = batch_labels(st, eu, ev, nv)
        rows = np.arange(cnt)
        la = np.zeros((cnt, nv))
        lb = np.zeros((cnt, nv))
        for v in range(nv):
            la[rows, lab[:, v]] += tlog[v]
            lb[rows, lab[:, v]] += blog[v]
        roots = lab == np.arange(nv)
        a = np.exp(la)
        b = np.exp(lb)
        s = 1.0 + (q - 1.0) * a * b
        d = s - (1.0 - a) * (1.0 - b)
        ps = np.where(roots, s, 1.0).prod(axis=1)
        pd = np.where(roots, d, 1.0).prod(axis=1)
        o = st.sum(axis=1)
        base = p ** o * (1.0 - p) ** (ni - o)
        w_all[start : start + cnt] = base * (q * ps + (q * q - q) * pd)
        w_dn[start : start + cnt] = base * q * q * pd
    return w_all, w_dn


def reduced_system(params: Params, geom: LatticeGeometry):
    """Edge lists and open weights of the reduced graph: interior edges plus one
    link per vertex that has boundary edges.  Ghosts are nodes ``nv`` and ``nv+1``."""
    ni = geom.num_interior_edges
    nv = geom.num_vertices
    c, upper = ghost_link_counts(geom)
    linked = np.flatnonzero(c > 0)
    p = params.p
    eu = np.concatenate([geom.edge_u[:ni], linked])
    ev = np.concatenate([geom.edge_v[:ni], np.where(upper[linked], nv, nv + 1)])
    pi = -np.expm1(c[linked] * math.log1p(-p)) if p < 1 else np.ones(len(linked))
    pe = np.concatenate([np.full(ni, p), pi])
    return eu, ev, pe


def reduced_joint(params: Params, geom: LatticeGeometry, condition: str | None = None,
                  cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact law of all reduced variables, packed with interior edges in the low bits."""
    eu, ev, pe = reduced_system(params, geom)
    nvar = len(eu)
    _require_size(nvar, cap)
    nv = geom.num_vertices
    q = params.q
    st = _bits(1 << nvar, nvar)
    lab = batch_labels(st, eu, ev, nv + 2)
    kap = (lab == np.arange(nv + 2)).sum(axis=1)
    w = np.prod(np.where(st, pe, 1.0 - pe), axis=1) * q ** kap.astype(float)
    if condition == "Dn":
        w = np.where(lab[:, nv] != lab[:, nv + 1], w, 0.0)
    return w / w.sum()


def _brute_weights(params: Params, geom: LatticeGeometry, cap: int):
    ni = geom.num_interior_edges
    nv = geom.num_vertices
    c, upper = ghost_link_counts(geom)
    linked = np.flatnonzero(c > 0)
    nl = len(linked)
    _require_size(ni + nl, cap)
    p, q = params.p, params.q
    eu = np.concatenate([geom.edge_u[:ni], linked])
    ev = np.concatenate([geom.edge_v[:ni], np.where(upper[linked], nv, nv + 1)])
    pi = -np.expm1(c[linked] * math.log1p(-p)) if p < 1 else np.ones(nl)
    total = 1 << ni
    w_all = np.zeros(total)
    w_dn = np.zeros(total)
    st_int = _bits(total, ni)
    o = st_int.sum(axis=1)
    base = p ** o * (1.0 - p) ** (ni - o)
    for link in range(1 << nl):
        lb = ((link >> np.arange(nl)) & 1).astype(bool)
        lw = float(np.prod(np.where(lb, pi, 1.0 - pi)))
        if lw == 0.0:
            continue
        st = np.concatenate([st_int, np.tile(lb, (total, 1))], axis=1)
        lab = batch_labels(st, eu, ev, nv + 2)
        kap = (lab == np.arange(nv + 2)).sum(axis=1)
        w = base * lw * q ** kap
        w_all += w
        w_dn += np.where(lab[:, nv] != lab[:, nv + 1], w, 0.0)
    return w_all, w_dn


# ----------------------------------------------------------------- ES coupling
def verify_es_marginals(params: Params, geometry: LatticeGeometry, chunk: int = 4096) -> dict:
    """Double enumeration of the joint edge/spin law.

    The joint weight of (interior edges, spins) is
    ``prod_int [(1-p)1{closed} + p 1{open} delta] * prod_v ((1-p) + p delta(sigma_v, ext))^{c_v}``,
    where each boundary edge has been summed out exactly.
    """
    q = params.require_integer_q()
    g = geometry
    ni = g.num_interior_edges
    nv = g.num_vertices
    p, beta = params.p, params.beta
    c, upper = ghost_link_counts(g)
    ext = np.where(upper, RED, BLUE)
    n_sigma = q ** nv
    sig = np.array(list(itertools.product(range(1, q + 1), repeat=nv)), dtype=np.int64)[:, ::-1]
    eu, ev = g.edge_u[:ni], g.edge_v[:ni]
    agree = sig[:, eu] == sig[:, ev]  # (S, E)
    bfac = np.prod(np.where(sig == ext, 1.0, 1.0 - p) ** c, axis=1)
    n_omega = 1 << ni
    sigma_marg = np.zeros(n_sigma)
    omega_marg = np.zeros(n_omega)
    coupling_ok = True
    for start in range(0, n_omega, chunk):
        cnt = min(chunk, n_omega - start)
        om = _bits(cnt, ni, start)  # (W, E)
        # weight factor per (omega, sigma): prod over edges
        w = np.ones((cnt, n_sigma))
        for e in range(ni):
            open_e = om[:, e][:, None]
            w *= np.where(open_e, p * agree[:, e][None, :], 1.0 - p)
        w *= bfac[None, :]
        sigma_marg += w.sum(axis=0)
        omega_marg[start : start + cnt] = w.sum(axis=1)
        # coupling indicator: positive weight implies sigma constant on open clusters
        pos = w > 0
        for e in range(ni):
            bad = pos & om[:, e][:, None] & ~agree[:, e][None, :]
            if bad.any():
                coupling_ok = False
    sigma_marg /= sigma_marg.sum()
    energy = (~agree).sum(axis=1) + (c[None, :] * (sig != ext)).sum(axis=1)
    potts = np.exp(-beta * energy)
    potts /= potts.sum()
    fk = enumerate(params, g, condition="Dn").probs
    omega_marg /= omega_marg.sum()
    return {
        "sigma_error": float(np.abs(sigma_marg - potts).max()),
        "omega_error": float(np.abs(omega_marg - fk).max()),
        "coupling_ok": coupling_ok,
        "n_sigma": n_sigma,
        "n_omega": n_omega,
    }


# ------------------------------------------------------------------------ FKG
@dataclass
class IncreasingEvent:
    """Union of cylinders ``{all edges of S open}``."""

    cylinders: list[tuple[int, ...]]

    def __call__(self, states: np.ndarray) -> np.ndarray:
        out = np.zeros(states.shape[0], dtype=bool)
        for cyl in self.cylinders:
            out |= states[:, list(cyl)].all(axis=1)
        return out

    def describe(self) -> str:
        return " | ".join("&".join(f"e{e}" for e in cyl) for cyl in self.cylinders)


def random_increasing_event(rng: np.random.Generator, num_edges: int, max_cyl: int = 3,
                            max_size: int = 3) -> IncreasingEvent:
    cyls = []
    for _ in range(int(rng.integers(1, max_cyl + 1))):
        size = int(rng.integers(1, max_size + 1))
        cyls.append(tuple(sorted(int(t) for t in rng.choice(num_edges, size=size, replace=False))))
    return IncreasingEvent(cyls)


def verify_fkg(params: Params, geometry: LatticeGeometry, k: int, rng: np.random.Generator,
               dist: ExactDistribution | None = None) -> dict:
    dist = dist or enumerate(params, geometry)
    states = dist.states()
    probs = dist.probs
    slacks = []
    for _ in range(k):
        a = random_increasing_event(rng, dist.num_edges)
        b = random_increasing_event(rng, dist.num_edges)
        ia, ib = a(states), b(states)
        pa, pb, pab = probs[ia].sum(), probs[ib].sum(), probs[ia & ib].sum()
        slacks.append(float(pab - pa * pb))
    return {"pairs": k, "min_slack": min(slacks), "slacks": slacks,
            "ok": min(slacks) >= -1e-12}


# ------------------------------------------------------------------ transfer
def transfer_joint(params: Params, geom: LatticeGeometry, marked: Sequence[int],
                   condition: str | None = None) -> np.ndarray:
    """Joint law of the marked interior edges, by connectivity transfer.

    Vertices are added in index order; the state records, for the last ``n^2``
    vertices, their cluster labels (``-1`` TOP, ``-2`` BOTTOM), whether TOP and
    BOTTOM are already joined, and the states of the marked edges seen so far.
    Returns an array of length ``2^len(marked)``; bit ``i`` of the index is the
    state of ``marked[i]``.
    """
    n = geom.n
    nv = geom.num_vertices
    p, q = params.p, params.q
    c, upper = ghost_link_counts(geom)
    l1p = math.log1p(-p) if p < 1 else -np.inf
    pi = [(-math.expm1(c[v] * l1p) if c[v] else 0.0) for v in range(nv)]
    mark_pos = {int(e): i for i, e in builtins.enumerate(marked)}
    width = n * n
    # state: (labels tuple for window, merged, marks) -> weight
    states: dict[tuple, float] = {((), False, 0): 1.0}

    def canon(labels):
        mp = {}
        out = []
        for x in labels:
            if x < 0:
                out.append(x)
            else:
                if x not in mp:
                    mp[x] = len(mp)
                out.append(mp[x])
        return tuple(out)

    for v in range(nv):
        i, j, k = geom.vertex_coords(v)
        back = []  # (window offset of neighbor, edge index)
        if i > 0:
            back.append((v - 1, geom.edge_between((i - 1, j, k), (i, j, k))))
        if j > 0:
            back.append((v - n, geom.edge_between((i, j - 1, k), (i, j, k))))
        if k > geom.kmin:
            back.append((v - width, geom.edge_between((i, j, k - 1), (i, j, k))))
        ghost = (-1 if upper[v] else -2) if c[v] else None
        new: dict[tuple, float] = {}
        base_index = max(0, v - width)
        for (labels, merged, marks), w in states.items():
            fresh = max([x for x in labels if x >= 0], default=-1) + 1
            choices = [(u, e) for (u, e) in back]
            nchoice = len(choices) + (1 if ghost is not None else 0)
            for pattern in range(1 << nchoice):
                lab = list(labels) + [fresh]
                wt = w
                mk = marks
                mg = merged
                for bit, (u, e) in builtins.enumerate(choices):
                    is_open = (pattern >> bit) & 1
                    wt *= p if is_open else (1.0 - p)
                    if e in mark_pos and is_open:
                        mk |= 1 << mark_pos[e]
                    if is_open:
                        a = lab[u - base_index]
                        b = lab[-1]
                        lab, mg = _union(lab, a, b, mg)
                if ghost is not None:
                    is_open = (pattern >> len(choices)) & 1
                    wt *= pi[v] if is_open else (1.0 - pi[v])
                    if is_open:
                        lab, mg = _union(lab, lab[-1], ghost, mg)
                if wt == 0.0:
                    continue
                if condition == "Dn" and mg:
                    continue
                if len(lab) > width:
                    gone = lab[0]
                    lab = lab[1:]
                    if gone >= 0 and gone not in lab:
                        wt *= q
                key = (canon(lab), mg, mk)
                new[key] = new.get(key, 0.0) + wt
        states = new
    out = np.zeros(1 << len(marked))
    for (labels, merged, marks), w in states.items():
        free = len({x for x in labels if x >= 0})
        out[marks] += w * q ** free * (q if merged else q * q)
    return out / out.sum()


def _union(lab, a, b, merged):
    if a == b:
        return lab, merged
    if a < 0 and b < 0:
        merged = True
        keep, drop = -1, -2
        lab = [keep if x == drop else x for x in lab]
        return lab, merged
    if b < 0 or (a >= 0 and b >= 0 and b < a):
        a, b = b, a
    # a is the surviving label (ghost if any)
    lab = [a if x == b else x for x in lab]
    return lab, merged


def cluster_joint(params: Params, geom: LatticeGeometry, marked: Sequence[int],
                  condition: str | None = None, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Same quantity as :func:`transfer_joint`, from full enumeration."""
    dist = enumerate(params, geom, condition=condition, cap=cap)
    idx = np.arange(len(dist.probs))
    key = np.zeros(len(idx), dtype=np.int64)
    for i, e in builtins.enumerate(marked):
        key |= ((idx >> e) & 1) << i
    return np.bincount(key, weights=dist.probs, minlength=1 << len(marked))


@dataclass
class LocalEvent:
    """An arbitrary event on the states of a few marked edges, given as a pattern set."""

    marked: tuple[int, ...]
    patterns: frozenset[int]

    def prob(self, joint: np.ndarray) -> float:
        return float(sum(joint[t] for t in self.patterns))


def random_local_events(rng: np.random.Generator, marked: Sequence[int], count: int) -> list[LocalEvent]:
    size = 1 << len(marked)
    out = []
    for _ in range(count):
        k = int(rng.integers(1, size + 1))
        pats = frozenset(int(t) for t in rng.choice(size, size=k, replace=False))
        out.append(LocalEvent(tuple(marked), pats))
    return out


def band_edges(geom: LatticeGeometry, klo: int, khi: int) -> list[int]:
    """Interior edges with both endpoints in layers ``klo..khi``."""
    ni = geom.num_interior_edges
    ku = geom.coords[geom.edge_u[:ni], 2]
    kv = geom.coords[geom.edge_v[:ni], 2]
    return [int(e) for e in np.flatnonzero((ku >= klo) & (kv <= khi) & (ku <= khi) & (kv >= klo))]


def verify_height_shift(params: Params, n: int, m: int, k: int, events: Iterable[LocalEvent]) -> dict:
    """Exact check of ``mu(theta_k A) <= q^2 mu(A)`` for events on marked edges.

    The box ``[-m, m-1]`` is compared with the box shifted by ``k``; the
    split between TOP and BOTTOM stays at height 0.  Edge indices are relative to
    the box, so the same index set describes ``A`` and ``theta_k A``.
    """
    events = list(events)
    marked = sorted({e for ev in events for e in ev.marked})
    base = LatticeGeometry(n, m, 0)
    shifted = LatticeGeometry(n, m, k)
    for ev in events:
        if tuple(ev.marked) != tuple(marked):
            raise ValueError("all events must share the same marked edges")
    j0 = transfer_joint(params, base, marked)
    j1 = transfer_joint(params, shifted, marked)
    rows = []
    q2 = params.q ** 2
    ok = True
    for ev in events:
        a, ta = ev.prob(j0), ev.prob(j1)
        good = ta <= q2 * a * (1 + 1e-12) + 1e-15
        ok &= good
        rows.append({"mu_A": a, "mu_thetaA": ta, "ratio": ta / a if a > 0 else math.inf, "ok": good})
    return {"ok": ok, "events": rows, "max_ratio": max(r["ratio"] for r in rows), "q2": q2}


def tv_distance(empirical: np.ndarray, exact: ExactDistribution | np.ndarray) -> float:
    ex = exact.probs if isinstance(exact, ExactDistribution) else np.asarray(exact)
    emp = np.asarray(empirical, dtype=float)
    if emp.shape != ex.shape:
        raise ValueError("histogram and exact law have different supports")
    s = emp.sum()
    if s > 0 and not math.isclose(s, 1.0):
        emp = emp / s
    return 0.5 * float(np.abs(emp - ex).sum())


def conditional_dichotomy_exhaustive(params: Params, geom: LatticeGeometry, cap: int = DEFAULT_CAP) -> dict:
    """For every interior edge and every configuration of the reduced system, compare the
    weight-ratio conditional with the two-case formula."""
    ni = geom.num_interior_edges
    nv = geom.num_vertices
    c, upper = ghost_link_counts(geom)
    linked = np.flatnonzero(c > 0)
    nl = len(linked)
    _require_size(ni + nl, cap)
    p, q = params.p, params.q
    eu = np.concatenate([geom.edge_u[:ni], linked])
    ev = np.concatenate([geom.edge_v[:ni], np.where(upper[linked], nv, nv + 1)])
    nvar = ni + nl
    worst = 0.0
    checked = 0
    total = 1 << nvar
    chunk = 1 << 15
    p_dis = p / (p + q * (1 - p))
    for start in range(0, total, chunk):
        cnt = min(chunk, total - start)
        st = _bits(cnt, nvar, start)
        lab = batch_labels(st, eu, ev, nv + 2)
        kap = (lab == np.arange(nv + 2)).sum(axis=1)
        for e in range(ni):
            if not st[:, e].any():
                continue
            rows = st[:, e]
            sub = st[rows].copy()
            sub[:, e] = False
            lab0 = batch_labels(sub, eu, ev, nv + 2)
            kap0 = (lab0 == np.arange(nv + 2)).sum(axis=1)
            # ratio of weights: open / (open + closed)
            w1 = p * q ** kap[rows].astype(float)
            w0 = (1 - p) * q ** kap0.astype(float)
            ratio = w1 / (w1 + w0)
            conn = lab0[:, eu[e]] == lab0[:, ev[e]]
            formula = np.where(conn, p, p_dis)
            worst = max(worst, float(np.abs(ratio - formula).max()))
            checked += int(rows.sum())
    return {"max_error": worst, "pairs_checked": checked, "variables": nvar}


# --------------------------------------------------- brute-force shell search
@dataclass
class ShapeTable:
    """Every connected, co-connected vertex set in a small search region.

    ``masks`` packs, per shape, the edges that must be closed (two 64-bit words
    over ``edges``); ``top`` is the highest layer the shape reaches.
    """

    geometry: LatticeGeometry
    x: tuple
    edges: np.ndarray
    masks: np.ndarray
    top: np.ndarray
    connected_count: int


def _region_vertices(geom: LatticeGeometry, x, cols: int, layers: int) -> list[int]:
    out = [geom.vertex_index(x[0], x[1], 0)]
    for k in range(1, layers):
        for i in range(cols):
            for j in range(cols):
                out.append(geom.vertex_index(i, j, k))
    return out


def _vertex_adjacency(geom: LatticeGeometry) -> list[list[int]]:
    ni = geom.num_interior_edges
    adj: list[list[int]] = [[] for _ in range(geom.num_vertices)]
    for u, v in zip(geom.edge_u[:ni], geom.edge_v[:ni]):
        adj[int(u)].append(int(v))
        adj[int(v)].append(int(u))
    return adj


def _connected_subsets(region: list[int], adj: list[list[int]]) -> list[int]:
    """Bitmasks (over ``region`` positions) of connected subsets containing position 0."""
    pos = {v: t for t, v in builtins.enumerate(region)}
    nb = [[pos[u] for u in adj[v] if u in pos] for v in region]
    out = []

    nbm = [sum(1 << u for u in t) for t in nb]

    def grow(cur: int, cand: int, banned: int) -> None:
        out.append(cur)
        while cand:
            low = cand & -cand
            cand ^= low
            t = low.bit_length() - 1
            grow(cur | low, (cand | nbm[t]) & ~(cur | low | banned), banned)
            banned |= low

    grow(1, nbm[0] & ~1, 0)
    return out


def _co_connected(geom: LatticeGeometry, member: np.ndarray, adj, outer: np.ndarray) -> bool:
    rest = ~member
    seen = np.zeros(geom.num_vertices, dtype=bool)
    stack = [int(v) for v in np.flatnonzero(rest & outer)]
    seen[stack] = True
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if rest[u] and not seen[u]:
                seen[u] = True
                stack.append(u)
    return bool(np.all(seen[rest]))


@functools.lru_cache(maxsize=4)
def a_shape_table(geom: LatticeGeometry, x=(1, 1), cols: int = 3, layers: int = 3) -> ShapeTable:
    """All candidate shells around ``x`` inside ``cols x cols`` columns and ``layers`` layers."""
    region = _region_vertices(geom, x, cols, layers)
    adj = _vertex_adjacency(geom)
    subsets = _connected_subsets(region, adj)
    ni = geom.num_interior_edges
    outer = np.zeros(geom.num_vertices, dtype=bool)
    outer[geom.edge_u[ni:]] = True
    exempt = int(geom.edge_between((x[0], x[1], -1), (x[0], x[1], 0)))
    rset = set(region)
    inc = [e for e in range(geom.num_edges) if (int(geom.edge_u[e]) in rset or int(geom.edge_v[e]) in rset)
           and e != exempt]
    if len(inc) > 128:
        raise ValueError("search region too large for the packed table")
    epos = {e: t for t, e in builtins.enumerate(inc)}
    masks, tops = [], []
    for s in subsets:
        member = np.zeros(geom.num_vertices, dtype=bool)
        verts = [region[t] for t in range(len(region)) if s >> t & 1]
        member[verts] = True
        if not _co_connected(geom, member, adj, outer):
            continue
        w = [0, 0]
        for e in inc:
            u, v = int(geom.edge_u[e]), int(geom.edge_v[e])
            inside_u = member[u]
            inside_v = member[v] if v < geom.num_vertices else False
            if inside_u != inside_v:
                t = epos[e]
                w[t // 64] |= 1 << (t % 64)
        masks.append(w)
        tops.append(int(geom.coords[verts, 2].max()))
    return ShapeTable(geom, tuple(x), np.array(inc, dtype=np.int64), np.array(masks, dtype=np.uint64),
                      np.array(tops, dtype=np.int64), len(subsets))


def pack_closed(table: ShapeTable, bits: np.ndarray) -> np.ndarray:
    closed = ~bits[table.edges]
    w = np.zeros(2, dtype=np.uint64)
    for t in np.flatnonzero(closed):
        w[t // 64] |= np.uint64(1) << np.uint64(t % 64)
    return w


def brute_force_A(table: ShapeTable, bits: np.ndarray, h: int, strict: bool = True) -> bool:
    """Existential search: some shape reaching layer ``h-1`` (exactly, if strict) is fully closed off."""
    w = pack_closed(table, bits)
    ok = ((table.masks[:, 0] & w[0]) == table.masks[:, 0]) & ((table.masks[:, 1] & w[1]) == table.masks[:, 1])
    sel = table.top == h - 1 if strict else table.top <= h - 1
    return bool(np.any(ok & sel))


def confined_random_bits(rng: np.random.Generator, geom: LatticeGeometry, closed: float,
                         cols: int = 3) -> np.ndarray:
    """Edges closed independently with probability ``closed``, except that vertices
    outside the first ``cols`` columns keep open exterior links above height 0, so
    no closed-off set can reach them."""
    bits = rng.random(geom.num_edges) >= closed
    ni = geom.num_interior_edges
    u = geom.edge_u[ni:]
    c = geom.coords[u]
    force = ((c[:, 0] >= cols) | (c[:, 1] >= cols)) & (c[:, 2] >= 0)
    bits[ni:][force] = True
    return bits

"""Monte Carlo estimators: event rates, per-increment probabilities, extrema and decorrelation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import norm

from .interfaces import InterfaceBundle, flat_fraction
from .lattice import LatticeGeometry
from .model import BLUE, RED, Params
from .pillars import all_pillar_heights, boundary_distance, event_Acolor, pillar_at
from .sampler import GraphTables, HeatBath, SamplerConfig, SWKernel, flat_config, run_chain

Z95 = float(norm.ppf(0.975))
MC_FLOOR_HITS = 10


def wilson(hits: float, trials: float, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    ph = hits / trials
    den = 1 + z * z / trials
    c = (ph + z * z / (2 * trials)) / den
    r = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if hits == 0 else max(0.0, c - r)
    hi = 1.0 if hits == trials else min(1.0, c + r)
    return lo, hi


def wilson_se(hits: float, trials: float) -> float:
    lo, hi = wilson(hits, trials)
    return (hi - lo) / (2 * Z95)


def variance_inflation(series: np.ndarray, batches: int = 20) -> float:
    """Batch-means estimate of ``var(mean) / (var(x) / len(x))`` for a chain, at least 1.

    Consecutive samples of a Markov chain are correlated; this is the factor by
    which the naive variance of their mean understates the true one.
    """
    x = np.asarray(series, dtype=np.float64)
    size = len(x) // batches
    v = x.var()
    if size < 2 or v == 0:
        return 1.0
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return max(1.0, float(means.var(ddof=1) * size / v))


def batch_means_se(series: np.ndarray, batches: int = 20) -> float:
    x = np.asarray(series, dtype=np.float64)
    size = len(x) // batches
    if size < 1:
        return x.std(ddof=1) / math.sqrt(len(x)) if len(x) > 1 else math.inf
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


@dataclass
class RateEstimate:
    h: int
    event: str
    hits: int
    trials: int
    phat: float
    lo: float
    hi: float
    alpha_hat: float | None
    alpha_lo: float | None
    alpha_hi: float | None
    inflation: float = 1.0

    @classmethod
    def from_counts(cls, h: int, event: str, hits: int, trials: int, inflation: float = 1.0) -> "RateEstimate":
        """Wilson interval on ``trials / inflation`` effective trials."""
        lo, hi = wilson(hits / inflation, trials / inflation)
        ph = hits / trials if trials else 0.0
        if hits > 0:
            a, alo, ahi = -math.log(ph), -math.log(hi), (-math.log(lo) if lo > 0 else math.inf)
        else:
            a, alo, ahi = None, (-math.log(hi) if hi > 0 else math.inf), None
        return cls(h, event, hits, trials, ph, lo, hi, a, alo, ahi, inflation)

    @property
    def per_height(self) -> float | None:
        return None if self.alpha_hat is None else self.alpha_hat / self.h

    @property
    def below_floor(self) -> bool:
        return self.hits < MC_FLOOR_HITS

    def row(self) -> dict:
        return {"kind": self.event, "h": self.h, "hits": self.hits, "trials": self.trials,
                "phat": self.phat, "lo": self.lo, "hi": self.hi,
                "alpha_hat": "" if self.alpha_hat is None else self.alpha_hat, "inflation": self.inflation}


def bulk_columns(geom: LatticeGeometry, h_max: int) -> list[tuple[int, int]]:
    """Columns at distance >= 4 h_max from the lateral boundary."""
    return [(i, j) for i in range(geom.n) for j in range(geom.n)
            if boundary_distance(geom, (i, j)) >= 4 * h_max]


EVENT_KINDS = ("E", "nred", "blue", "bot")


def rate_curve(stream: Iterable, columns: Sequence, h_max: int, kinds: Sequence[str] = ("E",),
               enforce_bulk: bool = True) -> dict[str, list[RateEstimate]]:
    """Hit counts of ``E_h`` (pillar height >= h) or the colored path events per h.

    ``stream`` yields ``(omega, sigma)`` pairs.  Each sample contributes one trial
    per column; tainted samples are skipped.  Intervals account for the chain's
    autocorrelation through the batch-means variance inflation of per-sample hits.
    """
    columns = [tuple(c) for c in columns]
    hits = {k: np.zeros(h_max + 1, dtype=np.int64) for k in kinds}
    series: list = []
    trials = 0
    for omega, sigma in stream:
        if enforce_bulk:
            g = omega.geometry
            bad = [c for c in columns if boundary_distance(g, c) < 4 * h_max]
            if bad:
                raise ValueError(f"columns {bad} are too close to the boundary for h_max={h_max}")
            enforce_bulk = False
        b = InterfaceBundle(omega, sigma)
        if b.components.taint:
            continue
        trials += len(columns)
        before = {k: hits[k].copy() for k in kinds}
        for c in columns:
            hgt = pillar_at(b, c).height
            for k in kinds:
                if k == "E":
                    top = min(max(hgt, 0), h_max)
                    hits[k][1:top + 1] += 1
                elif hgt >= 1:
                    for h in range(1, min(hgt, h_max) + 1):
                        if event_Acolor(b, c, h, k):
                            hits[k][h] += 1
                        else:
                            break
        series.append(np.concatenate([hits[k] - before[k] for k in kinds]))
    per = np.array(series).reshape(len(series), len(kinds), h_max + 1) if series else None
    out = {}
    for t, k in enumerate(kinds):
        out[k] = [RateEstimate.from_counts(h, k, int(hits[k][h]), trials,
                                           variance_inflation(per[:, t, h]) if per is not None else 1.0)
                  for h in range(1, h_max + 1)]
    return out


def rate_bracket(est: RateEstimate, beta: float, C: float = 3.0, slack: float = 0.5) -> dict:
    """Compare the per-height rate with ``[4 beta - C, 4 beta + slack]``."""
    lo, hi = 4 * beta - C, 4 * beta + slack
    a = est.per_height
    return {"alpha_per_h": a, "bracket": (lo, hi), "inside": a is not None and lo <= a <= hi,
            "interval": (est.alpha_lo / est.h if est.alpha_lo is not None else None,
                         est.alpha_hi / est.h if est.alpha_hi is not None else None)}


def submultiplicativity(curve: Sequence[RateEstimate], params: Params, eps: float = 0.0) -> dict:
    """``p(E_2) <= (1+eps)(e^beta+q-1)^3 p(E_1)^2``, judged conservatively on intervals."""
    e1, e2 = curve[0], curve[1]
    const = (1 + eps) * (math.exp(params.beta) + params.q - 1) ** 3
    violated = e2.lo > const * e1.hi ** 2
    return {"constant": const, "lhs_lo": e2.lo, "rhs_hi": const * e1.hi ** 2, "violated": violated}


def m_star_hat(curve: Sequence[RateEstimate], n: int, beta: float) -> int | None:
    """Smallest h whose estimated rate exceeds ``2 log n - beta/2``.

    Heights below the MC floor count as exceeding the threshold only if the
    lower end of their rate interval does.
    """
    thr = 2 * math.log(n) - beta / 2
    for est in curve:
        if est.below_floor:
            if est.alpha_lo is not None and est.alpha_lo > thr:
                return est.h
            continue
        if est.alpha_hat is not None and est.alpha_hat > thr:
            return est.h
    return None


# ------------------------------------------------------- per-increment probs
def closed_forms(params: Params) -> dict[str, float]:
    """Probability that the upper vertex of a trivial increment continues the path."""
    p, q = params.p, params.q
    bot = p / (p + (1 - p) * q)
    rest = (1 - p) * q / (p + (1 - p) * q)
    return {"bot": bot, "nred": bot + rest * (q - 1) / q, "blue": bot + rest / q}


def increment_sites(geom: LatticeGeometry) -> list[tuple[int, int]]:
    return [(i, j) for i in range(0, geom.n, 2) for j in range(0, geom.n, 2) if (i // 2 + j // 2) % 2 == 0]


def per_increment_probs(params: Params, samples: int = 10_000, n: int = 4, m: int = 2, seed: int = 0,
                        burn_in: int = 50, z_tol: float = 3.0) -> dict:
    """Estimate the continuation probabilities on the conditioned measure.

    The upper vertex ``v = (i, j, 0)`` of each site has its four side faces and
    its top face forced closed, so ``[v - e3, v]`` is the only edge that can join
    it to anything: the site is a trivial increment above ``u = v - e3``.  A
    heat-bath chain samples the rest of the configuration; every sweep each site
    whose lower vertex lies in the relevant set contributes one trial.
    """
    q = params.require_integer_q()
    g = LatticeGeometry(n, m)
    sites = increment_sites(g)
    pe = np.full(g.num_edges, params.p)
    links = []
    for i, j in sites:
        v = (i, j, 0)
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1)):
            w = (i + d[0], j + d[1], d[2])
            if g.in_box(*w):
                pe[g.edge_between(v, w)] = 0.0
        for e in np.flatnonzero(g.edge_u[g.num_interior_edges:] == g.vertex_index(*v)):
            pe[g.num_interior_edges + e] = 0.0
        links.append((g.vertex_index(i, j, -1), g.vertex_index(*v), g.edge_between((i, j, -1), v)))
    kernel = HeatBath(GraphTables.from_geometry(g), pe, params.q)
    rng = np.random.Generator(np.random.PCG64(seed))
    bits = flat_config(g).bits
    bits[pe == 0.0] = False
    sw = SWKernel(g, params)
    order = np.arange(g.num_edges, dtype=np.int64)
    counts = {k: [0, 0] for k in ("bot", "nred", "blue")}
    sweeps = 0
    while min(c[1] for c in counts.values()) < samples:
        kernel.sweep(bits, order, rng.random(g.num_edges))
        sweeps += 1
        if sweeps <= burn_in:
            continue
        colors = sw.color(bits, rng)
        nn = g.num_vertices + 2
        mat = coo_matrix((np.ones(int(bits.sum()), dtype=np.int8), (g.edge_u[bits], g.edge_v[bits])),
                         shape=(nn, nn))
        _, lab = connected_components(mat, directed=False)
        bot_lab = lab[g.bottom_ghost]
        for u, v, e in links:
            if lab[u] == bot_lab:
                counts["bot"][1] += 1
                counts["bot"][0] += int(lab[v] == bot_lab)
            if colors[u] != RED:
                counts["nred"][1] += 1
                counts["nred"][0] += int(colors[v] != RED)
            if colors[u] == BLUE:
                counts["blue"][1] += 1
                counts["blue"][0] += int(colors[v] == BLUE)
    target = closed_forms(params)
    out = {"sweeps": sweeps, "q": q, "beta": params.beta, "kinds": {}}
    for k, (hit, tr) in counts.items():
        ph = hit / tr
        se = wilson_se(hit, tr)
        zz = abs(ph - target[k]) / se if se > 0 else (0.0 if ph == target[k] else math.inf)
        out["kinds"][k] = {"hits": hit, "trials": tr, "phat": ph, "target": target[k], "se": se,
                           "z": zz, "ok": zz <= z_tol}
    out["ok"] = all(v["ok"] for v in out["kinds"].values())
    return out


# ------------------------------------------------------------ rate differences
def rate_difference_report(curves: dict[str, list[RateEstimate]], beta: float, q: float,
                           band: tuple[float, float] = (0.5, 2.0)) -> dict:
    """Per-height decrements of the colored events relative to ``E_h``."""
    targets = {"nred": math.exp(-beta), "blue": (q - 1) * math.exp(-beta), "bot": q * math.exp(-beta)}
    rows = []
    for t, e in enumerate(curves["E"]):
        for kind, tgt in targets.items():
            if kind not in curves:
                continue
            a = curves[kind][t]
            if e.hits == 0 or a.hits == 0:
                rows.append({"h": e.h, "kind": kind, "delta": None, "target": tgt, "in_band": None})
                continue
            d = -math.log(a.phat / e.phat) / e.h
            rows.append({"h": e.h, "kind": kind, "delta": d, "target": tgt,
                         "in_band": band[0] <= d / tgt <= band[1]})
    return {"rows": rows, "band": band}


# -------------------------------------------------------------------- extrema
@dataclass
class ExtremaRecord:
    n: int
    Mn: list[int] = field(default_factory=list)
    Mn_prime: list[int] = field(default_factory=list)
    tainted: int = 0
    ordering_violations: int = 0

    @property
    def histogram(self) -> dict[int, int]:
        vals, cnt = np.unique(np.array(self.Mn, dtype=np.int64), return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    @property
    def mode(self) -> int | None:
        hist = self.histogram
        return max(hist, key=lambda k: (hist[k], -k)) if hist else None

    def mode_mass(self, width: int = 1) -> float:
        if not self.Mn:
            return 0.0
        md = self.mode
        return float(np.mean([abs(v - md) <= width for v in self.Mn]))

    @property
    def median(self) -> float | None:
        return float(np.median(self.Mn)) if self.Mn else None

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.Mn)) if self.Mn else None


def interface_extrema(bundle: InterfaceBundle) -> tuple[int, int, int]:
    """``(M_n, M'_n, max height of the bottom interface)`` of one sample."""
    g = bundle.geometry
    heights = all_pillar_heights(bundle)
    Mn = int(max(heights.max(), 0))
    bot = bundle.bot
    bot_max = int(g.face_h2[bot.faces].max()) // 2 if len(bot) else 0
    Mp = int(max(0, -(int(g.face_h2[bot.faces].min()) // 2))) if len(bot) else 0
    return Mn, Mp, bot_max


def rigidity_check(stream: Iterable, threshold: float = 0.9) -> dict:
    fr = [flat_fraction(InterfaceBundle(om).top) for om, _ in stream]
    mean = float(np.mean(fr)) if fr else 0.0
    return {"flat_fraction": mean, "threshold": threshold, "ok": mean >= threshold}


def extrema_samples(config: SamplerConfig, samples: int, record: ExtremaRecord | None = None,
                    rows: list | None = None) -> ExtremaRecord:
    rec = record or ExtremaRecord(config.geometry.n)
    for t, (omega, _) in enumerate(run_chain(config, samples)):
        b = InterfaceBundle(omega)
        taint = b.components.taint
        if taint:
            rec.tainted += 1
        else:
            Mn, Mp, bot_max = interface_extrema(b)
            if Mn < bot_max:
                rec.ordering_violations += 1
            rec.Mn.append(Mn)
            rec.Mn_prime.append(Mp)
        if rows is not None:
            rows.append({"n": config.geometry.n, "seed": config.seed, "sample": t,
                         "Mn": "" if taint else Mn, "Mn_prime": "" if taint else Mp, "taint": int(taint)})
    return rec


def extrema_scan(configs: Sequence[SamplerConfig], samples: int, rows: list | None = None) -> list[ExtremaRecord]:
    return [extrema_samples(c, samples, rows=rows) for c in configs]


def median_nondecreasing(records: Sequence[ExtremaRecord]) -> bool:
    med = [r.median for r in sorted(records, key=lambda r: r.n)]
    return all(a <= b for a, b in zip(med, med[1:]))


# --------------------------------------------------------------- decorrelation
def indicator_matrix(stream: Iterable, h: int = 1) -> tuple[np.ndarray, int]:
    """Per-sample ``E_h`` indicators for every column, shape ``(samples, n, n)``."""
    out = []
    tainted = 0
    for omega, _ in stream:
        b = InterfaceBundle(omega)
        if b.components.taint:
            tainted += 1
            continue
        out.append(all_pillar_heights(b) >= h)
    return np.array(out, dtype=bool), tainted


def covariance_at(ind: np.ndarray, d: int, margin: int = 0) -> tuple[float, float, int]:
    """Covariance of ``E^x`` and ``E^{x + d e1}`` pooled over all admissible pairs.

    The error is the batch-means standard error of the per-sample averages of the
    pooled product moment (pairs within a sample are not independent, nor are
    consecutive samples).  For rare events the joint hits may be absent
    altogether, so it is floored by the Wilson standard error of the joint rate.
    """
    s, n, _ = ind.shape
    a = ind[:, margin:n - margin - d, margin:n - margin].astype(np.float64)
    b = ind[:, margin + d:n - margin, margin:n - margin].astype(np.float64)
    if a.size == 0 or s < 2:
        return 0.0, math.inf, 0
    pa, pb = a.mean(), b.mean()
    per = ((a - pa) * (b - pb)).reshape(s, -1).mean(axis=1)
    cov = float(per.mean())
    err = max(batch_means_se(per), wilson_se(int((a * b).sum()), a.size))
    return cov, err, int(a[0].size)


def decorrelation_report(ind: np.ndarray, distances: Sequence[int], d_min: int = 10, z: float = 3.0,
                         margin: int = 0) -> dict:
    rows = []
    for d in distances:
        cov, err, pairs = covariance_at(ind, d, margin)
        rows.append({"d": d, "cov": cov, "err": err, "pairs": pairs})
    far = [r for r in rows if r["d"] >= d_min]
    ok = all(abs(r["cov"]) <= z * r["err"] for r in far)
    hits = int(ind.sum())
    return {"rows": rows, "ok": ok, "hits": hits, "samples": int(ind.shape[0])}


def translation_check(ind: np.ndarray, x, y, z: float = 3.0) -> dict:
    a = ind[:, x[0], x[1]].astype(float)
    b = ind[:, y[0], y[1]].astype(float)
    diff = a - b
    se = diff.std(ddof=1) / math.sqrt(len(diff)) if len(diff) > 1 else math.inf
    return {"diff": float(diff.mean()), "se": float(se), "ok": abs(diff.mean()) <= z * se or diff.mean() == 0}


# ------------------------------------------------------------------------ CSVs
RATES_FIELDS = ["kind", "h", "hits", "trials", "phat", "lo", "hi", "alpha_hat", "inflation"]
EXTREMA_FIELDS = ["n", "seed", "sample", "Mn", "Mn_prime", "taint"]
DECORR_FIELDS = ["d", "cov", "err"]


def write_csv(path, fields: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_csv(path, fields: Sequence[str] | None = None) -> list[dict]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if fields is not None and rd.fieldnames is not None and list(rd.fieldnames) != list(fields):
            raise ValueError(f"unexpected columns {rd.fieldnames}, wanted {list(fields)}")
        return list(rd)

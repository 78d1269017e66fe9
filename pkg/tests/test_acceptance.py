"""The fifteen acceptance criteria, each printed as one PASS/FAIL line."""
import time
import warnings

import numpy as np
import pytest

from interface_lab import oracle as O
from interface_lab import pillars as P
from interface_lab import stats as S
from interface_lab import walls as W
from interface_lab.cli import a_h_agreement, height_shift_events, sampler_tv
from interface_lab.interfaces import InterfaceBundle
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import Params
from interface_lab.sampler import SamplerConfig, run_chain

pytestmark = pytest.mark.acceptance

BLOCK = LatticeGeometry(2, 1)  # 2x2x2 vertices


def _sw(beta, q, n, m, seed, burn_in=100, thinning=1, colors=False):
    return SamplerConfig(Params(beta, q), LatticeGeometry(n, m), burn_in=burn_in, thinning=thinning,
                         seed=seed, kernel="sw", init="flat", colors=colors)


def test_01_edwards_sokal_marginals(verdict):
    t0 = time.time()
    errs = {}
    coupled = True
    for q in (2, 3):
        r = O.verify_es_marginals(Params(1.0, q), BLOCK)
        errs[q] = max(r["sigma_error"], r["omega_error"])
        coupled &= r["coupling_ok"]
    dt = time.time() - t0
    ok = max(errs.values()) < 1e-10 and coupled and dt < 60
    assert verdict(1, ok, f"max error {max(errs.values()):.2e}, {dt:.1f}s")


def test_02_conditional_dichotomy(verdict):
    worst = max(O.conditional_dichotomy_exhaustive(Params(1.0, q), BLOCK)["max_error"] for q in (1.5, 2.0, 3.0))
    assert verdict(2, worst < 1e-12, f"max error {worst:.2e}")


def test_03_fkg(verdict):
    rng = np.random.default_rng(3)
    slack = {q: O.verify_fkg(Params(1.0, q), BLOCK, 200, rng)["min_slack"] for q in (1.0, 1.5, 2.0, 3.0)}
    worst = min(slack.values())
    assert verdict(3, worst >= -1e-12, f"min slack {worst:.3e} over 4x200 pairs")


def test_04_height_shift(verdict):
    events = height_shift_events(4, count=50)
    rows = [O.verify_height_shift(Params(1.0, q), 2, 3, 1, events) for q in (2.0, 3.0)]
    ok = all(r["ok"] for r in rows) and all(len(r["events"]) == 50 for r in rows)
    worst = max(r["max_ratio"] / r["q2"] for r in rows)
    assert verdict(4, ok, f"max ratio / q^2 = {worst:.3f}")


def test_05_sampler_tv(verdict):
    tv = sampler_tv(1_000_000, 5)
    c = SamplerConfig(Params(1.0, 2.0), BLOCK, burn_in=10, seed=5)
    a = [om.bits.copy() for om, _ in run_chain(c, 500)]
    b = [om.bits.copy() for om, _ in run_chain(c, 500)]
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    assert verdict(5, tv < 0.02 and same, f"TV {tv:.4f} after 1e6 sweeps, deterministic={same}")


def test_06_ordering_and_containments(verdict):
    bad = 0
    count = 0
    for om, sigma in run_chain(_sw(2.0, 3.0, 8, 8, 6, colors=True), 1000):
        cs = InterfaceBundle(om, sigma).components
        count += 1
        ok = (cs.ordering_holds() and np.all(cs.V_top <= cs.Vh_top) and np.all(cs.V_bot <= cs.Vh_bot)
              and np.all(cs.V_red <= cs.Vh_red) and np.all(cs.V_blue <= cs.Vh_blue)
              and np.all(cs.V_top <= cs.V_red) and np.all(cs.V_bot <= cs.V_blue)
              and not np.any(cs.Vh_top & cs.Vh_bot))
        bad += not ok
    assert verdict(6, bad == 0 and count == 1000, f"{bad} violations in {count} samples")


def test_07_wall_bijection(verdict):
    done = skipped = walls = mism = ineq_bad = 0
    for om, _ in run_chain(_sw(2.0, 3.0, 8, 8, 7, thinning=2), None):
        b = InterfaceBundle(om)
        if b.taint:
            skipped += 1
            continue
        ctx = W.classify_bundle(b)
        fam = W.decompose_walls(ctx)
        walls += len(fam.walls)
        mism += W.reconstruct(fam, om.geometry).face_set() != b.full.face_set()
        for w in ctx.walls:
            li = w.wall_inequalities()
            ineq_bad += not (li["N>=14/13 rho"] and li["N>=|W|/5"])
        done += 1
        if done == 1000:
            break
    ok = mism == 0 and ineq_bad == 0
    assert verdict(7, ok, f"{done} interfaces ({skipped} tainted skipped), {walls} walls, "
                          f"{mism} round-trip mismatches, {ineq_bad} inequality failures")


def _increment_violations(bundle, x=None):
    hs = P.all_pillar_heights(bundle)
    cols = [x] if x is not None else list(zip(*np.nonzero(hs > 0)))
    seen = bad = 0
    for c in cols:
        for inc in P.pillar_at(bundle, c).increments:
            if not inc.trivial:
                seen += 1
                bad += len(inc.faces) > 5 * inc.excess + 8
    return seen, bad


def test_08_increment_bound(verdict):
    seen = bad = 0
    for beta in (1.5, 1.7):
        for om, _ in run_chain(_sw(beta, 2.0, 8, 6, 8), 2000):
            b = InterfaceBundle(om)
            if b.components.taint:
                continue
            s, v = _increment_violations(b)
            seen += s
            bad += v
    sampled = seen
    rng = np.random.default_rng(8)
    for _ in range(30):
        _, om, x, _ = P.random_iso_fixture(rng, 16, 20, 16)
        s, v = _increment_violations(InterfaceBundle(om), x)
        seen += s
        bad += v
    assert verdict(8, bad == 0 and sampled > 0,
                   f"{seen} non-trivial increments ({sampled} sampled), {bad} violations")


def test_09_A_decision_procedure(verdict):
    r = a_h_agreement(10_000, 9)
    assert verdict(9, r["ok"], f"{r['configs']} configs x h<=3 x strict/non-strict, "
                               f"{len(r['mismatches'])} mismatches, {r['positives']} positives")


def test_10_per_increment_closed_forms(verdict):
    r = S.per_increment_probs(Params(2.0, 3.0), samples=10_000, seed=10)
    z = {k: round(v["z"], 2) for k, v in r["kinds"].items()}
    trials = min(v["trials"] for v in r["kinds"].values())
    assert verdict(10, r["ok"] and trials >= 10_000, f"z-scores {z}, min trials {trials}")


def test_11_rate_bracket(verdict):
    beta = 1.5
    g = LatticeGeometry(8, 4)
    cols = S.bulk_columns(g, 1)
    curve = S.rate_curve(run_chain(_sw(beta, 2.0, 8, 4, 11, thinning=5), 40_000), cols, 1)["E"]
    r = S.rate_bracket(curve[0], beta)
    lo, hi = r["interval"]
    detail = (f"alpha_1 = {r['alpha_per_h']:.3f} [{lo:.3f}, {hi:.3f}] vs bracket "
              f"[{r['bracket'][0]}, {r['bracket'][1]}], {curve[0].hits}/{curve[0].trials} hits, "
              f"variance inflation {curve[0].inflation:.1f}")
    verdict(11, r["inside"], detail, soft=True)
    if not r["inside"]:
        warnings.warn(f"rate bracket missed: {detail}")


def _iso_family(count, seed, bumps=False):
    """Random isolated-pillar fixtures; with ``bumps`` each also gets a perturbed copy
    carrying 1-3 small walls close to the pillar."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        g, om, x, layers = P.random_iso_fixture(rng, 16, 20, 16)
        h0 = min([k for k, v in enumerate(layers) if v != (0, 0, 1, 1)] + [15])
        near = None
        if bumps:
            regions = [P.stacked_pillar(x, layers)]
            for _ in range(int(rng.integers(1, 4))):
                while True:
                    a, c = (int(t) for t in rng.integers(1, g.n - 2, size=2))
                    if 2 <= P.cell_distance((a, c), x) <= 5:
                        break
                regions.append([(a, c, 0)] + ([(a + 1, c, 0)] if rng.random() < 0.5 else []))
            near = InterfaceBundle(P.config_from_regions(g, regions))
        yield InterfaceBundle(om), x, h0, near


def _phi_iso_outcome(b, x, h):
    """'ok', 'diagnostic' or 'silent' (post-condition violated without a diagnostic)."""
    try:
        r = P.phi_iso(b, x, 1, h)
    except P.PhiDiagnostic:
        return "diagnostic"
    if r.identity:
        return "ok" if P.membership_iso(b, x, 1, h).value else "silent"
    L = r.ledger
    good = L["in_Iso"] and L["in_E"] and L["column_bound"] and L["spine_bound"] and L["well_defined"]
    good &= P.membership_iso(r.bundle, x, 1, h).value
    return "ok" if good else "silent"


def test_12_straightening_maps(verdict):
    incr_bad = moved = 0
    iso = {"ok": 0, "diagnostic": 0, "silent": 0}
    for b, x, h0, near in _iso_family(100, 12, bumps=True):
        r = P.phi_incr(b, x, 1, 16, 0, h0)
        moved += not r.identity
        ok = (P.membership_incr(r.bundle, x, 0, h0).value and P.event_E(r.bundle, x, 16).value
              and P.membership_iso(r.bundle, x, 1, 16).value)
        if not r.identity:
            L = r.ledger
            ok &= L["claim_bound"] and L["well_defined"] and L["m_IJ"] == L["removed_excess"]
        incr_bad += not ok
        iso[_phi_iso_outcome(b, x, 16)] += 1
        iso[_phi_iso_outcome(near, x, 16)] += 1
    ok = incr_bad == 0 and iso["silent"] == 0
    assert verdict(12, ok, f"100 fixtures ({moved} straightened): {incr_bad} Incr failures; "
                           f"Phi_Iso on 200 inputs: {iso}")


def test_13_split_concat(verdict):
    trips = bad = incl_bad = 0
    fixtures = [(b, x) for b, x, _, _ in _iso_family(30, 13)]
    for h in (5, 9, 14):
        g = LatticeGeometry(10, h + 4)
        fixtures.append((InterfaceBundle(P.config_from_regions(g, [P.column((4, 4), h)])), (4, 4)))
    for b, x in fixtures:
        p = P.pillar_at(b, x)
        for h1 in range(1, p.height):
            h2 = p.height - h1
            if not P.membership_omega(b, x, 1, h1, h2):
                continue
            incl_bad += not P.membership_omega(b, x, 1, h1 + h2).value
            pb, pt = P.split(p, h1, h2, 1)
            trips += 1
            bad += not P.concat(pb, pt).same_as(p)
    assert verdict(13, bad == 0 and incl_bad == 0 and trips > 0,
                   f"{trips} splits, {bad} inexact round trips, {incl_bad} inclusion failures")


def test_14_extrema_concentration(verdict):
    t0 = time.time()
    main = S.extrema_samples(_sw(2.0, 3.0, 16, 12, 14, thinning=2), 1000)
    mass = main.mode_mass(1)
    recs = [S.extrema_samples(_sw(2.0, 3.0, n, 12, 140 + n, thinning=2), k) for n, k in ((8, 400), (32, 200))]
    recs.append(main)
    mono = S.median_nondecreasing(recs)
    med = {r.n: r.median for r in sorted(recs, key=lambda r: r.n)}
    ok = mass >= 0.85 and mono and main.ordering_violations == 0
    assert verdict(14, ok, f"n=16 mode {main.mode} mass(+-1) {mass:.3f}, medians {med}, "
                           f"{time.time() - t0:.0f}s")


def test_15_decorrelation(verdict):
    ind, tainted = S.indicator_matrix(run_chain(_sw(2.0, 3.0, 24, 8, 15, thinning=2), 2000))
    rep = S.decorrelation_report(ind, [1, 2, 4, 10, 12, 14, 16], d_min=10, z=3.0)
    far = [r for r in rep["rows"] if r["d"] >= 10]
    worst = max(abs(r["cov"]) / r["err"] for r in far if r["err"] > 0)
    assert verdict(15, rep["ok"] and rep["hits"] >= S.MC_FLOOR_HITS,
                   f"max |cov|/err at d>=10 = {worst:.2f}, {rep['hits']} hits in "
                   f"{rep['samples']} samples ({tainted} tainted)")

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interface_lab import oracle as O
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import EdgeConfig, Params
from interface_lab.pillars import check_A_witness, event_A

P_DN_GOLDEN = 0.04134921847910196  # n=2, m=1, q=2, beta=1; cluster and brute routes agree


def test_q1_half_is_uniform(g21):
    d = O.enumerate(Params(math.log(2), 1.0), g21)
    assert np.allclose(d.probs, 1 / 4096, atol=1e-15)


def test_q1_edge_marginal(g21):
    pr = Params(0.7, 1.0)
    d = O.enumerate(pr, g21)
    assert d.edge_marginal(3) == pytest.approx(pr.p, abs=1e-12)


@pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("cond", [None, "Dn"])
def test_cluster_and_brute_routes_agree(g21, q, cond):
    pr = Params(1.0, q)
    a = O.enumerate(pr, g21, cond)
    b = O.enumerate(pr, g21, cond, method="brute")
    assert np.abs(a.probs - b.probs).max() < 1e-13


def test_dn_probability_golden(g21, params_q2):
    a = O.enumerate(params_q2, g21, "Dn").partition_log
    b = O.enumerate(params_q2, g21).partition_log
    assert math.exp(a - b) == pytest.approx(P_DN_GOLDEN, rel=1e-12)


def test_enumeration_cap():
    with pytest.raises(O.EnumerationTooLarge):
        O.enumerate(Params(1.0, 2.0), LatticeGeometry(4, 1))


@pytest.mark.parametrize("offset", [0, 1])
def test_transfer_matches_cluster_route(params_q2, offset):
    g = LatticeGeometry(2, 1, offset)
    mk = [0, 3, 5, 11]
    for cond in (None, "Dn"):
        a = O.transfer_joint(params_q2, g, mk, cond)
        b = O.cluster_joint(params_q2, g, mk, cond)
        assert np.abs(a - b).max() < 1e-12


def test_es_marginals_q2(g21):
    r = O.verify_es_marginals(Params(1.0, 2), g21)
    assert r["sigma_error"] < 1e-10 and r["omega_error"] < 1e-10 and r["coupling_ok"]


def test_es_marginals_decoupled_limit(g21):
    r = O.verify_es_marginals(Params(0.0, 2), g21)
    assert r["sigma_error"] < 1e-12 and r["omega_error"] < 1e-12


def test_fkg_event_with_itself(g21, params_q2):
    d = O.enumerate(params_q2, g21)
    ev = O.IncreasingEvent([(2,)])
    pa = d.prob(ev)
    assert d.prob(lambda s: ev(s) & ev(s)) - pa * pa >= 0


def test_fkg_random_pairs(g21, params_q2):
    r = O.verify_fkg(params_q2, g21, 200, np.random.default_rng(0))
    assert r["ok"] and r["min_slack"] >= -1e-12


def test_height_shift_single_edge():
    g = LatticeGeometry(2, 3)
    e = O.band_edges(g, 0, 0)[0]
    ev = O.LocalEvent((e,), frozenset({1}))
    full = O.LocalEvent((e,), frozenset({0, 1}))
    r = O.verify_height_shift(Params(1.0, 2.0), 2, 3, 1, [ev])
    assert r["ok"]
    assert O.verify_height_shift(Params(1.0, 2.0), 2, 3, 1, [full])["events"][0]["ratio"] == pytest.approx(1.0)


def test_height_shift_q1_invariance():
    g = LatticeGeometry(2, 3)
    mk = O.band_edges(g, 0, 0)[:3]
    ev = O.random_local_events(np.random.default_rng(2), mk, 5)
    r = O.verify_height_shift(Params(1.0, 1.0), 2, 3, 1, ev)
    assert r["ok"] and r["max_ratio"] <= 1 + 1e-9


def test_tv_distance_extremes(g21, params_q2):
    d = O.enumerate(params_q2, g21)
    assert O.tv_distance(d.probs, d) == pytest.approx(0.0)
    a = np.zeros(4)
    a[0] = 1
    b = np.zeros(4)
    b[1] = 1
    assert O.tv_distance(a, b) == pytest.approx(1.0)


def test_conditional_dichotomy_exact(g21, params_q2):
    r = O.conditional_dichotomy_exhaustive(params_q2, g21)
    assert r["max_error"] < 1e-12


# ----------------------------------------------------------- shell search oracle
def _count_connected_slab_sets():
    """Independent count: subsets of the two 3x3 layers above x, connected through (1,1,1)."""
    cells = [(i, j, k) for k in (1, 2) for i in range(3) for j in range(3)]
    pos = {c: t for t, c in enumerate(cells)}
    nb = [[pos[d] for d in ((i + 1, j, k), (i - 1, j, k), (i, j + 1, k), (i, j - 1, k), (i, j, 3 - k))
           if d in pos] for i, j, k in cells]
    root = pos[(1, 1, 1)]
    total = 1  # {x}
    for mask in range(1, 1 << len(cells)):
        if not mask >> root & 1:
            continue
        seen = 1 << root
        stack = [root]
        while stack:
            t = stack.pop()
            for u in nb[t]:
                b = 1 << u
                if mask & b and not seen & b:
                    seen |= b
                    stack.append(u)
        total += seen == mask
    return total


@pytest.fixture(scope="module")
def shape_table():
    return O.a_shape_table(LatticeGeometry(4, 3))


def test_shape_table_count(shape_table):
    assert shape_table.connected_count == _count_connected_slab_sets()
    assert len(shape_table.masks) <= shape_table.connected_count


def test_single_vertex_witness(shape_table):
    g = shape_table.geometry
    om = EdgeConfig(g, np.ones(g.num_edges, dtype=bool))
    x = (1, 1, 0)
    for f in [(1, (0, 1, 0)), (1, (1, 1, 0)), (2, (1, 0, 0)), (2, (1, 1, 0)), (3, (1, 1, 0))]:
        om.bits[g.face_edge[g.face_index(f)]] = False
    assert O.brute_force_A(shape_table, om.bits, 1)
    r = event_A(om, x, 1)
    assert r.value and check_A_witness(om, x, 1, r.witness["witness"])


@given(st.integers(0, 2**31), st.floats(0.3, 0.9))
def test_procedure_matches_brute_force(shape_table, seed, closed):
    g = shape_table.geometry
    bits = O.confined_random_bits(np.random.default_rng(seed), g, closed)
    om = EdgeConfig(g, bits)
    for h in (1, 2, 3):
        for strict in (True, False):
            r = event_A(om, (1, 1), h, strict)
            assert r.value == O.brute_force_A(shape_table, bits, h, strict)
            if r.value:
                assert check_A_witness(om, (1, 1), h, r.witness["witness"], strict)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from interface_lab.lattice import LatticeGeometry
from interface_lab.model import (
    BLUE,
    RED,
    ChecksumError,
    EdgeConfig,
    NonIntegerQError,
    NotInDnError,
    Params,
    SpinConfig,
    color_clusters,
    conditional_edge_prob,
    dump_config,
    fk_weight,
    is_Dn,
    kappa,
    load_config,
    potts_energy,
    spins_compatible,
)
from interface_lab.sampler import flat_config


def random_config(g, seed, p=0.5):
    rng = np.random.default_rng(seed)
    return EdgeConfig(g, rng.random(g.num_edges) < p)


def test_all_closed_weight(g21, params_q2):
    om = EdgeConfig.closed(g21)
    assert kappa(om) == 10
    expected = g21.num_edges * math.log1p(-params_q2.p) + 10 * math.log(2)
    assert fk_weight(om, params_q2) == pytest.approx(expected, abs=1e-12)


def test_q1_weight_ignores_clusters(g21):
    a = EdgeConfig.closed(g21)
    b = a.copy()
    b.bits[0] = True
    pr = Params(0.7, 1.0)
    assert fk_weight(b, pr) - fk_weight(a, pr) == pytest.approx(math.log(pr.p / (1 - pr.p)))


@given(st.integers(0, 2**31), st.integers(0, 35))
def test_flip_ratio(seed, e):
    g = LatticeGeometry(2, 1)
    pr = Params(0.8, 2.0)
    om = random_config(g, seed)
    om.bits[e] = False
    up = om.copy()
    up.bits[e] = True
    dk = kappa(up) - kappa(om)
    assert dk in (0, -1)
    ratio = fk_weight(up, pr) - fk_weight(om, pr)
    assert ratio == pytest.approx(math.log(pr.p / (1 - pr.p)) + dk * math.log(2))


def test_pendant_edge_probability():
    g = LatticeGeometry(2, 1)
    om = EdgeConfig.closed(g)
    pr = Params(math.log(2), 2.0)
    assert pr.p == pytest.approx(0.5)
    assert conditional_edge_prob(om, 0, pr) == pytest.approx(1 / 3)
    assert conditional_edge_prob(om, 0, Params(math.log(2), 1.0)) == pytest.approx(0.5)


def test_connected_edge_probability():
    g = LatticeGeometry(2, 1)
    om = EdgeConfig(g, np.ones(g.num_edges, dtype=bool))
    pr = Params(1.0, 3.0)
    assert conditional_edge_prob(om, 0, pr) == pytest.approx(pr.p)


def test_dn_examples(g42):
    assert is_Dn(EdgeConfig.closed(g42))
    assert is_Dn(flat_config(g42))
    om = flat_config(g42)
    om.bits[g42.edge_between((0, 0, -1), (0, 0, 0))] = True
    assert not is_Dn(om)


def test_coloring_requires_dn(g42):
    om = EdgeConfig(g42, np.ones(g42.num_edges, dtype=bool))
    with pytest.raises(NotInDnError):
        color_clusters(om, np.random.default_rng(0), Params(1.0, 2.0))
    with pytest.raises(NonIntegerQError):
        color_clusters(flat_config(g42), np.random.default_rng(0), Params(1.0, 1.5))


def test_flat_coloring_deterministic(g42):
    s = color_clusters(flat_config(g42), np.random.default_rng(1), Params(1.0, 3.0))
    upper = g42.coords[:, 2] >= 0
    assert np.all(s.colors[upper] == RED) and np.all(s.colors[~upper] == BLUE)


def test_free_vertex_color_uniform(g42):
    om = flat_config(g42)
    v = g42.vertex_index(1, 1, 0)
    for w in range(g42.num_edges):
        if v in (g42.edge_u[w], g42.edge_v[w]):
            om.bits[w] = False
    rng = np.random.default_rng(7)
    counts = np.bincount([color_clusters(om, rng, Params(1.0, 3.0)).colors[v] for _ in range(10_000)],
                         minlength=4)[1:]
    assert chisquare(counts).pvalue > 1e-3


@given(st.integers(0, 2**31))
def test_colors_constant_on_clusters(seed):
    g = LatticeGeometry(4, 2)
    rng = np.random.default_rng(seed)
    om = flat_config(g)
    om.bits &= rng.random(g.num_edges) < 0.7
    s = color_clusters(om, rng, Params(1.0, 3.0))
    assert spins_compatible(om, s)


def test_potts_energy_all_red(g21):
    s = SpinConfig(g21, np.full(g21.num_vertices, RED), 2)
    assert potts_energy(s) == 12


def test_dump_roundtrip_and_checksum(g42):
    om = random_config(g42, 3)
    text = dump_config(om, Params(1.0, 2.0))
    back, pr, _ = load_config(text)
    assert back == om and pr == Params(1.0, 2.0)
    bad = text.replace('"beta": 1.0', '"beta": 1.5')
    with pytest.raises(ChecksumError):
        load_config(bad)

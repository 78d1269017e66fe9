import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interface_lab import oracle as O
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import EdgeConfig, Params, is_Dn
from interface_lab.sampler import (GraphTables, HeatBath, SamplerConfig, exact_sweep, flat_config,
                                   manifest_digest, run_chain, write_manifest)


def _take(cfg, k):
    return [om.bits.copy() for om, _ in run_chain(cfg, k)]


def _kernel(g, pr):
    return HeatBath(GraphTables.from_geometry(g), np.full(g.num_edges, pr.p), pr.q)


# 3 sites plus TOP (3) and BOTTOM (4) ghosts
SMALL_EU = np.array([0, 1, 0, 3, 3, 4, 4, 2], dtype=np.int64)
SMALL_EV = np.array([1, 2, 2, 0, 1, 2, 1, 1], dtype=np.int64)


def _small_joint(p, q):
    ne = len(SMALL_EU)
    w = np.zeros(1 << ne)
    for s in range(1 << ne):
        parent = list(range(5))

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a

        for e in range(ne):
            if s >> e & 1:
                parent[find(SMALL_EU[e])] = find(SMALL_EV[e])
        if find(3) == find(4):
            continue
        k = len({find(a) for a in range(5)})
        o = bin(s).count("1")
        w[s] = p ** o * (1 - p) ** (ne - o) * q ** k
    return w / w.sum()


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0])
def test_conditioned_law_is_stationary(q):
    p = 0.6
    tables = GraphTables.build(3, SMALL_EU, SMALL_EV)
    kern = HeatBath(tables, np.full(len(SMALL_EU), p), q)
    law = _small_joint(p, q)
    out = exact_sweep(kern, law, range(len(SMALL_EU)))
    assert np.abs(out - law).max() < 1e-14
    single = exact_sweep(kern, law, [5])
    assert np.abs(single - law).max() < 1e-14


def test_flat_config_in_dn():
    g = LatticeGeometry(4, 3)
    om = flat_config(g)
    assert is_Dn(om)
    assert not is_Dn(EdgeConfig(g, np.ones(g.num_edges, dtype=bool)))


@pytest.mark.parametrize("kernel,q", [("heat-bath", 1.5), ("sw", 3.0)])
def test_same_seed_same_chain(kernel, q):
    g = LatticeGeometry(4, 2)
    mk = lambda s: SamplerConfig(Params(1.2, q), g, burn_in=3, seed=s, kernel=kernel, init="flat")
    a, b, c = _take(mk(7), 5), _take(mk(7), 5), _take(mk(8), 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))


@settings(deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["heat-bath", "sw"]), st.floats(0.3, 2.5))
def test_chain_never_leaves_dn(seed, kernel, beta):
    g = LatticeGeometry(4, 2)
    cfg = SamplerConfig(Params(beta, 2.0), g, burn_in=0, seed=seed, kernel=kernel,
                        init="flat" if kernel == "sw" else "closed", check_dn=True)
    for om, _ in run_chain(cfg, 10):
        assert is_Dn(om)


def test_config_validation(g21):
    pr = Params(1.0, 2.5)
    with pytest.raises(ValueError):
        SamplerConfig(pr, g21, kernel="sw")
    with pytest.raises(ValueError):
        SamplerConfig(Params(1.0, 2.0), g21, schedule="zigzag")
    with pytest.raises(ValueError):
        SamplerConfig(Params(1.0, 2.0), g21, thinning=0)


def test_heat_bath_edge_frequencies(g21, params_q2):
    """Empirical single-edge marginals match the exact conditioned ones."""
    d = O.enumerate(params_q2, g21, "Dn")
    cfg = SamplerConfig(params_q2, g21, burn_in=200, seed=3)
    bits = np.array(_take(cfg, 20_000))[:, : g21.num_interior_edges]
    emp = bits.mean(axis=0)
    exact = np.array([d.edge_marginal(e) for e in range(g21.num_interior_edges)])
    assert np.abs(emp - exact).max() < 0.03


def test_sw_edge_frequencies(g21):
    pr = Params(1.0, 3.0)
    d = O.enumerate(pr, g21, "Dn")
    cfg = SamplerConfig(pr, g21, burn_in=100, seed=11, kernel="sw", init="flat")
    bits = np.array(_take(cfg, 20_000))[:, : g21.num_interior_edges]
    exact = np.array([d.edge_marginal(e) for e in range(g21.num_interior_edges)])
    assert np.abs(bits.mean(axis=0) - exact).max() < 0.03


def test_colors_attached_for_integer_q():
    g = LatticeGeometry(4, 2)
    cfg = SamplerConfig(Params(2.0, 3.0), g, burn_in=2, seed=1, kernel="sw", init="flat", colors=True)
    om, sigma = next(run_chain(cfg, 1))
    assert sigma is not None and sigma.colors.shape == (g.num_vertices,)


def test_manifest_digest_ignores_wall_clock(g21, params_q2):
    cfg = SamplerConfig(params_q2, g21)
    a = write_manifest(None, cfg, {"samples": 3}, 0.0)
    b = dict(a, wall_clock_seconds=a["wall_clock_seconds"] + 5)
    assert manifest_digest(a) == manifest_digest(b)

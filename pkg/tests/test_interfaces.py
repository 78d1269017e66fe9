import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interface_lab.interfaces import (InterfaceBundle, clusters_of_interface, flat_fraction, realize,
                                      reconstruct_top_component)
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import EdgeConfig, NotInDnError, Params, kappa
from interface_lab.pillars import column, config_from_regions
from interface_lab.sampler import SamplerConfig, flat_config, run_chain


@pytest.fixture
def g86():
    return LatticeGeometry(8, 6)


def test_flat_interface(g86):
    b = InterfaceBundle(flat_config(g86))
    n2 = g86.n ** 2
    assert len(b.top) == len(b.bot) == n2
    assert b.top.max_height == b.top.min_height == 0
    assert flat_fraction(b.top) == 1.0
    assert not b.taint


def test_all_closed_puts_top_interface_at_ceiling(g86):
    b = InterfaceBundle(EdgeConfig.closed(g86))
    assert b.top.max_height == g86.m and b.bot.min_height == -g86.m


def test_not_in_dn_rejected(g86):
    om = EdgeConfig(g86, np.ones(g86.num_edges, dtype=bool))
    with pytest.raises(NotInDnError):
        InterfaceBundle(om).top


def test_single_bump(g86):
    om = config_from_regions(g86, [[(2, 2, 0)]])
    b = InterfaceBundle(om)
    assert len(b.top) == 64 + 4
    assert b.top.max_height == 1
    assert flat_fraction(b.top) == pytest.approx(63 / 64)


def test_realize_round_trip(g86):
    om = config_from_regions(g86, [column((3, 3), 4), [(6, 1, 0), (6, 2, 0)]])
    b = InterfaceBundle(om)
    again = InterfaceBundle(realize(g86, b.full.faces))
    assert again.full.face_set() == b.full.face_set()
    assert np.array_equal(reconstruct_top_component(b.top), b.components.Vh_top)


def test_floating_bubble_is_not_part_of_full_interface(g86):
    b0 = InterfaceBundle(flat_config(g86))
    shell = [g86.face_index(f) for f in _cube_faces((4, 4, 2))]
    keep = set(int(f) for f in b0.full.faces) | set(shell)
    om2 = EdgeConfig.from_closed_faces(g86, np.array(sorted(keep)))
    b2 = InterfaceBundle(om2)
    assert b2.full.face_set() == b0.full.face_set()
    assert b2.top.face_set() == b0.top.face_set()
    assert kappa(om2) == kappa(b0.omega) + 1
    assert clusters_of_interface(b2.full) == 2


def _cube_faces(v):
    from interface_lab.pillars import bounding_faces
    return bounding_faces({v})


@settings(deadline=None, max_examples=10)
@given(st.integers(0, 10_000), st.floats(1.0, 3.0))
def test_colored_ordering_on_samples(seed, beta):
    g = LatticeGeometry(6, 4)
    cfg = SamplerConfig(Params(beta, 3.0), g, burn_in=5, seed=seed, kernel="sw", init="flat", colors=True)
    for om, sigma in run_chain(cfg, 3):
        b = InterfaceBundle(om, sigma)
        cs = b.components
        assert cs.ordering_holds()
        assert np.all(cs.Vh_top <= cs.Vh_red)
        assert np.all(cs.Vh_bot <= cs.Vh_blue)

import pytest
from hypothesis import given, settings, strategies as st

from interface_lab import walls as W
from interface_lab.interfaces import InterfaceBundle
from interface_lab.lattice import LatticeGeometry
from interface_lab.model import Params
from interface_lab.pillars import block, column, config_from_regions
from interface_lab.sampler import SamplerConfig, run_chain


def _family(g, regions):
    b = InterfaceBundle(config_from_regions(g, regions))
    ctx = W.classify_bundle(b)
    return b, ctx, W.decompose_walls(ctx)


@pytest.fixture
def nested():
    g = LatticeGeometry(12, 6)
    return (g,) + _family(g, [block(1, 1, 0, 8, 8, 1), [(5, 5, 1)]])


def test_flat_has_no_walls():
    g = LatticeGeometry(8, 4)
    b, ctx, fam = _family(g, [])
    assert fam.walls == [] and fam.admissible
    assert W.reconstruct(fam, g).face_set() == b.full.face_set()


def test_single_bump_wall():
    g = LatticeGeometry(8, 6)
    _, ctx, fam = _family(g, [[(2, 2, 0)]])
    (w,) = fam.walls
    assert w.N == 9 and w.excess == 4 and w.index == (1, 2, 0)
    assert all(ctx.walls[0].wall_inequalities().values())


def test_column_wall_excess_grows_with_height():
    g = LatticeGeometry(8, 8)
    ex = [_family(g, [column((3, 3), h)])[2].walls[0].excess for h in (1, 2, 3, 4)]
    assert ex == [4, 8, 12, 16]


def test_nested_walls(nested):
    g, b, ctx, fam = nested
    assert [w.excess for w in fam.walls] == [32, 4]
    assert W.nesting(fam, (5, 5)) == [0, 1]
    assert W.nesting(fam, (2, 2)) == [0]
    assert W.nesting(fam, (10, 10)) == []


@pytest.mark.parametrize("seed", [None, 0, 3])
def test_reconstruction_is_order_free(nested, seed):
    g, b, _, fam = nested
    assert W.reconstruct(fam, g, order_seed=seed).face_set() == b.full.face_set()


def test_standard_walls_are_valid(nested):
    g, _, _, fam = nested
    for w in fam.walls:
        assert W.validate_standard(w, g)
        assert w.translated(3).translated(-3) == w
        assert W.reconstruct_single(w, g).max_height == 1.0


def test_inadmissible_family_rejected(nested):
    g, _, _, fam = nested
    bad = W.WallFamily([fam.walls[1], fam.walls[1]])
    assert bad.admissibility() == (0, 1)
    with pytest.raises(W.InadmissibleFamily):
        W.reconstruct(bad, g)


def test_groups_close_and_far():
    g = LatticeGeometry(16, 4)
    _, _, near = _family(g, [[(2, 2, 0)], [(4, 2, 0)]])
    assert len(W.groups(near)) == 1
    _, _, far = _family(g, [[(2, 2, 0)], [(12, 12, 0)]])
    gs = W.groups(far)
    assert [x.members for x in gs] == [[0], [1]] and all(x.excess == 4 for x in gs)


def test_json_is_plain():
    import json
    g = LatticeGeometry(8, 6)
    _, _, fam = _family(g, [column((3, 3), 2)])
    obj = json.loads(fam.to_json())
    assert obj["walls"][0]["index"] == [2, 3, 0]


@settings(deadline=None, max_examples=8)
@given(st.integers(0, 10_000), st.floats(1.8, 3.0))
def test_sampled_round_trip(seed, beta):
    g = LatticeGeometry(8, 6)
    cfg = SamplerConfig(Params(beta, 2.0), g, burn_in=10, seed=seed, kernel="sw", init="flat")
    for om, _ in run_chain(cfg, 2):
        b = InterfaceBundle(om)
        if b.taint:
            continue
        ctx = W.classify_bundle(b)
        fam = W.decompose_walls(ctx)
        assert fam.admissible
        assert W.reconstruct(fam, g).face_set() == b.full.face_set()
        for w in ctx.walls:
            assert all(w.wall_inequalities().values())

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsr_snca.errors import InvalidBody, MalformedSpec, NotAVoxel
from vsr_snca.morphology import (BIPED, COMB, WORM, CellIndex, MorphologyGrid, neighbor_table,
                                 neighbors, parse_morphology, voxel_order)


def test_worm():
    g = parse_morphology("11111")
    assert (g.width, g.height, g.n_voxels) == (5, 1, 5)


def test_single():
    g = parse_morphology("1")
    assert (g.width, g.height, g.n_voxels) == (1, 1, 1)


def test_biped():
    g = parse_morphology("1111-1111-1001")
    assert (g.width, g.height, g.n_voxels) == (4, 3, 10)


def test_named_shapes():
    assert parse_morphology("worm") == parse_morphology(WORM)
    assert parse_morphology("biped").render() == BIPED
    assert parse_morphology("comb").render() == COMB


@pytest.mark.parametrize("spec", ["101", "0", "000-000", "10-01"])
def test_disconnected_or_empty(spec):
    with pytest.raises(InvalidBody):
        parse_morphology(spec)


@pytest.mark.parametrize("spec", ["11-1", "", "12", "1 1", "11--11"])
def test_malformed(spec):
    with pytest.raises(MalformedSpec):
        parse_morphology(spec)


def test_neighbors_worm():
    n = neighbors(parse_morphology(WORM), CellIndex(0, 2))
    assert n.left == (0, 1) and n.right == (0, 3)
    assert n.up is None and n.down is None


def test_neighbors_isolated():
    assert neighbors(parse_morphology("1"), (0, 0)) == (None, None, None, None)


def test_neighbors_comb_tooth():
    n = neighbors(parse_morphology(COMB), (1, 0))
    assert n.up == (0, 0)
    assert n.left is None and n.down is None and n.right is None


def test_neighbors_not_a_voxel():
    with pytest.raises(NotAVoxel):
        neighbors(parse_morphology(BIPED), (2, 1))
    with pytest.raises(NotAVoxel):
        neighbors(parse_morphology(BIPED), (5, 0))


def test_voxel_order():
    biped = voxel_order(parse_morphology(BIPED))
    assert len(biped) == 10 and biped[0] == (0, 0) and biped[-1] == (2, 3)
    assert voxel_order(parse_morphology(WORM)) == [(0, c) for c in range(5)]
    comb = voxel_order(parse_morphology(COMB))
    assert len(comb) == 11 and comb[7] == (1, 0)


def test_neighbor_table_matches_neighbors():
    g = parse_morphology(BIPED)
    order = voxel_order(g)
    table = neighbor_table(g)
    for i, cell in enumerate(order):
        for d, nb in enumerate(neighbors(g, cell)):
            assert table[i, d] == (-1 if nb is None else order.index(nb))


@st.composite
def connected_grids(draw):
    w = draw(st.integers(1, 6))
    h = draw(st.integers(1, 4))
    cells = draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    occ = np.array(cells, dtype=bool).reshape(h, w)
    try:
        return MorphologyGrid.from_array(occ)
    except InvalidBody:
        return parse_morphology("1" * w)


@settings(max_examples=150, deadline=None)
@given(connected_grids())
def test_round_trip(grid):
    assert parse_morphology(grid.render()) == grid


@settings(max_examples=150, deadline=None)
@given(connected_grids())
def test_neighbors_symmetric(grid):
    for cell in voxel_order(grid):
        n = neighbors(grid, cell)
        if n.right is not None:
            assert neighbors(grid, n.right).left == cell
        if n.down is not None:
            assert neighbors(grid, n.down).up == cell
    assert len(voxel_order(grid)) == int(grid.as_array().sum())

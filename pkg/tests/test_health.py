import random

import pytest
from hypothesis import given, strategies as st

import nocsim as ns
from nocsim.errors import (
    DimensionMismatch,
    RangeError,
    UnknownTarget,
    UnknownTile,
)

from conftest import random_shm


# -- read/write and faults -----------------------------------------------------


def test_fresh_map_all_healthy(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    assert all(shm.pe_healthy(t) for t in range(4))
    assert all(shm.link_healthy(l) for l in range(8))
    assert all(shm.turn_healthy(t, s) for t in range(4) for s in range(8))
    assert shm.broken_elements() == []


def test_apply_fault_idempotent(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.apply_fault(("pe", 3))
    once = shm.serialize()
    shm.apply_fault(("pe", 3))
    assert shm.serialize() == once
    assert not shm.pe_healthy(3)


def test_apply_fault_kinds(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.apply_fault(("turn", 1, 6))
    shm.apply_fault(("link", 0))
    assert not shm.turn_healthy(1, 6)
    assert not shm.link_healthy(0)
    assert shm.turn_healthy(1, 5)


def test_apply_fault_unknown_target(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    with pytest.raises(UnknownTile):
        shm.apply_fault(("pe", 99))
    with pytest.raises(UnknownTarget):
        shm.apply_fault(("widget", 0))
    with pytest.raises(UnknownTarget):
        shm.apply_fault(("turn", 0, 99))
    with pytest.raises(UnknownTarget):
        shm.apply_fault(("link", 99))


def test_broken_elements_sorted(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.apply_fault(("link", 5))
    shm.apply_fault(("pe", 2))
    shm.apply_fault(("turn", 0, 3))
    assert shm.broken_elements() == [("pe", 2), ("turn", 0, 3), ("link", 5)]


# -- aging ---------------------------------------------------------------------


def test_aging_zero_keeps_wcet(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    assert shm.effective_wcet(0, 10) == 10


def test_aging_fifty_doubles_wcet(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.set_aging(0, 50)
    assert shm.effective_wcet(0, 10) == 20


def test_aging_rounds_up(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.set_aging(0, 25)
    # 10 / 0.75 = 13.33..., execution time is whole cycles
    assert shm.effective_wcet(0, 10) == 14


def test_aging_hundred_unusable(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.set_aging(2, 100)
    assert shm.pe_healthy(2)
    assert not shm.pe_usable(2)
    assert ns.usable_tiles(shm) == [0, 1, 3]


def test_aging_range_checked(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    with pytest.raises(RangeError):
        shm.set_aging(0, 101)
    with pytest.raises(RangeError):
        shm.set_aging(0, -1)


# -- snapshot/restore and serialization ------------------------------------------


def test_snapshot_restore_round_trip(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.set_aging(1, 30)
    snap = shm.snapshot()
    before = shm.serialize()
    shm.apply_fault(("pe", 0))
    shm.apply_fault(("link", 2))
    shm.apply_fault(("turn", 3, 1))
    assert shm.serialize() != before
    shm.restore(snap)
    assert shm.serialize() == before
    shm.restore(snap)
    assert shm.serialize() == before


def test_restore_rejects_other_mesh(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    other = ns.SystemHealthMap(ns.build_mesh(3, 3))
    with pytest.raises(DimensionMismatch):
        shm.restore(other.snapshot())


def test_serialize_is_canonical_text(mesh22):
    text = ns.SystemHealthMap(mesh22).serialize()
    lines = text.splitlines()
    assert text.endswith("\n")
    assert lines[0].startswith("pe 0 ")
    kinds = [l.split()[0] for l in lines]
    assert kinds == sorted(kinds, key=("pe", "turn", "link", "aging").index)
    assert len([k for k in kinds if k == "pe"]) == 4
    assert len([k for k in kinds if k == "turn"]) == 32
    assert len([k for k in kinds if k == "link"]) == 8
    assert len([k for k in kinds if k == "aging"]) == 4


def test_tag_equal_for_equal_maps(mesh22):
    a = ns.SystemHealthMap(mesh22)
    b = ns.SystemHealthMap(mesh22)
    a.apply_fault(("pe", 1))
    b.apply_fault(("pe", 1))
    assert ns.shm_tag(a) == ns.shm_tag(b)


def test_tag_round_trip_restores(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    snap = shm.snapshot()
    tag0 = ns.shm_tag(shm)
    shm.apply_fault(("turn", 2, 4))
    assert ns.shm_tag(shm) != tag0
    shm.restore(snap)
    assert ns.shm_tag(shm) == tag0


def test_tag_single_flip_corpus(mesh44):
    """1000 random configurations, each compared against itself with one
    extra turn flip: no tag collisions."""
    rng = random.Random(99)
    for _ in range(1000):
        shm = random_shm(mesh44, rng.randrange(10**9))
        base = ns.shm_tag(shm)
        tile = rng.randrange(16)
        slot = rng.randrange(8)
        if not shm.turn_healthy(tile, slot):
            continue
        shm.apply_fault(("turn", tile, slot))
        assert ns.shm_tag(shm) != base


# -- single-writer view -----------------------------------------------------------


def test_view_reads_through(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    view = shm.view()
    assert view.pe_healthy(0)
    shm.apply_fault(("pe", 0))
    assert not view.pe_healthy(0)


def test_view_has_no_writers(mesh22):
    view = ns.SystemHealthMap(mesh22).view()
    assert not hasattr(view, "apply_fault")
    assert not hasattr(view, "set_aging")
    with pytest.raises(AttributeError):
        view.anything = 1


# -- LBDR --------------------------------------------------------------------------


def test_lbdr_corner_connectivity(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    cfg = ns.derive_lbdr_config(shm, ns.XY, 0)
    assert cfg.connectivity == {"N": 1, "E": 1, "W": 0, "S": 0}


def test_lbdr_xy_routing_bits(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    cfg = ns.derive_lbdr_config(shm, ns.XY, 0)
    expected = {
        ("E", "N"): 1, ("E", "S"): 1, ("W", "N"): 1, ("W", "S"): 1,
        ("N", "E"): 0, ("N", "W"): 0, ("S", "E"): 0, ("S", "W"): 0,
    }
    assert cfg.routing == expected


def test_lbdr_turn_fault_masks_one_bit(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.apply_fault(("turn", 0, ns.turn_index(("E", "N"), False)))
    cfg = ns.derive_lbdr_config(shm, ns.XY, 0)
    assert cfg.routing[("E", "N")] == 0
    assert cfg.routing[("E", "S")] == 1


def test_lbdr_broken_link_clears_connectivity(mesh22):
    shm = ns.SystemHealthMap(mesh22)
    shm.apply_fault(("link", mesh22.link(0, "E").id))
    cfg = ns.derive_lbdr_config(shm, ns.XY, 0)
    assert cfg.connectivity["E"] == 0
    assert cfg.connectivity["N"] == 1


@given(st.integers(0, 10**6))
def test_lbdr_bits_match_rg_edges(seed):
    """Connectivity bits match external edges, routing bits match turn
    edges, for every tile of a randomly degraded mesh."""
    ag = ns.build_mesh(3, 3)
    shm = random_shm(ag, seed, max_links=4, max_turns=6)
    rg = ns.build_routing_graph(ag, ns.XY, shm)
    for tile in range(9):
        cfg = ns.derive_lbdr_config(shm, ns.XY, tile)
        for d in ("N", "E", "W", "S"):
            out = rg.port(tile, d, "out")
            has_ext = any(b.tile != tile for b in rg.adj[out])
            assert bool(cfg.connectivity[d]) == has_ext
        for (a, b), bit in cfg.routing.items():
            edge = rg.port(tile, b, "out") in rg.adj[rg.port(tile, a, "in")]
            assert bool(bit) == edge

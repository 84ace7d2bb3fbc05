"""Loop-nest mappings, validity checks and closed-form access counting.

Every frozen count in this file was derived by walking the reuse chain by
hand; the engine's brute-force oracle re-derives the same numbers in
test_engine and test_acceptance.
"""

import pytest

from cimeval.archspec import parse_arch
from cimeval.mapping import (
    Loop,
    Mapping,
    MappingError,
    MappingSpace,
    SlotTable,
    _factorizations,
    analyze_access_counts,
    build_count_plan,
    check_valid,
    enumerate_mappings,
    parse_mapping,
    serialize_mapping,
    utilization,
)
from cimeval.workload import parse_workload

from conftest import read_fixture

# buffer > dac > adc > cell, no reduction stage between ADC and buffer, and
# the cell mesh multicasts inputs only; column outputs reach the buffer
# individually, so an outer reduction step updates in place.
ARCH_NO_REDUCE = """
--- !Component
name: buffer
class: buffer
temporal_reuse: [Inputs, Outputs]
attributes: {e_per_bit: 0.0, width: 8}
--- !Component
name: dac
class: dac
no_coalesce: [Inputs]
attributes: {e_full_scale: 0.4e-12}
--- !Component
name: adc
class: adc
no_coalesce: [Outputs]
attributes: {resolution: 8}
--- !Component
name: cell
class: reram_cell
temporal_reuse: [Weights]
spatial: {meshX: 2, meshY: 2}
spatial_reuse: [Inputs]
attributes: {t_read: 10.0e-9, g_max: 50.0e-6, vdd: 1.0}
"""

# dram > column grid (input multicast) > per-column output register > PE
ARCH_HIER = """
--- !Component
name: dram
class: buffer
temporal_reuse: [Inputs, Weights, Outputs]
attributes: {e_per_bit: 1.0e-12, width: 16}
--- !Container
name: grid
spatial: {meshX: 2}
spatial_reuse: [Inputs]
--- !Component
name: abuf
class: buffer
temporal_reuse: [Outputs]
attributes: {e_per_bit: 0.1e-12, width: 16}
--- !Component
name: pe
class: sram_cell
temporal_reuse: [Weights]
attributes: {e_mac: 1.0e-13}
"""


def tiny():
    return parse_workload(read_fixture("workload_tiny.yaml"))[0]


def counts_for(arch_text, mapping):
    arch = parse_arch(arch_text)
    layer = tiny()
    diag = check_valid(arch, layer, mapping)
    assert diag.ok, diag.errors
    return analyze_access_counts(arch, layer, mapping)


def test_crossbar_fully_spatial_counts(crossbar_arch, tiny_layer, tiny_mapping):
    got = analyze_access_counts(crossbar_arch, tiny_layer, tiny_mapping)
    assert got == {
        ("cell", "all", "compute"): 4,
        ("cell", "Weights", "fill"): 4,
        ("dac", "Inputs", "convert"): 2,
        ("buffer", "Inputs", "read"): 2,
        ("buffer", "Inputs", "fill"): 1,
        ("adc", "Outputs", "convert"): 2,
        ("accum", "Outputs", "compute"): 2,
        ("buffer", "Outputs", "write"): 1,
        ("buffer", "Outputs", "update"): 0,
    }


def test_unicast_inputs_convert_per_column(tiny_mapping):
    # dropping the input multicast doubles DAC work: one convert per column
    text = read_fixture("arch_crossbar.yaml").replace(
        "spatial_reuse: [Inputs, Outputs]", "spatial_reuse: [Outputs]"
    )
    got = counts_for(text, tiny_mapping)
    assert got[("dac", "Inputs", "convert")] == 4
    assert got[("buffer", "Inputs", "read")] == 4
    # output-side traffic is untouched
    assert got[("adc", "Outputs", "convert")] == 2
    assert got[("buffer", "Outputs", "write")] == 1


def test_outer_temporal_column_loop(crossbar_arch, tiny_layer):
    # columns iterated in time instead of space: the input vector is
    # re-delivered per step, the array shrinks to one column
    mapping = Mapping.from_dict(
        {"buffer": [Loop("M", 2, "temporal")], "cell": [Loop("K", 2, "spatialY")]}
    )
    got = analyze_access_counts(crossbar_arch, tiny_layer, mapping)
    assert got == {
        ("cell", "all", "compute"): 4,
        ("cell", "Weights", "fill"): 4,
        ("dac", "Inputs", "convert"): 4,
        ("buffer", "Inputs", "read"): 4,
        ("buffer", "Inputs", "fill"): 1,
        ("adc", "Outputs", "convert"): 2,
        ("accum", "Outputs", "compute"): 2,
        ("buffer", "Outputs", "write"): 2,
        ("buffer", "Outputs", "update"): 0,
    }


def test_unreduced_outputs_update_in_place():
    mapping = Mapping.from_dict(
        {"cell": [Loop("M", 2, "spatialX"), Loop("K", 2, "spatialY")]}
    )
    got = counts_for(ARCH_NO_REDUCE, mapping)
    # both cells of a column push partial sums; first touch writes, the
    # second arrival is a read-modify-write
    assert got[("adc", "Outputs", "convert")] == 4
    assert got[("buffer", "Outputs", "write")] == 2
    assert got[("buffer", "Outputs", "update")] == 2
    assert got[("dac", "Inputs", "convert")] == 2


def test_hierarchy_counts_and_cycles():
    arch = parse_arch(ARCH_HIER)
    layer = tiny()
    mapping = Mapping.from_dict(
        {"grid": [Loop("M", 2, "spatialX")], "pe": [Loop("K", 2, "temporal")]}
    )
    diag = check_valid(arch, layer, mapping)
    assert diag.ok and not diag.warnings
    got = analyze_access_counts(arch, layer, mapping)
    assert got == {
        ("pe", "all", "compute"): 4,
        ("pe", "Weights", "fill"): 2,
        ("dram", "Weights", "read"): 2,
        ("dram", "Weights", "fill"): 1,
        ("dram", "Inputs", "read"): 2,
        ("dram", "Inputs", "fill"): 1,
        ("abuf", "Outputs", "write"): 2,
        ("abuf", "Outputs", "update"): 2,
        ("dram", "Outputs", "write"): 2,
        ("dram", "Outputs", "update"): 0,
    }
    table, plan = build_count_plan(arch, layer)
    bounds = table.bounds_from_mapping(mapping)
    assert plan.cycles(bounds) == 2
    assert plan.utilization(bounds) == pytest.approx(1.0)


def test_repeated_loops_multiply_into_one_slot(crossbar_arch, tiny_layer):
    table = SlotTable(crossbar_arch, tiny_layer)
    mapping = Mapping.from_dict(
        {"buffer": [Loop("M", 2, "temporal"), Loop("M", 2, "temporal")]}
    )
    bounds = table.bounds_from_mapping(mapping)
    slot = table.slot_id(0, "temporal", "M")
    assert bounds[slot] == 4


def test_bounds_round_trip(crossbar_arch, tiny_layer, tiny_mapping):
    table = SlotTable(crossbar_arch, tiny_layer)
    bounds = table.bounds_from_mapping(tiny_mapping)
    again = table.bounds_from_mapping(table.mapping_from_bounds(bounds))
    assert again == bounds
    # bound-1 loops are dropped on the way out
    for _, loops in table.mapping_from_bounds(bounds).loops:
        assert all(l.bound > 1 for l in loops)


def test_unknown_names_are_errors(crossbar_arch, tiny_layer):
    table = SlotTable(crossbar_arch, tiny_layer)
    with pytest.raises(MappingError, match="unknown node"):
        table.bounds_from_mapping(
            Mapping.from_dict({"nonesuch": [Loop("M", 2, "temporal")]})
        )
    with pytest.raises(MappingError, match="unknown dim"):
        table.bounds_from_mapping(
            Mapping.from_dict({"buffer": [Loop("Z", 2, "temporal")]})
        )
    with pytest.raises(MappingError):
        Loop("M", 0, "temporal")
    with pytest.raises(MappingError):
        Loop("M", 2, "diagonal")


def test_check_valid_diagnostic_classes(crossbar_arch, tiny_layer):
    # spatial loop at a plain component: no such slot exists
    diag = check_valid(
        crossbar_arch,
        tiny_layer,
        Mapping.from_dict(
            {"dac": [Loop("M", 2, "spatialX")], "cell": [Loop("K", 2, "spatialY")]}
        ),
    )
    assert not diag.ok
    assert any("no loop slot" in e for e in diag.errors)

    # under-tiling
    diag = check_valid(
        crossbar_arch, tiny_layer, Mapping.from_dict({"cell": [Loop("K", 2, "spatialY")]})
    )
    assert any("covers 1 of 2" in e.replace("cover", "covers") for e in diag.errors)

    # padding warns but stays usable
    diag = check_valid(
        crossbar_arch,
        tiny_layer,
        Mapping.from_dict(
            {"buffer": [Loop("M", 4, "temporal")], "cell": [Loop("K", 2, "spatialY")]}
        ),
    )
    assert diag.ok
    assert any("padded" in w for w in diag.warnings)

    # mesh axis overflow
    diag = check_valid(
        crossbar_arch,
        tiny_layer,
        Mapping.from_dict(
            {"cell": [Loop("M", 4, "spatialX"), Loop("K", 2, "spatialY")]}
        ),
    )
    assert any("mesh axis has 2" in e for e in diag.errors)


def test_check_valid_constraints(tiny_layer):
    base = read_fixture("arch_crossbar.yaml")
    spatial_map = parse_mapping(read_fixture("mapping_tiny.yaml"))
    temporal_m = Mapping.from_dict(
        {"buffer": [Loop("M", 2, "temporal")], "cell": [Loop("K", 2, "spatialY")]}
    )

    keep = base.replace(
        "attributes:\n  t_read:",
        "constraints: {keep_dims: [M]}\nattributes:\n  t_read:",
    )
    diag = check_valid(parse_arch(keep), tiny_layer, temporal_m)
    assert any("keep_dims" in e for e in diag.errors)
    assert check_valid(parse_arch(keep), tiny_layer, spatial_map).ok

    tile = base.replace(
        "attributes:\n  t_read:",
        "constraints: {max_tile: {K: 1}}\nattributes:\n  t_read:",
    )
    diag = check_valid(parse_arch(tile), tiny_layer, spatial_map)
    assert any("max_tile" in e for e in diag.errors)

    sdims = base.replace(
        "attributes:\n  t_read:",
        "constraints: {spatial_dims: [K]}\nattributes:\n  t_read:",
    )
    diag = check_valid(parse_arch(sdims), tiny_layer, spatial_map)
    assert any("spatial_dims" in e for e in diag.errors)
    assert check_valid(parse_arch(sdims), tiny_layer, temporal_m).ok


def test_check_valid_capacity(tiny_layer):
    base = read_fixture("arch_crossbar.yaml")
    # retained tiles: 2 input bits + 16 output bits exceed 4
    tight = base.replace("e_per_bit: 0.0", "e_per_bit: 0.0\n  capacity: 4")
    diag = check_valid(
        parse_arch(tight), tiny_layer, parse_mapping(read_fixture("mapping_tiny.yaml"))
    )
    assert any("capacity is 4" in e for e in diag.errors)
    roomy = base.replace("e_per_bit: 0.0", "e_per_bit: 0.0\n  capacity: 64")
    assert check_valid(
        parse_arch(roomy), tiny_layer, parse_mapping(read_fixture("mapping_tiny.yaml"))
    ).ok


def test_utilization_of_partial_occupancy():
    text = read_fixture("arch_crossbar.yaml").replace(
        "spatial: {meshX: 2, meshY: 2}", "spatial: {meshX: 256, meshY: 256}"
    )
    arch = parse_arch(text)
    layer = parse_workload(
        """
layers:
  - name: mid
    dims: {M: 64, K: 64}
    projections: {Inputs: [K], Weights: [K, M], Outputs: [M]}
    bits: {Inputs: 1, Weights: 1, Outputs: 8}
    pmf: {Inputs: {delta: 1}, Weights: {delta: 1}}
"""
    )[0]
    mapping = Mapping.from_dict(
        {"cell": [Loop("M", 64, "spatialX"), Loop("K", 64, "spatialY")]}
    )
    assert utilization(arch, layer, mapping) == pytest.approx(1 / 16)


def test_factorizations_exhaustive():
    fs = _factorizations(8, 3)
    assert len(fs) == 10
    assert all(a * b * c == 8 for a, b, c in fs)
    assert len(set(fs)) == len(fs)
    assert _factorizations(1, 4) == [(1, 1, 1, 1)]


def test_mapping_space_tiny_census(crossbar_arch, tiny_layer):
    space = MappingSpace(crossbar_arch, tiny_layer)
    # per dim: a single bound-2 loop may sit at any of the five temporal
    # slots or on either leaf mesh axis
    assert space.total == 49
    drawn = space.draw_indices(budget=1000, seed=0)
    assert drawn == list(range(49))
    valid = list(enumerate_mappings(crossbar_arch, tiny_layer, budget=1000, seed=0))
    # the two mappings stacking both dims on one mesh axis overflow it
    assert len(valid) == 47
    for idx, mapping in valid:
        diag = check_valid(crossbar_arch, tiny_layer, mapping)
        assert diag.ok and not diag.warnings
    # the fast bounds filter agrees with the full checker on every point
    for i in range(space.total):
        ok = space.bounds_ok(space.bounds_at(i))
        full = check_valid(crossbar_arch, tiny_layer, space.mapping_at(i)).ok
        assert ok == full


def test_mapping_space_draw_determinism(crossbar_arch):
    layer = parse_workload(
        """
layers:
  - name: big
    dims: {M: 8, K: 16}
    projections: {Inputs: [K], Weights: [K, M], Outputs: [M]}
    bits: {Inputs: 1, Weights: 1, Outputs: 8}
    pmf: {Inputs: {delta: 1}, Weights: {delta: 1}}
"""
    )[0]
    space = MappingSpace(crossbar_arch, layer)
    assert space.total > 1000
    a = space.draw_indices(budget=200, seed=7)
    b = space.draw_indices(budget=200, seed=7)
    c = space.draw_indices(budget=200, seed=8)
    assert a == b
    assert a != c
    assert a == sorted(a)
    assert len(set(a)) == 200
    # index decoding is stable and in range
    for i in a:
        assert 0 <= i < space.total
        assert space.bounds_at(i) == space.bounds_at(i)


def test_mapping_yaml_round_trip(tiny_mapping):
    text = serialize_mapping(tiny_mapping)
    assert parse_mapping(text) == tiny_mapping
    with pytest.raises(MappingError):
        parse_mapping("nodes: {cell: [{dim: M, bound: 2, kind: diagonal}]}")
    with pytest.raises(MappingError):
        parse_mapping("nodes: {cell: [{dim: M, bound: 2, flavor: odd}]}")
    with pytest.raises(MappingError):
        parse_mapping("nodes: {cell: [{dim: M}]}")
    with pytest.raises(MappingError):
        parse_mapping("- a\n- b\n")
    # a bare node map is accepted, and kind defaults to temporal
    m = parse_mapping("buffer: [{dim: M, bound: 4}]")
    assert m.node_loops("buffer")[0].kind == "temporal"

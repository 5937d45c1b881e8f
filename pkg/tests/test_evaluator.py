import random

import pytest

from accelmap.designs import AcceleratorDesign, builtin_designs, layer_latency
from accelmap.errors import ValidationError
from accelmap.evaluator import (
    Mapping,
    MappingEvaluator,
    heterogeneous_set_compute,
    validate_mapping,
)
from accelmap.sharding import (
    EMPTY_STRATEGY,
    Dim,
    ParallelismStrategy,
    enumerate_strategies,
)
from accelmap.topology import (
    AccSetCandidate,
    bottleneck_bandwidth,
    build_f1_topology,
    grouped_topology,
)
from accelmap.workload import ConvLayer, Workload, catalog

D1, D2, D3 = builtin_designs()


def single_acc_mapping(workload, design):
    return Mapping(
        accsets=(AccSetCandidate((0,), 0),),
        config=(design,),
        ranges=((0, len(workload)),),
        strategies=(EMPTY_STRATEGY,) * len(workload),
    )


def test_single_layer_single_accelerator():
    layer = ConvLayer(0, 8, 8, 8, 8, 3, 3)
    w = Workload("w", (layer,))
    topo = grouped_topology([1])
    ev = MappingEvaluator(w, topo)
    report = ev.evaluate(single_acc_mapping(w, D1))
    assert report.total_s == layer_latency(D1, layer)
    assert report.inter_set_s == 0
    assert report.per_set[0].allreduce_s == 0
    assert report.per_set[0].ss_ring_s == 0
    assert report.valid


def test_whole_network_equals_layer_latency_sum():
    w = catalog("alexnet")
    topo = build_f1_topology()
    ev = MappingEvaluator(w, topo)
    report = ev.evaluate(single_acc_mapping(w, D1))
    assert report.total_s == pytest.approx(
        sum(layer_latency(D1, l) for l in w.layers), rel=1e-12
    )


def test_shared_weight_ring_micro_case():
    """Two accelerators, ES={W}, SS=Cout: two half-work phases plus one
    ring step moving half the weights. Hand-computed for Design 1."""
    layer = ConvLayer(0, 64, 64, 28, 28, 3, 3)
    w = Workload("w", (layer,))
    topo = grouped_topology([2], intra_gbps=8, host_gbps=2, mem_gb=1)
    accset = AccSetCandidate((0, 1), bottleneck_bandwidth(topo, (0, 1)))
    s = ParallelismStrategy(es=((Dim.W, 2),), ss=Dim.COUT, p=2)
    mapping = Mapping((accset,), (D1,), ((0, 1),), (s,))
    report = MappingEvaluator(w, topo, elem_bytes=2).evaluate(mapping)

    # per phase: (32, 64, 28, 14, 3, 3) on Design 1
    # ceil(32/64)=1, ceil(64/7)=10, ceil(28/7)=4, ceil(14/14)=1 -> 40 tiles
    cycles = 40 * 98 * 9
    compute = 2 * cycles / D1.freq
    ring_bytes = 32 * 64 * 9 * 2  # half the weights at 2 bytes/element
    ring = 1e-6 + ring_bytes * 8 / 8e9
    assert report.per_set[0].compute_s == pytest.approx(compute, rel=1e-12)
    assert report.per_set[0].ss_ring_s == pytest.approx(ring, rel=1e-12)
    assert report.total_s == pytest.approx(compute + ring, rel=1e-12)


def test_memory_violation_reported():
    # 1.2 GB of weights on a 1 GB accelerator
    layer = ConvLayer(0, 8192, 8192, 14, 14, 3, 3)
    w = Workload("w", (layer,))
    topo = build_f1_topology()
    ev = MappingEvaluator(w, topo)
    report = ev.evaluate(single_acc_mapping(w, D1))
    assert not report.valid
    assert report.memory_per_acc > 1e9


def test_decomposition_identity_random_mappings():
    w = catalog("alexnet")
    topo = build_f1_topology()
    ev = MappingEvaluator(w, topo)
    g0 = AccSetCandidate((0, 1, 2, 3), bottleneck_bandwidth(topo, (0, 1, 2, 3)))
    g1 = AccSetCandidate((4, 5, 6, 7), bottleneck_bandwidth(topo, (4, 5, 6, 7)))
    rng = random.Random(5)
    for _ in range(20):
        cut = rng.randint(1, len(w) - 1)
        strategies = []
        for l in w.layers:
            options = enumerate_strategies(l, 4)
            strategies.append(rng.choice(options))
        mapping = Mapping((g0, g1), (rng.choice([D1, D2, D3]), rng.choice([D1, D2, D3])),
                          ((0, cut), (cut, len(w))), tuple(strategies))
        report = ev.evaluate(mapping)
        parts = sum(s.total_s for s in report.per_set) + report.inter_set_s
        assert report.total_s == pytest.approx(parts, rel=1e-9)


def test_evaluate_deterministic():
    w = catalog("alexnet")
    topo = build_f1_topology()
    mapping = single_acc_mapping(w, D2)
    a = MappingEvaluator(w, topo).evaluate(mapping)
    b = MappingEvaluator(w, topo).evaluate(mapping)
    assert a == b


def test_inter_set_transfer_charged_via_host():
    w = catalog("alexnet")
    topo = build_f1_topology()
    ev = MappingEvaluator(w, topo)
    g0 = AccSetCandidate((0, 1, 2, 3), 8e9)
    g1 = AccSetCandidate((4, 5, 6, 7), 8e9)
    strategies = tuple(
        ParallelismStrategy(es=((Dim.H, 2), (Dim.W, 2)), p=4) for _ in w.layers
    )
    mapping = Mapping((g0, g1), (D1, D1), ((0, 3), (3, 5)), strategies)
    report = ev.evaluate(mapping)
    boundary = w.layers[2]
    expected = topo.msg_latency + boundary.out_elems() * 2 * 8 / 2e9
    assert report.inter_set_s == pytest.approx(expected, rel=1e-12)


def test_parallel_strategy_never_slower_than_serial_compute():
    layer = ConvLayer(0, 64, 64, 28, 28, 3, 3)
    w = Workload("w", (layer,))
    topo = grouped_topology([2], intra_gbps=8)
    ev = MappingEvaluator(w, topo)
    serial = ev.layer_cost(D1, layer, EMPTY_STRATEGY, 0)[0]
    best = min(
        ev.layer_cost(D1, layer, s, 8e9)[0]
        for s in enumerate_strategies(layer, 2)
    )
    assert best <= serial


def test_owner_lookup():
    w = catalog("alexnet")
    g0 = AccSetCandidate((0, 1, 2, 3), 8e9)
    g1 = AccSetCandidate((4, 5, 6, 7), 8e9)
    s4 = ParallelismStrategy(es=((Dim.H, 2), (Dim.W, 2)), p=4)
    mapping = Mapping((g0, g1), (D1, D1), ((0, 3), (3, 5)), (s4,) * 5)
    assert mapping.owner_of(0) == 0
    assert mapping.owner_of(4) == 1
    with pytest.raises(ValidationError):
        mapping.owner_of(9)


def test_structural_validation():
    w = catalog("alexnet")
    g0 = AccSetCandidate((0, 1), 8e9)
    overlap = AccSetCandidate((1, 2), 8e9)
    s2 = ParallelismStrategy(es=((Dim.H, 2),), p=2)
    with pytest.raises(ValidationError, match="overlap"):
        validate_mapping(
            Mapping((g0, overlap), (D1, D1), ((0, 3), (3, 5)), (s2,) * 5), w
        )
    g1 = AccSetCandidate((4, 5), 8e9)
    with pytest.raises(ValidationError, match="contiguous"):
        validate_mapping(
            Mapping((g0, g1), (D1, D1), ((0, 2), (3, 5)), (s2,) * 5), w
        )
    with pytest.raises(ValidationError, match="degree"):
        validate_mapping(
            Mapping((g0,), (D1,), ((0, 5),), (EMPTY_STRATEGY,) * 5), w
        )


def homogeneous_compute(design, layer, strategy):
    from accelmap.designs import layer_cycles
    from accelmap.sharding import shard_layout

    layout = shard_layout(layer, strategy)
    return layout.phases * layer_cycles(design, layout.per_phase_layer) / design.freq


def test_heterogeneous_max_rule():
    layer = ConvLayer(0, 64, 64, 28, 28, 3, 3)
    s = ParallelismStrategy(es=((Dim.H, 2),), p=2)
    same = heterogeneous_set_compute([D1, D1], layer, s)
    assert same == pytest.approx(homogeneous_compute(D1, layer, s))
    mixed = heterogeneous_set_compute([D1, D2], layer, s)
    slowest = max(homogeneous_compute(D1, layer, s), homogeneous_compute(D2, layer, s))
    assert mixed == pytest.approx(slowest)
    # doubling one member's frequency cannot raise the phase time
    fast = AcceleratorDesign("fast1", "tiled", D1.freq * 2, D1.n_pe, dict(D1.params))
    assert heterogeneous_set_compute([fast, D2], layer, s) <= mixed

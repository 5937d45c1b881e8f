import pytest

from accelmap.comm import allreduce_cost, p2p_cost, redistribute_cost, ss_ring_cost
from accelmap.errors import UnreachableError

MIB = 1 << 20


def test_p2p_zero_bytes_pays_message_latency():
    assert p2p_cost(0, 8e9, 1e-6).seconds == 1e-6


def test_p2p_one_mib_at_8gbps():
    # 1 MiB * 8 / 8e9 + 1 us = 1.049576 ms
    cost = p2p_cost(MIB, 8e9, 1e-6)
    assert cost.seconds == pytest.approx(1.049576e-3, rel=1e-12)
    assert cost.bytes_moved == MIB


def test_p2p_one_mib_at_2gbps():
    # 4.194304 ms + 1 us
    assert p2p_cost(MIB, 2e9, 1e-6).seconds == pytest.approx(4.195304e-3, rel=1e-12)


def test_p2p_unreachable():
    with pytest.raises(UnreachableError):
        p2p_cost(1, 0, 0)


def test_allreduce_single_member_free():
    assert allreduce_cost(123456, 1, 8e9, 1e-6).seconds == 0.0


def test_allreduce_hand_value():
    # 2 * 3 * (2 MB * 8 / 8 Gbps) = 12 ms with zero message latency
    assert allreduce_cost(8e6, 4, 8e9, 0.0).seconds == pytest.approx(12e-3, rel=1e-12)


def test_allreduce_direction_factor():
    # per direction the (p-1)/p slice factor grows from 1/2 to 3/4
    two = allreduce_cost(8e6, 2, 8e9, 0.0).seconds
    four = allreduce_cost(8e6, 4, 8e9, 0.0).seconds
    assert two == pytest.approx(2 * 0.5 * 8e6 * 8 / 8e9)
    assert four == pytest.approx(2 * 0.75 * 8e6 * 8 / 8e9)


def test_allreduce_bandwidth_optimal_asymptote():
    limit = 2 * 8e6 * 8 / 8e9
    big_p = allreduce_cost(8e6, 1024, 8e9, 0.0).seconds
    assert big_p == pytest.approx(limit * 1023 / 1024, rel=1e-12)
    assert big_p < limit


def test_allreduce_unreachable():
    with pytest.raises(UnreachableError):
        allreduce_cost(1.0, 2, 0, 0)


def test_ss_ring_single_member_free():
    assert ss_ring_cost(999, 1, 8e9, 1e-6).seconds == 0.0


def test_ss_ring_one_step_matches_p2p():
    # p=2: a single exchange of the shared shard
    assert ss_ring_cost(MIB, 2, 8e9, 1e-6).seconds == pytest.approx(
        p2p_cost(MIB, 8e9, 1e-6).seconds, rel=1e-12
    )


def test_ss_ring_step_count():
    one = ss_ring_cost(MIB, 2, 8e9, 1e-6).seconds
    three = ss_ring_cost(MIB, 4, 8e9, 1e-6).seconds
    assert three == pytest.approx(3 * one, rel=1e-12)


def test_redistribute_matching_layout_is_free():
    assert redistribute_cost(1e6, True, True, 8e9, 1e-6).seconds == 0.0


def test_redistribute_full_tensor_upper_bound():
    # 4 MiB across groups at 2 Gbps effective: 16.78 ms + 1 us
    cost = redistribute_cost(4 * MIB, False, False, 2e9, 1e-6, via_host=True)
    assert cost.seconds == pytest.approx(1e-6 + 4 * MIB * 8 / 2e9, rel=1e-12)
    assert cost.via_host


def test_redistribute_same_set_different_layout_charged():
    cost = redistribute_cost(1e6, True, False, 8e9, 1e-6)
    assert cost.seconds == pytest.approx(1e-6 + 1e6 * 8 / 8e9)


def test_costs_monotone_in_bytes():
    prev = 0.0
    for n_bytes in (0, 10, 1000, 1e6, 1e8):
        cur = p2p_cost(n_bytes, 8e9, 1e-6).seconds
        assert cur >= prev
        prev = cur

import math

import pytest
from hypothesis import given, strategies as st

from clustertree.scalability import (
    DomainError,
    Schedule,
    association_latency,
    format_table,
    lower_bound_slots,
    per_level_time,
    ratio,
    reference_notes,
    report,
    superlinearity_check,
    to_time,
    tree_nodes,
)
from clustertree.types import ProtocolConfig

from oracles import bound_slots as oracle_slots


FROZEN = {1: 7, 2: 18, 3: 35, 8: 1608}


@pytest.mark.parametrize("h,slots", sorted(FROZEN.items()))
def test_oracle_matches_frozen_values(h, slots):
    assert oracle_slots(h) == slots


@pytest.mark.parametrize("h,slots", sorted(FROZEN.items()))
def test_lower_bound_frozen_values(h, slots):
    assert lower_bound_slots(h) == slots


@pytest.mark.parametrize("h", range(1, 17))
def test_lower_bound_matches_oracle(h):
    assert lower_bound_slots(h) == oracle_slots(h)


@given(st.integers(min_value=1, max_value=64))
def test_telescoping_difference(h):
    assert lower_bound_slots(h + 1) - lower_bound_slots(h) == 2 + per_level_time(h)


@given(st.integers(min_value=1, max_value=64))
def test_exact_integer_arithmetic(h):
    closed = 5 + 2 * h + 7 * (h - 1) + sum(i * 2**i for i in range(1, h))
    value = lower_bound_slots(h)
    assert isinstance(value, int) and value == closed


def test_sum_of_i_two_to_the_i_closed_form():
    # sum_{i<h} i 2^i = (h-2) 2^h + 2
    for h in range(1, 65):
        assert sum(i * 2**i for i in range(1, h)) == (h - 2) * 2**h + 2


@pytest.mark.parametrize("bad", [0, -1, -10])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        lower_bound_slots(bad)
    with pytest.raises(DomainError):
        association_latency(bad)
    with pytest.raises(DomainError):
        per_level_time(bad)


def test_association_latency_is_round_trip():
    assert [association_latency(k) for k in (1, 2, 5)] == [2, 4, 10]


def test_sequential_schedule_is_slower():
    for i in range(1, 10):
        assert per_level_time(i, Schedule.SEQUENTIAL) >= per_level_time(i)


def test_tree_nodes():
    assert [tree_nodes(h) for h in (0, 1, 2, 8)] == [1, 3, 7, 511]


def test_ratio_values():
    assert ratio(1) == pytest.approx(7 / (3 * math.log2(3)))
    assert ratio(3) == pytest.approx(35 / (15 * math.log2(15)))


def test_ratio_tends_to_one_half():
    # leading behaviour is (h - 2) / (2 (h + 1))
    for h in (40, 60, 200):
        assert ratio(h) == pytest.approx((h - 2) / (2 * (h + 1)), rel=1e-2)
    assert ratio(200) < 0.5


def test_ratio_has_interior_minimum():
    values = [ratio(h) for h in range(1, 30)]
    low = values.index(min(values)) + 1
    assert low == 7
    assert all(a > b for a, b in zip(values[: low - 1], values[1:low]))
    assert all(a < b for a, b in zip(values[low - 1 :], values[low:]))


def test_superlinearity():
    assert superlinearity_check(2, 12) is True
    assert superlinearity_check(2, 3) is True


@pytest.mark.parametrize("lo,hi", [(1, 5), (3, 3), (5, 4)])
def test_superlinearity_domain(lo, hi):
    with pytest.raises(DomainError):
        superlinearity_check(lo, hi)


def test_time_conversion():
    cfg = ProtocolConfig()
    assert to_time(8, cfg) == (4, 5760)
    assert to_time(7, cfg) == (4, 5760)
    assert to_time(1608, cfg) == (804, 1157760)
    assert to_time(0, cfg) == (0, 0)


def test_report_and_table():
    rows = report([1, 8])
    assert [(r.h, r.nodes, r.slots, r.slotframes, r.milliseconds) for r in rows] == [
        (1, 3, 7, 4, 5760),
        (8, 511, 1608, 804, 1157760),
    ]
    assert rows[1].minutes == pytest.approx(19.296)
    csv = format_table(rows, "csv").splitlines()
    assert csv[0] == "h,nodes,slots,slotframes,milliseconds,minutes,ratio"
    assert csv[2].startswith("8,511,1608,804,1157760,19.30,")
    text = format_table(rows)
    assert text.startswith("# ")


def test_reference_notes_quote_published_figures():
    notes = reference_notes()
    assert '"3 slotframes"' in notes and '"5760 ms"' in notes and '"27 minutes"' in notes
    assert "8 slots -> 4 slotframes -> 5760 ms" in notes

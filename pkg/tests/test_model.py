"""Value types, segment decompositions and share accounting."""

from __future__ import annotations

from fractions import Fraction as F

import numpy as np
import pytest

from socd import (
    ActivePeriod,
    AgentSpec,
    DuplicateArrival,
    EmptyStream,
    EmptyWindow,
    GameParams,
    InvalidPresentSet,
    Schedule,
    Segment,
    SwitchEvent,
    SwitchKind,
    UnknownAgent,
    as_time,
    assigned_share,
    availability_union,
    eas_segments,
    efficiency,
    eps_segments,
    ex_ante_share,
    ex_post_share,
    game_duration,
    stream_segments,
    validate_schedule,
    validate_stream,
)
from conftest import S1, random_stream


def seg(start, end, members) -> Segment:
    return Segment(F(start), F(end), frozenset(members))


# ---------------------------------------------------------------- value types


def test_as_time_accepts_exact_forms():
    assert as_time(7) == F(7)
    assert as_time("7") == F(7)
    assert as_time("0.25") == F(1, 4)
    assert as_time("16/3") == F(16, 3)
    assert as_time(F(5, 2)) == F(5, 2)


@pytest.mark.parametrize("bad", [0.25, 1.0, True, False])
def test_as_time_rejects_floats_and_bools(bad):
    with pytest.raises(TypeError):
        as_time(bad)


def test_agent_spec_window_is_half_open():
    a = AgentSpec("a", 2, 5)
    assert a.window == F(3)
    assert a.available_at(F(2))
    assert a.available_at(F(4))
    assert not a.available_at(F(5))
    assert not a.available_at(F(1))


def test_agent_spec_rejects_empty_window():
    with pytest.raises(EmptyWindow):
        AgentSpec("a", 5, 5)
    with pytest.raises(EmptyWindow):
        AgentSpec("a", 5, 3)


def test_agent_spec_coerces_times():
    a = AgentSpec("a", "1/2", "7/2")
    assert a.t_arrive == F(1, 2)
    assert a.t_leave == F(7, 2)
    with pytest.raises(TypeError):
        AgentSpec("a", 0.5, 2)


def test_game_params_validation():
    p = GameParams(u=2, c="1/2")
    assert p.u == F(2)
    assert p.c == F(1, 2)
    with pytest.raises(ValueError):
        GameParams(u=0)
    with pytest.raises(ValueError):
        GameParams(c=-1)
    # active-time cost is carried but pinned to zero
    with pytest.raises(ValueError):
        GameParams(ca=1)


def test_segment_requires_length_and_members():
    s = seg(0, 4, {"a"})
    assert s.length == F(4)
    with pytest.raises(ValueError):
        Segment(F(4), F(4), frozenset({"a"}))
    with pytest.raises(ValueError):
        Segment(F(0), F(4), frozenset())


def test_active_period_rejects_negative_length():
    assert ActivePeriod("a", 0, 4).length == F(4)
    with pytest.raises(ValueError):
        ActivePeriod("a", 4, 0)


# ----------------------------------------------------------- stream validity


def test_validate_stream_singleton():
    a = AgentSpec("a", 0, 10)
    assert validate_stream([a]) == [a]


def test_validate_stream_sorts_by_arrival():
    ordered = validate_stream(
        [AgentSpec("b", 4, 16), AgentSpec("a", 0, 10), AgentSpec("c", 8, 20)]
    )
    assert [a.id for a in ordered] == ["a", "b", "c"]


def test_validate_stream_rejects_duplicate_arrivals():
    with pytest.raises(DuplicateArrival):
        validate_stream([AgentSpec("a", 0, 10), AgentSpec("b", 0, 5)])


def test_validate_stream_rejects_empty_and_duplicate_ids():
    with pytest.raises(EmptyStream):
        validate_stream([])
    with pytest.raises(ValueError, match="duplicate agent id"):
        validate_stream([AgentSpec("a", 0, 10), AgentSpec("a", 1, 5)])


def test_availability_union_and_duration():
    assert availability_union(S1) == [(F(0), F(20))]
    assert game_duration(S1) == F(20)
    gap = [AgentSpec("a", 0, 4), AgentSpec("b", 6, 9)]
    assert availability_union(gap) == [(F(0), F(4)), (F(6), F(9))]
    assert game_duration(gap) == F(7)


def test_stream_segments_cut_at_every_event():
    assert stream_segments(list(S1)) == [
        seg(0, 4, {"a1"}),
        seg(4, 8, {"a1", "a2"}),
        seg(8, 10, {"a1", "a2", "a3"}),
        seg(10, 16, {"a2", "a3"}),
        seg(16, 20, {"a3"}),
    ]


def test_stream_segments_skip_availability_holes():
    stream = [AgentSpec("a", 0, 4), AgentSpec("b", 6, 9)]
    assert stream_segments(stream) == [seg(0, 4, {"a"}), seg(6, 9, {"b"})]


# ------------------------------------------------------ segment decomposition


def test_eas_segments_alone_is_one_segment(s1):
    a1 = s1[0]
    assert eas_segments(a1, [a1]) == [seg(0, 10, {"a1"})]


def test_eas_segments_cut_only_at_known_departures(s1):
    a1, a2, a3 = s1
    assert eas_segments(a2, [a1, a2]) == [
        seg(4, 10, {"a1", "a2"}),
        seg(10, 16, {"a2"}),
    ]
    assert eas_segments(a3, s1) == [
        seg(8, 10, {"a1", "a2", "a3"}),
        seg(10, 16, {"a2", "a3"}),
        seg(16, 20, {"a3"}),
    ]


def test_eas_segments_reject_bad_present_set(s1):
    a1, a2, a3 = s1
    with pytest.raises(InvalidPresentSet):
        eas_segments(a2, [a1])  # the agent itself is missing
    with pytest.raises(InvalidPresentSet):
        eas_segments(a2, [a1, a2, a3])  # a3 has not arrived at t=4


def test_eps_segments_include_later_arrivals(s1):
    a1, a2, a3 = s1
    assert eps_segments(a1, s1) == [
        seg(0, 4, {"a1"}),
        seg(4, 8, {"a1", "a2"}),
        seg(8, 10, {"a1", "a2", "a3"}),
    ]
    assert eps_segments(a2, s1) == [
        seg(4, 8, {"a1", "a2"}),
        seg(8, 10, {"a1", "a2", "a3"}),
        seg(10, 16, {"a2", "a3"}),
    ]
    # nobody arrives after a3, so its two views coincide
    assert eps_segments(a3, s1) == eas_segments(a3, s1)


def test_eps_segments_reject_unknown_agent(s1):
    with pytest.raises(UnknownAgent):
        eps_segments(AgentSpec("zz", 1, 2), s1)


# ------------------------------------------------------------------- shares


def test_ex_ante_share_fixtures(s1):
    a1, a2, _ = s1
    assert ex_ante_share(a1, [a1]) == F(10)
    assert ex_ante_share(a2, [a1, a2]) == F(9)  # 6/2 + 6
    assert ex_ante_share(a2, [a1, a2], GameParams(c=2)) == F(11)  # + c/u


def test_ex_post_share_fixtures(s1):
    a1, a2, a3 = s1
    assert ex_post_share(a1, s1) == F(20, 3)  # 4 + 2 + 2/3
    assert ex_post_share(a2, s1) == F(17, 3)  # 2 + 2/3 + 3
    assert ex_post_share(a3, s1) == F(23, 3)  # 2/3 + 3 + 4


def test_assigned_share_sums_period_lengths():
    sched = Schedule(
        periods=(
            ActivePeriod("a", 0, 3),
            ActivePeriod("b", 3, 7),
            ActivePeriod("a", 7, 9),
        ),
        switches=(),
    )
    assert assigned_share(sched, "a") == F(5)
    assert assigned_share(sched, "b") == F(4)
    assert assigned_share(sched, "never-active") == F(0)


def test_assigned_share_checks_roster_when_given(s1):
    sched = Schedule(periods=(ActivePeriod("a1", 0, 4),), switches=())
    with pytest.raises(UnknownAgent):
        assigned_share(sched, "zz", s1)


# --------------------------------------------------------------- efficiency

RG_S1_PERIODS = (
    ActivePeriod("a1", 0, 4),
    ActivePeriod("a2", 4, 8),
    ActivePeriod("a3", 8, 20),
)


def test_efficiency_single_agent_is_zero():
    a = AgentSpec("a", 0, 10)
    sched = Schedule(periods=(ActivePeriod("a", 0, 10),), switches=())
    assert efficiency(sched, [a], GameParams()) == F(0)


def test_efficiency_counts_availability_not_spent_leading(s1):
    sched = Schedule(periods=RG_S1_PERIODS, switches=())
    # (10-4) + (12-4) + (12-12)
    assert efficiency(sched, s1, GameParams()) == F(14)


def test_efficiency_subtracts_rotation_costs(s1):
    rot = SwitchEvent(8, "a2", "a3", SwitchKind.ROTATION, n_r=3, cost=F(3))
    sched = Schedule(periods=RG_S1_PERIODS, switches=(rot,))
    assert efficiency(sched, s1, GameParams(c=1)) == F(11)


def test_efficiency_flag_charges_every_switch(s1):
    switches = (
        SwitchEvent(4, "a1", "a2", SwitchKind.FRONT_JOIN, n_r=2, cost=F(0)),
        SwitchEvent(6, "a2", "a3", SwitchKind.ROTATION, n_r=2, cost=F(4)),
        SwitchEvent(8, "a3", "a2", SwitchKind.LEADER_LEAVE, n_r=2, cost=F(0)),
    )
    sched = Schedule(periods=RG_S1_PERIODS, switches=switches)
    assert efficiency(sched, s1, GameParams(c=2)) == F(10)  # only the rotation
    assert efficiency(
        sched, s1, GameParams(c=2, charge_all_switches=True)
    ) == F(8)  # flat c per switch event


# --------------------------------------------------------- schedule auditing


def kinds(violations) -> set[str]:
    return {v.kind for v in violations}


def test_validate_schedule_accepts_exact_tiling(s1):
    sched = Schedule(periods=RG_S1_PERIODS, switches=())
    assert validate_schedule(sched, s1) == []


def test_validate_schedule_flags_agent_active_while_absent(s1):
    sched = Schedule(
        periods=(ActivePeriod("a1", 0, 4), ActivePeriod("a3", 4, 20)),
        switches=(),
    )
    flagged = validate_schedule(sched, s1)
    assert any(v.kind == "active_while_absent" and v.agent == "a3" for v in flagged)


def test_validate_schedule_flags_unknown_agent(s1):
    sched = Schedule(
        periods=RG_S1_PERIODS + (ActivePeriod("zz", 18, 20),), switches=()
    )
    assert any(
        v.kind == "active_while_absent" and v.agent == "zz"
        for v in validate_schedule(sched, s1)
    )


def test_validate_schedule_flags_gap(s1):
    sched = Schedule(
        periods=(ActivePeriod("a1", 0, 4), ActivePeriod("a2", 6, 16),
                 ActivePeriod("a3", 16, 20)),
        switches=(),
    )
    flagged = validate_schedule(sched, s1)
    assert any(v.kind == "gap" and v.start == F(4) and v.end == F(6) for v in flagged)


def test_validate_schedule_flags_overlap(s1):
    sched = Schedule(
        periods=(ActivePeriod("a1", 0, 6), ActivePeriod("a2", 4, 16),
                 ActivePeriod("a3", 16, 20)),
        switches=(),
    )
    assert "overlap" in kinds(validate_schedule(sched, s1))


def test_validate_schedule_flags_idle_available_time(s1):
    # nobody covers [0, 2) although a1 is available there
    sched = Schedule(
        periods=(ActivePeriod("a1", 2, 8), ActivePeriod("a3", 8, 20)),
        switches=(),
    )
    flagged = validate_schedule(sched, s1)
    assert any(
        v.kind == "inactive_available_time" and v.start == F(0) and v.end == F(2)
        for v in flagged
    )


def test_validate_schedule_audits_switch_chains_when_present(s1):
    join = SwitchEvent(4, "a1", "a2", SwitchKind.FRONT_JOIN, n_r=2, cost=F(0))
    # one boundary documented, the other (at t=8) missing
    sched = Schedule(periods=RG_S1_PERIODS, switches=(join,))
    flagged = validate_schedule(sched, s1)
    assert kinds(flagged) == {"switch_mismatch"}
    assert flagged[0].start == F(8)

    complete = Schedule(
        periods=RG_S1_PERIODS,
        switches=(join, SwitchEvent(8, "a2", "a3", SwitchKind.FRONT_JOIN, 3, F(0))),
    )
    assert validate_schedule(complete, s1) == []


def test_validate_schedule_flags_wrong_chain_endpoints(s1):
    sched = Schedule(
        periods=RG_S1_PERIODS,
        switches=(
            SwitchEvent(4, "a1", "a2", SwitchKind.FRONT_JOIN, 2, F(0)),
            SwitchEvent(8, "a3", "a2", SwitchKind.FRONT_JOIN, 3, F(0)),  # reversed
        ),
    )
    assert "switch_mismatch" in kinds(validate_schedule(sched, s1))


def test_validate_schedule_flags_switch_at_non_boundary(s1):
    sched = Schedule(
        periods=RG_S1_PERIODS,
        switches=(
            SwitchEvent(4, "a1", "a2", SwitchKind.FRONT_JOIN, 2, F(0)),
            SwitchEvent(8, "a2", "a3", SwitchKind.FRONT_JOIN, 3, F(0)),
            SwitchEvent(9, "a3", "a3", SwitchKind.FRONT_JOIN, 3, F(0)),
        ),
    )
    flagged = validate_schedule(sched, s1)
    assert any(v.kind == "switch_mismatch" and v.start == F(9) for v in flagged)


# ------------------------------------------------------ randomized invariants


def per_segment_schedule(stream) -> Schedule:
    """A trivially valid allocation: each realized segment goes to one member."""
    periods = tuple(
        ActivePeriod(min(s.members, key=str), s.start, s.end)
        for s in stream_segments(stream)
    )
    return Schedule(periods=periods, switches=())


def test_share_identities_on_random_streams():
    rng = np.random.default_rng(7)
    for _ in range(300):
        stream = random_stream(rng)
        params = GameParams(c=F(int(rng.integers(0, 3)), int(rng.choice([1, 2]))))
        total = game_duration(stream)

        # realized shares partition the whole game once the c/u term is removed
        shares = [ex_post_share(a, stream, params) for a in stream]
        assert sum(shares) - len(stream) * params.c / params.u == total

        for a in stream:
            present = [p for p in stream if p.available_at(a.t_arrive)]
            eas = eas_segments(a, present)
            # the known member count can only shrink along the window
            counts = [len(s.members) for s in eas]
            assert counts == sorted(counts, reverse=True)
            # with no later arrival strictly inside the window, both views agree
            if not any(
                a.t_arrive < b.t_arrive < a.t_leave for b in stream if b.id != a.id
            ):
                assert ex_ante_share(a, present, params) == ex_post_share(
                    a, stream, params
                )


def test_schedule_accounting_on_random_streams():
    rng = np.random.default_rng(8)
    for _ in range(200):
        stream = random_stream(rng)
        sched = per_segment_schedule(stream)
        assert validate_schedule(sched, stream) == []

        total = game_duration(stream)
        assert sum(assigned_share(sched, a.id) for a in stream) == total

        # agent-wise efficiency equals the segment-wise closed form
        params = GameParams(u=F(int(rng.integers(1, 4))))
        segwise = sum(
            (len(s.members) - 1) * s.length * params.u
            for s in stream_segments(stream)
        )
        assert efficiency(sched, stream, params) == segwise

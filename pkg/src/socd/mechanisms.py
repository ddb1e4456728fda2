"""Allocation mechanisms for convoy-style chore division.

Three ways to decide who performs the shared chore at each instant:

* payment transfer (`pt_run`): a fixed leader rule plus per-segment side
  payments from followers, so nobody ever rotates;
* repeated game (`rg_run`): the newest arrival always takes the front and
  leads, which settles accounts across repeated encounters;
* single game (`sg_run`): every arrival is allocated a leading share up
  front and rotates to the back once it has led that long, optionally with
  dynamic re-adjustment of the unfinished members' shares as newcomers
  arrive.

All mechanisms consume a validated agent stream, process events in time
order (departures before arrivals at equal instants) and produce a
`MechanismOutcome` holding the schedule, per-agent share reports, any
payment ledger and any rotation charges.  Arithmetic is exact throughout.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .model import (
    ActivePeriod,
    AgentId,
    AgentSpec,
    GameParams,
    Schedule,
    Segment,
    ShareReport,
    SwitchEvent,
    SwitchKind,
    Time,
    eas_segments,
    ex_ante_share,
    ex_post_share,
    stream_segments,
    validate_stream,
)

__all__ = [
    "MechanismKind",
    "ConvoyState",
    "Transfer",
    "Ledger",
    "MechanismOutcome",
    "convoy_switch_cost",
    "pt_segment_payment",
    "pt_run",
    "rg_run",
    "sg_run",
    "sg_adjust_shares",
    "run_mechanism",
    "net_utilities",
]


class MechanismKind(str, Enum):
    PAYMENT_TRANSFER = "pt"
    REPEATED_GAME = "rg"
    SINGLE_GAME = "sg"
    SINGLE_GAME_DYNAMIC = "sg-da"

    @property
    def dynamic_adjust(self) -> bool:
        return self is MechanismKind.SINGLE_GAME_DYNAMIC


def convoy_switch_cost(kind: SwitchKind, n_r: int, params: GameParams) -> Fraction:
    """Cost of one switch: rotations cost c * n_r, the other kinds are free.

    A joining agent slots in at the front and a leaving leader simply exits,
    so neither forces the convoy to re-form around a rotating vehicle.
    """
    if kind is SwitchKind.ROTATION:
        return params.c * n_r
    return Fraction(0)


def pt_segment_payment(segment: Segment, params: GameParams) -> Fraction:
    """Per-follower payment to the segment's leader: |seg| * u / n_seg."""
    return segment.length * params.u / len(segment.members)


@dataclass(frozen=True)
class Transfer:
    """One side payment: `payer` compensates `payee` for leading `segment`."""

    segment: Segment
    payer: AgentId
    payee: AgentId
    amount: Fraction


@dataclass(frozen=True)
class Ledger:
    """All transfers of a payment-transfer game plus the per-agent net."""

    transfers: tuple[Transfer, ...]
    net: Mapping[AgentId, Fraction]


@dataclass
class ConvoyState:
    """Live single-game convoy: unfinished members ride in front of finished ones.

    `unfinished` is ordered by (t_leave, t_arrive), first to depart at the
    front; `finished` holds agents that already rotated, in rotation order.
    `remaining` maps each member to the leading time it still owes.
    """

    unfinished: list[AgentSpec] = field(default_factory=list)
    finished: list[AgentSpec] = field(default_factory=list)
    remaining: dict[AgentId, Fraction] = field(default_factory=dict)
    led: dict[AgentId, Fraction] = field(default_factory=dict)
    rotations: dict[AgentId, int] = field(default_factory=dict)

    @property
    def ordering(self) -> list[AgentId]:
        return [m.id for m in self.unfinished] + [m.id for m in self.finished]

    @property
    def leader(self) -> AgentSpec | None:
        if self.unfinished:
            return self.unfinished[0]
        if self.finished:
            return self.finished[0]
        return None

    def __len__(self) -> int:
        return len(self.unfinished) + len(self.finished)


@dataclass(frozen=True)
class MechanismOutcome:
    """What a mechanism produced: schedule, payments, rotation charges.

    `lead_shares` is the realized per-agent leading time; `reports` adds the
    ex-ante/ex-post comparison and is computed on first access, since the
    experiment pipelines only consume the raw shares.
    """

    kind: MechanismKind
    schedule: Schedule
    ledger: Ledger | None
    rotation_costs: Mapping[AgentId, Fraction]
    stream: tuple[AgentSpec, ...]
    params: GameParams
    lead_shares: Mapping[AgentId, Fraction]

    def assigned(self) -> dict[AgentId, Fraction]:
        return dict(self.lead_shares)

    @cached_property
    def reports(self) -> tuple[ShareReport, ...]:
        return _share_reports(self.stream, self.params, self.lead_shares)


def _share_reports(
    stream: Sequence[AgentSpec],
    params: GameParams,
    assigned: Mapping[AgentId, Fraction],
) -> tuple[ShareReport, ...]:
    reports = []
    for a in stream:
        present = [q for q in stream if q.available_at(a.t_arrive)]
        reports.append(
            ShareReport(
                agent=a.id,
                assigned=Fraction(assigned.get(a.id, 0)),
                ex_ante=ex_ante_share(a, present, params),
                ex_post=ex_post_share(a, stream, params),
            )
        )
    return tuple(reports)


def pt_run(agents: Iterable[AgentSpec], params: GameParams = GameParams()) -> MechanismOutcome:
    """Payment-transfer mechanism.

    The available agent with the earliest departure time leads (ties broken
    by earlier arrival), and in every segment each follower pays the leader
    |seg| * u / n_seg.  The leader only changes when it departs or when a
    sooner-departing agent arrives, so the schedule contains no rotations
    and switching is free.
    """
    stream = validate_stream(agents)
    by_id = {a.id: a for a in stream}
    segments = stream_segments(stream)

    periods: list[ActivePeriod] = []
    switches: list[SwitchEvent] = []
    transfers: list[Transfer] = []
    net = {a.id: Fraction(0) for a in stream}
    assigned = {a.id: Fraction(0) for a in stream}

    cur: AgentId | None = None
    cur_start: Time | None = None
    prev_end: Time | None = None
    for seg in segments:
        leader = min(
            seg.members, key=lambda i: (by_id[i].t_leave, by_id[i].t_arrive)
        )
        pay = pt_segment_payment(seg, params)
        followers = sorted(
            (i for i in seg.members if i != leader), key=lambda i: by_id[i].t_arrive
        )
        for fid in followers:
            transfers.append(Transfer(seg, fid, leader, pay))
            net[fid] -= pay
            net[leader] += pay

        if cur is None:
            cur, cur_start = leader, seg.start
        elif seg.start > prev_end:
            # hole in availability: close the period, restart without a switch
            periods.append(ActivePeriod(cur, cur_start, prev_end))
            cur, cur_start = leader, seg.start
        elif leader != cur:
            periods.append(ActivePeriod(cur, cur_start, seg.start))
            if by_id[cur].t_leave == seg.start:
                kind = SwitchKind.LEADER_LEAVE
            elif by_id[leader].t_arrive == seg.start:
                kind = SwitchKind.FRONT_JOIN
            else:
                raise RuntimeError("leader changed without an arrival or departure")
            n_r = len(seg.members)
            switches.append(
                SwitchEvent(seg.start, cur, leader, kind, n_r,
                            convoy_switch_cost(kind, n_r, params))
            )
            cur, cur_start = leader, seg.start
        prev_end = seg.end
    if cur is not None:
        periods.append(ActivePeriod(cur, cur_start, prev_end))

    for p in periods:
        assigned[p.agent] += p.length

    return MechanismOutcome(
        kind=MechanismKind.PAYMENT_TRANSFER,
        schedule=Schedule(tuple(periods), tuple(switches)),
        ledger=Ledger(tuple(transfers), net),
        rotation_costs={},
        stream=tuple(stream),
        params=params,
        lead_shares=assigned,
    )


def rg_run(agents: Iterable[AgentSpec], params: GameParams = GameParams()) -> MechanismOutcome:
    """Repeated-game load balancing.

    Every arrival joins at the front of the convoy and leads immediately;
    when the leader departs, the previous front agent resumes.  Uneven
    shares within one game are accepted and settle over repeated games, so
    no agent ever rotates and no payments change hands.
    """
    stream = validate_stream(agents)
    times = sorted({t for a in stream for t in (a.t_arrive, a.t_leave)})
    arriving = {a.t_arrive: a for a in stream}

    stack: list[AgentSpec] = []  # stack[-1] is the front of the convoy
    periods: list[ActivePeriod] = []
    switches: list[SwitchEvent] = []
    cur_start: Time | None = None

    for t in times:
        pre = stack[-1] if stack else None
        leader_departed = pre is not None and pre.t_leave == t
        if any(m.t_leave == t for m in stack):
            stack = [m for m in stack if m.t_leave > t]
        newcomer = arriving.get(t)
        if newcomer is not None:
            stack.append(newcomer)
        post = stack[-1] if stack else None
        if post is pre:
            continue
        if pre is not None:
            periods.append(ActivePeriod(pre.id, cur_start, t))
        if post is not None:
            cur_start = t
            if pre is not None:
                kind = (
                    SwitchKind.LEADER_LEAVE if leader_departed else SwitchKind.FRONT_JOIN
                )
                n_r = len(stack)
                switches.append(
                    SwitchEvent(t, pre.id, post.id, kind, n_r,
                                convoy_switch_cost(kind, n_r, params))
                )

    assigned = {a.id: Fraction(0) for a in stream}
    for p in periods:
        assigned[p.agent] += p.length

    return MechanismOutcome(
        kind=MechanismKind.REPEATED_GAME,
        schedule=Schedule(tuple(periods), tuple(switches)),
        ledger=None,
        rotation_costs={},
        stream=tuple(stream),
        params=params,
        lead_shares=assigned,
    )


def sg_adjust_shares(
    new_agent: AgentSpec, state: ConvoyState, eas: Sequence[Segment]
) -> dict[AgentId, Fraction]:
    """Dynamic adjustment: newcomers relieve the unfinished members.

    For every segment of the newcomer's ex-ante decomposition, the share the
    newcomer absorbs (|seg|/n_seg) is split evenly among the unfinished
    members still available in that segment, and deducted from their
    remaining shares, clamped at zero.  Finished members and the newcomer
    itself are never adjusted.  Returns the updated remaining map.
    """
    updated = dict(state.remaining)
    for seg in eas:
        share = seg.length / len(seg.members)
        pool = [
            m for m in state.unfinished
            if m.id != new_agent.id and m.t_leave > seg.start
        ]
        if not pool:
            continue
        cut = share / len(pool)
        for m in pool:
            updated[m.id] = max(Fraction(0), updated[m.id] - cut)
    return updated


def sg_run(
    agents: Iterable[AgentSpec],
    params: GameParams = GameParams(),
    dynamic_adjust: bool = False,
    include_switch_allowance: bool = False,
    observer: Callable[[Time, ConvoyState], None] | None = None,
) -> MechanismOutcome:
    """Single-game load balancing, optionally with dynamic adjustment.

    Each arrival is allocated a remaining leading share equal to its
    ex-ante proportional segment sum over the agents present (plus c/u when
    `include_switch_allowance` is set).  Unfinished members ride in front of
    finished ones, ordered by departure time, and the front agent leads
    until it departs, until a sooner-departing agent arrives in front of it,
    or until its remaining share reaches zero, at which point it rotates to
    the back and pays c * n_r.  With `dynamic_adjust`, every arrival also
    reduces the unfinished members' remaining shares via
    `sg_adjust_shares`.

    At one instant, departures are processed first, then the arrival, then
    any rotation, so leaving agents never pay and an arrival in front of an
    exhausted leader pre-empts its rotation.  If every member has finished
    but the convoy is not empty, the front finished agent leads on; the
    overshoot is visible in its report.  `observer`, when given, is called
    with (time, state) after every processed event.
    """
    stream = validate_stream(agents)
    n = len(stream)

    state = ConvoyState(
        led={a.id: Fraction(0) for a in stream},
        rotations={a.id: 0 for a in stream},
    )
    unfinished, finished = state.unfinished, state.finished
    remaining, led, rotations = state.remaining, state.led, state.rotations
    rotation_costs = {a.id: Fraction(0) for a in stream}

    periods: list[ActivePeriod] = []
    switches: list[SwitchEvent] = []

    i = 0  # next arrival index
    t: Time | None = None
    cur: AgentSpec | None = None  # leader of the currently open period
    cur_start: Time | None = None

    DEPART, ARRIVE, ROTATE = 0, 1, 2  # priority at equal instants

    while i < n or len(state):
        if len(state):
            t_next, action = min(m.t_leave for m in unfinished + finished), DEPART
            if i < n and (stream[i].t_arrive, ARRIVE) < (t_next, action):
                t_next, action = stream[i].t_arrive, ARRIVE
            if unfinished:
                t_rot = t + remaining[unfinished[0].id]
                if (t_rot, ROTATE) < (t_next, action):
                    t_next, action = t_rot, ROTATE
        else:
            t_next, action = stream[i].t_arrive, ARRIVE

        # accrue the lead since the previous event
        if cur is not None and t_next > t:
            delta = t_next - t
            led[cur.id] += delta
            if unfinished and unfinished[0] is cur:
                remaining[cur.id] -= delta
                assert remaining[cur.id] >= 0

        pre = state.leader
        pre_departed = False
        joined: AgentSpec | None = None

        if action == DEPART:
            pre_departed = pre is not None and pre.t_leave == t_next
            unfinished[:] = [m for m in unfinished if m.t_leave > t_next]
            finished[:] = [m for m in finished if m.t_leave > t_next]
        elif action == ARRIVE:
            a = stream[i]
            i += 1
            present = unfinished + finished + [a]
            eas = eas_segments(a, present)
            share = sum((seg.length / len(seg.members) for seg in eas), Fraction(0))
            if include_switch_allowance:
                share += params.c / params.u
            remaining[a.id] = share
            bisect.insort(unfinished, a, key=lambda m: (m.t_leave, m.t_arrive))
            if dynamic_adjust:
                updated = sg_adjust_shares(a, state, eas)
                remaining.clear()
                remaining.update(updated)
            joined = a
        else:  # ROTATE: the front agent has exhausted its share
            rotator = unfinished.pop(0)
            assert remaining[rotator.id] == 0
            finished.append(rotator)
            # Alone in the convoy there is nothing to rotate behind: the agent
            # simply continues leading (overshoot), with no maneuver to pay for.
            if state.leader is not rotator:
                rotations[rotator.id] += 1
                rotation_costs[rotator.id] += convoy_switch_cost(
                    SwitchKind.ROTATION, len(state), params
                )

        post = state.leader
        if post is not pre:
            if pre is not None and cur_start is not None and t_next > cur_start:
                periods.append(ActivePeriod(pre.id, cur_start, t_next))
            if post is not None and pre is not None:
                if action == DEPART and pre_departed:
                    kind = SwitchKind.LEADER_LEAVE
                elif action == ARRIVE and joined is post:
                    kind = SwitchKind.FRONT_JOIN
                elif action == ROTATE:
                    kind = SwitchKind.ROTATION
                else:
                    raise RuntimeError("leader changed without a matching event")
                n_r = len(state)
                switches.append(
                    SwitchEvent(t_next, pre.id, post.id, kind, n_r,
                                convoy_switch_cost(kind, n_r, params))
                )
            elif post is not None and periods and periods[-1].stop == t_next:
                # the convoy emptied and re-formed at the same instant: the
                # departing leader hands straight over to the newcomer
                kind = SwitchKind.LEADER_LEAVE
                n_r = len(state)
                switches.append(
                    SwitchEvent(t_next, periods[-1].agent, post.id, kind, n_r,
                                convoy_switch_cost(kind, n_r, params))
                )
            cur = post
            cur_start = t_next if post is not None else None

        t = t_next
        if observer is not None:
            observer(t, state)

    kind = (
        MechanismKind.SINGLE_GAME_DYNAMIC if dynamic_adjust else MechanismKind.SINGLE_GAME
    )
    return MechanismOutcome(
        kind=kind,
        schedule=Schedule(tuple(periods), tuple(switches)),
        ledger=None,
        rotation_costs={k: v for k, v in rotation_costs.items() if v or rotations[k]},
        stream=tuple(stream),
        params=params,
        lead_shares=led,
    )


def run_mechanism(
    kind: MechanismKind | str,
    agents: Iterable[AgentSpec],
    params: GameParams = GameParams(),
    include_switch_allowance: bool = False,
) -> MechanismOutcome:
    """Dispatch by mechanism kind (accepts the CLI spellings)."""
    kind = MechanismKind(kind)
    if kind is MechanismKind.PAYMENT_TRANSFER:
        return pt_run(agents, params)
    if kind is MechanismKind.REPEATED_GAME:
        return rg_run(agents, params)
    return sg_run(
        agents,
        params,
        dynamic_adjust=kind.dynamic_adjust,
        include_switch_allowance=include_switch_allowance,
    )


def net_utilities(
    outcome: MechanismOutcome,
    agents: Iterable[AgentSpec],
    params: GameParams,
) -> dict[AgentId, Fraction]:
    """Per-agent net utility: u per unit of availability not spent leading,
    plus net transfers received, minus rotation charges paid."""
    stream = validate_stream(agents)
    assigned = outcome.assigned()
    net: dict[AgentId, Fraction] = {}
    for a in stream:
        value = params.u * (a.window - assigned[a.id])
        if outcome.ledger is not None:
            value += outcome.ledger.net.get(a.id, Fraction(0))
        value -= outcome.rotation_costs.get(a.id, Fraction(0))
        net[a.id] = value
    return net

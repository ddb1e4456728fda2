"""Core model for sequential online chore division games.

A game is an online stream of agents, each available over one time window,
with exactly one available agent performing a shared chore at any instant.
This module holds the value types (agents, parameters, segments, schedules),
the segment decompositions behind ex-ante and ex-post proportional shares,
and the schedule validity and efficiency accounting shared by every
mechanism.

Times and shares are exact `fractions.Fraction` values throughout; floats
belong to the metrics and reporting layers.  All intervals are half-open
``[start, end)`` so adjacent segments and active periods tile without
overlap.  When a departure and an arrival coincide, the departure is
processed first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import pairwise
from typing import Callable, Iterable, Sequence, Union

__all__ = [
    "AgentId",
    "Time",
    "as_time",
    "AgentSpec",
    "GameParams",
    "Segment",
    "ActivePeriod",
    "SwitchKind",
    "SwitchEvent",
    "Schedule",
    "ShareReport",
    "Violation",
    "EmptyStream",
    "EmptyWindow",
    "DuplicateArrival",
    "InvalidPresentSet",
    "UnknownAgent",
    "validate_stream",
    "availability_union",
    "game_duration",
    "stream_segments",
    "eas_segments",
    "eps_segments",
    "ex_ante_share",
    "ex_post_share",
    "assigned_share",
    "efficiency",
    "validate_schedule",
]

AgentId = Union[str, int]
Time = Fraction


def as_time(value: int | str | Fraction) -> Fraction:
    """Coerce a time-like value to an exact Fraction.

    Accepts ints, Fractions and strings ("7", "0.25", "16/3").  Floats are
    rejected: their binary value is rarely the decimal the caller meant, and
    the model is exact by contract.
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(
            f"times must be exact (int, str or Fraction), not {type(value).__name__}"
        )
    return Fraction(value)


class EmptyStream(ValueError):
    """The agent stream is empty."""


class EmptyWindow(ValueError):
    """An agent's availability window has zero or negative length."""

    def __init__(self, agent: AgentId):
        self.agent = agent
        super().__init__(f"agent {agent!r} has an empty availability window")


class DuplicateArrival(ValueError):
    """Two agents share an arrival time; arrivals must be distinct."""

    def __init__(self, first: AgentId, second: AgentId):
        self.agents = (first, second)
        super().__init__(f"agents {first!r} and {second!r} arrive at the same instant")


class InvalidPresentSet(ValueError):
    """A listed agent is not actually available at the reference instant."""


class UnknownAgent(ValueError):
    """The referenced agent is not part of the game."""

    def __init__(self, agent: AgentId):
        self.agent = agent
        super().__init__(f"unknown agent {agent!r}")


@dataclass(frozen=True)
class AgentSpec:
    """One agent of the stream: an identifier and its availability window.

    Availability is the half-open interval [t_arrive, t_leave).
    """

    id: AgentId
    t_arrive: Time
    t_leave: Time

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_arrive", as_time(self.t_arrive))
        object.__setattr__(self, "t_leave", as_time(self.t_leave))
        if self.t_leave <= self.t_arrive:
            raise EmptyWindow(self.id)

    @property
    def window(self) -> Fraction:
        return self.t_leave - self.t_arrive

    def available_at(self, t: Time) -> bool:
        return self.t_arrive <= t < self.t_leave

    def covers(self, start: Time, end: Time) -> bool:
        """Available throughout [start, end)."""
        return self.t_arrive <= start and self.t_leave >= end


@dataclass(frozen=True)
class GameParams:
    """Game constants: per-unit-time utility u, switch cost c.

    The active-time cost ca must be zero; the mechanisms' accounting assumes
    leading costs exactly the forgone utility.  `charge_all_switches` makes
    the efficiency measure charge a flat c for every switch event instead of
    only the cost-bearing rotations.
    """

    u: Fraction = Fraction(1)
    c: Fraction = Fraction(0)
    ca: Fraction = Fraction(0)
    charge_all_switches: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", Fraction(self.u))
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "ca", Fraction(self.ca))
        if self.u <= 0:
            raise ValueError("u must be positive")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        if self.ca != 0:
            raise ValueError("ca must be zero")


@dataclass(frozen=True)
class Segment:
    """A maximal interval over which the set of available agents is constant."""

    start: Time
    end: Time
    members: frozenset[AgentId]

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", as_time(self.start))
        object.__setattr__(self, "end", as_time(self.end))
        object.__setattr__(self, "members", frozenset(self.members))
        if self.end <= self.start:
            raise ValueError("segment must have positive length")
        if not self.members:
            raise ValueError("segment must have at least one member")

    @property
    def length(self) -> Fraction:
        return self.end - self.start


@dataclass(frozen=True)
class ActivePeriod:
    """A stretch [start, stop) during which one agent performs the chore."""

    agent: AgentId
    start: Time
    stop: Time

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", as_time(self.start))
        object.__setattr__(self, "stop", as_time(self.stop))
        if self.stop < self.start:
            raise ValueError("active period must not end before it starts")

    @property
    def length(self) -> Fraction:
        return self.stop - self.start


class SwitchKind(str, Enum):
    FRONT_JOIN = "front_join"
    LEADER_LEAVE = "leader_leave"
    ROTATION = "rotation"


@dataclass(frozen=True)
class SwitchEvent:
    """A change of active agent.

    Only rotations bear a cost (c times the convoy size n_r at the switch);
    a new agent joining at the front and a leader leaving are free.
    """

    time: Time
    outgoing: AgentId | None
    incoming: AgentId | None
    kind: SwitchKind
    n_r: int
    cost: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "time", as_time(self.time))
        object.__setattr__(self, "cost", Fraction(self.cost))
        if self.n_r < 0:
            raise ValueError("n_r must be non-negative")
        if self.cost < 0:
            raise ValueError("switch cost must be non-negative")


@dataclass(frozen=True)
class Schedule:
    """A complete allocation: active periods plus the switch events between them."""

    periods: tuple[ActivePeriod, ...]
    switches: tuple[SwitchEvent, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "periods", tuple(self.periods))
        object.__setattr__(self, "switches", tuple(self.switches))


@dataclass(frozen=True)
class ShareReport:
    """Per-agent outcome: assigned share next to both proportional benchmarks."""

    agent: AgentId
    assigned: Fraction
    ex_ante: Fraction
    ex_post: Fraction


@dataclass(frozen=True)
class Violation:
    """One defect found by validate_schedule."""

    kind: str
    start: Time | None = None
    end: Time | None = None
    agent: AgentId | None = None
    message: str = ""


# validate_schedule violation kinds
GAP = "gap"
OVERLAP = "overlap"
INACTIVE_AVAILABLE_TIME = "inactive_available_time"
ACTIVE_WHILE_ABSENT = "active_while_absent"
SWITCH_MISMATCH = "switch_mismatch"


def validate_stream(agents: Iterable[AgentSpec]) -> list[AgentSpec]:
    """Check a stream and return it sorted by arrival time.

    Rejects empty streams, empty windows, duplicate ids and duplicate
    arrival instants (the model assumes agents arrive one at a time).
    """
    stream = list(agents)
    if not stream:
        raise EmptyStream("agent stream is empty")
    seen_ids: set[AgentId] = set()
    for a in stream:
        if a.id in seen_ids:
            raise ValueError(f"duplicate agent id {a.id!r}")
        seen_ids.add(a.id)
        if a.t_leave <= a.t_arrive:  # defensive; AgentSpec already rejects this
            raise EmptyWindow(a.id)
    stream.sort(key=lambda a: a.t_arrive)
    for prev, nxt in pairwise(stream):
        if prev.t_arrive == nxt.t_arrive:
            raise DuplicateArrival(prev.id, nxt.id)
    return stream


def availability_union(agents: Iterable[AgentSpec]) -> list[tuple[Time, Time]]:
    """Merged intervals during which at least one agent is available."""
    windows = sorted((a.t_arrive, a.t_leave) for a in agents)
    merged: list[tuple[Time, Time]] = []
    for start, end in windows:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def game_duration(agents: Iterable[AgentSpec]) -> Fraction:
    """Total time with at least one available agent."""
    return sum((end - start for start, end in availability_union(agents)), Fraction(0))


def _cut_segments(
    start: Time,
    end: Time,
    cuts: Iterable[Time],
    members_at: Callable[[Time, Time], frozenset[AgentId]],
) -> list[Segment]:
    bounds = [start, *sorted({t for t in cuts if start < t < end}), end]
    return [Segment(s, e, members_at(s, e)) for s, e in pairwise(bounds)]


def stream_segments(agents: Sequence[AgentSpec]) -> list[Segment]:
    """Segment the whole realized game: every arrival or departure cuts.

    Stretches with no available agent are skipped, so consecutive segments
    may be non-adjacent when availability has a hole.
    """
    stream = validate_stream(agents)
    times = sorted({t for a in stream for t in (a.t_arrive, a.t_leave)})
    out: list[Segment] = []
    for s, e in pairwise(times):
        members = frozenset(a.id for a in stream if a.covers(s, e))
        if members:
            out.append(Segment(s, e, members))
    return out


def eas_segments(agent: AgentSpec, present: Iterable[AgentSpec]) -> list[Segment]:
    """Ex-ante segmentation of `agent`'s window, as known at its arrival.

    `present` is the set of agents available at agent.t_arrive, including
    the agent itself.  Within the window, only the departures of present
    agents are known in advance, so those are the only cut points; the
    member count is non-increasing across the returned segments.
    """
    members = list(present)
    if not any(p.id == agent.id for p in members):
        raise InvalidPresentSet(f"present set must include agent {agent.id!r}")
    for p in members:
        if not p.available_at(agent.t_arrive):
            raise InvalidPresentSet(
                f"agent {p.id!r} is not available at t={agent.t_arrive}"
            )

    def members_at(s: Time, e: Time) -> frozenset[AgentId]:
        return frozenset(p.id for p in members if p.t_leave >= e)

    return _cut_segments(
        agent.t_arrive, agent.t_leave, (p.t_leave for p in members), members_at
    )


def eps_segments(agent: AgentSpec, all_agents: Iterable[AgentSpec]) -> list[Segment]:
    """Ex-post segmentation of `agent`'s window over the realized stream.

    Every arrival or departure that falls strictly inside the window starts
    a new segment, so unlike the ex-ante view the member count can grow.
    """
    stream = validate_stream(all_agents)
    if not any(a.id == agent.id for a in stream):
        raise UnknownAgent(agent.id)

    def members_at(s: Time, e: Time) -> frozenset[AgentId]:
        return frozenset(a.id for a in stream if a.covers(s, e))

    cuts = (t for a in stream for t in (a.t_arrive, a.t_leave))
    return _cut_segments(agent.t_arrive, agent.t_leave, cuts, members_at)


def _share_from_segments(segments: Iterable[Segment], params: GameParams) -> Fraction:
    total = sum((seg.length / len(seg.members) for seg in segments), Fraction(0))
    return total + params.c / params.u


def ex_ante_share(
    agent: AgentSpec,
    present: Iterable[AgentSpec],
    params: GameParams = GameParams(),
) -> Fraction:
    """Proportional share promised at arrival: sum of |seg|/n_seg plus c/u."""
    return _share_from_segments(eas_segments(agent, present), params)


def ex_post_share(
    agent: AgentSpec,
    all_agents: Iterable[AgentSpec],
    params: GameParams = GameParams(),
) -> Fraction:
    """Proportional share judged on the realized stream: |seg|/n_seg plus c/u."""
    return _share_from_segments(eps_segments(agent, all_agents), params)


def assigned_share(
    schedule: Schedule,
    agent: AgentId,
    agents: Iterable[AgentSpec] | None = None,
) -> Fraction:
    """Total active time of `agent` in `schedule`.

    An agent with no periods has share 0; if a roster is given, asking about
    an agent outside it raises UnknownAgent instead.
    """
    if agents is not None and not any(a.id == agent for a in agents):
        raise UnknownAgent(agent)
    return sum(
        (p.length for p in schedule.periods if p.agent == agent), Fraction(0)
    )


def efficiency(
    schedule: Schedule, agents: Iterable[AgentSpec], params: GameParams
) -> Fraction:
    """Social welfare of a schedule.

    Each agent earns u per unit of availability spent not leading, and the
    costed switches are subtracted.  Equals the segment-wise form
    sum((n_seg - 1) * |seg| * u) minus total switch costs.
    """
    stream = validate_stream(agents)
    gained = sum(
        (
            params.u * (a.window - assigned_share(schedule, a.id))
            for a in stream
        ),
        Fraction(0),
    )
    if params.charge_all_switches:
        cost = params.c * len(schedule.switches)
    else:
        cost = sum((ev.cost for ev in schedule.switches), Fraction(0))
    return gained - cost


def _chain_consistent(
    events: Sequence[SwitchEvent], outgoing: AgentId, incoming: AgentId
) -> bool:
    """Events at one boundary must link outgoing -> ... -> incoming."""
    if not events:
        return False
    if events[0].outgoing != outgoing or events[-1].incoming != incoming:
        return False
    return all(a.incoming == b.outgoing for a, b in pairwise(events))


def validate_schedule(
    schedule: Schedule, agents: Iterable[AgentSpec]
) -> list[Violation]:
    """Audit a schedule against its stream; an empty list means valid.

    Checked: periods tile the availability union exactly (no gap, no
    overlap, no available time left idle), agents are only active while
    available, and every boundary between different agents carries a
    consistent chain of switch events (exactly one in the common case).
    """
    stream = validate_stream(agents)
    roster = {a.id: a for a in stream}
    violations: list[Violation] = []

    periods = sorted(schedule.periods, key=lambda p: (p.start, p.stop))
    for p in periods:
        spec = roster.get(p.agent)
        if spec is None:
            violations.append(
                Violation(ACTIVE_WHILE_ABSENT, p.start, p.stop, p.agent,
                          f"unknown agent {p.agent!r} active")
            )
        elif not spec.covers(p.start, p.stop):
            violations.append(
                Violation(ACTIVE_WHILE_ABSENT, p.start, p.stop, p.agent,
                          f"agent {p.agent!r} active outside its window")
            )

    for prev, nxt in pairwise(periods):
        if nxt.start < prev.stop:
            violations.append(
                Violation(OVERLAP, nxt.start, min(prev.stop, nxt.stop), nxt.agent,
                          f"periods of {prev.agent!r} and {nxt.agent!r} overlap")
            )

    # Uncovered availability: holes strictly between periods are gaps,
    # anything at the edges (or with no periods at all) is idle time.
    union = availability_union(stream)
    covered = [(p.start, p.stop) for p in periods if p.stop > p.start]
    uncovered: list[tuple[Time, Time]] = []
    for a_start, a_end in union:
        cursor = a_start
        for c_start, c_stop in covered:
            if c_stop <= cursor or c_start >= a_end:
                continue
            if c_start > cursor:
                uncovered.append((cursor, min(c_start, a_end)))
            cursor = max(cursor, c_stop)
            if cursor >= a_end:
                break
        if cursor < a_end:
            uncovered.append((cursor, a_end))
    first_start = periods[0].start if periods else None
    last_stop = periods[-1].stop if periods else None
    for start, end in uncovered:
        between = (
            first_start is not None and start >= first_start and end <= last_stop
        )
        kind = GAP if between else INACTIVE_AVAILABLE_TIME
        violations.append(
            Violation(kind, start, end, None, "available time with no active agent")
        )

    # A schedule without switch events is a plain tiling; chains are only
    # audited once the schedule claims to describe the handovers too.
    by_time: dict[Time, list[SwitchEvent]] = {}
    for ev in schedule.switches:
        by_time.setdefault(ev.time, []).append(ev)
    boundary_times: set[Time] = set()
    for prev, nxt in pairwise(periods):
        if prev.stop != nxt.start or prev.agent == nxt.agent:
            continue
        boundary_times.add(nxt.start)
        if not schedule.switches:
            continue
        chain = by_time.get(nxt.start, [])
        if not _chain_consistent(chain, prev.agent, nxt.agent):
            violations.append(
                Violation(SWITCH_MISMATCH, nxt.start, nxt.start, nxt.agent,
                          f"boundary {prev.agent!r}->{nxt.agent!r} lacks a "
                          f"consistent switch chain")
            )
    for t, events in sorted(by_time.items()):
        if t not in boundary_times:
            violations.append(
                Violation(SWITCH_MISMATCH, t, t, None,
                          "switch event at a non-boundary instant")
            )

    return violations

"""Seeded traffic experiments that exercise the mechanisms at scale.

Two setups:

* ring road: vehicles park at stations on a circular road and re-join a
  single convoy with fixed probability whenever it passes, under
  repeated-game leadership.  Measures how fast each vehicle's cumulative
  lead converges to its cumulative proportional share.
* highway: independent convoys on a straight road, each a fresh stream of
  agents with station-indexed arrival and departure times.  Pools the
  per-agent lead ratios and compares mechanisms by the Gini coefficient of
  those ratios, under a uniform or a commuter-hub (bimodal) entry pattern.

Sampling uses one spawned child generator per convoy, so results are
reproducible from the experiment seed and insensitive to which mechanisms
are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .mechanisms import MechanismKind, net_utilities, run_mechanism
from .metrics import (
    UNSATISFIED_THRESHOLD,
    ConvergenceCurve,
    ParticipationRecord,
    gini,
)
from .model import AgentSpec, GameParams, ex_post_share, validate_stream

__all__ = [
    "RingRoadParams",
    "HighwayParams",
    "ExperimentResult",
    "sample_stream",
    "ring_road_experiment",
    "highway_experiment",
    "aggregate_curves",
    "HIGHWAY_MECHANISMS",
]

HIGHWAY_MECHANISMS = (
    MechanismKind.REPEATED_GAME,
    MechanismKind.SINGLE_GAME,
    MechanismKind.SINGLE_GAME_DYNAMIC,
)


@dataclass(frozen=True)
class RingRoadParams:
    """Circular-road rejoin experiment.

    Stations sit one section apart on a ring; a single convoy slot cycles
    the ring forever (even while empty).  Parked vehicles rejoin with
    `join_probability` whenever the convoy passes, ride a freshly sampled
    trip distance (rounded up to the next station), and park again.  The
    run stops once the mean number of completed participations per vehicle
    reaches the target.
    """

    n_stations: int = 100
    road_length: float = 100.0
    n_vehicles: int = 100
    join_probability: float = 0.1
    target_mean_participations: float = 1000.0
    curve_step: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_stations < 1 or self.n_vehicles < 1:
            raise ValueError("n_stations and n_vehicles must be positive")
        if not 0.0 <= self.join_probability <= 1.0:
            raise ValueError("join_probability must lie in [0, 1]")
        if self.road_length <= 0 or self.curve_step <= 0:
            raise ValueError("road_length and curve_step must be positive")
        if self.target_mean_participations <= 0:
            raise ValueError("target_mean_participations must be positive")


@dataclass(frozen=True)
class HighwayParams:
    """Straight-road convoy experiment.

    Each convoy is an independent stream of agents whose arrival and
    departure times are their entry and exit station indices.  `uniform`
    samples entries anywhere; `bimodal` routes 80% of agents between the
    first and last 10% of stations (commuter hubs) and samples the rest
    uniformly.  Agents sharing an entry station are spaced by sub-station
    offsets, so arrival times stay distinct.
    """

    n_stations: int = 100
    n_convoys: int = 100
    agents_per_convoy: int = 10
    configuration: str = "uniform"
    switch_cost: int | Fraction = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.configuration not in ("uniform", "bimodal"):
            raise ValueError("configuration must be 'uniform' or 'bimodal'")
        if self.n_stations < 2:
            raise ValueError("need at least two stations")
        if self.n_convoys < 1 or self.agents_per_convoy < 1:
            raise ValueError("n_convoys and agents_per_convoy must be positive")
        if self.agents_per_convoy > self.n_stations - 1:
            raise ValueError("agents_per_convoy must be below n_stations")


@dataclass(frozen=True)
class ExperimentResult:
    """One experiment run: records plus the setup-specific aggregates."""

    kind: str
    seed: int
    records: tuple[ParticipationRecord, ...]
    curve: ConvergenceCurve | None
    gini_cells: dict[str, float]
    params: RingRoadParams | HighwayParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))


# Sub-station spacing for same-station joiners; must stay below one station
# so the offsets never reach the next station or any exit time.
ENTRY_OFFSET = Fraction(1, 1000)


def sample_stream(
    configuration: str,
    rng: np.random.Generator,
    n_agents: int = 10,
    n_stations: int = 100,
) -> list[AgentSpec]:
    """Sample one convoy's agent stream.

    Uniform scheme: the (entry, exit) pair is drawn uniformly over all
    station pairs with entry < exit, by redrawing both until they are
    ordered.  Bimodal scheme: with probability 0.8 the agent commutes
    hub-to-hub, entering in the first 10% of stations and exiting in the
    last 10%; otherwise the uniform scheme applies.  Several agents may
    enter at the same station; their order is randomized and they are
    spaced by sub-station offsets so that arrival times stay distinct,
    with the last one in arriving latest.  Ids are 0..n_agents-1.
    """
    hub = max(1, n_stations // 10)
    drawn: list[tuple[int, int, int]] = []
    for i in range(n_agents):
        for _ in range(1000):
            if configuration == "bimodal" and rng.random() < 0.8:
                entry = int(rng.integers(1, hub + 1))
                exit_ = int(rng.integers(n_stations - hub + 1, n_stations + 1))
            else:
                entry = int(rng.integers(1, n_stations + 1))
                exit_ = int(rng.integers(1, n_stations + 1))
                if exit_ <= entry:
                    continue
            drawn.append((entry, exit_, i))
            break
        else:
            raise RuntimeError("could not sample an ordered entry/exit pair")

    by_station: dict[int, list[tuple[int, int, int]]] = {}
    for entry, exit_, i in drawn:
        by_station.setdefault(entry, []).append((entry, exit_, i))
    agents: list[AgentSpec] = []
    for entry in sorted(by_station):
        group = by_station[entry]
        if len(group) > 1:
            group = [group[j] for j in rng.permutation(len(group))]
        for rank, (_, exit_, i) in enumerate(group):
            agents.append(AgentSpec(i, Fraction(entry) + rank * ENTRY_OFFSET, exit_))
    return agents


def highway_experiment(
    params: HighwayParams,
    mechanisms: Sequence[MechanismKind | str] = HIGHWAY_MECHANISMS,
) -> ExperimentResult:
    """Run every convoy under every requested mechanism.

    The lead ratio denominator is always the ex-post proportional segment
    sum (no switch-cost addend), i.e. the share the payment-transfer
    mechanism would charge for.  Gini cells with fewer than two records are
    omitted.
    """
    kinds = [MechanismKind(m) for m in mechanisms]
    game_params = GameParams(u=Fraction(1), c=Fraction(params.switch_cost))
    share_params = GameParams(u=Fraction(1), c=Fraction(0))
    children = np.random.SeedSequence(params.seed).spawn(params.n_convoys)

    records: list[ParticipationRecord] = []
    for ci, child in enumerate(children):
        rng = np.random.default_rng(child)
        stream = validate_stream(
            sample_stream(
                params.configuration, rng, params.agents_per_convoy, params.n_stations
            )
        )
        epps = {a.id: ex_post_share(a, stream, share_params) for a in stream}
        for kind in kinds:
            outcome = run_mechanism(kind, stream, game_params)
            nets = net_utilities(outcome, stream, game_params)
            assigned = outcome.assigned()
            for a in stream:
                records.append(
                    ParticipationRecord(
                        agent=a.id,
                        convoy=ci,
                        actual_lead=float(assigned[a.id]),
                        epps=float(epps[a.id]),
                        ratio=float(assigned[a.id] / epps[a.id]),
                        mechanism=kind.value,
                        rotations=1 if a.id in outcome.rotation_costs else 0,
                        net_utility=float(nets[a.id]),
                    )
                )

    gini_cells: dict[str, float] = {}
    for kind in kinds:
        ratios = [r.ratio for r in records if r.mechanism == kind.value]
        if len(ratios) >= 2:
            gini_cells[kind.value] = gini(ratios)

    return ExperimentResult(
        kind="highway",
        seed=params.seed,
        records=tuple(records),
        curve=None,
        gini_cells=gini_cells,
        params=params,
    )


def ring_road_experiment(params: RingRoadParams) -> ExperimentResult:
    """Simulate the rejoin loop until the target mean participation count.

    Leadership follows the repeated-game rule: same-station joiners are
    pushed to the front in a randomized order (the last one leads) and the
    previous front agent resumes when the leader exits.  Per section, every
    member accrues 1/n to its proportional share and the leader accrues one
    section of actual lead.  The convergence curve samples, at every
    `curve_step` of mean participations, the fraction of vehicles whose
    cumulative lead exceeds their cumulative share by more than 10%.
    """
    rng = np.random.default_rng(params.seed)
    n_stations, n_vehicles = params.n_stations, params.n_vehicles
    p = params.join_probability
    section_length = params.road_length / n_stations

    records: list[ParticipationRecord] = []
    points: list[tuple[float, float]] = []

    if p > 0.0:
        parked: list[list[int]] = [[] for _ in range(n_stations)]
        for vid, st in enumerate(rng.integers(0, n_stations, size=n_vehicles)):
            parked[int(st)].append(vid)

        stack: list[int] = []  # stack[-1] is the front of the convoy
        dest: dict[int, int] = {}
        join_cum: dict[int, float] = {}
        join_section: dict[int, int] = {}
        led_count: dict[int, int] = {}

        cum_inv = 0.0  # running sum of 1/n over sections with a non-empty convoy
        section = 0
        cum_actual = np.zeros(n_vehicles)
        cum_epps = np.zeros(n_vehicles)
        participated = np.zeros(n_vehicles, dtype=bool)

        total_records = 0
        target_records = params.target_mean_participations * n_vehicles
        next_checkpoint = params.curve_step

        station = 0
        while total_records < target_records:
            candidates = parked[station]
            parked[station] = []

            # exits first: a vehicle never rejoins on the visit it parks
            exited: list[int] = []
            if stack:
                exited = [vid for vid in stack if dest[vid] == station]
                if exited:
                    stack = [vid for vid in stack if dest[vid] != station]
                for vid in exited:
                    actual = float(led_count.pop(vid))
                    epps = cum_inv - join_cum.pop(vid)
                    aboard = section - join_section.pop(vid)
                    del dest[vid]
                    records.append(
                        ParticipationRecord(
                            agent=vid,
                            convoy=total_records,
                            actual_lead=actual,
                            epps=epps,
                            mechanism=MechanismKind.REPEATED_GAME.value,
                            rotations=0,
                            net_utility=float(aboard) - actual,
                        )
                    )
                    cum_actual[vid] += actual
                    cum_epps[vid] += epps
                    participated[vid] = True
                    total_records += 1
                while (
                    next_checkpoint <= params.target_mean_participations
                    and total_records / n_vehicles >= next_checkpoint
                ):
                    ratios = cum_actual[participated] / cum_epps[participated]
                    frac = float(np.mean(ratios > UNSATISFIED_THRESHOLD))
                    points.append((next_checkpoint, frac))
                    next_checkpoint += params.curve_step

            # join draws from the vehicles parked before this visit
            stayed = candidates
            if candidates:
                draws = rng.random(len(candidates))
                joiners = [v for v, d in zip(candidates, draws) if d < p]
                stayed = [v for v, d in zip(candidates, draws) if d >= p]
                if len(joiners) > 1:
                    order = rng.permutation(len(joiners))
                    joiners = [joiners[k] for k in order]
                for vid in joiners:
                    trip = rng.uniform(0.0, params.road_length)
                    sections = int(trip // section_length) + 1
                    dest[vid] = (station + sections) % n_stations
                    stack.append(vid)
                    join_cum[vid] = cum_inv
                    join_section[vid] = section
                    led_count[vid] = 0
            parked[station] = stayed + exited

            if stack:
                cum_inv += 1.0 / len(stack)
                led_count[stack[-1]] += 1
            section += 1
            station = (station + 1) % n_stations

    curve = ConvergenceCurve(
        points=tuple(points), band=tuple((y, y) for _, y in points)
    )
    return ExperimentResult(
        kind="ring_road",
        seed=params.seed,
        records=tuple(records),
        curve=curve,
        gini_cells={},
        params=params,
    )


def aggregate_curves(curves: Sequence[ConvergenceCurve]) -> ConvergenceCurve:
    """Average same-grid curves across seeds; the band is mean +- one sd."""
    if not curves:
        raise ValueError("no curves to aggregate")
    xs = [x for x, _ in curves[0].points]
    for c in curves[1:]:
        if [x for x, _ in c.points] != xs:
            raise ValueError("curves must share the same checkpoint grid")
    ys = np.array([[y for _, y in c.points] for c in curves])
    mean = ys.mean(axis=0)
    sd = ys.std(axis=0)
    low = np.clip(mean - sd, 0.0, 1.0)
    high = np.clip(mean + sd, 0.0, 1.0)
    return ConvergenceCurve(
        points=tuple(zip(xs, mean.tolist())),
        band=tuple(zip(low.tolist(), high.tolist())),
    )

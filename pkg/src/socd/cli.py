"""Command-line front end: run scenarios or experiments, emit artifacts.

Exit codes: 0 on success, 1 for validation problems (bad flags, malformed
scenario files, impossible parameter combinations), 2 for I/O failures.
The seed defaults to the SOCD_SEED environment variable, then to 0.
All emitted files are deterministic for a given invocation: exact rationals
are written as fraction strings, floats via repr, and JSON with sorted keys.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .mechanisms import MechanismKind, net_utilities, run_mechanism
from .metrics import ParticipationRecord, gini
from .model import AgentSpec, GameParams, efficiency
from .simulation import (
    HIGHWAY_MECHANISMS,
    ExperimentResult,
    HighwayParams,
    RingRoadParams,
    aggregate_curves,
    highway_experiment,
    ring_road_experiment,
)

__all__ = ["main", "run", "emit"]

ENV_SEED = "SOCD_SEED"
ALL_MECHANISMS = tuple(MechanismKind)


class CliError(Exception):
    """A validation problem the user can fix; maps to exit code 1."""


def _fmt(value: Any) -> str:
    """Deterministic cell formatting: fractions exact, floats via repr."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, MechanismKind):
        return value.value
    return str(value)


def _csv(rows: Iterable[Sequence[Any]]) -> str:
    return "".join(",".join(_fmt(cell) for cell in row) + "\n" for row in rows)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, MechanismKind):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: _jsonable(getattr(value, f.name))
            for f in dataclasses.fields(value)
        }
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _expect_keys(obj: Mapping[str, Any], allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise CliError(f"unknown key {unknown[0]!r} in {where}")


def _exact(value: Any, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise CliError(
            f"{where}: use an integer or a string like \"0.5\", not a float literal"
        )
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise CliError(f"{where}: not an exact number: {value!r}") from None


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CliError(f"{where}: expected an integer")
    return value


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CliError(f"{where}: expected a number")
    return float(value)


def _parse_game_scenario(doc: Mapping[str, Any]) -> tuple[list[AgentSpec], GameParams]:
    _expect_keys(doc, ("agents", "params"), "scenario")
    raw_agents = doc.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise CliError("scenario field 'agents' must be a non-empty list")
    agents = []
    for idx, entry in enumerate(raw_agents):
        where = f"agents[{idx}]"
        if not isinstance(entry, Mapping):
            raise CliError(f"{where}: expected an object")
        _expect_keys(entry, ("id", "arrive", "leave"), where)
        for key in ("id", "arrive", "leave"):
            if key not in entry:
                raise CliError(f"{where}: missing field {key!r}")
        try:
            agents.append(
                AgentSpec(
                    entry["id"],
                    _exact(entry["arrive"], f"{where}.arrive"),
                    _exact(entry["leave"], f"{where}.leave"),
                )
            )
        except ValueError as exc:
            raise CliError(f"{where}: {exc}") from None

    raw_params = doc.get("params", {})
    if not isinstance(raw_params, Mapping):
        raise CliError("scenario field 'params' must be an object")
    _expect_keys(raw_params, ("u", "c", "ca"), "params")
    try:
        params = GameParams(
            u=_exact(raw_params.get("u", 1), "params.u"),
            c=_exact(raw_params.get("c", 0), "params.c"),
            ca=_exact(raw_params.get("ca", 0), "params.ca"),
        )
    except ValueError as exc:
        raise CliError(f"params: {exc}") from None
    return agents, params


_RING_KEYS = (
    "n_stations",
    "road_length",
    "n_vehicles",
    "join_probability",
    "target_mean_participations",
    "curve_step",
)
_HIGHWAY_KEYS = (
    "n_stations",
    "n_convoys",
    "agents_per_convoy",
    "configuration",
    "switch_cost",
)


def _parse_experiment_params(
    experiment: str, raw: Mapping[str, Any], config: str | None, seed: int
) -> RingRoadParams | HighwayParams:
    if experiment == "ring":
        _expect_keys(raw, _RING_KEYS, "params")
        kwargs: dict[str, Any] = {"seed": seed}
        for key in ("n_stations", "n_vehicles"):
            if key in raw:
                kwargs[key] = _int(raw[key], f"params.{key}")
        for key in (
            "road_length",
            "join_probability",
            "target_mean_participations",
            "curve_step",
        ):
            if key in raw:
                kwargs[key] = _number(raw[key], f"params.{key}")
        try:
            return RingRoadParams(**kwargs)
        except ValueError as exc:
            raise CliError(f"params: {exc}") from None
    if experiment == "highway":
        _expect_keys(raw, _HIGHWAY_KEYS, "params")
        kwargs = {"seed": seed}
        for key in ("n_stations", "n_convoys", "agents_per_convoy"):
            if key in raw:
                kwargs[key] = _int(raw[key], f"params.{key}")
        if "configuration" in raw:
            kwargs["configuration"] = raw["configuration"]
        if "switch_cost" in raw:
            kwargs["switch_cost"] = _exact(raw["switch_cost"], "params.switch_cost")
        if config is not None:
            kwargs["configuration"] = config
        try:
            return HighwayParams(**kwargs)
        except ValueError as exc:
            raise CliError(f"params: {exc}") from None
    raise CliError(f"unknown experiment {experiment!r}; use 'ring' or 'highway'")


def _record_rows(records: Iterable[ParticipationRecord]) -> list[Sequence[Any]]:
    header = ("convoy", "agent", "actual_lead", "epps", "ratio", "rotations",
              "net_utility")
    rows: list[Sequence[Any]] = [header]
    for r in records:
        rows.append(
            (r.convoy, r.agent, r.actual_lead, r.epps, r.ratio, r.rotations,
             r.net_utility)
        )
    return rows


def _record_json(r: ParticipationRecord) -> dict[str, Any]:
    return {
        "convoy": r.convoy,
        "agent": r.agent,
        "actual_lead": r.actual_lead,
        "epps": r.epps,
        "ratio": r.ratio,
        "rotations": r.rotations,
        "net_utility": r.net_utility,
        "mechanism": r.mechanism,
    }


def _run_game(
    agents: list[AgentSpec],
    params: GameParams,
    mechanisms: Sequence[MechanismKind],
    fmt: str,
) -> tuple[list[str], dict[str, str]]:
    lines: list[str] = []
    artifacts: dict[str, str] = {}
    doc: dict[str, Any] = {"scenario": "game", "params": _jsonable(params),
                           "mechanisms": {}}
    for kind in mechanisms:
        outcome = run_mechanism(kind, agents, params)
        nets = net_utilities(outcome, agents, params)
        eff = efficiency(outcome.schedule, agents, params)
        shares = " ".join(f"{r.agent}={r.assigned}" for r in outcome.reports)
        lines.append(f"{kind.value}: shares {shares}; efficiency {eff}")

        if fmt == "csv":
            artifacts[f"schedule_{kind.value}.csv"] = _csv(
                [("agent", "start", "stop")]
                + [(p.agent, p.start, p.stop) for p in outcome.schedule.periods]
            )
            artifacts[f"switches_{kind.value}.csv"] = _csv(
                [("time", "outgoing", "incoming", "kind", "n_r", "cost")]
                + [
                    (ev.time, ev.outgoing, ev.incoming, ev.kind.value, ev.n_r, ev.cost)
                    for ev in outcome.schedule.switches
                ]
            )
            artifacts[f"share_reports_{kind.value}.csv"] = _csv(
                [("agent", "assigned", "ex_ante", "ex_post", "net_utility",
                  "rotations")]
                + [
                    (
                        r.agent,
                        r.assigned,
                        r.ex_ante,
                        r.ex_post,
                        nets[r.agent],
                        1 if r.agent in outcome.rotation_costs else 0,
                    )
                    for r in outcome.reports
                ]
            )
            if outcome.ledger is not None:
                artifacts[f"ledger_{kind.value}.csv"] = _csv(
                    [("segment_start", "segment_end", "payer", "payee", "amount")]
                    + [
                        (t.segment.start, t.segment.end, t.payer, t.payee, t.amount)
                        for t in outcome.ledger.transfers
                    ]
                )
        else:
            doc["mechanisms"][kind.value] = {
                "schedule": [
                    {"agent": p.agent, "start": str(p.start), "stop": str(p.stop)}
                    for p in outcome.schedule.periods
                ],
                "switches": [
                    {
                        "time": str(ev.time),
                        "outgoing": ev.outgoing,
                        "incoming": ev.incoming,
                        "kind": ev.kind.value,
                        "n_r": ev.n_r,
                        "cost": str(ev.cost),
                    }
                    for ev in outcome.schedule.switches
                ],
                "share_reports": [
                    {
                        "agent": r.agent,
                        "assigned": str(r.assigned),
                        "ex_ante": str(r.ex_ante),
                        "ex_post": str(r.ex_post),
                        "net_utility": str(nets[r.agent]),
                    }
                    for r in outcome.reports
                ],
                "ledger": None
                if outcome.ledger is None
                else [
                    {
                        "segment_start": str(t.segment.start),
                        "segment_end": str(t.segment.end),
                        "payer": t.payer,
                        "payee": t.payee,
                        "amount": str(t.amount),
                    }
                    for t in outcome.ledger.transfers
                ],
                "efficiency": str(eff),
            }
    if fmt == "json":
        artifacts["result.json"] = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    return lines, artifacts


def _run_highway(
    params_base: HighwayParams,
    seeds: Sequence[int],
    mechanisms: Sequence[MechanismKind],
    fmt: str,
) -> tuple[list[str], dict[str, str]]:
    results: list[ExperimentResult] = []
    for seed in seeds:
        params = dataclasses.replace(params_base, seed=seed)
        results.append(highway_experiment(params, mechanisms))

    lines: list[str] = []
    artifacts: dict[str, str] = {}
    config = params_base.configuration
    means: dict[str, float] = {}
    gini_rows: list[Sequence[Any]] = [("mechanism", "configuration", "seed", "gini")]
    for kind in mechanisms:
        cells = [r.gini_cells[kind.value] for r in results if kind.value in r.gini_cells]
        for res in results:
            if kind.value in res.gini_cells:
                gini_rows.append(
                    (kind.value, config, res.seed, res.gini_cells[kind.value])
                )
        if cells:
            means[kind.value] = sum(cells) / len(cells)
            gini_rows.append((kind.value, config, "mean", means[kind.value]))
            lines.append(f"gini {kind.value}/{config} = {means[kind.value]:.2f}")
        else:
            lines.append(f"gini {kind.value}/{config}: too few records")

    if fmt == "csv":
        artifacts["gini.csv"] = _csv(gini_rows)
        for res in results:
            suffix = f"_seed{res.seed}" if len(results) > 1 else ""
            for kind in mechanisms:
                recs = [r for r in res.records if r.mechanism == kind.value]
                artifacts[f"records_{kind.value}{suffix}.csv"] = _csv(
                    _record_rows(recs)
                )
    else:
        doc = {
            "experiment": "highway",
            "params": _jsonable(params_base),
            "seeds": list(seeds),
            "gini": {
                "per_seed": [
                    {"seed": r.seed, "cells": r.gini_cells} for r in results
                ],
                "mean": means,
            },
            "records": {
                str(r.seed): [_record_json(rec) for rec in r.records]
                for r in results
            },
        }
        artifacts["result.json"] = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    return lines, artifacts


def _run_ring(
    params_base: RingRoadParams, seeds: Sequence[int], fmt: str
) -> tuple[list[str], dict[str, str]]:
    results: list[ExperimentResult] = []
    for seed in seeds:
        params = dataclasses.replace(params_base, seed=seed)
        results.append(ring_road_experiment(params))

    curve = aggregate_curves([r.curve for r in results])
    lines: list[str] = []
    crossing = next((x for x, y in curve.points if y < 0.10), None)
    if crossing is not None:
        lines.append(f"unsatisfied fraction first drops below 0.10 at mean "
                     f"{crossing:g} participations")
    else:
        lines.append("unsatisfied fraction never dropped below 0.10")
    if curve.points:
        x_last, y_last = curve.points[-1]
        lines.append(f"unsatisfied fraction at mean {x_last:g} participations: "
                     f"{y_last:.3f}")
    else:
        lines.append("no participations recorded")

    artifacts: dict[str, str] = {}
    if fmt == "csv":
        rows: list[Sequence[Any]] = [
            ("mean_participations", "unsatisfied_fraction", "band_low", "band_high")
        ]
        for (x, y), (lo, hi) in zip(curve.points, curve.band):
            rows.append((x, y, lo, hi))
        artifacts["curve.csv"] = _csv(rows)
        for res in results:
            suffix = f"_seed{res.seed}" if len(results) > 1 else ""
            artifacts[f"records{suffix}.csv"] = _csv(_record_rows(res.records))
    else:
        doc = {
            "experiment": "ring",
            "params": _jsonable(params_base),
            "seeds": list(seeds),
            "curve": {
                "points": [list(pt) for pt in curve.points],
                "band": [list(b) for b in curve.band],
            },
            "records": {
                str(r.seed): [_record_json(rec) for rec in r.records]
                for r in results
            },
        }
        artifacts["result.json"] = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    return lines, artifacts


def emit(artifacts: Mapping[str, str], out_dir: str | os.PathLike) -> None:
    """Write artifact files under out_dir (created if missing)."""
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    for name, content in sorted(artifacts.items()):
        (path / name).write_bytes(content.encode("utf-8"))


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse usage errors are validation errors
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="socd",
        description="Sequential online chore division: mechanisms and experiments.",
    )
    parser.add_argument("--scenario", metavar="PATH",
                        help="JSON scenario file (a game or an experiment)")
    parser.add_argument("--experiment", choices=("ring", "highway"),
                        help="run a built-in experiment with default parameters")
    parser.add_argument("--mechanism", metavar="LIST",
                        help="comma-separated subset of pt,rg,sg,sg-da")
    parser.add_argument("--config", choices=("uniform", "bimodal"),
                        help="highway entry pattern")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"base seed (default: ${ENV_SEED} or 0)")
    parser.add_argument("--seeds", type=int, default=None, metavar="N",
                        help="number of consecutive seeds to run (experiments)")
    parser.add_argument("--out", metavar="DIR", help="directory for artifacts")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="artifact format (default csv)")
    return parser


def _parse_mechanisms(selection: str | None, default: Sequence[MechanismKind]
                      ) -> list[MechanismKind]:
    if selection is None:
        return list(default)
    kinds = []
    for name in selection.split(","):
        name = name.strip()
        try:
            kinds.append(MechanismKind(name))
        except ValueError:
            raise CliError(
                f"unknown mechanism {name!r}; choose from "
                + ",".join(k.value for k in MechanismKind)
            ) from None
    if not kinds:
        raise CliError("no mechanisms selected")
    return kinds


def run(args: argparse.Namespace) -> tuple[list[str], dict[str, str]]:
    """Execute one CLI invocation; returns (summary lines, artifacts)."""
    if (args.scenario is None) == (args.experiment is None):
        raise CliError("exactly one of --scenario or --experiment is required")
    if args.seeds is not None and args.seeds < 1:
        raise CliError("--seeds must be at least 1")

    seed = args.seed
    if seed is None:
        env = os.environ.get(ENV_SEED)
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise CliError(f"{ENV_SEED} must be an integer, got {env!r}") from None
        else:
            seed = 0

    doc: Mapping[str, Any] = {}
    experiment = args.experiment
    if args.scenario is not None:
        raw = Path(args.scenario).read_text(encoding="utf-8")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CliError(f"scenario is not valid JSON: {exc}") from None
        if not isinstance(doc, Mapping):
            raise CliError("scenario must be a JSON object")
        if "experiment" in doc:
            _expect_keys(doc, ("experiment", "params", "seed", "seeds"), "scenario")
            experiment = doc["experiment"]
            if experiment == "ring_road":
                experiment = "ring"

    if experiment is None:
        # plain game scenario
        if args.seeds is not None:
            raise CliError("--seeds only applies to experiments")
        if args.config is not None:
            raise CliError("--config only applies to the highway experiment")
        agents, params = _parse_game_scenario(doc)
        mechanisms = _parse_mechanisms(args.mechanism, ALL_MECHANISMS)
        try:
            return _run_game(agents, params, mechanisms, args.format)
        except ValueError as exc:
            raise CliError(str(exc)) from None

    raw_params = doc.get("params", {}) if doc else {}
    if not isinstance(raw_params, Mapping):
        raise CliError("scenario field 'params' must be an object")
    if doc and args.seed is None and "seed" in doc:
        seed = _int(doc["seed"], "seed")
    n_seeds = args.seeds
    if doc and n_seeds is None and "seeds" in doc:
        n_seeds = _int(doc["seeds"], "seeds")
    if n_seeds is None:
        n_seeds = 1
    if n_seeds < 1:
        raise CliError("seeds must be at least 1")
    seeds = list(range(seed, seed + n_seeds))

    if experiment == "ring":
        if args.config is not None:
            raise CliError("--config only applies to the highway experiment")
        mechanisms = _parse_mechanisms(
            args.mechanism, (MechanismKind.REPEATED_GAME,)
        )
        if mechanisms != [MechanismKind.REPEATED_GAME]:
            raise CliError("the ring road experiment runs under rg only")
        params = _parse_experiment_params("ring", raw_params, None, seed)
        assert isinstance(params, RingRoadParams)
        return _run_ring(params, seeds, args.format)
    if experiment == "highway":
        mechanisms = _parse_mechanisms(args.mechanism, HIGHWAY_MECHANISMS)
        params = _parse_experiment_params("highway", raw_params, args.config, seed)
        assert isinstance(params, HighwayParams)
        return _run_highway(params, seeds, mechanisms, args.format)
    raise CliError(f"unknown experiment {experiment!r}; use 'ring' or 'highway'")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        lines, artifacts = run(args)
        if args.out is not None:
            emit(artifacts, args.out)
        elif args.format == "json" and "result.json" in artifacts:
            sys.stdout.write(artifacts["result.json"])
        for line in lines:
            print(line)
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Scenario runner comparing allocation strategies on simulated fleets.

A scenario fixes a BERT-style model, a seeded fleet and a set of strategies.
Each strategy produces a partition, the simulator times it, and the report
lists reductions relative to the even split.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

from .core import (
    AllocationProblem,
    AllocationResult,
    InfeasibleAllocationError,
    Strategy,
    even_allocation,
    evaluate,
    reorder_devices,
)
from .exact import DEFAULT_MAX_PERMUTED_DEVICES, optimal_dp, optimal_permuted
from .heuristic import HeuristicConfig, sky_allocate
from .profiling import BertSpec, FleetSpec, bert_layer_profiles, sample_fleet
from .simulator import DEFAULT_BACKWARD_RATIO, DEFAULT_SEC_PER_FLOP, run_training

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
CSV_HEADER = ["scenario", "strategy", "D", "L", "objective_s", "makespan_s", "stage_max_s",
              "reduction_vs_even_pct"]
SCENARIO_STRATEGIES = (Strategy.EVEN, Strategy.HEURISTIC, Strategy.OPTIMAL_DP, Strategy.OPTIMAL_PERMUTED)

# Strong/weak scaling node counts; one node is the parameter server.
PRESET_NODES = (16, 32, 64)
STRONG_ENCODERS = 80
WEAK_ENCODERS = {16: 40, 32: 80, 64: 160}
OPTIMAL_MAX_NODES = 32


class InvariantViolation(AssertionError):
    """A solver produced a result that contradicts a guaranteed ordering."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    bert: BertSpec
    fleet: FleetSpec
    strategies: tuple[Strategy, ...] = (Strategy.EVEN, Strategy.HEURISTIC)
    iterations: int = 30
    calib: float = DEFAULT_SEC_PER_FLOP
    beta: float = DEFAULT_BACKWARD_RATIO
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    jitter: float = 0.0

    def __post_init__(self):
        strategies = tuple(Strategy(s) for s in self.strategies)
        object.__setattr__(self, "strategies", strategies)
        if not strategies:
            raise ValueError("a scenario needs at least one strategy")
        for s in strategies:
            if s not in SCENARIO_STRATEGIES:
                raise ValueError(f"strategy {s.value!r} cannot be used in a scenario")
        if len(set(strategies)) != len(strategies):
            raise ValueError("duplicate strategies")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.calib <= 0 or self.beta < 0:
            raise ValueError("calib must be > 0 and beta >= 0")
        if (Strategy.OPTIMAL_PERMUTED in strategies
                and self.fleet.device_count > DEFAULT_MAX_PERMUTED_DEVICES):
            raise ValueError(f"optimal-permuted supports at most {DEFAULT_MAX_PERMUTED_DEVICES} devices")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bert": asdict(self.bert),
            "fleet": asdict(self.fleet),
            "strategies": [s.value for s in self.strategies],
            "iterations": self.iterations,
            "calib": self.calib,
            "beta": self.beta,
            "heuristic": asdict(self.heuristic),
            "jitter": self.jitter,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        unknown = set(doc) - {"name", "bert", "fleet", "strategies", "iterations", "calib", "beta",
                              "heuristic", "jitter"}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        doc["bert"] = BertSpec(**doc.get("bert", {}))
        doc["fleet"] = FleetSpec(**doc["fleet"])
        doc["heuristic"] = HeuristicConfig(**doc.get("heuristic", {}))
        if "strategies" in doc:
            doc["strategies"] = tuple(doc["strategies"])
        return cls(**doc)


@dataclass(frozen=True)
class StrategyOutcome:
    strategy: Strategy
    result: AllocationResult | None
    timing: dict | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None and self.result.feasible and self.timing is not None

    @property
    def makespan(self) -> float:
        return self.timing["makespan_sequential"]["mean"]

    @property
    def makespan_total(self) -> float:
        return self.timing["makespan_sequential"]["sum"]

    @property
    def stage_max(self) -> float:
        return self.timing["stage_time_max"]["mean"]


def _reduction(base: float, value: float) -> float:
    return (base - value) / base * 100.0


@dataclass(frozen=True)
class ComparisonReport:
    config: ScenarioConfig
    num_layers: int
    num_devices: int
    outcomes: tuple[StrategyOutcome, ...]
    warnings: tuple[str, ...] = ()

    def outcome(self, strategy: Strategy | str) -> StrategyOutcome:
        strategy = Strategy(strategy)
        for o in self.outcomes:
            if o.strategy == strategy:
                return o
        raise KeyError(strategy.value)

    def reduction_vs_even(self, strategy: Strategy | str, metric: str = "makespan") -> float | None:
        """Percent reduction ``(even - strategy) / even * 100`` or None if either side failed.

        ``metric`` is one of makespan (per-iteration mean), makespan_total
        (summed over all iterations), stage_max, objective.
        """
        try:
            even, other = self.outcome(Strategy.EVEN), self.outcome(strategy)
        except KeyError:
            return None
        if not (even.ok and other.ok):
            return None
        if metric == "objective":
            return _reduction(even.result.objective, other.result.objective)
        return _reduction(getattr(even, metric), getattr(other, metric))

    @property
    def all_infeasible(self) -> bool:
        return not any(o.ok for o in self.outcomes)

    def to_dict(self) -> dict:
        rows = []
        for o in self.outcomes:
            entry = {
                "strategy": o.strategy.value,
                "feasible": o.ok,
                "error": o.error,
                "allocation": None if o.result is None else o.result.to_dict(),
                "timing": o.timing,
                "reduction_vs_even_pct": {
                    m: self.reduction_vs_even(o.strategy, m)
                    for m in ("makespan", "makespan_total", "stage_max", "objective")
                },
            }
            rows.append(entry)
        return {
            "scenario": self.config.name,
            "config": self.config.to_dict(),
            "L": self.num_layers,
            "D": self.num_devices,
            "strategies": rows,
            "warnings": list(self.warnings),
        }


def build_problem(config: ScenarioConfig) -> AllocationProblem:
    return AllocationProblem(bert_layer_profiles(config.bert), sample_fleet(config.fleet),
                             sec_per_flop=config.calib)


def _allocate(problem: AllocationProblem, strategy: Strategy, cfg: HeuristicConfig) -> AllocationResult:
    if strategy is Strategy.EVEN:
        return evaluate(problem, even_allocation(problem.num_layers, problem.num_devices), Strategy.EVEN)
    if strategy is Strategy.HEURISTIC:
        return sky_allocate(problem, cfg)
    if strategy is Strategy.OPTIMAL_DP:
        return optimal_dp(problem)
    if strategy is Strategy.OPTIMAL_PERMUTED:
        return optimal_permuted(problem)
    raise ValueError(f"unsupported strategy {strategy.value}")


def run_scenario(config: ScenarioConfig) -> ComparisonReport:
    """Allocate with every configured strategy, simulate each, and compare."""
    problem = build_problem(config)
    outcomes = []
    for strategy in config.strategies:
        try:
            result = _allocate(problem, strategy, config.heuristic)
        except InfeasibleAllocationError as exc:
            outcomes.append(StrategyOutcome(strategy, None, None, str(exc)))
            continue
        if not result.feasible:
            outcomes.append(StrategyOutcome(strategy, result, None, "allocation exceeds device memory"))
            continue
        sim_problem = problem
        if result.device_order is not None:
            sim_problem = reorder_devices(problem, result.device_order)
        stats = run_training(sim_problem, result.partition, config.iterations, config.calib,
                             config.beta, jitter=config.jitter, seed=config.fleet.seed)
        outcomes.append(StrategyOutcome(strategy, result, stats.summary()))
        log.info("%s: %s objective %.6g", config.name, strategy.value, result.objective)
    report = ComparisonReport(config, problem.num_layers, problem.num_devices, tuple(outcomes))
    return _check_invariants(report)


def _check_invariants(report: ComparisonReport) -> ComparisonReport:
    ok = {o.strategy: o for o in report.outcomes if o.ok}
    q = {s: o.result.objective for s, o in ok.items()}
    opt = q.get(Strategy.OPTIMAL_DP)
    if opt is not None:
        for s in (Strategy.EVEN, Strategy.HEURISTIC):
            if s in q and opt > q[s]:
                raise InvariantViolation(
                    f"{report.config.name}: optimal-dp objective {opt} exceeds {s.value} objective {q[s]}")
    perm = q.get(Strategy.OPTIMAL_PERMUTED)
    if perm is not None and opt is not None and perm > opt:
        raise InvariantViolation(f"{report.config.name}: optimal-permuted objective exceeds optimal-dp")
    warnings = []
    if Strategy.HEURISTIC in q and Strategy.EVEN in q and q[Strategy.HEURISTIC] > q[Strategy.EVEN]:
        msg = (f"{report.config.name}: heuristic objective {q[Strategy.HEURISTIC]:.6g} "
               f"exceeds even objective {q[Strategy.EVEN]:.6g}")
        log.warning(msg)
        warnings.append(msg)
    if not warnings:
        return report
    return ComparisonReport(report.config, report.num_layers, report.num_devices, report.outcomes,
                            tuple(warnings))


def _fleet_seed(seed: int, nodes: int) -> int:
    # Same seed for the same node count in both presets, so comparisons are paired.
    return seed * 1000 + nodes


def _preset_strategies(nodes: int) -> tuple[Strategy, ...]:
    if nodes <= OPTIMAL_MAX_NODES:
        return (Strategy.EVEN, Strategy.HEURISTIC, Strategy.OPTIMAL_DP)
    return (Strategy.EVEN, Strategy.HEURISTIC)


def preset_strong_scaling(seed: int = 0, **overrides) -> list[ScenarioConfig]:
    """Fixed 80-encoder model (403 layers) on 16, 32 and 64 nodes."""
    return [
        ScenarioConfig(
            name=f"strong-e{STRONG_ENCODERS}-n{nodes}",
            bert=BertSpec(num_encoders=STRONG_ENCODERS),
            fleet=FleetSpec(device_count=nodes - 1, seed=_fleet_seed(seed, nodes)),
            strategies=_preset_strategies(nodes),
            **overrides,
        )
        for nodes in PRESET_NODES
    ]


def preset_weak_scaling(seed: int = 0, **overrides) -> list[ScenarioConfig]:
    """Encoders and nodes grown together: (40, 16), (80, 32), (160, 64)."""
    return [
        ScenarioConfig(
            name=f"weak-e{WEAK_ENCODERS[nodes]}-n{nodes}",
            bert=BertSpec(num_encoders=WEAK_ENCODERS[nodes]),
            fleet=FleetSpec(device_count=nodes - 1, seed=_fleet_seed(seed, nodes)),
            strategies=_preset_strategies(nodes),
            **overrides,
        )
        for nodes in PRESET_NODES
    ]


PRESETS = {"strong": preset_strong_scaling, "weak": preset_weak_scaling}


def _csv_rows(reports):
    for r in reports:
        for o in r.outcomes:
            red = r.reduction_vs_even(o.strategy)
            if o.ok:
                vals = [repr(o.result.objective), repr(o.makespan), repr(o.stage_max)]
            else:
                vals = ["", "", ""]
            yield [r.config.name, o.strategy.value, r.num_devices, r.num_layers, *vals,
                   "" if red is None else f"{red:.4f}"]


def _fmt(x: float | None, spec: str = ".4f") -> str:
    return "n/a" if x is None else format(x, spec)


def emit_report(reports, fmt: str = "json") -> str:
    """Serialize one report or a list of reports as json, csv or md."""
    if isinstance(reports, ComparisonReport):
        reports = [reports]
    fmt = {"markdown": "md", "markdown-table": "md"}.get(fmt, fmt)
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "reports": [r.to_dict() for r in reports]}
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(_csv_rows(reports))
        return buf.getvalue()
    if fmt == "md":
        lines = ["| Scenario | Strategy | D | L | Objective (s) | Makespan (s) | Stage max (s) "
                 "| Reduction vs even (%) |",
                 "|---|---|---|---|---|---|---|---|"]
        for r in reports:
            for o in r.outcomes:
                if o.ok:
                    cells = [_fmt(o.result.objective), _fmt(o.makespan), _fmt(o.stage_max)]
                else:
                    cells = ["infeasible"] * 3
                red = r.reduction_vs_even(o.strategy)
                lines.append(f"| {r.config.name} | {o.strategy.value} | {r.num_devices} | "
                             f"{r.num_layers} | {' | '.join(cells)} | {_fmt(red, '.1f')} |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; expected json, csv or md")

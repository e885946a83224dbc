"""Scenario runner, view sweeps, continuous-vs-best campaigns and result files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

import numpy as np

from .chained import predict_chained_run
from .errors import InvalidParameter, IoFailure, MalformedInput, QuorumUnreachable
from .hotstuff import LeaderSchedule, ScenarioResult, predict_run
from .netmodel import (
    LatencyMatrix,
    generate_random_topology,
    load_fixture,
    load_latency_matrix,
    make_rng,
)
from .optimizer import (
    AnnealParams,
    CandidateState,
    anneal,
    as_continuous,
    continuous_perturbation,
    make_energy_fn,
    perturb_combined,
    perturb_discrete_weights,
    perturb_leader_schedule,
)
from .quorum import (
    ProtocolConfig,
    WeightAssignment,
    make_config,
    make_discrete_assignment,
    make_equal_assignment,
    select_faulty,
)

BASELINE = "basic-baseline"
VARIANTS = ("basic-baseline", "weighted", "best-assigned", "optimal-leader", "combined", "continuous")
ANNEALED = {
    "best-assigned": perturb_discrete_weights,
    "optimal-leader": perturb_leader_schedule,
    "combined": perturb_combined,
}
MAX_VIEWS = 10_000
TIE_TOLERANCE = 1e-6

STATUS_OK = "ok"
STATUS_UNREACHABLE = "quorum_unreachable"

CSV_COLUMNS = (
    "scenario_id", "variant", "chained", "f", "delta", "views", "faulty", "seed",
    "total_latency_ms", "avg_per_view_ms", "status",
)


@dataclass(frozen=True)
class ScenarioSpec:
    variant: str = "weighted"
    chained: bool = False
    f: int = 1
    delta: int = 1
    # a single count, or an inclusive (first, last) range for sweeps
    views: int | tuple[int, int] = 10
    topology: str | None = None
    random_n: int | None = None
    max_latency: float = 400.0
    faulty: bool = False
    seed: int = 0
    static: bool = False
    anneal: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if isinstance(self.views, list):
            object.__setattr__(self, "views", tuple(self.views))
        object.__setattr__(self, "anneal", dict(self.anneal or {}))

    def validate(self) -> "ScenarioSpec":
        if self.variant not in VARIANTS:
            raise InvalidParameter(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "continuous" and self.chained:
            raise InvalidParameter("the continuous variant is only defined for basic HotStuff")
        for v in self.view_counts():
            if not 1 <= v <= MAX_VIEWS:
                raise InvalidParameter(f"views must lie in [1, {MAX_VIEWS}], got {v}")
        if self.topology is not None and self.random_n is not None:
            raise InvalidParameter("give either a topology file or a random topology, not both")
        if self.random_n is not None and not self.max_latency > 0:
            raise InvalidParameter(f"max_latency must be positive, got {self.max_latency}")
        make_config(self.f, self.delta)
        AnnealParams().with_overrides(**self.anneal)
        return self

    def view_counts(self) -> list[int]:
        if isinstance(self.views, tuple):
            first, last = self.views
            if first > last:
                raise InvalidParameter(f"empty views range {first}..{last}")
            return list(range(first, last + 1))
        return [int(self.views)]

    @property
    def config(self) -> ProtocolConfig:
        return make_config(self.f, self.delta)

    def scenario_id(self, views: int) -> str:
        proto = "chained" if self.chained else "basic"
        mode = "faulty" if self.faulty else "healthy"
        return f"{self.variant}/{proto}/f{self.f}d{self.delta}/v{views}/{mode}/s{self.seed}"

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]) -> "ScenarioSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise InvalidParameter(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**dict(doc))


@dataclass(frozen=True)
class ScenarioOutcome:
    spec: ScenarioSpec
    views: int
    status: str
    weights: WeightAssignment
    schedule: LeaderSchedule
    result: ScenarioResult | None
    # energy of the optimised configuration on the healthy network
    healthy_latency: float | None = None
    faulty_set: tuple[int, ...] = ()
    unreachable_view: int | None = None

    @property
    def total_latency(self) -> float | None:
        return None if self.result is None else self.result.total_latency

    @property
    def average_per_view(self) -> float | None:
        return None if self.result is None else self.result.average_per_view

    def row(self) -> "ResultRow":
        return ResultRow(
            scenario_id=self.spec.scenario_id(self.views),
            variant=self.spec.variant,
            chained=self.spec.chained,
            f=self.spec.f,
            delta=self.spec.delta,
            views=self.views,
            faulty=self.spec.faulty,
            seed=self.spec.seed,
            total_latency_ms=self.total_latency,
            avg_per_view_ms=self.average_per_view,
            status=self.status,
        )


def tailored_vmax_positions(matrix: LatencyMatrix, f: int) -> list[int]:
    """The ``f`` best and ``f`` worst connected replicas by total distance, ties by index."""
    score = matrix.connectivity()
    order = sorted(range(matrix.n), key=lambda i: (score[i], i))
    return sorted(order[:f] + order[-f:])


def tailored_assignment(matrix: LatencyMatrix, config: ProtocolConfig) -> WeightAssignment:
    return make_discrete_assignment(config, tailored_vmax_positions(matrix, config.f))


def load_topology(spec: ScenarioSpec) -> LatencyMatrix:
    if spec.random_n is not None:
        return generate_random_topology(spec.random_n, spec.max_latency, make_rng(spec.seed))
    if spec.topology is None:
        return load_fixture()
    return load_latency_matrix(spec.topology)


def run_scenario(spec: ScenarioSpec, views: int | None = None,
                 matrix: LatencyMatrix | None = None) -> ScenarioOutcome:
    """Optimise (where the variant calls for it) on the healthy network, then predict.

    In the faulty scenario the ``f`` heaviest replicas of the final weights
    are silenced and the run is predicted again on the same noise.
    """
    spec.validate()
    if views is None:
        counts = spec.view_counts()
        if len(counts) != 1:
            raise InvalidParameter("run_scenario needs a single view count; use run_sweep")
        views = counts[0]
    matrix = load_topology(spec) if matrix is None else matrix
    config = spec.config
    if matrix.n != config.n:
        raise InvalidParameter(
            f"topology has {matrix.n} replicas but f={spec.f}, delta={spec.delta} needs {config.n}")
    predictor = predict_chained_run if spec.chained else predict_run

    schedule = LeaderSchedule.round_robin(config.n)
    if spec.variant == BASELINE:
        weights = make_equal_assignment(config)
    else:
        weights = tailored_assignment(matrix, config)
    state = CandidateState(weights, schedule)

    healthy = None
    if spec.variant in ANNEALED or spec.variant == "continuous":
        params = AnnealParams(seed=spec.seed).with_overrides(**spec.anneal)
        energy_fn = make_energy_fn(matrix, views, spec.seed, spec.static, predictor)
        if spec.variant == "continuous":
            state = CandidateState(as_continuous(weights, config.f), schedule)
            perturb = continuous_perturbation(config.f)
        else:
            perturb = ANNEALED[spec.variant]
        state = anneal(state, energy_fn, perturb, params)
        healthy = state.energy

    faulty = tuple(select_faulty(state.weights, config.f)) if spec.faulty else ()
    try:
        result = predictor(matrix, state.weights, state.schedule, views, faulty, spec.seed,
                           spec.static)
    except QuorumUnreachable as exc:
        return ScenarioOutcome(spec, views, STATUS_UNREACHABLE, state.weights, state.schedule,
                               None, healthy, faulty, exc.view)
    if healthy is None and not spec.faulty:
        healthy = result.total_latency
    return ScenarioOutcome(spec, views, STATUS_OK, state.weights, state.schedule, result,
                           healthy, faulty)


def run_sweep(spec: ScenarioSpec, matrix: LatencyMatrix | None = None) -> list[ScenarioOutcome]:
    spec.validate()
    matrix = load_topology(spec) if matrix is None else matrix
    return [run_scenario(spec, v, matrix) for v in spec.view_counts()]


# result rows -----------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    variant: str
    chained: bool
    f: int
    delta: int
    views: int
    faulty: bool
    seed: int
    total_latency_ms: float | None
    avg_per_view_ms: float | None
    status: str

    @property
    def baseline_key(self) -> tuple:
        return (self.chained, self.f, self.delta, self.views, self.faulty, self.seed)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise MalformedInput(f"not a boolean: {text!r}")


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            r.scenario_id, r.variant, str(r.chained).lower(), r.f, r.delta, r.views,
            str(r.faulty).lower(), r.seed, _fmt(r.total_latency_ms), _fmt(r.avg_per_view_ms),
            r.status,
        ])
    return out.getvalue()


def read_results(source: str | Path | IO[str]) -> list[ResultRow]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, newline="", encoding="utf-8") as fh:
                return read_results(fh)
        except OSError as exc:
            raise IoFailure(f"cannot read {source}: {exc}") from exc
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise MalformedInput(f"unexpected columns {reader.fieldnames}; expected {CSV_COLUMNS}")
    rows = []
    try:
        for rec in reader:
            rows.append(ResultRow(
                scenario_id=rec["scenario_id"],
                variant=rec["variant"],
                chained=_parse_bool(rec["chained"]),
                f=int(rec["f"]),
                delta=int(rec["delta"]),
                views=int(rec["views"]),
                faulty=_parse_bool(rec["faulty"]),
                seed=int(rec["seed"]),
                total_latency_ms=float(rec["total_latency_ms"]) if rec["total_latency_ms"] else None,
                avg_per_view_ms=float(rec["avg_per_view_ms"]) if rec["avg_per_view_ms"] else None,
                status=rec["status"],
            ))
    except (ValueError, KeyError) as exc:
        raise MalformedInput(f"bad results row: {exc}") from exc
    return rows


def percentage_vs_baseline(rows: Sequence[ResultRow]) -> list[float | None]:
    """(variant - baseline) / baseline * 100 for each row, matched on the run parameters."""
    baselines = {r.baseline_key: r.avg_per_view_ms for r in rows if r.variant == BASELINE}
    out = []
    for r in rows:
        base = baselines.get(r.baseline_key)
        if r.avg_per_view_ms is None or not base:
            out.append(None)
        else:
            out.append((r.avg_per_view_ms - base) / base * 100.0)
    return out


@dataclass(frozen=True)
class VariantSummary:
    variant: str
    chained: bool
    faulty: bool
    view_counts: int
    mean_avg_per_view_ms: float | None
    pct_vs_baseline: float | None


def summarize(rows: Sequence[ResultRow]) -> list[VariantSummary]:
    """Average the per-view latency of each variant across all view counts."""
    groups: dict[tuple, list[ResultRow]] = defaultdict(list)
    for r in rows:
        groups[(r.chained, r.faulty, r.variant)].append(r)
    means = {}
    for key, group in groups.items():
        values = [r.avg_per_view_ms for r in group]
        means[key] = None if any(v is None for v in values) else math.fsum(values) / len(values)
    out = []
    for (chained, faulty, variant), group in groups.items():
        mean = means[(chained, faulty, variant)]
        base = means.get((chained, faulty, BASELINE))
        pct = None if mean is None or not base else (mean - base) / base * 100.0
        out.append(VariantSummary(variant, chained, faulty, len(group), mean, pct))
    order = {v: i for i, v in enumerate(VARIANTS)}
    out.sort(key=lambda s: (s.chained, s.faulty, order.get(s.variant, len(order))))
    return out


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def _table(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *body)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    return "\n".join(lines)


def summary_table(rows: Sequence[ResultRow]) -> str:
    pcts = percentage_vs_baseline(rows)
    body = [
        [r.scenario_id, r.variant, "chained" if r.chained else "basic", r.views,
         "yes" if r.faulty else "no", _fmt(r.total_latency_ms) or "-",
         _fmt(r.avg_per_view_ms) or "-", _pct(p), r.status]
        for r, p in zip(rows, pcts)
    ]
    header = ["scenario_id", "variant", "protocol", "views", "faulty", "total_latency_ms",
              "avg_per_view_ms", "pct_vs_baseline", "status"]
    text = _table(header, body)
    summary = summarize(rows)
    if any(s.view_counts > 1 for s in summary):
        agg = [[s.variant, "chained" if s.chained else "basic", "yes" if s.faulty else "no",
                s.view_counts, _fmt(s.mean_avg_per_view_ms) or "-", _pct(s.pct_vs_baseline)]
               for s in summary]
        text += "\n\n" + _table(["variant", "protocol", "faulty", "view_counts",
                                 "mean_avg_per_view_ms", "pct_vs_baseline"], agg)
    return text + "\n"


def emit_results(rows: Sequence[ResultRow], destination: str | Path | IO[str] | None,
                 format: str = "csv") -> str:
    """Render ``rows`` as CSV or a summary table and write them to ``destination``.

    ``None`` skips writing; the rendered text is returned either way.
    """
    if not rows:
        raise InvalidParameter("no results to emit")
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "table":
        text = summary_table(rows)
    else:
        raise InvalidParameter(f"unknown output format {format!r}")
    write_text(text, destination)
    return text


def write_text(text: str, destination: str | Path | IO[str] | None) -> None:
    if destination is None:
        return
    if isinstance(destination, (str, Path)):
        try:
            Path(destination).write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise IoFailure(f"cannot write {destination}: {exc}") from exc
    else:
        destination.write(text)


# continuous-vs-best campaign ---------------------------------------------------


CAMPAIGN_COLUMNS = (
    "topology", "topology_seed", "best_assigned_ms", "continuous_ms", "difference_ms", "outcome",
)


@dataclass(frozen=True)
class CampaignRow:
    topology: int
    topology_seed: int
    best_assigned_ms: float
    continuous_ms: float

    @property
    def difference_ms(self) -> float:
        """Positive when the continuous scheme is faster."""
        if math.isinf(self.best_assigned_ms) and math.isinf(self.continuous_ms):
            return 0.0
        return self.best_assigned_ms - self.continuous_ms

    @property
    def outcome(self) -> str:
        d = self.difference_ms
        if abs(d) <= TIE_TOLERANCE:
            return "tie"
        return "continuous" if d > 0 else "best-assigned"


@dataclass(frozen=True)
class CampaignResult:
    rows: tuple[CampaignRow, ...]

    def fraction(self, outcome: str) -> float:
        return sum(r.outcome == outcome for r in self.rows) / len(self.rows)

    @property
    def continuous_better_or_equal(self) -> float:
        return self.fraction("continuous") + self.fraction("tie")

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CAMPAIGN_COLUMNS)
        for r in self.rows:
            writer.writerow([r.topology, r.topology_seed, _fmt(r.best_assigned_ms),
                             _fmt(r.continuous_ms), _fmt(r.difference_ms), r.outcome])
        return out.getvalue()

    def summary(self) -> str:
        return (
            f"topologies: {len(self.rows)}\n"
            f"continuous better: {self.fraction('continuous'):.3f}\n"
            f"tie: {self.fraction('tie'):.3f}\n"
            f"best-assigned better: {self.fraction('best-assigned'):.3f}\n"
            f"continuous better or equal: {self.continuous_better_or_equal:.3f}\n"
        )


def _faulty_latency(spec: ScenarioSpec, matrix: LatencyMatrix) -> float:
    outcome = run_scenario(spec, matrix=matrix)
    return math.inf if outcome.total_latency is None else outcome.total_latency


def compare_on_topology(base: ScenarioSpec, matrix: LatencyMatrix, sim_seed: int,
                        index: int = 0, topology_seed: int = 0) -> CampaignRow:
    """Faulty-scenario latency of best-assigned and continuous weights on one topology."""
    common = dict(faulty=True, chained=False, seed=sim_seed, topology=None, random_n=None)
    best = _faulty_latency(dataclasses.replace(base, variant="best-assigned", **common), matrix)
    cont = _faulty_latency(dataclasses.replace(base, variant="continuous", **common), matrix)
    return CampaignRow(index, topology_seed, best, cont)


def _campaign_topology(base: ScenarioSpec, index: int, topology_seed: int,
                       sim_seed: int) -> CampaignRow:
    matrix = generate_random_topology(base.config.n, base.max_latency, make_rng(topology_seed))
    return compare_on_topology(base, matrix, sim_seed, index, topology_seed)


def campaign_seeds(seed: int, topologies: int) -> list[tuple[int, int]]:
    """Independent (topology, simulation) seeds per topology, derived from one campaign seed."""
    seeds = []
    for child in np.random.SeedSequence(seed).spawn(topologies):
        topo, sim = (int(s.generate_state(1, np.uint64)[0]) for s in child.spawn(2))
        seeds.append((topo, sim))
    return seeds


def run_comparison_campaign(base_spec: ScenarioSpec, topologies: int, seed: int | None = None,
                            jobs: int = 1) -> CampaignResult:
    """Best-assigned vs continuous weights, faulty scenario, on random topologies.

    Each topology draws its entries from U(0, ``max_latency``). Rows come back
    ordered by topology index whatever ``jobs`` is.
    """
    if topologies < 1:
        raise InvalidParameter(f"topologies must be >= 1, got {topologies}")
    base_spec = dataclasses.replace(base_spec, variant="best-assigned", chained=False).validate()
    if len(base_spec.view_counts()) != 1:
        raise InvalidParameter("a campaign needs a single view count")
    seeds = campaign_seeds(base_spec.seed if seed is None else seed, topologies)
    args = [(base_spec, i, t, s) for i, (t, s) in enumerate(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_campaign_topology, *zip(*args)))
    else:
        rows = [_campaign_topology(*a) for a in args]
    return CampaignResult(tuple(rows))


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a scenario manifest (JSON, or YAML by suffix) into a field mapping."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise InvalidParameter(f"invalid YAML in {path}: {exc}") from None
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidParameter(f"{path} must contain a mapping of scenario fields")
    return doc


def outcomes_to_rows(outcomes: Iterable[ScenarioOutcome]) -> list[ResultRow]:
    return [o.row() for o in outcomes]

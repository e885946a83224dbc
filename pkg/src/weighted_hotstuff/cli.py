"""Command-line entry point: ``weighted-hotstuff <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid scenario or input, 3 a quorum was
unreachable in at least one scenario, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Any, Sequence

from .errors import IoFailure, MalformedInput, InvalidParameter, QuorumUnreachable
from .experiments import (
    STATUS_UNREACHABLE,
    VARIANTS,
    ScenarioSpec,
    emit_results,
    load_config_file,
    load_topology,
    outcomes_to_rows,
    read_results,
    run_comparison_campaign,
    run_scenario,
    write_text,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNREACHABLE = 3
EXIT_IO = 4

log = logging.getLogger("weighted_hotstuff")


def parse_views(text: str) -> int | tuple[int, int]:
    """``"10"`` or an inclusive range ``"5..20"`` / ``"5-20"``."""
    for sep in ("..", "-", ":"):
        if sep in text:
            first, last = text.split(sep, 1)
            try:
                return int(first), int(last)
            except ValueError:
                break
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid views {text!r}; use N or FIRST..LAST") from None


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", help="JSON or YAML file mapping scenario fields; flags override it")
    g.add_argument("--topology", help="latency matrix file (.csv or .json); default: bundled cloudping fixture")
    g.add_argument("--random-n", type=int, help="generate a random topology with this many replicas")
    g.add_argument("--max-latency", type=float, help="upper bound of random link latencies in ms (default 400)")
    g.add_argument("--f", type=int, help="tolerated Byzantine faults (default 1)")
    g.add_argument("--delta", type=int, help="additional replicas (default 1)")
    g.add_argument("--views", type=parse_views, help="view count N or range FIRST..LAST")
    g.add_argument("--chained", action="store_const", const=True, default=None,
                   help="predict Chained HotStuff instead of basic HotStuff")
    g.add_argument("--faulty", action="store_const", const=True, default=None,
                   help="silence the f heaviest replicas of the final configuration")
    g.add_argument("--static", action="store_const", const=True, default=None,
                   help="disable per-message payload offsets")
    g.add_argument("--seed", type=int, help="simulation and annealing seed (default 0)")
    g.add_argument("--variant", help=f"comma-separated list from {', '.join(VARIANTS)}, or 'all'")


def _output_flags(p: argparse.ArgumentParser, formats=("csv", "table")) -> None:
    p.add_argument("--out", help="write results here instead of stdout")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weighted-hotstuff",
        description="Latency prediction and optimisation for weighted-voting HotStuff.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario per variant for a single view count")
    _scenario_flags(p)
    _output_flags(p)

    p = sub.add_parser("sweep", help="run variants over a range of view counts")
    _scenario_flags(p)
    _output_flags(p)

    p = sub.add_parser("optimize", help="anneal a variant and print the chosen weights and leader rotation")
    _scenario_flags(p)
    p.add_argument("--out", help="also write the result row as CSV here")

    p = sub.add_parser("campaign", help="continuous vs best-assigned weights on random topologies (faulty)")
    _scenario_flags(p)
    p.add_argument("--topologies", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="write per-topology CSV here; summary goes to stdout")

    p = sub.add_parser("report", help="re-emit the summary for a results CSV")
    p.add_argument("results", help="CSV written by simulate or sweep")
    _output_flags(p, formats=("table", "csv"))
    return parser


_FLAG_FIELDS = ("topology", "random_n", "max_latency", "f", "delta", "views", "chained",
                "faulty", "static", "seed")


def spec_from_args(args: argparse.Namespace, default_views: Any = None) -> tuple[ScenarioSpec, list[str]]:
    doc: dict[str, Any] = {}
    if args.config:
        doc.update(load_config_file(args.config))
    for name in _FLAG_FIELDS:
        value = getattr(args, name)
        if value is not None:
            doc[name] = value
    if "views" not in doc and default_views is not None:
        doc["views"] = default_views
    variant_text = args.variant if args.variant is not None else doc.get("variant", "weighted")
    doc.pop("variant", None)
    if variant_text == "all":
        variants = list(VARIANTS)
    else:
        variants = [v.strip() for v in str(variant_text).split(",") if v.strip()]
    spec = ScenarioSpec.from_mapping({**doc, "variant": variants[0] if variants else ""})
    return spec, variants


def _variant_specs(spec: ScenarioSpec, variants: Sequence[str], skip_invalid: bool) -> list[ScenarioSpec]:
    specs = []
    for v in variants:
        s = dataclasses.replace(spec, variant=v)
        if skip_invalid and v == "continuous" and s.chained:
            log.info("skipping continuous: not defined for chained HotStuff")
            continue
        specs.append(s.validate())
    if not specs:
        raise InvalidParameter("no runnable variants selected")
    return specs


def _emit(rows, args) -> int:
    text = emit_results(rows, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_UNREACHABLE if any(r.status == STATUS_UNREACHABLE for r in rows) else EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec, variants = spec_from_args(args)
    if len(spec.view_counts()) != 1:
        raise InvalidParameter("simulate takes a single view count; use sweep for ranges")
    specs = _variant_specs(spec, variants, skip_invalid=len(variants) > 1)
    matrix = load_topology(spec)
    return _emit(outcomes_to_rows(run_scenario(s, matrix=matrix) for s in specs), args)


def cmd_sweep(args: argparse.Namespace) -> int:
    spec, variants = spec_from_args(args, default_views=(5, 20))
    specs = _variant_specs(spec, variants, skip_invalid=len(variants) > 1)
    matrix = load_topology(spec)
    outcomes = [run_scenario(s, v, matrix) for s in specs for v in s.view_counts()]
    return _emit(outcomes_to_rows(outcomes), args)


def cmd_optimize(args: argparse.Namespace) -> int:
    spec, variants = spec_from_args(args)
    if args.variant is None:
        variants = ["combined"]
    specs = _variant_specs(spec, variants, skip_invalid=False)
    matrix = load_topology(spec)
    labels = matrix.labels or tuple(f"r{i}" for i in range(matrix.n))
    outcomes = []
    for s in specs:
        o = run_scenario(s, matrix=matrix)
        outcomes.append(o)
        print(f"variant: {s.variant}{' (chained)' if s.chained else ''}")
        print("weights: " + ", ".join(f"{lab}={w:.4f}" for lab, w in zip(labels, o.weights.weights)))
        print(f"quorum threshold: {o.weights.threshold:.4f}")
        print("leader rotation: " + " ".join(labels[i] for i in o.schedule.leaders))
        if o.healthy_latency is not None:
            print(f"healthy total latency: {o.healthy_latency:.3f} ms over {o.views} views")
        if s.faulty:
            print("faulty replicas: " + ", ".join(labels[i] for i in o.faulty_set))
            if o.total_latency is None:
                print(f"faulty run: quorum unreachable in view {o.unreachable_view}")
            else:
                print(f"faulty total latency: {o.total_latency:.3f} ms")
        print()
    rows = outcomes_to_rows(outcomes)
    if args.out:
        emit_results(rows, args.out, "csv")
    return EXIT_UNREACHABLE if any(r.status == STATUS_UNREACHABLE for r in rows) else EXIT_OK


def cmd_campaign(args: argparse.Namespace) -> int:
    spec, _ = spec_from_args(args)
    result = run_comparison_campaign(spec, args.topologies, jobs=args.jobs)
    write_text(result.to_csv(), args.out)
    sys.stdout.write(result.summary())
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    rows = read_results(args.results)
    text = emit_results(rows, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "campaign": cmd_campaign,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except QuorumUnreachable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameter, MalformedInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

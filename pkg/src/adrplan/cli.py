"""Command-line front end: ``adrplan <command> ...``.

Exit codes: 0 success (and a valid solution where one is expected), 1 usage
error, 2 data error, 3 no valid solution.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import urllib.error
import urllib.parse
import urllib.request
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .benchmarks import SIZES, load_benchmark
from .mission import (
    DEFAULT_ORACLE_GUARD,
    InvalidSolution,
    OracleGuardExceeded,
    count_paths,
    decode,
    encode,
    format_plan,
    oracle_enumerate,
    plan_report,
    valid_fraction,
    validate,
)
from .orbits import (
    InstanceError,
    TleError,
    build_instance,
    iter_tle_records,
    load_instance,
    parse_date,
    parse_tle,
    read_tle_file,
    save_instance,
)
from .qubo import LagrangeWeights, QuboError, build_qubo, manifest_comments, write_names, write_qubo
from .solvers import (
    MAX_EXHAUSTIVE_VARS,
    SolverConfig,
    SolverError,
    exhaustive_minimum,
    landscape_scan,
    simulated_annealing,
    steepest_descent_sampler,
    tabu_search,
)

log = logging.getLogger("adrplan")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVALID = 0, 1, 2, 3
CELESTRAK_GP = "https://celestrak.org/NORAD/elements/gp.php"
CACHE_ENV = "ADRPLAN_CACHE_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class DataError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp so repeated runs produce identical files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.replace(microsecond=0).isoformat()


def make_manifest(command: str, inputs: list[str], parameters: dict) -> dict:
    return {
        "command": command,
        "inputs": [str(p) for p in inputs],
        "parameters": parameters,
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _weights(args) -> LagrangeWeights:
    defaults = LagrangeWeights()
    return LagrangeWeights(
        **{
            key: getattr(args, key) if getattr(args, key) is not None else getattr(defaults, key)
            for key in ("l_h", "l_1", "l_2", "l_3", "l_4", "l_5", "l_6", "l_7", "l_8")
        }
    )


def _add_weight_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("Lagrange weights")
    g.add_argument("--lh", dest="l_h", type=float, help="objective weight (default 1)")
    for k in range(1, 9):
        g.add_argument(f"--l{k}", dest=f"l_{k}", type=float, help=f"constraint {k} weight")


def _load_instance(path: str):
    try:
        return load_instance(path)
    except OSError as exc:
        raise DataError(f"cannot read instance {path}: {exc.strerror or exc}") from exc


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_fetch(args) -> int:
    if args.offline:
        print(
            "fetch: network access disabled by --offline; "
            "download the TLE file yourself and pass it to 'adrplan ingest'",
            file=sys.stderr,
        )
        return EXIT_USAGE
    url = args.url or f"{CELESTRAK_GP}?" + urllib.parse.urlencode(
        {"INTDES": args.designator, "FORMAT": "tle"}
    )
    if args.output:
        out = Path(args.output)
    else:
        cache = Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "adrplan"))
        cache.mkdir(parents=True, exist_ok=True)
        out = cache / f"{(args.designator or 'catalog').replace('/', '_')}.tle"
    try:
        with urllib.request.urlopen(url, timeout=args.timeout) as resp:
            text = resp.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        raise DataError(f"fetch failed: HTTP {exc.code} {exc.reason} for {url}") from exc
    except urllib.error.URLError as exc:
        raise DataError(f"fetch failed: {exc.reason} for {url}") from exc
    records = list(iter_tle_records(text.splitlines()))
    if not records:
        raise DataError(f"response from {url} contains no TLE records")
    for lineno, name, l1, l2 in records:
        try:
            parse_tle(name, l1, l2)
        except TleError as exc:
            raise DataError(f"malformed response at line {lineno}: {exc}") from exc
    out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    manifest = make_manifest("fetch", [url], {"designator": args.designator})
    _write_json(out.with_name(out.name + ".manifest.json"), manifest)
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    try:
        catalog, problems = read_tle_file(args.tle, skip_bad=args.skip_bad)
    except OSError as exc:
        raise DataError(f"cannot read {args.tle}: {exc.strerror or exc}") from exc
    for problem in problems:
        log.warning("skipped record at %s", problem)
    if not catalog:
        raise DataError(f"{args.tle}: no usable TLE records")
    t0 = parse_date(args.t0)
    instance = build_instance(
        catalog,
        t0,
        args.n_select,
        args.t_max,
        args.t_service,
        late_as_sentinel=not args.keep_late_alignments,
    )
    manifest = make_manifest(
        "ingest",
        [args.tle],
        {
            "t0": args.t0,
            "n_s": args.n_select,
            "t_max": args.t_max,
            "t_s": args.t_service,
            "skipped_records": len(problems),
            "late_as_sentinel": not args.keep_late_alignments,
        },
    )
    save_instance(instance, args.output, manifest)
    n_vars = instance.n_t * (instance.n_t + 3)
    print(f"debris: {instance.n_t}")
    print(f"binary variables: {n_vars}")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_builtin(args) -> int:
    instance = load_benchmark(args.n_t)
    manifest = make_manifest("builtin", [], {"n_t": args.n_t})
    save_instance(instance, args.output, manifest)
    print(f"wrote N_t={args.n_t} artificial instance to {args.output}")
    return EXIT_OK


def cmd_export(args) -> int:
    instance = _load_instance(args.instance)
    weights = _weights(args)
    model = build_qubo(instance, weights)
    manifest = make_manifest("export", [args.instance], {"weights": weights.to_dict()})
    out = Path(args.output)
    names = Path(args.names) if args.names else out.with_name(out.name + ".names")
    with open(out, "w", encoding="utf-8") as fh:
        write_qubo(model, fh, manifest_comments(manifest))
    with open(names, "w", encoding="utf-8") as fh:
        write_names(model, fh)
    print(f"binary variables: {model.n_vars}")
    print(f"wrote {out} and {names}")
    return EXIT_OK


def _solver_config(args) -> SolverConfig:
    beta = None
    if args.beta_min is not None or args.beta_max is not None:
        if args.beta_min is None or args.beta_max is None:
            raise SolverError("--beta-min and --beta-max must be given together")
        beta = (args.beta_min, args.beta_max)
    return SolverConfig(
        seed=args.seed,
        reads=args.reads,
        sweeps=args.sweeps,
        tenure=args.tenure,
        beta_range=beta,
    )


def cmd_solve(args) -> int:
    instance = _load_instance(args.instance)
    weights = _weights(args)
    config = _solver_config(args)
    model = build_qubo(instance, weights)
    if args.solver == "exact":
        sampleset = exhaustive_minimum(model)
    elif args.solver == "sd":
        sampleset = steepest_descent_sampler(model, config)
    elif args.solver == "tabu":
        sampleset = tabu_search(model, config)
    else:
        sampleset = simulated_annealing(model, config)

    stem = Path(args.instance)
    samples_out = Path(args.samples_out or stem.with_suffix(f".{args.solver}.samples.json"))
    plan_out = Path(args.plan_out or stem.with_suffix(f".{args.solver}.plan.json"))
    manifest = make_manifest(
        "solve",
        [args.instance],
        {"solver": args.solver, "weights": weights.to_dict(), "config": config.to_dict()},
    )
    accuracy = valid_fraction(sampleset, instance)
    doc = sampleset.to_dict()
    doc["valid_fraction"] = accuracy
    doc["manifest"] = manifest
    _write_json(samples_out, doc)

    best = sampleset.first
    report = validate(best.bits, instance)
    plan_doc: dict = {"manifest": manifest, "energy": best.energy, "validation": report.to_dict()}
    print(f"solver: {sampleset.solver}  samples: {sampleset.total_occurrences}  "
          f"wall time: {sampleset.wall_time:.2f} s  valid fraction: {accuracy:.3f}")
    if args.solver == "exact":
        print(
            f"proof by enumeration: {sampleset.info['states_enumerated']} states checked, "
            f"{len(sampleset)} global minimiser(s) at energy {best.energy:g}"
        )
    print(f"best energy: {best.energy:g}")
    if report.valid:
        plan = decode(best.bits, instance)
        plan_doc["plan"] = plan_report(plan)
        _write_json(plan_out, plan_doc)
        print(format_plan(plan, unit=args.unit))
        return EXIT_OK
    _write_json(plan_out, plan_doc)
    print("best sample is not a valid mission plan:")
    print(report.render())
    return EXIT_INVALID


def cmd_oracle(args) -> int:
    instance = _load_instance(args.instance)
    try:
        solutions = oracle_enumerate(instance, guard=args.guard)
    except OracleGuardExceeded as exc:
        print(f"candidate sequences: {exc.candidates} (above guard {exc.guard}; not enumerated)")
        return EXIT_DATA
    print(f"candidate sequences: {count_paths(instance.n_t, instance.n_s)}")
    print(f"feasible sequences: {len(solutions)}")
    for rank, sol in enumerate(solutions, start=1):
        seq = ",".join(str(s) for s in sol.sequence)
        times = " ".join(f"{t:g}" for t in sol.arrival_times)
        print(f"{rank:4d}  {seq:<20s} cost {sol.cost:g}  arrivals {times}")
    if args.output:
        manifest = make_manifest("oracle", [args.instance], {"guard": args.guard})
        _write_json(
            Path(args.output),
            {
                "manifest": manifest,
                "solutions": [
                    {"sequence": list(s.sequence), "cost": s.cost, "arrival_times": list(s.arrival_times)}
                    for s in solutions
                ],
            },
        )
    return EXIT_OK


def _parse_bits(text: str):
    text = text.strip()
    if not text or any(ch not in "01" for ch in text):
        raise ValueError(f"malformed bitstring {text!r}: use only 0 and 1")
    return [int(ch) for ch in text]


def cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    if args.bits is not None:
        try:
            bits = _parse_bits(args.bits)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    else:
        try:
            sequence = [int(s) for s in args.sequence.split(",") if s.strip()]
            bits = encode(sequence, instance)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    try:
        report = validate(bits, instance)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(report.render())
    if args.output:
        manifest = make_manifest("validate", [args.instance], {"bits": args.bits, "sequence": args.sequence})
        _write_json(Path(args.output), {"manifest": manifest, **report.to_dict()})
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_landscape(args) -> int:
    instance = _load_instance(args.instance)
    weights = _weights(args)
    model = build_qubo(instance, weights)
    stop = args.stop if args.stop is not None else 2**model.n_vars
    points = landscape_scan(model, args.start, stop, args.stride)
    manifest = make_manifest(
        "landscape",
        [args.instance],
        {"start": args.start, "stop": stop, "stride": args.stride, "weights": weights.to_dict()},
    )
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("# manifest " + json.dumps(manifest, sort_keys=True) + "\n")
        fh.write("integer\tenergy\n")
        for value, e in points:
            fh.write(f"{value}\t{e!r}\n")
    print(f"wrote {len(points)} rows to {args.output}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adrplan", description="Active debris removal mission planning via QUBO.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="download TLE records over HTTPS")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--url")
    src.add_argument("--designator", help="international designator prefix, e.g. 1982-092")
    p.add_argument("-o", "--output", help=f"output file (default: ${CACHE_ENV} or ~/.cache/adrplan)")
    p.add_argument("--offline", action="store_true", help="refuse to touch the network")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("ingest", help="build an instance file from TLE records")
    p.add_argument("tle")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--t0", required=True, help="reference date, ISO format (e.g. 2023-09-30)")
    p.add_argument("--n-select", type=int, required=True)
    p.add_argument("--t-max", type=float, required=True, help="mission deadline, days")
    p.add_argument("--t-service", type=float, required=True, help="servicing time per debris, days")
    p.add_argument("--skip-bad", action="store_true", help="drop malformed records with a warning")
    p.add_argument(
        "--keep-late-alignments",
        action="store_true",
        help="store alignment times past the deadline as computed instead of as the sentinel t_max + 1",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("builtin", help="write one of the bundled artificial instances")
    p.add_argument("n_t", type=int, choices=SIZES)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_builtin)

    p = sub.add_parser("export", help="write the QUBO and its variable name map")
    p.add_argument("instance")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--names", help="name map path (default: <output>.names)")
    _add_weight_flags(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("solve", help="build the QUBO, sample it and decode the best sample")
    p.add_argument("instance")
    p.add_argument("--solver", choices=("sd", "tabu", "sa", "exact"), default="sa")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--tenure", type=int, default=20)
    p.add_argument("--beta-min", type=float, help="hot end of the annealing schedule")
    p.add_argument("--beta-max", type=float, help="cold end of the annealing schedule")
    p.add_argument("--samples-out")
    p.add_argument("--plan-out")
    p.add_argument("--unit", default="m/s", help="cost unit shown in the report")
    _add_weight_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="list every feasible tour by brute force")
    p.add_argument("instance")
    p.add_argument("--guard", type=int, default=DEFAULT_ORACLE_GUARD)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="check a bitstring or a debris sequence")
    p.add_argument("instance")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--bits")
    what.add_argument("--sequence", help="comma-separated debris indices, e.g. 1,3,4")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("landscape", help="tabulate energies of integer-encoded states")
    p.add_argument("instance")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--stop", type=int)
    p.add_argument("--stride", type=int, default=1)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (DataError, TleError, InstanceError, QuboError, SolverError, InvalidSolution) as exc:
        print(f"adrplan {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"adrplan {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.debug("%s finished in %.2f s", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``fclmqc <command> [options]``.

Every command writes into an output directory (``--out``; by default a
subdirectory of ``$FCLMQC_OUT`` or ``./runs``) together with a
``manifest.json`` echoing the command, its full configuration, the tool
version and content hashes of all inputs and outputs. Options can also come
from a ``key=value`` file given with ``--config``; command-line flags win.

Exit codes: 0 success, 1 usage, 2 bad or stale input data, 3 generation
failure (including configurations no loop can satisfy).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import statistics
import sys
from dataclasses import replace

from . import __version__, kernels
from .chimera import build_chimera, edge_list_text
from .errors import FormatError, GenerationFailure, InvalidArgument, UnsatisfiableConfig
from .experiment import (
    PRESETS, aggregate, derive_seed, dumps_survey, initial_test, read_case_records,
    run_survey, samples_to_solution, success_curve, write_curve_csv,
)
from .fcl import WALKS, FclConfig, generate_instance, parse_r, read_instance, write_instance
from .ising import energy, problem_hash
from .mqc import trace_rows, tournament
from .sampler import (
    HARDWARE_SAMPLE_TIME_US, SAMPLER_PRESETS, SampleBatch, anneal_batch, ingest_batch,
    random_batch, write_batch,
)

OUT_ENV = "FCLMQC_OUT"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GENERATION = 0, 1, 2, 3

log = logging.getLogger("fclmqc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- argument types ----------------------------------------------------------

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**63:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**63)")
    return value


def _r_value(text):
    try:
        return parse_r(text)
    except (ValueError, InvalidArgument) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _alpha(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"alpha must be positive, got {text}")
    return value


def _list_of(item_type):
    def parse(text):
        return tuple(item_type(part) for part in str(text).split(",") if part.strip())
    parse.__name__ = f"list of {item_type.__name__}"
    return parse


def _flag(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# --- parser ------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key=value file of option defaults (flags win)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<command> or ./runs/<command>)")
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_instance_opts(p):
    p.add_argument("--type", type=int, choices=(1, 2), default=1, dest="problem_type", help="loop type")
    p.add_argument("--c", type=_positive_int, default=4, help="region is c x c cells")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="loops per qubit")
    p.add_argument("--r", type=_r_value, default=math.inf, dest="r_limit",
                   help="max loops per coupler: 2, 3, inf or any k >= 1")


def _add_anneal_opts(p, sweeps_default=None):
    p.add_argument("--sampler-preset", choices=sorted(SAMPLER_PRESETS), default="default",
                   help="annealer preset; the options below override it")
    p.add_argument("--sweeps", type=_positive_int, default=sweeps_default, help="annealing sweeps")
    p.add_argument("--beta-start", type=float, default=None)
    p.add_argument("--beta-end", type=float, default=None)
    p.add_argument("--schedule", choices=("linear", "geometric"), default=None)
    p.add_argument("--random-order", type=_flag, nargs="?", const=True, default=None,
                   help="visit qubits in a fresh random order each sweep")


def build_parser():
    parser = _Parser(prog="fclmqc", description="Frustrated-cluster-loop benchmarks and multi-qubit correction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("generate", help="generate an FCL instance")
    _add_common(p)
    _add_instance_opts(p)
    p.add_argument("--cols", type=_positive_int, default=None, help="region columns (default: c)")
    p.add_argument("--walk", choices=WALKS, default=WALKS[0], help="loop proposal walk")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="produce a sample file for an instance")
    _add_common(p)
    p.add_argument("--problem", required=True, help="instance file")
    p.add_argument("--sampler", choices=("anneal", "random", "file"), default="anneal")
    p.add_argument("--input", help="sample file to ingest (with --sampler file)")
    p.add_argument("--samples", type=_positive_int, default=8192)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads (output does not depend on it)")
    _add_anneal_opts(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mqc-reduce", help="reduce a sample file to one sample with MQC")
    _add_common(p)
    p.add_argument("--problem", required=True, help="instance file")
    p.add_argument("--samples", required=True, help="sample file")
    p.add_argument("--trace", action="store_true", help="also write the energy of every tournament node")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("curve", help="raw and MQC success curve of a sample file")
    _add_common(p)
    p.add_argument("--problem", required=True, help="instance file")
    p.add_argument("--samples", required=True, help="sample file")
    p.add_argument("--block-size", type=_positive_int, default=None,
                   help="pool groups over consecutive blocks of this power-of-two size")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("survey", help="run a survey grid")
    _add_common(p)
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--type", type=int, choices=(1, 2), default=None, dest="problem_type")
    p.add_argument("--r", type=_list_of(_r_value), default=None, dest="r_limits", help="comma list")
    p.add_argument("--c", type=_list_of(_positive_int), default=None, dest="c_values", help="comma list")
    p.add_argument("--alpha", type=_list_of(_alpha), default=None, dest="alphas", help="comma list")
    p.add_argument("--cases", type=_positive_int, default=None, help="cases per cell")
    p.add_argument("--samples", type=_positive_int, default=None, help="samples per case (power of two)")
    p.add_argument("--walk", choices=WALKS, default=None)
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker processes (default: CPU count; output does not depend on it)")
    _add_anneal_opts(p)
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("report", help="fold case records into survey tables and a summary")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="cases.csv files or directories containing one")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("initial-test", help="per-case success curves for a few alphas")
    _add_common(p)
    p.add_argument("--type", type=int, choices=(1, 2), default=1, dest="problem_type")
    p.add_argument("--c", type=_positive_int, default=4)
    p.add_argument("--alpha", type=_list_of(_alpha), default=(0.1, 0.3), dest="alphas", help="comma list")
    p.add_argument("--r", type=_r_value, default=math.inf, dest="r_limit")
    p.add_argument("--cases", type=_positive_int, default=3, help="cases per alpha")
    p.add_argument("--samples", type=_positive_int, default=8192, help="samples per case")
    p.add_argument("--block-size", type=_positive_int, default=8192)
    p.add_argument("--walk", choices=WALKS, default=WALKS[0])
    _add_anneal_opts(p)
    p.set_defaults(func=cmd_initial_test)

    p = sub.add_parser("export-graph", help="write the Chimera edge list of a region")
    _add_common(p)
    p.add_argument("--c", type=_positive_int, default=4)
    p.add_argument("--cols", type=_positive_int, default=None)
    p.set_defaults(func=cmd_export_graph)

    return parser, sub.choices


def read_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment. Keys may use ``-`` or ``_``."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected key=value", lineno, path)
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _config_actions(subparser):
    """Map accepted config keys (option names and destinations) to their actions."""
    keys = {}
    for action in subparser._actions:
        if action.dest in ("help", "config", "func") or not action.option_strings:
            continue
        keys[action.dest] = action
        for opt in action.option_strings:
            keys[opt.lstrip("-").replace("-", "_")] = action
    return keys


def parse_args(argv=None):
    parser, subparsers = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        sub = subparsers[args.command]
        try:
            values = read_config_file(args.config)
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        keys = _config_actions(sub)
        unknown = sorted(set(values) - set(keys))
        if unknown:
            parser.error(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        defaults = {}
        for key, value in values.items():
            action = keys[key]
            if action.nargs == 0:  # on/off switches take a boolean
                try:
                    value = _flag(value)
                except argparse.ArgumentTypeError as exc:
                    parser.error(f"config key {key}: {exc}")
            defaults[action.dest] = value
        # String defaults go through each option's type conversion, and any
        # flag given on the command line still wins.
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# --- helpers -----------------------------------------------------------------

def default_out(command):
    return os.path.join(os.environ.get(OUT_ENV) or "runs", command)


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(out_dir, args, inputs=(), outputs=(), extra=None):
    """Write ``manifest.json``: command, config echo, seed, version, paths and hashes."""
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    manifest = {
        "command": args.command,
        "config": config,
        "master_seed": args.seed,
        "version": __version__,
        "inputs": {path: file_hash(path) for path in inputs},
        "outputs": {os.path.basename(path): file_hash(path) for path in outputs},
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args):
    out = args.out or default_out(args.command)
    os.makedirs(out, exist_ok=True)
    return out


def anneal_config(args, seed):
    base = SAMPLER_PRESETS[args.sampler_preset]
    overrides = {
        "sweeps": args.sweeps, "beta_start": args.beta_start, "beta_end": args.beta_end,
        "schedule": args.schedule, "random_order": args.random_order,
    }
    return replace(base, seed=seed, **{k: v for k, v in overrides.items() if v is not None})


# --- commands ----------------------------------------------------------------

def cmd_generate(args):
    config = FclConfig(args.problem_type, args.c, args.alpha, args.r_limit, args.seed,
                       cols=args.cols, walk=args.walk)
    instance = generate_instance(config)
    out = _out_dir(args)
    path = os.path.join(out, "instance.txt")
    write_instance(instance, path)
    write_manifest(out, args, outputs=[path], extra={"problem_hash": problem_hash(instance.problem)})
    print(f"{path}: {instance.problem.num_qubits} qubits, {instance.num_loops} loops, "
          f"ground energy {instance.ground_energy:g}")
    return EXIT_OK


def cmd_sample(args):
    instance = read_instance(args.problem)
    p = instance.problem
    inputs = [args.problem]
    if args.sampler == "file":
        if not args.input:
            raise UsageError("--sampler file needs --input")
        batch = ingest_batch(args.input, p)
        inputs.append(args.input)
    elif args.sampler == "random":
        batch = random_batch(p, args.samples, derive_seed(args.seed, "random"))
    else:
        cfg = anneal_config(args, derive_seed(args.seed, "anneal"))
        batch = anneal_batch(p, args.samples, cfg, workers=args.jobs)
    if batch.hardware_sample_time is None:
        batch.hardware_sample_time = HARDWARE_SAMPLE_TIME_US
    out = _out_dir(args)
    path = os.path.join(out, "samples.txt")
    write_batch(batch, path)
    write_manifest(out, args, inputs=inputs, outputs=[path])
    e = [energy(p, s) for s in batch.spins]
    hits = sum(1 for v in e if v == instance.ground_energy)
    print(f"{path}: {len(batch)} samples, best energy {min(e):g}, {hits} at ground energy "
          f"{instance.ground_energy:g}")
    return EXIT_OK


def cmd_reduce(args):
    instance = read_instance(args.problem)
    p = instance.problem
    batch = ingest_batch(args.samples, p)
    levels = tournament(p, batch.spins)
    reduced = levels[-1][0]
    out = _out_dir(args)
    path = os.path.join(out, "reduced.txt")
    write_batch(SampleBatch(batch.problem_id, reduced.reshape(1, -1), "mqc", batch.seed), path)
    outputs = [path]
    if args.trace:
        trace_path = os.path.join(out, "trace.csv")
        with open(trace_path, "w") as fh:
            fh.write("level,node,energy\n")
            for level, node, e in trace_rows(p, batch.spins):
                fh.write(f"{level},{node},{e:g}\n")
        outputs.append(trace_path)
    write_manifest(out, args, inputs=[args.problem, args.samples], outputs=outputs)
    e = energy(p, reduced)
    status = "ground" if e == instance.ground_energy else "not ground"
    print(f"{path}: reduced {len(batch)} samples to energy {e:g} ({status}; ground {instance.ground_energy:g})")
    return EXIT_OK


def cmd_curve(args):
    instance = read_instance(args.problem)
    batch = ingest_batch(args.samples, instance.problem)
    curve = success_curve(instance, batch, args.block_size, case_id=os.path.basename(args.samples))
    out = _out_dir(args)
    path = os.path.join(out, "curve.csv")
    write_curve_csv(path, curve, [f"# fclmqc {__version__} curve",
                                  f"# problem {batch.problem_id} samples {len(batch)}"])
    write_manifest(out, args, inputs=[args.problem, args.samples], outputs=[path])
    raw, mqc = samples_to_solution(curve, "raw"), samples_to_solution(curve, "mqc")
    fmt = (lambda v: "unsolved" if v is None else f"2^{v}")
    print(f"{path}: raw STS {fmt(raw)}, MQC STS {fmt(mqc)}")
    return EXIT_OK


def cmd_survey(args):
    preset = PRESETS[args.preset]
    overrides = {
        "problem_type": args.problem_type, "r_limits": args.r_limits, "c_values": args.c_values,
        "alphas": args.alphas, "cases_per_cell": args.cases, "samples_per_case": args.samples, "walk": args.walk,
    }
    grid = replace(preset, **{k: v for k, v in overrides.items() if v is not None})
    sampler = anneal_config(args, 0)
    out = _out_dir(args)

    def progress(key, records):
        log.info("cell type=%s R=%s c=%s alpha=%s: %d cases", *key, len(records))

    cells = run_survey(grid, sampler, args.seed, out, args.jobs, progress)
    outputs = [os.path.join(out, "cases.csv"), os.path.join(out, "survey.csv")]
    write_manifest(out, args, outputs=outputs,
                   extra={"grid": grid.describe(), "sampler": sampler.describe(), "backend": kernels.BACKEND})
    unsolved = sum(cell.raw_unsolved_count for cell in cells)
    print(f"{out}: {len(cells)} cells, {sum(c.case_count for c in cells)} cases, {unsolved} raw-unsolved")
    return EXIT_OK


def _case_files(inputs):
    paths = []
    for item in inputs:
        path = os.path.join(item, "cases.csv") if os.path.isdir(item) else item
        if not os.path.isfile(path):
            raise FormatError("no case-record file found", None, item)
        paths.append(path)
    return paths


def summary_text(records):
    """Plain-text summary: case counts, raw-unsolved cases and the MQC speedup distribution."""
    ok = [r for r in records if r.status == "ok"]
    both = [r for r in ok if r.raw_sts is not None]
    rescued = [r for r in ok if r.raw_sts is None and r.mqc_sts is not None]
    lines = [
        f"cases: {len(records)}",
        f"generation failures: {len(records) - len(ok)}",
        f"raw solved: {len(both)}",
        f"raw unsolved: {len(ok) - len(both)} (MQC solved {len(rescued)} of them)",
    ]
    if rescued:
        lines.append(f"MQC samples for raw-unsolved: mean {statistics.fmean(2 ** r.mqc_sts for r in rescued):.3f}")
    if both:
        logs = sorted(r.raw_sts - r.mqc_sts for r in both)
        lines.append(
            "MQC speedup over raw-solved cases: "
            f"geometric mean {2 ** statistics.fmean(logs):.3f}, median {2 ** statistics.median(logs):.3f}, "
            f"min {2 ** logs[0]:g}, max {2 ** logs[-1]:g}")
        counts = {}
        for v in logs:
            counts[v] = counts.get(v, 0) + 1
        lines.append("speedup histogram: " + ", ".join(f"x{2 ** k:g}: {n}" for k, n in sorted(counts.items())))
    return "\n".join(lines) + "\n"


def cmd_report(args):
    paths = _case_files(args.inputs)
    header, records = [], []
    for path in paths:
        h, recs = read_case_records(path)
        header = header or [line for line in h if not line.startswith("# fclmqc")]
        records.extend(recs)
    out = _out_dir(args)
    if not records:
        print("warning: no case records found; nothing to summarise", file=sys.stderr)
        write_manifest(out, args, inputs=paths)
        return EXIT_OK
    cells = aggregate(records)
    survey_path = os.path.join(out, "survey.csv")
    with open(survey_path, "w") as fh:
        fh.write(dumps_survey(cells, [f"# fclmqc {__version__} survey"] + header))
    summary_path = os.path.join(out, "summary.txt")
    text = summary_text(records)
    with open(summary_path, "w") as fh:
        fh.write(text)
    write_manifest(out, args, inputs=paths, outputs=[survey_path, summary_path])
    sys.stdout.write(text)
    return EXIT_OK


def cmd_initial_test(args):
    sampler = anneal_config(args, 0)
    out = _out_dir(args)
    results = initial_test(args.c, args.alphas, args.cases, args.samples, sampler, args.seed,
                           args.problem_type, args.r_limit, args.block_size, out, args.walk)
    outputs = sorted(os.path.join(out, name) for name in os.listdir(out)
                     if name.startswith("curve_") or name == "cases.csv")
    write_manifest(out, args, outputs=outputs, extra={"sampler": sampler.describe()})
    for record, _ in results:
        fmt = (lambda v: "U" if v is None else str(v))
        print(f"{record.case_id}: {record.status} raw_sts_log2={fmt(record.raw_sts)} "
              f"mqc_sts_log2={fmt(record.mqc_sts)}")
    return EXIT_OK


def cmd_export_graph(args):
    graph = build_chimera(args.c, args.cols)
    out = _out_dir(args)
    path = os.path.join(out, f"chimera_{graph.shape_label}.txt")
    with open(path, "w") as fh:
        fh.write(edge_list_text(graph))
    write_manifest(out, args, outputs=[path])
    print(f"{path}: {graph.num_qubits} qubits, {graph.num_couplers} couplers")
    return EXIT_OK


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgument) as exc:
        print(f"fclmqc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GenerationFailure, UnsatisfiableConfig) as exc:
        print(f"fclmqc {args.command}: generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (FormatError, OSError) as exc:
        print(f"fclmqc {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

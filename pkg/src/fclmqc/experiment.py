"""Samples-to-solution measurements for raw and MQC-reduced sample groups.

A batch is cut into consecutive groups of ``2**n`` samples. A raw group
succeeds if any member reaches the ground energy; an MQC group succeeds if
its reduced sample does. The samples-to-solution (STS) of a curve is the
smallest ``n`` from which the success probability stays at 1.0.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .errors import GenerationFailure, InvalidArgument, StaleInput
from .fcl import INTERSECT, FclConfig, format_r, generate_instance, parse_r
from .ising import energies
from .mqc import tournament
from .sampler import DEFAULT_ANNEAL, anneal_batch

log = logging.getLogger(__name__)

UNSOLVED = "U"
PAPER_GROUP_LOG2 = 13


@dataclass
class SuccessCurve:
    case_id: str
    group_log_sizes: list
    raw_probability: list
    mqc_probability: list
    group_counts: list = field(default_factory=list)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def success_curve(instance, batch, block_size=None, case_id=""):
    """Raw and MQC success probability for every power-of-two group size.

    With ``block_size`` unset the batch length must be a power of two. With it
    set, the batch is a run of ``block_size`` blocks and group counts are
    pooled across blocks (group sizes go up to ``block_size``).
    """
    spins = getattr(batch, "spins", batch)
    n = len(spins)
    if block_size is None:
        if not _is_pow2(n):
            raise InvalidArgument(f"batch size {n} is not a power of two")
        block_size = n
    if not _is_pow2(block_size) or n == 0 or n % block_size:
        raise InvalidArgument(f"batch size {n} is not a multiple of power-of-two block {block_size}")
    p = instance.problem
    ground = instance.ground_energy
    top = block_size.bit_length() - 1

    raw_ok = energies(p, spins) == ground
    raw_hits = np.zeros(top + 1, dtype=np.int64)
    mqc_hits = np.zeros(top + 1, dtype=np.int64)
    for lo in range(0, n, block_size):
        levels = tournament(p, spins[lo:lo + block_size])
        block_ok = raw_ok[lo:lo + block_size]
        for level in range(top + 1):
            raw_hits[level] += int(block_ok.reshape(-1, 1 << level).any(axis=1).sum())
            mqc_hits[level] += int((energies(p, levels[level]) == ground).sum())
    counts = [n >> level for level in range(top + 1)]
    raw = [h / k for h, k in zip(raw_hits.tolist(), counts)]
    mqc = [h / k for h, k in zip(mqc_hits.tolist(), counts)]
    for level in range(top):
        if mqc[level + 1] < mqc[level]:
            log.info("case %s: MQC success drops from %.4f to %.4f at group size 2^%d",
                     case_id, mqc[level], mqc[level + 1], level + 1)
    return SuccessCurve(case_id, list(range(top + 1)), raw, mqc, counts)


def samples_to_solution(curve, mode):
    """Smallest ``n`` with probability 1.0 at every group size ``>= 2**n``; ``None`` if unsolved."""
    probs = _probs(curve, mode)
    n = None
    for level in range(len(probs) - 1, -1, -1):
        if probs[level] != 1.0:
            break
        n = curve.group_log_sizes[level]
    return n


def half_success_size(curve, mode):
    """Secondary metric: smallest ``n`` whose success probability is at least 0.5."""
    for level, prob in zip(curve.group_log_sizes, _probs(curve, mode)):
        if prob >= 0.5:
            return level
    return None


def _probs(curve, mode):
    if mode == "raw":
        return curve.raw_probability
    if mode == "mqc":
        return curve.mqc_probability
    raise InvalidArgument(f"mode must be 'raw' or 'mqc', got {mode!r}")


def speedup_factor(raw_log2, mqc_log2):
    return 2.0 ** (raw_log2 - mqc_log2)


# --- per-case work ------------------------------------------------------------

CASE_COLUMNS = [
    "case_id", "r", "c", "alpha", "seed", "ground_energy", "raw_sts_log2", "mqc_sts_log2",
    "type", "raw_half_log2", "mqc_half_log2", "num_loops", "status",
]


@dataclass(frozen=True)
class CaseSpec:
    problem_type: int
    r_limit: float
    c: int
    alpha: float
    index: int
    seed: int
    samples: int
    block_size: int
    sampler: object
    walk: str = INTERSECT

    @property
    def case_id(self):
        return f"t{self.problem_type}-r{format_r(self.r_limit)}-c{self.c}-a{self.alpha:g}-{self.index:03d}"

    @property
    def cell_key(self):
        return (self.problem_type, format_r(self.r_limit), self.c, f"{self.alpha:g}")


@dataclass
class CaseRecord:
    case_id: str
    problem_type: int
    r_limit: float
    c: int
    alpha: float
    seed: int
    ground_energy: float | None = None
    raw_sts: int | None = None
    mqc_sts: int | None = None
    raw_half: int | None = None
    mqc_half: int | None = None
    num_loops: int = 0
    status: str = "ok"

    @property
    def cell_key(self):
        return (self.problem_type, format_r(self.r_limit), self.c, f"{self.alpha:g}")

    def row(self):
        def sts(v):
            return UNSOLVED if v is None else str(v)
        ok = self.status == "ok"
        return [
            self.case_id, format_r(self.r_limit), str(self.c), f"{self.alpha:g}", str(self.seed),
            _num(self.ground_energy) if ok else "",
            sts(self.raw_sts) if ok else "", sts(self.mqc_sts) if ok else "",
            str(self.problem_type),
            sts(self.raw_half) if ok else "", sts(self.mqc_half) if ok else "",
            str(self.num_loops), self.status,
        ]

    @classmethod
    def from_row(cls, row):
        def sts(v):
            return None if v in (UNSOLVED, "") else int(v)
        return cls(
            case_id=row["case_id"], problem_type=int(row["type"]), r_limit=parse_r(row["r"]),
            c=int(row["c"]), alpha=float(row["alpha"]), seed=int(row["seed"]),
            ground_energy=float(row["ground_energy"]) if row["ground_energy"] else None,
            raw_sts=sts(row["raw_sts_log2"]), mqc_sts=sts(row["mqc_sts_log2"]),
            raw_half=sts(row["raw_half_log2"]), mqc_half=sts(row["mqc_half_log2"]),
            num_loops=int(row["num_loops"]), status=row["status"],
        )


def _num(x):
    if x is None:
        return ""
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def derive_seed(master_seed, *parts):
    """Stable 63-bit seed from the master seed and a work-item key."""
    text = ":".join(str(p) for p in (master_seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


def run_case(spec, keep_curve=False):
    """Generate, sample and score one case. Returns ``(record, curve_or_None)``."""
    cfg = FclConfig(spec.problem_type, spec.c, spec.alpha, spec.r_limit, spec.seed, walk=spec.walk)
    record = CaseRecord(spec.case_id, spec.problem_type, spec.r_limit, spec.c, spec.alpha, spec.seed)
    try:
        instance = generate_instance(cfg)
    except GenerationFailure as exc:
        record.status = "generation-failure"
        record.num_loops = exc.loops_accepted
        return record, None
    sampler = replace(spec.sampler, seed=derive_seed(spec.seed, "anneal"))
    batch = anneal_batch(instance.problem, spec.samples, sampler)
    curve = success_curve(instance, batch, spec.block_size, spec.case_id)
    record.ground_energy = instance.ground_energy
    record.num_loops = instance.num_loops
    record.raw_sts = samples_to_solution(curve, "raw")
    record.mqc_sts = samples_to_solution(curve, "mqc")
    record.raw_half = half_success_size(curve, "raw")
    record.mqc_half = half_success_size(curve, "mqc")
    if record.raw_sts is not None and (record.mqc_sts is None or record.mqc_sts > record.raw_sts):
        raise AssertionError(f"MQC dominance violated in case {spec.case_id}")
    return record, (curve if keep_curve else None)


def _run_case_record(spec):
    return run_case(spec)[0]


def run_cases(specs, jobs=1):
    """Run cases, returning records in input order regardless of ``jobs``."""
    if jobs <= 1 or len(specs) <= 1:
        return [_run_case_record(s) for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_case_record, specs, chunksize=max(1, len(specs) // (4 * jobs))))


# --- survey -------------------------------------------------------------------

@dataclass(frozen=True)
class SurveyGrid:
    r_limits: tuple
    c_values: tuple
    alphas: tuple
    cases_per_cell: int
    samples_per_case: int
    problem_type: int = 1
    walk: str = INTERSECT

    def __post_init__(self):
        if not (self.r_limits and self.c_values and self.alphas):
            raise InvalidArgument("survey grid must be non-empty")
        if self.cases_per_cell < 1:
            raise InvalidArgument("cases_per_cell must be >= 1")
        if not _is_pow2(self.samples_per_case):
            raise InvalidArgument("samples_per_case must be a power of two")

    def cells(self):
        for r in self.r_limits:
            for c in self.c_values:
                for alpha in self.alphas:
                    yield r, c, alpha

    def describe(self):
        return (f"type={self.problem_type} R={','.join(format_r(r) for r in self.r_limits)} "
                f"c={','.join(map(str, self.c_values))} alpha={','.join(f'{a:g}' for a in self.alphas)} "
                f"cases={self.cases_per_cell} samples={self.samples_per_case} walk={self.walk}")


PAPER_GRID = SurveyGrid(
    r_limits=(2, 3, math.inf),
    c_values=tuple(range(2, 17)),
    alphas=tuple(round(0.05 * k, 2) for k in range(1, 11)),
    cases_per_cell=100,
    samples_per_case=8192,
)

DESK_GRID = SurveyGrid(
    r_limits=(2, math.inf),
    c_values=(2, 4),
    alphas=(0.1, 0.3, 0.5),
    cases_per_cell=20,
    samples_per_case=1024,
)

PRESETS = {"paper": PAPER_GRID, "desk": DESK_GRID}


def cell_specs(grid, r, c, alpha, sampler, master_seed):
    return [
        CaseSpec(grid.problem_type, r, c, alpha, k,
                 derive_seed(master_seed, grid.problem_type, format_r(r), c, f"{alpha:g}", k),
                 grid.samples_per_case, grid.samples_per_case, sampler, grid.walk)
        for k in range(grid.cases_per_cell)
    ]


def header_lines(kind, sampler, master_seed, extra=()):
    lines = [f"# fclmqc {__version__} {kind}", f"# sampler: {sampler.describe()}", f"# master_seed: {master_seed}"]
    lines.extend(f"# {x}" for x in extra)
    return lines


def _csv_text(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def read_case_records(path):
    """Return ``(header_comment_lines, records)`` from a case-record CSV."""
    header, body = [], []
    with open(path) as fh:
        for line in fh:
            (header if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(body))
    return [h.rstrip("\n") for h in header], [CaseRecord.from_row(r) for r in rows]


def run_survey(grid, sampler=DEFAULT_ANNEAL, master_seed=0, out_dir=None, jobs=1, progress=None):
    """Run every grid cell; returns the aggregated ``SurveyCell`` list.

    With ``out_dir`` set, case records are appended to ``cases.csv`` one whole
    cell at a time, and completed cells found there are skipped on restart.
    """
    header = header_lines("cases", sampler, master_seed, [f"grid: {grid.describe()}"])
    cases_path = os.path.join(out_dir, "cases.csv") if out_dir else None
    done = {}
    if cases_path and os.path.exists(cases_path):
        old_header, old_records = read_case_records(cases_path)
        if old_header != header:
            raise StaleInput(f"{cases_path} was written with a different configuration")
        for rec in old_records:
            done.setdefault(rec.cell_key, []).append(rec)
        done = {k: v for k, v in done.items() if len(v) == grid.cases_per_cell}
    if cases_path:
        kept = [rec for key in _grid_keys(grid) if key in done for rec in done[key]]
        _atomic_write(cases_path, "\n".join(header) + "\n" + _csv_text([CASE_COLUMNS] + [r.row() for r in kept]))

    records = []
    for r, c, alpha in grid.cells():
        key = (grid.problem_type, format_r(r), c, f"{alpha:g}")
        if key in done:
            cell_records = done[key]
        else:
            cell_records = run_cases(cell_specs(grid, r, c, alpha, sampler, master_seed), jobs)
            if cases_path:
                with open(cases_path, "a") as fh:
                    fh.write(_csv_text([rec.row() for rec in cell_records]))
                    fh.flush()
                    os.fsync(fh.fileno())
        records.extend(cell_records)
        if progress:
            progress(key, cell_records)
    cells = aggregate(records)
    if out_dir:
        write_survey_csv(os.path.join(out_dir, "survey.csv"), cells, sampler, master_seed,
                         [f"grid: {grid.describe()}"])
    return cells


def _grid_keys(grid):
    return [(grid.problem_type, format_r(r), c, f"{a:g}") for r, c, a in grid.cells()]


def _atomic_write(path, text):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


# --- aggregation --------------------------------------------------------------

SURVEY_COLUMNS = [
    "type", "r_limit", "c", "alpha", "case_count",
    "mean_raw_sts_log2", "mean_mqc_sts_log2", "raw_unsolved_count", "mean_mqc_samples_for_raw_unsolved",
    "median_raw_sts_log2", "median_mqc_sts_log2", "solved_count", "mqc_unsolved_count", "generation_failures",
]


@dataclass
class SurveyCell:
    """Aggregate over one ``(type, R, c, alpha)`` cell.

    STS means and medians are over the cases raw sampling solved (MQC solves
    all of those too). Cases raw sampling left unsolved are summarised by
    ``raw_unsolved_count`` and the mean MQC sample count ``2**mqc_sts`` over
    them.
    """

    problem_type: int
    r_limit: float
    c: int
    alpha: float
    case_count: int
    mean_raw_sts_log2: float | None
    mean_mqc_sts_log2: float | None
    raw_unsolved_count: int
    mean_mqc_samples_for_raw_unsolved: float | None
    median_raw_sts_log2: float | None = None
    median_mqc_sts_log2: float | None = None
    solved_count: int = 0
    mqc_unsolved_count: int = 0
    generation_failures: int = 0

    def row(self):
        def f3(x):
            return "" if x is None else f"{x:.3f}"
        return [
            str(self.problem_type), format_r(self.r_limit), str(self.c), f"{self.alpha:g}", str(self.case_count),
            f3(self.mean_raw_sts_log2), f3(self.mean_mqc_sts_log2), str(self.raw_unsolved_count),
            f3(self.mean_mqc_samples_for_raw_unsolved),
            f3(self.median_raw_sts_log2), f3(self.median_mqc_sts_log2),
            str(self.solved_count), str(self.mqc_unsolved_count), str(self.generation_failures),
        ]


def aggregate(records):
    """Fold case records into cells, in first-seen cell order."""
    groups = {}
    for rec in records:
        groups.setdefault(rec.cell_key, []).append(rec)
    cells = []
    for recs in groups.values():
        ok = [r for r in recs if r.status == "ok"]
        solved = [r for r in ok if r.raw_sts is not None]
        raw_unsolved = [r for r in ok if r.raw_sts is None]
        rescued = [2 ** r.mqc_sts for r in raw_unsolved if r.mqc_sts is not None]
        raw_vals = [r.raw_sts for r in solved]
        mqc_vals = [r.mqc_sts for r in solved]
        first = recs[0]
        cells.append(SurveyCell(
            problem_type=first.problem_type, r_limit=first.r_limit, c=first.c, alpha=first.alpha,
            case_count=len(recs),
            mean_raw_sts_log2=statistics.fmean(raw_vals) if raw_vals else None,
            mean_mqc_sts_log2=statistics.fmean(mqc_vals) if mqc_vals else None,
            raw_unsolved_count=len(raw_unsolved),
            mean_mqc_samples_for_raw_unsolved=statistics.fmean(rescued) if rescued else None,
            median_raw_sts_log2=float(statistics.median(raw_vals)) if raw_vals else None,
            median_mqc_sts_log2=float(statistics.median(mqc_vals)) if mqc_vals else None,
            solved_count=len(solved),
            mqc_unsolved_count=sum(1 for r in ok if r.mqc_sts is None),
            generation_failures=len(recs) - len(ok),
        ))
    return cells


def dumps_survey(cells, header=()):
    """Survey CSV text: comment header lines, then one row per cell."""
    return "".join(f"{h}\n" for h in header) + _csv_text([SURVEY_COLUMNS] + [cell.row() for cell in cells])


def write_survey_csv(path, cells, sampler, master_seed, extra=()):
    _atomic_write(path, dumps_survey(cells, header_lines("survey", sampler, master_seed, extra)))


def write_curve_csv(path, curve, header=()):
    rows = [["log2_size", "raw_prob", "mqc_prob"]]
    rows += [[str(n), f"{r:.6f}", f"{m:.6f}"]
             for n, r, m in zip(curve.group_log_sizes, curve.raw_probability, curve.mqc_probability)]
    text = "".join(f"{h}\n" for h in header) + _csv_text(rows)
    _atomic_write(path, text)


def write_case_csv(path, records, header=()):
    text = "".join(f"{h}\n" for h in header) + _csv_text([CASE_COLUMNS] + [r.row() for r in records])
    _atomic_write(path, text)


# --- initial test -------------------------------------------------------------

def initial_test(c, alphas, cases_per_alpha, samples_per_case, sampler=DEFAULT_ANNEAL, master_seed=0,
                 problem_type=1, r_limit=math.inf, block_size=2**PAPER_GROUP_LOG2, out_dir=None,
                 walk=INTERSECT):
    """Per-case success curves for a few alphas on one region size.

    ``samples_per_case`` must be a multiple of ``block_size`` (or smaller and a
    power of two, in which case it becomes the block). Group counts are pooled
    over blocks, e.g. 81920 samples give ten groups of 8192.
    """
    block = min(block_size, samples_per_case)
    if not _is_pow2(block) or samples_per_case % block:
        raise InvalidArgument(f"{samples_per_case} samples do not split into power-of-two blocks of {block}")
    results = []
    for alpha in alphas:
        for k in range(cases_per_alpha):
            spec = CaseSpec(problem_type, r_limit, c, alpha, k,
                            derive_seed(master_seed, "initial", problem_type, format_r(r_limit), c, f"{alpha:g}", k),
                            samples_per_case, block, sampler, walk)
            record, curve = run_case(spec, keep_curve=True)
            results.append((record, curve))
    if out_dir:
        header = header_lines("curve", sampler, master_seed)
        for record, curve in results:
            if curve is not None:
                write_curve_csv(os.path.join(out_dir, f"curve_{record.case_id}.csv"), curve,
                                header + [f"# case: {record.case_id} seed={record.seed}"])
        write_case_csv(os.path.join(out_dir, "cases.csv"), [r for r, _ in results],
                       header_lines("cases", sampler, master_seed))
    return results

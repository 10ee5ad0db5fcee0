"""Sample batches: simulated annealing, uniform random, and recorded files.

The annealer stands in for quantum hardware. Each sample is an independent
anneal from a random start whose random stream is seeded with
``seed + sample_index``, so a batch does not depend on how its samples are
split across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FormatError, StaleInput, InvalidArgument
from .ising import as_spins, energies, problem_hash

LINEAR, GEOMETRIC = "linear", "geometric"
SOURCES = ("anneal", "random", "ingested")
HARDWARE_SAMPLE_TIME_US = 20.0


@dataclass(frozen=True)
class AnnealConfig:
    sweeps: int = 30
    beta_start: float = 0.1
    beta_end: float = 3.0
    schedule: str = GEOMETRIC
    seed: int = 0
    random_order: bool = False

    def __post_init__(self):
        if not (isinstance(self.sweeps, (int, np.integer)) and self.sweeps >= 1):
            raise InvalidArgument(f"sweeps must be >= 1, got {self.sweeps!r}")
        if not (self.beta_start > 0 and self.beta_end >= self.beta_start and np.isfinite(self.beta_end)):
            raise InvalidArgument("need 0 < beta_start <= beta_end")
        if self.schedule not in (LINEAR, GEOMETRIC):
            raise InvalidArgument(f"unknown schedule {self.schedule!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must fit in 64 bits")

    def betas(self):
        if self.schedule == LINEAR:
            return np.linspace(self.beta_start, self.beta_end, self.sweeps)
        return np.geomspace(self.beta_start, self.beta_end, self.sweeps)

    def describe(self):
        order = "random" if self.random_order else "index"
        return (f"anneal sweeps={self.sweeps} beta={self.beta_start}->{self.beta_end} "
                f"schedule={self.schedule} order={order}")


# Default survey sampler: deliberately weak so hard instances stay unsolved.
DEFAULT_ANNEAL = AnnealConfig()
# Weaker still: at c=4 and low loop density it leaves some cases unsolved
# within 8192 samples, which is where MQC shows its benefit.
WEAK_ANNEAL = AnnealConfig(sweeps=3)

SAMPLER_PRESETS = {"default": DEFAULT_ANNEAL, "weak": WEAK_ANNEAL}


@dataclass(eq=False)
class SampleBatch:
    """Samples in production order; ``spins`` is ``(n_samples, n_qubits)`` int8."""

    problem_id: str
    spins: np.ndarray
    source: str
    seed: int | None = None
    hardware_sample_time: float | None = None

    def __len__(self):
        return len(self.spins)

    def __eq__(self, other):
        if not isinstance(other, SampleBatch):
            return NotImplemented
        return (self.problem_id == other.problem_id and self.source == other.source
                and self.seed == other.seed and np.array_equal(self.spins, other.spins))

    __hash__ = None


def _check_count(n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"sample count must be a positive integer, got {n!r}")


def random_batch(p, n, seed):
    _check_count(n)
    rng = np.random.default_rng(seed)
    spins = (2 * rng.integers(0, 2, size=(n, p.num_qubits), dtype=np.int8) - 1).astype(np.int8)
    return SampleBatch(problem_hash(p), spins, "random", seed)


def anneal_raw(p, n, cfg, workers=1):
    """Anneal ``n`` samples; returns ``(spins, tracked_energies)``."""
    _check_count(n)
    g = p.graph
    args = (g.indptr, g.nbrs, p.nbr_weights, p.a, cfg.betas(), cfg.seed)
    if workers <= 1 or n < 2 * workers:
        return kernels.anneal(*args, 0, n, cfg.random_order)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda lo_hi: kernels.anneal(*args, int(lo_hi[0]), int(lo_hi[1] - lo_hi[0]),
                                                          cfg.random_order),
                              zip(bounds[:-1], bounds[1:])))
    return np.concatenate([s for s, _ in parts]), np.concatenate([e for _, e in parts])


def anneal_batch(p, n, cfg=DEFAULT_ANNEAL, workers=1):
    spins, _ = anneal_raw(p, n, cfg, workers)
    return SampleBatch(problem_hash(p), spins, "anneal", cfg.seed)


# --- sample files -------------------------------------------------------------

def dumps_batch(batch):
    lines = [f"# problem {batch.problem_id} n {len(batch)} source {batch.source}"]
    if batch.seed is not None:
        lines.append(f"# seed {batch.seed}")
    if batch.hardware_sample_time is not None:
        lines.append(f"# sample_time_us {batch.hardware_sample_time!r}")
    lines.extend(" ".join("1" if v > 0 else "-1" for v in row) for row in batch.spins.tolist())
    return "\n".join(lines) + "\n"


def write_batch(batch, path):
    with open(path, "w") as fh:
        fh.write(dumps_batch(batch))


def loads_batch(text, p, path=None):
    """Parse sample-file text for problem ``p``; errors name the 1-based line."""
    expected_hash = problem_hash(p)
    header = None
    seed = None
    sample_time = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if tok[:1] == ["problem"]:
                if len(tok) != 6 or tok[2] != "n" or tok[4] != "source":
                    raise FormatError("header must be '# problem <hash> n <count> source <tag>'", lineno, path)
                if tok[1] != expected_hash:
                    raise StaleInput(f"problem hash {tok[1]} does not match {expected_hash}", lineno, path)
                try:
                    header = (int(tok[3]), tok[5])
                except ValueError:
                    raise FormatError("sample count is not an integer", lineno, path) from None
            elif tok[:1] == ["seed"] and len(tok) == 2:
                seed = int(tok[1])
            elif tok[:1] == ["sample_time_us"] and len(tok) == 2:
                sample_time = float(tok[1])
            continue
        if header is None:
            raise FormatError("sample line before '# problem' header", lineno, path)
        vals = line.split()
        if len(vals) != p.num_qubits:
            raise FormatError(f"expected {p.num_qubits} values, got {len(vals)}", lineno, path)
        try:
            row = [int(v) for v in vals]
        except ValueError:
            raise FormatError("non-integer spin value", lineno, path) from None
        if any(v not in (1, -1) for v in row):
            raise FormatError("spin values must be +1 or -1", lineno, path)
        rows.append(row)
    if header is None:
        raise FormatError("missing '# problem' header", None, path)
    if header[0] != len(rows):
        raise FormatError(f"header declares {header[0]} samples, file has {len(rows)}", None, path)
    spins = np.array(rows, dtype=np.int8).reshape(len(rows), p.num_qubits)
    return SampleBatch(expected_hash, spins, "ingested", seed, sample_time)


def ingest_batch(path, p):
    with open(path) as fh:
        return loads_batch(fh.read(), p, path)


def batch_energies(p, batch):
    return energies(p, as_spins(p, batch.spins))

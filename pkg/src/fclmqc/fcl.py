"""Frustrated-cluster-loop (FCL) instances with a known ground energy.

Each loop is a simple cycle on the Chimera graph whose couplers are all -1
except one +1 coupler. Loops are summed coupler-wise into one problem with
zero qubit fields. The all-(+1) state satisfies every loop up to its single
frustrated coupler, which is the best any state can do loop by loop, so the
ground energy is the plain sum of coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chimera import build_chimera, decompose
from .errors import FormatError, GenerationFailure, InvalidArgument, UnsatisfiableConfig
from .ising import IsingProblem, dumps_problem, energy, fmt_number, parse_problem_text, as_spins

TYPE1, TYPE2 = 1, 2
UNLIMITED = math.inf
TYPE1_MIN_QUBITS = 8
RETRY_BUDGET = 1000
# Loop-proposal walks, see generate_loop.
INTERSECT, RETURN = "intersect", "return"
WALKS = (INTERSECT, RETURN)


@dataclass(frozen=True)
class FclConfig:
    """Generator parameters.

    ``r_limit`` is the maximum number of loops sharing one coupler
    (``math.inf`` for unlimited). ``cols`` makes the region rectangular
    (``c`` rows by ``cols`` columns); by default it is square. ``walk``
    selects the loop proposal, see ``generate_loop``.
    """

    problem_type: int = TYPE1
    c: int = 4
    alpha: float = 0.1
    r_limit: float = UNLIMITED
    seed: int = 0
    cols: int | None = None
    walk: str = INTERSECT

    def __post_init__(self):
        if self.problem_type not in (TYPE1, TYPE2):
            raise InvalidArgument(f"problem type must be 1 or 2, got {self.problem_type!r}")
        if not (isinstance(self.c, (int, np.integer)) and self.c >= 1):
            raise InvalidArgument(f"c must be a positive integer, got {self.c!r}")
        if self.cols is not None and not (isinstance(self.cols, (int, np.integer)) and self.cols >= 1):
            raise InvalidArgument(f"cols must be a positive integer, got {self.cols!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidArgument(f"alpha must be positive, got {self.alpha!r}")
        if not (self.r_limit >= 1 and (self.r_limit == UNLIMITED or float(self.r_limit).is_integer())):
            raise InvalidArgument(f"r_limit must be an integer >= 1 or inf, got {self.r_limit!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must fit in 64 bits")
        if self.walk not in WALKS:
            raise InvalidArgument(f"walk must be one of {WALKS}, got {self.walk!r}")

    @property
    def shape(self):
        return self.c, self.c if self.cols is None else self.cols

    def graph(self):
        return build_chimera(*self.shape)


@dataclass(frozen=True)
class Loop:
    """A frustrated loop. ``couplers[k]`` joins ``qubits[k]`` and ``qubits[k + 1]`` (cyclically)."""

    qubits: tuple
    couplers: tuple
    afm_index: int

    def __len__(self):
        return len(self.qubits)

    def coefficients(self):
        coef = [-1.0] * len(self.couplers)
        coef[self.afm_index] = 1.0
        return coef


@dataclass(eq=False)
class FclInstance:
    config: FclConfig
    problem: IsingProblem
    loops: list
    ground_energy: float
    coupler_usage: np.ndarray = field(repr=False)

    @property
    def num_loops(self):
        return len(self.loops)


def format_r(r_limit):
    return "inf" if r_limit == UNLIMITED else str(int(r_limit))


def parse_r(text):
    text = str(text).strip().lower()
    if text in ("inf", "infinity", "unlimited", "oo"):
        return UNLIMITED
    value = int(text)
    if value < 1:
        raise InvalidArgument(f"R must be >= 1, got {value}")
    return value


def check_satisfiable(config):
    rows, cols = config.shape
    if config.problem_type == TYPE2 and rows * cols < 2:
        raise UnsatisfiableConfig("type-2 loops must span two cells; the region has only one")


def _loop_ready(problem_type, path_len, cells_spanned):
    if problem_type == TYPE1:
        return path_len >= TYPE1_MIN_QUBITS
    return cells_spanned >= 2


def generate_loop(graph, usage, config, rng):
    """Propose one loop, or return ``None`` if it is discarded.

    Two proposals are available (``config.walk``):

    ``"intersect"``
        Non-backtracking random walk from a uniform start qubit until it steps
        onto a qubit already on the path; the loop is the path segment from
        that qubit onwards.
    ``"return"``
        Self-avoiding walk from a uniform start qubit, stepping to a uniform
        unvisited neighbour. Whenever the start qubit is adjacent and the
        loop-type minimum is met, close with probability 1/2. A dead end
        discards the walk.

    A loop is also discarded if it misses the loop-type minimum (type 1: at
    least 8 qubits; type 2: qubits from at least 2 cells) or if any of its
    couplers is already used by ``config.r_limit`` loops. The +1 coupler is
    picked uniformly. ``usage`` is not modified.
    """
    check_satisfiable(config)
    if config.walk == INTERSECT:
        path = _intersect_walk(graph, rng)
    else:
        path = _return_walk(graph, config.problem_type, rng)
    if path is None or not _loop_ready(config.problem_type, len(path), _cells_spanned(path, graph.cols)):
        return None
    n = len(path)
    couplers = tuple(graph.edge_index(path[k], path[(k + 1) % n]) for k in range(n))
    if any(usage[k] >= config.r_limit for k in couplers):
        return None
    return Loop(tuple(path), couplers, int(rng.integers(n)))


def _cells_spanned(path, cols):
    return len({decompose(q, cols).cell for q in path})


def _intersect_walk(graph, rng):
    ip, nb = graph.indptr, graph.nbrs
    cur = int(rng.integers(graph.num_qubits))
    path = [cur]
    position = {cur: 0}
    prev = -1
    while True:
        options = [int(q) for q in nb[ip[cur]:ip[cur + 1]] if q != prev]
        nxt = options[int(rng.integers(len(options)))]
        if nxt in position:
            return path[position[nxt]:]
        position[nxt] = len(path)
        path.append(nxt)
        prev, cur = cur, nxt


def _return_walk(graph, problem_type, rng):
    cols = graph.cols
    ip, nb = graph.indptr, graph.nbrs
    start = int(rng.integers(graph.num_qubits))
    path = [start]
    visited = {start}
    cells = {decompose(start, cols).cell}
    while True:
        cur = path[-1]
        if (len(path) >= 3 and graph.has_edge(cur, start)
                and _loop_ready(problem_type, len(path), len(cells))
                and rng.random() < 0.5):
            return path
        options = [int(q) for q in nb[ip[cur]:ip[cur + 1]] if int(q) not in visited]
        if not options:
            return None
        nxt = options[int(rng.integers(len(options)))]
        path.append(nxt)
        visited.add(nxt)
        cells.add(decompose(nxt, cols).cell)


def target_loop_count(config, rng):
    """``floor(x)`` plus a Bernoulli(frac(x)) draw, with ``x = alpha * qubits``."""
    rows, cols = config.shape
    expected = config.alpha * 8 * rows * cols
    base = math.floor(expected)
    return base + int(rng.random() < expected - base)


def generate_instance(config):
    """Generate an FCL instance; deterministic in ``config.seed``."""
    check_satisfiable(config)
    graph = config.graph()
    rng = np.random.default_rng(config.seed)
    target = target_loop_count(config, rng)
    usage = np.zeros(graph.num_couplers, dtype=np.int64)
    loops = []
    failures = 0
    while len(loops) < target:
        loop = generate_loop(graph, usage, config, rng)
        if loop is None:
            failures += 1
            if failures >= RETRY_BUDGET:
                raise GenerationFailure(f"retry budget of {RETRY_BUDGET} exhausted", len(loops), target)
            continue
        failures = 0
        loops.append(loop)
        for k in loop.couplers:
            usage[k] += 1
    return assemble(config, loops)


def assemble(config, loops):
    """Sum loop couplings into an instance."""
    graph = config.graph()
    b = np.zeros(graph.num_couplers)
    usage = np.zeros(graph.num_couplers, dtype=np.int64)
    for loop in loops:
        for k, coef in zip(loop.couplers, loop.coefficients()):
            b[k] += coef
            usage[k] += 1
    problem = IsingProblem(graph, np.zeros(graph.num_qubits), b)
    inst = FclInstance(config, problem, list(loops), 0.0, usage)
    inst.ground_energy = ground_energy(inst)
    return inst


def ground_energy(instance):
    """Sum of all qubit and coupler coefficients."""
    return coefficient_sum(instance.problem)


def coefficient_sum(problem):
    return float(problem.a.sum() + problem.b.sum())


def is_solution(instance, s):
    return energy(instance.problem, as_spins(instance.problem, s)) == instance.ground_energy


# --- instance files -----------------------------------------------------------

def dumps_instance(instance):
    cfg = instance.config
    header = {
        "c": instance.problem.graph.shape_label,
        "type": cfg.problem_type,
        "alpha": fmt_number(cfg.alpha),
        "R": format_r(cfg.r_limit),
        "seed": cfg.seed,
        "ground_energy": fmt_number(instance.ground_energy),
    }
    lines = [dumps_problem(instance.problem, header).rstrip("\n"), f"walk {cfg.walk}"]
    lines.extend(f"loop {lp.afm_index} " + " ".join(map(str, lp.qubits)) for lp in instance.loops)
    return "\n".join(lines) + "\n"


def loads_instance(text, path=None):
    """Parse an instance file, rebuilding loops and checking them against the coefficients."""
    problem, header, extra = parse_problem_text(text, path)
    graph = problem.graph
    walk = INTERSECT
    loops = []
    for lineno, tok in extra:
        if tok[0] == "walk" and len(tok) == 2:
            walk = tok[1]
            continue
        if tok[0] != "loop" or len(tok) < 5:
            raise FormatError(f"unexpected record {tok[0]!r}", lineno, path)
        try:
            afm = int(tok[1])
            qubits = tuple(int(q) for q in tok[2:])
            couplers = tuple(graph.edge_index(qubits[k], qubits[(k + 1) % len(qubits)])
                             for k in range(len(qubits)))
        except (ValueError, InvalidArgument) as exc:
            raise FormatError(f"bad loop: {exc}", lineno, path) from None
        if not 0 <= afm < len(qubits) or len(set(qubits)) != len(qubits):
            raise FormatError("loop is not a simple cycle with a valid +1 position", lineno, path)
        loops.append(Loop(qubits, couplers, afm))
    try:
        config = FclConfig(
            problem_type=int(header["type"]),
            c=graph.rows,
            cols=None if graph.rows == graph.cols else graph.cols,
            alpha=float(header["alpha"]),
            r_limit=parse_r(header["R"]),
            seed=int(header["seed"]),
            walk=walk,
        )
        declared_ground = float(header["ground_energy"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad header: {exc}", 2, path) from None
    if loops:
        inst = assemble(config, loops)
        if inst.problem != problem:
            raise FormatError("loop section does not reproduce the coupler coefficients", None, path)
    else:
        inst = FclInstance(config, problem, [], coefficient_sum(problem),
                           np.zeros(graph.num_couplers, dtype=np.int64))
    if inst.ground_energy != declared_ground:
        raise FormatError(
            f"header ground energy {declared_ground} != coefficient sum {inst.ground_energy}", None, path)
    return inst


def read_instance(path):
    with open(path) as fh:
        return loads_instance(fh.read(), path)


def write_instance(instance, path):
    with open(path, "w") as fh:
        fh.write(dumps_instance(instance))

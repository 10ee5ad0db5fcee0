"""Ising objective ``F = sum_i a_i q_i + sum_(ij) b_ij q_i q_j`` over a Chimera region."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .chimera import ChimeraGraph, build_chimera
from .errors import FormatError, InvalidArgument

FIELD_RANGE = 2.0
COUPLER_RANGE = 1.0


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """Per-qubit fields ``a`` and per-coupler weights ``b`` on a Chimera graph.

    ``b[k]`` belongs to coupler ``graph.edges[k]``. Samples are int8 arrays of
    +/-1 in qubit-index order.
    """

    graph: ChimeraGraph
    a: np.ndarray
    b: np.ndarray
    scaled: bool = False
    # CSR weights aligned with graph.nbrs; built once for O(degree) flips.
    nbr_weights: np.ndarray = field(init=False, repr=False)
    gauge: np.ndarray = field(init=False, repr=False)
    num_gauge: int = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if a.shape != (self.graph.num_qubits,):
            raise InvalidArgument(f"expected {self.graph.num_qubits} qubit coefficients, got {a.size}")
        if b.shape != (self.graph.num_couplers,):
            raise InvalidArgument(f"expected {self.graph.num_couplers} coupler coefficients, got {b.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidArgument("coefficients must be finite")
        if self.scaled and (np.abs(a).max(initial=0) > FIELD_RANGE or np.abs(b).max(initial=0) > COUPLER_RANGE):
            raise InvalidArgument("scaled problem has coefficients outside hardware ranges")
        a.flags.writeable = False
        b.flags.writeable = False
        w = b[self.graph.nbr_edges]
        w.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "nbr_weights", w)
        gauge, count = gauge_clusters(self.graph, a, w)
        object.__setattr__(self, "gauge", gauge)
        object.__setattr__(self, "num_gauge", count)

    @property
    def num_qubits(self):
        return self.graph.num_qubits

    @property
    def has_fields(self):
        return bool(np.any(self.a != 0))

    def __eq__(self, other):
        if not isinstance(other, IsingProblem):
            return NotImplemented
        return (
            (self.graph.rows, self.graph.cols) == (other.graph.rows, other.graph.cols)
            and self.scaled == other.scaled
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None

    def __reduce__(self):
        return (_rebuild_problem, (self.graph.rows, self.graph.cols, self.a, self.b, self.scaled))


def gauge_clusters(graph, a, nbr_weights):
    """Label qubit clusters that can be negated without changing any energy.

    Clusters are connected components of the nonzero couplers. A cluster with
    any nonzero field, and any qubit without nonzero couplers, gets ``-1``.
    Returns ``(labels, cluster_count)``.
    """
    n = graph.num_qubits
    ip, nb = graph.indptr.tolist(), graph.nbrs.tolist()
    w = nbr_weights.tolist()
    labels = [-1] * n
    count = 0
    for root in range(n):
        if labels[root] != -1 or not any(w[ip[root]:ip[root + 1]]):
            continue
        labels[root] = count
        members, stack = [root], [root]
        while stack:
            i = stack.pop()
            for p in range(ip[i], ip[i + 1]):
                j = nb[p]
                if w[p] != 0 and labels[j] == -1:
                    labels[j] = count
                    members.append(j)
                    stack.append(j)
        if any(a[i] != 0 for i in members):
            for i in members:
                labels[i] = -2
        else:
            count += 1
    out = np.array(labels, dtype=np.int64)
    out[out == -2] = -1
    out.flags.writeable = False
    return out, count


def _rebuild_problem(rows, cols, a, b, scaled):
    return IsingProblem(build_chimera(rows, cols), a, b, scaled)


def zero_problem(graph):
    return IsingProblem(graph, np.zeros(graph.num_qubits), np.zeros(graph.num_couplers))


def as_spins(p, s):
    """Validate a sample (or 2-D stack of samples) against ``p`` and return it as int8."""
    arr = np.asarray(s)
    if arr.shape[-1:] != (p.num_qubits,) or arr.ndim not in (1, 2):
        raise InvalidArgument(f"sample shape {arr.shape} does not match {p.num_qubits} qubits")
    if not np.all((arr == 1) | (arr == -1)):
        raise InvalidArgument("sample values must be +1 or -1")
    return arr.astype(np.int8, copy=False)


def energy(p, s):
    """Objective value of one sample; each coupler counted once."""
    s = as_spins(p, s).astype(np.float64)
    if s.ndim != 1:
        raise InvalidArgument("energy() takes a single sample; use energies() for a batch")
    u, v = p.graph.edges[:, 0], p.graph.edges[:, 1]
    return float(p.a @ s + p.b @ (s[u] * s[v]))


def energies(p, spins):
    """Objective values for a ``(n_samples, n_qubits)`` stack of samples."""
    s = as_spins(p, np.atleast_2d(spins)).astype(np.float64)
    u, v = p.graph.edges[:, 0], p.graph.edges[:, 1]
    return s @ p.a + (s[:, u] * s[:, v]) @ p.b


def energy_delta(p, s, flip_set):
    """Exact ``energy(s with flip_set negated) - energy(s)``.

    Only fields on flipped qubits and couplers with exactly one flipped endpoint
    change sign, so those are the only terms summed.
    """
    s = as_spins(p, s).astype(np.float64)
    flip = np.zeros(p.num_qubits, dtype=bool)
    for q in flip_set:
        if not 0 <= int(q) < p.num_qubits:
            raise InvalidArgument(f"unknown qubit {q}")
        flip[int(q)] = True
    if not flip.any():
        return 0.0
    u, v = p.graph.edges[:, 0], p.graph.edges[:, 1]
    cut = flip[u] != flip[v]
    return float(-2.0 * (p.a[flip] @ s[flip]) - 2.0 * (p.b[cut] @ (s[u[cut]] * s[v[cut]])))


def rescale(p):
    """Divide all coefficients by the smallest factor (>= 1) that fits hardware ranges."""
    factor = max(
        1.0,
        np.abs(p.a).max(initial=0.0) / FIELD_RANGE,
        np.abs(p.b).max(initial=0.0) / COUPLER_RANGE,
    )
    if factor == 1.0:
        return IsingProblem(p.graph, p.a, p.b, scaled=True)
    a = p.a / factor
    b = p.b / factor
    # Division can land a hair outside the range through rounding.
    np.clip(a, -FIELD_RANGE, FIELD_RANGE, out=a)
    np.clip(b, -COUPLER_RANGE, COUPLER_RANGE, out=b)
    return IsingProblem(p.graph, a, b, scaled=True)


# --- text serialization -----------------------------------------------------

HEADER_FIELDS = "c type alpha R seed ground_energy"


def fmt_number(x):
    """Shortest text that parses back to the identical double."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x)) if x != 0 or not np.signbit(x) else "-0.0"
    return repr(x)


def coefficient_lines(p):
    lines = [f"a {q} {fmt_number(v)}" for q, v in enumerate(p.a.tolist()) if v != 0]
    for (u, v), w in zip(p.graph.edges.tolist(), p.b.tolist()):
        if w != 0:
            lines.append(f"b {u} {v} {fmt_number(w)}")
    return lines


def problem_hash(p):
    """Content hash of the region shape and coefficients (16 hex chars)."""
    text = f"chimera {p.graph.rows} {p.graph.cols} scaled {int(p.scaled)}\n" + "\n".join(coefficient_lines(p))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def dumps_problem(p, header=None):
    """Serialize a problem.

    ``header`` is a dict with the keys of ``HEADER_FIELDS``; missing entries
    are written as ``-``.
    """
    header = dict(header or {})
    header.setdefault("c", p.graph.shape_label)
    values = [str(header.get(k, "-")) for k in HEADER_FIELDS.split()]
    out = [f"# {HEADER_FIELDS}", " ".join(values)]
    if p.scaled:
        out.append("scaled 1")
    out.extend(coefficient_lines(p))
    return "\n".join(out) + "\n"


def parse_shape(label):
    if "x" in label:
        rows, cols = label.split("x")
        return int(rows), int(cols)
    return int(label), int(label)


def parse_problem_text(text, path=None):
    """Parse problem text into ``(problem, header_dict, extra_lines)``.

    ``extra_lines`` holds ``(lineno, tokens)`` for records this module does not
    own (e.g. ``loop`` lines) so callers can layer sections on top.
    """
    header = None
    scaled = False
    a_items, b_items, extra = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            if header is None:
                if len(tok) != 6:
                    raise FormatError(f"header needs 6 fields ({HEADER_FIELDS})", lineno, path)
                header = dict(zip(HEADER_FIELDS.split(), tok))
                rows, cols = parse_shape(header["c"])
                graph = build_chimera(rows, cols)
            elif tok[0] == "a" and len(tok) == 3:
                a_items.append((lineno, int(tok[1]), float(tok[2])))
            elif tok[0] == "b" and len(tok) == 4:
                b_items.append((lineno, int(tok[1]), int(tok[2]), float(tok[3])))
            elif tok[0] == "scaled" and len(tok) == 2:
                scaled = tok[1] == "1"
            else:
                extra.append((lineno, tok))
        except FormatError:
            raise
        except (ValueError, InvalidArgument) as exc:
            raise FormatError(str(exc), lineno, path) from None
    if header is None:
        raise FormatError("missing header line", None, path)
    a = np.zeros(graph.num_qubits)
    b = np.zeros(graph.num_couplers)
    for lineno, q, v in a_items:
        if not 0 <= q < graph.num_qubits:
            raise FormatError(f"qubit {q} out of range", lineno, path)
        a[q] = v
    for lineno, u, v, w in b_items:
        try:
            b[graph.edge_index(u, v)] = w
        except InvalidArgument as exc:
            raise FormatError(str(exc), lineno, path) from None
    try:
        problem = IsingProblem(graph, a, b, scaled)
    except InvalidArgument as exc:
        raise FormatError(str(exc), None, path) from None
    return problem, header, extra


def loads_problem(text, path=None):
    problem, header, extra = parse_problem_text(text, path)
    if extra:
        lineno, tok = extra[0]
        raise FormatError(f"unexpected record {tok[0]!r}", lineno, path)
    return problem, header

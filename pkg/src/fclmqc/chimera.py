"""Chimera connectivity graph for a rectangular region of 8-qubit cells.

Qubit indices are row-major over cells, then side (left before right), then
slot::

    index = 8 * (row * cols + col) + 4 * side + slot

Each cell is a complete bipartite K4,4 between its left and right sides.
Inter-cell couplers join same-slot, same-side qubits of adjacent cells:
left-side qubits couple vertically (row, col)-(row + 1, col), right-side
qubits couple horizontally (row, col)-(row, col + 1). See ``VERTICAL_SIDE``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument

LEFT, RIGHT = 0, 1
# Side whose qubits carry the vertical inter-cell couplers. The other side
# carries the horizontal ones.
VERTICAL_SIDE = LEFT

INTRA, HORIZONTAL, VERTICAL = 0, 1, 2
KIND_NAMES = ("intra", "horizontal", "vertical")


class CellCoord(NamedTuple):
    row: int
    col: int


class QubitLocation(NamedTuple):
    cell: CellCoord
    side: int
    slot: int


def qubit_index(row, col, side, slot, cols):
    return 8 * (row * cols + col) + 4 * side + slot


def decompose(index, cols):
    """Split a qubit index into ``(cell, side, slot)`` for a region ``cols`` cells wide."""
    cell, rem = divmod(index, 8)
    row, col = divmod(cell, cols)
    side, slot = divmod(rem, 4)
    return QubitLocation(CellCoord(row, col), side, slot)


@dataclass(frozen=True, eq=False)
class ChimeraGraph:
    """Immutable Chimera region with CSR adjacency.

    Attributes:
        rows, cols: region size in cells.
        edges: ``(m, 2)`` int array of coupler endpoints, ``edges[k, 0] < edges[k, 1]``,
            sorted lexicographically.
        kinds: ``(m,)`` coupler kind codes (``INTRA``, ``HORIZONTAL``, ``VERTICAL``).
        indptr, nbrs, nbr_edges: CSR adjacency; neighbours of ``q`` are
            ``nbrs[indptr[q]:indptr[q + 1]]`` (ascending), with the matching
            coupler indices in ``nbr_edges``.
    """

    rows: int
    cols: int
    edges: np.ndarray
    kinds: np.ndarray
    indptr: np.ndarray
    nbrs: np.ndarray
    nbr_edges: np.ndarray
    _edge_lookup: dict = field(repr=False, compare=False)

    @property
    def c(self):
        if self.rows != self.cols:
            raise AttributeError("region is not square")
        return self.rows

    @property
    def num_qubits(self):
        return 8 * self.rows * self.cols

    @property
    def num_couplers(self):
        return len(self.edges)

    @property
    def shape_label(self):
        """``"4"`` for a square region, ``"2x1"`` otherwise."""
        if self.rows == self.cols:
            return str(self.rows)
        return f"{self.rows}x{self.cols}"

    def edge_index(self, u, v):
        """Coupler index joining ``u`` and ``v``, or raise ``InvalidArgument``."""
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise InvalidArgument(f"no coupler between qubits {u} and {v}") from None

    def has_edge(self, u, v):
        return ((u, v) if u < v else (v, u)) in self._edge_lookup

    def degree(self, q):
        return int(self.indptr[q + 1] - self.indptr[q])

    def cell_of(self, q):
        self._check_qubit(q)
        return decompose(q, self.cols).cell

    def _check_qubit(self, q):
        if not 0 <= q < self.num_qubits:
            raise InvalidArgument(f"qubit {q} out of range [0, {self.num_qubits})")

    def __getstate__(self):
        return (self.rows, self.cols)

    def __setstate__(self, state):
        built = build_chimera(*state)
        for name in ("rows", "cols", "edges", "kinds", "indptr", "nbrs", "nbr_edges", "_edge_lookup"):
            object.__setattr__(self, name, getattr(built, name))


_cache = {}


def build_chimera(c, cols=None):
    """Build the Chimera graph of a ``c`` x ``cols`` cell region (square if ``cols`` is None)."""
    rows = c
    cols = c if cols is None else cols
    for v in (rows, cols):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
            raise InvalidArgument(f"region size must be a positive integer, got {v!r}")
    rows, cols = int(rows), int(cols)
    if (rows, cols) in _cache:
        return _cache[rows, cols]

    pairs = []
    for row in range(rows):
        for col in range(cols):
            for i in range(4):
                for j in range(4):
                    pairs.append((qubit_index(row, col, LEFT, i, cols),
                                  qubit_index(row, col, RIGHT, j, cols), INTRA))
            for slot in range(4):
                if row + 1 < rows:
                    pairs.append((qubit_index(row, col, VERTICAL_SIDE, slot, cols),
                                  qubit_index(row + 1, col, VERTICAL_SIDE, slot, cols), VERTICAL))
                if col + 1 < cols:
                    pairs.append((qubit_index(row, col, 1 - VERTICAL_SIDE, slot, cols),
                                  qubit_index(row, col + 1, 1 - VERTICAL_SIDE, slot, cols), HORIZONTAL))
    pairs.sort()
    edges = np.array([(u, v) for u, v, _ in pairs], dtype=np.int64).reshape(-1, 2)
    kinds = np.array([k for _, _, k in pairs], dtype=np.int8)

    n = 8 * rows * cols
    adj = [[] for _ in range(n)]
    for k, (u, v) in enumerate(edges.tolist()):
        adj[u].append((v, k))
        adj[v].append((u, k))
    indptr = np.zeros(n + 1, dtype=np.int64)
    nbrs, nbr_edges = [], []
    for q in range(n):
        adj[q].sort()
        nbrs.extend(v for v, _ in adj[q])
        nbr_edges.extend(k for _, k in adj[q])
        indptr[q + 1] = len(nbrs)

    graph = ChimeraGraph(
        rows=rows,
        cols=cols,
        edges=edges,
        kinds=kinds,
        indptr=indptr,
        nbrs=np.array(nbrs, dtype=np.int64),
        nbr_edges=np.array(nbr_edges, dtype=np.int64),
        _edge_lookup={(u, v): k for k, (u, v) in enumerate(edges.tolist())},
    )
    for arr in (edges, kinds, indptr, graph.nbrs, graph.nbr_edges):
        arr.flags.writeable = False
    _cache[rows, cols] = graph
    return graph


def neighbors(graph, q):
    """Return ``[(neighbour, coupler_index), ...]`` for qubit ``q``, sorted by neighbour."""
    graph._check_qubit(q)
    lo, hi = graph.indptr[q], graph.indptr[q + 1]
    return list(zip(graph.nbrs[lo:hi].tolist(), graph.nbr_edges[lo:hi].tolist()))


def cell_of(q, c, cols=None):
    cols = c if cols is None else cols
    if not 0 <= q < 8 * c * cols:
        raise InvalidArgument(f"qubit {q} out of range for a {c}x{cols} region")
    return decompose(q, cols).cell


def edge_list_text(graph):
    """Edge list export: one ``q1 q2 kind`` line per coupler, sorted."""
    lines = [f"{u} {v} {KIND_NAMES[k]}" for (u, v), k in zip(graph.edges.tolist(), graph.kinds.tolist())]
    return "\n".join(lines) + "\n"

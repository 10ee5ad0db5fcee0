"""Multi-qubit correction (MQC): fold a batch of samples into one sample.

Two samples are merged by splitting the qubits on which they disagree into
coupler-connected components. Components share no couplers, so each one can
independently take the block of values from either sample; keeping the
lower-energy block per component never does worse than either input. A batch
is reduced by a balanced binary tournament over batch order, so the
``2**n``-aligned groups used by the success curves are exactly the tree nodes
at level ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgument
from .ising import as_spins, energies


@dataclass
class DisagreementPartition:
    """Coupler-connected components of the qubits where two samples differ."""

    components: list

    def __len__(self):
        return len(self.components)


def align(p, s1, s2):
    """Negate ``s2`` on each zero-field coupling cluster where that raises agreement with ``s1``.

    Negating a cluster that has no fields and no nonzero couplers to the rest
    of the graph leaves the energy unchanged. On a tie the cluster is oriented
    so its lowest qubit agrees with ``s1``; ``align(p, s1, s2)`` and
    ``align(p, s1, -s2)`` are therefore identical.
    """
    s1 = as_spins(p, s1)
    s2 = as_spins(p, s2)
    out = s2.copy()
    for g in range(p.num_gauge):
        idx = np.flatnonzero(p.gauge == g)
        agree = int(np.count_nonzero(s1[idx] == s2[idx]))
        if 2 * agree < len(idx) or (2 * agree == len(idx) and s1[idx[0]] != s2[idx[0]]):
            out[idx] = -s2[idx]
    return out


def partition_disagreement(p, s1, s2, align_first=True):
    """Split the qubits where ``s1`` and (aligned) ``s2`` differ into components.

    Components are connected through nonzero couplers, so no nonzero coupler
    joins two different components.
    """
    s1 = as_spins(p, s1)
    s2 = align(p, s1, s2) if align_first else as_spins(p, s2)
    diff = s1 != s2
    g = p.graph
    label = np.full(p.num_qubits, -1)
    components = []
    for root in np.flatnonzero(diff).tolist():
        if label[root] >= 0:
            continue
        label[root] = len(components)
        comp, stack = [root], [root]
        while stack:
            i = stack.pop()
            lo, hi = g.indptr[i], g.indptr[i + 1]
            for j, w in zip(g.nbrs[lo:hi].tolist(), p.nbr_weights[lo:hi].tolist()):
                if w != 0 and diff[j] and label[j] < 0:
                    label[j] = len(components)
                    comp.append(j)
                    stack.append(j)
        components.append(frozenset(comp))
    return DisagreementPartition(components)


def combine_pair(p, s1, s2):
    """Merge two samples; the result's energy is at most the lower of the two.

    Ties inside a component keep ``s1``'s block.
    """
    s1 = as_spins(p, s1)
    s2 = as_spins(p, s2)
    if s1.ndim != 1 or s2.ndim != 1:
        raise InvalidArgument("combine_pair takes two single samples")
    g = p.graph
    return kernels.combine(g.indptr, g.nbrs, p.nbr_weights, p.a, p.gauge, p.num_gauge, s1, s2)


def tournament(p, spins):
    """All levels of the balanced reduction tree.

    ``levels[0]`` is ``spins`` itself and ``levels[n][k]`` is the reduction of
    samples ``k * 2**n`` to ``(k + 1) * 2**n - 1``. When a level has an odd
    count its last row passes through unchanged.
    """
    spins = as_spins(p, np.atleast_2d(spins))
    if len(spins) == 0:
        raise InvalidArgument("cannot reduce an empty batch")
    g = p.graph
    levels = [spins]
    while len(levels[-1]) > 1:
        levels.append(kernels.combine_level(g.indptr, g.nbrs, p.nbr_weights, p.a, p.gauge, p.num_gauge,
                                            levels[-1]))
    return levels


def reduce(p, batch):
    """Reduce a ``SampleBatch`` (or a 2-D spin array) to a single sample."""
    spins = getattr(batch, "spins", batch)
    if len(spins) == 0:
        raise InvalidArgument("cannot reduce an empty batch")
    return tournament(p, spins)[-1][0]


def trace_rows(p, spins):
    """``(level, node, energy)`` for every node of the reduction tree."""
    rows = []
    for level, nodes in enumerate(tournament(p, spins)):
        for node, e in enumerate(energies(p, nodes).tolist()):
            rows.append((level, node, e))
    return rows

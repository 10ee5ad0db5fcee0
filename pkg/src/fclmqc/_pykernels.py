"""Pure-Python kernels. Reference semantics for ``_ckernels.pyx``.

Both backends must produce bit-identical output, so the loops here fix the
random-number consumption order and the floating-point summation order.
"""

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
TWO_POW_M53 = 1.0 / 9007199254740992.0


class SplitMix64:
    """splitmix64 stream; one independent stream per annealing run."""

    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next() >> 11) * TWO_POW_M53


def _adjacency(indptr, nbrs, weights):
    indptr = indptr.tolist()
    nbrs = nbrs.tolist()
    weights = weights.tolist()
    return [
        (nbrs[indptr[q]:indptr[q + 1]], weights[indptr[q]:indptr[q + 1]])
        for q in range(len(indptr) - 1)
    ]


def anneal(indptr, nbrs, weights, h, betas, seed, start, count, random_order):
    """Run ``count`` independent Metropolis anneals.

    Run ``k`` uses the stream seeded with ``seed + start + k``. Returns
    ``(spins, tracked_energies)`` where the energies are accumulated
    incrementally from the accepted flips.
    """
    n = len(h)
    adj = _adjacency(indptr, nbrs, weights)
    hl = h.tolist()
    betas = betas.tolist()
    out = np.empty((count, n), dtype=np.int8)
    out_e = np.empty(count, dtype=np.float64)
    for k in range(count):
        rng = SplitMix64(seed + start + k)
        s = [1 if rng.next() >> 63 else -1 for _ in range(n)]
        e = 0.0
        for i in range(n):
            e += hl[i] * s[i]
            js, ws = adj[i]
            for j, w in zip(js, ws):
                if j > i:
                    e += w * s[i] * s[j]
        order = list(range(n))
        for beta in betas:
            if random_order:
                for i in range(n - 1, 0, -1):
                    j = rng.next() % (i + 1)
                    order[i], order[j] = order[j], order[i]
            for i in order:
                f = hl[i]
                js, ws = adj[i]
                for j, w in zip(js, ws):
                    f += w * s[j]
                de = -2.0 * s[i] * f
                if de <= 0.0 or rng.uniform() < math.exp(-beta * de):
                    s[i] = -s[i]
                    e += de
        out[k] = s
        out_e[k] = e
    return out, out_e


def align(gauge, ngauge, s1, s2):
    """Negate ``s2`` on each gauge cluster where that raises agreement with ``s1``.

    ``gauge[i]`` is the cluster of qubit ``i`` (``-1``: never negated). On a
    tie the cluster is oriented so its lowest qubit agrees with ``s1``, which
    makes the result identical for ``s2`` and ``-s2``.
    """
    agree = [0] * ngauge
    size = [0] * ngauge
    first = [-1] * ngauge
    for i in range(len(s1)):
        g = gauge[i]
        if g < 0:
            continue
        size[g] += 1
        if s1[i] == s2[i]:
            agree[g] += 1
        if first[g] < 0:
            first[g] = i
    flip = [2 * agree[g] < size[g] or (2 * agree[g] == size[g] and s1[first[g]] != s2[first[g]])
            for g in range(ngauge)]
    return [-y if gauge[i] >= 0 and flip[gauge[i]] else y for i, y in enumerate(s2)]


def combine(indptr, nbrs, weights, h, gauge, ngauge, s1, s2):
    """Merge two samples block-wise over their disagreement components.

    ``s2`` is first aligned to ``s1`` per gauge cluster (see ``align``). Each
    component of disagreeing qubits (connected through nonzero couplers) then
    takes whichever of the two blocks has the lower energy contribution; ties
    keep ``s1``.
    """
    n = len(h)
    a = s1.tolist()
    b = s2.tolist()
    if ngauge:
        b = align(gauge.tolist(), ngauge, a, b)
    diff = [x != y for x, y in zip(a, b)]
    if not any(diff):
        return np.array(a, dtype=np.int8)

    ip = indptr.tolist()
    nb = nbrs.tolist()
    wt = weights.tolist()
    hl = h.tolist()
    label = [-1] * n
    ncomp = 0
    for root in range(n):
        if not diff[root] or label[root] >= 0:
            continue
        label[root] = ncomp
        stack = [root]
        while stack:
            i = stack.pop()
            for p in range(ip[i], ip[i + 1]):
                j = nb[p]
                if diff[j] and label[j] < 0 and wt[p] != 0.0:
                    label[j] = ncomp
                    stack.append(j)
        ncomp += 1
    # Field + boundary energy of each s1 block. Flipping a block negates this
    # and leaves its internal couplers unchanged.
    acc = [0.0] * ncomp
    for i in range(n):
        if not diff[i]:
            continue
        t = hl[i] * a[i]
        for p in range(ip[i], ip[i + 1]):
            j = nb[p]
            if not diff[j]:
                t += wt[p] * a[i] * a[j]
        acc[label[i]] += t
    for i in range(n):
        if diff[i] and acc[label[i]] > 0.0:
            a[i] = -a[i]
    return np.array(a, dtype=np.int8)


def combine_level(indptr, nbrs, weights, h, gauge, ngauge, level):
    """One tournament round: combine rows (0, 1), (2, 3), ...; an odd last row passes through."""
    k = len(level)
    out = np.empty(((k + 1) // 2, level.shape[1]), dtype=np.int8)
    for i in range(k // 2):
        out[i] = combine(indptr, nbrs, weights, h, gauge, ngauge, level[2 * i], level[2 * i + 1])
    if k % 2:
        out[-1] = level[-1]
    return out

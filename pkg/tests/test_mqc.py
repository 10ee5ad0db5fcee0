import numpy as np
import pytest

from conftest import random_problem, random_spins
from fclmqc.chimera import build_chimera
from fclmqc.errors import InvalidArgument
from fclmqc.fcl import FclConfig, generate_instance
from fclmqc.ising import IsingProblem, energies, energy, energy_delta
from fclmqc.mqc import align, combine_pair, partition_disagreement, reduce, tournament, trace_rows
from fclmqc.sampler import AnnealConfig, anneal_batch
from oracles import best_block_choice, flood_fill_components


@pytest.fixture(scope="module")
def chain():
    """Three qubits 0 - 4 - 1 on one cell joined by two -1 couplers."""
    g = build_chimera(1)
    b = np.zeros(g.num_couplers)
    b[g.edge_index(0, 4)] = -1
    b[g.edge_index(1, 4)] = -1
    return IsingProblem(g, np.zeros(8), b)


def spins_on(values, n=8):
    s = np.ones(n, dtype=np.int8)
    for q, v in values.items():
        s[q] = v
    return s


class TestCombinePair:
    def test_identical(self, c4_instance, rng):
        s = random_spins(rng, 128)
        assert np.array_equal(combine_pair(c4_instance.problem, s, s), s)

    def test_hand_chain_tie_keeps_s1(self, chain):
        s1 = spins_on({0: 1, 4: 1, 1: -1})
        s2 = spins_on({0: 1, 4: -1, 1: -1})
        out = combine_pair(chain, s1, s2)
        assert np.array_equal(out, s1)
        assert energy(chain, out) == energy(chain, s1) == energy(chain, s2) == 0

    def test_hand_chain_takes_better_block(self, chain):
        s1 = spins_on({0: 1, 4: -1, 1: 1})
        s2 = spins_on({0: 1, 4: 1, 1: 1})
        out = combine_pair(chain, s1, s2)
        assert np.array_equal(out, s2) and energy(chain, out) == -2

    def test_global_flip(self, c4_instance, rng):
        p = c4_instance.problem
        s = random_spins(rng, 128)
        assert np.array_equal(combine_pair(p, s, -s), s)

    @pytest.mark.parametrize("seed", range(20))
    def test_sign_of_s2_irrelevant(self, seed):
        rng = np.random.default_rng(seed)
        p = generate_instance(FclConfig(c=3, alpha=0.05, seed=seed)).problem
        s1, s2 = random_spins(rng, p.num_qubits, 2)
        assert np.array_equal(combine_pair(p, s1, s2), combine_pair(p, s1, -s2))

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_block_choice_oracle(self, seed):
        rng = np.random.default_rng(seed)
        p = random_problem(build_chimera(1), rng, fields=bool(seed % 2), density=0.5)
        s1, s2 = random_spins(rng, 8, 2)
        s2a = align(p, s1, s2)
        comps = flood_fill_components(p, s1 != s2a)
        out = combine_pair(p, s1, s2)
        assert energy(p, out) == best_block_choice(p, s1, s2a, comps)
        assert energy(p, out) <= min(energy(p, s1), energy(p, s2))

    @pytest.mark.parametrize("seed", range(10))
    def test_agrees_with_s1_outside_disagreement(self, seed):
        rng = np.random.default_rng(seed)
        p = generate_instance(FclConfig(c=2, alpha=0.3, seed=seed)).problem
        s1, s2 = random_spins(rng, 32, 2)
        out = combine_pair(p, s1, s2)
        same = s1 == align(p, s1, s2)
        assert np.array_equal(out[same], s1[same])

    def test_component_independence(self, c4_instance, rng):
        # The total improvement equals the sum of per-component improvements.
        p = c4_instance.problem
        for _ in range(20):
            s1, s2 = random_spins(rng, 128, 2)
            part = partition_disagreement(p, s1, s2)
            gains = [min(0.0, energy_delta(p, s1, comp)) for comp in part.components]
            assert energy(p, combine_pair(p, s1, s2)) - energy(p, s1) == pytest.approx(sum(gains), abs=0)

    def test_rejects_batches(self, c4_instance):
        with pytest.raises(InvalidArgument):
            combine_pair(c4_instance.problem, np.ones((2, 128)), np.ones(128))

    def test_wrong_size(self, c4_instance):
        with pytest.raises(InvalidArgument):
            combine_pair(c4_instance.problem, np.ones(128), np.ones(32))


class TestAlign:
    def test_flips_minority_cluster(self):
        g = build_chimera(1)
        b = np.zeros(16)
        b[g.edge_index(0, 4)] = -1
        b[g.edge_index(1, 5)] = -1
        p = IsingProblem(g, np.zeros(8), b)
        s1 = np.ones(8, dtype=np.int8)
        s2 = spins_on({0: -1, 4: -1})  # cluster {0, 4} is a gauge copy of s1
        aligned = align(p, s1, s2)
        assert np.array_equal(aligned, s1)

    def test_fields_block_alignment(self):
        g = build_chimera(1)
        a = np.zeros(8)
        a[0] = 1
        b = np.zeros(16)
        b[g.edge_index(0, 4)] = -1
        p = IsingProblem(g, a, b)
        s2 = spins_on({0: -1, 4: -1})
        assert np.array_equal(align(p, np.ones(8), s2), s2)

    def test_alignment_preserves_energy(self, c4_instance, rng):
        p = c4_instance.problem
        s1, s2 = random_spins(rng, 128, 2)
        assert energy(p, align(p, s1, s2)) == energy(p, s2)


class TestPartition:
    def test_identical_empty(self, c4_instance):
        s = np.ones(128, dtype=np.int8)
        assert len(partition_disagreement(c4_instance.problem, s, s)) == 0

    def test_adjacent_pair(self, chain):
        s1 = np.ones(8, dtype=np.int8)
        s2 = spins_on({0: -1, 4: -1})
        part = partition_disagreement(chain, s1, s2, align_first=False)
        assert part.components == [frozenset({0, 4})]

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_flood_fill(self, seed):
        rng = np.random.default_rng(seed)
        p = generate_instance(FclConfig(c=3, alpha=0.3, seed=seed)).problem
        s1, s2 = random_spins(rng, 72, 2)
        part = partition_disagreement(p, s1, s2)
        diff = s1 != align(p, s1, s2)
        assert sorted(part.components, key=min) == flood_fill_components(p, diff)
        union = set().union(*part.components) if part.components else set()
        assert union == set(np.flatnonzero(diff).tolist())

    @pytest.mark.parametrize("seed", range(5))
    def test_no_coupler_between_components(self, seed):
        rng = np.random.default_rng(seed)
        p = generate_instance(FclConfig(c=3, alpha=0.3, seed=seed)).problem
        s1, s2 = random_spins(rng, 72, 2)
        label = {q: k for k, comp in enumerate(partition_disagreement(p, s1, s2).components) for q in comp}
        for (u, v), w in zip(p.graph.edges.tolist(), p.b.tolist()):
            if w != 0 and u in label and v in label:
                assert label[u] == label[v]


class TestReduce:
    def test_single(self, c4_instance, rng):
        s = random_spins(rng, 128, 1)
        assert np.array_equal(reduce(c4_instance.problem, s), s[0])

    def test_copies(self, c4_instance, rng):
        s = random_spins(rng, 128)
        assert np.array_equal(reduce(c4_instance.problem, np.tile(s, (7, 1))), s)

    def test_empty(self, c4_instance):
        with pytest.raises(InvalidArgument):
            reduce(c4_instance.problem, np.zeros((0, 128), dtype=np.int8))

    def test_ground_sample_survives(self, c4_instance, rng):
        spins = random_spins(rng, 128, 16)
        spins[9] = 1
        out = reduce(c4_instance.problem, spins)
        assert energy(c4_instance.problem, out) == c4_instance.ground_energy

    def test_tree_nodes_match_pairwise_oracle(self):
        inst = generate_instance(FclConfig(c=2, alpha=0.2, seed=3))
        p = inst.problem
        batch = anneal_batch(p, 64, AnnealConfig(sweeps=2, seed=4))
        levels = tournament(p, batch.spins)
        assert [len(lv) for lv in levels] == [64, 32, 16, 8, 4, 2, 1]
        assert energy(p, levels[-1][0]) <= energies(p, batch.spins).min()
        for n in range(1, len(levels)):
            for k, node in enumerate(levels[n]):
                left, right = levels[n - 1][2 * k], levels[n - 1][2 * k + 1]
                right_a = align(p, left, right)
                comps = flood_fill_components(p, left != right_a)
                if len(comps) <= 10:
                    assert energy(p, node) == best_block_choice(p, left, right_a, comps)
                group = batch.spins[k << n:(k + 1) << n]
                assert energy(p, node) <= energies(p, group).min()

    def test_odd_count_passes_through(self, c4_instance, rng):
        spins = random_spins(rng, 128, 5)
        levels = tournament(c4_instance.problem, spins)
        assert [len(lv) for lv in levels] == [5, 3, 2, 1]
        assert np.array_equal(levels[1][2], spins[4])

    def test_trace_rows(self, c4_instance, rng):
        rows = trace_rows(c4_instance.problem, random_spins(rng, 128, 4))
        assert [(lv, node) for lv, node, _ in rows] == [(0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (2, 0)]
        assert rows[-1][2] <= min(e for lv, _, e in rows if lv == 0)

from collections import deque
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimvqe.ansatz import AnsatzSpec
from aimvqe.circuit import Circuit, transpile
from aimvqe.errors import DisconnectedMap, IndexOutOfRange, TooSmallMap
from aimvqe.simulator import run_statevector
from aimvqe.topology import (
    DEFAULT_EDGES,
    CouplingMap,
    Placement,
    check_routed,
    embed_state,
    graph_distance,
    impurity_block_score,
    placement_from_config,
    preset_placements,
    route_circuit,
)
from oracle import phase_fidelity

DEFAULT = CouplingMap.default()


def bfs(edges, n, a, b):
    adj = {q: set() for q in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, queue = {a: 0}, deque([a])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    return seen[b]


def oracle_scores(edges, n):
    out = {}
    for m in permutations(range(n), 6):
        out[m] = sum(bfs(edges, n, m[a], m[b]) for a in (0, 1) for b in (2, 3))
    return out


class TestDistance:
    def test_basics(self):
        assert graph_distance(DEFAULT, 0, 1) == 1
        assert graph_distance(DEFAULT, 4, 4) == 0

    def test_zero_to_six(self):
        # 0-1-3-5-6 is the only path on this edge set
        assert graph_distance(DEFAULT, 0, 6) == bfs(DEFAULT_EDGES, 7, 0, 6) == 4

    def test_all_pairs_match_bfs(self):
        for a in range(7):
            for b in range(7):
                assert DEFAULT.distance(a, b) == bfs(DEFAULT_EDGES, 7, a, b)

    def test_bad_index(self):
        with pytest.raises(IndexOutOfRange):
            graph_distance(DEFAULT, 0, 7)

    def test_disconnected(self):
        with pytest.raises(DisconnectedMap):
            CouplingMap(4, [(0, 1), (2, 3)])

    def test_self_loop(self):
        with pytest.raises(ValueError):
            CouplingMap(2, [(1, 1)])


class TestPresets:
    def test_ordering_and_oracle(self):
        scores = oracle_scores(DEFAULT_EDGES, 7)
        presets = preset_placements(DEFAULT)
        got = {k: impurity_block_score(DEFAULT, p.mapping) for k, p in presets.items()}
        assert got["Config-A"] == min(scores.values()) == 6
        assert got["Config-C"] == max(scores.values()) == 16
        assert got["Config-A"] <= got["Config-B"] <= got["Config-C"]
        assert got == {k: scores[p.mapping] for k, p in presets.items()}

    def test_frozen_mappings(self):
        presets = preset_placements(DEFAULT)
        assert presets["Config-A"].mapping == (0, 1, 2, 3, 4, 5)
        assert presets["Config-B"].mapping == (0, 1, 2, 4, 3, 5)
        assert presets["Config-C"].mapping == (0, 2, 4, 6, 1, 3)
        assert impurity_block_score(DEFAULT, presets["Config-B"].mapping) == 10

    def test_tie_break_lexicographic(self):
        scores = oracle_scores(DEFAULT_EDGES, 7)
        best = min(scores.values())
        assert preset_placements(DEFAULT)["Config-A"].mapping == min(m for m, s in scores.items() if s == best)

    def test_fully_connected(self):
        presets = preset_placements(CouplingMap.full(6))
        cm = CouplingMap.full(6)
        assert len({impurity_block_score(cm, p.mapping) for p in presets.values()}) == 1

    def test_too_small(self):
        with pytest.raises(TooSmallMap):
            preset_placements(CouplingMap.full(5))

    def test_from_config(self):
        assert placement_from_config("Config-C", DEFAULT, 6).mapping == (0, 2, 4, 6, 1, 3)
        assert placement_from_config([6, 5, 4, 3, 2, 1], DEFAULT, 6).mapping == (6, 5, 4, 3, 2, 1)
        assert placement_from_config({"1": 2, "0": 3}, DEFAULT, 2).mapping == (3, 2)
        assert placement_from_config(None, DEFAULT, 3).mapping == (0, 1, 2)
        with pytest.raises(KeyError):
            placement_from_config("Config-Z", DEFAULT, 6)

    def test_not_injective(self):
        with pytest.raises(ValueError):
            Placement("x", (0, 0))


def routed_state(c, cmap, placement, restore, values=()):
    r = route_circuit(c, cmap, placement, restore_layout=restore)
    assert check_routed(transpile(r.circuit), cmap)
    out = run_statevector(r.circuit, values).data
    expected = embed_state(run_statevector(c, values).data, r.final, cmap.n_physical)
    return r, phase_fidelity(out, expected)


@st.composite
def cnot_circuits(draw):
    c = Circuit(6)
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    for _ in range(draw(st.integers(1, 20))):
        if rng.random() < 0.5:
            a, b = rng.choice(6, 2, replace=False)
            c.cnot(int(a), int(b))
        else:
            c.u3(*rng.uniform(-3, 3, 3), int(rng.integers(6)))
    return c


class TestRouting:
    def test_adjacent_untouched(self):
        c = Circuit(3).h(0).cnot(0, 1).cnot(1, 2)
        r = route_circuit(c, DEFAULT, Placement.trivial(3))
        assert r.swaps == 0 and r.final == (0, 1, 2)
        assert [(g.kind, g.qubits) for g in r.circuit.gates] == [(g.kind, g.qubits) for g in c.gates]

    def test_one_swap_at_distance_two(self):
        c = Circuit(3).h(0).cnot(0, 2)
        r, fid = routed_state(c, DEFAULT, Placement.trivial(3), restore=False)
        assert r.swaps == 1
        assert [g.kind for g in r.circuit.gates] == ["H", "SWAP", "CNOT"]
        assert fid >= 1 - 1e-10

    @settings(max_examples=25, deadline=None)
    @given(cnot_circuits(), st.sampled_from(["Config-A", "Config-B", "Config-C"]), st.booleans())
    def test_equivalence(self, c, preset, restore):
        r, fid = routed_state(c, DEFAULT, preset_placements(DEFAULT)[preset], restore)
        assert fid >= 1 - 1e-10
        if restore:
            assert r.final == r.initial

    def test_pauli_evolution_routed(self):
        c = AnsatzSpec("GeneralizedUCCS", 6, reference=(0, 1)).build_circuit()
        native = transpile(c)
        vals = np.random.default_rng(1).uniform(-1, 1, c.num_parameters)
        placement = preset_placements(DEFAULT)["Config-C"]
        _, fid = routed_state(native, DEFAULT, placement, restore=True, values=vals)
        assert fid >= 1 - 1e-10

    def test_swap_count_monotone_in_score(self):
        c = transpile(AnsatzSpec("GeneralizedUCCSD", 6, reference=(0, 1, 2, 3)).build_circuit())
        presets = preset_placements(DEFAULT)
        swaps = [route_circuit(c, DEFAULT, presets[k], restore_layout=True).swaps for k in ("Config-A", "Config-B", "Config-C")]
        assert swaps == sorted(swaps)

    def test_too_wide(self):
        with pytest.raises(TooSmallMap):
            route_circuit(Circuit(8), DEFAULT, Placement.trivial(8))

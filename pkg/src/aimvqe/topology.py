"""Coupling maps, logical-to-physical placements and greedy SWAP routing."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .circuit import Circuit, Gate
from .errors import DisconnectedMap, IndexOutOfRange, TooSmallMap

DEFAULT_EDGES = ((0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6))
IMPURITY_BLOCKS = ((0, 1), (2, 3))


class CouplingMap:
    """Undirected connectivity graph over physical qubits."""

    def __init__(self, n_physical: int, edges):
        self.n_physical = int(n_physical)
        norm = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on qubit {a}")
            for q in (a, b):
                if not 0 <= q < self.n_physical:
                    raise IndexOutOfRange(f"edge endpoint {q} outside 0..{self.n_physical - 1}")
            norm.add((min(a, b), max(a, b)))
        self.edges = frozenset(norm)
        n = self.n_physical
        rows = [a for a, b in self.edges] + [b for a, b in self.edges]
        cols = [b for a, b in self.edges] + [a for a, b in self.edges]
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        dist, pred = shortest_path(graph, unweighted=True, return_predecessors=True)
        if np.isinf(dist).any():
            raise DisconnectedMap("coupling map is not connected")
        self._dist = dist.astype(int)
        self._pred = pred

    @classmethod
    def default(cls) -> CouplingMap:
        return cls(7, DEFAULT_EDGES)

    @classmethod
    def full(cls, n: int) -> CouplingMap:
        return cls(n, [(a, b) for a in range(n) for b in range(a + 1, n)])

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def distance(self, a: int, b: int) -> int:
        for q in (a, b):
            if not 0 <= q < self.n_physical:
                raise IndexOutOfRange(f"physical qubit {q} outside 0..{self.n_physical - 1}")
        return int(self._dist[a, b])

    @property
    def distances(self) -> np.ndarray:
        return self._dist.copy()

    def next_hop(self, a: int, b: int) -> int:
        """Neighbour of ``a`` on a shortest path to ``b``."""
        # predecessors are stored per source; walk back from a toward b
        return int(self._pred[b, a])

    def to_dict(self) -> dict:
        return {"n_physical": self.n_physical, "edges": sorted(list(e) for e in self.edges)}


def graph_distance(cmap: CouplingMap, a: int, b: int) -> int:
    return cmap.distance(a, b)


@dataclass(frozen=True)
class Placement:
    name: str
    mapping: tuple[int, ...]  # logical qubit i -> physical mapping[i]

    def __post_init__(self):
        object.__setattr__(self, "mapping", tuple(int(p) for p in self.mapping))
        if len(set(self.mapping)) != len(self.mapping):
            raise ValueError(f"placement {self.name!r} is not injective: {self.mapping}")

    def validate(self, cmap: CouplingMap):
        for p in self.mapping:
            if not 0 <= p < cmap.n_physical:
                raise IndexOutOfRange(f"placement {self.name!r} uses physical qubit {p}")

    @classmethod
    def trivial(cls, n: int) -> Placement:
        return cls("trivial", tuple(range(n)))


def impurity_block_score(cmap: CouplingMap, mapping: Sequence[int], blocks=IMPURITY_BLOCKS) -> int:
    """Sum of graph distances between every qubit of block 0 and every qubit of block 1."""
    (a0, a1), (b0, b1) = blocks
    return sum(cmap.distance(mapping[a], mapping[b]) for a in (a0, a1) for b in (b0, b1))


def preset_placements(cmap: CouplingMap, n_logical: int = 6, blocks=IMPURITY_BLOCKS) -> dict[str, Placement]:
    """Config-A/B/C from an exhaustive search over injections.

    A minimises the impurity-block distance, C maximises it and B takes the
    median score; ties go to the lexicographically smallest mapping.
    """
    if cmap.n_physical < n_logical:
        raise TooSmallMap(f"need {n_logical} physical qubits, map has {cmap.n_physical}")
    maps = np.array(list(permutations(range(cmap.n_physical), n_logical)), dtype=np.int64)
    dist = cmap.distances
    (a0, a1), (b0, b1) = blocks
    scores = sum(dist[maps[:, a], maps[:, b]] for a in (a0, a1) for b in (b0, b1))
    # permutations() is already lexicographic, so a stable sort on score breaks ties correctly
    order = np.argsort(scores, kind="stable")
    median_score = scores[order[len(order) // 2]]

    def first_with(score) -> tuple[int, ...]:
        return tuple(int(x) for x in maps[np.flatnonzero(scores == score)[0]])

    return {
        "Config-A": Placement("Config-A", first_with(scores.min())),
        "Config-B": Placement("Config-B", first_with(median_score)),
        "Config-C": Placement("Config-C", first_with(scores.max())),
    }


@dataclass
class RoutedCircuit:
    circuit: Circuit
    initial: tuple[int, ...]
    final: tuple[int, ...]  # logical -> physical after all inserted SWAPs
    swaps: int


def route_circuit(
    circuit: Circuit, cmap: CouplingMap, placement: Placement, restore_layout: bool = False
) -> RoutedCircuit:
    """Greedy SWAP insertion along shortest paths, moving the first operand.

    The routed circuit acts on ``cmap.n_physical`` qubits. Gates on more than
    two qubits must be lowered beforehand. With ``restore_layout`` the SWAPs
    are undone after each two-qubit gate, so the placement stays fixed for
    the whole circuit and the SWAP overhead reflects it directly.
    """
    n = circuit.n_qubits
    if n > cmap.n_physical:
        raise TooSmallMap(f"circuit has {n} qubits, map has {cmap.n_physical}")
    if len(placement.mapping) != n:
        raise ValueError(f"placement maps {len(placement.mapping)} qubits, circuit has {n}")
    placement.validate(cmap)
    pos = list(placement.mapping)
    occupant = {p: l for l, p in enumerate(pos)}
    out = Circuit(cmap.n_physical, [], list(circuit.parameters))
    swaps = 0

    def do_swap(p: int, r: int):
        la, lb = occupant.get(p), occupant.get(r)
        occupant.pop(p, None)
        occupant.pop(r, None)
        if la is not None:
            pos[la] = r
            occupant[r] = la
        if lb is not None:
            pos[lb] = p
            occupant[p] = lb
        out.gates.append(Gate("SWAP", (p, r)))

    for g in circuit.gates:
        if len(g.qubits) > 2:
            raise ValueError(f"{g.kind} acts on {len(g.qubits)} qubits; lower it before routing")
        if len(g.qubits) == 2:
            a, b = g.qubits
            path = []
            while cmap.distance(pos[a], pos[b]) > 1:
                hop = (pos[a], cmap.next_hop(pos[a], pos[b]))
                do_swap(*hop)
                path.append(hop)
        else:
            path = []
        phys = tuple(pos[q] for q in g.qubits)
        if g.kind == "PauliEvolution":
            relabeled = g.pauli.relabel({q: pos[q] for q in g.qubits})
            out.gates.append(Gate("PauliEvolution", relabeled.support, g.params, relabeled))
        else:
            out.gates.append(Gate(g.kind, phys, g.params))
        swaps += len(path)
        if restore_layout:
            for hop in reversed(path):
                do_swap(*hop)
            swaps += len(path)
    return RoutedCircuit(out, tuple(placement.mapping), tuple(pos), swaps)


def check_routed(routed: Circuit, cmap: CouplingMap) -> bool:
    """True when every multi-qubit gate sits on a coupling-map edge."""
    return all(len(g.qubits) < 2 or (len(g.qubits) == 2 and cmap.has_edge(*g.qubits)) for g in routed.gates)


def embed_state(psi: np.ndarray, mapping: Sequence[int], n_physical: int) -> np.ndarray:
    """Place an ``n``-qubit logical state onto physical qubits; the rest stay in |0>."""
    n = psi.shape[0].bit_length() - 1
    if len(mapping) != n:
        raise ValueError("mapping length must equal the state width")
    idx = np.arange(1 << n, dtype=np.int64)
    target = np.zeros_like(idx)
    for l, p in enumerate(mapping):
        target |= ((idx >> l) & 1) << p
    out = np.zeros(1 << n_physical, dtype=complex)
    out[target] = psi
    return out


def placement_from_config(spec, cmap: CouplingMap, n_logical: int) -> Placement:
    """A preset name, an explicit list, or a ``{logical: physical}`` mapping."""
    if spec is None:
        return Placement.trivial(n_logical)
    if isinstance(spec, str):
        presets = preset_placements(cmap, n_logical)
        if spec not in presets:
            raise KeyError(f"unknown placement preset {spec!r}")
        return presets[spec]
    if isinstance(spec, Mapping):
        return Placement("custom", tuple(spec[k] for k in sorted(spec, key=int)))
    return Placement("custom", tuple(spec))

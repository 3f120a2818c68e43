"""Coupling maps: named layouts, JSON i/o, connectivity validation, and
vertex-disjoint shape embedding for parallel gate packing."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import networkx as nx

from .circuits import NATIVE_KINDS, Circuit


@dataclass(frozen=True)
class CouplingMap:
    n_qubits: int
    edges: frozenset[tuple[int, int]]
    name: str = ""

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop edge ({a},{b})")
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"edge ({a},{b}) outside 0..{self.n_qubits - 1}")

    @classmethod
    def from_edges(cls, n_qubits: int, edges, name: str = "") -> "CouplingMap":
        return cls(n_qubits, frozenset(tuple(sorted(e)) for e in edges), name)

    def has_edge(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in self.edges

    def neighbors(self, q: int) -> list[int]:
        out = [b if a == q else a for a, b in self.edges if q in (a, b)]
        return sorted(out)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(sorted(self.edges))
        return g

    def to_dict(self) -> dict:
        return {"name": self.name, "n_qubits": self.n_qubits,
                "edges": sorted(list(e) for e in self.edges)}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingMap":
        return cls.from_edges(int(d["n_qubits"]), d["edges"], d.get("name", ""))

    @classmethod
    def load(cls, path) -> "CouplingMap":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def complete_map(n: int) -> CouplingMap:
    return CouplingMap.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)],
                                  f"complete-{n}")


def path_map(n: int) -> CouplingMap:
    return CouplingMap.from_edges(n, [(i, i + 1) for i in range(n - 1)], f"path-{n}")


def grid_map(rows: int, cols: int) -> CouplingMap:
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return CouplingMap.from_edges(rows * cols, edges, f"grid-{rows}x{cols}")


def h_shape_7() -> CouplingMap:
    """Seven qubits in an H: leaves 0,1 and 2,3 on the ancilla midpoints 5 and 6,
    with the target 4 on the crossbar between them."""
    return CouplingMap.from_edges(
        7, [(0, 5), (1, 5), (2, 6), (3, 6), (4, 5), (4, 6)], "h-shape-7")


def h_shape_9() -> CouplingMap:
    """Relay variant of the H: the target 4 is two hops from the pair ancillas
    5 and 6, reached through the extra relay ancillas 7 and 8."""
    return CouplingMap.from_edges(
        9, [(0, 5), (1, 5), (2, 6), (3, 6), (5, 7), (6, 8), (4, 7), (4, 8)],
        "h-shape-9")


def ibm_27_heavy_hex() -> CouplingMap:
    """27-qubit heavy-hex lattice (IBM Falcon family); loaded from a data file."""
    with resources.files("mp2q.data").joinpath("ibm_27_heavy_hex.json").open() as fh:
        return CouplingMap.from_dict(json.load(fh))


def named_map(name: str) -> CouplingMap:
    if name == "h-shape-7":
        return h_shape_7()
    if name == "h-shape-9":
        return h_shape_9()
    if name == "ibm-27-heavy-hex":
        return ibm_27_heavy_hex()
    m = re.fullmatch(r"complete-(\d+)", name)
    if m:
        return complete_map(int(m.group(1)))
    m = re.fullmatch(r"path-(\d+)", name)
    if m:
        return path_map(int(m.group(1)))
    m = re.fullmatch(r"grid-(\d+)x(\d+)", name)
    if m:
        return grid_map(int(m.group(1)), int(m.group(2)))
    raise ValueError(f"unknown coupling map {name!r}")


def validate_connectivity(circuit: Circuit, coupling: CouplingMap) -> list[tuple[int, tuple[int, int]]]:
    """Violations (gate index, qubit pair) for two-qubit gates off coupling edges.

    The circuit must already be native (1-qubit rotations, X, H, CNOT).
    """
    violations = []
    for i, g in enumerate(circuit.gates):
        if g.kind not in NATIVE_KINDS:
            raise ValueError(f"gate {i} ({g.kind}) is not native")
        if len(g.qubits) == 2 and not coupling.has_edge(*g.qubits):
            violations.append((i, g.qubits))
    return violations


def find_parallel_embeddings(coupling: CouplingMap, shape: CouplingMap, k: int) -> list[dict[int, int]]:
    """Up to k vertex-disjoint monomorphic embeddings of shape into coupling.

    Greedy over matches enumerated in a deterministic (sorted) order; each
    returned dict maps shape qubit -> coupling qubit. May return fewer than k.
    """
    if shape.n_qubits > coupling.n_qubits or k <= 0:
        return []
    matcher = nx.algorithms.isomorphism.GraphMatcher(coupling.graph(), shape.graph())
    matches = []
    for mono in matcher.subgraph_monomorphisms_iter():
        embedding = {shape_q: phys for phys, shape_q in mono.items()}
        matches.append(tuple(embedding[i] for i in range(shape.n_qubits)))
    matches = sorted(set(matches))
    chosen: list[dict[int, int]] = []
    used: set[int] = set()
    for m in matches:
        if used.isdisjoint(m):
            chosen.append({i: q for i, q in enumerate(m)})
            used.update(m)
            if len(chosen) == k:
                break
    return chosen


def pack_parallel_ue(coupling: CouplingMap, k: int) -> list[dict[int, int]]:
    """Up to k vertex-disjoint 4-control-Ry layouts: standard H shapes first,
    then the 9-qubit relay variant on the leftover qubits.

    On the 27-qubit heavy-hex lattice this packs three (two standard plus one
    relay), leaving four qubits idle."""
    chosen = find_parallel_embeddings(coupling, h_shape_7(), k)
    if len(chosen) == k:
        return chosen
    used = {q for emb in chosen for q in emb.values()}
    relay = h_shape_9()
    matcher = nx.algorithms.isomorphism.GraphMatcher(coupling.graph(), relay.graph())
    matches = sorted({tuple(sorted(mono.items()))
                      for mono in matcher.subgraph_monomorphisms_iter()})
    for m in matches:
        emb = {shape_q: phys for phys, shape_q in m}
        if used.isdisjoint(emb.values()):
            chosen.append(emb)
            used.update(emb.values())
            if len(chosen) == k:
                break
    return chosen

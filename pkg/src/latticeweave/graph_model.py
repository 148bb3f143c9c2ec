"""Graph-level model of the construction sequences.

The tracker follows which graph state a sequence of global operations prepares
without simulating amplitudes: a CZ between two ``|+>`` sites toggles their
edge, a CZ touching a ``|0>`` site does nothing, and a Hadamard flips an
unentangled site between ``|0>`` and ``|+>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from .errors import InvariantViolation, SequenceError
from .lattice import (
    ConstructionSequence,
    GlobalCZ,
    GlobalMeasureX,
    InitState,
    Lattice,
    RowHadamard,
    Species,
)
from .pauli import PauliString


class HadamardOnEntangledVertex(InvariantViolation):
    """The tracker cannot represent a Hadamard on a vertex with edges."""


class Status(enum.Enum):
    ZERO = "zero"
    PLUS = "plus"


class Graph:
    """Immutable simple graph on integer site labels."""

    __slots__ = ("vertices", "edges", "_adj")

    def __init__(self, vertices: Iterable[int] = (), edges: Iterable[tuple[int, int]] = ()) -> None:
        verts = frozenset(int(v) for v in vertices)
        norm = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvariantViolation(f"self-loop on vertex {u}")
            if u not in verts or v not in verts:
                raise InvariantViolation(f"edge ({u}, {v}) leaves the vertex set")
            norm.add((min(u, v), max(u, v)))
        self.vertices = verts
        self.edges = frozenset(norm)
        adj: dict[int, set[int]] = {v: set() for v in verts}
        for u, v in norm:
            adj[u].add(v)
            adj[v].add(u)
        self._adj = {v: frozenset(ns) for v, ns in adj.items()}

    def neighbors(self, v: int) -> frozenset[int]:
        try:
            return self._adj[v]
        except KeyError:
            raise KeyError(f"vertex {v} not in graph") from None

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def sorted_vertices(self) -> list[int]:
        return sorted(self.vertices)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def subgraph(self, keep: Iterable[int]) -> "Graph":
        keep = frozenset(keep) & self.vertices
        return Graph(keep, ((u, v) for u, v in self.edges if u in keep and v in keep))

    def without(self, v: int) -> "Graph":
        return self.subgraph(self.vertices - {v})

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.sorted_vertices())
        g.add_edges_from(self.sorted_edges())
        return g

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "Graph":
        return cls(g.nodes, g.edges)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self.vertices == other.vertices and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.vertices, self.edges))

    def __repr__(self) -> str:
        return f"Graph(|V|={len(self.vertices)}, |E|={len(self.edges)})"


@dataclass(frozen=True)
class TrackedState:
    status: dict[int, Status]
    edges: frozenset[tuple[int, int]]

    def graph(self) -> Graph:
        return Graph((v for v, s in self.status.items() if s is Status.PLUS), self.edges)


@dataclass(frozen=True)
class StabilizerGenerator:
    center: int
    pauli: PauliString


def track_states(lattice: Lattice, sequence: ConstructionSequence) -> TrackedState:
    status = {
        i: Status.ZERO if lattice.init_state(i, sequence.init) is InitState.ZERO else Status.PLUS
        for i in range(lattice.n)
    }
    edges: set[tuple[int, int]] = set()
    degree = dict.fromkeys(range(lattice.n), 0)
    for op in sequence.ops:
        if isinstance(op, GlobalCZ):
            for a, b in lattice.cz_pairs(op):
                if status[a] is Status.ZERO or status[b] is Status.ZERO:
                    continue
                e = (min(a, b), max(a, b))
                if e in edges:
                    edges.remove(e)
                    degree[a] -= 1
                    degree[b] -= 1
                else:
                    edges.add(e)
                    degree[a] += 1
                    degree[b] += 1
        elif isinstance(op, RowHadamard):
            for s in lattice.hadamard_targets(op):
                if degree[s]:
                    raise HadamardOnEntangledVertex(f"hadamard on site {s} which has {degree[s]} edges")
                status[s] = Status.PLUS if status[s] is Status.ZERO else Status.ZERO
        else:
            raise SequenceError("the graph tracker does not handle measure_x; use measured_graph")
    return TrackedState(status, frozenset(edges))


def track_sequence(lattice: Lattice, sequence: ConstructionSequence) -> Graph:
    """Graph state prepared by a measurement-free sequence."""
    return track_states(lattice, sequence).graph()


def measured_graph(lattice: Lattice, sequence: ConstructionSequence) -> Graph:
    """Track the unitary part, then apply the X-measurement rule site by site.

    Measured sites are processed in ascending index order with all outcomes
    taken as +1.  The result equals the post-measurement state only up to
    local Clifford operations.
    """
    graph = track_sequence(lattice, sequence.without_measurements())
    for op in sequence.ops:
        if not isinstance(op, GlobalMeasureX):
            continue
        for v in lattice.measure_targets(op):
            if v not in graph.vertices:
                continue
            ns = graph.neighbors(v)
            graph = measure_x_graph_rule(graph, v, min(ns)) if ns else graph.without(v)
    return graph


def graph_stabilizers(graph: Graph) -> list[StabilizerGenerator]:
    out = []
    for v in graph.sorted_vertices():
        ops = {v: "X"}
        ops.update((u, "Z") for u in graph.neighbors(v))
        out.append(StabilizerGenerator(v, PauliString(ops)))
    return out


def local_complementation(graph: Graph, vertex: int) -> Graph:
    ns = sorted(graph.neighbors(vertex))
    edges = set(graph.edges)
    for i, a in enumerate(ns):
        for b in ns[i + 1:]:
            edges ^= {(a, b)}
    return Graph(graph.vertices, edges)


def measure_x_graph_rule(graph: Graph, vertex: int, special_neighbor: int | None = None) -> Graph:
    """Graph after measuring X on ``vertex`` with outcome +1, up to local Cliffords."""
    ns = graph.neighbors(vertex)
    if not ns:
        return graph.without(vertex)
    b0 = min(ns) if special_neighbor is None else special_neighbor
    if b0 not in ns:
        raise InvariantViolation(f"special neighbour {b0} is not adjacent to {vertex}")
    g = local_complementation(graph, b0)
    g = local_complementation(g, vertex)
    g = local_complementation(g, b0)
    return g.without(vertex)


# ---------------------------------------------------------------------------
# surface code on the Blue sublattice

_BOUNDARY = -1


def _independent(paulis: list[PauliString]) -> list[PauliString]:
    """Drop generators that are GF(2) products of earlier ones."""
    pivots: dict[int, int] = {}
    keep = []
    for p in paulis:
        vec = 0
        for site, letter in p.ops.items():
            if letter in "XY":
                vec |= 1 << (2 * site)
            if letter in "ZY":
                vec |= 1 << (2 * site + 1)
        while vec:
            top = vec.bit_length() - 1
            if top not in pivots:
                pivots[top] = vec
                keep.append(p)
                break
            vec ^= pivots[top]
    return keep


def surface_code_faces(lattice: Lattice, blue: int) -> list[int]:
    """Plaquette-centre Red sites (odd ix+iy) diagonal to a Blue site."""
    s = lattice.sites[blue]
    faces = []
    for dx in (0, 1):
        for dy in (0, 1):
            ix, iy = s.ix + dx, s.iy + dy
            if ix < lattice.lx and iy < lattice.ly and (ix + iy) % 2 == 1:
                faces.append(lattice.index(Species.RED, ix, iy))
    return faces


def surface_code_stabilizers(lattice: Lattice, retained_sites: Iterable[int]) -> list[PauliString]:
    """Independent star/plaquette generators on the retained Blue sites.

    Plaquettes sit on Red sites with odd ``ix + iy`` and carry Z on the
    adjacent Blue sites.  X-type generators come from a minimum cycle basis of
    the face graph, in which each Blue site is an edge between its two
    plaquettes (or a leg to a shared virtual boundary vertex).  In the bulk
    these cycles are the weight-4 stars around Red sites with even
    ``ix + iy``; at open boundaries they shrink to lower-weight operators.
    """
    retained = sorted(set(retained_sites))
    blue = set(lattice.sites_of(Species.BLUE))
    stray = [s for s in retained if s not in blue]
    if stray:
        raise InvariantViolation(f"sites {stray[:5]} are not Blue edge qubits")

    faces_of = {b: surface_code_faces(lattice, b) for b in retained}
    plaquettes: dict[int, list[int]] = {}
    for b in retained:
        for f in faces_of[b]:
            plaquettes.setdefault(f, []).append(b)
    z_type = [PauliString(dict.fromkeys(bs, "Z")) for _, bs in sorted(plaquettes.items())]

    # subdivided face graph: face - blue - face, or face - blue - boundary
    g = nx.Graph()
    x_type = []
    for b in retained:
        fs = faces_of[b]
        if not fs:
            x_type.append(PauliString({b: "X"}))
            continue
        ends = fs if len(fs) == 2 else [fs[0], _BOUNDARY]
        for f in ends:
            g.add_edge(("b", b), ("f", f))
    cycles = nx.minimum_cycle_basis(g)
    for cyc in cycles:
        x_type.append(PauliString({node[1]: "X" for node in cyc if node[0] == "b"}))

    def key(p: PauliString):
        return (p.weight, p.support)

    ordered = sorted(z_type, key=key) + sorted(x_type, key=key)
    return _independent(ordered)


# ---------------------------------------------------------------------------
# export


def to_adjacency_text(graph: Graph) -> str:
    lines = [f"{v}: {' '.join(str(u) for u in sorted(graph.neighbors(v)))}".rstrip() for v in graph.sorted_vertices()]
    return "\n".join(lines) + ("\n" if lines else "")


def to_edge_csv(graph: Graph, lattice: Lattice | None = None) -> str:
    if lattice is None:
        rows = ["u,v"] + [f"{u},{v}" for u, v in graph.sorted_edges()]
    else:
        rows = ["u,v,ux,uy,vx,vy"]
        for u, v in graph.sorted_edges():
            (ux, uy), (vx, vy) = lattice.position(u), lattice.position(v)
            rows.append(f"{u},{v},{float(ux)!r},{float(uy)!r},{float(vx)!r},{float(vy)!r}")
    return "\n".join(rows) + "\n"

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latticeweave.errors import InvariantViolation, SequenceError
from latticeweave.graph_model import (
    Graph,
    HadamardOnEntangledVertex,
    Status,
    graph_stabilizers,
    local_complementation,
    measure_x_graph_rule,
    measured_graph,
    surface_code_stabilizers,
    to_adjacency_text,
    to_edge_csv,
    track_sequence,
    track_states,
)
from latticeweave.lattice import (
    GlobalCZ,
    InitPattern,
    InitState,
    Parity,
    ConstructionSequence,
    Species,
    build_lattice,
    parse_sequence,
    scheme_i_sequence,
    scheme_ii_sequence,
)
from latticeweave.pauli import PauliString
from latticeweave.stabilizer import Tableau, canonical_form, canonical_generators, run_sequence_clifford

from oracles import adjacency, lc_equivalent, paulis_to_matrix, stabilizer_matrix_to_graph


def tracker_generators(lattice, seq):
    state = track_states(lattice, seq)
    gens = [g.pauli for g in graph_stabilizers(state.graph())]
    gens += [PauliString({v: "Z"}) for v, s in state.status.items() if s is Status.ZERO]
    return gens


@given(n=st.integers(2, 7), data=st.data())
def test_local_complementation_is_involution(n, data):
    edges = data.draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] < e[1])))
    g = Graph(range(n), edges)
    v = data.draw(st.integers(0, n - 1))
    assert local_complementation(local_complementation(g, v), v) == g


def test_local_complementation_on_star():
    star = Graph(range(4), [(0, 1), (0, 2), (0, 3)])
    assert local_complementation(star, 0).edges == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}


def graph_after_tableau_measurement(graph: Graph, v: int) -> np.ndarray:
    """Measure X_v with outcome +1 on a tableau and recover a graph on the rest."""
    n = len(graph.vertices)
    t = Tableau(n)
    t.apply_h(range(n))
    for a, b in graph.sorted_edges():
        t.apply_cz([a], [b])
    t.measure_pauli(PauliString({v: "X"}), force=1)
    rest = [q for q in range(n) if q != v]
    gens = []
    for p in t.stabilizers():
        ops = {q: c for q, c in p.ops.items() if q != v}
        assert p.ops.get(v, "I") in "IX"
        if ops:
            gens.append(PauliString(ops))
    gens = canonical_generators(gens, n)
    xs, zs = paulis_to_matrix(gens, rest)
    return stabilizer_matrix_to_graph(xs, zs)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 6), data=st.data())
def test_measurement_rule_matches_tableau_up_to_lc(n, data):
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    edges = data.draw(st.sets(st.sampled_from(pairs), min_size=1))
    g = Graph(range(n), edges)
    v = data.draw(st.sampled_from(sorted(u for u in range(n) if g.degree(u))))
    special = data.draw(st.sampled_from(sorted(g.neighbors(v))))
    ruled = measure_x_graph_rule(g, v, special)
    _, a_rule = adjacency(ruled.vertices, ruled.edges)
    assert lc_equivalent(a_rule, graph_after_tableau_measurement(g, v))


def test_measurement_rule_isolated_vertex_and_bad_special():
    g = Graph(range(3), [(1, 2)])
    assert measure_x_graph_rule(g, 0) == Graph([1, 2], [(1, 2)])
    with pytest.raises(InvariantViolation):
        measure_x_graph_rule(g, 1, special_neighbor=0)


@pytest.mark.parametrize("size", [(1, 1), (2, 2), (3, 3), (4, 3), (5, 5)])
@pytest.mark.parametrize("factory", [scheme_i_sequence, lambda: scheme_ii_sequence().without_measurements()])
def test_tracker_agrees_with_tableau(size, factory):
    lat = build_lattice(*size)
    seq = factory()
    tab, _ = run_sequence_clifford(lat, seq)
    assert canonical_generators(tracker_generators(lat, seq), lat.n) == canonical_form(tab)


def test_scheme_i_degrees_in_bulk():
    lat = build_lattice(6, 6)
    g = track_sequence(lat, scheme_i_sequence())
    inner = [v for v in g.vertices if all(1 < c < 4 for c in (lat.sites[v].ix, lat.sites[v].iy))]
    assert len(inner) == 8 and all(g.degree(v) == 5 for v in inner)
    assert g.vertices == set(range(lat.n))


def test_scheme_ii_stars_have_degree_four():
    lat = build_lattice(4, 4)
    g = track_sequence(lat, scheme_ii_sequence().without_measurements())
    centre = lat.index(Species.RED, 1, 2)
    assert g.degree(centre) == 4
    assert lat.index(Species.RED, 1, 1) not in g.vertices
    zeros = [v for v in lat.sites_of(Species.RED) if lat.row(v) % 2 == 0]
    assert not set(zeros) & g.vertices


def test_hadamard_on_entangled_vertex_is_rejected():
    lat = build_lattice(2, 2)
    seq = parse_sequence("cz red 0.5 0.5\nhadamard red even\n")
    with pytest.raises(HadamardOnEntangledVertex):
        track_sequence(lat, seq)


def test_tracker_refuses_measurement():
    with pytest.raises(SequenceError):
        track_sequence(build_lattice(2, 2), scheme_ii_sequence())


def test_cz_on_zero_site_leaves_no_edge():
    lat = build_lattice(2, 2)
    init = InitPattern.from_mapping({(Species.RED, Parity.EVEN): InitState.ZERO})
    seq = ConstructionSequence(init, (GlobalCZ(Species.RED, 0.5, 0.5),))
    g = track_sequence(lat, seq)
    assert all(lat.row(u) % 2 == 1 for e in g.edges for u in e if lat.species(u) is Species.RED)


@pytest.mark.parametrize("size", [(2, 2), (3, 3), (4, 4)])
def test_forced_scheme_ii_yields_surface_code(size):
    lat = build_lattice(*size)
    tab, record = run_sequence_clifford(lat, scheme_ii_sequence(), policy="force-plus")
    assert set(record.outcomes().values()) == {1}
    blues = lat.sites_of(Species.BLUE)
    code = surface_code_stabilizers(lat, blues)
    assert len(code) == len(blues)
    reds = [PauliString({r: "X"}) for r in lat.sites_of(Species.RED)]
    assert canonical_generators(code + reds, lat.n) == canonical_form(tab)


@pytest.mark.parametrize("size", [(2, 2), (3, 3)])
def test_measured_graph_is_lc_equivalent_to_surface_code(size):
    lat = build_lattice(*size)
    g = measured_graph(lat, scheme_ii_sequence())
    blues = lat.sites_of(Species.BLUE)
    assert g.vertices == set(blues)
    xs, zs = paulis_to_matrix(surface_code_stabilizers(lat, blues), blues)
    _, a = adjacency(g.vertices, g.edges)
    assert lc_equivalent(a, stabilizer_matrix_to_graph(xs, zs))


def test_surface_code_generator_counts():
    lat = build_lattice(3, 3)
    code = surface_code_stabilizers(lat, lat.sites_of(Species.BLUE))
    zs = [p for p in code if set(p.ops.values()) == {"Z"}]
    assert (len(zs), len(code) - len(zs)) == (4, 5)
    for p in code:
        for q in code:
            assert p.commutes_with(q)
    with pytest.raises(InvariantViolation):
        surface_code_stabilizers(lat, [0])


def test_exports():
    lat = build_lattice(1, 1)
    g = Graph([0, 1], [(0, 1)])
    assert to_adjacency_text(g) == "0: 1\n1: 0\n"
    csv = to_edge_csv(g, lat)
    assert csv.splitlines()[0].startswith("u,v")
    assert len(csv.splitlines()) == 2
    assert Graph.from_networkx(g.to_networkx()) == g

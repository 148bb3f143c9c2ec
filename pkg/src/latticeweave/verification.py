"""Two-setting verification of bipartite graph states.

For a vertex set ``M`` on one side of the bipartition the projector
``P_M = prod_{i in M} (1 + S_i)/2`` expands into ``2^-|M| sum_T <prod_T S_i>``.
Every ``S_i`` with ``i`` in ``M`` is X on ``i`` and Z on neighbours from the
other side, so one setting (X on the side of ``M``, Z on the rest) measures all
of them at once.  In that basis each outcome string has a syndrome, one bit per
``i`` in ``M``; the subset terms are the Walsh-Hadamard transform of the
syndrome distribution.

The fidelity bound is ``F >= <P_A> + <P_B> - 1``; a bound above 1/2 certifies
genuine multipartite entanglement.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantViolation, ResourceCapExceeded
from .graph_model import Graph, graph_stabilizers, track_sequence
from .lattice import (
    Bipartition,
    ConstructionSequence,
    GlobalCZ,
    Lattice,
    LocalRegion,
    Species,
)
from .noise import EnsembleStats, evaluate_ensemble
from .pauli import PauliString
from .stabilizer import Tableau
from .statevector import StateVector, _basis_index, hadamard, ideal_graph_state

SUBSET_CAP = 20
GME_THRESHOLD = 0.5


# ---------------------------------------------------------------------------
# settings and per-state kernels


@dataclass(frozen=True)
class MeasurementSetting:
    bases: tuple[tuple[int, str], ...]

    @classmethod
    def for_side(cls, bp: Bipartition, side: str, sites: Iterable[int] | None = None) -> "MeasurementSetting":
        """X on ``side`` ("a" or "b"), Z on the other side."""
        x_side = bp.a if side == "a" else bp.b
        sites = sorted(bp.a | bp.b) if sites is None else sorted(sites)
        return cls(tuple((s, "X" if s in x_side else "Z") for s in sites))

    def x_sites(self) -> list[int]:
        return [s for s, b in self.bases if b == "X"]


def _check_region(graph: Graph, region: Sequence[int]) -> None:
    if len(region) > SUBSET_CAP:
        raise ResourceCapExceeded(f"|M| = {len(region)} exceeds the subset cap of {SUBSET_CAP}")
    members = set(region)
    for i in region:
        if i not in graph.vertices:
            raise InvariantViolation(f"site {i} is not a graph vertex")
        if graph.neighbors(i) & members:
            raise InvariantViolation("region spans both sides of the bipartition")


def _syndrome_masks(state: StateVector, region: Sequence[int], graph: Graph) -> list[int]:
    masks = []
    for i in region:
        try:
            m = 1 << state.pos(i)
            for j in graph.neighbors(i):
                m |= 1 << state.pos(j)
        except IndexError:
            raise InvariantViolation(f"stabilizer of site {i} reaches outside the simulated sites") from None
        masks.append(m)
    return masks


def _setting_probabilities(state: StateVector, x_sites: Iterable[int]) -> np.ndarray:
    rotated = state.copy()
    h = hadamard()
    for s in x_sites:
        rotated.apply_1q(h, s)
    return rotated.probabilities()


def _syndromes(idx: np.ndarray, masks: Sequence[int]) -> np.ndarray:
    syn = np.zeros(idx.shape, dtype=np.int64)
    for k, m in enumerate(masks):
        syn |= (np.bitwise_count(idx & m).astype(np.int64) & 1) << k
    return syn


def walsh_hadamard(h: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform (length a power of two)."""
    out = np.array(h, dtype=float)
    step = 1
    while step < out.size:
        v = out.reshape(-1, 2, step)
        a, b = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :], v[:, 1, :] = a + b, a - b
        step *= 2
    return out


def subset_terms(state: StateVector, region: Sequence[int], graph: Graph) -> np.ndarray:
    """``<prod_{i in T} S_i>`` for every subset T of ``region`` (bit k of T is region[k])."""
    region = list(region)
    _check_region(graph, region)
    masks = _syndrome_masks(state, region, graph)
    probs = _setting_probabilities(state, region)
    syn = _syndromes(_basis_index(probs.size), masks)
    hist = np.bincount(syn, weights=probs, minlength=2 ** len(region))
    return walsh_hadamard(hist)


def _projector_value(state: StateVector, region: Sequence[int], graph: Graph) -> float:
    terms = subset_terms(state, region, graph)
    return float(terms.sum() / terms.size)


def _tableau_projector(tableau: Tableau, region: Sequence[int], graph: Graph) -> float:
    region = list(region)
    _check_region(graph, region)
    stabs = {g.center: g.pauli for g in graph_stabilizers(graph)}
    total = 0.0
    current = PauliString()
    gray_prev = 0
    # Gray-code walk: each step multiplies in or out a single generator
    for k in range(2 ** len(region)):
        gray = k ^ (k >> 1)
        flipped = gray ^ gray_prev
        if flipped:
            current = current * stabs[region[flipped.bit_length() - 1]]
        gray_prev = gray
        total += tableau.pauli_expectation(current) if current.weight else 1.0
    return total / 2 ** len(region)


def dense_projector_value(state: StateVector, region: Iterable[int], graph: Graph) -> float:
    """``<prod_i (1 + S_i)/2>`` by applying each projector to the amplitudes."""
    stabs = {g.center: g.pauli for g in graph_stabilizers(graph)}
    work = state.copy()
    for i in sorted(region):
        try:
            work.amps = 0.5 * (work.amps + work._apply_pauli_vec(stabs[i]))
        except IndexError:
            raise InvariantViolation(f"stabilizer of site {i} reaches outside the simulated sites") from None
    return float(np.vdot(work.amps, work.amps).real)


# ---------------------------------------------------------------------------
# ensemble-level observables


class _ProjectorObservable:
    names = ("p",)

    def __init__(self, region: Sequence[int], graph: Graph) -> None:
        self.region, self.graph = list(region), graph

    def __call__(self, state, rng):
        return (_projector_value(state, self.region, self.graph),)


class _ReportObservable:
    names = ("p_a", "p_b", "bound", "exact")

    def __init__(self, m_a: Sequence[int], m_b: Sequence[int], interior: Sequence[int], graph: Graph) -> None:
        self.m_a, self.m_b, self.interior, self.graph = list(m_a), list(m_b), list(interior), graph

    def __call__(self, state, rng):
        pa = _projector_value(state, self.m_a, self.graph) if self.m_a else 1.0
        pb = _projector_value(state, self.m_b, self.graph) if self.m_b else 1.0
        exact = dense_projector_value(state, self.interior, self.graph)
        return pa, pb, pa + pb - 1, exact


class _OverlapObservable:
    names = ("overlap",)

    def __init__(self, graph: Graph) -> None:
        self.graph = graph
        self._ref: StateVector | None = None

    def __call__(self, state, rng):
        if self._ref is None or self._ref.labels != state.labels:
            zero = set(state.labels) - self.graph.vertices
            self._ref = ideal_graph_state(self.graph, zero, cap=max(state.n, 1)).permuted(state.labels)
        return (state.fidelity_to(self._ref),)


class _StabilizerObservable:
    def __init__(self, sites: Sequence[int], graph: Graph) -> None:
        stabs = {g.center: g.pauli for g in graph_stabilizers(graph)}
        self.sites = list(sites)
        self.paulis = [stabs[s] for s in self.sites]
        self.names = tuple(f"S{s}" for s in self.sites)

    def __call__(self, state, rng):
        try:
            return [state.pauli_expectation(p) for p in self.paulis]
        except IndexError:
            raise InvariantViolation("stabilizer reaches outside the simulated sites") from None


def _as_ensemble(target):
    from .noise import StateEnsemble

    if isinstance(target, StateVector):
        return StateEnsemble([target])
    return target


def projector_expectation_exact(target, region: Iterable[int], graph: Graph) -> tuple[float, float]:
    """Mean and standard error of ``<P_M>`` over a state, tableau or ensemble."""
    region = sorted(region)
    if isinstance(target, Tableau):
        return _tableau_projector(target, region, graph), 0.0
    _check_region(graph, region)
    stats = evaluate_ensemble(_as_ensemble(target), [_ProjectorObservable(region, graph)])
    mean, se = stats.get("p")
    return mean, (0.0 if math.isnan(se) else se)


def projector_expectation_sampled(
    target, region: Iterable[int], graph: Graph, shots: int
) -> tuple[float, float]:
    """Shot estimate of ``<P_M>`` from single-site X/Z outcomes.

    Shots are spread over the trajectories as evenly as possible; each shot
    contributes the indicator that every ``S_i`` (``i`` in M) read +1.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    region = sorted(region)
    _check_region(graph, region)
    ensemble = _as_ensemble(target)
    n = len(ensemble)
    hits = 0
    for t in range(min(n, shots)):
        q = shots // n + (1 if t < shots % n else 0)
        state, rng = ensemble.trajectory(t)
        masks = _syndrome_masks(state, region, graph)
        probs = _setting_probabilities(state, region)
        probs = probs / probs.sum()
        outcomes = rng.choice(probs.size, size=q, p=probs)
        hits += int(np.count_nonzero(_syndromes(outcomes.astype(np.int64), masks) == 0))
    mean = hits / shots
    se = math.sqrt(mean * (1 - mean) / (shots - 1)) if shots > 1 else float("nan")
    return mean, se


def fidelity_bound(p_a: float, p_b: float) -> float:
    for p in (p_a, p_b):
        if not (-1e-12 <= p <= 1 + 1e-12):
            raise ValueError(f"projector expectation {p} outside [0, 1]")
    return p_a + p_b - 1


def gme_check(bound: float) -> bool:
    return bound > GME_THRESHOLD


def exact_graph_fidelity(target, graph: Graph) -> tuple[float, float]:
    """Mean overlap with the ideal graph state (|0> on any extra simulated sites)."""
    stats = evaluate_ensemble(_as_ensemble(target), [_OverlapObservable(graph)])
    mean, se = stats.get("overlap")
    return mean, (0.0 if math.isnan(se) else se)


# ---------------------------------------------------------------------------
# reports


@dataclass
class FidelityReport:
    p_a: float
    p_a_se: float
    p_b: float
    p_b_se: float
    bound: float
    bound_se: float
    exact_fidelity: float | None = None
    exact_se: float | None = None
    gme: bool = False
    trajectories: int = 1
    region_a: int = 0
    region_b: int = 0
    sampled_p_a: float | None = None
    sampled_p_a_se: float | None = None
    sampled_p_b: float | None = None
    sampled_p_b_se: float | None = None
    shots: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _clean_se(x: float) -> float:
    return 0.0 if math.isnan(x) else float(x)


def report_from_stats(stats: EnsembleStats, m_a: int, m_b: int) -> FidelityReport:
    pa, pa_se = stats.get("p_a")
    pb, pb_se = stats.get("p_b")
    bound, bound_se = stats.get("bound")
    exact, exact_se = stats.get("exact")
    return FidelityReport(
        p_a=pa,
        p_a_se=_clean_se(pa_se),
        p_b=pb,
        p_b_se=_clean_se(pb_se),
        bound=bound,
        bound_se=_clean_se(bound_se),
        exact_fidelity=exact,
        exact_se=_clean_se(exact_se),
        gme=gme_check(bound),
        trajectories=stats.n,
        region_a=m_a,
        region_b=m_b,
    )


def _check_local_region(region: LocalRegion, graph: Graph) -> None:
    expected = LocalRegion.around(graph, region.interior).border
    if expected != region.border:
        raise InvariantViolation("region border is not the neighbour closure of its interior")


def local_fidelity(
    target,
    region: LocalRegion,
    graph: Graph,
    bp: Bipartition,
    shots: int | None = None,
) -> FidelityReport:
    """Bound and exact ``<P_interior>`` restricted to a region.

    Only interior and border sites enter the measured observables.
    """
    _check_local_region(region, graph)
    m_a = sorted(region.interior & bp.a)
    m_b = sorted(region.interior & bp.b)
    obs = _ReportObservable(m_a, m_b, sorted(region.interior), graph)
    stats = evaluate_ensemble(_as_ensemble(target), [obs])
    report = report_from_stats(stats, len(m_a), len(m_b))
    if shots:
        report.shots = shots
        if m_a:
            report.sampled_p_a, report.sampled_p_a_se = projector_expectation_sampled(target, m_a, graph, shots)
        if m_b:
            report.sampled_p_b, report.sampled_p_b_se = projector_expectation_sampled(target, m_b, graph, shots)
    return report


def global_report(target, graph: Graph, bp: Bipartition, shots: int | None = None) -> FidelityReport:
    return local_fidelity(target, LocalRegion(graph.vertices, frozenset()), graph, bp, shots)


@dataclass
class WitnessMap:
    edges: list[tuple[int, int]]
    values: list[float]
    errors: list[float]

    def rows(self) -> list[tuple[int, int, float, float]]:
        return list(zip((e[0] for e in self.edges), (e[1] for e in self.edges), self.values, self.errors))


def pairwise_witness(target, edge: tuple[int, int], graph: Graph) -> tuple[float, float]:
    return witness_map(target, [edge], graph).rows()[0][2:]


def witness_map(target, edges: Iterable[tuple[int, int]], graph: Graph) -> WitnessMap:
    """``w_ij = <S_i> + <S_j> - 1`` per edge, with per-trajectory standard errors."""
    edges = sorted((min(e), max(e)) for e in edges)
    for u, v in edges:
        if not graph.has_edge(u, v):
            raise InvariantViolation(f"({u}, {v}) is not a graph edge")
    sites = sorted({s for e in edges for s in e})
    if not sites:
        return WitnessMap([], [], [])
    stats = evaluate_ensemble(_as_ensemble(target), [_StabilizerObservable(sites, graph)])
    values, errors = [], []
    for u, v in edges:
        w = stats.column(f"S{u}") + stats.column(f"S{v}") - 1
        values.append(float(w.mean()))
        errors.append(float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0)
    return WitnessMap(edges, values, errors)


# ---------------------------------------------------------------------------
# unit blocks


def _find_cube(graph: Graph, order: Sequence[int]) -> frozenset[int] | None:
    """First 3-cube subgraph found, scanning corner vertices in ``order``."""
    nb = graph.neighbors
    for v in order:
        for a, b, c in combinations(sorted(nb(v)), 3):
            for d_ab in sorted((nb(a) & nb(b)) - {v}):
                for d_ac in sorted((nb(a) & nb(c)) - {v, d_ab}):
                    for d_bc in sorted((nb(b) & nb(c)) - {v, d_ab, d_ac}):
                        far = (nb(d_ab) & nb(d_ac) & nb(d_bc)) - {a, b, c}
                        for e in sorted(far):
                            cube = {v, a, b, c, d_ab, d_ac, d_bc, e}
                            if len(cube) == 8:
                                return frozenset(cube)
    return None


def _center_order(lattice: Lattice, sites: Iterable[int]) -> list[int]:
    cx, cy = (lattice.lx - 1) / 2 + 0.25, (lattice.ly - 1) / 2 + 0.25

    def key(i):
        x, y = lattice.position(i)
        return ((float(x) - cx) ** 2 + (float(y) - cy) ** 2, i)

    return sorted(sites, key=key)


def default_block(lattice: Lattice, scheme: str, graph: Graph | None = None) -> LocalRegion:
    """Unit block for scheme "i" (one cube) or "ii" (a star and a plaquette).

    ``graph`` is the verified graph (for scheme ii the pre-measurement graph);
    it is tracked from the canonical sequence when omitted.
    """
    from .lattice import scheme_i_sequence, scheme_ii_sequence

    if scheme == "i":
        graph = graph or track_sequence(lattice, scheme_i_sequence())
        cube = _find_cube(graph, _center_order(lattice, graph.vertices))
        if cube is None:
            raise InvariantViolation(f"no cubic cell in the scheme (i) graph on {lattice!r}")
        return LocalRegion.around(graph, cube)
    if scheme == "ii":
        graph = graph or track_sequence(lattice, scheme_ii_sequence().without_measurements())
        stars = [i for i in lattice.sites_of(Species.RED) if lattice.row(i) % 2 == 0]
        for star in _center_order(lattice, stars):
            s = lattice.sites[star]
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                fx, fy = s.ix + dx, s.iy + dy
                if not (0 <= fx < lattice.lx and 0 <= fy < lattice.ly):
                    continue
                face = lattice.index(Species.RED, fx, fy)
                if face not in graph.vertices:
                    continue
                blues = set(graph.neighbors(face)) | _diagonal_blues(lattice, star)
                return LocalRegion.around(graph, ({face} | blues) & graph.vertices)
        raise InvariantViolation(f"no star/plaquette pair in the scheme (ii) graph on {lattice!r}")
    raise ValueError(f"unknown scheme {scheme!r}")


def _diagonal_blues(lattice: Lattice, red: int) -> set[int]:
    x, y = lattice.position(red)
    out = set()
    for dx in (-0.5, 0.5):
        for dy in (-0.5, 0.5):
            j = lattice.site_at(x + type(x)(dx), y + type(y)(dy))
            if j is not None:
                out.add(j)
    return out


def block_sites(lattice: Lattice, sequence: ConstructionSequence, region: LocalRegion) -> list[int]:
    """Sites to simulate for exact statistics on the region interior.

    Interior, border, and every site that shares an executed CZ with an
    interior site.  Gates not touching the interior cancel out of all
    interior observables, so dropping the rest of the lattice is exact.
    """
    keep = set(region.sites)
    for op in sequence.ops:
        if isinstance(op, GlobalCZ):
            for a, b in lattice.cz_pairs(op):
                if a in region.interior:
                    keep.add(b)
                if b in region.interior:
                    keep.add(a)
    return sorted(keep)


def block_edges(graph: Graph, region: LocalRegion) -> list[tuple[int, int]]:
    return sorted(e for e in graph.edges if e[0] in region.interior and e[1] in region.interior)


# ---------------------------------------------------------------------------
# emission

CSV_FIELDS = ("theta_prime", "p_a", "p_b", "bound", "exact", "p_a_se", "p_b_se", "bound_se", "exact_se")


def report_csv_row(theta_prime: float, report: FidelityReport) -> list[str]:
    vals = (
        theta_prime,
        report.p_a,
        report.p_b,
        report.bound,
        report.exact_fidelity,
        report.p_a_se,
        report.p_b_se,
        report.bound_se,
        report.exact_se,
    )
    return [repr(float(v)) if v is not None else "" for v in vals]


def reports_to_csv(rows: Iterable[tuple[float, FidelityReport]], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for theta, rep in rows:
        writer.writerow(report_csv_row(theta, rep))
    return buf.getvalue()

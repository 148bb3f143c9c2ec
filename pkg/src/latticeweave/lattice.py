"""Two-species lattice geometry and the global-operation vocabulary.

Geometry
--------
Two interpenetrating square sublattices with unit lattice constant.  The Red
(Li) site with sublattice indices ``(ix, iy)`` sits at position ``(ix, iy)``;
the Blue (Cs) site with the same indices sits at ``(ix + 1/2, iy + 1/2)``.
Site ``i`` is enumerated Red block first, then Blue block, each row-major
(``iy`` outer, ``ix`` inner), so ``n = 2 * Lx * Ly``.

Nearest Red-Blue pairs are separated by the four diagonals ``(+-1/2, +-1/2)``.
The lattice *row* of a site is ``k = x + y`` (an integer for both species): rows
are the lines along which Red and Blue alternate, which is the axis of the
period-doubled Raman standing wave driving the row-selective Hadamard.  The
lattice *column* is ``2 x``; columns alternate between the species.

Sequence text format
--------------------
One directive per line, ``#`` starts a comment::

    init <species> <even|odd> <zero|plus>
    hadamard <species> <even|odd>
    cz <species> <dx> <dy>
    measure_x <species>

``species`` is ``red``/``blue`` (aliases ``li``/``cs``).  Displacements are
decimal half-integers (``0.5``, ``-1.5``, ``1``).  Unassigned init entries
default to ``plus``.  :func:`format_sequence` emits the canonical form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

from .errors import InvariantViolation, SequenceError


class Species(enum.Enum):
    RED = "red"
    BLUE = "blue"

    @property
    def other(self) -> "Species":
        return Species.BLUE if self is Species.RED else Species.RED


_SPECIES_ALIASES = {
    "red": Species.RED,
    "li": Species.RED,
    "blue": Species.BLUE,
    "cs": Species.BLUE,
}


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"

    @classmethod
    def of(cls, k: int) -> "Parity":
        return cls.EVEN if k % 2 == 0 else cls.ODD


class InitState(enum.Enum):
    ZERO = "zero"
    PLUS = "plus"


class BipartitionMode(enum.Enum):
    BY_COLUMNS = "columns"
    BY_SPECIES = "species"


@dataclass(frozen=True)
class Site:
    species: Species
    ix: int
    iy: int


class Lattice:
    """Open-boundary two-species lattice with ``Lx x Ly`` sites per species."""

    boundary = "open"

    def __init__(self, lx: int, ly: int) -> None:
        if int(lx) != lx or int(ly) != ly or lx < 1 or ly < 1:
            raise ValueError(f"lattice extents must be positive integers, got {lx}x{ly}")
        self.lx = int(lx)
        self.ly = int(ly)
        sites = []
        for species in (Species.RED, Species.BLUE):
            for iy in range(self.ly):
                for ix in range(self.lx):
                    sites.append(Site(species, ix, iy))
        self.sites: tuple[Site, ...] = tuple(sites)
        self._index = {s: i for i, s in enumerate(self.sites)}
        # doubled coordinates keep lookups in integers
        self._by_pos2 = {self.position2(i): i for i in range(len(self.sites))}

    def __repr__(self) -> str:
        return f"Lattice({self.lx}, {self.ly})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lattice) and (self.lx, self.ly) == (other.lx, other.ly)

    def __hash__(self) -> int:
        return hash((Lattice, self.lx, self.ly))

    @property
    def n(self) -> int:
        return len(self.sites)

    def index(self, species: Species, ix: int, iy: int) -> int:
        try:
            return self._index[Site(species, ix, iy)]
        except KeyError:
            raise IndexError(f"no {species.value} site ({ix}, {iy}) in {self!r}") from None

    def species(self, i: int) -> Species:
        return self.sites[i].species

    def position2(self, i: int) -> tuple[int, int]:
        """Doubled position ``(2x, 2y)``."""
        s = self.sites[i]
        off = 1 if s.species is Species.BLUE else 0
        return 2 * s.ix + off, 2 * s.iy + off

    def position(self, i: int) -> tuple[Fraction, Fraction]:
        x2, y2 = self.position2(i)
        return Fraction(x2, 2), Fraction(y2, 2)

    def row(self, i: int) -> int:
        x2, y2 = self.position2(i)
        return (x2 + y2) // 2

    def column(self, i: int) -> int:
        return self.position2(i)[0]

    def row_parity(self, i: int) -> Parity:
        return Parity.of(self.row(i))

    def site_at(self, x: Fraction, y: Fraction) -> int | None:
        x2, y2 = 2 * Fraction(x), 2 * Fraction(y)
        if x2.denominator != 1 or y2.denominator != 1:
            return None
        return self._by_pos2.get((int(x2), int(y2)))

    def sites_of(self, species: Species) -> range:
        half = self.lx * self.ly
        return range(0, half) if species is Species.RED else range(half, 2 * half)

    def cz_pairs(self, op: "GlobalCZ") -> list[tuple[int, int]]:
        """(source, target) pairs of a global CZ; pairs leaving the lattice are skipped."""
        dx2, dy2 = int(2 * op.dx), int(2 * op.dy)
        pairs = []
        for i in self.sites_of(op.source):
            x2, y2 = self.position2(i)
            j = self._by_pos2.get((x2 + dx2, y2 + dy2))
            if j is not None:
                pairs.append((i, j))
        return pairs

    def hadamard_targets(self, op: "RowHadamard") -> list[int]:
        return [i for i in self.sites_of(op.species) if self.row_parity(i) is op.parity]

    def measure_targets(self, op: "GlobalMeasureX") -> list[int]:
        return list(self.sites_of(op.species))

    def init_state(self, i: int, init: "InitPattern") -> InitState:
        return init.state(self.species(i), self.row_parity(i))


def build_lattice(lx: int, ly: int) -> Lattice:
    return Lattice(lx, ly)


# ---------------------------------------------------------------------------
# global operations


def _half_integer(value, what: str) -> Fraction:
    try:
        f = Fraction(value)
    except (TypeError, ValueError):
        raise SequenceError(f"{what} {value!r} is not a number") from None
    if (2 * f).denominator != 1:
        raise SequenceError(f"{what} {value} is not a half-integer")
    return f


@dataclass(frozen=True)
class RowHadamard:
    """Hadamard on every site of ``species`` whose row has the given parity."""

    species: Species
    parity: Parity


@dataclass(frozen=True)
class GlobalCZ:
    """CZ between every ``source`` site and the other-species site at ``+ (dx, dy)``."""

    source: Species
    dx: Fraction
    dy: Fraction

    def __post_init__(self) -> None:
        dx = _half_integer(self.dx, "displacement")
        dy = _half_integer(self.dy, "displacement")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)
        odd_x, odd_y = (2 * dx) % 2 == 1, (2 * dy) % 2 == 1
        if odd_x != odd_y:
            raise SequenceError(f"displacement ({dx}, {dy}) maps onto no lattice site")
        if not odd_x:
            raise SequenceError(f"displacement ({dx}, {dy}) maps within one species")


@dataclass(frozen=True)
class GlobalMeasureX:
    species: Species


GlobalOp = Union[RowHadamard, GlobalCZ, GlobalMeasureX]

_INIT_KEYS = tuple((s, p) for s in Species for p in Parity)


@dataclass(frozen=True)
class InitPattern:
    """Initial product state per (species, row parity)."""

    assignment: tuple[tuple[Species, Parity, InitState], ...] = ()

    def __post_init__(self) -> None:
        given = {}
        for species, parity, state in self.assignment:
            given[(species, parity)] = InitState(state)
        full = tuple((s, p, given.get((s, p), InitState.PLUS)) for s, p in _INIT_KEYS)
        object.__setattr__(self, "assignment", full)

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[Species, Parity], InitState]) -> "InitPattern":
        return cls(tuple((s, p, st) for (s, p), st in mapping.items()))

    def state(self, species: Species, parity: Parity) -> InitState:
        for s, p, st in self.assignment:
            if s is species and p is parity:
                return st
        raise KeyError((species, parity))


@dataclass(frozen=True)
class ConstructionSequence:
    init: InitPattern = field(default_factory=InitPattern)
    ops: tuple[GlobalOp, ...] = ()

    def __post_init__(self) -> None:
        ops = tuple(self.ops)
        object.__setattr__(self, "ops", ops)
        measured = False
        for op in ops:
            if isinstance(op, GlobalMeasureX):
                measured = True
            elif isinstance(op, GlobalCZ) and measured:
                raise SequenceError("measure_x must follow every cz operation")
            elif not isinstance(op, (RowHadamard, GlobalCZ, GlobalMeasureX)):
                raise SequenceError(f"unknown operation {op!r}")

    @property
    def cz_count(self) -> int:
        return sum(isinstance(op, GlobalCZ) for op in self.ops)

    def without_measurements(self) -> "ConstructionSequence":
        return ConstructionSequence(self.init, tuple(op for op in self.ops if not isinstance(op, GlobalMeasureX)))

    def prefix(self, k: int) -> "ConstructionSequence":
        return ConstructionSequence(self.init, self.ops[:k])


# ---------------------------------------------------------------------------
# canonical sequences

_H = Fraction(1, 2)
ALONG_ROW = (_H, -_H)  # stays on the row, column index +1


def scheme_i_sequence(lattice: Lattice | None = None) -> ConstructionSequence:
    """Bilayer cubic cluster: 7 global CZ and one interleaved row Hadamard.

    The first patterned Hadamard is folded into the init pattern (Red even
    rows start in |0>).  Two along-row CZs build 1D chains on the odd rows,
    the row Hadamard releases the Red even-row sites, a repeated along-row CZ
    cancels half of the chain bonds into dimers, and four more CZs stitch the
    dimers into the two layers.
    """
    init = InitPattern(((Species.RED, Parity.EVEN, InitState.ZERO),))
    red = Species.RED
    ops = (
        GlobalCZ(red, _H, -_H),
        GlobalCZ(red, -_H, _H),
        RowHadamard(red, Parity.EVEN),
        GlobalCZ(red, _H, -_H),
        GlobalCZ(red, _H, _H),
        GlobalCZ(red, -_H, -_H),
        GlobalCZ(red, 3 * _H, -_H),
        GlobalCZ(red, -3 * _H, _H),
    )
    return ConstructionSequence(init, ops)


def scheme_ii_sequence(lattice: Lattice | None = None) -> ConstructionSequence:
    """Surface code: four diagonal CZ then X measurement of every Red site.

    Red even-row sites (the star centres) start in |0>, so each Blue site
    couples only to the two plaquette-centre Red sites flanking it.
    """
    init = InitPattern(((Species.RED, Parity.EVEN, InitState.ZERO),))
    red = Species.RED
    ops = (
        GlobalCZ(red, _H, _H),
        GlobalCZ(red, _H, -_H),
        GlobalCZ(red, -_H, _H),
        GlobalCZ(red, -_H, -_H),
        GlobalMeasureX(red),
    )
    return ConstructionSequence(init, ops)


# ---------------------------------------------------------------------------
# text format


def _fmt_half(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    return f"{float(f):.1f}"


def format_sequence(seq: ConstructionSequence) -> str:
    lines = []
    for species, parity, state in seq.init.assignment:
        lines.append(f"init {species.value} {parity.value} {state.value}")
    for op in seq.ops:
        if isinstance(op, RowHadamard):
            lines.append(f"hadamard {op.species.value} {op.parity.value}")
        elif isinstance(op, GlobalCZ):
            lines.append(f"cz {op.source.value} {_fmt_half(op.dx)} {_fmt_half(op.dy)}")
        else:
            lines.append(f"measure_x {op.species.value}")
    return "\n".join(lines) + "\n"


def _token(table: Mapping[str, object], tok: str, what: str, line: int):
    try:
        return table[tok.lower()]
    except KeyError:
        raise SequenceError(f"unknown {what} {tok!r}", line) from None


_PARITIES = {"even": Parity.EVEN, "odd": Parity.ODD}
_STATES = {"zero": InitState.ZERO, "plus": InitState.PLUS}
_ARITY = {"init": 3, "hadamard": 2, "cz": 3, "measure_x": 1}


def iter_directives(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield lineno, body.split()


def is_directive(words: list[str]) -> bool:
    return bool(words) and words[0].lower() in _ARITY


def parse_sequence(text: str) -> ConstructionSequence:
    init: dict[tuple[Species, Parity], InitState] = {}
    ops: list[GlobalOp] = []
    for lineno, words in iter_directives(text):
        head, args = words[0].lower(), words[1:]
        if head not in _ARITY:
            raise SequenceError(f"unknown directive {words[0]!r}", lineno)
        if len(args) != _ARITY[head]:
            raise SequenceError(f"{head} takes {_ARITY[head]} arguments, got {len(args)}", lineno)
        species = _token(_SPECIES_ALIASES, args[0], "species", lineno)
        try:
            if head == "init":
                if ops:
                    raise SequenceError("init must precede all operations", lineno)
                key = (species, _token(_PARITIES, args[1], "parity", lineno))
                if key in init:
                    raise SequenceError(f"duplicate init for {args[0]} {args[1]}", lineno)
                init[key] = _token(_STATES, args[2], "state", lineno)
            elif head == "hadamard":
                ops.append(RowHadamard(species, _token(_PARITIES, args[1], "parity", lineno)))
            elif head == "cz":
                ops.append(GlobalCZ(species, args[1], args[2]))
            else:
                ops.append(GlobalMeasureX(species))
            ConstructionSequence(InitPattern(), tuple(ops))
        except SequenceError as exc:
            if exc.line is not None:
                raise
            raise SequenceError(str(exc), lineno) from None
    return ConstructionSequence(InitPattern.from_mapping(init), tuple(ops))


# ---------------------------------------------------------------------------
# regions and bipartitions


@dataclass(frozen=True)
class LocalRegion:
    interior: frozenset[int]
    border: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "interior", frozenset(self.interior))
        object.__setattr__(self, "border", frozenset(self.border))
        if self.interior & self.border:
            raise InvariantViolation("region interior and border overlap")

    @classmethod
    def around(cls, graph, interior: Iterable[int]) -> "LocalRegion":
        interior = frozenset(interior)
        missing = interior - set(graph.vertices)
        if missing:
            raise InvariantViolation(f"region sites {sorted(missing)} are not graph vertices")
        border = set()
        for v in interior:
            border |= graph.neighbors(v)
        return cls(interior, frozenset(border - interior))

    @property
    def sites(self) -> frozenset[int]:
        return self.interior | self.border


@dataclass(frozen=True)
class Bipartition:
    a: frozenset[int]
    b: frozenset[int]
    mode: BipartitionMode

    def side(self, v: int) -> str:
        return "a" if v in self.a else "b"


def bipartition(lattice: Lattice, graph, mode: BipartitionMode | str) -> Bipartition:
    """Split the graph vertices by lattice column parity or by species."""
    mode = BipartitionMode(mode)
    outside = set(graph.vertices) - set(range(lattice.n))
    if outside:
        raise InvariantViolation(f"graph vertices {sorted(outside)[:5]} are not lattice sites")
    if mode is BipartitionMode.BY_COLUMNS:
        in_a = lambda v: lattice.column(v) % 2 == 0  # noqa: E731
    else:
        in_a = lambda v: lattice.species(v) is Species.RED  # noqa: E731
    a = frozenset(v for v in graph.vertices if in_a(v))
    b = frozenset(graph.vertices) - a
    for u, v in graph.edges:
        if (u in a) == (v in a):
            raise InvariantViolation(
                f"graph is not bipartite under {mode.value}: edge ({u}, {v}) stays on one side"
            )
    return Bipartition(a, b, mode)

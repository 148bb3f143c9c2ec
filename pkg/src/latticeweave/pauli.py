"""Sparse Pauli strings with an ``i^k`` phase.

Y is the Hermitian Pauli; in the binary picture it is ``x = z = 1``.
"""

from __future__ import annotations

from typing import Iterable, Mapping

_LETTERS = "IXYZ"
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_FROM_BITS = {v: k for k, v in _BITS.items()}

# single-site product table: (a, b) -> (phase exponent, letter)
_MUL = {}
for _a in _LETTERS:
    for _b in _LETTERS:
        if _a == "I":
            _MUL[_a, _b] = (0, _b)
        elif _b == "I":
            _MUL[_a, _b] = (0, _a)
        elif _a == _b:
            _MUL[_a, _b] = (0, "I")
        else:
            third = ({"X", "Y", "Z"} - {_a, _b}).pop()
            cyclic = (_a + _b) in ("XY", "YZ", "ZX")
            _MUL[_a, _b] = (1 if cyclic else 3, third)

_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}


class PauliString:
    """Tensor product of single-site Paulis times ``i**phase``.

    >>> (PauliString({0: "X"}) * PauliString({0: "Z"})).phase
    3
    """

    __slots__ = ("ops", "phase")

    def __init__(self, ops: Mapping[int, str] | None = None, phase: int = 0) -> None:
        clean = {}
        for site, letter in (ops or {}).items():
            letter = letter.upper()
            if letter not in _BITS:
                raise ValueError(f"unknown Pauli letter {letter!r}")
            if int(site) < 0:
                raise ValueError(f"negative site {site}")
            if letter != "I":
                clean[int(site)] = letter
        self.ops: dict[int, str] = dict(sorted(clean.items()))
        self.phase = int(phase) % 4

    @classmethod
    def from_letters(cls, word: str, phase: int = 0) -> "PauliString":
        """``"XIZ"`` puts X on site 0 and Z on site 2."""
        return cls(dict(enumerate(word)), phase)

    @classmethod
    def single(cls, site: int, letter: str) -> "PauliString":
        return cls({site: letter})

    @classmethod
    def from_bits(cls, xs: Iterable[int], zs: Iterable[int], phase: int = 0) -> "PauliString":
        ops = {i: _FROM_BITS[(int(x), int(z))] for i, (x, z) in enumerate(zip(xs, zs))}
        return cls(ops, phase)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.ops)

    @property
    def weight(self) -> int:
        return len(self.ops)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ValueError("non-Hermitian Pauli string has no real sign")
        return 1 if self.phase == 0 else -1

    def is_identity(self) -> bool:
        return not self.ops

    def letters(self, n: int) -> str:
        return "".join(self.ops.get(i, "I") for i in range(n))

    def bits(self, n: int) -> tuple[list[int], list[int]]:
        xs, zs = [0] * n, [0] * n
        for i, letter in self.ops.items():
            if i >= n:
                raise IndexError(f"site {i} outside {n} qubits")
            xs[i], zs[i] = _BITS[letter]
        return xs, zs

    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        phase = self.phase + other.phase
        ops = dict(self.ops)
        for site, b in other.ops.items():
            k, c = _MUL[ops.get(site, "I"), b]
            phase += k
            ops[site] = c
        return PauliString(ops, phase)

    def __neg__(self) -> "PauliString":
        return PauliString(self.ops, self.phase + 2)

    def commutes_with(self, other: "PauliString") -> bool:
        anti = 0
        for site, a in self.ops.items():
            b = other.ops.get(site)
            if b is not None and b != a:
                anti ^= 1
        return anti == 0

    def restricted(self, sites: Iterable[int]) -> "PauliString":
        keep = set(sites)
        return PauliString({i: p for i, p in self.ops.items() if i in keep}, self.phase)

    def relabeled(self, mapping: Mapping[int, int]) -> "PauliString":
        return PauliString({mapping[i]: p for i, p in self.ops.items()}, self.phase)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PauliString) and self.ops == other.ops and self.phase == other.phase

    def __hash__(self) -> int:
        return hash((tuple(self.ops.items()), self.phase))

    def __repr__(self) -> str:
        body = " ".join(f"{p}{i}" for i, p in self.ops.items()) or "I"
        return f"PauliString({_PHASE_TEXT[self.phase]}{body})"


def product(paulis: Iterable[PauliString]) -> PauliString:
    out = PauliString()
    for p in paulis:
        out = out * p
    return out

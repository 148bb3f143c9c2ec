"""Bit-packed stabilizer tableau.

Layout: ``x[q]`` and ``z[q]`` are uint64 word arrays packed over the ``2n``
generator rows, so the Pauli content of qubit ``q`` across all rows is one
contiguous word array.  Rows ``0..n-1`` are destabilizers, rows ``n..2n-1``
stabilizers; ``r`` holds the packed sign bits.  Gates touch only the columns
of their qubits, and a layer of disjoint gates is one vectorized update.

A row with bits ``(x, z) = (1, 1)`` on a qubit means Y (Hermitian form).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantViolation, LatticeWeaveError
from .lattice import (
    ConstructionSequence,
    GlobalCZ,
    GlobalMeasureX,
    InitPattern,
    InitState,
    Lattice,
    RowHadamard,
)
from .pauli import PauliString

_ONE = np.uint64(1)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


def _words(nbits: int) -> int:
    return (nbits + 63) // 64


def _bit_mask(nwords: int, rows: Iterable[int]) -> np.ndarray:
    m = np.zeros(nwords, dtype=np.uint64)
    for r in rows:
        m[r >> 6] |= _ONE << np.uint64(r & 63)
    return m


def _range_mask(nwords: int, lo: int, hi: int) -> np.ndarray:
    bits = np.zeros(nwords * 64, dtype=np.uint8)
    bits[lo:hi] = 1
    return _pack(bits)


def _unpack(words: np.ndarray) -> np.ndarray:
    """uint64 words (..., W) -> bits (..., 64 W), bit r of the row space at index r."""
    return np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=-1, bitorder="little")


def _pack(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits.astype(np.uint8), bitorder="little").view(np.uint64)


def _first_bit(words: np.ndarray) -> int:
    nz = np.flatnonzero(words)
    if nz.size == 0:
        return -1
    w = int(nz[0])
    word = int(words[w])
    return 64 * w + ((word & -word).bit_length() - 1)


class _PackedRows:
    """Rows of Pauli operators stored column-packed, with row multiplication."""

    def __init__(self, n: int, nrows: int) -> None:
        self.n = n
        self.nrows = nrows
        self.nwords = _words(nrows)
        self.x = np.zeros((n, self.nwords), dtype=np.uint64)
        self.z = np.zeros((n, self.nwords), dtype=np.uint64)
        self.r = np.zeros(self.nwords, dtype=np.uint64)

    def _check_site(self, q: int) -> int:
        if not 0 <= q < self.n:
            raise IndexError(f"site {q} out of range for {self.n} qubits")
        return int(q)

    def _get_bit(self, words: np.ndarray, row: int) -> np.ndarray:
        return (words[..., row >> 6] >> np.uint64(row & 63)) & _ONE

    def row_bits(self, row: int) -> tuple[np.ndarray, np.ndarray, int]:
        xs = self._get_bit(self.x, row).astype(np.uint8)
        zs = self._get_bit(self.z, row).astype(np.uint8)
        return xs, zs, int(self._get_bit(self.r, row))

    def row_pauli(self, row: int) -> PauliString:
        xs, zs, s = self.row_bits(row)
        support = np.flatnonzero(xs | zs)
        letters = {int(q): "IXZY"[int(xs[q]) + 2 * int(zs[q])] for q in support}
        return PauliString(letters, 2 * s)

    def _set_row(self, row: int, p: PauliString) -> None:
        w, b = row >> 6, np.uint64(row & 63)
        clear = ~(_ONE << b)
        self.x[:, w] &= clear
        self.z[:, w] &= clear
        self.r[w] &= clear
        for q, letter in p.ops.items():
            self._check_site(q)
            if letter in "XY":
                self.x[q, w] |= _ONE << b
            if letter in "ZY":
                self.z[q, w] |= _ONE << b
        if p.sign < 0:
            self.r[w] |= _ONE << b

    def _copy_row(self, src: int, dst: int) -> None:
        sw, sb = src >> 6, np.uint64(src & 63)
        dw, db = dst >> 6, np.uint64(dst & 63)
        clear = ~(_ONE << db)
        for arr in (self.x, self.z):
            bits = (arr[..., sw] >> sb) & _ONE
            arr[..., dw] = (arr[..., dw] & clear) | (bits << db)
        bit = (self.r[sw] >> sb) & _ONE
        self.r[dw] = (self.r[dw] & clear) | (bit << db)

    def _rowmul(self, mask: np.ndarray, p: int) -> None:
        """Every row in ``mask`` becomes ``row_p * row`` (left multiplication)."""
        if not mask.any():
            return
        px = self._get_bit(self.x, p)
        pz = self._get_bit(self.z, p)
        qs = np.flatnonzero(px | pz)
        if qs.size:
            a = np.where(px[qs] == 1, _ALL, np.uint64(0))[:, None]
            b = np.where(pz[qs] == 1, _ALL, np.uint64(0))[:, None]
            c = self.x[qs]
            d = self.z[qs]
            plus = (a & ~b & c & d) | (a & b & ~c & d) | (~a & b & c & ~d)
            minus = (a & ~b & ~c & d) | (a & b & c & ~d) | (~a & b & c & d)
            counts = _unpack(plus & mask).sum(axis=0, dtype=np.int64) - _unpack(minus & mask).sum(
                axis=0, dtype=np.int64
            )
            self.x[qs] = c ^ (a & mask)
            self.z[qs] = d ^ (b & mask)
        else:
            counts = 0
        rbits = _unpack(self.r).astype(np.int64)
        e = (2 * rbits[p] + 2 * rbits + counts) % 4
        mbits = _unpack(mask).astype(bool)
        rbits[mbits] = (e[mbits] >> 1) & 1
        self.r = _pack(rbits)

    def _anticommute_mask(self, p: PauliString) -> np.ndarray:
        anti = np.zeros(self.nwords, dtype=np.uint64)
        for q, letter in p.ops.items():
            self._check_site(q)
            if letter == "X":
                anti ^= self.z[q]
            elif letter == "Z":
                anti ^= self.x[q]
            else:
                anti ^= self.x[q] ^ self.z[q]
        return anti

    def _rref(self, rowmask: np.ndarray) -> list[int]:
        """Reduce the rows in ``rowmask`` in place; returns pivot rows in column order."""
        used = np.zeros(self.nwords, dtype=np.uint64)
        pivots = []
        for block in (self.x, self.z):
            for q in range(self.n):
                col = block[q] & rowmask
                cand = col & ~used
                p = _first_bit(cand)
                if p < 0:
                    continue
                pbit = _bit_mask(self.nwords, [p])
                used |= pbit
                pivots.append(p)
                self._rowmul(col & ~pbit, p)
        return pivots


@dataclass(frozen=True)
class MeasurementEntry:
    site: int | None
    pauli: PauliString
    outcome: int
    deterministic: bool


@dataclass
class MeasurementRecord:
    entries: list[MeasurementEntry] = field(default_factory=list)

    def outcomes(self) -> dict[int, int]:
        return {e.site: e.outcome for e in self.entries if e.site is not None}

    def __len__(self) -> int:
        return len(self.entries)


class Tableau(_PackedRows):
    """Stabilizer state on ``n`` qubits (destabilizers plus stabilizers)."""

    def __init__(self, n: int) -> None:
        if n < 0:
            raise ValueError("qubit count must be non-negative")
        super().__init__(n, 2 * n)
        # |0...0>: destabilizer i = X_i, stabilizer i = Z_i
        for q in range(n):
            self.x[q, q >> 6] |= _ONE << np.uint64(q & 63)
            s = n + q
            self.z[q, s >> 6] |= _ONE << np.uint64(s & 63)
        self._stabmask = _range_mask(self.nwords, n, 2 * n)

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n, t.nrows, t.nwords = self.n, self.nrows, self.nwords
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        t._stabmask = self._stabmask
        return t

    # -- gates ---------------------------------------------------------------

    def _sites(self, sites) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(sites, dtype=np.int64))
        if arr.size and (arr.min() < 0 or arr.max() >= self.n):
            raise IndexError(f"site out of range for {self.n} qubits")
        return arr

    def apply_h(self, sites) -> None:
        q = self._sites(sites)
        x, z = self.x[q], self.z[q]
        self.r ^= np.bitwise_xor.reduce(x & z, axis=0) if q.size else 0
        self.x[q], self.z[q] = z, x

    def apply_s(self, sites) -> None:
        q = self._sites(sites)
        x, z = self.x[q], self.z[q]
        self.r ^= np.bitwise_xor.reduce(x & z, axis=0) if q.size else 0
        self.z[q] = z ^ x

    def apply_cz(self, a, b) -> None:
        """CZ on pairs ``(a[k], b[k])``; all sites of one call must be distinct."""
        qa, qb = self._sites(a), self._sites(b)
        if qa.shape != qb.shape:
            raise ValueError("mismatched CZ endpoint lists")
        if not qa.size:
            return
        if len(np.unique(np.concatenate([qa, qb]))) != 2 * qa.size:
            raise ValueError("CZ endpoints must be distinct")
        xa, xb, za, zb = self.x[qa], self.x[qb], self.z[qa], self.z[qb]
        self.r ^= np.bitwise_xor.reduce(xa & xb & (za ^ zb), axis=0)
        self.z[qa] = za ^ xb
        self.z[qb] = zb ^ xa

    def apply_pauli(self, p: PauliString) -> None:
        self.r ^= self._anticommute_mask(p)

    # -- queries -------------------------------------------------------------

    def stabilizers(self) -> list[PauliString]:
        return [self.row_pauli(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row_pauli(i) for i in range(self.n)]

    def _product_of_stabilizers(self, destab_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Dense product of stabilizer rows n+i for destabilizer bits i in the mask."""
        x = np.zeros(self.n, dtype=np.uint8)
        z = np.zeros(self.n, dtype=np.uint8)
        e = 0
        for i in np.flatnonzero(_unpack(destab_mask)[: self.n]):
            rx, rz, rs = self.row_bits(self.n + int(i))
            plus =(x & (1 - z) & rx & rz) | (x & z & (1 - rx) & rz) | ((1 - x) & z & rx & (1 - rz))
            minus = (x & (1 - z) & (1 - rx) & rz) | (x & z & rx & (1 - rz)) | ((1 - x) & z & rx & rz)
            e += 2 * rs + int(plus.sum()) - int(minus.sum())
            x ^= rx
            z ^= rz
        return x, z, e % 4

    def _check_hermitian(self, p: PauliString) -> None:
        if not p.is_hermitian:
            raise ValueError("Pauli operator has an imaginary phase")

    def pauli_expectation(self, p: PauliString) -> int:
        self._check_hermitian(p)
        anti = self._anticommute_mask(p)
        if (anti & self._stabmask).any():
            return 0
        _, _, e = self._product_of_stabilizers(anti)
        return p.sign * (1 if e == 0 else -1)

    def measure_pauli(
        self, p: PauliString, rng: np.random.Generator | None = None, force: int | None = None
    ) -> tuple[int, bool]:
        """Measure a Hermitian Pauli; returns (outcome, deterministic).

        ``force`` post-selects an outcome; forcing a zero-probability outcome
        raises :class:`InvariantViolation`.
        """
        self._check_hermitian(p)
        if p.is_identity():
            raise ValueError("cannot measure the identity")
        anti = self._anticommute_mask(p)
        stab_anti = anti & self._stabmask
        if not stab_anti.any():
            _, _, e = self._product_of_stabilizers(anti)
            outcome = p.sign * (1 if e == 0 else -1)
            if force is not None and force != outcome:
                raise InvariantViolation(f"post-selected outcome {force} has zero probability")
            return outcome, True
        pivot = _first_bit(stab_anti)
        others = anti & ~_bit_mask(self.nwords, [pivot])
        self._rowmul(others, pivot)
        self._copy_row(pivot, pivot - self.n)
        if force is not None:
            outcome = int(force)
        else:
            if rng is None:
                raise ValueError("random measurement outcome needs an rng or a forced outcome")
            outcome = 1 - 2 * int(rng.integers(2))
        self._set_row(pivot, p if outcome == 1 else -p)
        return outcome, False

    def canonical_form(self) -> list[PauliString]:
        return canonical_form(self)

    def check_symplectic(self) -> bool:
        """O(n^2) consistency check of the destabilizer/stabilizer basis."""
        n = self.n
        xb = _unpack(self.x)[:, : 2 * n].astype(np.int64)
        zb = _unpack(self.z)[:, : 2 * n].astype(np.int64)
        omega = (xb.T @ zb + zb.T @ xb) % 2
        want = np.zeros((2 * n, 2 * n), dtype=np.int64)
        want[np.arange(n), np.arange(n) + n] = 1
        want[np.arange(n) + n, np.arange(n)] = 1
        return bool(np.array_equal(omega, want))


def init_tableau(lattice: Lattice, init: InitPattern) -> Tableau:
    t = Tableau(lattice.n)
    plus = [i for i in range(lattice.n) if lattice.init_state(i, init) is InitState.PLUS]
    if plus:
        t.apply_h(plus)
    return t


def canonical_form(tableau: Tableau) -> list[PauliString]:
    """Unique reduced generator list of the stabilizer group, signs included.

    Gaussian elimination over GF(2) with the X block ordered before the Z
    block; each pivot column then holds exactly one set bit.
    """
    work = tableau.copy()
    pivots = work._rref(work._stabmask)
    return [work.row_pauli(p) for p in pivots]


def canonical_generators(generators: Sequence[PauliString], n: int) -> list[PauliString]:
    """Canonical form of the group generated by an arbitrary generator list."""
    rows = _PackedRows(n, len(generators))
    for i, g in enumerate(generators):
        if not g.is_hermitian:
            raise ValueError("generators must be Hermitian")
        rows._set_row(i, g)
    pivots = rows._rref(_range_mask(rows.nwords, 0, len(generators)))
    return [rows.row_pauli(p) for p in pivots]


def stabilizer_groups_equal(t1: Tableau, t2: Tableau) -> bool:
    if t1.n != t2.n:
        raise ValueError(f"tableau sizes differ: {t1.n} vs {t2.n}")
    return canonical_form(t1) == canonical_form(t2)


def format_canonical(rows: Sequence[PauliString], n: int) -> str:
    """One line per generator: sign then dense Pauli word."""
    return "".join(f"{'+' if p.sign > 0 else '-'}{p.letters(n)}\n" for p in rows)


def run_sequence_clifford(
    lattice: Lattice,
    sequence: ConstructionSequence,
    rng: np.random.Generator | None = None,
    policy: str = "record",
) -> tuple[Tableau, MeasurementRecord]:
    """Execute a sequence on a fresh tableau.

    ``policy`` is ``"record"`` (random outcomes drawn from ``rng``) or
    ``"force-plus"`` (post-select every measurement on +1).
    """
    if policy not in ("record", "force-plus"):
        raise ValueError(f"unknown post-selection policy {policy!r}")
    if policy == "record" and rng is None:
        rng = np.random.default_rng(0)
    t = init_tableau(lattice, sequence.init)
    record = MeasurementRecord()
    for op in sequence.ops:
        if isinstance(op, GlobalCZ):
            pairs = lattice.cz_pairs(op)
            if pairs:
                a, b = zip(*pairs)
                t.apply_cz(a, b)
        elif isinstance(op, RowHadamard):
            t.apply_h(lattice.hadamard_targets(op))
        elif isinstance(op, GlobalMeasureX):
            for q in lattice.measure_targets(op):
                p = PauliString.single(q, "X")
                outcome, det = t.measure_pauli(p, rng, 1 if policy == "force-plus" else None)
                record.entries.append(MeasurementEntry(q, p, outcome, det))
        else:  # pragma: no cover - ConstructionSequence validates op types
            raise LatticeWeaveError(f"unknown operation {op!r}")
    return t, record

"""Dense statevector backend.

Amplitude index bit ``k`` is the qubit at local position ``k`` (position 0 is
least significant).  A state carries ``labels``, the lattice sites held at each
position, and every public method addresses qubits by label.

Angle conventions: ``apply_z_rotation(t)`` is ``exp(-i t Z)`` with the full
angle, and ``apply_zz_phase(t)`` is ``exp(+i t Z Z)``.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import InvariantViolation, ResourceCapExceeded
from .pauli import PauliString

DEFAULT_CAP = 22

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def check_unitary(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not np.allclose(u @ u.conj().T, np.eye(2), atol=tol):
        raise ValueError("not a 2x2 unitary")
    return u


def hadamard() -> np.ndarray:
    return _H.copy()


def pseudo_hadamard(k: int) -> np.ndarray:
    """Row-``k`` pulse action ``(-i)^k H^(k-1)``: H on even rows, a phase on odd rows.

    ``k = 0`` is accepted (``H^-1 = H``) so that row 0 of a lattice is covered.
    """
    k = int(k)
    if k < 0:
        raise ValueError("row index must be non-negative")
    phase = (-1j) ** (k % 4)
    return phase * (np.eye(2, dtype=complex) if k % 2 == 1 else _H)


def rotation(axis: str, theta: float) -> np.ndarray:
    """``exp(-i theta sigma/2)``."""
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * _PAULI[axis]


def pulse_pseudo_hadamard(k: int) -> np.ndarray:
    """Diagnostic pulse product ``R_z(pi/4) R_y(k pi) R_z(pi/4)``.

    Kept separate from :func:`pseudo_hadamard` because the two differ
    (for ``k = 1`` this is ``-iY`` up to phase, not a multiple of the identity).
    """
    return rotation("Z", np.pi / 4) @ rotation("Y", k * np.pi) @ rotation("Z", np.pi / 4)


@lru_cache(maxsize=8)
def _basis_index(size: int) -> np.ndarray:
    idx = np.arange(size, dtype=np.int64)
    idx.flags.writeable = False
    return idx


class StateVector:
    def __init__(self, amplitudes: np.ndarray, labels: Sequence[int] | None = None, cap: int = DEFAULT_CAP) -> None:
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        n = int(round(np.log2(amps.size))) if amps.size else -1
        if n < 0 or 2**n != amps.size:
            raise ValueError("amplitude count must be a power of two")
        if n > cap:
            raise ResourceCapExceeded(f"{n} qubits exceeds the statevector cap of {cap}")
        labels = tuple(range(n)) if labels is None else tuple(int(s) for s in labels)
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("need one distinct label per qubit")
        self.amps = amps.copy()
        self.labels = labels
        self.n = n
        self._pos = {s: k for k, s in enumerate(labels)}

    @classmethod
    def zeros(cls, labels: Sequence[int] | int, cap: int = DEFAULT_CAP) -> "StateVector":
        labels = list(range(labels)) if isinstance(labels, int) else list(labels)
        if len(labels) > cap:
            raise ResourceCapExceeded(f"{len(labels)} qubits exceeds the statevector cap of {cap}")
        amps = np.zeros(2 ** len(labels), dtype=complex)
        amps[0] = 1
        return cls(amps, labels, cap)

    @classmethod
    def product(cls, labels: Sequence[int], plus: Iterable[int], cap: int = DEFAULT_CAP) -> "StateVector":
        """|+> on the labels in ``plus``, |0> elsewhere."""
        s = cls.zeros(labels, cap)
        plus = set(plus)
        zero_mask = sum(1 << k for k, q in enumerate(s.labels) if q not in plus)
        k = sum(q in plus for q in s.labels)
        s.amps = np.where((_basis_index(s.amps.size) & zero_mask) == 0, 2.0 ** (-k / 2), 0.0).astype(complex)
        return s

    def copy(self) -> "StateVector":
        out = StateVector.__new__(StateVector)
        out.amps, out.labels, out.n, out._pos = self.amps.copy(), self.labels, self.n, self._pos
        return out

    def pos(self, site: int) -> int:
        try:
            return self._pos[site]
        except KeyError:
            raise IndexError(f"site {site} is not held by this state") from None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    # -- gates ---------------------------------------------------------------

    def _split(self, k: int) -> np.ndarray:
        return self.amps.reshape(2 ** (self.n - k - 1), 2, 2**k)

    def _pair_view(self, a: int, b: int) -> np.ndarray:
        lo, hi = sorted((self.pos(a), self.pos(b)))
        if lo == hi:
            raise ValueError("two-qubit gate needs distinct sites")
        return self.amps.reshape(2 ** (self.n - hi - 1), 2, 2 ** (hi - lo - 1), 2, 2**lo)

    def apply_1q(self, u: np.ndarray, site: int) -> None:
        v = self._split(self.pos(site))
        v0 = v[:, 0, :].copy()
        v1 = v[:, 1, :]
        if u[1, 0] == 0 and u[0, 1] == 0:
            v[:, 0, :] *= u[0, 0]
            v1 *= u[1, 1]
            return
        v[:, 0, :] = u[0, 0] * v0 + u[0, 1] * v1
        v[:, 1, :] = u[1, 0] * v0 + u[1, 1] * v1

    def apply_cz(self, a: int, b: int) -> None:
        self._pair_view(a, b)[:, 1, :, 1, :] *= -1

    def apply_zz_phase(self, theta: float, a: int, b: int) -> None:
        v = self._pair_view(a, b)
        self.amps *= np.exp(-1j * theta)
        ratio = np.exp(2j * theta)
        v[:, 0, :, 0, :] *= ratio
        v[:, 1, :, 1, :] *= ratio

    def apply_z_rotation(self, theta: float, site: int) -> None:
        v = self._split(self.pos(site))
        v[:, 0, :] *= np.exp(-1j * theta)
        v[:, 1, :] *= np.exp(1j * theta)

    def apply_pauli(self, p: PauliString) -> None:
        self.amps = self._apply_pauli_vec(p)

    # -- Pauli action --------------------------------------------------------

    def _masks(self, p: PauliString) -> tuple[int, int, int]:
        xm = zm = ny = 0
        for site, letter in p.ops.items():
            bit = 1 << self.pos(site)
            if letter in "XY":
                xm |= bit
            if letter in "ZY":
                zm |= bit
            ny += letter == "Y"
        return xm, zm, ny

    def _apply_pauli_vec(self, p: PauliString) -> np.ndarray:
        # Y = i X Z, so P = i^(phase + #Y) X^x Z^z
        xm, zm, ny = self._masks(p)
        idx = _basis_index(self.amps.size)
        signs = 1 - 2 * (np.bitwise_count(idx & zm) & 1).astype(np.int8)
        out = np.empty_like(self.amps)
        out[idx ^ xm] = signs * self.amps
        return out * (1j ** ((p.phase + ny) % 4))

    def pauli_expectation(self, p: PauliString) -> float:
        if not p.is_hermitian:
            raise ValueError("Pauli operator has an imaginary phase")
        return float(np.vdot(self.amps, self._apply_pauli_vec(p)).real)

    def measure_pauli(
        self, p: PauliString, rng: np.random.Generator | None = None, postselect: int | None = None
    ) -> int:
        """Born-rule measurement; collapses the state in place and returns +-1."""
        if not p.is_hermitian:
            raise ValueError("Pauli operator has an imaginary phase")
        pv = self._apply_pauli_vec(p)
        ev = float(np.vdot(self.amps, pv).real)
        p_plus = min(max((1 + ev) / 2, 0.0), 1.0)
        if postselect is not None:
            outcome = int(postselect)
        else:
            if rng is None:
                raise ValueError("random measurement needs an rng or a post-selected outcome")
            outcome = 1 if rng.random() < p_plus else -1
        prob = p_plus if outcome == 1 else 1 - p_plus
        if prob < 1e-12:
            raise InvariantViolation(f"post-selected outcome {outcome} has zero probability")
        self.amps = (self.amps + outcome * pv) / (2 * np.sqrt(prob))
        return outcome

    def fidelity_to(self, reference: "StateVector") -> float:
        if reference.n != self.n:
            raise ValueError(f"state sizes differ: {self.n} vs {reference.n}")
        if reference.labels != self.labels:
            reference = reference.permuted(self.labels)
        return float(abs(np.vdot(reference.amps, self.amps)) ** 2)

    def permuted(self, labels: Sequence[int]) -> "StateVector":
        """Same state with qubits reordered to ``labels``."""
        labels = tuple(labels)
        if sorted(labels) != sorted(self.labels):
            raise ValueError("label sets differ")
        # axis j of the C-order tensor holds position n-1-j
        tensor = self.amps.reshape((2,) * self.n)
        src_axes = [self.n - 1 - self.pos(s) for s in reversed(labels)]
        amps = np.transpose(tensor, src_axes).ravel()
        out = StateVector.__new__(StateVector)
        out.amps, out.labels, out.n = amps, labels, self.n
        out._pos = {s: k for k, s in enumerate(labels)}
        return out

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def dump(self, fh: BinaryIO) -> None:
        fh.write(struct.pack("<I", self.n))
        fh.write(self.amps.astype("<c16").tobytes())

    @classmethod
    def load(cls, fh: BinaryIO, labels: Sequence[int] | None = None) -> "StateVector":
        (n,) = struct.unpack("<I", fh.read(4))
        amps = np.frombuffer(fh.read(16 * 2**n), dtype="<c16")
        return cls(amps, labels, cap=max(n, DEFAULT_CAP))


def ideal_graph_state(graph, zero_sites: Iterable[int] = (), cap: int = DEFAULT_CAP) -> StateVector:
    """|+> on graph vertices with CZ on every edge; optional |0> spectators appended."""
    labels = graph.sorted_vertices() + sorted(set(zero_sites) - graph.vertices)
    if len(labels) > cap:
        raise ResourceCapExceeded(f"{len(labels)} qubits exceeds the statevector cap of {cap}")
    s = StateVector.product(labels, graph.vertices, cap)
    for a, b in graph.sorted_edges():
        s.apply_cz(a, b)
    return s

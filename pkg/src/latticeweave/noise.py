"""Random-unitary error channels and the Monte Carlo trajectory driver.

Dephasing applies ``exp(-i theta Z)`` to a site; the Ising error replaces an
ideal CZ by ``CZ exp(i theta Z Z)``.  Each ``theta`` is drawn uniformly from
``[-theta', theta']``.  Averaging pure trajectories reproduces the channel
exactly in expectation, so no density matrices are stored.

Trajectory ``t`` draws from ``SeedSequence(master_seed, spawn_key=(t, 0))``
for noise angles and ``spawn_key=(t, 1)`` for measurement and shot sampling,
so its randomness depends only on ``(master_seed, t)``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np

from .errors import ResourceCapExceeded
from .lattice import (
    ConstructionSequence,
    GlobalCZ,
    GlobalMeasureX,
    InitState,
    Lattice,
    Parity,
    RowHadamard,
)
from .pauli import PauliString
from .statevector import DEFAULT_CAP, StateVector, pseudo_hadamard

WORKERS_ENV = "LATTICEWEAVE_WORKERS"


class NoiseKind(enum.Enum):
    NONE = "none"
    DEPHASING = "dephasing"
    ISING_CZ = "ising"


class Insertion(enum.Enum):
    AFTER_INIT = "after-init"
    PER_CZ_GATE = "per-cz"


@dataclass(frozen=True)
class NoiseModel:
    """Error channel with half-width ``theta_prime``.

    ``site_overrides`` replaces ``theta_prime`` on chosen sites (dephasing) or
    on gates touching them (Ising); used to plant localized defects.
    """

    kind: NoiseKind = NoiseKind.NONE
    theta_prime: float = 0.0
    insertion: Insertion | None = None
    shared_theta: bool = False
    site_overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not math.isfinite(self.theta_prime) or self.theta_prime < 0:
            raise ValueError(f"theta' must be finite and non-negative, got {self.theta_prime}")
        if kind is NoiseKind.ISING_CZ:
            insertion = Insertion.PER_CZ_GATE
        elif self.insertion is None:
            insertion = Insertion.AFTER_INIT
        else:
            insertion = Insertion(self.insertion)
        object.__setattr__(self, "insertion", insertion)
        overrides = tuple(sorted((int(s), float(t)) for s, t in dict(self.site_overrides).items()))
        for _, t in overrides:
            if not math.isfinite(t) or t < 0:
                raise ValueError("override angles must be finite and non-negative")
        object.__setattr__(self, "site_overrides", overrides)

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def dephasing(cls, theta_prime: float, **kw) -> "NoiseModel":
        return cls(NoiseKind.DEPHASING, theta_prime, **kw)

    @classmethod
    def ising(cls, theta_prime: float, **kw) -> "NoiseModel":
        return cls(NoiseKind.ISING_CZ, theta_prime, **kw)

    def width(self, *sites: int) -> float:
        over = dict(self.site_overrides)
        widths = [over[s] for s in sites if s in over]
        return max(widths) if widths else self.theta_prime

    @property
    def is_noiseless(self) -> bool:
        return self.kind is NoiseKind.NONE or (self.theta_prime == 0 and not any(t for _, t in self.site_overrides))


@dataclass(frozen=True)
class TrajectoryPlan:
    trajectories: int
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must fit in 64 bits")

    def noise_rng(self, t: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=(t, 0)))

    def sample_rng(self, t: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=(t, 1)))


@dataclass
class EnsembleStats:
    names: tuple[str, ...]
    values: np.ndarray  # (trajectories, observables)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        if self.n < 2:
            return np.full(len(self.names), np.nan)
        return self.values.std(axis=0, ddof=1)

    @property
    def se(self) -> np.ndarray:
        return self.std / math.sqrt(self.n)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def get(self, name: str) -> tuple[float, float]:
        """(mean, standard error) of one observable."""
        k = self.names.index(name)
        return float(self.mean[k]), float(self.se[k])


class Observable(Protocol):
    names: tuple[str, ...]

    def __call__(self, state: StateVector, rng: np.random.Generator) -> Sequence[float]: ...


@dataclass(frozen=True)
class PauliObservable:
    pauli: PauliString
    name: str = "pauli"

    @property
    def names(self) -> tuple[str, ...]:
        return (self.name,)

    def __call__(self, state: StateVector, rng: np.random.Generator) -> Sequence[float]:
        return (state.pauli_expectation(self.pauli),)


# ---------------------------------------------------------------------------
# channels


def apply_dephasing(state: StateVector, site: int, theta: float) -> StateVector:
    state.apply_z_rotation(theta, site)
    return state


def noisy_cz(state: StateVector, a: int, b: int, theta: float) -> StateVector:
    if a == b:
        raise ValueError("CZ needs two distinct sites")
    state.apply_cz(a, b)
    state.apply_zz_phase(theta, a, b)
    return state


def ising_cz(state: StateVector, a: int, b: int) -> StateVector:
    """CZ realised as the Ising gate ``exp(-i pi/4 ZZ)`` dressed by ``exp(i pi/4 Z)`` on both sites.

    Equals ``exp(i pi/4) CZ``; the global phase is unobservable.
    """
    state.apply_zz_phase(-np.pi / 4, a, b)
    state.apply_z_rotation(-np.pi / 4, a)
    state.apply_z_rotation(-np.pi / 4, b)
    return state


class _Angles:
    def __init__(self, noise: NoiseModel, rng: np.random.Generator) -> None:
        self.noise = noise
        self.rng = rng
        self.shared = rng.uniform(-1.0, 1.0) if noise.shared_theta else None

    def draw(self, *sites: int) -> float:
        # one uniform on [-1, 1] per draw, scaled by the local width
        u = self.shared if self.shared is not None else self.rng.uniform(-1.0, 1.0)
        return u * self.noise.width(*sites)


def simulate_trajectory(
    lattice: Lattice,
    sequence: ConstructionSequence,
    noise: NoiseModel,
    rng: np.random.Generator,
    sites: Iterable[int] | None = None,
    measure_rng: np.random.Generator | None = None,
    postselect: int | None = None,
    gate_form: str = "cz",
    cap: int = DEFAULT_CAP,
) -> tuple[StateVector, dict[int, int]]:
    """One noisy run of ``sequence`` on the sites in ``sites`` (default: all).

    Gates with an endpoint outside ``sites`` are dropped.  Returns the final
    state and the X-measurement outcomes.
    """
    held = sorted(set(range(lattice.n) if sites is None else sites))
    if len(held) > cap:
        raise ResourceCapExceeded(f"{len(held)} qubits exceeds the statevector cap of {cap}")
    if gate_form not in ("cz", "ising"):
        raise ValueError(f"unknown gate form {gate_form!r}")
    inside = set(held)
    plus = [i for i in held if lattice.init_state(i, sequence.init) is InitState.PLUS]
    state = StateVector.product(held, plus, cap)
    angles = _Angles(noise, rng)
    kind = noise.kind if not noise.is_noiseless else NoiseKind.NONE
    if kind is NoiseKind.DEPHASING and noise.insertion is Insertion.AFTER_INIT:
        for i in held:
            state.apply_z_rotation(angles.draw(i), i)
    outcomes: dict[int, int] = {}
    for op in sequence.ops:
        if isinstance(op, GlobalCZ):
            for a, b in lattice.cz_pairs(op):
                if a not in inside or b not in inside:
                    continue
                if gate_form == "ising":
                    ising_cz(state, a, b)
                else:
                    state.apply_cz(a, b)
                if kind is NoiseKind.ISING_CZ:
                    state.apply_zz_phase(angles.draw(a, b), a, b)
                elif kind is NoiseKind.DEPHASING and noise.insertion is Insertion.PER_CZ_GATE:
                    state.apply_z_rotation(angles.draw(a), a)
                    state.apply_z_rotation(angles.draw(b), b)
        elif isinstance(op, RowHadamard):
            shift = 1 if op.parity is Parity.ODD else 0
            for i in lattice.sites_of(op.species):
                if i in inside:
                    state.apply_1q(pseudo_hadamard(lattice.row(i) + shift), i)
        elif isinstance(op, GlobalMeasureX):
            for i in lattice.measure_targets(op):
                if i in inside:
                    outcomes[i] = state.measure_pauli(PauliString.single(i, "X"), measure_rng, postselect)
    return state, outcomes


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class SimulatedEnsemble:
    """Lazily simulated trajectory ensemble; states are regenerated on demand."""

    lattice: Lattice
    sequence: ConstructionSequence
    noise: NoiseModel
    plan: TrajectoryPlan
    sites: tuple[int, ...] | None = None
    gate_form: str = "cz"
    postselect: int | None = 1
    cap: int = DEFAULT_CAP

    def __len__(self) -> int:
        return self.plan.trajectories

    @property
    def deterministic(self) -> bool:
        return self.noise.is_noiseless and not any(isinstance(op, GlobalMeasureX) for op in self.sequence.ops)

    def trajectory(self, t: int) -> tuple[StateVector, np.random.Generator]:
        sample = self.plan.sample_rng(t)
        state, _ = simulate_trajectory(
            self.lattice,
            self.sequence,
            self.noise,
            self.plan.noise_rng(t),
            self.sites,
            measure_rng=sample,
            postselect=self.postselect,
            gate_form=self.gate_form,
            cap=self.cap,
        )
        return state, sample

    def iter_states(self) -> Iterator[tuple[int, StateVector, np.random.Generator]]:
        for t in range(len(self)):
            state, sample = self.trajectory(t)
            yield t, state, sample


@dataclass
class StateEnsemble:
    """Explicit list of equally weighted pure states."""

    states: list[StateVector]
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.states:
            raise ValueError("empty ensemble")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def deterministic(self) -> bool:
        return len(self.states) == 1

    def trajectory(self, t: int) -> tuple[StateVector, np.random.Generator]:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(t, 1)))
        return self.states[t], rng

    def iter_states(self) -> Iterator[tuple[int, StateVector, np.random.Generator]]:
        for t in range(len(self)):
            state, rng = self.trajectory(t)
            yield t, state, rng


def _names(observables: Sequence[Observable]) -> tuple[str, ...]:
    return tuple(name for obs in observables for name in obs.names)


def _evaluate(ensemble, observables: Sequence[Observable], ts: range) -> np.ndarray:
    rows = []
    for t in ts:
        state, rng = ensemble.trajectory(t)
        row = []
        for obs in observables:
            row.extend(float(v) for v in obs(state, rng))
        rows.append(row)
    return np.asarray(rows, dtype=float).reshape(len(ts), -1)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def evaluate_ensemble(ensemble, observables: Sequence[Observable], workers: int | None = None) -> EnsembleStats:
    """Per-trajectory observable values, reduced in trajectory order."""
    if not observables:
        raise ValueError("no observables requested")
    names = _names(observables)
    n = len(ensemble)
    workers = worker_count() if workers is None else workers
    if getattr(ensemble, "deterministic", False):
        # every trajectory is the same state; evaluate once
        values = np.repeat(_evaluate(ensemble, observables, range(1)), n, axis=0)
    elif workers <= 1 or n < 2 * workers:
        values = _evaluate(ensemble, observables, range(n))
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        chunks = [range(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate, [ensemble] * len(chunks), [observables] * len(chunks), chunks))
        values = np.concatenate(parts, axis=0)
    return EnsembleStats(names, values)


def run_monte_carlo(
    lattice: Lattice,
    sequence: ConstructionSequence,
    noise_model: NoiseModel,
    plan: TrajectoryPlan,
    observables: Sequence[Observable],
    sites: Iterable[int] | None = None,
    workers: int | None = None,
    **kw,
) -> EnsembleStats:
    ensemble = SimulatedEnsemble(
        lattice, sequence, noise_model, plan, None if sites is None else tuple(sorted(set(sites))), **kw
    )
    return evaluate_ensemble(ensemble, observables, workers)

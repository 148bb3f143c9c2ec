import numpy as np
import pytest

from latticeweave.errors import ResourceCapExceeded
from latticeweave.graph_model import track_sequence
from latticeweave.lattice import Species, build_lattice, scheme_i_sequence, scheme_ii_sequence
from latticeweave.noise import (
    Insertion,
    NoiseKind,
    NoiseModel,
    PauliObservable,
    StateEnsemble,
    TrajectoryPlan,
    evaluate_ensemble,
    ising_cz,
    noisy_cz,
    run_monte_carlo,
    simulate_trajectory,
    worker_count,
)
from latticeweave.pauli import PauliString
from latticeweave.statevector import StateVector, ideal_graph_state

from oracles import cz_matrix


def test_ising_gate_is_cz_up_to_global_phase():
    rng = np.random.default_rng(0)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    s = StateVector(v.copy())
    ising_cz(s, 0, 1)
    assert np.allclose(s.amps, np.exp(1j * np.pi / 4) * (cz_matrix(0, 1, 2) @ v))


def test_noisy_cz_adds_zz_phase():
    s = StateVector.product([0, 1], [0, 1])
    noisy_cz(s, 0, 1, 0.0)
    assert np.allclose(s.amps, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValueError):
        noisy_cz(s, 1, 1, 0.1)


def test_model_validation():
    assert NoiseModel.ising(0.1).insertion is Insertion.PER_CZ_GATE
    assert NoiseModel.dephasing(0.1).insertion is Insertion.AFTER_INIT
    assert NoiseModel.dephasing(0.0).is_noiseless
    assert not NoiseModel.dephasing(0.0, site_overrides={3: 0.2}).is_noiseless
    assert NoiseModel("dephasing", 0.2).kind is NoiseKind.DEPHASING
    for bad in (-0.1, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            NoiseModel.dephasing(bad)
    with pytest.raises(ValueError):
        TrajectoryPlan(0)
    with pytest.raises(ValueError):
        TrajectoryPlan(1, -1)


def test_overrides_widen_chosen_sites():
    m = NoiseModel.dephasing(0.1, site_overrides={2: 0.7})
    assert m.width(1) == 0.1
    assert m.width(2) == 0.7
    assert m.width(1, 2) == 0.7


@pytest.mark.parametrize("theta_prime", [0.2, np.pi / 5])
def test_dephasing_average_matches_sinc(theta_prime):
    lat = build_lattice(1, 1)
    trials = 3000
    stats = run_monte_carlo(
        lat,
        scheme_ii_sequence().without_measurements().prefix(0),
        NoiseModel.dephasing(theta_prime),
        TrajectoryPlan(trials, 9),
        [PauliObservable(PauliString({1: "X"}), "x")],
    )
    mean, se = stats.get("x")
    want = np.sin(2 * theta_prime) / (2 * theta_prime)
    assert abs(mean - want) < 4 * se


def test_trajectories_are_reproducible_and_independent():
    lat = build_lattice(2, 2)
    seq = scheme_i_sequence()
    plan = TrajectoryPlan(3, 42)
    noise = NoiseModel.dephasing(0.3)
    a, _ = simulate_trajectory(lat, seq, noise, plan.noise_rng(1))
    b, _ = simulate_trajectory(lat, seq, noise, plan.noise_rng(1))
    c, _ = simulate_trajectory(lat, seq, noise, plan.noise_rng(2))
    assert np.array_equal(a.amps, b.amps)
    assert not np.allclose(a.amps, c.amps)
    assert TrajectoryPlan(3, 43).noise_rng(1).random() != plan.noise_rng(1).random()


def test_worker_count_does_not_change_results(monkeypatch):
    lat = build_lattice(2, 2)
    obs = [PauliObservable(PauliString({0: "Z", 4: "X"}), "zx")]
    args = (lat, scheme_i_sequence(), NoiseModel.ising(0.4), TrajectoryPlan(8, 1), obs)
    one = run_monte_carlo(*args, workers=1)
    two = run_monte_carlo(*args, workers=2)
    assert np.array_equal(one.values, two.values)
    monkeypatch.setenv("LATTICEWEAVE_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("LATTICEWEAVE_WORKERS", "many")
    with pytest.raises(ValueError):
        worker_count()


def test_noiseless_simulation_reproduces_tracked_graph():
    lat = build_lattice(2, 2)
    seq = scheme_i_sequence()
    state, _ = simulate_trajectory(lat, seq, NoiseModel.none(), np.random.default_rng(0))
    ideal = ideal_graph_state(track_sequence(lat, seq))
    assert state.fidelity_to(ideal) == pytest.approx(1)
    ising, _ = simulate_trajectory(lat, seq, NoiseModel.none(), np.random.default_rng(0), gate_form="ising")
    assert ising.fidelity_to(ideal) == pytest.approx(1)


def test_patch_drops_outside_gates_and_reports_outcomes():
    lat = build_lattice(2, 2)
    reds = list(lat.sites_of(Species.RED))
    state, outcomes = simulate_trajectory(
        lat, scheme_ii_sequence(), NoiseModel.none(), np.random.default_rng(0), sites=reds + [4], postselect=1
    )
    assert state.labels == tuple(sorted(reds + [4]))
    assert outcomes == dict.fromkeys(reds, 1)
    with pytest.raises(ResourceCapExceeded):
        simulate_trajectory(lat, scheme_i_sequence(), NoiseModel.none(), np.random.default_rng(0), cap=6)


def test_deterministic_ensemble_is_tiled_and_stats():
    s = StateVector.product([0], [0])
    stats = evaluate_ensemble(StateEnsemble([s, s.copy()]), [PauliObservable(PauliString({0: "X"}))])
    assert stats.n == 2
    assert np.allclose(stats.mean, [1])
    assert np.allclose(stats.se, [0])
    with pytest.raises(ValueError):
        evaluate_ensemble(StateEnsemble([s]), [])

"""Tests for the evolution driver: schedules, traces, restarts, orders."""
import math

import numpy as np
import pytest

from pite_sim.analysis import diagonalize, exact_ite_state, rlb
from pite_sim.engine import NoiseModel, StateVector, run_step_circuit
from pite_sim.grouping import group_hamiltonian, ising_local_grouping, singleton_groupspec
from pite_sim.hamiltonian import (
    InitialState,
    PauliHamiltonian,
    PauliTerm,
    build_h2,
    build_ising,
    build_lih,
    prepare_initial,
)
from pite_sim.pite import (
    RunConfig,
    Schedule,
    _step_circuits,
    restart_loop,
    run_generalized,
    run_pite,
)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(dt=0.0, n_steps=5)
    with pytest.raises(ValueError):
        Schedule(dt=0.1, n_steps=0)
    with pytest.raises(ValueError):
        Schedule(dt=0.1, n_steps=5, order=3)
    sched = Schedule.from_beta(2.0, 0.05)
    assert sched.n_steps == 40
    assert sched.beta == pytest.approx(2.0)


def test_config_validation():
    with pytest.raises(ValueError, match="seed"):
        RunConfig(mode="sample")
    with pytest.raises(ValueError, match="postselect"):
        RunConfig(mode="sample", seed=1, trajectories=4)
    with pytest.raises(ValueError, match="seed"):
        RunConfig(trajectories=4)


def test_single_term_ground_state_is_fixed_point():
    # +Z has ground state |1>: energy stays -1, fidelity 1, prob0 = 1
    h = PauliHamiltonian(1, (PauliTerm.from_string(1.0, "Z"),))
    init = prepare_initial(InitialState.basis("1"), 1)
    res = run_pite(h, init, Schedule(dt=0.1, n_steps=10), RunConfig())
    energies = [r.energy for r in res.records]
    assert all(e == pytest.approx(-1.0, abs=1e-12) for e in energies)
    assert res.final.fidelity == pytest.approx(1.0, abs=1e-10)
    assert res.final.p_cum == pytest.approx(1.0, abs=1e-12)


def test_single_term_convergence_from_superposition():
    # single-term Trotter is exact: trace matches exact ITE at every record
    h = PauliHamiltonian(1, (PauliTerm.from_string(1.0, "X"),))
    init = prepare_initial(InitialState.basis("0"), 1)
    spec = diagonalize(h, init)
    res = run_pite(h, init, Schedule(dt=0.25, n_steps=20), RunConfig())
    energies = [r.energy for r in res.records]
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))
    assert res.final.energy == pytest.approx(spec.e0, abs=1e-4)
    for rec in res.records:
        exact = exact_ite_state(h, init, rec.beta)
        assert rec.fidelity == pytest.approx(spec.fidelity_to_ground(exact), abs=1e-10)


def test_h2_run_converges():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    spec = diagonalize(h, init)
    res = run_pite(h, init, Schedule.from_beta(2.0, 0.05), RunConfig(), spectrum=spec)
    assert abs(res.final.energy - spec.e0) <= 1e-4
    assert res.final.fidelity > 0.9999


def test_trace_bookkeeping_invariants():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    res = run_pite(h, init, Schedule.from_beta(1.5, 0.1), RunConfig())
    pcums = [r.p_cum for r in res.records]
    assert all(b <= a for a, b in zip(pcums, pcums[1:]))
    for rec in res.records:
        assert rec.p_cum >= rec.rlb
        assert rec.rlb == pytest.approx(rlb(h, rec.beta), rel=1e-12)
    assert res.records[0].beta == 0.0
    assert res.records[0].p_cum == 1.0


def test_ground_init_probabilities_strictly_above_floor():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    spec = diagonalize(h, init)
    res = run_pite(
        h, spec.ground_vector, Schedule(dt=0.1, n_steps=8), RunConfig(), spectrum=None
    )
    floor = math.exp(-4.0 * 0.1 * h.abs_coeff_sum)
    for prev, cur in zip(res.records, res.records[1:]):
        step_prob = cur.p_cum / prev.p_cum
        assert step_prob > floor  # equality only when a0 = 0, never here
    energies = [r.energy for r in res.records]
    # constant within first-order Trotter error at dt = 0.1
    assert max(energies) - min(energies) < 5e-4


def test_identity_offset_only_in_energy():
    base = build_h2(0.75)
    shifted = PauliHamiltonian(2, base.terms, base.identity_offset + 5.0)
    init = prepare_initial(InitialState.basis("00"), 2)
    r1 = run_pite(base, init, Schedule(dt=0.1, n_steps=5), RunConfig())
    r2 = run_pite(shifted, init, Schedule(dt=0.1, n_steps=5), RunConfig())
    for a, b in zip(r1.records, r2.records):
        assert b.energy - a.energy == pytest.approx(5.0, abs=1e-9)
        assert a.fidelity == pytest.approx(b.fidelity, abs=1e-12)
        assert a.p_cum == pytest.approx(b.p_cum, abs=1e-12)


def test_order2_sequence_is_palindrome():
    h = build_h2(0.75)
    sched = Schedule(dt=0.2, n_steps=1, order=2)
    circuits = _step_circuits(h, sched)
    assert len(circuits) == 2 * h.n_terms
    from pite_sim.engine import postselected_operator

    ops = [postselected_operator(c) for c in circuits]
    forward = np.eye(4)
    for op in ops:
        forward = op @ forward
    backward = np.eye(4)
    for op in reversed(ops):
        backward = op @ backward
    assert np.abs(forward - backward).max() < 1e-12


def test_order2_beats_order1():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    exact = exact_ite_state(h, init, 1.0)
    devs = {}
    for order in (1, 2):
        res = run_pite(h, init, Schedule.from_beta(1.0, 0.2, order=order), RunConfig())
        # state-level deviation via the energy trace is too indirect; replay
        from pite_sim.engine import StateVector as SV

        state = SV.from_work_register(init)
        for _ in range(5):
            for c in _step_circuits(h, Schedule.from_beta(1.0, 0.2, order=order)):
                run_step_circuit(state, c)
        vec = state.drop_ancilla()
        phase = np.vdot(exact, vec)
        vec = vec * np.exp(-1j * np.angle(phase))
        devs[order] = np.linalg.norm(vec - exact)
    assert devs[2] < devs[1] / 3.0


@pytest.mark.parametrize("order,expected", [(1, 2.0), (2, 4.0)])
def test_trotter_error_scaling(order, expected):
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    exact = exact_ite_state(h, init, 1.0)

    def deviation(dt: float) -> float:
        state = StateVector.from_work_register(init)
        sched = Schedule.from_beta(1.0, dt, order=order)
        circuits = _step_circuits(h, sched)
        for _ in range(sched.n_steps):
            for c in circuits:
                run_step_circuit(state, c)
        vec = state.drop_ancilla()
        phase = np.vdot(exact, vec)
        vec = vec * np.exp(-1j * np.angle(phase))
        return float(np.linalg.norm(vec - exact))

    d1, d2, d3 = deviation(0.2), deviation(0.1), deviation(0.05)
    assert d1 / d2 == pytest.approx(expected, rel=0.2)
    assert d2 / d3 == pytest.approx(expected, rel=0.2)


def test_fidelity_monotone_small_models():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    res = run_pite(h, init, Schedule.from_beta(2.0, 0.05), RunConfig())
    fids = [r.fidelity for r in res.records]
    assert all(b >= a - 1e-12 for a, b in zip(fids[1:], fids[2:]))


def test_generalized_singleton_matches_pauli():
    h = build_ising(4, 1.0, 1.2, 0.3)
    init = prepare_initial(InitialState.product(ising_params=(1.0, 1.2, 0.3)), 4)
    spec = diagonalize(h, init)
    blocks = group_hamiltonian(h, singleton_groupspec(h.n_terms))
    sched = Schedule.from_beta(1.0, 0.1)
    rp = run_pite(h, init, sched, RunConfig(), spectrum=spec)
    rg = run_generalized(h, blocks, init, sched, RunConfig(), spectrum=spec)
    for a, b in zip(rp.records, rg.records):
        assert b.energy == pytest.approx(a.energy, abs=1e-9)
        assert b.fidelity == pytest.approx(a.fidelity, abs=1e-9)
        assert b.p_cum == pytest.approx(a.p_cum, abs=1e-9)


def test_generalized_grouping_raises_success_probability():
    n, J, g, hf = 6, 1.0, 1.2, 0.3
    h = build_ising(n, J, g, hf)
    init = prepare_initial(InitialState.product(ising_params=(J, g, hf)), n)
    spec = diagonalize(h, init)
    _, blocks = ising_local_grouping(n, J, g, hf)
    sched = Schedule.from_beta(2.0, 0.1)
    rp = run_pite(h, init, sched, RunConfig(), spectrum=spec)
    rg = run_generalized(h, blocks, init, sched, RunConfig(), spectrum=spec)
    assert rg.final.p_cum > rp.final.p_cum
    # grouping barely moves the energy error (both are Trotterized results)
    exact = exact_ite_state(h, init, sched.beta)
    e_ite = float(np.real(np.vdot(exact, h.dense_matrix() @ exact)))
    assert abs(rg.final.energy - e_ite) < 0.05
    assert abs(rp.final.energy - e_ite) < 0.05
    for rec in rg.records:
        assert rec.p_cum >= rec.rlb


def test_generalized_lih_runs_to_completion():
    from pite_sim.grouping import lih_groupspec

    h = build_lih()
    init = prepare_initial(
        InitialState.superposition([(math.sqrt(0.99), "110000"), (0.1, "000011")]), 6
    )
    blocks = group_hamiltonian(h, lih_groupspec())
    assert max(len(b.support) for b in blocks) <= 6
    res = run_generalized(h, blocks, init, Schedule.from_beta(0.5, 0.1), RunConfig())
    assert res.completed
    assert res.final.energy < res.records[0].energy


def test_restart_loop_counts():
    calls = []

    def attempt(rng):
        calls.append(1)
        return ["trace"], len(calls) >= 3

    result = restart_loop(attempt, budget=10, rng=None)
    assert result.completed
    assert result.restarts == 2

    def always_fail(rng):
        return ["partial"], False

    result = restart_loop(always_fail, budget=4, rng=None)
    assert not result.completed
    assert result.restarts == 4


def test_sampled_ground_state_no_restarts():
    h = PauliHamiltonian(1, (PauliTerm.from_string(1.0, "Z"),))
    init = prepare_initial(InitialState.basis("1"), 1)
    res = run_pite(h, init, Schedule(dt=0.1, n_steps=5), RunConfig(mode="sample", seed=3))
    assert res.completed
    assert res.restarts == 0
    assert res.final.restarts == 0


def test_sampled_geometric_restarts():
    # prob0 = 1/2 per run: one measurement, expected one restart per success
    h = PauliHamiltonian(1, (PauliTerm.from_string(1.0, "Z"),))
    init = prepare_initial(InitialState.basis("0"), 1)  # fully excited
    dt = math.log(2.0) / 4.0
    restarts = []
    for seed in range(300):
        res = run_pite(
            h, init, Schedule(dt=dt, n_steps=1),
            RunConfig(mode="sample", seed=seed, restart_budget=200),
        )
        assert res.completed
        restarts.append(res.restarts)
    mean = np.mean(restarts)
    # geometric with p = 1/2: mean 1, sem ~ sqrt(2)/sqrt(300) ~ 0.082
    assert mean == pytest.approx(1.0, abs=0.3)


def test_sampled_budget_exhausted():
    h = PauliHamiltonian(1, (PauliTerm.from_string(5.0, "Z"),))
    init = prepare_initial(InitialState.basis("0"), 1)  # prob0 = e^{-4}
    res = run_pite(
        h, init, Schedule(dt=0.2, n_steps=3),
        RunConfig(mode="sample", seed=11, restart_budget=2),
    )
    assert not res.completed
    assert res.restarts == 2


def test_sampled_success_fraction_matches_postselect():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    spec = diagonalize(h, init)
    sched = Schedule.from_beta(1.0, 0.2)
    p_cum = run_pite(h, init, sched, RunConfig(), spectrum=spec).final.p_cum
    wins = 0
    n_runs = 1000
    for seed in range(n_runs):
        res = run_pite(
            h, init, sched,
            RunConfig(mode="sample", seed=seed, restart_budget=0),
            spectrum=spec,
        )
        wins += int(res.completed)
    fraction = wins / n_runs
    sigma = math.sqrt(p_cum * (1 - p_cum) / n_runs)
    assert abs(fraction - p_cum) <= 3 * sigma


def test_trajectory_mode_close_to_density():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    spec = diagonalize(h, init)
    sched = Schedule.from_beta(1.0, 0.1)
    noise = NoiseModel(5e-3, 5e-3)
    dens = run_pite(h, init, sched, RunConfig(noise=noise), spectrum=spec)
    traj = run_pite(
        h, init, sched,
        RunConfig(noise=noise, seed=21, trajectories=200),
        spectrum=spec,
    )
    assert traj.final.energy == pytest.approx(dens.final.energy, abs=0.02)
    assert traj.final.p_cum == pytest.approx(dens.final.p_cum, abs=0.05)


def test_record_cadence():
    h = build_h2(0.75)
    init = prepare_initial(InitialState.basis("00"), 2)
    res = run_pite(h, init, Schedule(dt=0.1, n_steps=10), RunConfig(record_every=4))
    assert [r.step for r in res.records] == [0, 4, 8, 10]


def test_density_limit_enforced():
    h = build_ising(12, 1.0, 0.5, 0.0)
    init = prepare_initial(InitialState.basis("0" * 12), 12)
    with pytest.raises(ValueError, match="12 qubits"):
        run_pite(
            h, init, Schedule(dt=0.1, n_steps=1),
            RunConfig(noise=NoiseModel(1e-5, 1e-5)),
        )

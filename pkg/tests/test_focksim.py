import math

import numpy as np
import pytest

from channelforge import channels, focksim, matkit, realization
from channelforge.focksim import (SinglePhotonState, effective_channel_choi, effective_kraus, evolve,
                                  monte_carlo, postselect_vacuum)
from channelforge.matkit import ContractError
from channelforge.optics import OpticalNetwork, beamsplitter, compile_kraus, network_unitary
from channelforge.realization import RealizationPlan, plan_channel


def test_evolve_beamsplitter():
    phi = 0.4
    net = OpticalNetwork(2, [beamsplitter(0, 1, math.pi / 3, phi)])
    out = evolve(net, SinglePhotonState.basis(0, 2))
    expect = [math.cos(math.pi / 3), np.exp(-1j * phi) * math.sin(math.pi / 3)]
    assert np.allclose(out.amplitudes, expect, atol=1e-15)


def test_evolve_identity_and_norm(rng):
    psi = SinglePhotonState(3, [0.6, 0.8j, 0])
    assert np.array_equal(evolve(OpticalNetwork(3), psi).amplitudes, psi.amplitudes)
    net = compile_kraus(matkit.random_unitary(3, rng) * 0.7)
    amps = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    psi = SinglePhotonState(6, amps / np.linalg.norm(amps))
    assert abs(evolve(net, psi).norm() - 1) <= 1e-10
    with pytest.raises(ContractError):
        evolve(net, SinglePhotonState.basis(0, 4))


def test_postselect_attenuation():
    theta = 0.9
    net = OpticalNetwork(4, [beamsplitter(1, 3, theta)], encoding=2)
    logical, ok = postselect_vacuum(evolve(net, SinglePhotonState.basis(1, 4)), 2)
    assert logical[1] == pytest.approx(math.cos(theta))
    assert ok == pytest.approx(math.cos(theta) ** 2)
    _, ok = postselect_vacuum(SinglePhotonState.basis(0, 4), 2)
    assert ok == 1.0


def test_postselect_compiled_damping_branch():
    A2 = np.diag([1, math.sqrt(1 - 0.36)])
    net = compile_kraus(A2)
    _, ok = postselect_vacuum(evolve(net, SinglePhotonState.basis(1, 4)), 2)
    assert ok == pytest.approx(0.64, abs=1e-12)


def test_effective_kraus_examples():
    assert np.array_equal(effective_kraus(OpticalNetwork(2)), np.eye(2))
    net = OpticalNetwork(4, [beamsplitter(0, 2, 0.3), beamsplitter(1, 3, 1.1)], encoding=2)
    assert np.allclose(effective_kraus(net), np.diag([math.cos(0.3), math.cos(1.1)]))


def test_effective_kraus_inverts_compiler(rng):
    for i in range(100):
        d = (2, 3, 4)[i % 3]
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        A /= matkit.op_norm(A)
        assert matkit.max_abs(effective_kraus(compile_kraus(A, d)) - A) <= 1e-9


def test_vacuum_exclusivity(rng):
    K = channels.random_channel(3, 3, rng)
    plan = focksim.compile_plan(plan_channel(K, restarts=2))
    for net in plan.networks:
        w = focksim.evolved_basis_weights(net)
        assert np.allclose(w.sum(axis=1), 1, atol=1e-10)


def test_effective_choi_amplitude_damping():
    K = channels.make_amplitude_damping(0.5)
    plan = plan_channel(K, restarts=2)
    J, p = effective_channel_choi(plan)
    assert p == pytest.approx(2 / 3, abs=1e-9)
    assert matkit.max_abs(J - channels.kraus_to_choi(K).matrix) <= 1e-9


def test_effective_choi_identity():
    _, p = effective_channel_choi(plan_channel(channels.make_identity(2), restarts=1))
    assert p == pytest.approx(1.0, abs=1e-12)


def test_effective_choi_random_plans(rng):
    for _ in range(10):
        K = channels.random_channel(2, 3, rng)
        plan = plan_channel(K, restarts=2)
        J, p = effective_channel_choi(plan)
        assert abs(p - plan.p_succ) <= 1e-9
        assert matkit.max_abs(J - channels.kraus_to_choi(K).matrix) <= 1e-9
        # input independence checked on every basis state
        succ = sum(w * focksim.evolved_basis_weights(net)[:, 0] for net, w in zip(plan.networks, plan.weights))
        assert np.max(np.abs(succ - plan.p_succ)) < 1e-9


def test_inconsistent_plan_is_rejected():
    # weights that ignore the operator norms break input independence
    K = channels.make_amplitude_damping(0.5)
    plan = plan_channel(K, restarts=1)
    bad = RealizationPlan(2, np.array([0.5, 0.5]), plan.operators, plan.p_succ, plan.sigma)
    with pytest.raises(focksim.PlanInconsistencyError):
        effective_channel_choi(bad)


def test_monte_carlo_full_damping():
    plan = plan_channel(channels.make_amplitude_damping(1.0), restarts=1)
    res = monte_carlo(plan, np.eye(2) / 2, 100_000, seed=11)
    assert abs(res.p_hat - 0.5) <= 4 * res.stderr


def test_monte_carlo_identity_always_succeeds():
    plan = plan_channel(channels.make_identity(2), restarts=1)
    res = monte_carlo(plan, np.diag([0.3, 0.7]), 20_000, seed=1)
    assert res.p_hat == 1.0 and res.stderr == 0.0
    assert np.allclose(res.rho_hat, np.diag([0.3, 0.7]), atol=0.02)


def test_monte_carlo_conditional_output():
    # accepted shots carry the channel output: Lambda(|1><1|) = diag(eps, 1 - eps)
    eps = 0.5
    K = channels.make_amplitude_damping(eps)
    plan = plan_channel(K, restarts=1)
    res = monte_carlo(plan, np.diag([0.0, 1.0]), 100_000, seed=3)
    expect = channels.apply_channel(K, np.diag([0.0, 1.0]))
    assert np.allclose(expect, np.diag([0.5, 0.5]))
    assert matkit.max_abs(res.rho_hat - expect) <= 0.01
    assert abs(res.p_hat - 2 / 3) <= 4 * res.stderr


def test_monte_carlo_agrees_with_deterministic_rate(rng):
    K = channels.random_channel(2, 3, rng)
    plan = plan_channel(K, restarts=2)
    _, p_sim = effective_channel_choi(plan)
    rho = matkit.random_density(2, rng)
    runs = [monte_carlo(plan, rho, 20_000, seed=s) for s in range(50)]
    assert sum(abs(r.p_hat - p_sim) <= 4 * r.stderr for r in runs) >= 49


def test_monte_carlo_reproducible_and_thread_independent(monkeypatch, rng):
    K = channels.random_channel(2, 2, rng)
    plan = plan_channel(K, restarts=1)
    a = monte_carlo(plan, np.eye(2) / 2, 50_000, seed=5)
    b = monte_carlo(plan, np.eye(2) / 2, 50_000, seed=5)
    monkeypatch.setenv("CHANNELFORGE_THREADS", "4")
    c = monte_carlo(plan, np.eye(2) / 2, 50_000, seed=5)
    assert a.to_json() == b.to_json() == c.to_json()
    assert monte_carlo(plan, np.eye(2) / 2, 50_000, seed=6).p_hat != a.p_hat


def test_monte_carlo_bookkeeping(rng):
    K = channels.random_channel(2, 3, rng)
    plan = plan_channel(K, restarts=1)
    res = monte_carlo(plan, np.eye(2) / 2, 30_000, seed=2)
    assert res.successes + sum(res.ancilla_clicks.values()) == res.shots
    assert all(mode >= 2 for mode in res.ancilla_clicks)
    assert abs(np.trace(res.rho_hat) - 1) <= 1e-12 and matkit.is_psd(res.rho_hat)
    with pytest.raises(ContractError):
        monte_carlo(plan, np.eye(2) / 2, 0)


def test_sample_shot_outcomes(rng):
    plan = plan_channel(channels.make_amplitude_damping(1.0), restarts=1)
    gen = np.random.default_rng(0)
    outs = [focksim.sample_shot(plan, np.diag([0.0, 1.0]), gen) for _ in range(200)]
    for o in outs:
        if o.detected_vacuum:
            assert o.clicked_mode is None
            # |1> decays to |0> on success
            assert abs(abs(o.logical_state_if_success[0]) - 1) <= 1e-12
        else:
            assert o.clicked_mode >= 2 and o.logical_state_if_success is None
    assert 0 < sum(o.detected_vacuum for o in outs) < 200

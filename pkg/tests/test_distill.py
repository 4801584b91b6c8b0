from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from request_sim.circuits import generate_rqc
from request_sim.distill import (
    FULL,
    IDENTITY,
    OBSERVABLE,
    ORACLE,
    PREP_ONLY,
    VD,
    DegenerateSpectrumError,
    MitigationPlan,
    SingularDenominatorError,
    _direct_probabilities,
    build_request_circuit,
    build_vd_circuit,
    estimate_mitigated,
    noise_floor,
    noisy_copy,
    request_probabilities,
    run_mitigation,
    run_mitigation_sweep,
    simulate_vd_equivalent,
    trace_ratio_oracle,
)
from request_sim.linalg import PauliProduct, matrix_power, pauli_expectation
from request_sim.noise import NoiseModel, amplitude_damping, apply_kraus
from request_sim.scaling import variance_of_ratio
from request_sim.simulate import prob_zero, simulate_density, simulate_statevector

seeds = st.integers(0, 2**32 - 1)
Z1 = PauliProduct("Z")
NOISY = NoiseModel(p1=0.01, p2=0.03, idle_dephasing=0.01, idle_depolarizing=0.005, reset_error=0.02,
                   readout_error=0.01)


def plan_for(n=2, p=2, m=3, seed=0, **kw):
    return MitigationPlan(generate_rqc(n, p, seed), PauliProduct.single("Z", 0, n), m, **kw)


def test_oracle_examples():
    rho = np.diag([0.75, 0.25])
    assert trace_ratio_oracle(rho, Z1, 1) == pytest.approx(0.5)
    assert trace_ratio_oracle(rho, Z1, 2) == pytest.approx(0.8, abs=1e-15)
    assert abs(trace_ratio_oracle(rho, Z1, 64) - 1) <= 1e-8
    with pytest.raises(SingularDenominatorError):
        trace_ratio_oracle(np.diag([1e-200, 1e-200]), Z1, 2)


def test_estimate_mitigated_examples():
    assert estimate_mitigated(1.0, 1.0) == 1.0
    assert estimate_mitigated(0.75, 1.0) == 0.5
    with pytest.raises(SingularDenominatorError):
        estimate_mitigated(0.7, 0.5)


def test_noise_floor_examples():
    rng = np.random.default_rng(0)
    psi = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0][:, 0]
    x = PauliProduct("ZI")
    assert noise_floor(np.outer(psi, psi.conj()), x, psi) <= 1e-12
    # errors orthogonal to the ideal state leave the dominant eigenvector unchanged
    other = np.eye(4) - np.outer(psi, psi.conj())
    rho = 0.7 * np.outer(psi, psi.conj()) + 0.1 * other
    assert noise_floor(rho, x, psi) <= 1e-12
    plus = np.array([1, 1]) / np.sqrt(2)
    damped = apply_kraus(np.outer(plus, plus), amplitude_damping(0.2), [0])
    vals, vecs = np.linalg.eigh(damped)
    lead = vecs[:, -1]
    assert noise_floor(damped, Z1, plus) == pytest.approx(abs(abs(lead[0]) ** 2 - abs(lead[1]) ** 2))
    assert noise_floor(damped, Z1, plus) > 1e-3
    with pytest.raises(DegenerateSpectrumError):
        noise_floor(np.eye(2) / 2, Z1, plus)


def test_vd_structure():
    c = build_vd_circuit(plan_for(2, 2, 2, method=VD), native=False)
    assert c.width == 5 and c.count("CSWAP") == 2
    c = build_vd_circuit(plan_for(3, 2, 4, method=VD), native=False)
    assert c.count("CSWAP") == 9
    obs = build_vd_circuit(plan_for(3, 2, 4, method=VD), OBSERVABLE, native=False)
    ident = build_vd_circuit(plan_for(3, 2, 4, method=VD), IDENTITY, native=False)
    extra = [g for g in obs.gates() if g.kind == "CTRL_PAULI"]
    assert len(extra) == 1 and [g for g in obs.gates() if g.kind != "CTRL_PAULI"] == ident.gates()
    with pytest.raises(ValueError):
        build_vd_circuit(plan_for(2, 2, 1, method=VD))


def test_request_structure():
    c = build_request_circuit(plan_for(4, 2, 5), native=False)
    assert c.width == 9 and c.count("RESET") == 12 and c.count("CSWAP") == 16
    c2 = build_request_circuit(plan_for(4, 2, 2), native=False)
    assert c2.count("RESET") == 0
    vd2 = build_vd_circuit(plan_for(4, 2, 2, method=VD), native=False)
    assert c2.gates() == vd2.gates()
    with pytest.raises(ValueError):
        build_request_circuit(plan_for(2, 2, 1))


def test_plan_validation():
    prep = generate_rqc(2, 1, 0)
    with pytest.raises(ValueError):
        MitigationPlan(prep, PauliProduct("ZII"), 2)
    with pytest.raises(ValueError):
        MitigationPlan(prep, PauliProduct("ZI"), 0)
    with pytest.raises(ValueError):
        MitigationPlan(prep, PauliProduct("ZI"), 2, scope="everything")


@settings(max_examples=8, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(1, 4), st.integers(2, 4))
def test_three_route_agreement_noiseless(seed, n, p, m):
    plan = plan_for(n, p, m, seed, noise=NoiseModel.noiseless())
    psi = simulate_statevector(plan.prep)
    rho = np.outer(psi, psi.conj())
    oracle = trace_ratio_oracle(rho, plan.observable, m)
    vd = build_vd_circuit(plan)
    sv = [abs(simulate_statevector(build_vd_circuit(plan, s))[: 2 ** (vd.width - 1)]) for s in (OBSERVABLE, IDENTITY)]
    # prob0 = norm of the ancilla-0 half of the output statevector
    vd_value = estimate_mitigated(float(sv[0] @ sv[0]), float(sv[1] @ sv[1]))
    rq = run_mitigation(plan)
    assert abs(vd_value - oracle) <= 1e-9
    assert abs(rq.mitigated - oracle) <= 1e-9
    assert abs(rq.mitigated - vd_value) <= 1e-9


@settings(max_examples=6, deadline=None)
@given(seeds, st.integers(2, 4))
def test_prep_only_matches_oracle(seed, m):
    plan = plan_for(2, 3, m, seed, noise=NOISY, scope=PREP_ONLY)
    rho = noisy_copy(plan)
    p0, p0_id = _direct_probabilities(plan, native=False)
    assert abs(estimate_mitigated(p0, p0_id) - trace_ratio_oracle(rho, plan.observable, m)) <= 1e-9
    assert abs((2 * p0_id - 1) - np.trace(matrix_power(rho, m)).real) <= 1e-9


@pytest.mark.parametrize("scope", [FULL, PREP_ONLY])
@pytest.mark.parametrize("noise", [NOISY, NoiseModel(p1=0.01, p2=0.02, idle_damping=0.02),
                                   NoiseModel.global_depolarizing(0.02)])
def test_engine_matches_direct(scope, noise):
    plan = plan_for(2, 2, 4, 7, noise=noise, scope=scope)
    engine = request_probabilities(plan, [2, 3, 4])
    for m in (2, 3, 4):
        direct = _direct_probabilities(replace(plan, copies=m))
        assert np.allclose(engine[m], direct, atol=1e-12)


def test_engine_vd_equivalent_matches_direct():
    plan = plan_for(2, 2, 3, 5, noise=NOISY, method=VD)
    eng = request_probabilities(plan, [3], suppress_idle=True)[3]
    rho_obs = simulate_vd_equivalent(plan, OBSERVABLE)
    rho_id = simulate_vd_equivalent(plan, IDENTITY)
    direct = (prob_zero(rho_obs, 0, NOISY.readout_error), prob_zero(rho_id, 0, NOISY.readout_error))
    assert np.allclose(eng, direct, atol=1e-12)


def test_vd_equivalent_noiseless_and_m2():
    plan = plan_for(2, 3, 3, 2, noise=NoiseModel.noiseless(), method=VD)
    r = run_mitigation(plan)
    assert abs(r.mitigated - r.oracle) <= 1e-9
    # at M=2 idle suppression has nothing to act on
    p2 = plan_for(2, 3, 2, 2, noise=NOISY)
    a = request_probabilities(p2, [2])[2]
    b = request_probabilities(p2, [2], suppress_idle=True)[2]
    assert np.allclose(a, b, atol=1e-15)
    with pytest.raises(NotImplementedError):
        simulate_vd_equivalent(plan_for(2, 1, 2, noise=NoiseModel(crosstalk=0.1), method=VD))


def test_idle_suppression_changes_only_m3_plus():
    plan = plan_for(2, 3, 3, 4, noise=NOISY)
    a = request_probabilities(plan, [3])[3]
    b = request_probabilities(plan, [3], suppress_idle=True)[3]
    assert not np.allclose(a, b)


def test_run_mitigation_m1_and_noiseless():
    plan = plan_for(3, 3, 1, 8, noise=NOISY)
    r = run_mitigation(plan)
    rho = simulate_density(plan.prep, NOISY)
    assert r.mitigated == pytest.approx(pauli_expectation(plan.observable, rho))
    clean = plan_for(3, 3, 4, 8, noise=NoiseModel.noiseless())
    for res in run_mitigation_sweep(clean, range(1, 5)):
        assert res.abs_err_exact <= 1e-9


def test_oracle_method_and_shots():
    plan = plan_for(2, 3, 3, 1, noise=NOISY, method=ORACLE)
    res = run_mitigation_sweep(plan, [1, 2, 3])
    assert all(r.mitigated == r.oracle for r in res[1:])
    shots = 20_000
    plan = plan_for(2, 3, 3, 1)
    shot = run_mitigation_sweep(plan, [2, 3], shots=shots, seed=3)
    again = run_mitigation_sweep(plan, [2, 3], shots=shots, seed=3)
    assert [r.mitigated for r in shot] == [r.mitigated for r in again]
    for r_shot, r in zip(shot, run_mitigation_sweep(plan, [2, 3])):
        sd = np.sqrt(variance_of_ratio(r.prob0, r.prob0_id, shots, shots))
        assert abs(r_shot.mitigated - r.mitigated) <= 5 * sd


def test_prep_only_error_decays_in_m():
    plan = plan_for(3, 4, 6, 11, noise=NOISY, scope=PREP_ONLY, method=ORACLE)
    errs = [r.abs_err_psi1 for r in run_mitigation_sweep(plan, range(1, 7))]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_measured_first_is_also_valid_noiseless():
    plan = plan_for(2, 3, 3, 6, noise=NoiseModel.noiseless(), measured="first")
    r = run_mitigation(plan)
    assert abs(r.mitigated - r.oracle) <= 1e-9

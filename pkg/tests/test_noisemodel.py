import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import oracle_rho, random_density, random_program
from nqsvdd.errors import ChannelError
from nqsvdd.measure import select_observables
from nqsvdd.noisemodel import (
    BackendParams,
    channel_counts,
    depolarizing2_kraus,
    noisify,
    thermal_relaxation_kraus,
)
from nqsvdd.simcore import CircuitProgram, GateOp, KrausChannel, MixedState, PauliString, apply_kraus, expect_mixed, expect_pure, run_mixed, run_pure


def completeness(ks):
    d = ks[0].shape[0]
    return np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(d)))


def test_depolarizing_completeness_and_count():
    rng = np.random.default_rng(0)
    for p in rng.uniform(0, 1, 50):
        ks = depolarizing2_kraus(p)
        assert len(ks) == 16 and completeness(ks) < 1e-12
    assert len(depolarizing2_kraus(0.0)) == 1


def test_thermal_completeness():
    rng = np.random.default_rng(1)
    for _ in range(50):
        t1 = rng.uniform(1, 300)
        t2 = rng.uniform(0.1, 2 * t1)
        t = rng.uniform(0, 5)
        assert completeness(thermal_relaxation_kraus(t1, t2, t)) < 1e-12


def test_depolarized_zz_expectation():
    p = 0.00332
    prog = noisify(CircuitProgram(2, [GateOp("U", (0, 1), (), np.eye(4))]),
                   BackendParams(p_depol2=p, t1_us=math.inf, t2_us=math.inf))
    val = expect_mixed(run_mixed(prog), [PauliString("ZZ")])[0, 0]
    assert val == pytest.approx(1 - 16 * p / 15, abs=1e-10)
    assert round(val, 6) == 0.996459
    # dense Kraus-sum cross-check
    rho = oracle_rho(prog)
    assert np.real(np.trace(np.diag([1, -1, -1, 1]) @ rho)) == pytest.approx(val, abs=1e-12)


def test_amplitude_decay():
    t1, t2, t = 100.0, 80.0, 7.0
    out = apply_kraus(MixedState(np.diag([0.0, 1.0]).astype(complex)), thermal_relaxation_kraus(t1, t2, t), [0])
    assert out.rho[1, 1].real == pytest.approx(math.exp(-t / t1), abs=1e-10)


def test_coherence_decay():
    t1, t2, t = 183.29, 141.73, 0.068
    plus = MixedState(np.full((2, 2), 0.5, dtype=complex))
    out = apply_kraus(plus, thermal_relaxation_kraus(t1, t2, t), [0])
    assert abs(out.rho[0, 1]) == pytest.approx(0.5 * math.exp(-t / t2), abs=1e-12)


def test_thermal_t_zero_is_identity():
    ks = thermal_relaxation_kraus(10.0, 5.0, 0.0)
    rho = random_density(np.random.default_rng(2), 1)
    assert np.allclose(sum(k @ rho @ k.conj().T for k in ks), rho, atol=1e-14)


def test_unphysical_parameters():
    with pytest.raises(ChannelError):
        depolarizing2_kraus(1.2)
    with pytest.raises(ChannelError):
        thermal_relaxation_kraus(10.0, 25.0, 1.0)
    with pytest.raises(ChannelError):
        thermal_relaxation_kraus(10.0, 5.0, -1.0)
    with pytest.raises(ChannelError):
        BackendParams(t1_us=10.0, t2_us=21.0)
    with pytest.raises(ChannelError):
        BackendParams(p_depol2=-0.1)


def test_cnot_placement():
    prog = noisify(CircuitProgram(2, [GateOp("CNOT", (0, 1))]), BackendParams())
    assert channel_counts(prog) == {"unitary": 1, "depol2": 1, "relax2q": 2}
    kinds = [op.label if isinstance(op, KrausChannel) else op.kind for op in prog.ops]
    assert kinds == ["CNOT", "depol2", "relax2q", "relax2q"]
    assert [op.targets for op in prog.ops[2:]] == [(0,), (1,)]


def test_single_qubit_placement_idle_untouched():
    prog = noisify(CircuitProgram(3, [GateOp("Ry", (1,), (0.3,))]), BackendParams())
    assert channel_counts(prog) == {"unitary": 1, "relax1q": 1}
    assert prog.ops[1].targets == (1,)


def test_noiseless_limit_matches_pure(rng):
    prog = random_program(rng, 3, 10)
    clean = BackendParams(p_depol2=0.0, t1_us=math.inf, t2_us=math.inf)
    obs = select_observables(3, 6).paulis
    ref = expect_pure(run_pure(prog), obs)
    got = expect_mixed(run_mixed(noisify(prog, clean)), obs)
    assert np.max(np.abs(got - ref)) < 1e-10


def test_noisy_ry_expectation_bounded():
    prog = noisify(CircuitProgram(1, [GateOp("Ry", (0,), (np.pi / 2,))]), BackendParams())
    v = expect_mixed(run_mixed(prog), [PauliString("Z"), PauliString("X")])[0]
    assert np.all(np.abs(v) <= 1)
    assert v[1] == pytest.approx(math.exp(-0.032 / 141.73), abs=1e-6)


def test_backend_json_round_trip(tmp_path):
    b = BackendParams(p_depol2=0.01, t1_us=100.0, t2_us=90.0)
    b.to_json(tmp_path / "b.json")
    assert BackendParams.from_json(tmp_path / "b.json") == b
    assert BackendParams() == BackendParams(0.00332, 32.0, 68.0, 183.29, 141.73)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.floats(0, 0.5), st.integers(0, 2 ** 31 - 1))
def test_noisy_program_preserves_trace_and_positivity(n, p, seed):
    rng = np.random.default_rng(seed)
    prog = noisify(random_program(rng, n, 8), BackendParams(p_depol2=p, t1_us=5.0, t2_us=4.0,
                                                              gate_len_1q_ns=300, gate_len_2q_ns=900))
    rho = run_mixed(prog, init=random_density(rng, n)[None])[0]
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) > -1e-12


def test_noise_converges_to_clean(rng):
    prog = random_program(rng, 2, 8)
    obs = select_observables(2, 5).paulis
    ref = expect_pure(run_pure(prog), obs)
    errs = []
    for scale in (1e-1, 1e-2, 1e-3):
        b = BackendParams(p_depol2=0.1 * scale, gate_len_1q_ns=32 * scale, gate_len_2q_ns=68 * scale)
        errs.append(np.max(np.abs(expect_mixed(run_mixed(noisify(prog, b)), obs) - ref)))
    assert errs[0] > errs[1] > errs[2]

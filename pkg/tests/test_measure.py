import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import pauli_matrix, random_state
from nqsvdd.errors import BoundError, StructuralError
from nqsvdd.measure import ObservableSet, latent, latent_batch, select_observables
from nqsvdd.simcore import CircuitProgram, GateOp, PauliString, PureState, apply_gate, run_pure, to_mixed


def test_mnist_selection():
    obs = select_observables(4, 32)
    w = [sum(c != "I" for c in lab) for lab in obs.labels]
    assert w.count(1) == 12 and w.count(2) == 20
    assert obs.labels[:4] == ("XIII", "YIII", "ZIII", "IXII")
    assert obs.labels[12:15] == ("XXII", "XYII", "XZII")


def test_credit_selection():
    obs = select_observables(2, 8)
    assert obs.labels == ("XI", "YI", "ZI", "IX", "IY", "IZ", "XX", "XY")


def test_single_qubit_selection():
    assert select_observables(1, 3).labels == ("X", "Y", "Z")


def test_selection_bounds():
    with pytest.raises(BoundError):
        select_observables(2, 16)
    with pytest.raises(BoundError):
        select_observables(2, 0)
    assert select_observables(2, 15).dim == 15


def test_observable_set_validation():
    with pytest.raises(BoundError):
        ObservableSet(("II",), (0, 1), 2)
    with pytest.raises(BoundError):
        ObservableSet(("XI", "XI"), (0, 1), 2)
    with pytest.raises(StructuralError):
        ObservableSet(("XIZ",), (0, 1), 2)


def test_lifting_to_full_register():
    obs = select_observables(2, 3, active_qubits=(0, 4), n_qubits=8)
    assert [str(p) for p in obs.paulis] == ["XIIIIIII", "YIIIIIII", "ZIIIIIII"]
    obs = select_observables(2, 6, active_qubits=(0, 4), n_qubits=8)
    assert str(obs.paulis[3]) == "IIIIXIII"


def test_zero_state_latent():
    obs = select_observables(2, 6)
    assert np.allclose(latent(PureState.zero(2), obs), [0, 0, 1, 0, 0, 1], atol=1e-15)


def test_bell_latent():
    bell = apply_gate(apply_gate(PureState.zero(2), GateOp("H", (0,))), GateOp("CNOT", (0, 1)))
    obs = ObservableSet(("ZZ", "ZI"), (0, 1), 2)
    assert np.allclose(latent(bell, obs), [1, 0], atol=1e-14)


def test_random_state_matches_dense(rng):
    psi = random_state(rng, 4)
    obs = select_observables(4, 20)
    dense = [np.real(psi.conj() @ pauli_matrix(lab) @ psi) for lab in obs.labels]
    assert np.max(np.abs(latent(PureState(psi), obs) - dense)) < 1e-12
    assert np.max(np.abs(latent(to_mixed(PureState(psi)), obs) - dense)) < 1e-12


def test_support_on_discarded_qubit_rejected():
    obs = select_observables(2, 3, active_qubits=(0, 2), n_qubits=4)
    with pytest.raises(StructuralError):
        latent(PureState.zero(4), obs, observables=[PauliString("IZII")])


def test_product_state_factorizes(rng):
    angles = rng.uniform(0, np.pi, 3)
    prog = CircuitProgram(3, [GateOp("Ry", (q,), (a,)) for q, a in enumerate(angles)])
    lat = latent_batch(run_pure(prog), select_observables(3, 9))[0]
    for q, a in enumerate(angles):
        assert lat[3 * q] == pytest.approx(np.sin(a), abs=1e-12)       # X
        assert lat[3 * q + 2] == pytest.approx(np.cos(a), abs=1e-12)   # Z


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.data())
def test_selection_deterministic_and_bounded(n_f, data):
    d = data.draw(st.integers(1, 4 ** n_f - 1))
    a, b = select_observables(n_f, d), select_observables(n_f, d)
    assert a.labels == b.labels and len(set(a.labels)) == d
    weights = [sum(c != "I" for c in lab) for lab in a.labels]
    assert weights == sorted(weights)
    psi = random_state(np.random.default_rng(d), n_f)
    assert np.all(np.abs(latent(PureState(psi), a)) <= 1 + 1e-12)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import oracle_unitary
from nqsvdd.ansatz import IDENTITY_SU4_ANGLES
from nqsvdd.embed import (
    ReuploadSpec,
    ZzEmbeddingSpec,
    amplitude_encode,
    amplitude_encode_batch,
    build_reupload_circuit,
    complete_pairs,
    zz_capacity,
    zz_layer,
    zz_ops,
)
from nqsvdd.errors import BindingError, StructuralError
from nqsvdd.simcore import CircuitProgram, Slot, run_pure


def test_eight_qubits_consume_36_features():
    assert ZzEmbeddingSpec(8).features_per_layer == 36
    assert len(zz_layer(np.zeros(36), ZzEmbeddingSpec(8)).ops) == 8 + 8 + 28


def test_capacity_formula_enumerated():
    for n in range(1, 11):
        for ell in range(1, 5):
            spec = ZzEmbeddingSpec(n, n_layers=ell)
            assert spec.capacity == ell * n * (n + 1) // 2 == zz_capacity(n, ell)


def test_zero_features_give_plus_state():
    for n in (1, 3, 5):
        psi = run_pure(zz_layer(np.zeros(zz_capacity(n)), ZzEmbeddingSpec(n)))[0]
        assert np.allclose(psi, np.full(2 ** n, 2 ** (-n / 2)), atol=1e-14)


def test_single_qubit_phase():
    psi = run_pure(zz_layer([np.pi / 2], ZzEmbeddingSpec(1)))[0]
    assert np.allclose(psi, np.array([1j, -1j]) / np.sqrt(2), atol=1e-15)


def test_layer_order_and_slots():
    ops = zz_ops(ZzEmbeddingSpec(3))
    kinds = [op.kind for op in ops]
    assert kinds == ["H"] * 3 + ["PhaseZ"] * 3 + ["PhaseZZ"] * 3
    assert [op.targets for op in ops[6:]] == list(complete_pairs(3))
    assert [op.angles[0].index for op in ops[3:]] == list(range(6))


def test_feature_count_mismatch():
    with pytest.raises(BindingError):
        zz_layer(np.zeros(5), ZzEmbeddingSpec(3))


def test_pair_emission_order_irrelevant(rng):
    x = rng.uniform(-2, 2, 10)
    spec = ZzEmbeddingSpec(4)
    shuffled = ZzEmbeddingSpec(4, pairs=[spec.pairs[i] for i in rng.permutation(6)])
    # features follow pairs, so permute them alongside
    order = [spec.pairs.index(p) for p in shuffled.pairs]
    x2 = np.concatenate([x[:4], x[4:][order]])
    a = run_pure(zz_layer(x, spec))
    b = run_pure(zz_layer(x2, shuffled))
    assert np.max(np.abs(a - b)) < 1e-12


def test_amplitude_encoding_examples():
    assert np.allclose(amplitude_encode([1, 0, 0, 0]).amplitudes, [1, 0, 0, 0])
    assert np.allclose(amplitude_encode([3, 4]).amplitudes, [0.6, 0.8])
    img = np.random.default_rng(0).uniform(size=256)
    st_ = amplitude_encode(img)
    assert st_.n_qubits == 8 and abs(st_.norm() - 1) < 1e-12


def test_amplitude_encoding_pads_and_rejects_zero():
    assert np.allclose(amplitude_encode([1, 1, 1]).amplitudes, np.array([1, 1, 1, 0]) / np.sqrt(3))
    with pytest.raises(BindingError):
        amplitude_encode_batch(np.zeros((2, 4)))


def test_reupload_structure():
    spec = ReuploadSpec(ZzEmbeddingSpec(8), 3)
    prog = build_reupload_circuit(spec)
    assert prog.n_params == 45 and spec.n_params == 45
    assert prog.n_features == 36   # same indices every repetition
    feats = [a.index for op in prog.ops for a in op.angles if isinstance(a, Slot) and a.source == "feature"]
    assert len(feats) == 3 * 36


def test_single_rep_is_layer_plus_trainable(rng):
    spec = ReuploadSpec(ZzEmbeddingSpec(3), 1)
    prog = build_reupload_circuit(spec)
    x = rng.uniform(-1, 1, 6)
    theta = rng.uniform(0, 6, 15)
    from nqsvdd.ansatz import brick_pairs, conv_layer
    from nqsvdd.simcore import PureState

    st0 = PureState(run_pure(zz_layer(x, spec.embedding))[0])
    ref = conv_layer(st0, brick_pairs(range(3)), theta)
    got = run_pure(prog, theta, x[None])[0]
    assert np.allclose(got, ref.amplitudes, atol=1e-12)


def test_identity_layers_give_two_layer_zz(rng):
    x = rng.uniform(-1, 1, 6)
    prog = build_reupload_circuit(ReuploadSpec(ZzEmbeddingSpec(3), 2))
    theta = np.concatenate([IDENTITY_SU4_ANGLES, IDENTITY_SU4_ANGLES])
    got = run_pure(prog, theta, x[None])[0]
    ref = run_pure(zz_layer(np.concatenate([x, x]), ZzEmbeddingSpec(3, n_layers=2)))[0]
    fid = abs(np.vdot(ref, got)) ** 2
    assert fid > 1 - 1e-12


def test_reupload_zero_inputs_match_oracle(rng):
    prog = build_reupload_circuit(ReuploadSpec(ZzEmbeddingSpec(3), 2))
    theta = np.tile(IDENTITY_SU4_ANGLES, 2)
    got = run_pure(prog, theta, np.zeros((1, 6)))[0]
    ref = oracle_unitary(prog, theta, np.zeros(6))[:, 0]
    assert np.allclose(got, ref, atol=1e-12)


def test_reupload_validation():
    with pytest.raises(StructuralError):
        ReuploadSpec(ZzEmbeddingSpec(3), 0)
    with pytest.raises(StructuralError):
        ReuploadSpec(ZzEmbeddingSpec(3, n_layers=2), 1)
    with pytest.raises(StructuralError):
        ZzEmbeddingSpec(3, pairs=[(1, 0)])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=64))
def test_amplitude_encoding_normalizes(xs):
    x = np.array(xs)
    if np.linalg.norm(x) < 1e-6:
        return
    assert abs(amplitude_encode(x).norm() - 1) < 1e-12

"""Data-dependent circuit pieces: ZZ-feature layers, amplitude encoding, re-uploading."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .ansatz import SU4_ANGLES, conv_ops
from .errors import BindingError, StructuralError
from .simcore import CircuitProgram, GateOp, PureState, feature


def complete_pairs(n_qubits: int) -> tuple[tuple[int, int], ...]:
    return tuple(combinations(range(n_qubits), 2))


def zz_capacity(n_qubits: int, n_layers: int = 1, n_pairs: int | None = None) -> int:
    if n_pairs is None:
        n_pairs = n_qubits * (n_qubits - 1) // 2
    return n_layers * (n_qubits + n_pairs)


@dataclass(frozen=True)
class ZzEmbeddingSpec:
    """ZZ-feature embedding; each layer reads ``n + |pairs|`` distinct features.

    Within a layer the first ``n`` features drive the single-qubit phases by
    qubit index and the rest drive the pair phases in ``pairs`` order.
    """

    n_qubits: int
    pairs: tuple = None
    n_layers: int = 1

    def __post_init__(self):
        pairs = complete_pairs(self.n_qubits) if self.pairs is None else tuple(tuple(p) for p in self.pairs)
        for j, k in pairs:
            if not (0 <= j < k < self.n_qubits):
                raise StructuralError(f"pair {(j, k)} invalid for {self.n_qubits} qubits")
        object.__setattr__(self, "pairs", pairs)
        if self.n_layers < 1:
            raise StructuralError("ZZ embedding needs at least one layer")

    @property
    def features_per_layer(self) -> int:
        return self.n_qubits + len(self.pairs)

    @property
    def capacity(self) -> int:
        return self.n_layers * self.features_per_layer

    def feature_slots(self) -> dict:
        """(layer, gate position within layer) -> feature index."""
        f = self.features_per_layer
        return {(ell, g): ell * f + g for ell in range(self.n_layers) for g in range(f)}


def zz_ops(spec: ZzEmbeddingSpec, feature_offset: int = 0) -> list[GateOp]:
    """Symbolic ZZ layers: H on all qubits, exp(i x_j Z_j), then exp(i x_jk Z_j Z_k)."""
    n = spec.n_qubits
    ops: list[GateOp] = []
    for ell in range(spec.n_layers):
        base = feature_offset + ell * spec.features_per_layer
        ops += [GateOp("H", (j,)) for j in range(n)]
        ops += [GateOp("PhaseZ", (j,), (feature(base + j),)) for j in range(n)]
        ops += [GateOp("PhaseZZ", pair, (feature(base + n + i),)) for i, pair in enumerate(spec.pairs)]
    return ops


def zz_layer(x, spec: ZzEmbeddingSpec) -> CircuitProgram:
    """ZZ embedding with the features of ``x`` bound as literal angles."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != spec.capacity:
        raise BindingError(f"ZZ embedding consumes {spec.capacity} features, got {x.size}")
    ops = []
    for op in zz_ops(spec):
        angles = tuple(float(x[a.index]) for a in op.angles)
        ops.append(GateOp(op.kind, op.targets, angles))
    return CircuitProgram(spec.n_qubits, ops)


def pad_to_power_of_two(x: np.ndarray) -> np.ndarray:
    """Zero-pad the last axis up to the next power of two."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    target = 1 << max(d - 1, 0).bit_length()
    if target == d:
        return x
    pad = [(0, 0)] * (x.ndim - 1) + [(0, target - d)]
    return np.pad(x, pad)


def amplitude_encode_batch(X) -> np.ndarray:
    """Rows of ``X`` -> normalized amplitude vectors ``(B, 2**n)`` (zero-padded)."""
    X = pad_to_power_of_two(np.atleast_2d(X))
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise BindingError("amplitude encoding of an all-zero vector")
    return (X / norms[:, None]).astype(complex)


def amplitude_encode(x) -> PureState:
    return PureState(amplitude_encode_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])


@dataclass(frozen=True)
class ReuploadSpec:
    """``reps`` copies of a single-layer ZZ block, each followed by a shared SU4 layer.

    Every repetition re-reads the same feature indices. Set ``trainable=False``
    for plain repeated ZZ blocks without interleaved trainable layers.
    """

    embedding: ZzEmbeddingSpec
    reps: int = 3
    trainable: bool = True

    def __post_init__(self):
        if self.reps < 1:
            raise StructuralError("re-uploading needs at least one repetition")
        if self.embedding.n_layers != 1:
            raise StructuralError("re-uploading repeats a single-layer ZZ block")

    @property
    def n_features(self) -> int:
        return self.embedding.features_per_layer

    @property
    def n_params(self) -> int:
        return SU4_ANGLES * self.reps if self.trainable else 0


def reupload_ops(spec: ReuploadSpec, param_offset: int = 0) -> list[GateOp]:
    n = spec.embedding.n_qubits
    ops: list[GateOp] = []
    for r in range(spec.reps):
        ops += zz_ops(spec.embedding)
        if spec.trainable:
            ops += conv_ops(range(n), param_offset + r * SU4_ANGLES)
    return ops


def build_reupload_circuit(spec: ReuploadSpec, param_offset: int = 0) -> CircuitProgram:
    return CircuitProgram(spec.embedding.n_qubits, reupload_ops(spec, param_offset))

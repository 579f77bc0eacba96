"""Trainable two-qubit blocks, shared-parameter layers and the QCNN hierarchy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import StructuralError
from .simcore import GateOp, PureState, apply_gate, param, su4_matrix  # noqa: F401  (re-export)

SU4_ANGLES = 15

# pre-rotations off, core (pi/2, -pi/2, pi/2), post U3(pi, 0, pi/2) on both qubits
IDENTITY_SU4_ANGLES = np.array(
    [0, 0, 0, 0, 0, 0, np.pi / 2, -np.pi / 2, np.pi / 2, np.pi, 0, np.pi / 2, np.pi, 0, np.pi / 2]
)


def brick_pairs(active: Sequence[int]) -> list[tuple[int, int]]:
    """Even-offset pairs, then odd-offset pairs, closing the ring when the count is even."""
    a = list(active)
    m = len(a)
    if m < 2:
        return []
    pairs = [(a[i], a[i + 1]) for i in range(0, m - 1, 2)]
    pairs += [(a[i], a[i + 1]) for i in range(1, m - 1, 2)]
    if m % 2 == 0 and m > 2:
        pairs.append((a[m - 1], a[0]))
    return pairs


def conv_ops(active: Sequence[int], param_offset: int) -> list[GateOp]:
    """One conv layer: the same symbolic SU4 block on every brick pair."""
    angles = tuple(param(param_offset + k) for k in range(SU4_ANGLES))
    return [GateOp("SU4", pair, angles) for pair in brick_pairs(active)]


def conv_layer(state: PureState, qubit_pairs: Sequence[tuple[int, int]], shared_angles,
               active: Sequence[int] | None = None) -> PureState:
    shared_angles = [float(v) for v in shared_angles]
    if len(shared_angles) != SU4_ANGLES:
        raise StructuralError(f"conv layer takes {SU4_ANGLES} shared angles, got {len(shared_angles)}")
    allowed = set(range(state.n_qubits) if active is None else active)
    for pair in qubit_pairs:
        if not set(pair) <= allowed:
            raise StructuralError(f"pair {pair} touches an inactive qubit")
    for pair in qubit_pairs:
        state = apply_gate(state, GateOp("SU4", pair, shared_angles))
    return state


def pool(active_set: Sequence[int]) -> tuple[int, ...]:
    """Keep every other active qubit, starting with the lowest."""
    a = sorted(active_set)
    if len(a) < 2:
        raise StructuralError(f"cannot pool {len(a)} active qubit(s)")
    return tuple(a[::2])


@dataclass(frozen=True)
class QcnnSpec:
    """``schedule`` is a sequence of ``(n_conv_layers, pool_after)`` stages."""

    n_qubits: int
    schedule: tuple = ((2, True), (2, False))

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple((int(c), bool(p)) for c, p in self.schedule))
        active = self.n_qubits
        for n_conv, pooled in self.schedule:
            if n_conv < 0:
                raise StructuralError("negative conv layer count")
            if pooled:
                if active < 2:
                    raise StructuralError("pooling below one active qubit")
                active = (active + 1) // 2

    @property
    def n_conv_layers(self) -> int:
        return sum(c for c, _ in self.schedule)

    @property
    def n_params(self) -> int:
        return SU4_ANGLES * self.n_conv_layers

    @property
    def final_active(self) -> tuple[int, ...]:
        active: tuple[int, ...] = tuple(range(self.n_qubits))
        for _, pooled in self.schedule:
            if pooled:
                active = pool(active)
        return active

    @property
    def n_final(self) -> int:
        return len(self.final_active)

    @property
    def n_pools(self) -> int:
        return sum(p for _, p in self.schedule)


def qcnn_ops(spec: QcnnSpec, param_offset: int = 0) -> tuple[list[GateOp], tuple[int, ...]]:
    """Symbolic QCNN gates and the final active qubits."""
    ops: list[GateOp] = []
    active: tuple[int, ...] = tuple(range(spec.n_qubits))
    offset = param_offset
    for n_conv, pooled in spec.schedule:
        for _ in range(n_conv):
            ops += conv_ops(active, offset)
            offset += SU4_ANGLES
        if pooled:
            active = pool(active)
    return ops, active


def count_parameters(model_spec) -> dict:
    """Per-stage trainable-parameter counts of an assembled model spec.

    Works with any object exposing ``frontend`` (layer list or ``None``),
    ``embedding_reps``/``trainable_embedding``, ``qcnn`` (``QcnnSpec`` or
    ``None``) and ``head`` (layer list or ``None``).
    """
    out: dict = {}
    if getattr(model_spec, "frontend", None):
        out["frontend"] = sum(layer.n_params for layer in model_spec.frontend)
    if getattr(model_spec, "head", None):
        out["head"] = sum(layer.n_params for layer in model_spec.head)
    if getattr(model_spec, "qcnn", None) is not None:
        reps = model_spec.embedding_reps if model_spec.trainable_embedding else 0
        out["embedding"] = SU4_ANGLES * reps
        out["qcnn"] = model_spec.qcnn.n_params
    out["classical"] = out.get("frontend", 0) + out.get("head", 0)
    out["quantum"] = out.get("embedding", 0) + out.get("qcnn", 0)
    out["total"] = out["classical"] + out["quantum"]
    return out

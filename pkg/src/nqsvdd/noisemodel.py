"""Gate-attached device noise: two-qubit depolarizing plus thermal relaxation.

Placement: after every single-qubit gate, thermal relaxation for the 1q gate
length on that qubit; after every two-qubit gate, depolarizing on the pair and
then thermal relaxation for the 2q gate length on both qubits. Idle qubits are
not decohered.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .errors import ChannelError
from .simcore import PAULI_MATRICES, CircuitProgram, GateOp, KrausChannel


@dataclass(frozen=True)
class BackendParams:
    """Median ibm_kingston figures; times in the units the field names say."""

    p_depol2: float = 0.00332
    gate_len_1q_ns: float = 32.0
    gate_len_2q_ns: float = 68.0
    t1_us: float = 183.29
    t2_us: float = 141.73

    def __post_init__(self):
        if not 0.0 <= self.p_depol2 <= 1.0:
            raise ChannelError(f"depolarizing probability {self.p_depol2} outside [0, 1]")
        if min(self.gate_len_1q_ns, self.gate_len_2q_ns) < 0 or min(self.t1_us, self.t2_us) <= 0:
            raise ChannelError("gate lengths must be non-negative and T1, T2 positive")
        if self.t2_us > 2 * self.t1_us:
            raise ChannelError(f"T2={self.t2_us} exceeds 2*T1={2 * self.t1_us}")

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "BackendParams":
        return cls(**json.loads(Path(path).read_text()))


def depolarizing2_kraus(p: float) -> list[np.ndarray]:
    """sqrt(1-p) I(x)I and sqrt(p/15) times each non-identity two-qubit Pauli."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"depolarizing probability {p} outside [0, 1]")
    ops = [math.sqrt(1 - p) * np.eye(4, dtype=complex)]
    if p == 0:
        return ops
    for a, b in product("IXYZ", repeat=2):
        if a == b == "I":
            continue
        ops.append(math.sqrt(p / 15) * np.kron(PAULI_MATRICES[a], PAULI_MATRICES[b]))
    return ops


def thermal_relaxation_kraus(t1: float, t2: float, t: float) -> list[np.ndarray]:
    """Amplitude damping for ``t`` at ``T1`` followed by the pure dephasing that makes coherences decay as exp(-t/T2).

    ``t1``, ``t2`` and ``t`` share one time unit; infinite ``t1``/``t2`` are allowed.
    """
    if t < 0 or t1 <= 0 or t2 <= 0:
        raise ChannelError("thermal relaxation needs t >= 0 and positive T1, T2")
    if t2 > 2 * t1:
        raise ChannelError(f"T2={t2} exceeds 2*T1={2 * t1}")
    gamma = 1.0 - math.exp(-t / t1)
    # coherence factor left after damping is exp(-t / 2T1); dephasing supplies the rest
    rate_phi = 1.0 / t2 - 1.0 / (2.0 * t1)
    lam = 1.0 - math.exp(-2.0 * t * rate_phi)
    lam = min(max(lam, 0.0), 1.0)
    damp = [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]
    dephase = [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex),
    ]
    out = [d @ a for d in dephase for a in damp]
    return [k for k in out if np.any(np.abs(k) > 0)]


def noisify(program: CircuitProgram, backend: BackendParams) -> CircuitProgram:
    """Expanded copy of ``program`` with noise channels attached after every gate."""
    ns = 1e-3  # ns -> us
    relax_1q = thermal_relaxation_kraus(backend.t1_us, backend.t2_us, backend.gate_len_1q_ns * ns)
    relax_2q = thermal_relaxation_kraus(backend.t1_us, backend.t2_us, backend.gate_len_2q_ns * ns)
    depol = depolarizing2_kraus(backend.p_depol2)
    items = []
    for op in program.expanded().ops:
        items.append(op)
        if not isinstance(op, GateOp):
            continue
        if len(op.targets) == 1:
            items.append(KrausChannel(relax_1q, op.targets, "relax1q"))
        elif len(op.targets) == 2:
            items.append(KrausChannel(depol, op.targets, "depol2"))
            items += [KrausChannel(relax_2q, (q,), "relax2q") for q in op.targets]
        else:
            items += [KrausChannel(relax_2q, (q,), "relax2q") for q in op.targets]
    return CircuitProgram(program.n_qubits, items)


def channel_counts(program: CircuitProgram) -> dict:
    counts = {"unitary": 0}
    for op in program.ops:
        if isinstance(op, KrausChannel):
            counts[op.label] = counts.get(op.label, 0) + 1
        else:
            counts["unitary"] += 1
    return counts

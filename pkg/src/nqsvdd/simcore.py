"""Exact statevector and density-matrix simulation of few-qubit circuits.

Basis index ``i`` of an ``n``-qubit register has qubit 0 as its most
significant bit: ``|q0 q1 ... q(n-1)>`` is amplitude ``int("q0q1...", 2)``.

Two layers live here. The value types (:class:`PureState`, :class:`MixedState`,
:class:`GateOp`, :class:`PauliString`) and the single-state operations
(:func:`apply_gate`, :func:`apply_kraus`, :func:`expectation`, :func:`to_mixed`)
form the public surface. Underneath, :func:`run_pure` and :func:`run_mixed`
execute a whole :class:`CircuitProgram` on a batch of states at once, binding
symbolic angle slots to a shared parameter vector and per-sample features.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import BindingError, ChannelError, StructuralError

HALF_PI = np.pi / 2

ARITY = {
    "H": 1, "X": 1, "Y": 1, "Z": 1,
    "Rx": 1, "Ry": 1, "Rz": 1, "U3": 1, "PhaseZ": 1,
    "PhaseZZ": 2, "SU4": 2, "CNOT": 2,
    "U": None,
}
N_ANGLES = {"Rx": 1, "Ry": 1, "Rz": 1, "PhaseZ": 1, "PhaseZZ": 1, "U3": 3, "SU4": 15}
DIAGONAL_KINDS = frozenset({"Z", "Rz", "PhaseZ", "PhaseZZ"})
# Kinds the batched engines execute directly; everything else is expanded first.
PRIMITIVE_KINDS = frozenset({"H", "X", "Y", "Z", "Rx", "Ry", "Rz", "PhaseZ", "PhaseZZ", "CNOT", "U"})

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PAULI_MATRICES = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


@dataclass(frozen=True)
class Slot:
    """Symbolic angle: ``source`` is ``"param"`` (shared theta) or ``"feature"`` (per-sample z)."""

    source: str
    index: int

    def __post_init__(self):
        if self.source not in ("param", "feature"):
            raise BindingError(f"unknown slot source {self.source!r}")
        if self.index < 0:
            raise BindingError(f"negative slot index {self.index}")


def param(index: int) -> Slot:
    return Slot("param", index)


def feature(index: int) -> Slot:
    return Slot("feature", index)


Angle = Union[float, Slot]


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate application: kind, ordered target qubits, and angle bindings."""

    kind: str
    targets: tuple
    angles: tuple = ()
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise StructuralError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "angles", tuple(self.angles))
        if len(set(targets)) != len(targets) or any(t < 0 for t in targets):
            raise StructuralError(f"{self.kind}: targets must be distinct non-negative, got {targets}")
        arity = ARITY[self.kind]
        if self.kind == "U":
            if self.matrix is None:
                raise StructuralError("generic unitary needs an explicit matrix")
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(targets),) * 2:
                raise StructuralError(f"matrix shape {m.shape} does not fit {len(targets)} targets")
            object.__setattr__(self, "matrix", m)
        elif len(targets) != arity:
            raise StructuralError(f"{self.kind} acts on {arity} qubit(s), got targets {targets}")
        if len(self.angles) != N_ANGLES.get(self.kind, 0):
            raise StructuralError(
                f"{self.kind} takes {N_ANGLES.get(self.kind, 0)} angle(s), got {len(self.angles)}"
            )

    @property
    def symbolic(self) -> bool:
        return any(isinstance(a, Slot) for a in self.angles)

    def check(self, n_qubits: int) -> None:
        if any(t >= n_qubits for t in self.targets):
            raise StructuralError(f"{self.kind} targets {self.targets} exceed register of {n_qubits}")


# ---------------------------------------------------------------------------
# gate matrices; every constructor broadcasts over array-valued angles and
# returns shape angle.shape + (d, d)


def _m2(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2).astype(complex)


def rx(theta):
    c, s = np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)
    return _m2(c, -1j * s, -1j * s, c)


def ry(theta):
    c, s = np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)
    return _m2(c, -s, s, c)


def rz_diag(theta):
    t = np.asarray(theta, dtype=float)
    return np.stack([np.exp(-0.5j * t), np.exp(0.5j * t)], -1)


def phase_z_diag(x):
    """Diagonal of exp(i x Z)."""
    x = np.asarray(x, dtype=float)
    return np.stack([np.exp(1j * x), np.exp(-1j * x)], -1)


def phase_zz_diag(x):
    """Diagonal of exp(i x Z(x)Z)."""
    x = np.asarray(x, dtype=float)
    p, m = np.exp(1j * x), np.exp(-1j * x)
    return np.stack([p, m, m, p], -1)


def _diag_to_matrix(diag):
    d = diag.shape[-1]
    out = np.zeros(diag.shape + (d,), dtype=complex)
    idx = np.arange(d)
    out[..., idx, idx] = diag
    return out


def rz(theta):
    return _diag_to_matrix(rz_diag(theta))


def u3(theta, phi, lam):
    """U3(theta, phi, lam) = Rz(phi) Rx(-pi/2) Rz(theta) Rx(pi/2) Rz(lam)."""
    return rz(phi) @ rx(-HALF_PI) @ rz(theta) @ rx(HALF_PI) @ rz(lam)


def u3_ops(target: int, theta: Angle, phi: Angle, lam: Angle) -> list[GateOp]:
    """Primitive gates of :func:`u3` in application order."""
    return [
        GateOp("Rz", (target,), (lam,)),
        GateOp("Rx", (target,), (HALF_PI,)),
        GateOp("Rz", (target,), (theta,)),
        GateOp("Rx", (target,), (-HALF_PI,)),
        GateOp("Rz", (target,), (phi,)),
    ]


def su4_ops(targets: Sequence[int], angles: Sequence[Angle]) -> list[GateOp]:
    """Primitive gates of the 15-angle two-qubit block, in application order.

    Layout: U3 on each qubit (angles 0-5), a three-CNOT entangling core carrying
    Ry/Rz/Ry rotations (angles 6-8), then U3 on each qubit (angles 9-14).
    """
    if len(angles) != 15:
        raise StructuralError(f"SU4 takes 15 angles, got {len(angles)}")
    a, b = targets
    ops = u3_ops(a, *angles[0:3]) + u3_ops(b, *angles[3:6])
    ops += [
        GateOp("CNOT", (a, b)),
        GateOp("Ry", (a,), (angles[6],)),
        GateOp("Rz", (b,), (angles[7],)),
        GateOp("CNOT", (b, a)),
        GateOp("Ry", (a,), (angles[8],)),
        GateOp("CNOT", (a, b)),
    ]
    ops += u3_ops(a, *angles[9:12]) + u3_ops(b, *angles[12:15])
    return ops


def expand_op(op: GateOp) -> list[GateOp]:
    if op.kind == "U3":
        return u3_ops(op.targets[0], *op.angles)
    if op.kind == "SU4":
        return su4_ops(op.targets, op.angles)
    return [op]


def gate_action(kind: str, values: Sequence, matrix=None):
    """Return ``("diag", d)`` or ``("dense", U)`` for a gate with bound angle values."""
    if kind == "Rz":
        return "diag", rz_diag(values[0])
    if kind == "PhaseZ":
        return "diag", phase_z_diag(values[0])
    if kind == "PhaseZZ":
        return "diag", phase_zz_diag(values[0])
    if kind == "Z":
        return "diag", np.array([1, -1], dtype=complex)
    if kind == "Rx":
        return "dense", rx(values[0])
    if kind == "Ry":
        return "dense", ry(values[0])
    if kind == "U3":
        return "dense", u3(*values)
    if kind == "SU4":
        return "dense", su4_matrix(values)
    fixed = {"H": _H, "X": _X, "Y": _Y, "CNOT": _CNOT}
    if kind in fixed:
        return "dense", fixed[kind]
    if kind == "U":
        return "dense", matrix
    raise StructuralError(f"unknown gate kind {kind!r}")


def gate_matrix(kind: str, values: Sequence = (), matrix=None) -> np.ndarray:
    """Dense matrix of a gate (broadcast over array angles)."""
    form, arr = gate_action(kind, values, matrix)
    return _diag_to_matrix(arr) if form == "diag" else arr


# ---------------------------------------------------------------------------
# batched kernels; psi has shape (B, 2**n)


def _apply_dense(psi: np.ndarray, U: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    B, k = psi.shape[0], len(targets)
    t = psi.reshape((B,) + (2,) * n)
    src = [1 + q for q in targets]
    dst = list(range(n + 1 - k, n + 1))
    t = np.moveaxis(t, src, dst)
    shape = t.shape
    t = t.reshape(B, -1, 2 ** k) @ np.swapaxes(U, -1, -2)
    return np.moveaxis(t.reshape(shape), dst, src).reshape(B, -1)


def _apply_diag(psi: np.ndarray, diag: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    B, k = psi.shape[0], len(targets)
    lead = diag.shape[:-1]
    dg = diag.reshape(lead + (2,) * k)
    order = np.argsort(targets)
    dg = np.transpose(dg, list(range(len(lead))) + [len(lead) + int(o) for o in order])
    shape = [1] * n
    for q in targets:
        shape[q] = 2
    dg = dg.reshape((lead[0] if lead else 1,) + tuple(shape))
    return (psi.reshape((B,) + (2,) * n) * dg).reshape(B, -1)


def _apply_action(psi, form, arr, targets, n):
    if form == "diag":
        return _apply_diag(psi, arr, targets, n)
    return _apply_dense(psi, arr, targets, n)


def _bind(angle: Angle, theta, z):
    if not isinstance(angle, Slot):
        return float(angle)
    if angle.source == "param":
        if theta is None or angle.index >= len(theta):
            raise BindingError(f"parameter slot {angle.index} is unbound")
        return float(theta[angle.index])
    if z is None or angle.index >= z.shape[1]:
        raise BindingError(f"feature slot {angle.index} is unbound")
    return z[:, angle.index]


def bound_action(op: GateOp, theta=None, z=None, shift: float = 0.0):
    values = [_bind(a, theta, z) for a in op.angles]
    if shift:
        values[0] = values[0] + shift
    return gate_action(op.kind, values, op.matrix)


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A CPTP map given by Kraus matrices acting on ``targets``."""

    kraus: tuple
    targets: tuple
    label: str = ""

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        check_kraus(ks, len(self.targets))

    @cached_property
    def superoperator(self) -> np.ndarray:
        return _superop(self.kraus)


def _superop(kraus) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in kraus)


def check_kraus(kraus: Sequence[np.ndarray], n_targets: int, atol: float = 1e-10) -> None:
    d = 2 ** n_targets
    if not kraus:
        raise ChannelError("empty Kraus set")
    for k in kraus:
        if k.shape != (d, d):
            raise StructuralError(f"Kraus matrix shape {k.shape} does not fit {n_targets} qubit(s)")
    total = sum(k.conj().T @ k for k in kraus)
    err = np.max(np.abs(total - np.eye(d)))
    if err > atol:
        raise ChannelError(f"Kraus set is not complete: max |sum K^dag K - I| = {err:.3e}")


@dataclass
class CircuitProgram:
    """Ordered gate applications on ``n_qubits`` with symbolic angle slots."""

    n_qubits: int
    ops: list = field(default_factory=list)

    def __post_init__(self):
        ops, self.ops = list(self.ops), []
        self.extend(ops)

    def append(self, op) -> None:
        op.check(self.n_qubits) if isinstance(op, GateOp) else _check_targets(op.targets, self.n_qubits)
        self.ops.append(op)

    def extend(self, ops: Iterable) -> None:
        for op in ops:
            self.append(op)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def _max_slot(self, source: str) -> int:
        idx = [a.index for op in self.ops if isinstance(op, GateOp)
               for a in op.angles if isinstance(a, Slot) and a.source == source]
        return max(idx) + 1 if idx else 0

    @property
    def n_params(self) -> int:
        return self._max_slot("param")

    @property
    def n_features(self) -> int:
        return self._max_slot("feature")

    def expanded(self) -> "CircuitProgram":
        """Same circuit with U3 and SU4 blocks rewritten to primitive gates."""
        out = []
        for op in self.ops:
            out.extend(expand_op(op) if isinstance(op, GateOp) else [op])
        return CircuitProgram(self.n_qubits, out)

    def occurrences(self, source: str) -> dict[int, list[int]]:
        """Map slot index -> op positions where it appears (first angle only, primitive ops)."""
        occ: dict[int, list[int]] = {}
        for pos, op in enumerate(self.ops):
            if not isinstance(op, GateOp):
                continue
            for a in op.angles:
                if isinstance(a, Slot) and a.source == source:
                    occ.setdefault(a.index, []).append(pos)
        return occ


def _check_targets(targets, n):
    if any(t < 0 or t >= n for t in targets) or len(set(targets)) != len(targets):
        raise StructuralError(f"targets {targets} invalid for {n} qubits")


def _batch_size(z, init, batch):
    if z is not None:
        return z.shape[0]
    if init is not None:
        return init.shape[0]
    return batch or 1


def zero_states(n: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch, 2 ** n), dtype=complex)
    psi[:, 0] = 1.0
    return psi


def run_pure(program: CircuitProgram, theta=None, z=None, init=None, batch=None,
             shifts: dict | None = None) -> np.ndarray:
    """Execute ``program`` on a batch of statevectors.

    ``theta`` binds parameter slots, ``z`` (shape ``(B, F)``) binds feature
    slots, ``init`` (shape ``(B, 2**n)``) replaces the default ``|0...0>``.
    ``shifts`` maps op position -> offset added to that op's first angle.
    """
    n = program.n_qubits
    z = None if z is None else np.asarray(z, dtype=float)
    B = _batch_size(z, init, batch)
    psi = zero_states(n, B) if init is None else np.array(init, dtype=complex)
    shifts = shifts or {}
    for pos, op in enumerate(program.ops):
        if isinstance(op, KrausChannel):
            raise StructuralError("channels need the density-matrix path")
        form, arr = bound_action(op, theta, z, shifts.get(pos, 0.0))
        psi = _apply_action(psi, form, arr, op.targets, n)
    return psi


def _rho_apply(rho_vec, form, arr, targets, n):
    """Conjugate a vectorized density matrix (B, 4**n) by a gate action."""
    out = _apply_action(rho_vec, form, arr, targets, 2 * n)
    return _apply_action(out, form, np.conj(arr), [t + n for t in targets], 2 * n)


def run_mixed(program: CircuitProgram, theta=None, z=None, init=None, batch=None,
              shifts: dict | None = None) -> np.ndarray:
    """Execute gates and Kraus channels on a batch of density matrices ``(B, D, D)``."""
    n = program.n_qubits
    D = 2 ** n
    z = None if z is None else np.asarray(z, dtype=float)
    B = _batch_size(z, init, batch)
    if init is None:
        rho = np.zeros((B, D * D), dtype=complex)
        rho[:, 0] = 1.0
    else:
        rho = np.array(init, dtype=complex).reshape(B, D * D)
    shifts = shifts or {}
    for pos, op in enumerate(program.ops):
        if isinstance(op, KrausChannel):
            tg = list(op.targets) + [t + n for t in op.targets]
            rho = _apply_dense(rho, op.superoperator, tg, 2 * n)
        else:
            form, arr = bound_action(op, theta, z, shifts.get(pos, 0.0))
            rho = _rho_apply(rho, form, arr, op.targets, n)
    return rho.reshape(B, D, D)


def program_unitary(program: CircuitProgram, theta=None) -> np.ndarray:
    """Dense unitary of a feature-free program (columns are images of basis states)."""
    D = 2 ** program.n_qubits
    return run_pure(program, theta, init=np.eye(D, dtype=complex)).T


def su4_matrix(angles) -> np.ndarray:
    """4x4 unitary of the 15-angle two-qubit block (qubit order of its targets)."""
    if len(angles) != 15:
        raise StructuralError(f"SU4 takes 15 angles, got {len(angles)}")
    return program_unitary(CircuitProgram(2, su4_ops((0, 1), [float(a) for a in angles])))


# ---------------------------------------------------------------------------
# Pauli strings


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XIZI")``."""

    factors: str

    def __post_init__(self):
        f = str(self.factors).upper()
        if not f or set(f) - set("IXYZ"):
            raise StructuralError(f"invalid Pauli string {self.factors!r}")
        object.__setattr__(self, "factors", f)

    @property
    def n_qubits(self) -> int:
        return len(self.factors)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.factors)

    @property
    def support(self) -> tuple:
        return tuple(q for q, c in enumerate(self.factors) if c != "I")

    def __str__(self) -> str:
        return self.factors

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for c in self.factors:
            out = np.kron(out, PAULI_MATRICES[c])
        return out


@lru_cache(maxsize=4096)
def _pauli_action(factors: str):
    n = len(factors)
    idx = np.arange(2 ** n)
    mask = 0
    phase = np.ones(2 ** n, dtype=complex)
    for q, c in enumerate(factors):
        bit = (idx >> (n - 1 - q)) & 1
        if c in "XY":
            mask |= 1 << (n - 1 - q)
        if c in "YZ":
            phase *= 1 - 2 * bit
        if c == "Y":
            phase *= 1j
    perm = idx ^ mask
    return perm, phase[perm]


def pauli_apply(psi: np.ndarray, pauli: PauliString) -> np.ndarray:
    """P|psi> for a batch ``(B, 2**n)``."""
    perm, ph = _pauli_action(pauli.factors)
    return psi[:, perm] * ph


def expect_pure(psi: np.ndarray, paulis: Sequence[PauliString]) -> np.ndarray:
    """Expectations ``(B, len(paulis))`` of Pauli strings on a statevector batch."""
    out = np.empty((psi.shape[0], len(paulis)))
    conj = psi.conj()
    for j, p in enumerate(paulis):
        out[:, j] = np.einsum("bi,bi->b", conj, pauli_apply(psi, p)).real
    return out


def expect_mixed(rho: np.ndarray, paulis: Sequence[PauliString]) -> np.ndarray:
    """Expectations ``Tr(P rho)`` for a density-matrix batch ``(B, D, D)``."""
    out = np.empty((rho.shape[0], len(paulis)))
    cols = np.arange(rho.shape[-1])
    for j, p in enumerate(paulis):
        perm, ph = _pauli_action(p.factors)
        out[:, j] = (rho[:, perm, cols] * ph).sum(axis=1).real
    return out


# ---------------------------------------------------------------------------
# single-state value types and operations


def _n_from_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2 ** n != dim:
        raise StructuralError(f"dimension {dim} is not a power of two")
    return n


@dataclass
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _n_from_dim(self.amplitudes.size)

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.amplitudes.size)

    @classmethod
    def zero(cls, n_qubits: int) -> "PureState":
        return cls(zero_states(n_qubits)[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class MixedState:
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.ndim != 2 or self.rho.shape[0] != self.rho.shape[1]:
            raise StructuralError(f"density matrix must be square, got {self.rho.shape}")
        _n_from_dim(self.rho.shape[0])

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.rho.shape[0])

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)


def apply_gate(state: PureState | MixedState, gate: GateOp, bound_angles=None):
    """Apply one gate; ``bound_angles`` replaces the gate's angle list when given."""
    n = state.n_qubits
    gate.check(n)
    if bound_angles is None:
        if gate.symbolic:
            raise BindingError(f"{gate.kind} has unbound symbolic angles {gate.angles}")
        values = list(gate.angles)
    else:
        values = [float(v) for v in bound_angles]
        if len(values) != len(gate.angles):
            raise BindingError(f"{gate.kind} needs {len(gate.angles)} angle(s), got {len(values)}")
    ops = expand_op(GateOp(gate.kind, gate.targets, values, gate.matrix)) if gate.kind in ("U3", "SU4") \
        else [GateOp(gate.kind, gate.targets, values, gate.matrix)]
    if isinstance(state, MixedState):
        vec = state.rho.reshape(1, -1)
        for op in ops:
            vec = _rho_apply(vec, *gate_action(op.kind, op.angles, op.matrix), op.targets, n)
        return MixedState(vec.reshape(2 ** n, 2 ** n))
    psi = state.amplitudes[None, :]
    for op in ops:
        psi = _apply_action(psi, *gate_action(op.kind, op.angles, op.matrix), op.targets, n)
    return PureState(psi[0])


def apply_kraus(state: MixedState, kraus_set: Sequence[np.ndarray], targets: Sequence[int]) -> MixedState:
    """rho -> sum_k K rho K^dag on ``targets``."""
    n = state.n_qubits
    _check_targets(tuple(targets), n)
    ks = [np.asarray(k, dtype=complex) for k in kraus_set]
    check_kraus(ks, len(targets))
    tg = list(targets) + [t + n for t in targets]
    vec = _apply_dense(state.rho.reshape(1, -1), _superop(ks), tg, 2 * n)
    return MixedState(vec.reshape(2 ** n, 2 ** n))


def expectation(state: PureState | MixedState, obs: PauliString) -> float:
    if obs.n_qubits != state.n_qubits:
        raise StructuralError(f"observable on {obs.n_qubits} qubits, state has {state.n_qubits}")
    if isinstance(state, MixedState):
        return float(expect_mixed(state.rho[None], [obs])[0, 0])
    return float(expect_pure(state.amplitudes[None], [obs])[0, 0])


def to_mixed(state: PureState) -> MixedState:
    a = state.amplitudes
    return MixedState(np.outer(a, a.conj()))

"""Shared oracles: dense Kronecker-product simulation built independently of the engine."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from nqsvdd.simcore import CircuitProgram, GateOp, KrausChannel, Slot, feature, param

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def oracle_gate(kind, values=(), matrix=None):
    """Gate matrix from matrix exponentials of its generator."""
    if kind == "Rx":
        return expm(-0.5j * values[0] * X)
    if kind == "Ry":
        return expm(-0.5j * values[0] * Y)
    if kind == "Rz":
        return expm(-0.5j * values[0] * Z)
    if kind == "PhaseZ":
        return expm(1j * values[0] * Z)
    if kind == "PhaseZZ":
        return expm(1j * values[0] * np.kron(Z, Z))
    if kind == "U3":
        t, p, l = values
        return (oracle_gate("Rz", [p]) @ oracle_gate("Rx", [-np.pi / 2]) @ oracle_gate("Rz", [t])
                @ oracle_gate("Rx", [np.pi / 2]) @ oracle_gate("Rz", [l]))
    if kind == "SU4":
        v = list(values)
        pre = np.kron(oracle_gate("U3", v[0:3]), oracle_gate("U3", v[3:6]))
        core = (CNOT @ np.kron(oracle_gate("Ry", [v[8]]), I2) @ SWAPPED_CNOT
                @ np.kron(oracle_gate("Ry", [v[6]]), oracle_gate("Rz", [v[7]])) @ CNOT)
        post = np.kron(oracle_gate("U3", v[9:12]), oracle_gate("U3", v[12:15]))
        return post @ core @ pre
    fixed = {"H": H, "X": X, "Y": Y, "Z": Z, "CNOT": CNOT}
    if kind in fixed:
        return fixed[kind]
    if kind == "U":
        return np.asarray(matrix, dtype=complex)
    raise KeyError(kind)


SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)
SWAPPED_CNOT = SWAP @ CNOT @ SWAP


def _kron_chain(factors):
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def embed(U, targets, n):
    """Full 2**n matrix of ``U`` on ``targets`` (qubit 0 most significant) via Kronecker products."""
    targets = list(targets)
    if len(targets) == 1:
        return _kron_chain([U if q == targets[0] else I2 for q in range(n)])
    if len(targets) != 2:
        raise ValueError("oracle handles 1- and 2-qubit gates")
    a, b = targets
    # operator-Schmidt split U = sum_k A_k (x) B_k
    T = U.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(T)
    full = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for k in range(4):
        if s[k] < 1e-15:
            continue
        A = (u[:, k] * s[k]).reshape(2, 2)
        B = vh[k].reshape(2, 2)
        full += _kron_chain([A if q == a else B if q == b else I2 for q in range(n)])
    return full


def bind(angle, theta, zrow):
    if isinstance(angle, Slot):
        return theta[angle.index] if angle.source == "param" else zrow[angle.index]
    return float(angle)


def oracle_unitary(program: CircuitProgram, theta=None, zrow=None):
    n = program.n_qubits
    U = np.eye(2 ** n, dtype=complex)
    for op in program.ops:
        vals = [bind(a, theta, zrow) for a in op.angles]
        U = embed(oracle_gate(op.kind, vals, op.matrix), op.targets, n) @ U
    return U


def oracle_rho(program: CircuitProgram, theta=None, zrow=None, rho=None):
    n = program.n_qubits
    D = 2 ** n
    if rho is None:
        rho = np.zeros((D, D), dtype=complex)
        rho[0, 0] = 1
    for op in program.ops:
        if isinstance(op, KrausChannel):
            rho = sum(embed(k, op.targets, n) @ rho @ embed(k, op.targets, n).conj().T for k in op.kraus)
        else:
            vals = [bind(a, theta, zrow) for a in op.angles]
            G = embed(oracle_gate(op.kind, vals, op.matrix), op.targets, n)
            rho = G @ rho @ G.conj().T
    return rho


def pauli_matrix(label: str):
    return _kron_chain([PAULI[c] for c in label])


KINDS_1Q = ["H", "X", "Y", "Z", "Rx", "Ry", "Rz", "PhaseZ", "U3"]
KINDS_2Q = ["CNOT", "PhaseZZ", "SU4"]


def random_program(rng, n, depth, n_params=0, n_features=0, allow_fixed=True):
    """Random circuit; symbolic angles point into ``n_params`` / ``n_features`` slots when given."""
    ops = []
    from nqsvdd.simcore import N_ANGLES

    for _ in range(depth):
        two = n > 1 and rng.random() < 0.4
        kind = rng.choice(KINDS_2Q if two else KINDS_1Q)
        if not allow_fixed and kind in ("H", "X", "Y", "Z", "CNOT") and rng.random() < 0.5:
            kind = "Ry"
        targets = tuple(int(q) for q in rng.choice(n, size=2 if two else 1, replace=False))
        angles = []
        for _ in range(N_ANGLES.get(kind, 0)):
            r = rng.random()
            if n_features and kind in ("PhaseZ", "PhaseZZ") and r < 0.7:
                angles.append(feature(int(rng.integers(n_features))))
            elif n_params and kind not in ("PhaseZ", "PhaseZZ") and r < 0.8:
                angles.append(param(int(rng.integers(n_params))))
            else:
                angles.append(float(rng.uniform(-np.pi, np.pi)))
        ops.append(GateOp(str(kind), targets, tuple(angles)))
    return CircuitProgram(n, ops)


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def random_density(rng, n, rank=2):
    D = 2 ** n
    A = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance-criteria report lines, printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

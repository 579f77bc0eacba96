"""Gradients of latent expectations: parameter-shift, adjoint reverse pass, hybrid chain rule.

Two generator conventions are registered:

* rotation gates ``R(theta) = exp(-i theta P / 2)``: ``df = [f(+pi/2) - f(-pi/2)] / 2``
* phase gates ``exp(+i x P)``: ``df = f(+pi/4) - f(-pi/4)``

A slot used by several gates gets the sum of the per-occurrence shift terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import StateError, UnsupportedGeneratorError
from .simcore import (
    CircuitProgram,
    GateOp,
    KrausChannel,
    PauliString,
    Slot,
    bound_action,
    expect_mixed,
    expect_pure,
    pauli_apply,
    run_mixed,
    run_pure,
    _apply_action,
    _apply_dense,
    _pauli_action,
    _rho_apply,
)


@dataclass(frozen=True)
class ShiftRuleConvention:
    style: str          # "rotation" or "phase"
    shift: float
    prefactor: float
    generator: str      # Pauli letters on the gate's targets


SHIFT_RULES = {
    "Rx": ShiftRuleConvention("rotation", np.pi / 2, 0.5, "X"),
    "Ry": ShiftRuleConvention("rotation", np.pi / 2, 0.5, "Y"),
    "Rz": ShiftRuleConvention("rotation", np.pi / 2, 0.5, "Z"),
    "PhaseZ": ShiftRuleConvention("phase", np.pi / 4, 1.0, "Z"),
    "PhaseZZ": ShiftRuleConvention("phase", np.pi / 4, 1.0, "ZZ"),
}


def _has_channels(program: CircuitProgram) -> bool:
    return any(isinstance(op, KrausChannel) for op in program.ops)


def _occurrences(program: CircuitProgram, source: str) -> list[tuple[int, int]]:
    """(op position, slot index) for every symbolic angle of ``source``; validates shift rules."""
    occ = []
    for pos, op in enumerate(program.ops):
        if not isinstance(op, GateOp):
            continue
        for a in op.angles:
            if isinstance(a, Slot) and a.source == source:
                if op.kind not in SHIFT_RULES:
                    raise UnsupportedGeneratorError(
                        f"{op.kind} at position {pos} has no registered shift rule; expand it first"
                    )
                occ.append((pos, a.index))
    return occ


def evaluate(program: CircuitProgram, paulis: Sequence[PauliString], theta=None, z=None,
             init=None, shifts=None) -> np.ndarray:
    """Expectations ``(B, len(paulis))``; density-matrix path when channels are present."""
    if _has_channels(program) or (init is not None and np.ndim(init) == 3):
        rho = run_mixed(program, theta, z, init, shifts=shifts)
        return expect_mixed(rho, paulis)
    return expect_pure(run_pure(program, theta, z, init, shifts=shifts), paulis)


def _shift_jacobian(program, paulis, theta, z, init, source, n_slots):
    occ = _occurrences(program, source)
    base = evaluate(program, paulis, theta, z, init)
    B, d = base.shape
    jac = np.zeros((B, d, n_slots))
    for pos, idx in occ:
        rule = SHIFT_RULES[program.ops[pos].kind]
        plus = evaluate(program, paulis, theta, z, init, shifts={pos: rule.shift})
        minus = evaluate(program, paulis, theta, z, init, shifts={pos: -rule.shift})
        jac[:, :, idx] += rule.prefactor * (plus - minus)
    return base, jac


def grad_quantum(program: CircuitProgram, theta, paulis: Sequence[PauliString], z=None, init=None):
    """Parameter-shift Jacobian of every expectation w.r.t. every parameter, ``(B, d, T)``.

    U3/SU4 blocks are expanded to primitive rotations before shifting; pass an
    already-expanded (or noisified) program to differentiate it as is.
    """
    program = _primitive(program)
    theta = np.asarray(theta, dtype=float)
    return _shift_jacobian(program, paulis, theta, z, init, "param", len(theta))[1]


def grad_inputs(program: CircuitProgram, theta, paulis: Sequence[PauliString], z, init=None):
    """Parameter-shift Jacobian w.r.t. the per-sample features, ``(B, d, F)``."""
    program = _primitive(program)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return _shift_jacobian(program, paulis, theta, z, init, "feature", z.shape[1])[1]


def _primitive(program: CircuitProgram) -> CircuitProgram:
    if any(isinstance(op, GateOp) and op.kind in ("U3", "SU4") for op in program.ops):
        return program.expanded()
    return program


def _inverse(form, arr):
    if form == "diag":
        return form, np.conj(arr)
    return form, np.conj(np.swapaxes(arr, -1, -2))


def _generator(op: GateOp, n: int) -> PauliString:
    gen = SHIFT_RULES[op.kind].generator
    label = ["I"] * n
    for q, c in zip(op.targets, gen):
        label[q] = c
    return PauliString("".join(label))


def adjoint_vjp(program: CircuitProgram, paulis: Sequence[PauliString], weights, theta=None,
                z=None, init=None):
    """Reverse-pass gradient of ``sum_b sum_i weights[b, i] <P_i>_b``.

    Returns ``(values, grad_theta, grad_z)``: expectations ``(B, d)``, the
    batch-summed parameter gradient ``(T,)`` and per-sample feature gradients
    ``(B, F)``. Pure-state programs only.
    """
    if _has_channels(program):
        raise StateError("adjoint differentiation is disabled on noisy programs; use parameter shift")
    program = _primitive(program)
    n = program.n_qubits
    theta = None if theta is None else np.asarray(theta, dtype=float)
    z = None if z is None else np.atleast_2d(np.asarray(z, dtype=float))
    _occurrences(program, "param")
    _occurrences(program, "feature")
    psi = run_pure(program, theta, z, init)
    values = expect_pure(psi, paulis)
    w = np.asarray(weights, dtype=float)
    lam = np.zeros_like(psi)
    for j, p in enumerate(paulis):
        lam += w[:, j, None] * pauli_apply(psi, p)
    g_theta = np.zeros(0 if theta is None else len(theta))
    g_z = None if z is None else np.zeros_like(z)
    for op in reversed(program.ops):
        slots = [a for a in op.angles if isinstance(a, Slot)]
        if slots:
            rule = SHIFT_RULES[op.kind]
            gpsi = pauli_apply(psi, _generator(op, n))
            im = np.einsum("bi,bi->b", lam.conj(), gpsi).imag
            per_sample = im if rule.style == "rotation" else -2.0 * im
            slot = slots[0]
            if slot.source == "param":
                g_theta[slot.index] += per_sample.sum()
            else:
                g_z[:, slot.index] += per_sample
        form, arr = _inverse(*bound_action(op, theta, z))
        psi = _apply_action(psi, form, arr, op.targets, n)
        lam = _apply_action(lam, form, arr, op.targets, n)
    return values, g_theta, g_z


def adjoint_jacobian(program: CircuitProgram, paulis: Sequence[PauliString], theta=None, z=None,
                     init=None):
    """Full Jacobians ``(B, d, T)`` and ``(B, d, F)`` from one reverse pass per observable."""
    program = _primitive(program)
    B = _batch(z, init)
    d = len(paulis)
    T = 0 if theta is None else len(theta)
    F = 0 if z is None else np.atleast_2d(z).shape[1]
    jt = np.zeros((B, d, T))
    jz = np.zeros((B, d, F))
    for j in range(d):
        for b in range(B):
            w = np.zeros((B, d))
            w[b, j] = 1.0
            _, gt, gz = adjoint_vjp(program, paulis, w, theta, z, init)
            jt[b, j] = gt
            if F:
                jz[b, j] = gz[b]
    return jt, jz


def _batch(z, init):
    if z is not None:
        return np.atleast_2d(z).shape[0]
    if init is not None:
        return np.shape(init)[0]
    return 1


def _weighted_observable(paulis, weights, D):
    """Per-sample ``sum_i w[b, i] P_i`` as vectorized ``(B, D*D)`` matrices."""
    w = np.asarray(weights, dtype=float)
    lam = np.zeros((w.shape[0], D, D), dtype=complex)
    rows = np.arange(D)
    for j, p in enumerate(paulis):
        perm, ph = _pauli_action(p.factors)
        lam[:, rows, perm] += w[:, j, None] * ph
    return lam.reshape(w.shape[0], D * D)


def _step_forward(rho, op, theta, z, n, shift=0.0):
    if isinstance(op, KrausChannel):
        tg = list(op.targets) + [t + n for t in op.targets]
        return _apply_dense(rho, op.superoperator, tg, 2 * n)
    form, arr = bound_action(op, theta, z, shift)
    return _rho_apply(rho, form, arr, op.targets, n)


def _step_adjoint(lam, op, theta, z, n):
    if isinstance(op, KrausChannel):
        tg = list(op.targets) + [t + n for t in op.targets]
        return _apply_dense(lam, op.superoperator.conj().T, tg, 2 * n)
    form, arr = _inverse(*bound_action(op, theta, z))
    return _rho_apply(lam, form, arr, op.targets, n)


def shift_vjp(program: CircuitProgram, paulis: Sequence[PauliString], weights, theta=None,
              z=None, init=None, segment: int | None = None):
    """Parameter-shift gradient of ``sum_b sum_i weights[b, i] <P_i>_b`` for channel programs.

    Each shift term ``<O>(x + s) - <O>(x - s)`` is linear in the shifted gate's
    output, so it equals ``Tr(L (G+ rho G+^dag - G- rho G-^dag))`` with ``rho``
    the state entering the gate and ``L`` the weighted observable carried back
    through the adjoint of everything after it. One forward sweep (with
    checkpoints every ``segment`` ops) and one backward sweep replace the
    ``2 x occurrences`` shifted executions; the values agree with
    :func:`grad_quantum` / :func:`grad_inputs` to rounding.

    Returns ``(values, grad_theta, grad_z)`` shaped like :func:`adjoint_vjp`.
    """
    program = _primitive(program)
    n = program.n_qubits
    D = 2 ** n
    theta = None if theta is None else np.asarray(theta, dtype=float)
    z = None if z is None else np.atleast_2d(np.asarray(z, dtype=float))
    _occurrences(program, "param")
    _occurrences(program, "feature")
    B = _batch(z, init)
    if init is None:
        rho = np.zeros((B, D * D), dtype=complex)
        rho[:, 0] = 1.0
    else:
        init = np.asarray(init, dtype=complex)
        if init.ndim == 2:
            init = np.einsum("bi,bj->bij", init, init.conj())
        rho = init.reshape(B, D * D)
    ops = program.ops
    L = len(ops)
    seg = segment or max(1, int(np.ceil(np.sqrt(L))))
    checkpoints = []
    for start in range(0, L, seg):
        checkpoints.append(rho)
        for op in ops[start:start + seg]:
            rho = _step_forward(rho, op, theta, z, n)
    values = expect_mixed(rho.reshape(B, D, D), paulis)
    lam = _weighted_observable(paulis, weights, D)
    g_theta = np.zeros(0 if theta is None else len(theta))
    g_z = None if z is None else np.zeros_like(z)
    for k in reversed(range(len(checkpoints))):
        start = k * seg
        chunk = ops[start:start + seg]
        states = [checkpoints[k]]
        for op in chunk[:-1]:
            states.append(_step_forward(states[-1], op, theta, z, n))
        for off in reversed(range(len(states))):
            op = chunk[off]
            slots = [a for a in op.angles if isinstance(a, Slot)] if isinstance(op, GateOp) else []
            if slots:
                rule = SHIFT_RULES[op.kind]
                before = states[off]
                diff = (_step_forward(before, op, theta, z, n, rule.shift)
                        - _step_forward(before, op, theta, z, n, -rule.shift))
                per_sample = rule.prefactor * np.einsum("bj,bj->b", lam.conj(), diff).real
                slot = slots[0]
                if slot.source == "param":
                    g_theta[slot.index] += per_sample.sum()
                else:
                    g_z[:, slot.index] += per_sample
            lam = _step_adjoint(lam, op, theta, z, n)
    return values, g_theta, g_z


def hybrid_backward(grad_latent, jac_theta, jac_inputs, frontend=None, cache=None, lam: float = 0.0):
    """Chain ``dL/dlatent`` through quantum Jacobians and, if present, the classical frontend.

    ``grad_latent`` is ``(B, d)``, ``jac_theta`` ``(B, d, T)``, ``jac_inputs``
    ``(B, d, F)``. Returns ``(dL/dtheta, dL/dW)`` where the classical part
    includes the ``lam * W`` regularizer gradient.
    """
    g = np.asarray(grad_latent, dtype=float)
    d_theta = np.einsum("bi,bit->t", g, jac_theta)
    if frontend is None:
        return d_theta, []
    if cache is None:
        raise StateError("hybrid backward needs the cached classical forward pass")
    d_z = np.einsum("bi,bif->bf", g, jac_inputs)
    d_w = frontend.backward(cache, d_z)
    if lam:
        d_w = [gw + lam * w for gw, w in zip(d_w, frontend.params)]
    return d_theta, d_w

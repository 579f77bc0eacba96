"""Pauli observable selection and projection of final states to latent vectors."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import BoundError, StructuralError
from .simcore import MixedState, PauliString, PureState, expect_mixed, expect_pure

_FACTORS = "XYZ"


def _ordered_candidates(n_f: int):
    """Non-identity strings by (weight, support positions, factors with X<Y<Z)."""
    for w in range(1, n_f + 1):
        for support in combinations(range(n_f), w):
            for facs in product(_FACTORS, repeat=w):
                label = ["I"] * n_f
                for q, c in zip(support, facs):
                    label[q] = c
                yield "".join(label)


@dataclass(frozen=True)
class ObservableSet:
    """Ordered Pauli strings over the active qubits of an ``n_qubits`` register.

    ``labels`` are written over the active qubits only (e.g. ``"XIZI"`` for four
    active qubits); :attr:`paulis` lifts them onto the full register with
    identities on every discarded qubit.
    """

    labels: tuple
    active_qubits: tuple
    n_qubits: int

    def __post_init__(self):
        labels = tuple(str(PauliString(lab)) for lab in self.labels)
        active = tuple(int(q) for q in self.active_qubits)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "active_qubits", active)
        if any(q < 0 or q >= self.n_qubits for q in active):
            raise StructuralError(f"active qubits {active} outside register of {self.n_qubits}")
        for lab in labels:
            if len(lab) != len(active):
                raise StructuralError(f"label {lab!r} does not match {len(active)} active qubits")
            if set(lab) == {"I"}:
                raise BoundError("identity string is not a latent observable")
        if len(set(labels)) != len(labels):
            raise BoundError("duplicate observables")
        if len(labels) > 4 ** len(active) - 1:
            raise BoundError("more observables than 4**n_f - 1")

    @property
    def n_f(self) -> int:
        return len(self.active_qubits)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def paulis(self) -> list[PauliString]:
        out = []
        for lab in self.labels:
            full = ["I"] * self.n_qubits
            for q, c in zip(self.active_qubits, lab):
                full[q] = c
            out.append(PauliString("".join(full)))
        return out

    def names(self) -> list[str]:
        return list(self.labels)


def select_observables(n_f: int, d_prime: int, active_qubits: Sequence[int] | None = None,
                       n_qubits: int | None = None) -> ObservableSet:
    """First ``d_prime`` low-weight Pauli strings on ``n_f`` active qubits."""
    if n_f < 1:
        raise BoundError("need at least one active qubit")
    if not 1 <= d_prime <= 4 ** n_f - 1:
        raise BoundError(f"latent dimension {d_prime} outside [1, {4 ** n_f - 1}]")
    active = tuple(range(n_f)) if active_qubits is None else tuple(active_qubits)
    if len(active) != n_f:
        raise StructuralError(f"{len(active)} active qubits given for n_f={n_f}")
    labels = []
    for lab in _ordered_candidates(n_f):
        labels.append(lab)
        if len(labels) == d_prime:
            break
    return ObservableSet(tuple(labels), active, n_qubits if n_qubits is not None else max(active) + 1)


def check_support(paulis: Sequence[PauliString], active: Sequence[int]) -> None:
    allowed = set(active)
    for p in paulis:
        if not set(p.support) <= allowed:
            raise StructuralError(f"observable {p} acts on a discarded qubit")


def latent_batch(states: np.ndarray, obs_set: ObservableSet) -> np.ndarray:
    """Latent vectors for a batch: ``(B, 2**n)`` statevectors or ``(B, D, D)`` density matrices."""
    paulis = obs_set.paulis
    if states.ndim == 3:
        return expect_mixed(states, paulis)
    return expect_pure(states, paulis)


def latent(state: PureState | MixedState, obs_set: ObservableSet,
           observables: Sequence[PauliString] | None = None) -> np.ndarray:
    """Expectations of ``obs_set`` (or explicit full-register ``observables``) on one state."""
    paulis = obs_set.paulis if observables is None else list(observables)
    check_support(paulis, obs_set.active_qubits)
    for p in paulis:
        if p.n_qubits != state.n_qubits:
            raise StructuralError(f"observable on {p.n_qubits} qubits, state has {state.n_qubits}")
    if isinstance(state, MixedState):
        return expect_mixed(state.rho[None], paulis)[0]
    return expect_pure(state.amplitudes[None], paulis)[0]

"""Per-dataset model layouts for the four variants.

The layer shapes below are what reproduces the published parameter totals:

=========  ========  ==========================================  ======  =====
dataset    variant   layout                                      params  d'
=========  ========  ==========================================  ======  =====
mnist      nqsvdd    conv2d 1->8 k5, pool3, conv2d 8->4 k5,      1105    32
                     pool3 (36 feats); 3 x (ZZ + SU4 layer);
                     QCNN 8 -(2 conv)- pool - 4 -(2 conv)
mnist      dsvdd     same frontend + dense 36->32                2152    32
mnist      qsvdd-*   QCNN 8 -(3 conv)- pool - 4 -(2 conv)        75      32
credit     nqsvdd    conv1d 1->6 k5, pool2, conv1d 6->3 k5,      210     8
                     pool2 (21 feats); 3 x (ZZ + SU4);
                     QCNN 6 -(2)- pool - 3 -(1)- pool - 2
credit     dsvdd     same frontend + dense 21->8                 288     8
network    nqsvdd    conv1d valid 1->6 k5, pool4, conv1d 6->3    225     16
                     k5, pool2 (21 feats); 3 x (ZZ + SU4);
                     QCNN 6 -(2)- pool - 3 -(2)
network    dsvdd     same frontend + dense 21->16                456     16
=========  ========  ==========================================  ======  =====

``fmnist`` shares the ``mnist`` layouts. ``toy`` is a two-qubit model on 2-D
points used for quick sanity checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ansatz import QcnnSpec, count_parameters
from .classical import AvgPool, Conv1d, Conv2d, Dense, Flatten, Layer, ReLU
from .embed import zz_capacity
from .errors import StructuralError

VARIANTS = ("nqsvdd", "qsvdd-amp", "qsvdd-zz", "dsvdd")
DATASETS = ("mnist", "fmnist", "credit", "network", "toy")


@dataclass
class ModelSpec:
    dataset: str
    variant: str
    input_shape: tuple
    latent_dim: int
    n_qubits: int = 0
    embedding_reps: int = 0
    trainable_embedding: bool = False
    qcnn: QcnnSpec | None = None
    frontend: list = field(default_factory=list)
    head: list = field(default_factory=list)
    resize: tuple | None = None

    @property
    def quantum(self) -> bool:
        return self.variant != "dsvdd"

    @property
    def encoding(self) -> str | None:
        if self.variant == "qsvdd-amp":
            return "amplitude"
        if self.variant in ("nqsvdd", "qsvdd-zz"):
            return "zz"
        return None

    def parameter_counts(self) -> dict:
        return count_parameters(self)

    def describe(self) -> dict:
        out = {
            "dataset": self.dataset,
            "variant": self.variant,
            "input_shape": list(self.input_shape),
            "latent_dim": self.latent_dim,
            "frontend": [layer.describe() for layer in self.frontend],
            "head": [layer.describe() for layer in self.head],
        }
        if self.quantum:
            out.update(
                n_qubits=self.n_qubits,
                encoding=self.encoding,
                embedding_reps=self.embedding_reps,
                trainable_embedding=self.trainable_embedding,
                qcnn_schedule=[list(s) for s in self.qcnn.schedule],
                final_active=list(self.qcnn.final_active),
            )
        if self.resize:
            out["resize"] = list(self.resize)
        return out


def _image_frontend() -> list[Layer]:
    return [Conv2d(1, 8, 5, "same"), ReLU(), AvgPool(3, 2), Conv2d(8, 4, 5, "same"), ReLU(), AvgPool(3, 2), Flatten()]


def _credit_frontend() -> list[Layer]:
    return [Conv1d(1, 6, 5, "same"), ReLU(), AvgPool(2, 1), Conv1d(6, 3, 5, "same"), ReLU(), AvgPool(2, 1), Flatten()]


def _network_frontend() -> list[Layer]:
    return [Conv1d(1, 6, 5, "valid"), ReLU(), AvgPool(4, 1), Conv1d(6, 3, 5, "valid"), ReLU(), AvgPool(2, 1), Flatten()]


def _toy_frontend() -> list[Layer]:
    return [Dense(2, 8), ReLU(), Dense(8, 3)]


_LAYOUTS = {
    # dataset: input shape, frontend factory, n_qubits, nqsvdd QCNN schedule, latent dim
    "mnist": ((1, 28, 28), _image_frontend, 8, ((2, True), (2, False)), 32),
    "fmnist": ((1, 28, 28), _image_frontend, 8, ((2, True), (2, False)), 32),
    "credit": ((1, 28), _credit_frontend, 6, ((2, True), (1, True)), 8),
    "network": ((1, 78), _network_frontend, 6, ((2, True), (2, False)), 16),
    "toy": ((2,), _toy_frontend, 2, ((1, False),), 3),
}

# five conv layers (75 angles) for both QSVDD encodings
_QSVDD_SCHEDULE = {
    "mnist": ((3, True), (2, False)),
    "fmnist": ((3, True), (2, False)),
    "credit": ((2, True), (2, True), (1, False)),
    "network": ((3, True), (2, False)),
    "toy": ((1, False),),
}


def _amp_qubits(input_shape, resize) -> int:
    size = 1
    for s in (resize or input_shape):
        size *= s
    return max(1, (size - 1).bit_length())


def build_spec(dataset: str, variant: str = "nqsvdd", latent_dim: int | None = None,
               embedding_reps: int | None = None) -> ModelSpec:
    """Fresh (uninitialized) layout for ``dataset``/``variant``."""
    if dataset not in _LAYOUTS:
        raise StructuralError(f"unknown dataset {dataset!r}; choose from {DATASETS}")
    if variant not in VARIANTS:
        raise StructuralError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    shape, frontend, n, schedule, d = _LAYOUTS[dataset]
    d = latent_dim or d
    reps = 3 if embedding_reps is None else embedding_reps
    images = len(shape) == 3
    if variant == "nqsvdd":
        layers = frontend()
        spec = ModelSpec(dataset, variant, shape, d, n_qubits=n, embedding_reps=reps,
                         trainable_embedding=True, qcnn=QcnnSpec(n, schedule), frontend=layers)
    elif variant == "dsvdd":
        layers = frontend()
        probe = ModelSpec(dataset, variant, shape, d, frontend=layers)
        feat = _frontend_dim(probe)
        return replace(probe, head=[Dense(feat, d)])
    elif variant == "qsvdd-amp":
        resize = (16, 16) if images else None
        nq = _amp_qubits(shape[1:] if images else shape[-1:], resize)
        spec = ModelSpec(dataset, variant, shape, d, n_qubits=nq, qcnn=QcnnSpec(nq, _QSVDD_SCHEDULE[dataset]),
                         resize=resize)
    else:
        if images:
            resize, nq = (6, 6), 8
        else:
            nfeat = shape[-1]
            nq = 1
            while zz_capacity(nq) < nfeat:
                nq += 1
            resize = None
        schedule = _QSVDD_SCHEDULE[dataset] if nq == n or images else ((3, True), (2, False))
        spec = ModelSpec(dataset, variant, shape, d, n_qubits=nq, embedding_reps=reps,
                         trainable_embedding=False, qcnn=QcnnSpec(nq, schedule), resize=resize)
    if spec.latent_dim > 4 ** spec.qcnn.n_final - 1:
        raise StructuralError(f"latent dim {spec.latent_dim} exceeds 4**{spec.qcnn.n_final} - 1")
    return spec


def _frontend_dim(spec: ModelSpec) -> int:
    from .classical import ClassicalNet

    return ClassicalNet(spec.frontend, spec.input_shape).output_dim

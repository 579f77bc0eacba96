"""SVDD model assembly, compactness training, anomaly scoring and AUC."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import zoom
from scipy.stats import rankdata

from .architectures import ModelSpec
from .classical import ClassicalNet, CosineWarmRestarts, OptimizerState, adam_step
from .diff import adjoint_vjp, shift_vjp
from .embed import ReuploadSpec, ZzEmbeddingSpec, amplitude_encode_batch, reupload_ops
from .ansatz import qcnn_ops
from .errors import BoundError, DivergenceError, StateError, StructuralError
from .measure import select_observables
from .noisemodel import BackendParams, noisify
from .simcore import CircuitProgram, expect_mixed, expect_pure, run_mixed, run_pure

log = logging.getLogger(__name__)

CENTER_EPS = 0.1


@dataclass
class TrainConfig:
    steps: int = 1500
    batch_size: int = 32
    seed: int = 0
    lr_max: float = 0.05
    lr_min: float = 0.005
    restart_period: int = 500
    weight_decay: float = 1e-6
    noise: bool = False
    eval_chunk: int = 256

    def __post_init__(self):
        if self.steps < 0:
            raise BoundError("steps must be >= 0")
        if self.batch_size < 1:
            raise BoundError("batch size must be >= 1")

    def schedule(self) -> CosineWarmRestarts:
        return CosineWarmRestarts(self.lr_max, self.lr_min, self.restart_period)


def resize_batch(X: np.ndarray, size: tuple) -> np.ndarray:
    """Bilinear resize of ``(N, H, W)`` images to ``size``."""
    N, H, W = X.shape
    return zoom(X, (1, size[0] / H, size[1] / W), order=1, grid_mode=True, mode="nearest")


class SvddModel:
    """One of the four variants with its center, radius and trainable parameters."""

    def __init__(self, spec: ModelSpec, seed: int = 0, noise: BackendParams | None = None):
        self.spec = spec
        self.variant = spec.variant
        self.seed = seed
        self.noise = noise
        rng = np.random.default_rng(seed)
        layers = list(spec.frontend) + list(spec.head)
        self.net = ClassicalNet(layers, spec.input_shape) if layers else None
        if self.net is not None:
            self.net.init(rng)
        self.theta = np.zeros(0)
        self.center: np.ndarray | None = None
        self.radius2: float | None = None
        self.program = self.primitive = self.noisy = None
        self.obs = None
        if spec.quantum:
            self._build_circuit()
            self.theta = rng.uniform(0.0, 2 * np.pi, self.program.n_params)
        if self.net is not None and spec.quantum and self.net.output_dim != self.program.n_features:
            raise StructuralError(
                f"frontend emits {self.net.output_dim} features, embedding needs {self.program.n_features}"
            )

    def _build_circuit(self):
        spec = self.spec
        n = spec.n_qubits
        ops = []
        if spec.encoding == "zz":
            rs = ReuploadSpec(ZzEmbeddingSpec(n), spec.embedding_reps, spec.trainable_embedding)
            ops += reupload_ops(rs)
            offset = rs.n_params
        else:
            offset = 0
        q, active = qcnn_ops(spec.qcnn, offset)
        ops += q
        self.program = CircuitProgram(n, ops)
        self.primitive = self.program.expanded()
        self.obs = select_observables(len(active), spec.latent_dim, active, n)
        self.paulis = self.obs.paulis
        if self.noise is not None:
            self.noisy = noisify(self.program, self.noise)

    # -- parameters ---------------------------------------------------------

    @property
    def params(self) -> list[np.ndarray]:
        out = [self.theta.copy()] if self.spec.quantum else []
        if self.net is not None:
            out += [p.copy() for p in self.net.params]
        return out

    @params.setter
    def params(self, values):
        values = list(values)
        if self.spec.quantum:
            self.theta = np.array(values.pop(0), dtype=float)
        if self.net is not None:
            self.net.params = values

    def _decay_mask(self) -> list[bool]:
        return ([False] if self.spec.quantum else []) + ([True] * len(self.net.params) if self.net else [])

    @property
    def n_params(self) -> int:
        return self.theta.size + (self.net.n_params if self.net else 0)

    # -- forward --------------------------------------------------------------

    def prepare(self, X) -> np.ndarray:
        """Reshape scaled inputs to the variant's input layout."""
        X = np.asarray(X, dtype=float)
        spec = self.spec
        if spec.variant in ("nqsvdd", "dsvdd"):
            return X.reshape((X.shape[0],) + spec.input_shape)
        flat = X.reshape(X.shape[0], -1)
        if spec.resize is not None:
            img = X.reshape((X.shape[0],) + spec.input_shape[-2:])
            flat = resize_batch(img, spec.resize).reshape(X.shape[0], -1)
        return flat

    def _quantum_inputs(self, Xp):
        """(z, init, cache) consumed by the circuit for prepared inputs."""
        if self.variant == "nqsvdd":
            z, cache = self.net.forward(Xp)
            return z, None, cache
        if self.variant == "qsvdd-zz":
            need = self.program.n_features
            z = np.zeros((Xp.shape[0], need))
            z[:, :min(need, Xp.shape[1])] = Xp[:, :need]
            return z, None, None
        return None, amplitude_encode_batch(Xp), None

    def _latent_prepared(self, Xp, noisy: bool | None = None) -> np.ndarray:
        if not self.spec.quantum:
            return self.net.forward(Xp)[0]
        z, init, _ = self._quantum_inputs(Xp)
        use_noise = self.noisy is not None if noisy is None else noisy
        if use_noise:
            if init is not None:
                init = np.einsum("bi,bj->bij", init, init.conj())
            return expect_mixed(run_mixed(self.noisy, self.theta, z, init), self.paulis)
        return expect_pure(run_pure(self.program, self.theta, z, init), self.paulis)

    def latent(self, X, chunk: int = 256, noisy: bool | None = None) -> np.ndarray:
        Xp = self.prepare(X)
        parts = [self._latent_prepared(Xp[i:i + chunk], noisy) for i in range(0, len(Xp), chunk)]
        if not parts:
            return np.zeros((0, self.spec.latent_dim))
        return np.concatenate(parts)

    # -- objective ------------------------------------------------------------

    def _require_center(self):
        if self.center is None:
            raise StateError("center is not initialized; call init_center first")

    def regularizer(self, lam: float) -> float:
        if self.variant not in ("nqsvdd", "dsvdd") or self.net is None:
            return 0.0
        return 0.5 * lam * self.net.frobenius_sq()

    def loss(self, X, lam: float = 0.0) -> float:
        self._require_center()
        lat = self.latent(X)
        return float(np.mean(np.sum((lat - self.center) ** 2, axis=1)) + self.regularizer(lam))

    def loss_and_grads(self, X, lam: float = 0.0):
        """Batch loss and gradients aligned with :attr:`params`."""
        self._require_center()
        Xp = self.prepare(X)
        B = Xp.shape[0]
        reg_net = self.variant in ("nqsvdd", "dsvdd")
        if self.variant == "dsvdd":
            lat, cache = self.net.forward(Xp)
            gl = 2.0 * (lat - self.center) / B
            grads = self.net.backward(cache, gl)
        else:
            z, init, cache = self._quantum_inputs(Xp)
            if self.noisy is not None:
                lat, g_theta, g_z = self._noisy_grads(z, init)
            else:
                # the weights need the latent, so the forward runs once before the reverse pass
                lat = expect_pure(run_pure(self.program, self.theta, z, init), self.paulis)
                w = 2.0 * (lat - self.center) / B
                _, g_theta, g_z = adjoint_vjp(self.primitive, self.paulis, w, self.theta, z, init)
            grads = [g_theta]
            if self.variant == "nqsvdd":
                grads += self.net.backward(cache, g_z)
        if reg_net and lam:
            ws = self.net.params
            k = len(grads) - len(ws)
            grads = grads[:k] + [g + lam * w for g, w in zip(grads[k:], ws)]
        loss = float(np.mean(np.sum((lat - self.center) ** 2, axis=1)) + self.regularizer(lam))
        return loss, grads

    def _noisy_grads(self, z, init):
        """Parameter-shift gradients of the noisy latent (evaluated by linearity, see ``shift_vjp``)."""
        rho0 = None if init is None else np.einsum("bi,bj->bij", init, init.conj())
        lat = expect_mixed(run_mixed(self.noisy, self.theta, z, rho0), self.paulis)
        w = 2.0 * (lat - self.center) / lat.shape[0]
        _, g_theta, g_z = shift_vjp(self.noisy, self.paulis, w, self.theta, z, rho0)
        return lat, g_theta, g_z

    # -- scoring --------------------------------------------------------------

    def distances(self, X) -> np.ndarray:
        self._require_center()
        return np.sum((self.latent(X) - self.center) ** 2, axis=1)

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "params": self.spec.parameter_counts(),
            "observables": self.obs.names() if self.obs else None,
            "active_qubits": list(self.obs.active_qubits) if self.obs else None,
            "center": None if self.center is None else [float(c) for c in self.center],
            "radius2": self.radius2,
        }


def snap_center(c: np.ndarray, eps: float = CENTER_EPS) -> np.ndarray:
    c = np.array(c, dtype=float)
    small = np.abs(c) < eps
    c[small] = np.where(c[small] < 0, -eps, eps)
    return c


def init_center(model: SvddModel, X_train, eps: float = CENTER_EPS) -> np.ndarray:
    """Mean initial latent over the training set, small coordinates pushed to +-eps."""
    X_train = np.asarray(X_train)
    if len(X_train) == 0:
        raise BoundError("cannot initialize the center from an empty training set")
    model.center = snap_center(model.latent(X_train).mean(axis=0), eps)
    return model.center


def loss(model: SvddModel, batch, lam: float = 0.0) -> float:
    return model.loss(batch, lam)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    radius2: float | None = None


def train(model: SvddModel, task, config: TrainConfig, callback=None) -> TrainResult:
    """Adam + warm-restart cosine over ``config.steps`` minibatches; sets ``model.radius2``.

    ``task`` is an :class:`~nqsvdd.data.OccTask` or a plain array of target samples.
    ``callback(step, model)`` is called after each update when given.
    """
    X = getattr(task, "train_x", task)
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise BoundError("empty training set")
    if model.center is None:
        init_center(model, X)
    rng = np.random.default_rng([config.seed, 1])
    schedule = config.schedule()
    state = OptimizerState()
    lam = config.weight_decay if model.variant in ("nqsvdd", "dsvdd") else 0.0
    result = TrainResult()
    batch = min(config.batch_size, len(X))
    for step in range(config.steps):
        idx = rng.choice(len(X), size=batch, replace=False)
        value, grads = model.loss_and_grads(X[idx], lam)
        if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
            raise DivergenceError(f"non-finite loss {value} at step {step}")
        lr = schedule(state.step)
        model.params = adam_step(state, model.params, grads, lr=lr)
        result.history.append(value)
        result.lr.append(lr)
        if callback is not None:
            callback(step, model)
    model.radius2 = float(np.max(model.distances(X)))
    result.radius2 = model.radius2
    return result


def score(model: SvddModel, X):
    """Anomaly scores ``||phi(x) - c||^2`` and decision values ``score - R^2*`` (target iff <= 0)."""
    if model.radius2 is None:
        raise StateError("model has no trained radius; run train first")
    s = model.distances(X)
    return s, s - model.radius2


def auc(target_scores, outlier_scores) -> float:
    """P(target score < outlier score) with ties counted one half (Mann-Whitney)."""
    t = np.asarray(target_scores, dtype=float).reshape(-1)
    o = np.asarray(outlier_scores, dtype=float).reshape(-1)
    if t.size == 0 or o.size == 0:
        raise BoundError("AUC needs at least one target and one outlier score")
    ranks = rankdata(np.concatenate([t, o]))
    u = ranks[t.size:].sum() - o.size * (o.size + 1) / 2.0
    return float(u / (t.size * o.size))

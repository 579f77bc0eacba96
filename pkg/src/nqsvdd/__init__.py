"""Neural-quantum support vector data description: simulator, models and experiment runner."""
from .architectures import ModelSpec, build_spec
from .ansatz import count_parameters, conv_layer, pool, su4_matrix
from .classical import ClassicalNet, CosineWarmRestarts, OptimizerState, adam_step
from .data import OccTask, load_csv, load_idx, make_task
from .diff import adjoint_vjp, grad_inputs, grad_quantum, hybrid_backward, shift_vjp
from .embed import ReuploadSpec, ZzEmbeddingSpec, amplitude_encode, build_reupload_circuit, zz_layer
from .measure import ObservableSet, latent, select_observables
from .noisemodel import BackendParams, depolarizing2_kraus, noisify, thermal_relaxation_kraus
from .simcore import (
    CircuitProgram,
    GateOp,
    KrausChannel,
    MixedState,
    PauliString,
    PureState,
    apply_gate,
    apply_kraus,
    expectation,
    to_mixed,
)
from .svdd import SvddModel, TrainConfig, auc, init_center, loss, score, train

__version__ = "0.1.0"

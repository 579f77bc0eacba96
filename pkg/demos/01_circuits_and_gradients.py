# ---
# jupyter:
#   jupytext:
#     formats: py:percent
# ---

# %% [markdown]
# # Circuits, gradients and noise
#
# A two-qubit ZZ feature map re-uploaded twice, followed by one shared SU(4)
# convolution. We compare the three gradient paths against finite differences
# and look at what the device noise model does to the latent.

# %%
import numpy as np

from nqsvdd.ansatz import conv_ops
from nqsvdd.diff import adjoint_jacobian, evaluate, grad_inputs, grad_quantum
from nqsvdd.embed import ReuploadSpec, ZzEmbeddingSpec, reupload_ops
from nqsvdd.measure import select_observables
from nqsvdd.noisemodel import BackendParams, channel_counts, noisify
from nqsvdd.simcore import CircuitProgram, expect_mixed, expect_pure, run_mixed, run_pure

rng = np.random.default_rng(0)
spec = ReuploadSpec(ZzEmbeddingSpec(2), 2)
ops = reupload_ops(spec)
n_emb = CircuitProgram(2, ops).n_params
prog = CircuitProgram(2, ops + conv_ops(range(2), n_emb))
obs = select_observables(2, 3).paulis
print("params:", prog.n_params, "features:", prog.n_features, "observables:", [p.factors for p in obs])

# %%
theta = rng.uniform(0, 2 * np.pi, prog.n_params)
z = rng.uniform(0, 1, (4, prog.n_features))
latent = expect_pure(run_pure(prog, theta, z), obs)
print(latent.round(4))

# %% [markdown]
# Parameter shift, adjoint and central differences on the same point.

# %%
h = 1e-5
fd = np.zeros((4, 3, prog.n_params))
for i in range(prog.n_params):
    tp, tm = theta.copy(), theta.copy()
    tp[i] += h
    tm[i] -= h
    fd[..., i] = (evaluate(prog.expanded(), obs, tp, z) - evaluate(prog.expanded(), obs, tm, z)) / (2 * h)

ps = grad_quantum(prog, theta, obs, z)
adj, _ = adjoint_jacobian(prog, obs, theta, z)
print("shift vs fd  :", np.abs(ps - fd).max())
print("adjoint vs fd:", np.abs(adj - fd).max())
print("shift vs adj :", np.abs(ps - adj).max())
print("input grads  :", grad_inputs(prog, theta, obs, z).shape)

# %% [markdown]
# Device noise: depolarizing after each two-qubit gate, thermal relaxation on
# every touched qubit. Median figures give a small shift; a much worse device
# visibly shrinks the latent toward the origin.

# %%
for name, backend in [("median", BackendParams()),
                      ("bad", BackendParams(p_depol2=0.05, t1_us=5.0, t2_us=4.0))]:
    noisy = noisify(prog, backend)
    lat = expect_mixed(run_mixed(noisy, theta, z), obs)
    print(name, channel_counts(noisy), "max |shift| =", np.abs(lat - latent).max().round(5))

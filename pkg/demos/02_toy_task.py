# ---
# jupyter:
#   jupytext:
#     formats: py:percent
# ---

# %% [markdown]
# # One-class training on two Gaussians
#
# Class 0 sits around (0.3, 0.3), class 1 around (0.8, 0.8). The model only
# ever sees class 0; after training the outliers should land far from the
# center.

# %%
import numpy as np

from nqsvdd.architectures import build_spec
from nqsvdd.data import make_task
from nqsvdd.svdd import SvddModel, TrainConfig, auc, score, train

task = make_task("toy", target=0, seed=0)
print(task.train_x.shape, task.test_x.shape, task.test_labels.sum(), "targets in test")

# %%
model = SvddModel(build_spec("toy", "nqsvdd", embedding_reps=1), seed=0)
print(model.spec.parameter_counts())

# %%
before = model.latent(task.test_x)
res = train(model, task, TrainConfig(steps=200, batch_size=16, seed=0))
print("loss: first %.4f  last %.4f" % (res.history[0], res.history[-1]))
print("center", model.center.round(3), "R2*", round(model.radius2, 5))

# %%
s_t, d_t = score(model, task.test_target_x)
s_o, d_o = score(model, task.test_outlier_x)
print("AUC", auc(s_t, s_o))
print("targets inside the sphere:", np.mean(d_t <= 0), " outliers outside:", np.mean(d_o > 0))

# %% [markdown]
# Mean distance to the center before and after training, per class.

# %%
after = model.latent(task.test_x)
for name, lat in [("before", before), ("after", after)]:
    d = np.sum((lat - model.center) ** 2, axis=1)
    print(name, "target %.4f  outlier %.4f" % (d[task.test_labels == 1].mean(), d[task.test_labels == 0].mean()))

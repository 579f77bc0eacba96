# ---
# jupyter:
#   jupytext:
#     formats: py:percent
# ---

# %% [markdown]
# # Desk-scale MNIST, digit 0
#
# 200 training zeros, 300 steps of batch 16, three restart cycles. Uses the
# MNIST files under ``$NQSVDD_DATA_DIR/mnist``; without them the 5000-digit
# subset bundled with mlxtend is converted to IDX first. A seed takes about
# two minutes on one core.

# %%
import os
import tempfile
from pathlib import Path

import numpy as np

from nqsvdd.cli import load_config, run_one
from nqsvdd.data import mlxtend_mnist_to_idx

root = os.environ.get("NQSVDD_DATA_DIR")
if not root or not (Path(root) / "mnist").exists():
    root = tempfile.mkdtemp()
    mlxtend_mnist_to_idx(root)
cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "desk_mnist.json")
print(cfg)

# %%
aucs = []
for seed in cfg.seeds[:1]:
    out = run_one(cfg, "nqsvdd", 0, seed, root)
    aucs.append(float(out["row"]["auc"]))
    print("seed", seed, "AUC %.4f" % aucs[-1], "%.0f s" % out["wall_time"], "params", out["row"]["params"])
    print("observables", out["details"]["observables"])

# %%
print("mean AUC %.4f" % np.mean(aucs))

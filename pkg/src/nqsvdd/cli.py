"""Experiment runner: ``run``, ``sweep`` and ``export-latent`` subcommands.

A config is a JSON object (see ``configs/``); every field is copied into the
run manifest, and a manifest can be passed back as ``--config`` to reproduce
its results CSV bitwise. Dataset files are located with ``--data-dir`` or the
``NQSVDD_DATA_DIR`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .architectures import DATASETS, VARIANTS, build_spec
from .data import DATA_ENV, make_task
from .errors import NqsvddError
from .noisemodel import BackendParams
from .svdd import SvddModel, TrainConfig, auc, score, train

log = logging.getLogger("nqsvdd")

RESULT_COLUMNS = ("dataset", "variant", "target", "seed", "auc", "params")
SWEEP_AXES = {"latent-dim": "latent_dim", "embedding-layers": "embedding_reps"}


class ConfigError(NqsvddError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str
    variants: list = field(default_factory=lambda: ["nqsvdd"])
    targets: list = field(default_factory=lambda: [0])
    seeds: list = field(default_factory=lambda: [0])
    steps: int = 1500
    batch_size: int = 32
    lr_max: float = 0.05
    lr_min: float = 0.005
    restart_period: int = 500
    weight_decay: float = 1e-6
    noise: bool = False
    backend: dict | None = None
    latent_dim: int | None = None
    embedding_reps: int | None = None
    sizes: dict | None = None
    name: str = ""

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw.get("config", raw))   # a manifest wraps its config
        if "variant" in raw:
            v = raw.pop("variant")
            raw["variants"] = [v] if isinstance(v, str) else list(v)
        if "target" in raw:
            t = raw.pop("target")
            raw["targets"] = t if isinstance(t, list) else [t]
        known = {f.name for f in fields(cls)}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigError(f"unknown config keys {extra}")
        if "dataset" not in raw:
            raise ConfigError("config needs a dataset")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choose from {DATASETS}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ConfigError(f"unknown variants {bad}; choose from {VARIANTS}")
        if not self.seeds or not self.targets:
            raise ConfigError("seeds and targets must be non-empty")
        if self.steps < 0 or self.batch_size < 1 or self.restart_period < 1:
            raise ConfigError("steps >= 0, batch_size >= 1 and restart_period >= 1 required")
        if not 0 < self.lr_min <= self.lr_max:
            raise ConfigError("learning rates need 0 < lr_min <= lr_max")
        self.seeds = [int(s) for s in self.seeds]
        self.targets = [int(t) for t in self.targets]

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Git blob hash of the canonical JSON form."""
        body = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(steps=self.steps, batch_size=self.batch_size, seed=seed, lr_max=self.lr_max,
                           lr_min=self.lr_min, restart_period=self.restart_period,
                           weight_decay=self.weight_decay, noise=self.noise)

    def backend_params(self) -> BackendParams | None:
        if not self.noise:
            return None
        return BackendParams(**(self.backend or {}))


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# single runs


def build_model(cfg: ExperimentConfig, variant: str, seed: int) -> SvddModel:
    spec = build_spec(cfg.dataset, variant, cfg.latent_dim, cfg.embedding_reps)
    return SvddModel(spec, seed, noise=cfg.backend_params() if variant != "dsvdd" else None)


def run_one(cfg: ExperimentConfig, variant: str, target: int, seed: int, data_dir=None) -> dict:
    """Train and evaluate one (variant, target, seed); returns the result row plus run details."""
    t0 = time.perf_counter()
    task = make_task(cfg.dataset, target, seed, cfg.sizes, root=data_dir)
    model = build_model(cfg, variant, seed)
    history = train(model, task, cfg.train_config(seed)).history
    s_target, _ = score(model, task.test_target_x)
    s_outlier, _ = score(model, task.test_outlier_x)
    value = auc(s_target, s_outlier)
    row = {"dataset": cfg.dataset, "variant": variant, "target": target, "seed": seed,
           "auc": repr(value), "params": model.spec.parameter_counts()["total"]}
    details = model.summary()
    details.update(target=target, auc=value, final_loss=history[-1] if history else None,
                   n_train=len(task.train_idx), n_test=len(task.test_idx))
    return {"row": row, "details": details, "wall_time": time.perf_counter() - t0}


def _job(args):
    return run_one(*args)


def _write_csv(path: Path, rows: list[dict], columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in columns})


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and sample standard deviation (n - 1) of AUC per (dataset, variant, target)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["variant"], int(r["target"])), []).append(float(r["auc"]))
    out = []
    for (ds, var, tgt), vals in sorted(groups.items()):
        v = np.array(vals)
        std = float(np.std(v, ddof=1)) if len(v) > 1 else float("nan")
        out.append({"dataset": ds, "variant": var, "target": tgt, "n": len(v),
                    "mean_auc": repr(float(v.mean())), "std_auc": repr(std)})
    return out


def run(cfg: ExperimentConfig, out_dir, data_dir=None, workers: int = 1) -> list[dict]:
    """Every (variant, target, seed) of ``cfg``; writes manifest, results, aggregate and timings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg.to_dict(), "config_hash": cfg.hash(), "runs": []}
    _dump(out / "manifest.json", manifest)
    jobs = [(cfg, v, t, s, data_dir) for v in cfg.variants for t in cfg.targets for s in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_job(job))
            r = results[-1]["row"]
            log.info("%s %s target=%s seed=%s auc=%.4f", r["dataset"], r["variant"], r["target"], r["seed"],
                     float(r["auc"]))
    rows = [r["row"] for r in results]
    _write_csv(out / "results.csv", rows, RESULT_COLUMNS)
    _write_csv(out / "aggregate.csv", aggregate(rows), ("dataset", "variant", "target", "n", "mean_auc", "std_auc"))
    timing = [dict(r["row"], wall_time=f"{r['wall_time']:.3f}") for r in results]
    _write_csv(out / "timings.csv", timing, ("dataset", "variant", "target", "seed", "wall_time"))
    manifest["runs"] = [r["details"] for r in results]
    _dump(out / "manifest.json", manifest)
    return rows


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir, data_dir=None, workers: int = 1) -> list[dict]:
    """One :func:`run` per axis value under ``out_dir/<axis>=<value>``, plus a combined ``sweep.csv``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    key = SWEEP_AXES[axis]
    out = Path(out_dir)
    combined = []
    for v in values:
        sub = ExperimentConfig.from_dict(dict(cfg.to_dict(), **{key: int(v)}))
        rows = run(sub, out / f"{axis}={v}", data_dir, workers)
        combined += [dict(r, **{axis: v}) for r in rows]
    _write_csv(out / "sweep.csv", combined, (axis,) + RESULT_COLUMNS)
    return combined


def export_latent2d(cfg: ExperimentConfig, out_dir, data_dir=None) -> list[Path]:
    """Latent scatter data (x, y, label, split) before and after training for d' = 2."""
    if cfg.latent_dim not in (None, 2):
        raise ConfigError(f"latent export needs latent_dim 2, config has {cfg.latent_dim}")
    cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), latent_dim=2))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for variant in cfg.variants:
        for target in cfg.targets:
            for seed in cfg.seeds:
                task = make_task(cfg.dataset, target, seed, cfg.sizes, root=data_dir)
                model = build_model(cfg, variant, seed)
                stem = f"latent2d_{cfg.dataset}_{variant}_t{target}_s{seed}"
                written.append(_write_latent(out / f"{stem}_iter0.csv", model, task))
                train(model, task, cfg.train_config(seed))
                written.append(_write_latent(out / f"{stem}_iter{cfg.steps}.csv", model, task))
    return written


def _write_latent(path: Path, model: SvddModel, task) -> Path:
    rows = []
    for split, X, labels in (("train", task.train_x, np.ones(len(task.train_x), dtype=int)),
                             ("test", task.test_x, task.test_labels)):
        lat = model.latent(X)
        for (x, y), lab in zip(lat, labels):
            rows.append({"x": repr(float(x)), "y": repr(float(y)),
                         "label": "target" if lab == 1 else "outlier", "split": split})
    _write_csv(path, rows, ("x", "y", "label", "split"))
    return path


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nqsvdd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment config or a previous manifest.json")
        sp.add_argument("--seeds", type=_int_list, help="override seeds, e.g. 0,1,2")
        sp.add_argument("--targets", type=_int_list, help="override target classes")
        sp.add_argument("--steps", type=int, help="override training steps")
        sp.add_argument("--noise", action="store_true", help="train and evaluate with the device noise model")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--data-dir", help=f"dataset root (default: ${DATA_ENV})")
        sp.add_argument("-v", "--verbose", action="store_true", help="log each finished run")

    r = sub.add_parser("run", help="train and evaluate every (variant, target, seed)")
    common(r)
    r.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    s = sub.add_parser("sweep", help="repeat run over latent dimension or embedding layers")
    common(s)
    s.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    s.add_argument("--values", required=True, type=_int_list)
    s.add_argument("--workers", type=int, default=1)
    e = sub.add_parser("export-latent", help="2-D latent scatter data before and after training")
    common(e)
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    d = cfg.to_dict()
    if args.seeds:
        d["seeds"] = args.seeds
    if args.targets:
        d["targets"] = args.targets
    if args.steps is not None:
        d["steps"] = args.steps
    if args.noise:
        d["noise"] = True
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "run":
            run(cfg, args.out, args.data_dir, args.workers)
        elif args.command == "sweep":
            sweep(cfg, args.axis, args.values, args.out, args.data_dir, args.workers)
        else:
            for path in export_latent2d(cfg, args.out, args.data_dir):
                print(path)
    except (NqsvddError, FileNotFoundError) as exc:
        print(f"nqsvdd: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Dataset ingestion and one-class task construction.

Expected layout under the data directory (``--data-dir`` or ``NQSVDD_DATA_DIR``)::

    mnist/   train-images-idx3-ubyte[.gz] train-labels-idx1-ubyte[.gz]
             t10k-images-idx3-ubyte[.gz]  t10k-labels-idx1-ubyte[.gz]
    fmnist/  same four files
    credit/  creditcard.csv            (V1..V28, Class)
    network/ *.csv                     (CIC-IDS2017 flow table with a Label column)
"""
from __future__ import annotations

import gzip
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import BoundError, FormatError

log = logging.getLogger(__name__)

DATA_ENV = "NQSVDD_DATA_DIR"

_IDX_TYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def _open(path: Path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(path) -> np.ndarray:
    """Read an IDX file (optionally gzipped) into an array of its declared shape."""
    try:
        with _open(path) as fh:
            raw = fh.read()
    except (OSError, EOFError) as exc:
        raise FormatError(f"{path}: unreadable ({exc})") from exc
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise FormatError(f"{path}: bad IDX magic")
    code, ndim = raw[2], raw[3]
    if code not in _IDX_TYPES:
        raise FormatError(f"{path}: unknown IDX type code 0x{code:02x}")
    if ndim == 0:
        raise FormatError(f"{path}: IDX file declares no dimensions")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    dims = tuple(int.from_bytes(raw[4 + 4 * i:8 + 4 * i], "big") for i in range(ndim))
    dtype = _IDX_TYPES[code]
    expected = int(np.prod(dims)) * dtype.itemsize
    body = raw[header:]
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} data bytes for shape {dims}, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (gzipped when ``path`` ends in .gz)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = bytes([0, 0, 0x08, array.ndim]) + b"".join(int(d).to_bytes(4, "big") for d in array.shape)
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(header + array.tobytes())


def load_idx_pair(images_path, labels_path):
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3 or images.shape[1:] != (28, 28):
        raise FormatError(f"{images_path}: expected N x 28 x 28 images, got {images.shape}")
    if labels.ndim != 1 or len(labels) != len(images):
        raise FormatError(f"{labels_path}: {len(labels)} labels for {len(images)} images")
    return images, labels


@dataclass
class CsvSchema:
    label: str
    features: list | None = None   # None means every column except the label


@dataclass
class FeatureTable:
    X: np.ndarray
    labels: np.ndarray
    columns: list
    dropped: int = 0


def load_csv(path, schema: CsvSchema) -> FeatureTable:
    """Numeric feature matrix and label column; rows with NaN or inf features are dropped and counted."""
    try:
        df = pd.read_csv(path, low_memory=False)
    except pd.errors.EmptyDataError as exc:
        raise FormatError(f"{path}: empty file") from exc
    df.columns = [str(c).strip() for c in df.columns]
    if schema.label not in df.columns:
        raise FormatError(f"{path}: missing label column {schema.label!r}")
    cols = schema.features or [c for c in df.columns if c != schema.label]
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing[:5]}")
    if df.empty:
        raise FormatError(f"{path}: no data rows")
    feats = df[cols].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    ok = np.all(np.isfinite(feats), axis=1)
    dropped = int((~ok).sum())
    if dropped:
        log.info("%s: dropped %d rows with non-finite features", path, dropped)
    return FeatureTable(feats[ok], df[schema.label].to_numpy()[ok], list(cols), dropped)


CREDIT_SCHEMA = CsvSchema("Class", [f"V{i}" for i in range(1, 29)])
NETWORK_SCHEMA = CsvSchema("Label")


# ---------------------------------------------------------------------------
# sources


def data_dir(path=None) -> Path:
    path = path or os.environ.get(DATA_ENV)
    if not path:
        raise FileNotFoundError(f"no data directory; pass --data-dir or set {DATA_ENV}")
    return Path(path)


def _find(folder: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (folder / name).exists():
            return folder / name
    raise FileNotFoundError(f"{folder / stem}[.gz] not found")


@dataclass
class Source:
    """Raw samples of a dataset: a train pool and, for images, a separate test pool."""

    name: str
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray | None = None
    test_y: np.ndarray | None = None
    dropped: int = 0
    bounds: tuple | None = None    # known feature domain; skips fitting on train


_CACHE: dict = {}


def toy_source(n_per_class: int = 500, spread: float = 0.05) -> Source:
    """Two well-separated 2-D Gaussians: class 0 around (0.3, 0.3), class 1 around (0.8, 0.8)."""
    rng = np.random.default_rng(12345)
    x0 = rng.normal((0.3, 0.3), spread, size=(n_per_class, 2))
    x1 = rng.normal((0.8, 0.8), spread, size=(n_per_class, 2))
    X = np.clip(np.concatenate([x0, x1]), 0.0, 1.0)
    return Source("toy", X, np.repeat([0, 1], n_per_class), bounds=(0.0, 1.0))


def load_source(dataset: str, root=None) -> Source:
    if dataset == "toy":
        return toy_source()
    root = data_dir(root)
    key = (dataset, str(root.resolve()))
    if key in _CACHE:
        return _CACHE[key]
    if dataset in ("mnist", "fmnist"):
        folder = root / dataset
        tx, ty = load_idx_pair(_find(folder, "train-images-idx3-ubyte"), _find(folder, "train-labels-idx1-ubyte"))
        vx, vy = load_idx_pair(_find(folder, "t10k-images-idx3-ubyte"), _find(folder, "t10k-labels-idx1-ubyte"))
        src = Source(dataset, tx, ty.astype(int), vx, vy.astype(int))
    elif dataset == "credit":
        table = load_csv(_find(root / "credit", "creditcard.csv"), CREDIT_SCHEMA)
        src = Source(dataset, table.X, table.labels.astype(int), dropped=table.dropped)
    elif dataset == "network":
        files = sorted((root / "network").glob("*.csv"))
        if not files:
            raise FileNotFoundError(f"no CSV files under {root / 'network'}")
        tables = [load_csv(f, NETWORK_SCHEMA) for f in files]
        labels = np.concatenate([t.labels for t in tables]).astype(str)
        y = np.full(len(labels), -1)
        y[np.char.upper(np.char.strip(labels)) == "BENIGN"] = 0
        y[np.char.startswith(np.char.strip(labels), "Web Attack")] = 1
        X = np.concatenate([t.X for t in tables])
        keep = y >= 0
        src = Source(dataset, X[keep], y[keep], dropped=sum(t.dropped for t in tables))
    else:
        raise BoundError(f"no loader for dataset {dataset!r}")
    _CACHE[key] = src
    return src


# ---------------------------------------------------------------------------
# tasks


DEFAULT_SIZES = {
    "mnist": {"train": 1000, "test_target": 100, "test_outlier": 10},     # outliers per other class
    "fmnist": {"train": 1000, "test_target": 100, "test_outlier": 10},
    "credit": {"train": 1000, "test_target": 492, "test_outlier": 492},
    "network": {"train": 1000, "test_target": 2180, "test_outlier": 2180},
    "toy": {"train": 100, "test_target": 50, "test_outlier": 50},
}


@dataclass
class OccTask:
    dataset: str
    target: int
    seed: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    test_labels: np.ndarray          # 1 = target class, 0 = outlier
    lo: np.ndarray | float
    hi: np.ndarray | float
    train_x: np.ndarray = field(repr=False)
    test_x: np.ndarray = field(repr=False)

    @property
    def test_target_x(self):
        return self.test_x[self.test_labels == 1]

    @property
    def test_outlier_x(self):
        return self.test_x[self.test_labels == 0]


def _take(rng, pool: np.ndarray, k: int, what: str) -> np.ndarray:
    if k > len(pool):
        raise BoundError(f"need {k} {what} samples, only {len(pool)} available")
    return np.sort(rng.choice(pool, size=k, replace=False))


def minmax_fit(X: np.ndarray, per_feature: bool):
    if per_feature:
        return X.min(axis=0), X.max(axis=0)
    return float(X.min()), float(X.max())


def minmax_apply(X: np.ndarray, lo, hi) -> np.ndarray:
    span = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    span = np.where(span > 0, span, 1.0)
    return np.clip((np.asarray(X, dtype=float) - lo) / span, 0.0, 1.0)


def make_task(dataset: str, target: int = 0, seed: int = 0, sizes: dict | None = None,
              source: Source | None = None, root=None) -> OccTask:
    """Seeded OCC split: target-only training set and a labelled test set with disjoint indices.

    Image test sets are drawn from the official test file (``test_outlier`` per
    non-target class); tabular test sets are drawn from the rows not used for
    training. Indices refer to the train pool for tabular data and to the test
    file for images.
    """
    sz = dict(DEFAULT_SIZES.get("mnist" if dataset in ("mnist", "fmnist") else dataset, {}))
    sz.update(sizes or {})
    src = source or load_source(dataset, root)
    rng = np.random.default_rng([seed, 7])
    images = src.test_x is not None
    y = src.train_y
    if images:
        classes = np.unique(y)
        if target not in classes:
            raise BoundError(f"target {target} not among classes {classes.tolist()}")
        tr = _take(rng, np.flatnonzero(y == target), sz["train"], f"class-{target} train")
        ty = src.test_y
        te_t = _take(rng, np.flatnonzero(ty == target), sz["test_target"], f"class-{target} test")
        te_o = [_take(rng, np.flatnonzero(ty == c), sz["test_outlier"], f"class-{c} test")
                for c in classes if c != target]
        te = np.concatenate([te_t] + te_o)
        raw_train = src.train_x[tr].astype(float)
        raw_test = src.test_x[te].astype(float)
    else:
        tpool = np.flatnonzero(y == target)
        opool = np.flatnonzero(y != target)
        tr = _take(rng, tpool, sz["train"], "target train")
        rest = np.setdiff1d(tpool, tr)
        te_t = _take(rng, rest, sz["test_target"], "target test")
        te_o = [_take(rng, opool, sz["test_outlier"], "outlier test")]
        te = np.concatenate([te_t] + te_o)
        raw_train = src.train_x[tr]
        raw_test = src.train_x[te]
    labels = np.concatenate([np.ones(len(te_t), dtype=int)] + [np.zeros(len(o), dtype=int) for o in te_o])
    if src.bounds is not None:
        lo, hi = src.bounds
    else:
        lo, hi = minmax_fit(raw_train.reshape(len(tr), -1), per_feature=not images)
    train_x = minmax_apply(raw_train.reshape(len(tr), -1), lo, hi)
    test_x = minmax_apply(raw_test.reshape(len(te), -1), lo, hi)
    if images:
        train_x = train_x.reshape(-1, 1, 28, 28)
        test_x = test_x.reshape(-1, 1, 28, 28)
    return OccTask(dataset, int(target), int(seed), tr, te, labels, lo, hi, train_x, test_x)


# ---------------------------------------------------------------------------
# bundled MNIST subset


def mlxtend_mnist_to_idx(out_dir, train_per_class: int = 400, seed: int = 0) -> Path:
    """Write the 5000-digit MNIST subset shipped with mlxtend as IDX files.

    Each class is split into ``train_per_class`` training and the remaining
    test digits, so the files can stand in for the full set at desk scale.
    """
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    X = X.astype(np.uint8).reshape(-1, 28, 28)
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        tr.append(idx[:train_per_class])
        te.append(idx[train_per_class:])
    tr, te = np.sort(np.concatenate(tr)), np.sort(np.concatenate(te))
    out = Path(out_dir) / "mnist"
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", X[tr])
    write_idx(out / "train-labels-idx1-ubyte.gz", y[tr])
    write_idx(out / "t10k-images-idx3-ubyte.gz", X[te])
    write_idx(out / "t10k-labels-idx1-ubyte.gz", y[te])
    return out

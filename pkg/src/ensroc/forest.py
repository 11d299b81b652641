"""Random-forest trainer that produces vote matrices.

Each tree is a CART classifier grown on Gini impurity.  Every meta-parameter
that shapes the distribution of trees is exposed: tree count, depth bound,
minimum leaf size, features tried per split and the training-row resampling
scheme (bootstrap, none, or subsampling without replacement).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _tree
from .votes import LabeledDataset, VoteMatrix

FORMAT_NAME = "ensroc-forest"
FORMAT_VERSION = 1
RESAMPLING_MODES = ("bootstrap", "none", "subsample")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int
    seed: int
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | str = "sqrt"
    resampling: str = "bootstrap"
    subsample_fraction: float = 1.0

    def __post_init__(self):
        if int(self.n_trees) < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and int(self.max_depth) < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if int(self.min_samples_leaf) < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise ValueError(f"max_features must be a positive integer or 'sqrt', got {self.max_features!r}")
        elif int(self.max_features) < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        if self.resampling not in RESAMPLING_MODES:
            raise ValueError(f"resampling must be one of {RESAMPLING_MODES}, got {self.resampling!r}")
        if not 0.0 < float(self.subsample_fraction) <= 1.0:
            raise ValueError(f"subsample_fraction must lie in (0, 1], got {self.subsample_fraction}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def resolve_max_features(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, math.isqrt(d))
        mf = int(self.max_features)
        if mf > d:
            raise ValueError(f"max_features={mf} exceeds the number of features d={d}")
        return mf


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _tree.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)


@dataclass(frozen=True)
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    n_train: int
    d: int
    max_features: int
    feature_names: tuple[str, ...] | None = field(default=None)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _training_rows(rng: np.random.Generator, n: int, config: ForestConfig) -> np.ndarray:
    if config.resampling == "bootstrap":
        return np.sort(rng.integers(0, n, size=n))
    if config.resampling == "subsample":
        size = math.ceil(config.subsample_fraction * n)
        return np.sort(rng.choice(n, size=size, replace=False))
    return np.arange(n, dtype=np.int64)


def train_forest(data: LabeledDataset, config: ForestConfig) -> ForestModel:
    """Grow ``config.n_trees`` trees.

    Tree ``i`` draws everything (training rows and per-node feature subsets)
    from a generator seeded with ``(config.seed, i)``, so trees can be built
    in any order and the forest is reproducible.
    """
    if data.n < 2:
        raise ValueError("training data needs at least 2 rows")
    data.class_counts()  # raises on single-class data
    mf = config.resolve_max_features(data.d)
    max_depth = _tree.UNLIMITED_DEPTH if config.max_depth is None else int(config.max_depth)
    X = np.ascontiguousarray(data.features, dtype=np.float64)
    y = data.labels.astype(np.int64)
    trees = []
    for i in range(config.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), i]))
        rows = _training_rows(rng, data.n, config).astype(np.int64)
        tree_seed = int(rng.integers(0, 2**63))
        arrays = _tree.build_tree(X, y, rows, max_depth, int(config.min_samples_leaf), mf, tree_seed)
        trees.append(Tree(*arrays))
    return ForestModel(trees, config, data.n, data.d, mf, data.feature_names)


def predict_votes(model: ForestModel, test: LabeledDataset) -> VoteMatrix:
    if test.d != model.d:
        raise ValueError(f"test data has {test.d} features, model was trained on {model.d}")
    X = np.ascontiguousarray(test.features, dtype=np.float64)
    full = np.empty((test.n, model.n_trees), dtype=np.uint8)
    for i, tree in enumerate(model.trees):
        full[:, i] = tree.predict(X)
    return VoteMatrix(full.sum(axis=1, dtype=np.int64), model.n_trees, test.labels, full)


# --------------------------------------------------------------------------
# serialization (JSON, format version 1)


def _config_dict(config: ForestConfig) -> dict:
    return asdict(config)


def save_forest(model: ForestModel, path) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": _config_dict(model.config),
        "n_train": model.n_train,
        "d": model.d,
        "max_features": model.max_features,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "depth": t.depth.tolist(),
                "n_samples": t.n_samples.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_forest(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a forest model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    dtypes = {
        "feature": np.int32,
        "threshold": np.float64,
        "left": np.int32,
        "right": np.int32,
        "value": np.int8,
        "depth": np.int32,
        "n_samples": np.int64,
    }
    trees = [Tree(**{k: np.array(t[k], dtype=dt) for k, dt in dtypes.items()}) for t in doc["trees"]]
    names = tuple(doc["feature_names"]) if doc.get("feature_names") else None
    return ForestModel(
        trees, ForestConfig(**doc["config"]), doc["n_train"], doc["d"], doc["max_features"], names
    )

"""CSV ingestion and synthetic data drawn from the generative model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .mcmc import sample_fixed_tree
from .model import ModelConfig
from .routing import route
from .tree import FullSubtree


@dataclass
class Dataset:
    """Design matrix with continuous columns first, then binary columns."""

    X: np.ndarray
    y: np.ndarray
    p: int
    q: int
    feature_names: list[str] = field(default_factory=list)
    target_name: str = "y"

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != self.p + self.q:
            raise ValueError("feature matrix does not match p + q")
        if len(self.y) != len(self.X):
            raise ValueError("row count mismatch between features and target")
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.p + self.q)]

    @property
    def n(self) -> int:
        return len(self.y)


def _fill_missing(col: pd.Series, continuous: bool) -> pd.Series:
    if not col.isna().any():
        return col
    if continuous:
        return col.fillna(col.median())
    mode = col.mode(dropna=True)
    if mode.empty:
        raise ValueError(f"column {col.name!r} has no observed values")
    return col.fillna(mode.iloc[0])


def _numeric(col: pd.Series, name: str) -> pd.Series:
    out = pd.to_numeric(col, errors="coerce")
    bad = out.isna() & col.notna()
    if bad.any():
        row = int(np.nonzero(bad.to_numpy())[0][0])
        raise ValueError(f"unparseable value {col.iloc[row]!r} at row {row}, column {name!r}")
    return out


def load_csv(path, schema: dict) -> Dataset:
    """Read a CSV into the model's feature layout.

    ``schema`` assigns a role to every column: ``target`` (one name),
    ``continuous``, ``categorical``, ``binary``, and optional ``ignore``
    lists.  Categorical columns with two levels become a single 0/1 column;
    more levels are one-hot expanded.  Missing values are filled with the
    column median (continuous) or mode (categorical/binary).
    """
    frame = pd.read_csv(path, na_values=["?"], skipinitialspace=True)
    target = schema.get("target")
    if not target:
        raise ValueError("schema needs a 'target' column name")
    roles = {
        "continuous": list(schema.get("continuous", [])),
        "categorical": list(schema.get("categorical", [])),
        "binary": list(schema.get("binary", [])),
        "ignore": list(schema.get("ignore", [])),
    }
    assigned = set([target])
    for names in roles.values():
        assigned.update(names)
    for name in assigned:
        if name not in frame.columns:
            raise ValueError(f"column {name!r} not present in {path}")
    unknown = [c for c in frame.columns if c not in assigned]
    if unknown:
        raise ValueError(f"columns with no assigned role: {unknown}")

    cont_cols: list[tuple[str, np.ndarray]] = []
    for name in roles["continuous"]:
        col = _fill_missing(_numeric(frame[name], name), continuous=True)
        cont_cols.append((name, col.to_numpy(dtype=float)))

    bin_cols: list[tuple[str, np.ndarray]] = []
    for name in roles["binary"]:
        col = _fill_missing(_numeric(frame[name], name), continuous=False)
        vals = col.to_numpy(dtype=float)
        if not np.isin(vals, (0.0, 1.0)).all():
            raise ValueError(f"binary column {name!r} contains values other than 0/1")
        bin_cols.append((name, vals))
    for name in roles["categorical"]:
        col = _fill_missing(frame[name].astype("string"), continuous=False)
        levels = sorted(col.unique())
        if len(levels) < 2:
            raise ValueError(f"categorical column {name!r} has a single level")
        if len(levels) == 2:
            bin_cols.append((f"{name}={levels[1]}", (col == levels[1]).to_numpy(float)))
        else:
            for lv in levels:
                bin_cols.append((f"{name}={lv}", (col == lv).to_numpy(float)))

    y_col = frame[target]
    if y_col.isna().any():
        raise ValueError(f"target column {target!r} has missing values")
    try:
        y = _numeric(y_col, target).to_numpy()
    except ValueError:
        levels = sorted(y_col.astype("string").unique())
        y = y_col.astype("string").map({lv: i for i, lv in enumerate(levels)}).to_numpy()
    if np.all(y == np.floor(np.asarray(y, dtype=float))):
        y = np.asarray(y, dtype=np.int64)

    names = [n for n, _ in cont_cols] + [n for n, _ in bin_cols]
    cols = [v for _, v in cont_cols] + [v for _, v in bin_cols]
    X = np.column_stack(cols) if cols else np.zeros((len(frame), 0))
    return Dataset(X=X, y=y, p=len(cont_cols), q=len(bin_cols),
                   feature_names=names, target_name=target)


# ---------------------------------------------------------------------------
# synthetic data from the generative model


@dataclass
class TrueModel:
    """A concrete data-generating tree: assignment, shape, leaf parameters."""

    k: np.ndarray
    tree: FullSubtree
    thetas: dict[int, object]   # leaf id -> family parameters

    def to_jsonable(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, tuple):
                return [clean(x) for x in v]
            return float(v) if isinstance(v, (np.floating, float)) else v

        return {
            "k": self.k.tolist(),
            "inner_nodes": sorted(self.tree.inner),
            "leaf_nodes": sorted(self.tree.leaves),
            "thetas": {str(s): clean(v) for s, v in self.thetas.items()},
        }


def sample_true_model(model: ModelConfig, rng: np.random.Generator) -> TrueModel:
    """Assignment uniform, shape from the split prior, leaf parameters from
    the leaf prior."""
    k = model.random_assignment(rng)
    inner, leaves = sample_fixed_tree(model.shape.g, model.d_max, rng)
    tree = FullSubtree(inner=frozenset(int(s) for s in inner),
                       leaves=frozenset(int(s) for s in leaves))
    thetas = {int(s): model.leaf.sample_params(rng) for s in sorted(tree.leaves)}
    return TrueModel(k=k, tree=tree, thetas=thetas)


def sample_inputs(model: ModelConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Binary coordinates uniform on {0,1}; continuous uniform on the
    initial ranges."""
    space = model.space
    X = np.empty((n, space.n_features))
    for j in range(space.p):
        X[:, j] = rng.uniform(space.lo[j], space.hi[j], size=n)
    if space.q:
        X[:, space.p:] = rng.integers(0, 2, size=(n, space.q)).astype(float)
    return X


def sample_outputs(model: ModelConfig, true: TrueModel, X: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    y = []
    for i in range(len(X)):
        leaf = true.tree.leaf_containing(route(X[i], true.k, model.space, model.d_max))
        y.append(model.leaf.sample_y(true.thetas[leaf], X[i], rng))
    return np.asarray(y)


def synth_generate(model: ModelConfig, n_train: int, n_test: int,
                   model_seed: int, data_seed: int,
                   true: TrueModel | None = None) -> tuple[Dataset, Dataset, TrueModel]:
    """Draw a generating tree (unless given) and then train/test sets from it."""
    if true is None:
        true = sample_true_model(model, np.random.default_rng(model_seed))
    rng = np.random.default_rng(data_seed)
    X_train = sample_inputs(model, n_train, rng)
    y_train = sample_outputs(model, true, X_train, rng)
    X_test = sample_inputs(model, n_test, rng)
    y_test = sample_outputs(model, true, X_test, rng)
    space = model.space
    train = Dataset(X=X_train, y=y_train, p=space.p, q=space.q)
    test = Dataset(X=X_test, y=y_test, p=space.p, q=space.q)
    return train, test, true


def write_csv(ds: Dataset, path) -> None:
    frame = pd.DataFrame(ds.X, columns=ds.feature_names)
    frame[ds.target_name] = ds.y
    frame.to_csv(path, index=False)

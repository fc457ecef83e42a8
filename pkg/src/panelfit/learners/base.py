"""Design matrices and the trivial mean baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaError


@dataclass
class DesignMatrix:
    """Dense feature block plus response, fully observed.

    features : (n, m) float array, no NaN
    feature_names : m unique names, one per column
    response : (n,) float array, no NaN
    """

    features: np.ndarray
    feature_names: list[str]
    response: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        n, m = self.features.shape
        if n < 2:
            raise ValueError("need at least 2 rows")
        if len(self.feature_names) != m:
            raise ValueError(f"{len(self.feature_names)} names for {m} columns")
        if len(set(self.feature_names)) != m:
            raise ValueError("duplicate feature names")
        if self.response.shape != (n,):
            raise ValueError("response length does not match features")
        if not np.isfinite(self.features).all() or not np.isfinite(self.response).all():
            raise ValueError("non-finite values in design matrix")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.features[rows], list(self.feature_names),
                            self.response[rows])


def design_from_dataset(dataset) -> DesignMatrix:
    """Build a DesignMatrix from a cleaned Dataset (features + response)."""
    names = dataset.feature_names
    if not names:
        raise SchemaError("dataset has no feature columns")
    target = dataset.response_name
    if target is None:
        raise SchemaError("dataset has no response column")
    features = np.column_stack([dataset.columns[n] for n in names])
    return DesignMatrix(features, list(names), dataset.columns[target])


def check_features(model, features) -> np.ndarray:
    """Validate prediction input width against a fitted model."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be 2-D")
    if x.shape[1] != model.n_features:
        raise ValueError(
            f"model expects {model.n_features} features, got {x.shape[1]}"
        )
    if np.isnan(x).any():
        raise ValueError("NaN in prediction input")
    return x


@dataclass
class NullModel:
    """Predicts the training mean everywhere."""

    mean: float
    feature_names: list[str] = field(default_factory=list)
    kind: str = "null"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, features) -> np.ndarray:
        x = check_features(self, features)
        return np.full(x.shape[0], self.mean)


def fit_null(d: DesignMatrix) -> NullModel:
    """Fit the mean-only baseline."""
    return NullModel(mean=float(d.response.mean()),
                     feature_names=list(d.feature_names))


def predict(model, features) -> np.ndarray:
    """Predict with any fitted model; validates input width."""
    return model.predict(features)

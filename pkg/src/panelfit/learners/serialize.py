"""Versioned JSON round-trip for every fitted model kind."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from .base import NullModel
from .ensemble import FittedForest, FittedGBM
from .linear import FittedLinear
from .tree import FittedTree, TreeNode

FORMAT_VERSION = 1


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"prediction": node.prediction, "n": node.n_samples}
    return {
        "feature": node.feature_index,
        "threshold": node.threshold,
        "n": node.n_samples,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(raw: dict) -> TreeNode:
    if "feature" not in raw:
        return TreeNode(prediction=float(raw["prediction"]), n_samples=int(raw["n"]))
    return TreeNode(
        feature_index=int(raw["feature"]),
        threshold=float(raw["threshold"]),
        n_samples=int(raw["n"]),
        left=_node_from_dict(raw["left"]),
        right=_node_from_dict(raw["right"]),
    )


def model_to_dict(model) -> dict:
    out = {"format_version": FORMAT_VERSION, "kind": model.kind,
           "feature_names": list(model.feature_names)}
    if isinstance(model, NullModel):
        out["mean"] = model.mean
    elif isinstance(model, FittedLinear):
        out["intercept"] = model.intercept
        out["coefficients"] = [float(c) for c in model.coefficients]
        out["hyperparameters"] = dict(model.hyperparameters)
    elif isinstance(model, FittedTree):
        out.update(n_min=model.n_min, m_try=model.m_try, seed=model.seed,
                   root=_node_to_dict(model.root))
    elif isinstance(model, FittedForest):
        out.update(b=model.b, m_try=model.m_try, n_min=model.n_min,
                   seed=model.seed, oob_error=model.oob_error,
                   max_depth=model.max_depth,
                   trees=[_node_to_dict(t) for t in model.trees])
    elif isinstance(model, FittedGBM):
        out.update(init=model.init, shrinkage=model.shrinkage,
                   depth=model.depth, n_min=model.n_min,
                   trees=[_node_to_dict(t) for t in model.trees])
    else:
        raise SchemaError(f"cannot serialize model of type {type(model).__name__}")
    return out


def model_from_dict(raw: dict):
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {version!r}")
    kind = raw.get("kind")
    names = list(raw["feature_names"])
    if kind == "null":
        return NullModel(mean=float(raw["mean"]), feature_names=names)
    if kind in ("ols", "ridge", "lasso"):
        return FittedLinear(
            intercept=float(raw["intercept"]),
            coefficients=np.asarray(raw["coefficients"], dtype=float),
            feature_names=names,
            kind=kind,
            hyperparameters=dict(raw.get("hyperparameters", {})),
        )
    if kind == "tree":
        return FittedTree(root=_node_from_dict(raw["root"]), feature_names=names,
                          n_min=int(raw["n_min"]), m_try=int(raw["m_try"]),
                          seed=int(raw["seed"]))
    if kind == "forest":
        oob = raw.get("oob_error")
        return FittedForest(
            trees=[_node_from_dict(t) for t in raw["trees"]],
            feature_names=names,
            b=int(raw["b"]),
            m_try=int(raw["m_try"]),
            n_min=int(raw["n_min"]),
            seed=int(raw["seed"]),
            oob_error=None if oob is None else float(oob),
            max_depth=raw.get("max_depth"),
        )
    if kind == "gbm":
        return FittedGBM(
            init=float(raw["init"]),
            shrinkage=float(raw["shrinkage"]),
            trees=[_node_from_dict(t) for t in raw["trees"]],
            feature_names=names,
            depth=int(raw["depth"]),
            n_min=int(raw["n_min"]),
        )
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n"
    )


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))

"""Model zoo: mean baseline, linear family, trees, and tree ensembles."""

from .base import DesignMatrix, NullModel, design_from_dataset, fit_null, predict
from .ensemble import FittedForest, FittedGBM, fit_forest, fit_gbm, resolve_workers
from .linear import (
    FittedLinear,
    fit_lasso,
    fit_ols,
    fit_ridge,
    lasso_lambda_max,
    soft_threshold,
)
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .tree import FittedTree, TreeNode, count_nodes, fit_tree, tree_apply

__all__ = [
    "DesignMatrix",
    "FittedForest",
    "FittedGBM",
    "FittedLinear",
    "FittedTree",
    "NullModel",
    "TreeNode",
    "count_nodes",
    "design_from_dataset",
    "fit_forest",
    "fit_gbm",
    "fit_lasso",
    "fit_null",
    "fit_ols",
    "fit_ridge",
    "fit_tree",
    "lasso_lambda_max",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "resolve_workers",
    "save_model",
    "soft_threshold",
    "tree_apply",
]

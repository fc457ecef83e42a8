"""panelfit: county-level panel regression with repeated-holdout model comparison."""

__version__ = "0.1.0"

from .datastore import (
    ColumnSpec,
    Dataset,
    SplitPlan,
    drop_sparse_columns,
    join_on_keys,
    load_csv,
    load_dataset,
    make_split_plan,
    normalize_rate,
    partition_by_urbanization,
    prune_correlated,
    read_schema,
    write_schema,
)
from .errors import (
    ConvergenceError,
    DuplicateKeyError,
    PanelfitError,
    RankDeficientError,
    SchemaError,
)
from .harness import (
    ExperimentReport,
    ModelResult,
    ModelSpec,
    default_model_zoo,
    improvement_vs_null,
    render_report,
    run_experiment,
    select_final_model,
)
from .interpret import (
    partial_dependence,
    qq_residuals,
    top_k,
    variable_importance,
)
from .learners import (
    DesignMatrix,
    design_from_dataset,
    fit_forest,
    fit_gbm,
    fit_lasso,
    fit_null,
    fit_ols,
    fit_ridge,
    fit_tree,
    load_model,
    predict,
    save_model,
)
from .metrics import (
    MetricTriple,
    mae,
    normal_quantile,
    pearson,
    r_squared,
    rmse,
)
from .synthgen import PanelConfig, generate, inject_missing

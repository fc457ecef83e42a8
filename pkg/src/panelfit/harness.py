"""Repeated-holdout model comparison and report rendering.

For every plan iteration each model trains on the 80% side and is scored
on both sides; per-iteration metrics are averaged into one row per
model. A model that fails mid-run loses its row (with the error
recorded) without aborting the experiment.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .datastore import Dataset, SplitPlan
from .errors import PanelfitError
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
)
from .metrics import MetricTriple, mae, r_squared, rmse
from .seeds import mix64

MODEL_KINDS = ("null", "ols", "ridge", "lasso", "tree", "forest", "gbm")

# Weight on in-sample RMSE in the selection score. Out-of-sample accuracy
# dominates, but a model that predicts marginally better while fitting the
# training data far worse should not win on that margin alone.
IN_SAMPLE_WEIGHT = 0.2

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Name, kind, and hyperparameters of one model entry."""

    name: str
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass
class ModelResult:
    """One report row: averaged metrics plus the per-iteration raw values."""

    name: str
    kind: str | None
    in_sample: MetricTriple | None
    out_of_sample: MetricTriple | None
    iteration_in: tuple[MetricTriple, ...] = ()
    iteration_out: tuple[MetricTriple, ...] = ()
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class ExperimentReport:
    dataset_id: str
    seed: int
    iterations: int
    results: list[ModelResult]
    test_fraction: float | None = None

    def row(self, name: str) -> ModelResult:
        for r in self.results:
            if r.name == name:
                return r
        raise ValueError(f"no model named {name!r} in report")

    @classmethod
    def from_rows(cls, rows, dataset_id: str = "external",
                  seed: int = 0, iterations: int = 0) -> "ExperimentReport":
        """Build a report from already-averaged metric rows.

        ``rows`` holds (name, kind, in_sample, out_of_sample) tuples; the
        triples may come from any published comparison table, so rows for
        model families this package does not implement are fine.
        """
        results = [
            ModelResult(name=n, kind=k, in_sample=i, out_of_sample=o)
            for n, k, i, o in rows
        ]
        return cls(dataset_id=dataset_id, seed=seed, iterations=iterations,
                   results=results)


def fit_model(spec: ModelSpec, design: DesignMatrix, seed: int = 0):
    """Fit one model spec on a design matrix."""
    hp = spec.hyperparameters
    kind = spec.kind
    if kind == "null":
        return fit_null(design)
    if kind == "ols":
        return fit_ols(design)
    if kind == "ridge":
        return fit_ridge(design, lam=hp.get("lambda", 1.0))
    if kind == "lasso":
        return fit_lasso(design, lam=hp.get("lambda", 0.01))
    if kind == "tree":
        return fit_tree(design, n_min=hp.get("n_min", 5),
                        m_try=hp.get("m_try"), seed=seed,
                        max_depth=hp.get("max_depth"))
    if kind == "forest":
        return fit_forest(design, b=hp.get("b", 500), m_try=hp.get("m_try"),
                          n_min=hp.get("n_min", 5), seed=seed,
                          max_depth=hp.get("max_depth"),
                          workers=hp.get("workers"))
    if kind == "gbm":
        return fit_gbm(design, n_trees=hp.get("n_trees", 500),
                       depth=hp.get("depth", 3),
                       shrinkage=hp.get("shrinkage", 0.1),
                       n_min=hp.get("n_min", 1))
    raise ValueError(f"unknown model kind {kind!r}")


def _design_id(design: DesignMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(design.features).tobytes())
    h.update(np.ascontiguousarray(design.response).tobytes())
    return h.hexdigest()[:16]


def _model_base_seed(spec: ModelSpec, plan_seed: int) -> int:
    explicit = spec.hyperparameters.get("seed")
    if explicit is not None:
        return int(explicit)
    return mix64(plan_seed, zlib.crc32(spec.name.encode()))


def _triple(y, yhat) -> MetricTriple:
    return MetricTriple(r_squared=r_squared(y, yhat), rmse=rmse(y, yhat),
                        mae=mae(y, yhat))


def _average(triples, drop_r2: bool) -> MetricTriple:
    r2 = None if drop_r2 else float(np.mean([t.r_squared for t in triples]))
    return MetricTriple(
        r_squared=r2,
        rmse=float(np.mean([t.rmse for t in triples])),
        mae=float(np.mean([t.mae for t in triples])),
    )


def run_experiment(data, models: list[ModelSpec], plan: SplitPlan) -> ExperimentReport:
    """Score every model over every holdout iteration of the plan.

    ``data`` may be a Dataset (features + response columns) or a bare
    DesignMatrix. Baseline rows (kind "null") report their averaged
    r_squared as absent, per convention; the raw per-iteration values
    keep it.
    """
    if isinstance(data, Dataset):
        design = design_from_dataset(data)
        dataset_id = data.dataset_id()
    else:
        design = data
        dataset_id = _design_id(design)
    if plan.n_rows != design.n_rows:
        raise ValueError(
            f"plan covers {plan.n_rows} rows, dataset has {design.n_rows}"
        )
    names = [s.name for s in models]
    if len(set(names)) != len(names):
        raise ValueError("duplicate model names")

    results = []
    for spec in models:
        base = _model_base_seed(spec, plan.seed)
        tr_in: list[MetricTriple] = []
        tr_out: list[MetricTriple] = []
        error = None
        for it in range(plan.iterations):
            train = plan.train_indices(it)
            test = plan.test_indices(it)
            try:
                model = fit_model(spec, design.subset(train), mix64(base, it))
                pred_in = model.predict(design.features[train])
                pred_out = model.predict(design.features[test])
                tr_in.append(_triple(design.response[train], pred_in))
                tr_out.append(_triple(design.response[test], pred_out))
            except (PanelfitError, ValueError, np.linalg.LinAlgError) as exc:
                error = f"iteration {it}: {exc}"
                break
        if error is not None:
            results.append(ModelResult(name=spec.name, kind=spec.kind,
                                       in_sample=None, out_of_sample=None,
                                       error=error))
            continue
        drop_r2 = spec.kind == "null"
        results.append(ModelResult(
            name=spec.name,
            kind=spec.kind,
            in_sample=_average(tr_in, drop_r2),
            out_of_sample=_average(tr_out, drop_r2),
            iteration_in=tuple(tr_in),
            iteration_out=tuple(tr_out),
        ))
    return ExperimentReport(dataset_id=dataset_id, seed=plan.seed,
                            iterations=plan.iterations, results=results,
                            test_fraction=plan.test_fraction)


@dataclass(frozen=True)
class ImprovementVsNull:
    """Percent error reduction relative to the null row, per metric."""

    in_rmse_pct: float
    in_mae_pct: float
    out_rmse_pct: float
    out_mae_pct: float


def improvement_vs_null(report: ExperimentReport, name: str) -> ImprovementVsNull:
    """100 * (null - model) / null for RMSE and MAE, both sides."""
    null_rows = [r for r in report.results if r.kind == "null"]
    if not null_rows:
        raise ValueError("report has no null baseline row")
    null = null_rows[0]
    row = report.row(name)
    if row.failed or null.failed:
        raise ValueError("cannot compare failed rows")

    def pct(base: float, value: float) -> float:
        return 100.0 * (base - value) / base

    return ImprovementVsNull(
        in_rmse_pct=pct(null.in_sample.rmse, row.in_sample.rmse),
        in_mae_pct=pct(null.in_sample.mae, row.in_sample.mae),
        out_rmse_pct=pct(null.out_of_sample.rmse, row.out_of_sample.rmse),
        out_mae_pct=pct(null.out_of_sample.mae, row.out_of_sample.mae),
    )


@dataclass(frozen=True)
class SelectionResult:
    name: str
    ranking: tuple[tuple[str, float], ...]
    rationale: str


def selection_score(row: ModelResult) -> float:
    return row.out_of_sample.rmse + IN_SAMPLE_WEIGHT * row.in_sample.rmse


def select_final_model(report: ExperimentReport) -> SelectionResult:
    """Pick the best non-null model.

    Ranks by out-of-sample RMSE plus a 0.2-weighted in-sample RMSE, so
    predictive accuracy dominates but severe training-data misfit costs a
    model a narrow predictive edge. Ties resolve by out-of-sample RMSE,
    then in-sample RMSE, then name. Row order never matters.
    """
    candidates = [r for r in report.results
                  if r.kind != "null" and not r.failed and r.in_sample is not None]
    if len(candidates) < 2:
        raise ValueError("need at least two scored non-null models")
    ordered = sorted(
        candidates,
        key=lambda r: (selection_score(r), r.out_of_sample.rmse,
                       r.in_sample.rmse, r.name),
    )
    ranking = tuple((r.name, selection_score(r)) for r in ordered)
    best, runner = ordered[0], ordered[1]
    rationale = (
        f"{best.name} has the best combined score "
        f"(out-of-sample RMSE + {IN_SAMPLE_WEIGHT} * in-sample RMSE = "
        f"{selection_score(best):.6f}); runner-up {runner.name} at "
        f"{selection_score(runner):.6f}."
    )
    return SelectionResult(name=best.name, ranking=ranking, rationale=rationale)


# -- rendering -------------------------------------------------------------

def _fmt3(v) -> str:
    return "NA" if v is None else f"{v:.3f}"


def _fmt6(v) -> str:
    return "NA" if v is None else f"{v:.6f}"


def render_report(report: ExperimentReport, format: str = "markdown") -> str:
    """Render a report as ``markdown``, ``csv``, or ``json`` text."""
    if format == "markdown":
        return _render_markdown(report)
    if format == "csv":
        return _render_csv(report)
    if format == "json":
        return report_to_json(report)
    raise ValueError(f"unknown report format {format!r}")


def _render_markdown(report: ExperimentReport) -> str:
    lines = [
        "# Model comparison",
        "",
        f"dataset `{report.dataset_id}` | seed {report.seed} | "
        f"iterations {report.iterations}",
        "",
        "| # | Model | R2 (fit) | RMSE (fit) | MAE (fit) "
        "| R2 (pred) | RMSE (pred) | MAE (pred) |",
        "|--:|:------|--------:|--------:|--------:|--------:|--------:|--------:|",
    ]
    failures = []
    for i, r in enumerate(report.results, start=1):
        if r.failed:
            lines.append(f"| {i} | {r.name} | NA | NA | NA | NA | NA | NA |")
            failures.append(f"- {r.name} failed: {r.error}")
            continue
        a, b = r.in_sample, r.out_of_sample
        lines.append(
            f"| {i} | {r.name} | {_fmt3(a.r_squared)} | {_fmt3(a.rmse)} "
            f"| {_fmt3(a.mae)} | {_fmt3(b.r_squared)} | {_fmt3(b.rmse)} "
            f"| {_fmt3(b.mae)} |"
        )
    if failures:
        lines.extend(["", *failures])
    try:
        sel = select_final_model(report)
    except ValueError:
        sel = None
    if sel is not None:
        lines.extend(["", f"Selected model: **{sel.name}**. {sel.rationale}"])
    return "\n".join(lines) + "\n"


_CSV_COLUMNS = ["model", "kind", "in_r_squared", "in_rmse", "in_mae",
                "out_r_squared", "out_rmse", "out_mae", "error"]


def _render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_COLUMNS)
    for r in report.results:
        if r.failed:
            w.writerow([r.name, r.kind or "NA"] + ["NA"] * 6 + [r.error])
            continue
        a, b = r.in_sample, r.out_of_sample
        w.writerow([
            r.name, r.kind or "NA",
            _fmt6(a.r_squared), _fmt6(a.rmse), _fmt6(a.mae),
            _fmt6(b.r_squared), _fmt6(b.rmse), _fmt6(b.mae), "",
        ])
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    """Parse a CSV report back into row dicts (floats, None for NA)."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    for rec in reader:
        out: dict = {"model": rec["model"], "kind": rec["kind"],
                     "error": rec["error"] or None}
        for col in _CSV_COLUMNS[2:-1]:
            out[col] = None if rec[col] == "NA" else float(rec[col])
        rows.append(out)
    return rows


def _triple_to_obj(t: MetricTriple | None):
    if t is None:
        return None
    return {"r_squared": t.r_squared, "rmse": t.rmse, "mae": t.mae}


def _triple_from_obj(obj) -> MetricTriple | None:
    if obj is None:
        return None
    return MetricTriple(r_squared=obj["r_squared"], rmse=obj["rmse"],
                        mae=obj["mae"])


def report_to_json(report: ExperimentReport) -> str:
    payload = {
        "format_version": REPORT_FORMAT_VERSION,
        "dataset_id": report.dataset_id,
        "seed": report.seed,
        "iterations": report.iterations,
        "test_fraction": report.test_fraction,
        "models": [
            {
                "name": r.name,
                "kind": r.kind,
                "error": r.error,
                "in_sample": _triple_to_obj(r.in_sample),
                "out_of_sample": _triple_to_obj(r.out_of_sample),
                "per_iteration": {
                    "in": [_triple_to_obj(t) for t in r.iteration_in],
                    "out": [_triple_to_obj(t) for t in r.iteration_out],
                },
            }
            for r in report.results
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> ExperimentReport:
    raw = json.loads(text)
    if raw.get("format_version") != REPORT_FORMAT_VERSION:
        raise ValueError(f"unsupported report version {raw.get('format_version')!r}")
    results = [
        ModelResult(
            name=m["name"],
            kind=m["kind"],
            in_sample=_triple_from_obj(m["in_sample"]),
            out_of_sample=_triple_from_obj(m["out_of_sample"]),
            iteration_in=tuple(_triple_from_obj(t) for t in m["per_iteration"]["in"]),
            iteration_out=tuple(_triple_from_obj(t) for t in m["per_iteration"]["out"]),
            error=m["error"],
        )
        for m in raw["models"]
    ]
    return ExperimentReport(dataset_id=raw["dataset_id"], seed=raw["seed"],
                            iterations=raw["iterations"], results=results,
                            test_fraction=raw.get("test_fraction"))


def default_model_zoo() -> list[ModelSpec]:
    """The stock comparison line-up used when no models file is given."""
    return [
        ModelSpec("Null Model", "null"),
        ModelSpec("Linear Model", "ols"),
        ModelSpec("Ridge Regression", "ridge", {"lambda": 1.0}),
        ModelSpec("Lasso Regression", "lasso", {"lambda": 0.01}),
        ModelSpec("Regression Tree", "tree", {"n_min": 5}),
        ModelSpec("Random Forest", "forest", {"b": 100, "n_min": 5}),
        ModelSpec("Gradient Boosting", "gbm",
                  {"n_trees": 100, "depth": 3, "shrinkage": 0.1}),
    ]


def load_model_specs(path) -> list[ModelSpec]:
    """Read a models config file: a JSON list of name/kind/hyperparameters."""
    raw = json.loads(open(path).read())
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: expected a non-empty JSON list")
    specs = []
    for entry in raw:
        specs.append(ModelSpec(
            name=entry["name"],
            kind=entry["kind"],
            hyperparameters=dict(entry.get("hyperparameters", {})),
        ))
    return specs

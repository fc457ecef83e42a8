"""Command-line pipeline: synth -> ingest -> split -> evaluate -> interpret.

Every command takes --out and writes only inside it, finishing with an
atomically-written manifest.json. One --seed drives every randomized
stage through derived child seeds. Exit codes: 0 success, 2 bad input or
configuration, 3 model failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .datastore import (
    Dataset,
    drop_sparse_columns,
    join_on_keys,
    load_csv,
    load_dataset,
    make_split_plan,
    normalize_rate,
    partition_by_urbanization,
    prune_correlated,
    read_schema,
    write_lineage,
    write_schema,
    SplitPlan,
)
from .errors import ConvergenceError, PanelfitError, RankDeficientError
from .harness import (
    default_model_zoo,
    fit_model,
    load_model_specs,
    render_report,
    run_experiment,
    select_final_model,
)
from .interpret import (
    actual_vs_fitted,
    actual_vs_fitted_to_csv,
    importance_to_csv,
    partial_dependence,
    pdp_to_csv,
    qq_residuals,
    qq_to_csv,
    top_k,
    variable_importance,
)
from .learners import design_from_dataset, load_model, save_model
from .learners.ensemble import FittedForest
from .seeds import mix64
from .synthgen import PanelConfig, generate, split_tables

OK, USAGE_ERROR, MODEL_ERROR = 0, 2, 3


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def _record(outputs: list[str], out_dir: Path, path: Path) -> Path:
    outputs.append(str(path.relative_to(out_dir)))
    return path


# -- commands ---------------------------------------------------------------

def _cmd_synth(args, out_dir: Path, outputs: list[str]) -> int:
    y0, _, y1 = args.years.partition(":")
    cfg = PanelConfig(
        n_counties=args.counties,
        years=(int(y0), int(y1 or y0)),
        n_features=args.features,
        response_law=args.law,
        noise_sd=args.noise_sd,
        urban_fraction=args.urban_fraction,
        seed=args.seed,
    )
    panel = generate(cfg)
    counts, monthly, annual = split_tables(panel)
    for name, part in (("counts", counts), ("monthly", monthly),
                       ("annual", annual)):
        part.write_csv(_record(outputs, out_dir, out_dir / f"{name}.csv"),
                       schema_sidecar=False)
    master = list(panel.schema)
    write_schema(master, _record(outputs, out_dir, out_dir / "schema.txt"))
    return OK


def _cmd_ingest(args, out_dir: Path, outputs: list[str]) -> int:
    schema = read_schema(args.schema)
    by_name = {s.name: s for s in schema}
    tables = []
    for path in args.inputs:
        with open(path, newline="") as fh:
            header = [h.strip() for h in fh.readline().rstrip("\n").split(",")]
        missing = [h for h in header if h not in by_name]
        if missing:
            raise PanelfitError(f"{path}: columns not in schema: {missing}")
        tables.append(load_csv(path, [by_name[h] for h in header]))

    base_idx = [i for i, t in enumerate(tables)
                if any(s.kind == "count" for s in t.schema)]
    if len(base_idx) != 1:
        raise PanelfitError("exactly one input must carry the count column")
    merged = tables[base_idx[0]]
    for i, t in enumerate(tables):
        if i != base_idx[0]:
            merged = join_on_keys(merged, t)

    merged = normalize_rate(merged, per=args.per)
    merged = drop_sparse_columns(merged, max_missing_frac=args.max_missing_frac)
    merged = prune_correlated(merged, threshold=args.corr_threshold)

    merged.write_csv(_record(outputs, out_dir, out_dir / "dataset.csv"))
    outputs.append("dataset.schema.txt")
    write_lineage(merged, _record(outputs, out_dir, out_dir / "lineage.json"))
    return OK


def _cmd_split(args, out_dir: Path, outputs: list[str]) -> int:
    dataset = load_dataset(args.dataset, args.schema)
    has_flag = any(
        (s.kind == "binary-feature") or s.name.lower() == "urbanization"
        for s in dataset.schema
    )
    if has_flag:
        on, off = partition_by_urbanization(dataset)
        parts = [("urban", on), ("nonurban", off)]
    else:
        parts = [("all", dataset)]
    for i, (name, part) in enumerate(parts):
        part.write_csv(_record(outputs, out_dir, out_dir / f"{name}.csv"))
        outputs.append(f"{name}.schema.txt")
        plan = make_split_plan(part.n_rows, iterations=args.iterations,
                               test_fraction=args.test_fraction,
                               seed=mix64(args.seed, i))
        _write_atomic(
            _record(outputs, out_dir, out_dir / f"{name}.plan.json"),
            plan.to_json() + "\n",
        )
    return OK


def _cmd_evaluate(args, out_dir: Path, outputs: list[str]) -> int:
    dataset = load_dataset(args.dataset, args.schema)
    models = load_model_specs(args.models) if args.models else default_model_zoo()
    if args.plan:
        plan = SplitPlan.from_json(Path(args.plan).read_text())
        if plan.n_rows != dataset.n_rows:
            raise PanelfitError(
                f"plan covers {plan.n_rows} rows, dataset has {dataset.n_rows}"
            )
    else:
        plan = make_split_plan(dataset.n_rows, iterations=args.iterations,
                               test_fraction=args.test_fraction, seed=args.seed)

    report = run_experiment(dataset, models, plan)
    for fmt, fname in (("markdown", "report.md"), ("csv", "report.csv"),
                       ("json", "report.json")):
        _write_atomic(_record(outputs, out_dir, out_dir / fname),
                      render_report(report, fmt))

    failed = [r for r in report.results if r.failed]
    try:
        selection = select_final_model(report)
        _write_atomic(
            _record(outputs, out_dir, out_dir / "selection.json"),
            json.dumps(
                {"selected": selection.name, "rationale": selection.rationale,
                 "ranking": [list(r) for r in selection.ranking]},
                indent=2, sort_keys=True) + "\n",
        )
    except ValueError as exc:
        print(f"warning: no selection: {exc}", file=sys.stderr)

    # refit each surviving model on the full dataset for interpretation
    design = design_from_dataset(dataset)
    models_dir = out_dir / "models"
    models_dir.mkdir(exist_ok=True)
    refit_failed = False
    for spec in models:
        if any(r.name == spec.name and r.failed for r in report.results):
            continue
        try:
            model = fit_model(spec, design, seed=mix64(args.seed, plan.iterations))
            path = _record(outputs, out_dir, models_dir / f"{_slug(spec.name)}.json")
            save_model(model, path)
        except (PanelfitError, ValueError) as exc:
            print(f"warning: refit of {spec.name} failed: {exc}", file=sys.stderr)
            refit_failed = True

    if args.figures:
        from . import figures
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        figures.save_report_figure(
            report, _record(outputs, out_dir, fig_dir / "report_rmse.png"))

    return MODEL_ERROR if failed or refit_failed else OK


def _cmd_interpret(args, out_dir: Path, outputs: list[str]) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, args.schema)
    design = design_from_dataset(dataset)
    if design.feature_names != model.feature_names:
        raise PanelfitError(
            "dataset features do not match the model: "
            f"{design.feature_names} vs {model.feature_names}"
        )

    fig_dir = out_dir / "figures"
    if args.figures:
        from . import figures
        fig_dir.mkdir(exist_ok=True)

    ranking = None
    if isinstance(model, FittedForest):
        ranking = variable_importance(model)
        _write_atomic(_record(outputs, out_dir, out_dir / "importance.csv"),
                      importance_to_csv(ranking))
        if args.figures:
            from . import figures
            figures.save_importance_figure(
                top_k(ranking, min(15, len(ranking.entries))),
                _record(outputs, out_dir, fig_dir / "importance.png"))

    m = re.fullmatch(r"top(\d*)", args.features.strip())
    if m:
        if ranking is None:
            raise PanelfitError(
                "top-k feature selection needs a forest model with splits"
            )
        k = int(m.group(1) or 15)
        names = top_k(ranking, k).names()
    else:
        names = [n.strip() for n in args.features.split(",") if n.strip()]
        if not names:
            raise PanelfitError("no features requested")

    for name in names:
        curve = partial_dependence(model, design, name, grid_size=args.grid_size)
        _write_atomic(
            _record(outputs, out_dir, out_dir / f"pdp_{_slug(name)}.csv"),
            pdp_to_csv(curve))
        if args.figures:
            from . import figures
            figures.save_pdp_figure(
                curve, _record(outputs, out_dir, fig_dir / f"pdp_{_slug(name)}.png"))

    yhat = model.predict(design.features)
    qq = qq_residuals(design.response, yhat)
    _write_atomic(_record(outputs, out_dir, out_dir / "qq.csv"), qq_to_csv(qq))
    rho, table = actual_vs_fitted(design.response, yhat)
    _write_atomic(_record(outputs, out_dir, out_dir / "actual_vs_fitted.csv"),
                  actual_vs_fitted_to_csv(rho, table))
    if args.figures:
        from . import figures
        figures.save_qq_figure(qq, _record(outputs, out_dir, fig_dir / "qq.png"))
        figures.save_actual_vs_fitted_figure(
            rho, table,
            _record(outputs, out_dir, fig_dir / "actual_vs_fitted.png"))
    return OK


# -- wiring -----------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelfit",
        description="panel regression pipeline: generate, clean, compare, interpret",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic raw-table fixture")
    common(p)
    p.add_argument("--counties", type=int, default=10)
    p.add_argument("--years", default="2000:2003", help="FIRST:LAST inclusive")
    p.add_argument("--features", type=int, default=32)
    p.add_argument("--law", default="linear",
                   choices=["linear", "friedman", "step-interaction"])
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--urban-fraction", type=float, default=0.5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="join raw tables and clean the panel")
    common(p)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--per", type=float, default=100000.0)
    p.add_argument("--max-missing-frac", type=float, default=0.20)
    p.add_argument("--corr-threshold", type=float, default=0.9)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="partition by urbanization and plan holdouts")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("evaluate", help="compare models over repeated holdouts")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema")
    p.add_argument("--models", help="JSON list of model specs")
    p.add_argument("--plan", help="reuse an existing split plan")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_evaluate, figures=True)

    p = sub.add_parser("interpret", help="importance, dependence, diagnostics")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema")
    p.add_argument("--features", default="top15",
                   help='"topK" or comma-separated names')
    p.add_argument("--grid-size", type=int, default=51)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_interpret, figures=True)

    return parser


def _write_manifest(args, argv, out_dir: Path, outputs: list[str],
                    started: str, duration: float) -> None:
    manifest = {
        "command": args.command,
        "argv": argv,
        "seed": args.seed,
        "out_dir": str(out_dir),
        "version": __version__,
        "started_at": started,
        "duration_seconds": round(duration, 3),
        "outputs": sorted(outputs),
    }
    _write_atomic(out_dir / "manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = _build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.monotonic()
    out_dir = Path(args.out)
    outputs: list[str] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        code = args.func(args, out_dir, outputs)
    except (ConvergenceError, RankDeficientError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return MODEL_ERROR
    except (PanelfitError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    _write_manifest(args, argv, out_dir, outputs, started, time.monotonic() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())

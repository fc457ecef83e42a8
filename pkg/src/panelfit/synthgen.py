"""Synthetic county-month panels with a known response law.

Feature columns are uniform on [0, 1]: the leading block varies monthly,
the next block is annual (constant within a county-year), and a single
binary urbanization flag is static per county. The response rate follows
the configured law plus Gaussian noise; counts realize the rate against
county population. With noise_sd = 0 counts are exact expectations so the
law is identifiable; otherwise they are Poisson draws.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .datastore import ColumnSpec, Dataset, _lineage_step, _round_half_up
from .errors import SchemaError
from .seeds import mix64

LAWS = ("linear", "friedman", "step-interaction")


@dataclass(frozen=True)
class PanelConfig:
    n_counties: int = 10
    years: tuple[int, int] = (2000, 2015)
    n_features: int = 32
    response_law: str = "linear"
    noise_sd: float = 1.0
    urban_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_counties < 1:
            raise ValueError("n_counties must be positive")
        y0, y1 = self.years
        if y1 < y0:
            raise ValueError("years must be (first, last) with first <= last")
        if self.response_law not in LAWS:
            raise ValueError(f"unknown response law {self.response_law!r}")
        minimum = {"linear": 2, "friedman": 6, "step-interaction": 4}
        if self.n_features < minimum[self.response_law]:
            raise ValueError(
                f"{self.response_law} law needs at least "
                f"{minimum[self.response_law]} features"
            )
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if not 0 <= self.urban_fraction <= 1:
            raise ValueError("urban_fraction must be in [0, 1]")

    @property
    def n_rows(self) -> int:
        y0, y1 = self.years
        return self.n_counties * (y1 - y0 + 1) * 12


def _feature_names(cfg: PanelConfig) -> tuple[list[str], list[str]]:
    """(monthly, annual) feature names; one slot is reserved for the flag."""
    numeric = cfg.n_features - 1
    n_monthly = max(1, numeric // 3)
    monthly = [f"m{i + 1:02d}" for i in range(n_monthly)]
    annual = [f"a{i + 1:02d}" for i in range(numeric - n_monthly)]
    return monthly, annual


@dataclass(frozen=True)
class ResponseLaw:
    """The generating function behind a synthetic panel.

    ``evaluate`` maps feature columns to the noiseless rate, so tests can
    compare model output against the truth.
    """

    name: str
    drivers: tuple[str, ...]
    intercept: float = 0.0
    coefficients: dict | None = None

    def evaluate(self, columns) -> np.ndarray:
        if self.name == "linear":
            out = np.full_like(np.asarray(columns[self.drivers[0]], float),
                               self.intercept)
            for name, beta in self.coefficients.items():
                out = out + beta * np.asarray(columns[name], float)
            return out
        x = [np.asarray(columns[d], float) for d in self.drivers]
        if self.name == "friedman":
            return (10.0 * np.sin(np.pi * x[0] * x[1])
                    + 20.0 * (x[2] - 0.5) ** 2 + 10.0 * x[3] + 5.0 * x[4])
        # step-interaction
        s1, s2, s3 = (v > 0.5 for v in x)
        return 2.0 + 6.0 * s1 + 4.0 * s2 + 4.0 * s3 + 6.0 * (s1 & s2)


def response_law(cfg: PanelConfig) -> ResponseLaw:
    """The law a config generates under, with its drivers resolved."""
    monthly, annual = _feature_names(cfg)
    numeric = monthly + annual
    if cfg.response_law == "linear":
        names = numeric + ["urbanization"]
        scale = max(1, len(names) - 1)
        coefficients = {
            name: (1.0 if j % 2 == 0 else -1.0) * (1.0 - 0.4 * j / scale)
            for j, name in enumerate(names)
        }
        return ResponseLaw(name="linear", drivers=tuple(names),
                           intercept=20.0, coefficients=coefficients)
    if cfg.response_law == "friedman":
        return ResponseLaw(name="friedman", drivers=tuple(numeric[:5]))
    return ResponseLaw(name="step-interaction", drivers=tuple(numeric[:3]))


def generate(cfg: PanelConfig) -> Dataset:
    """Generate the full panel for a config, deterministically per seed."""
    monthly_names, annual_names = _feature_names(cfg)
    law = response_law(cfg)
    y0, y1 = cfg.years
    n_years = y1 - y0 + 1
    n_cy = cfg.n_counties * n_years
    n = cfg.n_rows

    counties = np.array([f"C{i + 1:03d}" for i in range(cfg.n_counties)],
                        dtype=object)
    county_col = np.repeat(counties, n_years * 12)
    year_col = np.tile(np.repeat(np.arange(y0, y1 + 1), 12), cfg.n_counties)
    month_col = np.tile(np.arange(1, 13), n_cy)

    # independent child streams per block keep the layout stable
    pop_rng = np.random.default_rng(mix64(cfg.seed, 1))
    urban_rng = np.random.default_rng(mix64(cfg.seed, 2))
    annual_rng = np.random.default_rng(mix64(cfg.seed, 3))
    monthly_rng = np.random.default_rng(mix64(cfg.seed, 4))
    noise_rng = np.random.default_rng(mix64(cfg.seed, 5))
    count_rng = np.random.default_rng(mix64(cfg.seed, 6))

    populations = pop_rng.integers(800_000, 3_200_000, cfg.n_counties)
    pop_col = np.repeat(populations, n_years * 12).astype(float)

    n_urban = _round_half_up(cfg.urban_fraction * cfg.n_counties)
    flags = np.zeros(cfg.n_counties)
    flags[urban_rng.permutation(cfg.n_counties)[:n_urban]] = 1.0
    urban_col = np.repeat(flags, n_years * 12)

    columns: dict[str, np.ndarray] = {
        "county": county_col, "year": year_col, "month": month_col,
        "population": pop_col, "urbanization": urban_col,
    }
    for name in annual_names:
        columns[name] = np.repeat(annual_rng.random(n_cy), 12)
    for name in monthly_names:
        columns[name] = monthly_rng.random(n)

    rate = law.evaluate(columns)
    if cfg.noise_sd > 0:
        rate = rate + noise_rng.normal(0.0, cfg.noise_sd, n)
    lam = rate * pop_col / 100000.0
    if cfg.noise_sd == 0:
        count = lam  # exact expectation: the law stays identifiable
    else:
        count = count_rng.poisson(np.maximum(lam, 0.0)).astype(float)
    columns["count"] = count

    schema = [
        ColumnSpec("county", "key", "static"),
        ColumnSpec("year", "key", "annual"),
        ColumnSpec("month", "key", "monthly"),
        ColumnSpec("count", "count", "monthly"),
        ColumnSpec("population", "population", "static"),
        *(ColumnSpec(m, "numeric-feature", "monthly") for m in monthly_names),
        *(ColumnSpec(a, "numeric-feature", "annual") for a in annual_names),
        ColumnSpec("urbanization", "binary-feature", "static"),
    ]
    ds = Dataset(schema=schema, columns={s.name: columns[s.name] for s in schema})
    params = asdict(cfg)
    params["years"] = list(params["years"])
    ds.lineage.append(_lineage_step("generate", params, []))
    return ds


def inject_missing(d: Dataset, column: str, fraction: float, seed: int = 0) -> Dataset:
    """Blank exactly round(fraction * n_rows) cells of one column.

    Key and response columns may not be targeted.
    """
    spec = d.spec(column)
    if spec.kind in ("key", "response"):
        raise ValueError(f"cannot inject missing into {spec.kind} column {column!r}")
    if not 0 <= fraction < 1:
        raise ValueError("fraction must be in [0, 1)")
    cells = _round_half_up(fraction * d.n_rows)
    idx = np.random.default_rng(seed).choice(d.n_rows, size=cells, replace=False)
    col = d.columns[column].astype(float).copy()
    col[idx] = np.nan
    columns = dict(d.columns)
    columns[column] = col
    out = Dataset(schema=list(d.schema), columns=columns)
    out.lineage = list(d.lineage) + [
        _lineage_step("inject_missing",
                      {"column": column, "fraction": fraction, "seed": seed,
                       "cells": int(cells)}, [])
    ]
    return out


def split_tables(d: Dataset) -> tuple[Dataset, Dataset, Dataset]:
    """Break a generated panel into raw ingest inputs.

    Returns (counts, monthly, annual): the counts table carries
    count + population per county-month, the monthly table the monthly
    features, and the annual table one row per county-year with the
    annual features and the urbanization flag.
    """
    by_kind = {s.name: s for s in d.schema}
    if "count" not in by_kind or "population" not in by_kind:
        raise SchemaError("expected generated panel with count and population")
    key3 = [by_kind["county"], by_kind["year"], by_kind["month"]]

    monthly_feats = [s for s in d.schema
                     if s.kind == "numeric-feature" and s.periodicity == "monthly"]
    annual_feats = [s for s in d.schema
                    if s.kind in ("numeric-feature", "binary-feature")
                    and s.periodicity in ("annual", "static")
                    and s.kind != "key"]

    counts = Dataset(
        schema=key3 + [by_kind["count"], by_kind["population"]],
        columns={s.name: d.columns[s.name]
                 for s in key3 + [by_kind["count"], by_kind["population"]]},
    )
    monthly = Dataset(
        schema=key3 + monthly_feats,
        columns={s.name: d.columns[s.name] for s in key3 + monthly_feats},
    )
    first_month = d.columns["month"] == 1
    annual_schema = [by_kind["county"], by_kind["year"]] + annual_feats
    annual = Dataset(
        schema=annual_schema,
        columns={s.name: d.columns[s.name][first_month] for s in annual_schema},
    )
    step = _lineage_step("split_tables", {}, [])
    for part in (counts, monthly, annual):
        part.lineage = list(d.lineage) + [step]
    return counts, monthly, annual

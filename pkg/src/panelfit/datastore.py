"""Typed columnar store for county-month panels and the cleaning pipeline.

A Dataset keeps one numpy array per column plus a schema that says what
each column means (key, feature, count, population, response) and how
often it varies (monthly, annual, static). Cleaning steps return new
Dataset objects and append a lineage record stating what they did and
which columns they removed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DuplicateKeyError, SchemaError

KINDS = ("key", "numeric-feature", "binary-feature", "count", "population", "response")
PERIODICITIES = ("monthly", "annual", "static")
FEATURE_KINDS = ("numeric-feature", "binary-feature")
KEY_COLUMNS = ("county", "year", "month")

_KIND_ALIASES = {"numeric": "numeric-feature", "binary": "binary-feature"}
MISSING_TOKENS = ("", "NA")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _lineage_step(op: str, params: dict, removed_columns: list[str]) -> dict:
    return {
        "op": op,
        "params": params,
        "removed_columns": list(removed_columns),
        "timestamp": _utc_now(),
    }


@dataclass(frozen=True)
class ColumnSpec:
    """One column's name, role, and how often its value changes."""

    name: str
    kind: str
    periodicity: str

    def __post_init__(self):
        if not self.name:
            raise SchemaError("empty column name")
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.periodicity not in PERIODICITIES:
            raise SchemaError(
                f"unknown periodicity {self.periodicity!r} for {self.name!r}"
            )


@dataclass
class Dataset:
    """Schema plus one array per column, with a lineage trail."""

    schema: list[ColumnSpec]
    columns: dict[str, np.ndarray]
    lineage: list[dict] = field(default_factory=list)

    def __post_init__(self):
        names = [s.name for s in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if set(self.columns) != set(names):
            raise SchemaError("columns do not match schema names")
        lengths = {len(self.columns[n]) for n in names}
        if len(lengths) > 1:
            raise SchemaError(f"ragged columns: lengths {sorted(lengths)}")
        self._check_unique_keys()

    # -- basic accessors -------------------------------------------------

    @property
    def n_rows(self) -> int:
        if not self.schema:
            return 0
        return len(self.columns[self.schema[0].name])

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.schema]

    @property
    def key_names(self) -> list[str]:
        return [s.name for s in self.schema if s.kind == "key"]

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.schema if s.kind in FEATURE_KINDS]

    @property
    def response_name(self) -> str | None:
        for s in self.schema:
            if s.kind == "response":
                return s.name
        return None

    def spec(self, name: str) -> ColumnSpec:
        for s in self.schema:
            if s.name == name:
                return s
        raise SchemaError(f"no column named {name!r}")

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(f"no column named {name!r}")
        return self.columns[name]

    def _check_unique_keys(self):
        keys = self.key_names
        if not keys or self.n_rows == 0:
            return
        seen = set()
        cols = [self.columns[k] for k in keys]
        for row in zip(*cols):
            if row in seen:
                raise DuplicateKeyError(
                    f"duplicate key {tuple(row)!r} on ({', '.join(keys)})"
                )
            seen.add(row)

    def dataset_id(self) -> str:
        """Stable content hash over schema and column data."""
        h = hashlib.sha256()
        for s in self.schema:
            h.update(f"{s.name},{s.kind},{s.periodicity};".encode())
        for s in self.schema:
            col = self.columns[s.name]
            if col.dtype == object:
                h.update("\x1f".join(str(v) for v in col).encode())
            else:
                h.update(np.ascontiguousarray(col).tobytes())
        return h.hexdigest()[:16]

    # -- IO --------------------------------------------------------------

    def write_csv(self, path, schema_sidecar: bool = True) -> None:
        """Write the dataset as CSV; floats round-trip exactly, NaN -> NA."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            cols = [self.columns[n] for n in self.names]
            specs = list(self.schema)
            for i in range(self.n_rows):
                row = []
                for s, col in zip(specs, cols):
                    v = col[i]
                    if s.kind == "key":
                        # year/month keys serialize as plain ints
                        if s.name != "county" and float(v) == int(v):
                            row.append(str(int(v)))
                        else:
                            row.append(str(v))
                    elif isinstance(v, float) and math.isnan(v):
                        row.append("NA")
                    else:
                        row.append(repr(float(v)))
                writer.writerow(row)
        if schema_sidecar:
            write_schema(self.schema, schema_sidecar_path(path))


def schema_sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(p.suffix + ".schema.txt") if p.suffix != ".csv" \
        else p.with_name(p.stem + ".schema.txt")


def write_schema(schema: list[ColumnSpec], path) -> None:
    lines = [f"{s.name},{s.kind},{s.periodicity}" for s in schema]
    Path(path).write_text("\n".join(lines) + "\n")


def read_schema(path) -> list[ColumnSpec]:
    """Parse a schema file: one ``name,kind,periodicity`` line per column."""
    specs = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise SchemaError(f"{path}:{ln}: expected name,kind,periodicity")
        specs.append(ColumnSpec(*parts))
    if not specs:
        raise SchemaError(f"{path}: empty schema")
    return specs


def write_lineage(dataset: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset.lineage, indent=2, sort_keys=True) + "\n")


def load_csv(path, schema: list[ColumnSpec]) -> Dataset:
    """Read one CSV file into a typed Dataset.

    Parameters
    ----------
    path : path-like
        Comma-separated UTF-8 file with a header row.
    schema : list of ColumnSpec
        Must cover exactly the columns in the header (order-insensitive).

    Notes
    -----
    Empty cells and ``NA`` are missing; so is any unparseable numeric
    cell. Key cells must parse (county non-empty, year/month integer,
    month in 1..12). Duplicate key tuples raise DuplicateKeyError.
    """
    path = Path(path)
    by_name = {s.name: s for s in schema}
    if len(by_name) != len(schema):
        raise SchemaError("duplicate column names in schema")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if set(header) != set(by_name):
            missing = sorted(set(by_name) - set(header))
            extra = sorted(set(header) - set(by_name))
            raise SchemaError(
                f"{path}: header mismatch (missing {missing}, unexpected {extra})"
            )
        raw_cols: dict[str, list] = {name: [] for name in header}
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{ln}: expected {len(header)} fields")
            for name, cell in zip(header, row):
                raw_cols[name].append(cell.strip())

    columns: dict[str, np.ndarray] = {}
    for name, cells in raw_cols.items():
        s = by_name[name]
        if s.kind == "key":
            columns[name] = _parse_key_column(path, s, cells)
        else:
            columns[name] = _parse_numeric_column(cells)
    ordered = [by_name[h] for h in header]
    ds = Dataset(schema=ordered, columns=columns)
    ds.lineage.append(_lineage_step("load_csv", {"path": str(path)}, []))
    return ds


def _parse_key_column(path, s: ColumnSpec, cells: list[str]) -> np.ndarray:
    if s.name == "county":
        if any(c == "" for c in cells):
            raise SchemaError(f"{path}: empty county key")
        return np.array(cells, dtype=object)
    out = np.empty(len(cells), dtype=np.int64)
    for i, c in enumerate(cells):
        try:
            out[i] = int(c)
        except ValueError:
            raise SchemaError(f"{path}: bad {s.name} key {c!r}") from None
    if s.name == "month" and ((out < 1) | (out > 12)).any():
        raise SchemaError(f"{path}: month outside 1..12")
    return out


def _parse_numeric_column(cells: list[str]) -> np.ndarray:
    out = np.empty(len(cells), dtype=float)
    for i, c in enumerate(cells):
        if c in MISSING_TOKENS:
            out[i] = np.nan
            continue
        try:
            out[i] = float(c)
        except ValueError:
            out[i] = np.nan
    return out


def load_dataset(csv_path, schema_path=None) -> Dataset:
    """Load a dataset CSV with its schema (sidecar by default)."""
    schema_path = schema_path or schema_sidecar_path(csv_path)
    return load_csv(csv_path, read_schema(schema_path))


# -- joining -------------------------------------------------------------

def join_on_keys(left: Dataset, right: Dataset) -> Dataset:
    """Inner-join two datasets on their shared key columns.

    The left dataset must carry (county, year, month) keys. A right
    dataset keyed only by (county, year) holds annual values, which are
    replicated across that county-year's months. Non-key columns may not
    collide. An empty intersection is legal but warned about.
    """
    for k in KEY_COLUMNS:
        if k not in left.key_names:
            raise SchemaError(f"left dataset lacks key column {k!r}")
    rkeys = right.key_names
    if "county" not in rkeys or "year" not in rkeys:
        raise SchemaError("right dataset lacks (county, year) keys")
    on = [k for k in KEY_COLUMNS if k in rkeys]
    right_value_names = [n for n in right.names if n not in rkeys]
    clash = set(right_value_names) & {n for n in left.names}
    if clash:
        raise SchemaError(f"conflicting non-key columns: {sorted(clash)}")

    index: dict[tuple, int] = {}
    rcols = [right.columns[k] for k in on]
    for i, key in enumerate(zip(*rcols)):
        index[key] = i
    lcols = [left.columns[k] for k in on]
    keep: list[int] = []
    rrows: list[int] = []
    for i, key in enumerate(zip(*lcols)):
        j = index.get(key)
        if j is not None:
            keep.append(i)
            rrows.append(j)
    if not keep:
        warnings.warn("join produced no rows (empty key intersection)")

    keep_idx = np.asarray(keep, dtype=np.intp)
    take_idx = np.asarray(rrows, dtype=np.intp)
    columns = {n: left.columns[n][keep_idx] for n in left.names}
    for n in right_value_names:
        columns[n] = right.columns[n][take_idx]
    schema = list(left.schema) + [right.spec(n) for n in right_value_names]
    out = Dataset(schema=schema, columns=columns)
    out.lineage = list(left.lineage) + [
        _lineage_step(
            "join_on_keys",
            {"on": on, "added_columns": right_value_names, "rows": len(keep)},
            [],
        )
    ]
    return out


# -- cleaning ------------------------------------------------------------

def normalize_rate(d: Dataset, per: float = 100000.0) -> Dataset:
    """Replace count and population with a response ``rate = count/population*per``."""
    counts = [s.name for s in d.schema if s.kind == "count"]
    pops = [s.name for s in d.schema if s.kind == "population"]
    if len(counts) != 1 or len(pops) != 1:
        raise SchemaError("need exactly one count and one population column")
    if d.response_name is not None:
        raise SchemaError("dataset already has a response column")
    if per <= 0:
        raise ValueError("per must be positive")
    count = d.columns[counts[0]]
    pop = d.columns[pops[0]]
    if np.isnan(count).any() or np.isnan(pop).any():
        raise ValueError("missing count or population cells")
    if (pop <= 0).any():
        raise ValueError("population must be positive everywhere")
    schema = [s for s in d.schema if s.name not in (counts[0], pops[0])]
    schema.append(ColumnSpec("rate", "response", "monthly"))
    columns = {s.name: d.columns[s.name] for s in schema[:-1]}
    columns["rate"] = count / pop * per
    out = Dataset(schema=schema, columns=columns)
    out.lineage = list(d.lineage) + [
        _lineage_step("normalize_rate", {"per": per}, [counts[0], pops[0]])
    ]
    return out


def drop_sparse_columns(d: Dataset, max_missing_frac: float = 0.20) -> Dataset:
    """Drop feature columns with too much missing data; impute the rest.

    A feature column is removed when its missing fraction is strictly
    above ``max_missing_frac``; survivors have missing cells replaced by
    the column median of observed values.
    """
    if not 0 <= max_missing_frac < 1:
        raise ValueError("max_missing_frac must be in [0, 1)")
    if d.n_rows == 0:
        raise SchemaError("empty dataset")
    removed = []
    imputed: dict[str, int] = {}
    columns = dict(d.columns)
    for name in d.feature_names:
        col = d.columns[name]
        n_missing = int(np.isnan(col).sum())
        if n_missing / d.n_rows > max_missing_frac:
            removed.append(name)
        elif n_missing:
            filled = col.copy()
            filled[np.isnan(col)] = float(np.nanmedian(col))
            columns[name] = filled
            imputed[name] = n_missing
    if removed and len(removed) == len(d.feature_names):
        raise SchemaError("every feature column exceeds the missing-data cut-off")
    schema = [s for s in d.schema if s.name not in removed]
    columns = {s.name: columns[s.name] for s in schema}
    out = Dataset(schema=schema, columns=columns)
    out.lineage = list(d.lineage) + [
        _lineage_step(
            "drop_sparse_columns",
            {"max_missing_frac": max_missing_frac, "imputed_cells": imputed},
            removed,
        )
    ]
    return out


def prune_correlated(d: Dataset, threshold: float = 0.9) -> Dataset:
    """Greedily drop features that correlate with an earlier retained one.

    Constant columns go first (correlation is undefined for them). Then
    features are scanned in schema order; a feature is removed when its
    absolute Pearson correlation with any retained earlier feature is at
    or above ``threshold``. Earlier columns always win.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    feature_names = d.feature_names
    for name in feature_names:
        if np.isnan(d.columns[name]).any():
            raise ValueError(f"feature {name!r} has missing values; impute first")

    constant = [n for n in feature_names if np.ptp(d.columns[n]) == 0]
    retained: list[str] = []
    dropped: list[dict] = []
    for name in feature_names:
        if name in constant:
            continue
        col = d.columns[name]
        colc = col - col.mean()
        sn = math.sqrt(float(np.dot(colc, colc)))
        hit = None
        for other in retained:
            oc = d.columns[other] - d.columns[other].mean()
            rho = float(np.dot(colc, oc)) / (sn * math.sqrt(float(np.dot(oc, oc))))
            if abs(rho) >= threshold:
                hit = {"column": name, "against": other, "rho": rho}
                break
        if hit:
            dropped.append(hit)
        else:
            retained.append(name)

    removed = constant + [h["column"] for h in dropped]
    schema = [s for s in d.schema if s.name not in removed]
    columns = {s.name: d.columns[s.name] for s in schema}
    out = Dataset(schema=schema, columns=columns)
    out.lineage = list(d.lineage) + [
        _lineage_step(
            "prune_correlated",
            {"threshold": threshold, "constant": constant, "pairs": dropped},
            removed,
        )
    ]
    return out


def partition_by_urbanization(d: Dataset) -> tuple[Dataset, Dataset]:
    """Split rows on the binary urbanization flag; the flag column is dropped.

    Returns ``(flag_on, flag_off)`` datasets. The flag column is the one
    named ``urbanization`` (case-insensitive), else the single
    binary-feature column.
    """
    flag = None
    for s in d.schema:
        if s.kind in FEATURE_KINDS and s.name.lower() == "urbanization":
            flag = s.name
            break
    if flag is None:
        binaries = [s.name for s in d.schema if s.kind == "binary-feature"]
        if len(binaries) != 1:
            raise SchemaError(
                "cannot locate the urbanization flag: no column named "
                f"'urbanization' and {len(binaries)} binary-feature columns"
            )
        flag = binaries[0]
    col = d.columns[flag]
    if np.isnan(col).any() or not np.isin(col, (0.0, 1.0)).all():
        raise ValueError(f"non-binary values in {flag!r}")

    schema = [s for s in d.schema if s.name != flag]
    out = []
    for value, label in ((1.0, "on"), (0.0, "off")):
        mask = col == value
        if not mask.any():
            warnings.warn(f"urbanization == {int(value)} subset is empty")
        columns = {s.name: d.columns[s.name][mask] for s in schema}
        part = Dataset(schema=list(schema), columns=columns)
        part.lineage = list(d.lineage) + [
            _lineage_step(
                "partition_by_urbanization",
                {"column": flag, "flag": int(value), "subset": label,
                 "rows": int(mask.sum())},
                [flag],
            )
        ]
        out.append(part)
    return out[0], out[1]


# -- split plans ----------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    """Row indices held out for testing in each holdout iteration."""

    n_rows: int
    iterations: int
    test_fraction: float
    seed: int
    test_sets: tuple[tuple[int, ...], ...]

    def test_indices(self, iteration: int) -> np.ndarray:
        return np.asarray(self.test_sets[iteration], dtype=np.intp)

    def train_indices(self, iteration: int) -> np.ndarray:
        mask = np.ones(self.n_rows, dtype=bool)
        mask[self.test_indices(iteration)] = False
        return np.flatnonzero(mask)

    def to_json(self) -> str:
        payload = {
            "n_rows": self.n_rows,
            "iterations": self.iterations,
            "test_fraction": self.test_fraction,
            "seed": self.seed,
            "test_sets": [list(t) for t in self.test_sets],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        raw = json.loads(text)
        return cls(
            n_rows=raw["n_rows"],
            iterations=raw["iterations"],
            test_fraction=raw["test_fraction"],
            seed=raw["seed"],
            test_sets=tuple(tuple(int(i) for i in t) for t in raw["test_sets"]),
        )


def make_split_plan(
    n_rows: int,
    iterations: int = 30,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> SplitPlan:
    """Draw a repeated random holdout plan, repaired for full coverage.

    Each iteration holds out ``round(test_fraction * n_rows)`` distinct
    rows. When the total number of held-out slots allows it, rows that no
    test set picked are swapped in (searching from the last iteration
    backwards, evicting the most-covered row that stays covered), so the
    union of test sets touches every row. Plans too small to cover
    everything are returned as drawn, with a warning.
    """
    if n_rows < 5:
        raise ValueError("need at least 5 rows")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    k = _round_half_up(test_fraction * n_rows)
    if k < 1 or k >= n_rows:
        raise ValueError(f"test size {k} leaves no train or no test rows")

    rng = np.random.default_rng(seed)
    sets = [sorted(int(i) for i in rng.choice(n_rows, size=k, replace=False))
            for _ in range(iterations)]

    counts = np.zeros(n_rows, dtype=np.int64)
    for t in sets:
        counts[t] += 1
    uncovered = [int(i) for i in np.flatnonzero(counts == 0)]
    if uncovered and iterations * k < n_rows:
        warnings.warn(
            f"plan cannot cover all rows ({iterations} x {k} slots < {n_rows})"
        )
    elif uncovered:
        for row in uncovered:
            _swap_in(sets, counts, row)
        sets = [sorted(t) for t in sets]

    return SplitPlan(
        n_rows=n_rows,
        iterations=iterations,
        test_fraction=test_fraction,
        seed=seed,
        test_sets=tuple(tuple(t) for t in sets),
    )


def _swap_in(sets: list[list[int]], counts: np.ndarray, row: int) -> None:
    # Evict the most-covered row (ties: lower index) that stays covered
    # after eviction, searching the final iteration first.
    for t in reversed(sets):
        victims = [v for v in t if counts[v] >= 2]
        if not victims:
            continue
        victims.sort(key=lambda v: (-counts[v], v))
        victim = victims[0]
        t.remove(victim)
        t.append(row)
        counts[victim] -= 1
        counts[row] += 1
        return
    raise ValueError("coverage repair failed: no evictable row")

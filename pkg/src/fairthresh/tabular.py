"""CSV ingestion for real tabular benchmarks: schema, encoding, splitting.

A :class:`ColumnSchema` names each column and its role.  Numeric columns are
parsed as floats; categorical columns are one-hot encoded against a
vocabulary learned from training data (values unseen at fit time encode to
all zeros and are counted); rows with unparseable values are dropped and
counted.  Exactly one column is the binary label and exactly one the
protected attribute.  No dataset ships with the package: real data is
acquired through a fetch manifest (URL plus SHA-256) into a local cache.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import urllib.request
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset

DATA_DIR_ENV = "FAIRTHRESH_DATA_DIR"

COLUMN_KINDS = ("numeric", "categorical", "protected", "label")


@dataclass
class ColumnSpec:
    name: str
    kind: str
    positive_values: tuple = ()  # label / binary protected membership
    group_values: tuple = ()  # ordered values for a multi-class protected column
    vocabulary: tuple = ()  # fitted categories, categorical columns only

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        self.positive_values = tuple(self.positive_values)
        self.group_values = tuple(self.group_values)
        self.vocabulary = tuple(self.vocabulary)


@dataclass
class ColumnSchema:
    """Column roles for one CSV layout; ``has_header`` files are checked by name."""

    columns: list
    has_header: bool = True

    def __post_init__(self):
        kinds = [c.kind for c in self.columns]
        if kinds.count("label") != 1:
            raise ValueError("schema needs exactly one label column")
        if kinds.count("protected") != 1:
            raise ValueError("schema needs exactly one protected column")

    @property
    def fitted(self) -> bool:
        return all(c.vocabulary for c in self.columns if c.kind == "categorical")

    def feature_names(self) -> list:
        names = []
        for c in self.columns:
            if c.kind == "numeric":
                names.append(c.name)
            elif c.kind == "categorical":
                names.extend(f"{c.name}={v}" for v in c.vocabulary)
        return names

    def to_json(self) -> str:
        return json.dumps(
            {
                "has_header": self.has_header,
                "columns": [
                    {
                        "name": c.name,
                        "kind": c.kind,
                        "positive_values": list(c.positive_values),
                        "group_values": list(c.group_values),
                        "vocabulary": list(c.vocabulary),
                    }
                    for c in self.columns
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ColumnSchema":
        obj = json.loads(text)
        cols = [
            ColumnSpec(
                name=c["name"],
                kind=c["kind"],
                positive_values=tuple(c.get("positive_values", ())),
                group_values=tuple(c.get("group_values", ())),
                vocabulary=tuple(c.get("vocabulary", ())),
            )
            for c in obj["columns"]
        ]
        return cls(columns=cols, has_header=obj.get("has_header", True))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ColumnSchema":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class LoadReport:
    n_read: int = 0
    n_dropped: int = 0
    n_unseen_categories: int = 0
    feature_names: list = field(default_factory=list)


def read_rows(path, schema: ColumnSchema) -> list:
    """Raw parsed rows (lists of stripped strings), header checked if present."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [[cell.strip() for cell in row] for row in reader if row and any(row)]
    if not rows:
        raise ValueError("empty file")
    if schema.has_header:
        header = rows.pop(0)
        expected = [c.name for c in schema.columns]
        if header != expected:
            raise ValueError(f"header mismatch: expected {expected}, found {header}")
    width = len(schema.columns)
    return [r for r in rows if len(r) == width]


def fit_schema(schema: ColumnSchema, rows: list) -> ColumnSchema:
    """Learn categorical vocabularies from the given (training) rows."""
    for j, col in enumerate(schema.columns):
        if col.kind == "categorical":
            seen = sorted({r[j] for r in rows if r[j] not in ("", "?")})
            if not seen:
                raise ValueError(f"no usable values for categorical column {col.name!r}")
            col.vocabulary = tuple(seen)
    return schema


def encode_rows(rows: list, schema: ColumnSchema) -> tuple:
    """Encode parsed rows against a fitted schema; returns (Dataset, LoadReport)."""
    if not schema.fitted:
        raise ValueError("schema has unfitted categorical vocabularies")
    report = LoadReport(n_read=len(rows), feature_names=schema.feature_names())
    feats, groups, labels = [], [], []
    protected = next(c for c in schema.columns if c.kind == "protected")
    for row in rows:
        vec = []
        ok = True
        group = label = None
        unseen = 0
        for cell, col in zip(row, schema.columns):
            if col.kind != "numeric" and cell in ("", "?"):
                ok = False  # missing values drop the row, never impute
                break
            if col.kind == "numeric":
                try:
                    vec.append(float(cell))
                except ValueError:
                    ok = False
                    break
            elif col.kind == "categorical":
                onehot = [0.0] * len(col.vocabulary)
                if cell in col.vocabulary:
                    onehot[col.vocabulary.index(cell)] = 1.0
                else:
                    unseen += 1
                vec.extend(onehot)
            elif col.kind == "protected":
                if protected.group_values:
                    if cell not in protected.group_values:
                        ok = False
                        break
                    group = protected.group_values.index(cell)
                else:
                    group = 1 if cell in col.positive_values else 0
            else:  # label
                label = 1 if cell in col.positive_values else 0
        if not ok:
            report.n_dropped += 1
            continue
        report.n_unseen_categories += unseen
        feats.append(vec)
        groups.append(group)
        labels.append(label)
    if not feats:
        raise ValueError("zero usable rows")
    if report.n_unseen_categories:
        warnings.warn(
            f"{report.n_unseen_categories} categorical values outside the fitted "
            "vocabulary encoded as all-zeros"
        )
    data = Dataset(
        features=np.asarray(feats, dtype=np.float64),
        group=np.asarray(groups, dtype=np.int64),
        label=np.asarray(labels, dtype=np.int64),
    )
    return data, report


def load_csv(path, schema: ColumnSchema) -> tuple:
    """Parse and encode a CSV; fits vocabularies first if the schema is new.

    To avoid leaking evaluation data into the encoding, fit the schema on the
    training portion (``fit_schema``) and reuse the fitted schema here.
    """
    rows = read_rows(path, schema)
    if not schema.fitted:
        fit_schema(schema, rows)
    return encode_rows(rows, schema)


@dataclass
class SplitReport:
    sizes: tuple
    stratum_counts: tuple  # per split: (n_groups, 2) array or None


def split(data: Dataset, fractions: tuple, seed: int) -> tuple:
    """Seeded shuffle, then contiguous split into len(fractions) parts.

    Returns (datasets, report); a part receiving zero rows yields None.
    Parts missing a (group, label) stratum trigger a warning, not an error.
    """
    fr = [float(f) for f in fractions]
    if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError("fractions must be non-negative and sum to 1")
    n = data.n
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    bounds = [0]
    acc = 0.0
    for f in fr[:-1]:
        acc += f
        bounds.append(int(round(acc * n)))
    bounds.append(n)
    parts = []
    counts = []
    for i in range(len(fr)):
        idx = order[bounds[i] : bounds[i + 1]]
        if idx.size == 0:
            parts.append(None)
            counts.append(None)
            continue
        part = Dataset(
            features=data.features[idx],
            group=data.group[idx],
            label=data.label[idx],
            n_groups=data.n_groups,
        )
        parts.append(part)
        cnt = np.zeros((data.n_groups, 2), dtype=np.int64)
        np.add.at(cnt, (part.group, part.label), 1)
        counts.append(cnt)
        if np.any(cnt == 0):
            warnings.warn(f"split part {i} is missing a (group, label) stratum")
    report = SplitReport(
        sizes=tuple(bounds[i + 1] - bounds[i] for i in range(len(fr))),
        stratum_counts=tuple(counts),
    )
    return tuple(parts), report


# ---------------------------------------------------------------------------
# Export (round-trips bit-exactly through repr floats)
# ---------------------------------------------------------------------------


def export_csv(data: Dataset, path) -> None:
    """Write a dataset as x0..x{d-1},group,label with full-precision floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(data.dim)] + ["group", "label"])
        for i in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.features[i]]
                + [int(data.group[i]), int(data.label[i])]
            )


def export_schema(dim: int) -> ColumnSchema:
    """Schema matching :func:`export_csv` output (re-load support)."""
    cols = [ColumnSpec(name=f"x{j}", kind="numeric") for j in range(dim)]
    cols.append(ColumnSpec(name="group", kind="protected", positive_values=("1",)))
    cols.append(ColumnSpec(name="label", kind="label", positive_values=("1",)))
    return ColumnSchema(columns=cols)


# ---------------------------------------------------------------------------
# Fetching real data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FetchManifest:
    url: str
    sha256: str
    filename: str


def data_dir() -> Path:
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        return Path(root)
    return Path.home() / ".cache" / "fairthresh"


def fetch(manifest: FetchManifest, dest_dir: Optional[Path] = None, timeout: float = 60.0) -> Path:
    """Download (if absent) and checksum-verify a data file; returns its path."""
    dest = Path(dest_dir) if dest_dir else data_dir()
    dest.mkdir(parents=True, exist_ok=True)
    target = dest / manifest.filename
    if not target.exists():
        with urllib.request.urlopen(manifest.url, timeout=timeout) as resp:
            target.write_bytes(resp.read())
    digest = hashlib.sha256(target.read_bytes()).hexdigest()
    if digest != manifest.sha256:
        raise ValueError(
            f"checksum mismatch for {target}: expected {manifest.sha256}, got {digest}"
        )
    return target


# The census-income benchmark: headerless CSV, 14 feature columns plus the
# income label; the protected attribute is sex.
ADULT_MANIFEST = FetchManifest(
    url="https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data",
    sha256="5b00264637dbfec36bdeaab5676b0b309ff9eb788d63554ca0a249491c86603d",
    filename="adult.data",
)


def adult_schema() -> ColumnSchema:
    """Column roles for the census-income file (our own encoding choices)."""
    cat = lambda name: ColumnSpec(name=name, kind="categorical")
    num = lambda name: ColumnSpec(name=name, kind="numeric")
    return ColumnSchema(
        has_header=False,
        columns=[
            num("age"),
            cat("workclass"),
            num("fnlwgt"),
            cat("education"),
            num("education-num"),
            cat("marital-status"),
            cat("occupation"),
            cat("relationship"),
            cat("race"),
            ColumnSpec(name="sex", kind="protected", positive_values=("Male",)),
            num("capital-gain"),
            num("capital-loss"),
            num("hours-per-week"),
            cat("native-country"),
            ColumnSpec(name="income", kind="label", positive_values=(">50K",)),
        ],
    )

"""NSL-KDD ingestion, encoding schema, and train/test comparison statistics.

Raw records carry 41 features plus a label and a difficulty score. The
three categorical features expand to one indicator column per category
seen in training data; numeric features are min-max normalized with
bounds fit on training data. On the standard KDDTrain+ file this yields
122 encoded columns. Categories absent from training encode as all-zero
groups, and out-of-range test values are clipped into [0, 1].
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError

DATASET_MAGIC = "xnids-dataset/1"

CONTINUOUS = "continuous"
DISCRETE = "discrete"
BINARY = "binary"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str


# The 41 NSL-KDD flow features, in file order. Difficulty (field 43) is
# parsed and discarded; the label (field 42) is kept separately.
NSLKDD_FEATURES = (
    Feature("duration", DISCRETE),
    Feature("protocol_type", CATEGORICAL),
    Feature("service", CATEGORICAL),
    Feature("flag", CATEGORICAL),
    Feature("src_bytes", DISCRETE),
    Feature("dst_bytes", DISCRETE),
    Feature("land", BINARY),
    Feature("wrong_fragment", DISCRETE),
    Feature("urgent", DISCRETE),
    Feature("hot", DISCRETE),
    Feature("num_failed_logins", DISCRETE),
    Feature("logged_in", BINARY),
    Feature("num_compromised", DISCRETE),
    Feature("root_shell", BINARY),
    Feature("su_attempted", BINARY),
    Feature("num_root", DISCRETE),
    Feature("num_file_creations", DISCRETE),
    Feature("num_shells", DISCRETE),
    Feature("num_access_files", DISCRETE),
    Feature("num_outbound_cmds", DISCRETE),
    Feature("is_host_login", BINARY),
    Feature("is_guest_login", BINARY),
    Feature("count", DISCRETE),
    Feature("srv_count", DISCRETE),
    Feature("serror_rate", CONTINUOUS),
    Feature("srv_serror_rate", CONTINUOUS),
    Feature("rerror_rate", CONTINUOUS),
    Feature("srv_rerror_rate", CONTINUOUS),
    Feature("same_srv_rate", CONTINUOUS),
    Feature("diff_srv_rate", CONTINUOUS),
    Feature("srv_diff_host_rate", CONTINUOUS),
    Feature("dst_host_count", DISCRETE),
    Feature("dst_host_srv_count", DISCRETE),
    Feature("dst_host_same_srv_rate", CONTINUOUS),
    Feature("dst_host_diff_srv_rate", CONTINUOUS),
    Feature("dst_host_same_src_port_rate", CONTINUOUS),
    Feature("dst_host_srv_diff_host_rate", CONTINUOUS),
    Feature("dst_host_serror_rate", CONTINUOUS),
    Feature("dst_host_srv_serror_rate", CONTINUOUS),
    Feature("dst_host_rerror_rate", CONTINUOUS),
    Feature("dst_host_srv_rerror_rate", CONTINUOUS),
)

NORMAL_LABEL = "normal"


@dataclass
class RecordTable:
    """Column-oriented store of parsed flow records.

    Numeric features live in `numeric` keyed by name; categorical ones in
    `categorical` as string lists. Every row of the source had exactly
    len(features) + 2 fields (label and difficulty).
    """

    features: tuple
    numeric: dict
    categorical: dict
    labels: list
    difficulty: np.ndarray | None = None
    source_name: str = ""

    @property
    def n_rows(self):
        return len(self.labels)

    def column(self, name):
        if name in self.numeric:
            return self.numeric[name]
        return self.categorical[name]

    def take(self, indices):
        """Row subset as a new table (used for seeded subsampling)."""
        idx = np.asarray(indices)
        return RecordTable(
            features=self.features,
            numeric={k: v[idx] for k, v in self.numeric.items()},
            categorical={k: [v[i] for i in idx] for k, v in self.categorical.items()},
            labels=[self.labels[i] for i in idx],
            difficulty=None if self.difficulty is None else self.difficulty[idx],
            source_name=self.source_name,
        )


def parse_nslkdd(raw, source_name="") -> RecordTable:
    """Parse NSL-KDD text (str, bytes, or a line iterable) into a table.

    Raises ParseError naming the line and field on malformed input.
    Field order: 41 features, label, difficulty.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if isinstance(raw, str):
        lines = raw.splitlines()
    else:
        lines = [ln.rstrip("\r\n") for ln in raw]

    n_fields = len(NSLKDD_FEATURES) + 2
    rows = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        # tolerate a trailing comma
        if len(parts) == n_fields + 1 and parts[-1] == "":
            parts = parts[:-1]
        if len(parts) != n_fields:
            raise ParseError(f"line {lineno}: expected {n_fields} fields, got {len(parts)}")
        if parts[41] == "":
            raise ParseError(f"line {lineno}: empty label field")
        rows.append((lineno, parts))

    numeric = {}
    categorical = {}
    for j, feat in enumerate(NSLKDD_FEATURES):
        col = [parts[j] for _, parts in rows]
        if feat.kind == CATEGORICAL:
            categorical[feat.name] = col
        else:
            try:
                numeric[feat.name] = np.array(col, dtype=np.float64)
            except ValueError:
                for (lineno, parts) in rows:
                    try:
                        float(parts[j])
                    except ValueError:
                        raise ParseError(
                            f"line {lineno}: field '{feat.name}' is not numeric: "
                            f"{parts[j]!r}") from None
                raise

    labels = [parts[41] for _, parts in rows]
    try:
        difficulty = np.array([int(float(parts[42])) for _, parts in rows], dtype=np.int64)
    except ValueError:
        for (lineno, parts) in rows:
            try:
                float(parts[42])
            except ValueError:
                raise ParseError(
                    f"line {lineno}: field 'difficulty' is not numeric: "
                    f"{parts[42]!r}") from None
        raise

    return RecordTable(
        features=NSLKDD_FEATURES,
        numeric=numeric,
        categorical=categorical,
        labels=labels,
        difficulty=difficulty,
        source_name=source_name,
    )


@dataclass
class FeatureSchema:
    """Frozen encoding contract fit on training data."""

    features: tuple
    vocab: dict                 # categorical feature -> ordered category list
    encoded_columns: list       # 122 names for the standard schema
    col_min: np.ndarray
    col_max: np.ndarray
    # derived lookup tables
    groups: dict = field(default_factory=dict)   # cat feature -> (start, size)
    column_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.column_index:
            self.column_index = {c: i for i, c in enumerate(self.encoded_columns)}

    @property
    def n_encoded(self):
        return len(self.encoded_columns)

    def schema_id(self) -> str:
        payload = {
            "features": [[f.name, f.kind] for f in self.features],
            "vocab": {k: list(v) for k, v in self.vocab.items()},
            "encoded_columns": list(self.encoded_columns),
            "col_min": [float(v) for v in self.col_min],
            "col_max": [float(v) for v in self.col_max],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def group_of(self, column_name):
        """Owning categorical feature for a one-hot column, else None."""
        for feat, (start, size) in self.groups.items():
            idx = self.column_index[column_name]
            if start <= idx < start + size:
                return feat
        return None

    def decode_row(self, encoded_row):
        """Map an encoded row back to per-feature values for display.

        Numeric values invert the min-max transform; one-hot groups map to
        the active category name or None when the whole group is zero.
        """
        out = {}
        for feat in self.features:
            if feat.kind == CATEGORICAL:
                start, size = self.groups[feat.name]
                seg = encoded_row[start : start + size]
                j = int(np.argmax(seg)) if size else 0
                out[feat.name] = self.vocab[feat.name][j] if size and seg[j] > 0.5 else None
            else:
                i = self.column_index[feat.name]
                lo, hi = self.col_min[i], self.col_max[i]
                out[feat.name] = float(encoded_row[i] * (hi - lo) + lo)
        return out


@dataclass
class EncodedMatrix:
    values: np.ndarray       # (n, n_encoded) float32 in [0, 1]
    labels: np.ndarray       # (n,) uint8, 0 = normal, 1 = attack
    raw_labels: list
    schema_id: str

    @property
    def n_rows(self):
        return self.values.shape[0]


def fit_schema(train: RecordTable) -> FeatureSchema:
    """Fit vocabularies and per-column bounds on a training table.

    Numeric columns keep their original relative order; one-hot groups are
    appended afterwards in feature order, each in first-appearance order.
    """
    if train.n_rows == 0:
        raise DataError("cannot fit a schema on an empty table")

    vocab = {}
    for feat in train.features:
        if feat.kind != CATEGORICAL:
            continue
        seen = dict.fromkeys(train.categorical[feat.name])  # ordered, dedup
        vocab[feat.name] = list(seen)

    encoded_columns = []
    col_min, col_max = [], []
    groups = {}
    for feat in train.features:
        if feat.kind == CATEGORICAL:
            continue
        col = train.numeric[feat.name]
        encoded_columns.append(feat.name)
        col_min.append(float(col.min()))
        col_max.append(float(col.max()))
    for feat in train.features:
        if feat.kind != CATEGORICAL:
            continue
        cats = vocab[feat.name]
        groups[feat.name] = (len(encoded_columns), len(cats))
        counts = {}
        for v in train.categorical[feat.name]:
            counts[v] = counts.get(v, 0) + 1
        for cat in cats:
            encoded_columns.append(f"{feat.name}_{cat}")
            col_min.append(1.0 if counts[cat] == train.n_rows else 0.0)
            col_max.append(1.0)

    return FeatureSchema(
        features=train.features,
        vocab=vocab,
        encoded_columns=encoded_columns,
        col_min=np.array(col_min),
        col_max=np.array(col_max),
        groups=groups,
    )


def encode(table: RecordTable, schema: FeatureSchema) -> EncodedMatrix:
    """Min-max normalize numerics and one-hot categoricals against a schema.

    Unseen categories produce all-zero groups; values outside the training
    range clip to [0, 1]; constant columns map to 0.
    """
    if tuple(f.name for f in table.features) != tuple(f.name for f in schema.features):
        raise DataError("table features do not match the schema")
    n = table.n_rows
    out = np.zeros((n, schema.n_encoded), dtype=np.float32)

    for feat in schema.features:
        if feat.kind == CATEGORICAL:
            start, _ = schema.groups[feat.name]
            index = {c: k for k, c in enumerate(schema.vocab[feat.name])}
            col = table.categorical[feat.name]
            for i, v in enumerate(col):
                k = index.get(v)
                if k is not None:
                    out[i, start + k] = 1.0
        else:
            j = schema.column_index[feat.name]
            lo, hi = schema.col_min[j], schema.col_max[j]
            col = table.numeric[feat.name]
            if hi > lo:
                out[:, j] = np.clip((col - lo) / (hi - lo), 0.0, 1.0)
            # constant training column -> 0

    labels = np.array([0 if lab == NORMAL_LABEL else 1 for lab in table.labels],
                      dtype=np.uint8)
    return EncodedMatrix(values=out, labels=labels, raw_labels=list(table.labels),
                         schema_id=schema.schema_id())


@dataclass
class ColumnStats:
    """Per-encoded-column statistics used by the perturbation explainers."""

    mean: np.ndarray
    std: np.ndarray
    group_freq: dict  # categorical feature -> per-category probabilities


def column_stats(matrix: EncodedMatrix, schema: FeatureSchema) -> ColumnStats:
    values = matrix.values.astype(np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    group_freq = {}
    for feat, (start, size) in schema.groups.items():
        counts = values[:, start : start + size].sum(axis=0)
        total = counts.sum()
        group_freq[feat] = counts / total if total > 0 else np.full(size, 1.0 / size)
    return ColumnStats(mean=mean, std=std, group_freq=group_freq)


# ---------------------------------------------------------------------------
# comparison summary


@dataclass
class DatasetSummary:
    tables: dict     # side name -> {"rows": int, "features": {...}, "labels": {...}}

    def as_dict(self):
        return self.tables


def summarize_compare(train: RecordTable, test: RecordTable,
                      names=("train", "test")) -> DatasetSummary:
    """Side-by-side per-feature statistics and label distributions."""
    return DatasetSummary(tables={
        names[0]: _summarize_table(train),
        names[1]: _summarize_table(test),
    })


def _summarize_table(table: RecordTable):
    feats = {}
    for feat in table.features:
        if feat.kind == CATEGORICAL:
            col = table.categorical[feat.name]
            counts = {}
            for v in col:
                counts[v] = counts.get(v, 0) + 1
            top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
            feats[feat.name] = {
                "kind": feat.kind,
                "count": len(col),
                "missing": 0,
                "distinct": len(counts),
                "top": [{"value": v, "count": c} for v, c in top],
            }
        else:
            col = table.numeric[feat.name]
            feats[feat.name] = {
                "kind": feat.kind,
                "count": int(col.size),
                "missing": 0,
                "distinct": int(np.unique(col).size),
                "mean": float(col.mean()) if col.size else 0.0,
                "std": float(col.std()) if col.size else 0.0,
                "min": float(col.min()) if col.size else 0.0,
                "max": float(col.max()) if col.size else 0.0,
            }
    label_counts = {}
    for lab in table.labels:
        label_counts[lab] = label_counts.get(lab, 0) + 1
    n = table.n_rows
    n_attack = sum(c for lab, c in label_counts.items() if lab != NORMAL_LABEL)
    return {
        "rows": n,
        "features": feats,
        "labels": {
            "by_value": dict(sorted(label_counts.items())),
            "normal": n - n_attack,
            "attack": n_attack,
            "attack_fraction": (n_attack / n) if n else 0.0,
        },
    }


# ---------------------------------------------------------------------------
# dataset artifact


def save_dataset(path, schema: FeatureSchema, splits: dict):
    """Write schema + encoded splits: JSON header, then per split the
    float32 little-endian row-major values followed by uint8 labels."""
    header = {
        "format_version": 1,
        "features": [[f.name, f.kind] for f in schema.features],
        "vocab": {k: list(v) for k, v in schema.vocab.items()},
        "encoded_columns": list(schema.encoded_columns),
        "col_min": [float(v) for v in schema.col_min],
        "col_max": [float(v) for v in schema.col_max],
        "splits": [
            {"name": name, "rows": m.n_rows, "raw_labels": list(m.raw_labels)}
            for name, m in splits.items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write((DATASET_MAGIC + "\n").encode())
        blob = json.dumps(header, sort_keys=True).encode()
        fh.write(struct.pack("<q", len(blob)))
        fh.write(blob)
        for m in splits.values():
            fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(m.labels, dtype=np.uint8).tobytes())


def load_dataset(path):
    """Inverse of save_dataset: returns (schema, {split: EncodedMatrix})."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode().rstrip("\n")
        if magic != DATASET_MAGIC:
            raise DataError(f"not a dataset artifact: bad magic {magic!r}")
        (blob_len,) = struct.unpack("<q", fh.read(8))
        header = json.loads(fh.read(blob_len).decode())
        features = tuple(Feature(n, k) for n, k in header["features"])
        vocab = {k: list(v) for k, v in header["vocab"].items()}
        encoded_columns = list(header["encoded_columns"])
        schema = FeatureSchema(
            features=features,
            vocab=vocab,
            encoded_columns=encoded_columns,
            col_min=np.array(header["col_min"]),
            col_max=np.array(header["col_max"]),
            groups=_derive_groups(features, vocab, encoded_columns),
        )
        d = schema.n_encoded
        splits = {}
        for meta in header["splits"]:
            n = meta["rows"]
            raw = fh.read(n * d * 4)
            lab = fh.read(n)
            if len(raw) != n * d * 4 or len(lab) != n:
                raise DataError("dataset artifact truncated")
            values = np.frombuffer(raw, dtype="<f4").reshape(n, d).copy()
            labels = np.frombuffer(lab, dtype=np.uint8).copy()
            splits[meta["name"]] = EncodedMatrix(
                values=values, labels=labels,
                raw_labels=list(meta["raw_labels"]),
                schema_id=schema.schema_id(),
            )
    return schema, splits


def _derive_groups(features, vocab, encoded_columns):
    groups = {}
    cursor = sum(1 for f in features if f.kind != CATEGORICAL)
    for feat in features:
        if feat.kind == CATEGORICAL:
            size = len(vocab[feat.name])
            groups[feat.name] = (cursor, size)
            cursor += size
    return groups

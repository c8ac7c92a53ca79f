"""Dataset parsing, run-log CSV emission, and run configuration files.

The run log is a CSV with `# key = value` comment lines carrying the full
resolved configuration, followed by a fixed column header and one row per
epoch (or logging interval).  Floats are printed with 17 significant digits
so a parse of the emitted file reproduces every value bit-exactly.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

CSV_COLUMNS = ("method", "schedule", "seed", "epoch", "oracle_units",
               "wall_ms", "gap_last", "gap_ergodic")

TRUNCATION_MARKER = "# truncated = true"

DATA_DIR_ENV = "SVRAPD_DATA_DIR"


class DataError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class SparseDataset:
    n_samples: int
    n_features: int
    rows: list
    labels: np.ndarray

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_samples, self.n_features))
        for r, (idx, vals) in enumerate(self.rows):
            dense[r, idx] = vals
        return dense


def parse_libsvm(reader, n_features: int | None = None) -> SparseDataset:
    """Parse `<label> <idx>:<val> ...` lines (1-based indices on disk).

    Indices must be strictly increasing within a row; the feature count is
    the largest index seen unless overridden.  Binary labels are normalized
    to -1/+1 (0/1 inputs map to -1/+1, as do 1/2-style encodings).
    """
    if isinstance(reader, str):
        reader = io.StringIO(reader)
    rows = []
    raw_labels = []
    max_index = 0
    for lineno, line in enumerate(reader, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            raw_labels.append(float(tokens[0]))
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad label {tokens[0]!r}") from exc
        idx = []
        vals = []
        last = 0
        for tok in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise DataError(f"line {lineno}: malformed token {tok!r}")
            try:
                pos = int(head)
                val = float(tail)
            except ValueError as exc:
                raise DataError(f"line {lineno}: malformed token {tok!r}") from exc
            if pos <= 0:
                raise DataError(f"line {lineno}: index {pos} is not 1-based positive")
            if pos <= last:
                raise DataError(f"line {lineno}: indices not strictly increasing")
            last = pos
            idx.append(pos - 1)
            vals.append(val)
        max_index = max(max_index, last)
        rows.append((np.array(idx, dtype=int), np.array(vals, dtype=float)))
    if not rows:
        raise DataError("empty dataset")
    labels = _normalize_labels(np.array(raw_labels))
    count = n_features if n_features is not None else max_index
    if count < max_index:
        raise DataError(f"feature override {count} below max index {max_index}")
    return SparseDataset(len(rows), count, rows, labels)


def _normalize_labels(raw: np.ndarray) -> np.ndarray:
    distinct = sorted(set(raw.tolist()))
    if len(distinct) != 2:
        if distinct in ([-1.0], [1.0]):
            return raw.copy()
        raise DataError(f"expected two label values, got {distinct}")
    lo, hi = distinct
    return np.where(raw == hi, 1.0, -1.0)


def write_libsvm(dataset: SparseDataset, sink) -> None:
    """Inverse of parse_libsvm, for round-trip tests and subsample exports."""
    for label, (idx, vals) in zip(dataset.labels, dataset.rows):
        parts = [f"{'+1' if label > 0 else '-1'}"]
        parts += [f"{i + 1}:{v:.17g}" for i, v in zip(idx, vals)]
        sink.write(" ".join(parts) + "\n")


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


class RunLogWriter:
    """Single-writer CSV sink: comment-style metadata, then epoch rows."""

    def __init__(self, sink):
        self._sink = sink
        self._header_written = False

    def header(self, meta: dict) -> None:
        if self._header_written:
            raise DataError("header already written")
        for key in sorted(meta):
            self._sink.write(f"# {key} = {format_value(meta[key])}\n")
        self._sink.write(",".join(CSV_COLUMNS) + "\n")
        self._header_written = True

    def row(self, method: str, schedule: str, seed: int, epoch: int,
            oracle_units: int, wall_ms: float, gap_last, gap_ergodic) -> None:
        if not self._header_written:
            raise DataError("write the header before rows")
        cells = (method, schedule, str(seed), str(epoch), str(oracle_units),
                 format_value(float(wall_ms)), format_value(gap_last),
                 format_value(gap_ergodic))
        self._sink.write(",".join(cells) + "\n")

    def truncation_marker(self) -> None:
        self._sink.write(TRUNCATION_MARKER + "\n")


def read_log(path_or_text):
    """Parse an emitted run log into (metadata, rows)."""
    if isinstance(path_or_text, str) and "\n" not in path_or_text:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = path_or_text
    meta: dict = {}
    rows: list[dict] = []
    truncated = False
    saw_columns = False
    for line in text.splitlines():
        if not line:
            continue
        if line == TRUNCATION_MARKER:
            truncated = True
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" = ")
            meta[key.strip()] = value.strip()
            continue
        cells = line.split(",")
        if not saw_columns:
            if tuple(cells) != CSV_COLUMNS:
                raise DataError(f"unexpected column header: {line!r}")
            saw_columns = True
            continue
        if len(cells) != len(CSV_COLUMNS):
            raise DataError(f"bad row width: {line!r}")
        rows.append({
            "method": cells[0],
            "schedule": cells[1],
            "seed": int(cells[2]),
            "epoch": int(cells[3]),
            "oracle_units": int(cells[4]),
            "wall_ms": float(cells[5]),
            "gap_last": float(cells[6]) if cells[6] else None,
            "gap_ergodic": float(cells[7]) if cells[7] else None,
        })
    if not saw_columns:
        raise DataError("no column header found")
    meta["truncated"] = truncated
    return meta, rows


METHODS = ("svr-apd-const", "svr-apd-poly", "smd", "smp", "apd-full")

_CONFIG_FIELDS: dict[str, tuple] = {
    # name: (type, default)
    "method": (str, "svr-apd-const"),
    "dataset": (str, "synthetic"),
    "rho": (float, 50.0),
    "box": (float, 10.0),
    "lambda_max": (float, 100.0),
    "t_inner": (float, 1.0),
    "gbar_x": (str, "auto"),
    "gbar_y": (str, "auto"),
    "epochs": (int, 64),
    "seed": (int, 0),
    "budget": (str, "none"),
    "out": (str, "run.csv"),
    "subsample": (int, 2000),
    "subsample_seed": (int, 0),
    "lipschitz_mode": (str, "analytic"),
    "l_xx": (float, -1.0),
    "l_xy": (float, -1.0),
    "l_yx": (float, -1.0),
    "l_yy": (float, -1.0),
    "empirical_samples": (int, 600),
    "empirical_seed": (int, 0),
    "empirical_safety": (float, 1.2),
    "synthetic_n": (int, 200),
    "synthetic_m": (int, 20),
    "synthetic_seed": (int, 1),
    "feature_scale": (float, 1.0),
    "label_noise": (float, 0.2),
    "scale_features": (str, "false"),
    "reference_tol": (float, 1e-9),
    "step": (str, "grid"),
    "log_interval": (int, 0),
}


@dataclass
class RunConfig:
    method: str = "svr-apd-const"
    dataset: str = "synthetic"
    rho: float = 50.0
    box: float = 10.0
    lambda_max: float = 100.0
    t_inner: float = 1.0
    gbar_x: str = "auto"
    gbar_y: str = "auto"
    epochs: int = 64
    seed: int = 0
    budget: str = "none"
    out: str = "run.csv"
    subsample: int = 2000
    subsample_seed: int = 0
    lipschitz_mode: str = "analytic"
    l_xx: float = -1.0
    l_xy: float = -1.0
    l_yx: float = -1.0
    l_yy: float = -1.0
    empirical_samples: int = 600
    empirical_seed: int = 0
    empirical_safety: float = 1.2
    synthetic_n: int = 200
    synthetic_m: int = 20
    synthetic_seed: int = 1
    feature_scale: float = 1.0
    label_noise: float = 0.2
    scale_features: str = "false"
    reference_tol: float = 1e-9
    step: str = "grid"
    log_interval: int = 0

    def budget_units(self) -> int | None:
        return None if self.budget.lower() == "none" else int(float(self.budget))

    def to_meta(self) -> dict:
        meta = {f"config.{f.name}": getattr(self, f.name) for f in fields(self)}
        meta["config_hash"] = self.digest()
        return meta

    def digest(self) -> str:
        blob = ";".join(f"{f.name}={format_value(getattr(self, f.name))}"
                        for f in fields(self))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "RunConfig":
        known = {f.name for f in fields(self)}
        for key in kw:
            if key not in known:
                raise ConfigError(f"unknown configuration key: {key}")
        return replace(self, **{k: _coerce(k, v) for k, v in kw.items()})


def _coerce(key: str, value):
    typ, _ = _CONFIG_FIELDS[key]
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Load `key = value` sections, then apply command-line overrides.

    Any section name is accepted (sections exist for organization only);
    duplicate or unknown keys are errors naming the key.
    """
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
            if text.strip() and not text.lstrip().startswith("["):
                text = "[run]\n" + text
            parser.read_string(text)
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate configuration key: {exc.option}") from exc
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for section in parser.sections():
            for key, value in parser.items(section):
                if key not in _CONFIG_FIELDS:
                    raise ConfigError(f"unknown configuration key: {key}")
                if key in values:
                    raise ConfigError(f"duplicate configuration key: {key}")
                values[key] = _coerce(key, value)
    config = RunConfig(**values)
    if overrides:
        config = config.with_overrides(**{k: v for k, v in overrides.items()
                                          if v is not None})
    if config.method not in METHODS:
        raise ConfigError(f"unknown method {config.method!r}; pick from {METHODS}")
    if config.lipschitz_mode not in ("analytic", "empirical", "manual"):
        raise ConfigError(f"unknown lipschitz_mode {config.lipschitz_mode!r}")
    return config


def data_dir() -> str:
    return os.environ.get(DATA_DIR_ENV, os.path.join(os.path.expanduser("~"), ".svrapd-data"))

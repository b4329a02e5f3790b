"""CSV ingestion, run configuration, and persistence of draws, summaries and reports."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .chains import DrawMatrix
from .multinomial import MultinomialData
from .poisson import PoissonData
from .prior import GaussianPrior


class ParseError(ValueError):
    """Bad input file; carries the 1-based data ``row`` and the ``column`` name."""

    def __init__(self, path, message: str, row: int | None = None, column: str | None = None):
        self.path = str(path)
        self.row = row
        self.column = column
        where = [self.path]
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}")


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, "empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    for i, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise ParseError(path, f"expected {len(header)} fields, found {len(r)}", row=i)
    return header, rows


def _number(path, cell: str, row: int, column: str) -> float:
    try:
        val = float(cell)
    except ValueError:
        raise ParseError(path, f"non-numeric value {cell!r}", row, column) from None
    if not math.isfinite(val):
        raise ParseError(path, f"non-finite value {cell!r}", row, column)
    return val


def _count(path, cell: str, row: int, column: str) -> int:
    val = _number(path, cell, row, column)
    if val < 0 or val != int(val):
        raise ParseError(path, f"count must be a non-negative integer, got {cell!r}", row, column)
    return int(val)


def read_poisson_csv(path, require_y: bool = True) -> tuple[PoissonData, list[str]]:
    """Read a Poisson dataset; returns the data and the design column names.

    Column ``y`` holds counts, optional ``exposure`` the exposures (default 1),
    and every other column, in header order, is a design column. An intercept
    must be supplied explicitly as a column of ones. With ``require_y=False``
    a missing ``y`` column reads as all-zero counts (prediction rows).
    """
    header, rows = _read_table(path)
    if "y" not in header and require_y:
        raise ParseError(path, "missing required column 'y'")
    iy = header.index("y") if "y" in header else None
    ie = header.index("exposure") if "exposure" in header else None
    design_cols = [j for j, h in enumerate(header) if j not in (iy, ie)]
    if not design_cols:
        raise ParseError(path, "no design columns")
    if not rows:
        raise ParseError(path, "no data rows")
    y, expo, X = [], [], []
    for i, r in enumerate(rows, start=1):
        y.append(_count(path, r[iy], i, "y") if iy is not None else 0)
        if ie is not None:
            e = _number(path, r[ie], i, "exposure")
            if e <= 0:
                raise ParseError(path, f"exposure must be positive, got {r[ie]!r}", i, "exposure")
            expo.append(e)
        else:
            expo.append(1.0)
        X.append([_number(path, r[j], i, header[j]) for j in design_cols])
    return PoissonData(np.array(X), np.array(y), np.array(expo)), [header[j] for j in design_cols]


def write_poisson_csv(data: PoissonData, path, names: list[str] | None = None, with_exposure: bool = True):
    names = names or [f"x{k}" for k in range(data.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + (["exposure"] if with_exposure else []) + names)
        for i in range(data.n):
            lead = [int(data.counts[i])] + ([repr(float(data.exposures[i]))] if with_exposure else [])
            w.writerow(lead + [repr(float(v)) for v in data.design[i]])


def read_multinomial_csv(path) -> tuple[MultinomialData, list[str], list[str]]:
    """Read long-format multinomial data.

    Columns: ``obs_id``, ``category`` (0 is the baseline), ``count``, optional
    ``trials``, and covariate columns (ignored on baseline rows). Each
    ``obs_id`` needs categories ``0..p_i`` exactly once. If ``trials`` is
    given it must agree across the observation's rows and equal the count
    total. Returns the data, the covariate names and the obs ids in order.
    """
    header, rows = _read_table(path)
    for col in ("obs_id", "category", "count"):
        if col not in header:
            raise ParseError(path, f"missing required column {col!r}")
    io_, ic, in_ = header.index("obs_id"), header.index("category"), header.index("count")
    it = header.index("trials") if "trials" in header else None
    cov_cols = [j for j, h in enumerate(header) if j not in (io_, ic, in_, it)]
    if not cov_cols:
        raise ParseError(path, "no covariate columns")
    groups: dict[str, dict] = {}
    for i, r in enumerate(rows, start=1):
        oid = r[io_].strip()
        cat = _count(path, r[ic], i, "category")
        cnt = _count(path, r[in_], i, "count")
        g = groups.setdefault(oid, {"cats": {}, "trials": None, "first_row": i})
        if cat in g["cats"]:
            raise ParseError(path, f"obs_id {oid!r} repeats category {cat}", i, "category")
        x = None if cat == 0 else [_number(path, r[j], i, header[j]) for j in cov_cols]
        g["cats"][cat] = (cnt, x)
        if it is not None:
            t = _count(path, r[it], i, "trials")
            if g["trials"] is not None and g["trials"] != t:
                raise ParseError(path, f"obs_id {oid!r} has inconsistent trials", i, "trials")
            g["trials"] = t
    counts, covs = [], []
    for oid, g in groups.items():
        cats = sorted(g["cats"])
        if cats != list(range(len(cats))) or len(cats) < 2:
            raise ParseError(path, f"obs_id {oid!r} must have categories 0..p_i with p_i >= 1", g["first_row"])
        c = np.array([g["cats"][k][0] for k in cats])
        if g["trials"] is not None and c.sum() != g["trials"]:
            raise ParseError(path, f"obs_id {oid!r}: counts sum to {c.sum()}, trials is {g['trials']}", g["first_row"], "trials")
        if c.sum() < 1:
            raise ParseError(path, f"obs_id {oid!r} has no trials", g["first_row"], "count")
        counts.append(c)
        covs.append(np.array([g["cats"][k][1] for k in cats[1:]]))
    return MultinomialData(counts, covs), [header[j] for j in cov_cols], list(groups)


def write_multinomial_csv(data: MultinomialData, path, names: list[str] | None = None):
    names = names or [f"x{k}" for k in range(data.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["obs_id", "category", "count", "trials"] + names)
        for i, (c, x) in enumerate(zip(data.counts, data.covariates)):
            m = int(c.sum())
            w.writerow([i, 0, int(c[0]), m] + [""] * len(names))
            for k in range(1, len(c)):
                w.writerow([i, k, int(c[k]), m] + [repr(float(v)) for v in x[k - 1]])


# ---------------------------------------------------------------------------
# draws, summaries, reports

def write_draws(draws: DrawMatrix, path):
    """CSV with ``chain``, ``sweep`` and one column per coefficient.

    Floats are written with ``repr`` so :func:`read_draws` restores them exactly.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "sweep"] + list(draws.names))
        for c, s, row in zip(draws.chain, draws.sweep, draws.beta):
            w.writerow([int(c), int(s)] + [repr(float(v)) for v in row])


def read_draws(path) -> DrawMatrix:
    header, rows = _read_table(path)
    if header[:2] != ["chain", "sweep"]:
        raise ParseError(path, "draws file must start with columns chain, sweep")
    names = header[2:]
    chain = np.array([int(r[0]) for r in rows], dtype=np.int64)
    sweep = np.array([int(r[1]) for r in rows], dtype=np.int64)
    beta = np.array([[_number(path, v, i, names[j]) for j, v in enumerate(r[2:])]
                     for i, r in enumerate(rows, start=1)]).reshape(len(rows), len(names))
    return DrawMatrix(beta=beta, chain=chain, sweep=sweep, names=names)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def write_rows(rows: Iterable[dict], path):
    """Write dict rows as CSV (column order from the first row)."""
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def format_table(rows: Iterable[dict]) -> str:
    rows = [{k: _fmt(v) for k, v in r.items()} for r in rows]
    if not rows:
        return "(empty)\n"
    cols = list(rows[0])
    width = {c: max(len(c), *(len(r[c]) for r in rows)) for c in cols}
    lines = ["  ".join(c.rjust(width[c]) for c in cols)]
    lines += ["  ".join(r[c].rjust(width[c]) for c in cols) for r in rows]
    return "\n".join(lines) + "\n"


def write_summary(summary, path):
    """Write a :class:`ChainSummary` to ``path`` (CSV) and ``path`` with ``.txt``."""
    path = Path(path)
    rows = list(summary.rows())
    write_rows(rows, path)
    path.with_suffix(".txt").write_text(f"{summary.n_draws} draws\n" + format_table(rows))


def write_report(report, path, title: str = ""):
    """Write any report exposing ``rows()`` as CSV plus a readable ``.txt`` twin."""
    path = Path(path)
    rows = list(report.rows())
    write_rows(rows, path)
    head = f"{title}\n" if title else ""
    extra = ""
    if hasattr(report, "passed"):
        extra = f"max |z| = {report.max_abs_z:.3f}; {'PASS' if report.passed else 'FAIL'}\n"
    path.with_suffix(".txt").write_text(head + format_table(rows) + extra)


# ---------------------------------------------------------------------------
# configuration

MODELS = ("poisson-lambda", "poisson-exp", "multinomial-lambda")


@dataclass
class RunConfig:
    model: str = "poisson-lambda"
    data: str = ""
    prior_mean: str = "0"
    prior_precision: str = "0.01"
    burn_in: int = 1000
    keep: int = 1000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0
    out_dir: str = field(default_factory=lambda: os.environ.get("IDENTLINK_OUT_DIR", "out"))
    store_latents: bool = False
    init: str = "prior-draw"
    target_accept: float = 0.30
    initial_step: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")

    def prior(self, p: int, base_dir: str | Path = ".") -> GaussianPrior:
        """Build the prior for ``p`` coefficients.

        Each of ``prior_mean`` and ``prior_precision`` is a scalar (broadcast to
        the mean vector or the precision diagonal), a comma-separated list, or
        a path to a CSV file without header (vector or ``p x p`` matrix).
        """
        mean = _vector_or_file(self.prior_mean, p, base_dir, "prior_mean")
        prec = _precision_spec(self.prior_precision, p, base_dir)
        return GaussianPrior(mean, prec)


def _resolve(spec: str, base_dir) -> Path | None:
    cand = Path(spec)
    if not cand.is_absolute():
        cand = Path(base_dir) / cand
    return cand if cand.is_file() else None


def _vector_or_file(spec: str, p: int, base_dir, key: str) -> np.ndarray:
    path = _resolve(spec, base_dir)
    if path is not None:
        vals = np.loadtxt(path, delimiter=",", ndmin=1)
    else:
        try:
            vals = np.array([float(v) for v in spec.split(",")])
        except ValueError:
            raise ValueError(f"{key}: {spec!r} is neither a number list nor a file") from None
    if vals.size == 1:
        vals = np.full(p, float(vals[0]))
    if vals.shape != (p,):
        raise ValueError(f"{key} must have {p} entries")
    return vals


def _precision_spec(spec: str, p: int, base_dir) -> np.ndarray:
    path = _resolve(spec, base_dir)
    if path is not None:
        mat = np.loadtxt(path, delimiter=",", ndmin=2)
        if mat.shape != (p, p):
            raise ValueError(f"prior_precision matrix must be {p}x{p}, got {mat.shape}")
        return mat
    return np.diag(_vector_or_file(spec, p, base_dir, "prior_precision"))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(source, f"expected 'key = value', got {raw.strip()!r}", row=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(source, "empty key", row=lineno)
        out[key.replace("-", "_")] = value
    return out


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def config_from_mapping(values: dict[str, str], source: str = "<config>") -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ParseError(source, f"unknown key {key!r}")
        typ = known[key].type
        try:
            if typ == "int":
                kwargs[key] = int(raw)
            elif typ == "float":
                kwargs[key] = float(raw)
            elif typ == "bool":
                kwargs[key] = _BOOL[raw.lower()]
            else:
                kwargs[key] = raw
        except (ValueError, KeyError):
            raise ParseError(source, f"bad value {raw!r} for {key}") from None
    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        raise ParseError(source, str(exc)) from None


def read_config(path) -> RunConfig:
    """Load a config file; a relative ``data`` path is taken relative to the file."""
    path = Path(path)
    values = parse_config_text(path.read_text(), str(path))
    cfg = config_from_mapping(values, str(path))
    if cfg.data and not Path(cfg.data).is_absolute():
        cfg.data = str(path.parent / cfg.data)
    return cfg

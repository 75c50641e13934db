"""Rectangular-lattice samples and their CSV representation.

A :class:`LatticeField` stores one response ``y`` and one covariate vector
``x`` per site of ``{1..n_1} x ... x {1..n_N}``. Sites are 1-based and held
in lexicographic order, which is also C order of the ``dims`` array.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
import tempfile
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSite,
    MissingSite,
    NonFiniteValue,
    ParseError,
)

Site = tuple  # 1-based lattice index (i_1, ..., i_N)


@dataclass(frozen=True)
class LatticeShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not dims or any(n < 1 for n in dims):
            raise ValueError(f"lattice dimensions must be positive, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        """Total number of sites, the product of ``dims``."""
        return math.prod(self.dims)

    def sites(self) -> Iterator[Site]:
        return product(*(range(1, n + 1) for n in self.dims))

    def contains(self, site: Sequence[int]) -> bool:
        return len(site) == self.ndim and all(1 <= i <= n for i, n in zip(site, self.dims))

    def flat_index(self, site: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(i - 1 for i in site), self.dims))


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Observed ``(Y_i, X_i)`` over a full rectangular lattice.

    ``y`` has shape ``(n,)`` and ``x`` shape ``(n, d)`` where ``n`` is the
    number of sites; row ``k`` belongs to the ``k``-th site in lexicographic
    order. Arrays are read-only after construction.
    """

    shape: LatticeShape
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        x = np.array(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionMismatch(f"covariates must be a 2-d array, got shape {x.shape}")
        n = self.shape.size
        if y.shape[0] != n or x.shape[0] != n:
            raise DimensionMismatch(
                f"expected {n} sites, got {y.shape[0]} responses and {x.shape[0]} covariates"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise NonFiniteValue("field values must be finite")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def covariate_dim(self) -> int:
        return self.x.shape[1]

    @property
    def size(self) -> int:
        return self.shape.size

    def sites(self) -> Iterator[Site]:
        return self.shape.sites()

    def records(self) -> Iterator[tuple[Site, float, np.ndarray]]:
        for k, site in enumerate(self.sites()):
            yield site, float(self.y[k]), self.x[k]

    def y_grid(self) -> np.ndarray:
        return self.y.reshape(self.shape.dims)

    def x_grid(self) -> np.ndarray:
        return self.x.reshape(self.shape.dims + (self.covariate_dim,))

    def equals(self, other: "LatticeField") -> bool:
        """Bit-exact equality of shape and values."""
        return (
            self.shape == other.shape
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x, other.x)
        )

    @classmethod
    def from_grids(cls, y: np.ndarray, x: np.ndarray) -> "LatticeField":
        """Build from an N-d response grid and an (N+1)-d covariate grid (last axis = d)."""
        y = np.asarray(y, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == y.ndim:
            x = x[..., None]
        if x.shape[:-1] != y.shape:
            raise DimensionMismatch(f"grid shapes {y.shape} and {x.shape} disagree")
        shape = LatticeShape(y.shape)
        return cls(shape, y.reshape(-1), x.reshape(shape.size, x.shape[-1]))


def from_records(
    records: Iterable[tuple[Sequence[int], float, Sequence[float]]],
    shape: LatticeShape,
    d: int,
) -> LatticeField:
    """Assemble a field from ``(site, y, x)`` records in any order."""
    n = shape.size
    y = np.empty(n)
    x = np.empty((n, d))
    seen = np.zeros(n, dtype=bool)
    for site, yv, xv in records:
        site = tuple(int(i) for i in site)
        if not shape.contains(site):
            raise DimensionMismatch(f"site {site} lies outside lattice {shape.dims}")
        xv = np.atleast_1d(np.asarray(xv, dtype=np.float64))
        if xv.shape != (d,):
            raise DimensionMismatch(f"site {site}: covariate has length {xv.size}, expected {d}")
        if not (math.isfinite(yv) and np.all(np.isfinite(xv))):
            raise NonFiniteValue(f"site {site}: non-finite value")
        k = shape.flat_index(site)
        if seen[k]:
            raise DuplicateSite(f"site {site} appears more than once")
        seen[k] = True
        y[k] = yv
        x[k] = xv
    if not seen.all():
        missing = next(s for s, ok in zip(shape.sites(), seen) if not ok)
        raise MissingSite(f"{n - int(seen.sum())} site(s) missing, first is {missing}")
    return LatticeField(shape, y, x)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

_INDEX_COL = re.compile(r"^i([1-9][0-9]*)$")
_COV_COL = re.compile(r"^x([1-9][0-9]*)$")


def format_float(v: float) -> str:
    """Round-trip-safe decimal text (17 significant digits)."""
    return format(float(v), ".17g")


def field_to_csv_text(field: LatticeField) -> str:
    N = field.shape.ndim
    d = field.covariate_dim
    buf = io.StringIO()
    header = [f"i{k}" for k in range(1, N + 1)] + ["y"] + [f"x{k}" for k in range(1, d + 1)]
    buf.write(",".join(header) + "\n")
    for site, yv, xv in field.records():
        row = [str(i) for i in site] + [format_float(yv)] + [format_float(v) for v in xv]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_text_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(field: LatticeField, path) -> None:
    write_text_atomic(path, field_to_csv_text(field))


def _parse_header(header: list[str]) -> tuple[int, int]:
    names = [h.strip() for h in header]
    if "y" not in names:
        raise ParseError("header has no 'y' column", line=1)
    pos = names.index("y")
    idx, cov = names[:pos], names[pos + 1 :]
    if not idx or not cov:
        raise ParseError("header needs at least one index column and one covariate column", line=1)
    for k, name in enumerate(idx, start=1):
        m = _INDEX_COL.match(name)
        if not m or int(m.group(1)) != k:
            raise ParseError(f"expected index column 'i{k}', found {name!r}", line=1)
    for k, name in enumerate(cov, start=1):
        m = _COV_COL.match(name)
        if not m or int(m.group(1)) != k:
            raise ParseError(f"expected covariate column 'x{k}', found {name!r}", line=1)
    return len(idx), len(cov)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"column {column}: cannot parse {text!r} as a number", line=line) from None
    if not math.isfinite(v):
        raise NonFiniteValue(f"line {line}: column {column} is not finite")
    return v


def parse_csv_text(text: str) -> LatticeField:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    N, d = _parse_header(header)
    width = N + 1 + d
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", line=lineno)
        site = []
        for k in range(N):
            try:
                i = int(row[k])
            except ValueError:
                raise ParseError(f"column i{k + 1}: {row[k]!r} is not an integer", line=lineno) from None
            if i < 1:
                raise ParseError(f"column i{k + 1}: indices are 1-based, got {i}", line=lineno)
            site.append(i)
        yv = _parse_float(row[N], lineno, "y")
        xv = [_parse_float(row[N + 1 + k], lineno, f"x{k + 1}") for k in range(d)]
        rows.append((tuple(site), yv, xv))
    if not rows:
        raise ParseError("no data rows", line=2)
    dims = tuple(max(r[0][k] for r in rows) for k in range(N))
    return from_records(rows, LatticeShape(dims), d)


def read_csv(path) -> LatticeField:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv_text(fh.read())

"""Per-sample-point interval tables, the reporting rounding convention,
and the plain-text limits-file format.

A limits table assigns one closed interval [L(s), U(s)] to every sample
point of a finite design.  Tables are both the input and the output of the
interval modification operator, so they are kept at full precision
internally; the rounding convention (lower limits down, upper limits up at
the fourth decimal place) is applied for reporting and for fixed-point
comparisons, which keeps the coverage guarantee intact through printing.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import IO, Dict, Tuple, Union

import numpy as np

from .errors import InputError

ROUND_DECIMALS = 4
# Values computed a hair below a lattice boundary (endpoint solves carry
# ~1e-9 noise) must round like their exact counterparts.
ROUND_GUARD = 1e-7


def round_down(values, decimals: int = ROUND_DECIMALS, guard: float = ROUND_GUARD):
    scale = 10.0 ** decimals
    return np.floor(np.asarray(values, dtype=float) * scale + guard * scale) / scale


def round_up(values, decimals: int = ROUND_DECIMALS, guard: float = ROUND_GUARD):
    scale = 10.0 ** decimals
    return np.ceil(np.asarray(values, dtype=float) * scale - guard * scale) / scale


@dataclass
class LimitsTable:
    """Interval limits keyed by sample point.

    points : (P,) or (P, k) integer array of sample points, in model order
    lower, upper : (P,) float arrays with lower <= upper pointwise
    meta : free-form header information carried through file round trips
    """

    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=int)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or len(self.lower) != len(self.points):
            raise InputError("points, lower and upper must have matching lengths")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise InputError("limits must not contain NaN")
        if np.any(self.lower > self.upper + 1e-12):
            bad = int(np.argmax(self.lower - self.upper))
            raise InputError(
                f"lower limit exceeds upper limit at point {self.points[bad]}"
            )

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def key_width(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    def point_index(self, point) -> int:
        pts = self.points if self.points.ndim == 2 else self.points[:, None]
        target = np.atleast_1d(np.asarray(point, dtype=int))
        hits = np.flatnonzero((pts == target[None, :]).all(axis=1))
        if hits.size == 0:
            raise InputError(f"sample point {tuple(target)} not present in table")
        return int(hits[0])

    def interval(self, point) -> Tuple[float, float]:
        i = self.point_index(point)
        return float(self.lower[i]), float(self.upper[i])

    def til(self) -> float:
        """Total interval length: sum of stored (unrounded) lengths."""
        return float(np.sum(self.upper - self.lower))

    def rounded(self, decimals: int = ROUND_DECIMALS) -> "LimitsTable":
        """Reporting version: lower limits floored, upper limits ceiled."""
        return LimitsTable(
            self.points.copy(),
            round_down(self.lower, decimals),
            round_up(self.upper, decimals),
            dict(self.meta),
        )

    def clipped(self, lo: float, hi: float) -> "LimitsTable":
        return LimitsTable(
            self.points.copy(),
            np.clip(self.lower, lo, hi),
            np.clip(self.upper, lo, hi),
            dict(self.meta),
        )

    def equals(self, other: "LimitsTable") -> bool:
        return (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def subset_of(self, other: "LimitsTable", tol: float = 0.0) -> bool:
        """Pointwise containment of self's intervals in other's."""
        if not np.array_equal(self.points, other.points):
            raise InputError("tables are keyed by different sample points")
        return bool(
            np.all(self.lower >= other.lower - tol)
            and np.all(self.upper <= other.upper + tol)
        )

    def reordered(self, points: np.ndarray) -> "LimitsTable":
        """Return a copy with rows arranged to match ``points`` exactly."""
        points = np.asarray(points, dtype=int)
        mine = self.points if self.points.ndim == 2 else self.points[:, None]
        want = points if points.ndim == 2 else points[:, None]
        if mine.shape[1] != want.shape[1]:
            raise InputError("sample point key width does not match")
        index = {tuple(row): i for i, row in enumerate(mine)}
        if len(index) != len(mine):
            raise InputError("table contains duplicate sample points")
        order = np.empty(len(want), dtype=int)
        for j, row in enumerate(want):
            key = tuple(row)
            if key not in index:
                raise InputError(f"table is missing sample point {key}")
            order[j] = index[key]
        if len(want) != len(mine):
            raise InputError(
                f"table covers {len(mine)} points but the design has {len(want)}"
            )
        return LimitsTable(
            points.copy(), self.lower[order], self.upper[order], dict(self.meta)
        )


_COLUMNS = {1: "x,lower,upper", 2: "x,y,lower,upper"}


def write_limits(dest: Union[str, os.PathLike, IO[str]], table: LimitsTable) -> None:
    """Serialize a limits table as diff-able comma-separated text.

    Header lines start with '#'; numbers carry 10 significant digits.
    """
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    try:
        fh.write("# limits-table\n")
        for key in sorted(table.meta):
            fh.write(f"# {key}={table.meta[key]}\n")
        fh.write(f"# columns: {_COLUMNS.get(table.key_width, 'point...,lower,upper')}\n")
        pts = table.points if table.points.ndim == 2 else table.points[:, None]
        for row, lo, up in zip(pts, table.lower, table.upper):
            key = ",".join(str(int(v)) for v in row)
            fh.write(f"{key},{lo:.10g},{up:.10g}\n")
    finally:
        if own:
            fh.close()


def read_limits(src: Union[str, os.PathLike, IO[str]]) -> LimitsTable:
    """Parse a limits file written by :func:`write_limits`."""
    own = isinstance(src, (str, os.PathLike))
    fh = open(src, "r", encoding="utf-8") if own else src
    try:
        meta: Dict[str, str] = {}
        points = []
        lowers = []
        uppers = []
        width = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and not body.startswith("columns:"):
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise InputError(f"line {lineno}: expected point key plus two limits")
            if width is None:
                width = len(parts) - 2
            elif len(parts) - 2 != width:
                raise InputError(f"line {lineno}: inconsistent number of columns")
            try:
                key = [int(v) for v in parts[:width]]
                lo = float(parts[width])
                up = float(parts[width + 1])
            except ValueError as exc:
                raise InputError(f"line {lineno}: {exc}") from exc
            points.append(key)
            lowers.append(lo)
            uppers.append(up)
        if not points:
            raise InputError("limits file contains no data rows")
        pts = np.asarray(points, dtype=int)
        if width == 1:
            pts = pts[:, 0]
        seen = pts if pts.ndim == 2 else pts[:, None]
        if len({tuple(r) for r in seen}) != len(seen):
            raise InputError("limits file contains duplicate sample points")
        return LimitsTable(pts, np.asarray(lowers), np.asarray(uppers), meta)
    finally:
        if own:
            fh.close()


def limits_to_string(table: LimitsTable) -> str:
    buf = io.StringIO()
    write_limits(buf, table)
    return buf.getvalue()

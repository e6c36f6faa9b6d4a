"""
Daily count series: ingestion, trimming, summary statistics and sample ACF.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DegenerateSeriesError, EmptySeriesError, ParseError


@dataclass(frozen=True)
class CountSeries:
    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("count series contains non-finite values")
        if np.any(v < 0):
            raise ValueError("counts must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class SummaryStats:
    """The five statistics of a count series plus its length ``I``."""

    ave: float
    var: float
    cv: float
    jmp: float
    skw: float
    I: int
    label: Optional[str] = None

    FIELDS = ("Ave", "Var", "CV", "Jmp", "Skw")

    def as_row(self) -> dict:
        return {"label": self.label or "", "I": self.I, "Ave": self.ave, "Var": self.var,
                "CV": self.cv, "Jmp": self.jmp, "Skw": self.skw}

    @classmethod
    def from_moments(cls, ave, var, jmp, skw=math.nan, I=0, label=None):
        """Build from tabulated values; ``CV`` is recomputed from ``Ave`` and ``Var``."""
        return cls(float(ave), float(var), math.sqrt(var) / ave, float(jmp), float(skw), int(I), label)


def _parse_number(text, lineno, path):
    try:
        x = float(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: cannot parse {text!r} as a number") from None
    if not math.isfinite(x) or x < 0:
        raise ParseError(f"{path}:{lineno}: count must be a finite nonnegative number, got {text!r}")
    return x


def read_csv(path, label: Optional[str] = None) -> CountSeries:
    """Read a ``count`` or ``day,count`` CSV file (header optional).

    Rows are taken in file order; missing days are not inferred. Blank lines
    are skipped. Errors report the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from exc
    return parse_csv(text, label=label if label is not None else path.stem, source=str(path))


def parse_csv(text: str, label: Optional[str] = None, source: str = "<string>") -> CountSeries:
    rows = [(i, row) for i, row in enumerate(csv.reader(io.StringIO(text)), start=1)
            if row and any(c.strip() for c in row)]
    if not rows:
        raise ParseError(f"{source}: no data rows")
    first_line, first = rows[0]
    width = len(first)
    if width not in (1, 2):
        raise ParseError(f"{source}:{first_line}: expected 1 or 2 columns, found {width}")
    header = [c.strip().lower() for c in first]
    col = width - 1
    try:
        float(first[col])
    except ValueError:
        if header[col] != "count" or (width == 2 and header[0] != "day"):
            raise ParseError(
                f"{source}:{first_line}: header must be 'count' or 'day,count', got {','.join(first)!r}"
            ) from None
        rows = rows[1:]
    values = []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{source}:{lineno}: expected {width} columns, found {len(row)}")
        values.append(_parse_number(row[col].strip(), lineno, source))
    if not values:
        raise ParseError(f"{source}: no data rows")
    return CountSeries(np.array(values), label)


def trim(raw: CountSeries) -> CountSeries:
    """Drop the leading and trailing runs of zeros; interior zeros stay."""
    nz = np.flatnonzero(raw.values > 0)
    if nz.size == 0:
        name = f" {raw.label!r}" if raw.label else ""
        raise EmptySeriesError(f"series{name} has no positive counts")
    return CountSeries(raw.values[nz[0]: nz[-1] + 1], raw.label)


def count_local_maxima(x: np.ndarray) -> int:
    """Strict local maxima, boundaries compared with their single neighbour.

    Ties never produce a maximum.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0
    left = np.concatenate([[True], x[1:] > x[:-1]])
    right = np.concatenate([x[:-1] > x[1:], [True]])
    return int(np.count_nonzero(left & right))


def summary(s: CountSeries) -> SummaryStats:
    """Ave, population Var, CV, Jmp and population skewness of a series."""
    x = s.values
    I = x.size
    if I < 3:
        raise DegenerateSeriesError(f"need at least 3 points, got {I}")
    ave = float(x.mean())
    c = x - ave
    var = float(np.mean(c**2))
    if not var > 0:
        raise DegenerateSeriesError("series has zero variance; CV and skewness are undefined")
    skw = float(np.mean(c**3) / var**1.5)
    return SummaryStats(ave, var, math.sqrt(var) / ave, count_local_maxima(x) / I, skw, I, s.label)


def sample_acf(s: CountSeries, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation at lags ``0..max_lag``."""
    x = s.values
    I = x.size
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if max_lag >= I:
        raise DegenerateSeriesError(f"max_lag {max_lag} needs more than {I} points")
    if max_lag > I / 2:
        warnings.warn(f"max_lag {max_lag} exceeds half the series length {I}", stacklevel=2)
    c = x - x.mean()
    denom = float(c @ c)
    if not denom > 0:
        raise DegenerateSeriesError("series has zero variance; autocorrelation is undefined")
    return np.array([1.0] + [float(c[: I - k] @ c[k:]) / denom for k in range(1, max_lag + 1)])

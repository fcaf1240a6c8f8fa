"""
Earthquake catalog data model: ingestion, saving and window splitting.

Coordinates are treated as planar (degrees or km, consistent within a
catalog). No great-circle correction is applied.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import pytz
from scipy.spatial import ConvexHull, QhullError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['time', 'magnitude', 'x', 'y']

# Added to the k-th duplicate timestamp (days) so event times are strictly increasing
DUPLICATE_JITTER = 1e-9


class CatalogError(ValueError):
    """Raised for unreadable or malformed catalog files and invalid catalog operations."""


@dataclass(frozen=True)
class Event:
    t: float
    m: float
    x: float
    y: float


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"Region bounds must satisfy x_min < x_max and y_min < y_max, got {self.bounds}")

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x, y):
        """Vectorised membership test, boundaries included"""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


def _jitter_duplicates(t: np.ndarray) -> np.ndarray:
    """Make sorted times strictly increasing by nudging the k-th duplicate by k * DUPLICATE_JITTER"""
    t = np.array(t, dtype=float)
    n_jittered = 0
    for i in range(1, len(t)):
        if t[i] <= t[i - 1]:
            t[i] = t[i - 1] + DUPLICATE_JITTER
            n_jittered += 1
    if n_jittered:
        logger.debug(f"Jittered {n_jittered} duplicate timestamps")
    return t


@dataclass(frozen=True, eq=False)
class Catalog:
    """
    Time-ordered marked events observed on the window [t_start, T].

    Arrays are read-only, so a Catalog can be shared between workers.
    """
    t: np.ndarray
    m: np.ndarray
    x: np.ndarray
    y: np.ndarray
    T: float
    M0: float
    region: Region
    t_start: float = 0.0
    origin: Optional[pd.Timestamp] = field(default=None)

    def __post_init__(self):
        for name in ('t', 'm', 'x', 'y'):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        object.__setattr__(self, 'T', float(self.T))
        object.__setattr__(self, 'M0', float(self.M0))
        object.__setattr__(self, 't_start', float(self.t_start))

        n = len(self.t)
        if not (len(self.m) == len(self.x) == len(self.y) == n):
            raise CatalogError("Event arrays must have equal length")
        if self.T < self.t_start:
            raise CatalogError(f"Window end T={self.T} precedes window start {self.t_start}")
        if n:
            if np.any(np.diff(self.t) <= 0):
                raise CatalogError("Event times must be strictly increasing")
            if self.t[0] < self.t_start or self.t[-1] > self.T:
                raise CatalogError(f"Event times must lie in [{self.t_start}, {self.T}]")
            if np.any(self.m < self.M0):
                raise CatalogError(f"All magnitudes must be >= M0={self.M0}")

    @classmethod
    def from_arrays(cls, t, m, x, y, T: float, M0: float, region: Region, t_start: float = 0.0,
                    origin: Optional[pd.Timestamp] = None) -> 'Catalog':
        """Sort events by time (stable, so ties keep input order) and jitter duplicates before building"""
        t = np.asarray(t, dtype=float).reshape(-1)
        order = np.argsort(t, kind='mergesort')
        return cls(
            t=_jitter_duplicates(t[order]),
            m=np.asarray(m, dtype=float).reshape(-1)[order],
            x=np.asarray(x, dtype=float).reshape(-1)[order],
            y=np.asarray(y, dtype=float).reshape(-1)[order],
            T=T, M0=M0, region=region, t_start=t_start, origin=origin,
        )

    @property
    def n(self) -> int:
        return len(self.t)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def length(self) -> float:
        """Observation window length"""
        return self.T - self.t_start

    @property
    def events(self) -> List[Event]:
        return [Event(*row) for row in zip(self.t, self.m, self.x, self.y)]

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def subset(self, mask, t_start: Optional[float] = None, T: Optional[float] = None) -> 'Catalog':
        mask = np.asarray(mask, dtype=bool)
        return Catalog(
            t=self.t[mask], m=self.m[mask], x=self.x[mask], y=self.y[mask],
            T=self.T if T is None else T, M0=self.M0, region=self.region,
            t_start=self.t_start if t_start is None else t_start, origin=self.origin,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'time': self.t, 'magnitude': self.m, 'x': self.x, 'y': self.y})


def _parse_float_column(values: pd.Series, name: str) -> np.ndarray:
    parsed = np.empty(len(values))
    for i, raw in enumerate(values):
        try:
            parsed[i] = float(raw)
        except (TypeError, ValueError):
            # +2: header line, 1-based numbering
            raise CatalogError(f"Malformed {name} {raw!r} on line {i + 2}")
    return parsed


def _to_utc(timestamp) -> pd.Timestamp:
    timestamp = pd.Timestamp(timestamp)
    if timestamp.tzinfo is None:
        return timestamp.tz_localize(pytz.UTC)
    return timestamp.tz_convert(pytz.UTC)


def _parse_times(values: pd.Series, origin: Optional[pd.Timestamp]) -> Tuple[np.ndarray, Optional[pd.Timestamp]]:
    """Convert a column of decimal days or ISO-8601 dates into days since origin"""
    numeric = pd.to_numeric(values, errors='coerce')
    if not numeric.isna().any():
        return _parse_float_column(values, 'time'), (_to_utc(origin) if origin is not None else None)

    stamps = []
    for i, raw in enumerate(values):
        try:
            stamps.append(_to_utc(raw))
        except (TypeError, ValueError):
            raise CatalogError(f"Malformed time {raw!r} on line {i + 2}")
    if origin is None:
        origin = min(stamps)
        logger.warning(f"No origin given; using the earliest event time {origin} as the catalog origin")
    origin = _to_utc(origin)
    days = np.array([(stamp - origin) / pd.Timedelta(days=1) for stamp in stamps], dtype=float)
    return days, origin


def load_catalog(path: Union[str, Path], M0: float, region: Region, origin=None,
                 T: Optional[float] = None, drop_outside: bool = True) -> Catalog:
    """
    Load a catalog from a CSV file with header 'time,magnitude,x,y'

    Args:
        path: CSV file path
        M0: Magnitude of completeness; events below it are dropped
        region: Spatial region; events outside it are dropped when drop_outside is set
        origin: Timestamp that ISO times are measured from (days)
        T: Window end in days since origin (default: last retained event time)
        drop_outside: Drop events outside the region

    Returns:
        Catalog sorted by time
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise CatalogError(f"Could not read catalog file {path}: {e}")

    columns = [str(col).strip() for col in df.columns]
    if columns != CSV_COLUMNS:
        raise CatalogError(f"Catalog header must be {','.join(CSV_COLUMNS)}, got {','.join(columns)}")
    df.columns = columns

    t, origin = _parse_times(df['time'], origin)
    m = _parse_float_column(df['magnitude'], 'magnitude')
    x = _parse_float_column(df['x'], 'x')
    y = _parse_float_column(df['y'], 'y')

    keep = (m >= M0) & (t >= 0)
    if drop_outside:
        keep &= region.contains(x, y)
    if T is not None:
        keep &= t <= T
    logger.info(f"Loaded {len(df)} rows from {path}, keeping {int(keep.sum())} "
                f"(M0={M0}, dropped {int((~keep).sum())})")
    if not keep.any():
        raise CatalogError(f"No events left in {path} after filtering on M0={M0} and region {region.bounds}")

    t, m, x, y = t[keep], m[keep], x[keep], y[keep]
    order = np.argsort(t, kind='mergesort')
    t = _jitter_duplicates(t[order])
    window_end = float(t[-1]) if T is None else float(T)
    if window_end < t[-1]:
        raise CatalogError(f"Window end T={window_end} precedes the last event at {t[-1]}")
    return Catalog(t=t, m=m[order], x=x[order], y=y[order], T=window_end, M0=M0, region=region, origin=origin)


def save_catalog(catalog: Catalog, path: Union[str, Path]) -> Path:
    """Write a catalog in the 'time,magnitude,x,y' schema, times as decimal days"""
    path = Path(path)
    catalog.to_frame().to_csv(path, index=False, float_format='%.17g')
    logger.debug(f"Saved {catalog.n} events to {path}")
    return path


def split_window(catalog: Catalog, t_split: float) -> Tuple[Catalog, Catalog]:
    """
    Split a catalog into a training window and a test window at t_split

    Test times are not shifted, so training events can still trigger into the
    test window. Events at or after t_split go to the test part.
    """
    if not (catalog.t_start < t_split < catalog.T):
        raise CatalogError(f"t_split={t_split} must lie strictly inside ({catalog.t_start}, {catalog.T})")
    before = catalog.t < t_split
    train = catalog.subset(before, T=t_split)
    test = catalog.subset(~before, t_start=t_split)
    logger.info(f"Split at t={t_split}: {train.n} training events, {test.n} test events")
    return train, test


def catalog_signature(catalog: Catalog) -> str:
    """Short fingerprint of a catalog window, used to pair chains and splits with their data"""
    return (f"n={catalog.n};t_start={catalog.t_start!r};T={catalog.T!r};M0={catalog.M0!r};"
            f"sum_t={float(np.sum(catalog.t))!r};sum_m={float(np.sum(catalog.m))!r}")


def catalog_area(catalog: Catalog) -> float:
    """Area of the convex hull of the epicentres (0 when degenerate)"""
    if catalog.n < 3:
        return 0.0
    try:
        return float(ConvexHull(catalog.points).volume)
    except QhullError:
        return 0.0

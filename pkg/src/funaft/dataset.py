"""Right-censored survival outcomes paired with sampled functional covariates.

Two long-format CSV files describe a dataset:

* subjects file: ``id,time,status[,z1,...,zd]`` (one row per subject)
* functional file: ``id,s,x`` (one row per grid point, any order)

Grids may differ between subjects.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class Subject:
    id: str
    time: float
    event: bool
    scalars: np.ndarray
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        scalars = np.asarray(self.scalars, dtype=float).reshape(-1)
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if not (math.isfinite(self.time) and self.time > 0):
            raise DatasetError(f"subject {self.id}: time must be positive, got {self.time}")
        if grid.size != values.size:
            raise DatasetError(f"subject {self.id}: grid and values differ in length")
        if grid.size < 2:
            raise DatasetError(f"subject {self.id}: need at least 2 grid points")
        if np.any(np.diff(grid) <= 0):
            raise DatasetError(f"subject {self.id}: grid must be strictly increasing")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(grid))):
            raise DatasetError(f"subject {self.id}: non-finite functional values")
        if not np.all(np.isfinite(scalars)):
            raise DatasetError(f"subject {self.id}: non-finite scalar covariates")
        object.__setattr__(self, "scalars", scalars)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "event", bool(self.event))
        object.__setattr__(self, "time", float(self.time))
        for arr in (scalars, grid, values):
            arr.flags.writeable = False

    def __eq__(self, other):
        if not isinstance(other, Subject):
            return NotImplemented
        return (
            self.id == other.id
            and self.time == other.time
            and self.event == other.event
            and np.array_equal(self.scalars, other.scalars)
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class DomainMap:
    """Affine map between the original functional domain and [0, 1]."""

    lo: float
    hi: float

    def to_unit(self, s):
        return (np.asarray(s, dtype=float) - self.lo) / (self.hi - self.lo)

    def from_unit(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)


@dataclass(frozen=True)
class SurvivalDataset:
    subjects: tuple[Subject, ...]
    scalar_names: tuple[str, ...] = ()
    domain: tuple[float, float] | None = None
    # original-scale domain; set once by normalize_domain and never overwritten
    domain_map: DomainMap | None = field(default=None)

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        object.__setattr__(self, "scalar_names", tuple(self.scalar_names))
        if not subjects:
            raise DatasetError("dataset has no subjects")
        d = len(self.scalar_names)
        for sub in subjects:
            if sub.scalars.size != d:
                raise DatasetError(
                    f"subject {sub.id}: expected {d} scalar covariates, got {sub.scalars.size}"
                )
        lo = min(float(sub.grid[0]) for sub in subjects)
        hi = max(float(sub.grid[-1]) for sub in subjects)
        if self.domain is None:
            object.__setattr__(self, "domain", (lo, hi))
        else:
            dlo, dhi = map(float, self.domain)
            if lo < dlo - 1e-12 or hi > dhi + 1e-12:
                raise DatasetError(f"grids span [{lo}, {hi}], outside domain [{dlo}, {dhi}]")
            object.__setattr__(self, "domain", (dlo, dhi))

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.subjects])

    @property
    def events(self) -> np.ndarray:
        return np.array([s.event for s in self.subjects], dtype=bool)

    @property
    def scalar_matrix(self) -> np.ndarray:
        d = len(self.scalar_names)
        if d == 0:
            return np.zeros((self.n, 0))
        return np.vstack([s.scalars for s in self.subjects])

    def subset(self, idx: Sequence[int]) -> "SurvivalDataset":
        """Rows ``idx`` (repeats allowed, as in bootstrap resampling)."""
        return replace(self, subjects=tuple(self.subjects[i] for i in idx))

    def shared_grid(self) -> np.ndarray | None:
        """The common grid if every subject is observed on the same points."""
        g0 = self.subjects[0].grid
        for sub in self.subjects[1:]:
            if sub.grid.shape != g0.shape or not np.array_equal(sub.grid, g0):
                return None
        return g0


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetError(f"{where}: cannot parse {text!r} as a number") from None


def load_dataset(subjects_path, functional_path) -> SurvivalDataset:
    """Read a dataset from the subjects and long-format functional CSV files."""
    subjects_path = Path(subjects_path)
    functional_path = Path(functional_path)

    with open(subjects_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{subjects_path}: empty file") from None
        for col in ("id", "time", "status"):
            if col not in header:
                raise DatasetError(f"{subjects_path}: missing column {col!r}")
        i_id, i_time, i_status = (header.index(c) for c in ("id", "time", "status"))
        scalar_cols = [j for j, h in enumerate(header) if h not in ("id", "time", "status")]
        scalar_names = tuple(header[j] for j in scalar_cols)
        rows = {}
        order = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            where = f"{subjects_path}:{lineno}"
            if len(row) != len(header):
                raise DatasetError(f"{where}: expected {len(header)} fields, got {len(row)}")
            sid = row[i_id].strip()
            if sid in rows:
                raise DatasetError(f"{where}: duplicate subject id {sid!r}")
            time = _parse_float(row[i_time], where)
            if not time > 0:
                raise DatasetError(f"{where}: subject {sid!r} has non-positive time {time}")
            status = _parse_float(row[i_status], where)
            if status not in (0.0, 1.0):
                raise DatasetError(f"{where}: status must be 0 or 1, got {row[i_status]!r}")
            z = [_parse_float(row[j], where) for j in scalar_cols]
            rows[sid] = (time, status == 1.0, z, lineno)
            order.append(sid)

    curves: dict[str, list[tuple[float, float, int]]] = {}
    with open(functional_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{functional_path}: empty file") from None
        for col in ("id", "s", "x"):
            if col not in header:
                raise DatasetError(f"{functional_path}: missing column {col!r}")
        i_id, i_s, i_x = (header.index(c) for c in ("id", "s", "x"))
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            where = f"{functional_path}:{lineno}"
            sid = row[i_id].strip()
            if sid not in rows:
                raise DatasetError(f"{where}: id {sid!r} not present in subjects file")
            s = _parse_float(row[i_s], where)
            x = _parse_float(row[i_x], where)
            curves.setdefault(sid, []).append((s, x, lineno))

    subjects = []
    for sid in order:
        time, event, z, lineno = rows[sid]
        pts = curves.get(sid)
        if not pts:
            raise DatasetError(f"{subjects_path}:{lineno}: subject {sid!r} has no functional rows")
        pts.sort(key=lambda r: r[0])
        for a, b in zip(pts, pts[1:]):
            if b[0] == a[0]:
                raise DatasetError(
                    f"{functional_path}:{b[2]}: duplicate s={b[0]} for subject {sid!r}"
                )
        grid = [p[0] for p in pts]
        vals = [p[1] for p in pts]
        try:
            subjects.append(Subject(sid, time, event, np.array(z), np.array(grid), np.array(vals)))
        except DatasetError as exc:
            raise DatasetError(f"{subjects_path}:{lineno}: {exc}") from None
    return SurvivalDataset(tuple(subjects), scalar_names)


def write_dataset(data: SurvivalDataset, subjects_path, functional_path) -> None:
    """Write ``data`` in the two-file CSV layout read by :func:`load_dataset`."""
    with open(subjects_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "time", "status", *data.scalar_names])
        for sub in data.subjects:
            w.writerow([sub.id, repr(sub.time), int(sub.event), *map(repr, sub.scalars.tolist())])
    with open(functional_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "s", "x"])
        for sub in data.subjects:
            for s, x in zip(sub.grid.tolist(), sub.values.tolist()):
                w.writerow([sub.id, repr(s), repr(x)])


def normalize_domain(data: SurvivalDataset) -> SurvivalDataset:
    """Map every grid affinely onto [0, 1].

    The original domain is kept in ``domain_map`` so coefficient functions can
    be reported on the original scale. Idempotent.
    """
    lo, hi = data.domain
    if not hi > lo:
        raise DatasetError(f"functional domain [{lo}, {hi}] has zero length")
    if (lo, hi) == (0.0, 1.0):
        if data.domain_map is None:
            return replace(data, domain_map=DomainMap(0.0, 1.0))
        return data
    dmap = DomainMap(lo, hi)
    subjects = tuple(
        Subject(
            s.id,
            s.time,
            s.event,
            s.scalars,
            np.clip(dmap.to_unit(s.grid), 0.0, 1.0),
            s.values,
        )
        for s in data.subjects
    )
    outer = data.domain_map
    if outer is not None:
        # compose with an earlier map so the original scale is not lost
        dmap = DomainMap(float(outer.from_unit(lo)), float(outer.from_unit(hi)))
    return SurvivalDataset(subjects, data.scalar_names, (0.0, 1.0), dmap)


def reference_grid(data: SurvivalDataset, num: int = 101) -> np.ndarray:
    shared = data.shared_grid()
    if shared is not None:
        return shared.copy()
    lo, hi = data.domain
    return np.linspace(lo, hi, num)


def mean_curve(data: SurvivalDataset, grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean curve over subjects, via linear interpolation onto ``grid``."""
    if grid is None:
        grid = reference_grid(data)
    vals = np.vstack([np.interp(grid, s.grid, s.values) for s in data.subjects])
    return grid, vals.mean(axis=0)


def center_curves(
    data: SurvivalDataset, mean: tuple[np.ndarray, np.ndarray] | None = None
) -> tuple[SurvivalDataset, tuple[np.ndarray, np.ndarray]]:
    """Subtract the pointwise mean curve from every subject.

    Pass a stored ``mean`` to apply a training-set centering to new data.
    """
    if mean is None:
        mean = mean_curve(data)
    g, m = mean
    subjects = tuple(
        Subject(s.id, s.time, s.event, s.scalars, s.grid, s.values - np.interp(s.grid, g, m))
        for s in data.subjects
    )
    return replace(data, subjects=subjects), mean

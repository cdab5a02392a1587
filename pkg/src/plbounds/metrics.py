"""Integrity statistics over per-timestep protection levels.

Every metric compares, per axis, the protection level against the magnitude
of the true error and the alarm limit.  Tie conventions follow the defining
formulas: a failure needs ``pl < |err|``, an alarm ``pl > limit`` and a
position error ``|err| > limit``, all strict.  Nominal operation is their
complement, ``|err| <= pl <= limit``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Generic, TypeVar

import numpy as np

from .errors import NoNominalRecords
from .gmm import ProtectionLevels

T = TypeVar("T")

DIRECTIONS = ("lateral", "longitudinal", "vertical")


@dataclass(frozen=True)
class PerDirection(Generic[T]):
    lateral: T
    longitudinal: T
    vertical: T

    def get(self, direction: str) -> T:
        return getattr(self, direction)

    def to_dict(self) -> dict:
        return {d: self.get(d) for d in DIRECTIONS}


@dataclass(frozen=True)
class AlarmLimits:
    """Per-axis alert thresholds in meters."""

    lateral: float = 0.85
    longitudinal: float = 1.50
    vertical: float = 1.47

    def __post_init__(self) -> None:
        if min(self.lateral, self.longitudinal, self.vertical) <= 0.0:
            raise ValueError("alarm limits must be positive")

    def get(self, direction: str) -> float:
        return getattr(self, direction)


@dataclass(frozen=True)
class IntegrityRecord:
    """One timestep's protection levels and true vehicle-frame error."""

    pl: ProtectionLevels
    error: np.ndarray

    def __post_init__(self) -> None:
        e = np.asarray(self.error, dtype=float)
        if e.shape != (3,) or not np.all(np.isfinite(e)):
            raise ValueError("error must be a finite 3-vector")
        object.__setattr__(self, "error", e)


def _columns(records: list[IntegrityRecord]) -> tuple[np.ndarray, np.ndarray]:
    pls = np.array([r.pl.as_array() for r in records])
    errs = np.abs(np.array([r.error for r in records]))
    return pls, errs


def records_from_table(rows: np.ndarray) -> list[IntegrityRecord]:
    """Rebuild integrity records from a results table with columns
    (t, pl_lat, pl_lon, pl_vert, err_x, err_y, err_z)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 7:
        raise ValueError(f"expected a (N, 7) results table, got shape {rows.shape}")
    return [
        IntegrityRecord(ProtectionLevels(row[1], row[2], row[3]), row[4:7]) for row in rows
    ]


def bound_gap(
    records: list[IntegrityRecord], limits: AlarmLimits, require_nominal: bool = False
) -> PerDirection:
    """Mean slack of the bound, ``pl - |err|``, over nominal records.

    A direction with no nominal record yields None, or raises
    NoNominalRecords when ``require_nominal`` is set.
    """
    if not records:
        raise ValueError("need at least one record")
    pls, errs = _columns(records)
    values = []
    for d, name in enumerate(DIRECTIONS):
        nominal = (errs[:, d] <= pls[:, d]) & (pls[:, d] <= limits.get(name))
        if not np.any(nominal):
            if require_nominal:
                raise NoNominalRecords(f"no nominal record in the {name} direction")
            values.append(None)
        else:
            values.append(float(np.mean(pls[nominal, d] - errs[nominal, d])))
    return PerDirection(*values)


def failure_rate(records: list[IntegrityRecord]) -> PerDirection:
    """Fraction of records whose bound fell below the true error magnitude."""
    if not records:
        raise ValueError("need at least one record")
    pls, errs = _columns(records)
    return PerDirection(*(float(np.mean(pls[:, d] < errs[:, d])) for d in range(3)))


def false_alarm_rate(records: list[IntegrityRecord], limits: AlarmLimits) -> tuple[PerDirection, PerDirection]:
    """Population-weighted false-alarm rate per direction, plus degeneracy flags.

    With T records, N_PE position errors, N_FA false alarms (alarm raised,
    error within the limit) and N_TA true alarms, the rate is
    ``N_FA (T - N_PE) / (N_FA (T - N_PE) + N_TA N_PE)``.  A zero denominator
    yields 0 with the direction's flag set.
    """
    if not records:
        raise ValueError("need at least one record")
    pls, errs = _columns(records)
    total = len(records)
    values, flags = [], []
    for d, name in enumerate(DIRECTIONS):
        limit = limits.get(name)
        alarm = pls[:, d] > limit
        position_error = errs[:, d] > limit
        n_pe = int(np.count_nonzero(position_error))
        n_fa = int(np.count_nonzero(alarm & ~position_error))
        n_ta = int(np.count_nonzero(alarm & position_error))
        numerator = n_fa * (total - n_pe)
        denominator = numerator + n_ta * n_pe
        if denominator == 0:
            values.append(0.0)
            flags.append(True)
        else:
            values.append(numerator / denominator)
            flags.append(False)
    return PerDirection(*values), PerDirection(*flags)


@dataclass(frozen=True)
class IntegrityReport:
    """Bound gap, failure rate and false-alarm rate with their flags."""

    n_records: int
    bound_gap: PerDirection
    failure_rate: PerDirection
    false_alarm_rate: PerDirection
    far_degenerate: PerDirection
    limits: AlarmLimits

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "bound_gap": self.bound_gap.to_dict(),
            "failure_rate": self.failure_rate.to_dict(),
            "false_alarm_rate": self.false_alarm_rate.to_dict(),
            "far_degenerate": self.far_degenerate.to_dict(),
            "no_nominal_records": {d: self.bound_gap.get(d) is None for d in DIRECTIONS},
            "alarm_limits": {d: self.limits.get(d) for d in DIRECTIONS},
        }


def summarize(records: list[IntegrityRecord], limits: AlarmLimits) -> IntegrityReport:
    """All scalar integrity metrics in one report.

    An empty record list produces a report with every direction flagged as
    lacking nominal records and zero rates.
    """
    if not records:
        none3 = PerDirection(None, None, None)
        zero3 = PerDirection(0.0, 0.0, 0.0)
        flags = PerDirection(True, True, True)
        return IntegrityReport(0, none3, zero3, zero3, flags, limits)
    far, flags = false_alarm_rate(records, limits)
    return IntegrityReport(
        n_records=len(records),
        bound_gap=bound_gap(records, limits),
        failure_rate=failure_rate(records),
        false_alarm_rate=far,
        far_degenerate=flags,
        limits=limits,
    )


# ---------------------------------------------------------------------------
# integrity diagram


@dataclass(frozen=True)
class DiagramDirection:
    """2-d histogram of (|error|, pl) plus the standard region tallies.

    ``counts[i][j]`` covers error bin i and protection-level bin j; the last
    index along each axis is the overflow bin for values beyond twice the
    alarm limit.  The four region tallies partition the records:

    * nominal: bounded and available (|err| <= pl <= limit)
    * alarm: bounded but unavailable (pl > limit, not a failure)
    * misleading: bound broken (pl < |err|) while the error is tolerable
      or the alarm already fired
    * hazardous: bound broken, error beyond the limit, no alarm
    """

    edges: np.ndarray
    counts: np.ndarray
    nominal: int
    alarm: int
    misleading: int
    hazardous: int

    def to_dict(self) -> dict:
        return {
            "edges": [float(v) for v in self.edges],
            "counts": self.counts.astype(int).tolist(),
            "regions": {
                "nominal": self.nominal,
                "alarm": self.alarm,
                "misleading": self.misleading,
                "hazardous": self.hazardous,
            },
        }


@dataclass(frozen=True)
class IntegrityDiagram:
    n_records: int
    bins: int
    limits: AlarmLimits
    directions: dict

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "bins": self.bins,
            "alarm_limits": {d: self.limits.get(d) for d in DIRECTIONS},
            "directions": {name: dd.to_dict() for name, dd in self.directions.items()},
        }


def integrity_diagram(records: list[IntegrityRecord], limits: AlarmLimits, bins: int = 40) -> IntegrityDiagram:
    """Bin every record into the (|error|, pl) plane, one grid per direction.

    Bins are uniform over [0, 2 * limit] with one overflow bin past the end;
    region tallies follow the DiagramDirection taxonomy and always sum to
    the record count.
    """
    if bins < 1:
        raise ValueError("need at least one bin")
    pls, errs = _columns(records) if records else (np.empty((0, 3)), np.empty((0, 3)))
    out = {}
    for d, name in enumerate(DIRECTIONS):
        limit = limits.get(name)
        edges = np.linspace(0.0, 2.0 * limit, bins + 1)
        width = 2.0 * limit / bins
        counts = np.zeros((bins + 1, bins + 1), dtype=np.int64)
        if len(records):
            ei = np.minimum((errs[:, d] // width).astype(np.int64), bins)
            pi = np.minimum((pls[:, d] // width).astype(np.int64), bins)
            np.add.at(counts, (ei, pi), 1)
        fail = pls[:, d] < errs[:, d]
        hazardous = (errs[:, d] > limit) & (pls[:, d] <= limit)
        misleading = fail & ~hazardous
        alarm = ~fail & (pls[:, d] > limit)
        nominal = ~fail & (pls[:, d] <= limit)
        out[name] = DiagramDirection(
            edges=edges,
            counts=counts,
            nominal=int(np.count_nonzero(nominal)),
            alarm=int(np.count_nonzero(alarm)),
            misleading=int(np.count_nonzero(misleading)),
            hazardous=int(np.count_nonzero(hazardous)),
        )
    return IntegrityDiagram(len(records), bins, limits, out)

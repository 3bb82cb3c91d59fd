"""Data model and ingestion for multiple event-time datasets.

A dataset consists of two treatment arms. Each subject contributes a
follow-up time X, a terminal-event indicator (True when the terminal event
was observed before censoring), zero or more event times on [0, X], and an
optional baseline covariate vector.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np


class Status(IntEnum):
    """Wire-level status codes for event records."""

    CENSOR = 0
    EVENT = 1
    DEATH = 2


class ValidationError(ValueError):
    """Raised when input records violate the data model."""


class TruncationError(ValidationError):
    """Raised in strict mode when the MCF is not identifiable up to tau."""


@dataclass(frozen=True)
class EventRecord:
    """One row of long-format input data."""

    subject_id: str
    time: float
    status: Status
    arm: int
    event_type: Optional[int] = None
    covariates: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class SubjectHistory:
    """One subject's complete follow-up.

    ``follow_up`` is X = min(terminal time, censoring time); ``terminal``
    is True when the terminal event was observed at X. ``event_times`` are
    ascending, each in [0, X]; ties within a subject carry multiplicity.
    """

    subject_id: str
    follow_up: float
    terminal: bool
    event_times: tuple[float, ...] = ()
    event_types: tuple[int, ...] = ()
    covariates: tuple[float, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.follow_up) or self.follow_up < 0:
            raise ValidationError(
                f"subject {self.subject_id!r}: follow-up must be finite and >= 0"
            )
        if any(t < 0 or t > self.follow_up for t in self.event_times):
            raise ValidationError(
                f"subject {self.subject_id!r}: event time outside [0, X]"
            )
        if list(self.event_times) != sorted(self.event_times):
            object.__setattr__(self, "event_times", tuple(sorted(self.event_times)))
        if self.event_types and len(self.event_types) != len(self.event_times):
            raise ValidationError(
                f"subject {self.subject_id!r}: event_types/event_times length mismatch"
            )


class ArmDataset:
    """All subjects of one treatment arm, with cached numpy views.

    Immutable after construction. Subjects are stored in the order given;
    per-subject results (e.g. influence values) align with this order.
    """

    def __init__(self, arm: int, subjects: Sequence[SubjectHistory]):
        if len(subjects) == 0:
            raise ValidationError(f"arm {arm}: empty arm")
        dims = {len(s.covariates) for s in subjects}
        if len(dims) != 1:
            raise ValidationError(f"arm {arm}: inconsistent covariate dimensions")
        self.arm = int(arm)
        self.subjects = tuple(subjects)
        n = len(subjects)
        self.n = n
        self.follow_up = np.array([s.follow_up for s in subjects], dtype=np.float64)
        self.terminal = np.array([s.terminal for s in subjects], dtype=bool)
        self.covariates = np.array(
            [s.covariates for s in subjects], dtype=np.float64
        ).reshape(n, dims.pop())
        # flat event arrays sorted by time (stable, so subject order breaks ties)
        times, subj, types = [], [], []
        for i, s in enumerate(subjects):
            for k, t in enumerate(s.event_times):
                times.append(t)
                subj.append(i)
                types.append(s.event_types[k] if s.event_types else 0)
        order = np.argsort(np.asarray(times, dtype=np.float64), kind="stable")
        self.event_times = np.asarray(times, dtype=np.float64)[order]
        self.event_subjects = np.asarray(subj, dtype=np.int64)[order]
        self.event_type_labels = np.asarray(types, dtype=np.int64)[order]
        self._sorted_follow_up = np.sort(self.follow_up)

    @property
    def covariate_dim(self) -> int:
        return self.covariates.shape[1]

    def at_risk(self, times: np.ndarray) -> np.ndarray:
        """Number of subjects with X >= t for each t (closed inequality)."""
        times = np.asarray(times, dtype=np.float64)
        return self.n - np.searchsorted(self._sorted_follow_up, times, side="left")

    def __eq__(self, other):
        return (
            isinstance(other, ArmDataset)
            and self.arm == other.arm
            and self.subjects == other.subjects
        )

    def __repr__(self):
        return f"ArmDataset(arm={self.arm}, n={self.n})"


@dataclass(frozen=True)
class StudyDataset:
    """Two-arm study with truncation time tau."""

    arm1: ArmDataset
    arm2: ArmDataset
    tau: float
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValidationError("tau must be positive and finite")
        if self.arm1.covariate_dim != self.arm2.covariate_dim:
            raise ValidationError("covariate dimension differs across arms")

    @property
    def n(self) -> int:
        return self.arm1.n + self.arm2.n

    def arms(self) -> tuple[ArmDataset, ArmDataset]:
        return (self.arm1, self.arm2)


@dataclass(frozen=True)
class TruncationReport:
    """Outcome of the identifiability check P(X >= tau) > 0 per arm."""

    ok: bool
    messages: tuple[str, ...] = ()


def ingest_arm_datasets(records: Iterable[EventRecord]) -> dict[int, ArmDataset]:
    """Group long-format records into per-arm datasets (one or both arms).

    Each subject must have exactly one CENSOR or DEATH record; its time is
    the follow-up X and must be the subject's maximum time. The output is a
    pure function of the record multiset: subjects are ordered by id within
    arm, so permuting the input leaves the result unchanged.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records supplied")
    by_subject: dict[tuple[int, str], list[EventRecord]] = {}
    for r in records:
        if r.arm not in (1, 2):
            raise ValidationError(f"subject {r.subject_id!r}: arm must be 1 or 2")
        if r.status not in (Status.CENSOR, Status.EVENT, Status.DEATH):
            raise ValidationError(f"subject {r.subject_id!r}: unknown status {r.status}")
        if not np.isfinite(r.time) or r.time < 0:
            raise ValidationError(f"subject {r.subject_id!r}: negative or non-finite time")
        by_subject.setdefault((r.arm, str(r.subject_id)), []).append(r)

    arm_subjects: dict[int, list[SubjectHistory]] = {1: [], 2: []}
    for (arm, sid), rows in sorted(by_subject.items()):
        terminal_rows = [r for r in rows if r.status in (Status.CENSOR, Status.DEATH)]
        if len(terminal_rows) == 0:
            raise ValidationError(f"subject {sid!r}: missing terminal/censor record")
        if len(terminal_rows) > 1:
            raise ValidationError(f"subject {sid!r}: multiple terminal/censor records")
        term = terminal_rows[0]
        events = sorted(
            (r for r in rows if r.status == Status.EVENT), key=lambda r: r.time
        )
        if events and events[-1].time > term.time:
            raise ValidationError(
                f"subject {sid!r}: event time exceeds follow-up time"
            )
        covs = {r.covariates for r in rows if r.covariates is not None}
        if len(covs) > 1:
            raise ValidationError(f"subject {sid!r}: conflicting covariate values")
        cov = covs.pop() if covs else ()
        if cov is not None and any(not np.isfinite(c) for c in cov):
            raise ValidationError(f"subject {sid!r}: missing or non-finite covariate")
        types = tuple(
            e.event_type if e.event_type is not None else 0 for e in events
        )
        arm_subjects[arm].append(
            SubjectHistory(
                subject_id=sid,
                follow_up=term.time,
                terminal=(term.status == Status.DEATH),
                event_times=tuple(e.time for e in events),
                event_types=types,
                covariates=tuple(cov),
            )
        )
    return {
        arm: ArmDataset(arm, subs)
        for arm, subs in arm_subjects.items()
        if subs
    }


def ingest_records(records: Iterable[EventRecord], tau: float) -> StudyDataset:
    """Group long-format records into a two-arm :class:`StudyDataset`."""
    arms = ingest_arm_datasets(records)
    for arm in (1, 2):
        if arm not in arms:
            raise ValidationError(f"arm {arm}: no subjects")
    return StudyDataset(arm1=arms[1], arm2=arms[2], tau=float(tau))


def study_to_records(study: StudyDataset) -> list[EventRecord]:
    """Serialize a study back to long-format records (round-trips ingest)."""
    out: list[EventRecord] = []
    for arm_data in study.arms():
        for s in arm_data.subjects:
            cov = tuple(s.covariates) if s.covariates else None
            for k, t in enumerate(s.event_times):
                out.append(
                    EventRecord(
                        s.subject_id,
                        t,
                        Status.EVENT,
                        arm_data.arm,
                        event_type=s.event_types[k] if s.event_types else None,
                        covariates=cov,
                    )
                )
            status = Status.DEATH if s.terminal else Status.CENSOR
            out.append(
                EventRecord(s.subject_id, s.follow_up, status, arm_data.arm, covariates=cov)
            )
    return out


def validate_truncation(study: StudyDataset, strict: bool = False) -> TruncationReport:
    """Check that each arm has at least one subject with X >= tau.

    Without this the MCF is not identifiable up to tau; the default is a
    warning-level report, strict mode raises :class:`TruncationError`.
    """
    msgs = [m for arm_data in study.arms()
            if (m := arm_truncation_message(arm_data, study.tau))]
    if msgs and strict:
        raise TruncationError("; ".join(msgs))
    return TruncationReport(ok=not msgs, messages=tuple(msgs))


def arm_truncation_message(arm_data: ArmDataset, tau: float) -> Optional[str]:
    """Identifiability message for one arm, or None when X_max >= tau."""
    if float(arm_data.follow_up.max()) < tau:
        return (
            f"arm {arm_data.arm}: max follow-up "
            f"{arm_data.follow_up.max():g} < tau={tau:g}; "
            "MCF is not identifiable up to tau"
        )
    return None


# ---------------------------------------------------------------------------
# CSV interchange: header `id,time,status,arm[,event_type][,w1,...,wp]`
# ---------------------------------------------------------------------------

_FIXED_COLUMNS = ("id", "time", "status", "arm")


def read_records_csv(source) -> tuple[list[EventRecord], tuple[str, ...]]:
    """Read long-format records from a CSV path or file object.

    Returns the records plus the covariate column names (columns after the
    fixed ones, excluding the optional ``event_type``).
    """
    if hasattr(source, "read"):
        return _read_records(source)
    with open(source, newline="") as fh:
        return _read_records(fh)


def _read_records(fh) -> tuple[list[EventRecord], tuple[str, ...]]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        raise ValidationError("empty CSV input")
    missing = [c for c in _FIXED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValidationError(f"CSV missing required columns: {missing}")
    has_type = "event_type" in reader.fieldnames
    cov_names = tuple(
        c for c in reader.fieldnames if c not in _FIXED_COLUMNS and c != "event_type"
    )
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            status = Status(int(row["status"]))
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: bad status {row['status']!r}") from exc
        etype = None
        if has_type and row["event_type"] not in (None, ""):
            etype = int(row["event_type"])
        cov = None
        if cov_names:
            try:
                cov = tuple(float(row[c]) for c in cov_names)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"line {lineno}: bad covariate value") from exc
        records.append(
            EventRecord(
                subject_id=row["id"],
                time=float(row["time"]),
                status=status,
                arm=int(row["arm"]),
                event_type=etype,
                covariates=cov,
            )
        )
    return records, cov_names


def write_records_csv(study: StudyDataset, fh) -> None:
    """Write a study in the CSV interchange format."""
    cov_names = study.covariate_names or tuple(
        f"w{k + 1}" for k in range(study.arm1.covariate_dim)
    )
    has_type = bool(study.arm1.event_type_labels.size or study.arm2.event_type_labels.size)
    header = list(_FIXED_COLUMNS)
    if has_type:
        header.append("event_type")
    header.extend(cov_names)
    writer = csv.writer(fh)
    writer.writerow(header)
    for r in study_to_records(study):
        row = [r.subject_id, repr(float(r.time)), int(r.status), r.arm]
        if has_type:
            row.append("" if r.event_type is None else r.event_type)
        row.extend(repr(float(c)) for c in (r.covariates or ()))
        writer.writerow(row)


def read_study_csv(source, tau: float) -> StudyDataset:
    """Read and ingest a study from CSV in one step."""
    records, cov_names = read_records_csv(source)
    study = ingest_records(records, tau)
    if cov_names:
        study = StudyDataset(study.arm1, study.arm2, study.tau, covariate_names=cov_names)
    return study

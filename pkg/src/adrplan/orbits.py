"""Orbital reduction: TLE ingestion, J2 node drift and the T/C/c problem tables.

Everything downstream of this module sees a :class:`ProblemInstance`, i.e. an
alignment-time matrix ``T`` (days from the reference epoch), a transfer-cost
matrix ``C`` and a disposal-cost vector ``c``.  Index 0 of every table is the
dummy node that anchors the start and end of a tour.

Note on signs: ``J2`` is carried as ``-1.082635854e-3`` and the drift-rate
formula is applied literally, so prograde orbits get a *positive* node rate.
Rates and RAAN propagation use the same convention, which keeps the alignment
tables internally consistent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
SECONDS_PER_DAY = 86400.0

# Day counts in this package are measured from this instant (UTC).
EPOCH_ORIGIN = datetime(2000, 1, 1, tzinfo=timezone.utc)

TLE_LINE_LENGTH = 69
INSTANCE_FORMAT = "adr-instance"
INSTANCE_VERSION = 1


class TleError(ValueError):
    """Raised for malformed two-line element records."""


class InstanceError(ValueError):
    """Raised when a problem instance violates its table conventions."""


@dataclass(frozen=True)
class PhysicalConstants:
    mu: float = 3.986004418e14  # m^3/s^2
    r_E: float = 6.378e6  # m
    J2: float = -0.1082635854e-2
    r_p: float = 1.02 * 6.378e6  # disposal perigee radius, m


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class OsculatingElements:
    """Keplerian elements at ``epoch`` (days since :data:`EPOCH_ORIGIN`).

    Lengths are in metres, angles in radians.
    """

    a: float
    e: float
    i: float
    raan: float
    argp: float
    mean_anomaly: float
    epoch: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {self.e}")
        if not 0.0 <= self.i <= math.pi:
            raise ValueError(f"inclination must lie in [0, pi], got {self.i}")
        if self.a <= 0.0:
            raise ValueError(f"semimajor axis must be positive, got {self.a}")
        for name in ("raan", "argp", "mean_anomaly"):
            object.__setattr__(self, name, normalize_angle(getattr(self, name)))


@dataclass(frozen=True)
class DebrisObject:
    id: int
    name: str
    elements: OsculatingElements
    designator: str = ""

    @property
    def label(self) -> str:
        return self.designator or self.name


@dataclass
class ProblemInstance:
    """Solver-facing description of a removal problem.

    ``T``, ``C`` and ``c`` include the dummy node at index 0, so their shapes
    are ``(n_t + 1, n_t + 1)`` and ``(n_t + 1,)``.  ``labels`` has ``n_t``
    entries naming real debris ``1..n_t``.
    """

    n_t: int
    n_s: int
    t_max: float
    t_s: float
    T: np.ndarray
    C: np.ndarray
    c: np.ndarray
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.T = np.asarray(self.T, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if not self.labels:
            self.labels = [str(i) for i in range(1, self.n_t + 1)]
        self.labels = [str(label) for label in self.labels]
        self.check()

    @classmethod
    def from_real_tables(
        cls,
        T: Sequence[Sequence[float]],
        C: Sequence[Sequence[float]],
        c: Sequence[float],
        *,
        n_s: int,
        t_max: float,
        t_s: float,
        labels: Sequence[str] | None = None,
    ) -> "ProblemInstance":
        """Build an instance from real-debris tables, synthesizing the dummy row/column."""
        T_real = np.asarray(T, dtype=float)
        C_real = np.asarray(C, dtype=float)
        c_real = np.asarray(c, dtype=float)
        n_t = T_real.shape[0]
        if T_real.shape != (n_t, n_t) or C_real.shape != (n_t, n_t) or c_real.shape != (n_t,):
            raise InstanceError("real tables must be N_t x N_t, N_t x N_t and N_t long")
        T_full = np.zeros((n_t + 1, n_t + 1))
        T_full[1:, 1:] = T_real
        T_full[1:, 0] = t_max
        C_full = np.zeros((n_t + 1, n_t + 1))
        C_full[1:, 1:] = C_real
        c_full = np.zeros(n_t + 1)
        c_full[1:] = c_real
        return cls(
            n_t=n_t,
            n_s=n_s,
            t_max=float(t_max),
            t_s=float(t_s),
            T=T_full,
            C=C_full,
            c=c_full,
            labels=list(labels) if labels is not None else [],
        )

    def check(self) -> None:
        n = self.n_t + 1
        if self.n_t < 1:
            raise InstanceError("an instance needs at least one real debris object")
        if not 1 <= self.n_s <= self.n_t:
            raise InstanceError(f"n_s must lie in 1..{self.n_t}, got {self.n_s}")
        if self.t_max <= 0 or self.t_s < 0:
            raise InstanceError("t_max must be positive and t_s nonnegative")
        if self.T.shape != (n, n) or self.C.shape != (n, n) or self.c.shape != (n,):
            raise InstanceError(f"tables must have shapes ({n},{n}), ({n},{n}), ({n},)")
        if len(self.labels) != self.n_t:
            raise InstanceError(f"expected {self.n_t} labels, got {len(self.labels)}")
        for name, table in (("T", self.T), ("C", self.C), ("c", self.c)):
            if not np.all(np.isfinite(table)):
                raise InstanceError(f"{name} contains non-finite entries")
        real = slice(1, None)
        if not np.array_equal(self.T[real, real], self.T[real, real].T):
            raise InstanceError("T must be symmetric over real debris")
        if not np.array_equal(self.C, self.C.T):
            raise InstanceError("C must be symmetric")
        if np.any(np.diag(self.T) != 0) or np.any(np.diag(self.C) != 0):
            raise InstanceError("T and C must have zero diagonals")
        if np.any(self.T[0, 1:] != 0) or np.any(self.T[1:, 0] != self.t_max):
            raise InstanceError("dummy conventions violated: need T[0][i] = 0 and T[i][0] = t_max")
        if np.any(self.C[0, :] != 0) or self.c[0] != 0:
            raise InstanceError("dummy conventions violated: need C[0][i] = C[i][0] = 0 and c[0] = 0")
        if np.any(self.C < 0) or np.any(self.c < 0):
            raise InstanceError("costs must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "format": INSTANCE_FORMAT,
            "version": INSTANCE_VERSION,
            "dummy_included": True,
            "n_t": self.n_t,
            "n_s": self.n_s,
            "t_max": self.t_max,
            "t_s": self.t_s,
            "labels": list(self.labels),
            "T": self.T.tolist(),
            "C": self.C.tolist(),
            "c": self.c.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemInstance":
        try:
            kwargs = dict(
                n_s=int(doc["n_s"]),
                t_max=float(doc["t_max"]),
                t_s=float(doc["t_s"]),
                labels=doc.get("labels") or None,
            )
            T, C, c = doc["T"], doc["C"], doc["c"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed instance document: {exc}") from exc
        try:
            if doc.get("dummy_included", False):
                labels = kwargs.pop("labels") or []
                inst = cls(T=T, C=C, c=c, n_t=len(c) - 1, labels=labels, **kwargs)
            else:
                inst = cls.from_real_tables(T, C, c, **kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InstanceError):
                raise
            raise InstanceError(f"malformed instance tables: {exc}") from exc
        if "n_t" in doc and int(doc["n_t"]) != inst.n_t:
            raise InstanceError(f"header n_t={doc['n_t']} disagrees with table size {inst.n_t}")
        return inst


def load_instance(path: str | Path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return ProblemInstance.from_dict(doc)


def save_instance(instance: ProblemInstance, path: str | Path, manifest: dict | None = None) -> None:
    doc = instance.to_dict()
    if manifest is not None:
        doc["manifest"] = manifest
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Time and angle helpers
# --------------------------------------------------------------------------


def normalize_angle(x: float) -> float:
    y = math.fmod(x, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    return 0.0 if y >= TWO_PI else y


def datetime_to_days(dt: datetime) -> float:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - EPOCH_ORIGIN).total_seconds() / SECONDS_PER_DAY


def days_to_datetime(days: float) -> datetime:
    return EPOCH_ORIGIN + timedelta(days=days)


def parse_date(text: str) -> float:
    """Parse an ISO date/time string (UTC assumed) into package day counts."""
    dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    return datetime_to_days(dt)


# --------------------------------------------------------------------------
# TLE records
# --------------------------------------------------------------------------

_ALPHA5 = "ABCDEFGHJKLMNPQRSTUVWXYZ"  # I and O are skipped


def tle_checksum(line: str) -> int:
    """Mod-10 checksum over the first 68 columns; minus signs count as 1."""
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _catalog_number(field_text: str) -> int:
    text = field_text.strip()
    if text and text[0].isalpha():
        head = _ALPHA5.index(text[0].upper())
        return (head + 10) * 10000 + int(text[1:])
    return int(text)


def _epoch_days(field_text: str) -> float:
    yy = int(field_text[:2])
    year = 1900 + yy if yy >= 57 else 2000 + yy
    day_of_year = float(field_text[2:])
    start = datetime(year, 1, 1, tzinfo=timezone.utc)
    return datetime_to_days(start) + day_of_year - 1.0


def _designator(field_text: str) -> str:
    text = field_text.strip()
    if len(text) < 5:
        return text
    yy = int(text[:2])
    year = 1900 + yy if yy >= 57 else 2000 + yy
    return f"{year}-{text[2:5]}{text[5:]}"


def _field(line: str, start: int, stop: int, what: str, conv=float):
    text = line[start - 1 : stop]
    try:
        return conv(text)
    except ValueError:
        raise TleError(f"cannot parse {what} from columns {start}-{stop}: {text!r}") from None


def _check_line(line: str, number: int) -> None:
    if len(line) != TLE_LINE_LENGTH:
        raise TleError(f"line {number} must be {TLE_LINE_LENGTH} characters, got {len(line)}")
    if line[0] != str(number):
        raise TleError(f"line {number} must start with '{number}'")
    if not line[68].isdigit():
        raise TleError(f"line {number} checksum column is not a digit")
    expected = tle_checksum(line)
    if int(line[68]) != expected:
        raise TleError(f"line {number} checksum mismatch: found {line[68]}, computed {expected}")


def parse_tle(
    name_line: str | None,
    line1: str,
    line2: str,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> DebrisObject:
    """Decode one TLE record into a :class:`DebrisObject`."""
    line1 = line1.rstrip("\r\n")
    line2 = line2.rstrip("\r\n")
    _check_line(line1, 1)
    _check_line(line2, 2)

    catnum = _field(line1, 3, 7, "catalog number", _catalog_number)
    if _field(line2, 3, 7, "catalog number", _catalog_number) != catnum:
        raise TleError("catalog numbers on lines 1 and 2 differ")
    designator = _field(line1, 10, 17, "international designator", _designator)
    epoch = _field(line1, 19, 32, "epoch", _epoch_days)

    inc = math.radians(_field(line2, 9, 16, "inclination"))
    raan = math.radians(_field(line2, 18, 25, "RAAN"))
    ecc = _field(line2, 27, 33, "eccentricity", lambda s: float("0." + s.strip()))
    argp = math.radians(_field(line2, 35, 42, "argument of perigee"))
    mean_anomaly = math.radians(_field(line2, 44, 51, "mean anomaly"))
    rev_per_day = _field(line2, 53, 63, "mean motion")
    if rev_per_day <= 0:
        raise TleError(f"mean motion must be positive, got {rev_per_day}")
    if ecc >= 1.0:
        raise TleError(f"eccentricity {ecc} is not an elliptic orbit")

    n = rev_per_day * TWO_PI / SECONDS_PER_DAY
    a = (constants.mu / n**2) ** (1.0 / 3.0)
    try:
        elements = OsculatingElements(a, ecc, inc, raan, argp, mean_anomaly, epoch)
    except ValueError as exc:
        raise TleError(str(exc)) from exc

    name = name_line.strip() if name_line else ""
    if name.startswith("0 "):
        name = name[2:].strip()
    return DebrisObject(id=catnum, name=name or designator, elements=elements, designator=designator)


def iter_tle_records(lines: Iterable[str]) -> Iterator[tuple[int, str | None, str, str]]:
    """Group text lines into ``(line_number, name, line1, line2)`` records.

    ``line_number`` is the 1-based position of the first line of the record
    (the name line when present).  Blank lines are ignored.  A data line
    without its partner is yielded with an empty ``line2`` so that
    :func:`parse_tle` reports it.
    """
    items = [(no, raw.rstrip("\r\n")) for no, raw in enumerate(lines, start=1) if raw.strip()]
    name: str | None = None
    name_no: int | None = None
    idx = 0
    while idx < len(items):
        no, line = items[idx]
        if line.startswith("1 ") and idx + 1 < len(items) and items[idx + 1][1].startswith("2 "):
            yield (name_no if name is not None else no), name, line, items[idx + 1][1]
            name = name_no = None
            idx += 2
            continue
        if line.startswith(("1 ", "2 ")):
            yield (name_no if name is not None else no), name, line, ""
            name = name_no = None
        else:
            name, name_no = line, no
        idx += 1


def read_tle_file(
    path: str | Path,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    skip_bad: bool = False,
) -> tuple[list[DebrisObject], list[str]]:
    """Parse every record in a TLE file.

    Returns the parsed objects and a list of per-record problems (each tagged
    with its line number).  Problems are fatal unless ``skip_bad`` is set.
    """
    with open(path, encoding="utf-8") as fh:
        records = list(iter_tle_records(fh))
    objects: list[DebrisObject] = []
    problems: list[str] = []
    for lineno, name, line1, line2 in records:
        try:
            objects.append(parse_tle(name, line1, line2, constants))
        except TleError as exc:
            problems.append(f"line {lineno}: {exc}")
    if problems and not skip_bad:
        raise TleError("; ".join(problems))
    return objects, problems


def format_tle(
    catnum: int,
    designator: str,
    epoch: float,
    inclination_deg: float,
    raan_deg: float,
    eccentricity: float,
    argp_deg: float,
    mean_anomaly_deg: float,
    mean_motion: float,
    rev_number: int = 0,
    name: str | None = None,
) -> list[str]:
    """Write a syntactically valid TLE record (zero drag terms).

    ``designator`` is the short form, e.g. ``"82092RP"``; ``epoch`` is in
    package day counts; ``mean_motion`` is in revolutions per day.
    """
    dt = days_to_datetime(epoch)
    year_start = datetime(dt.year, 1, 1, tzinfo=timezone.utc)
    day_of_year = (dt - year_start).total_seconds() / SECONDS_PER_DAY + 1.0
    ecc_text = f"{eccentricity:.7f}"[2:]
    line1 = (
        f"1 {catnum:05d}U {designator:<8s} {dt.year % 100:02d}{day_of_year:012.8f} "
        f" .00000000  00000-0  00000-0 0  999"
    )
    line2 = (
        f"2 {catnum:05d} {inclination_deg:8.4f} {raan_deg:8.4f} {ecc_text} "
        f"{argp_deg:8.4f} {mean_anomaly_deg:8.4f} {mean_motion:11.8f}{rev_number % 100000:5d}"
    )
    line1 += str(tle_checksum(line1))
    line2 += str(tle_checksum(line2))
    lines = [line1, line2]
    if name is not None:
        lines.insert(0, name)
    return lines


# --------------------------------------------------------------------------
# Drift, alignment and costs
# --------------------------------------------------------------------------


def raan_rate(elements: OsculatingElements, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Secular node rate in rad/day, using the package's J2 sign convention."""
    n = math.sqrt(constants.mu / elements.a**3)
    p = elements.a * (1.0 - elements.e**2)
    rate = -1.5 * (constants.r_E / p) ** 2 * n * constants.J2 * math.cos(elements.i)
    return rate * SECONDS_PER_DAY


def raan_at(elements: OsculatingElements, rate: float, t: float) -> float:
    if t < elements.epoch:
        raise ValueError(f"cannot propagate backwards: t={t} precedes epoch {elements.epoch}")
    return normalize_angle(elements.raan + rate * (t - elements.epoch))


def alignment_time(
    omega_j: float,
    omega_k: float,
    rate_j: float,
    rate_k: float,
    t_max: float,
    *,
    rate_rtol: float = 1e-9,
    rate_atol: float = 1e-12,
    angle_tol: float = 1e-12,
) -> float:
    """Days until the two node lines first coincide.

    Returns 0 when the nodes already coincide and ``t_max + 1`` when the
    drift rates are equal (within ``rate_rtol`` relative or ``rate_atol``
    rad/day absolute) but the nodes differ, i.e. the pair never aligns
    within the horizon.
    """
    d_omega = normalize_angle(omega_j) - normalize_angle(omega_k)
    d_rate = rate_k - rate_j
    aligned = abs(d_omega) <= angle_tol or abs(abs(d_omega) - TWO_PI) <= angle_tol
    if aligned:
        return 0.0
    scale = max(abs(rate_j), abs(rate_k))
    if abs(d_rate) <= max(rate_rtol * scale, rate_atol):
        return t_max + 1.0

    if d_omega >= 0:
        K = 0 if d_rate >= 0 else -1
    else:
        K = 1 if d_rate >= 0 else 0
    t = (d_omega + K * TWO_PI) / d_rate
    if t < 0.0:
        t += TWO_PI / abs(d_rate)
    return max(t, 0.0)


def transfer_cost(
    elem_j: OsculatingElements,
    elem_k: OsculatingElements,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> float:
    """Approximate delta-v (m/s) to move between two near-circular orbits."""
    if elem_k.a < elem_j.a:
        elem_j, elem_k = elem_k, elem_j
    v_j = math.sqrt(constants.mu / elem_j.a)
    da = abs(elem_k.a - elem_j.a) / elem_j.a
    de = abs(elem_k.e - elem_j.e)
    di = abs(elem_k.i - elem_j.i)
    return 0.5 * v_j * math.sqrt(da * da + de * de + di * di)


def disposal_cost(elem_j: OsculatingElements, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Delta-v (m/s) to lower the orbit to the reentry perigee radius."""
    if elem_j.a < constants.r_p:
        raise ValueError(
            f"semimajor axis {elem_j.a:.1f} m is below the disposal radius {constants.r_p:.1f} m"
        )
    return math.sqrt(constants.mu / constants.r_p) - math.sqrt(constants.mu / elem_j.a)


def build_instance(
    catalog: Sequence[DebrisObject],
    t0: float,
    n_s: int,
    t_max: float,
    t_s: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    late_as_sentinel: bool = True,
) -> ProblemInstance:
    """Reduce a debris catalog to T/C/c tables with times counted from ``t0``.

    With ``late_as_sentinel`` every alignment later than ``t_max`` is stored
    as the no-alignment sentinel ``t_max + 1``.  Such a leg can never be part
    of a tour that meets the deadline, so the feasible set is unchanged, but
    chains of late legs now collide in the timing penalty instead of looking
    consistent to it.
    """
    if not catalog:
        raise InstanceError("catalog is empty")
    ids = [obj.id for obj in catalog]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InstanceError(f"duplicate catalog ids: {dupes}")
    if not 1 <= n_s <= len(catalog):
        raise InstanceError(f"n_s must lie in 1..{len(catalog)}, got {n_s}")

    n_t = len(catalog)
    rates = [raan_rate(obj.elements, constants) for obj in catalog]
    omegas = []
    for obj, rate in zip(catalog, rates):
        try:
            omegas.append(raan_at(obj.elements, rate, t0))
        except ValueError as exc:
            raise InstanceError(f"{obj.label}: {exc}") from exc

    T = np.zeros((n_t + 1, n_t + 1))
    C = np.zeros((n_t + 1, n_t + 1))
    c = np.zeros(n_t + 1)
    T[1:, 0] = t_max
    for j in range(n_t):
        try:
            c[j + 1] = disposal_cost(catalog[j].elements, constants)
        except ValueError as exc:
            raise InstanceError(f"{catalog[j].label}: {exc}") from exc
        for k in range(j + 1, n_t):
            t = alignment_time(omegas[j], omegas[k], rates[j], rates[k], t_max)
            if late_as_sentinel and t > t_max:
                t = t_max + 1.0
            T[j + 1, k + 1] = T[k + 1, j + 1] = t
            C[j + 1, k + 1] = C[k + 1, j + 1] = transfer_cost(
                catalog[j].elements, catalog[k].elements, constants
            )
    return ProblemInstance(
        n_t=n_t,
        n_s=n_s,
        t_max=float(t_max),
        t_s=float(t_s),
        T=T,
        C=C,
        c=c,
        labels=[obj.label for obj in catalog],
    )

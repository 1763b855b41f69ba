"""Labeled-function corpus: records, ingestion, splitting, stats, synthesis.

A record is one C/C++ function with an optional vulnerability labeling:
a CWE identifier, its coarser CWE abstraction type, and a CVSS severity
score in [0, 10].  CWE-ID to CWE-Type is many-to-one and must be globally
consistent within a corpus.
"""

from __future__ import annotations

import csv
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_COLUMNS = ("id", "code", "vulnerable", "cwe_id", "cwe_type", "cvss")

# Common CWE abstraction levels, used by the synthetic generator.
TYPE_NAMES = ("Base", "Class", "Variant", "Category", "Pillar", "Deprecated")


class DatasetError(ValueError):
    """Raised for malformed rows, invariant violations, or bad split inputs."""


@dataclass(frozen=True)
class VulnRecord:
    """One labeled function. Labels are present iff the function is vulnerable."""

    id: str
    code: str
    vulnerable: bool
    cwe_id: str | None = None
    cwe_type: str | None = None
    cvss: float | None = None

    def validate(self) -> None:
        if not self.vulnerable:
            if self.cwe_id is not None or self.cwe_type is not None or self.cvss is not None:
                raise DatasetError(
                    f"record {self.id!r}: non-vulnerable records must carry no labels"
                )
            return
        if self.cwe_id is not None and self.cwe_type is None:
            raise DatasetError(f"record {self.id!r}: cwe_id present without cwe_type")
        if self.cvss is not None and not (0.0 <= self.cvss <= 10.0):
            raise DatasetError(f"record {self.id!r}: cvss {self.cvss} outside [0, 10]")


@dataclass
class LabelRegistry:
    """Stable label index spaces plus the many-to-one CWE-ID -> CWE-Type map."""

    cwe_ids: list[str]
    cwe_types: list[str]
    id_to_type: dict[str, str]

    def __post_init__(self) -> None:
        if len(set(self.cwe_ids)) != len(self.cwe_ids):
            raise DatasetError("duplicate cwe_id in registry")
        if len(set(self.cwe_types)) != len(self.cwe_types):
            raise DatasetError("duplicate cwe_type in registry")
        for cid in self.cwe_ids:
            if cid not in self.id_to_type:
                raise DatasetError(f"registry id_to_type missing {cid!r}")
            if self.id_to_type[cid] not in self.cwe_types:
                raise DatasetError(f"registry maps {cid!r} to unknown type")

    def id_index(self, cwe_id: str) -> int:
        try:
            return self.cwe_ids.index(cwe_id)
        except ValueError:
            raise DatasetError(f"unknown cwe_id {cwe_id!r}") from None

    def type_index(self, cwe_type: str) -> int:
        try:
            return self.cwe_types.index(cwe_type)
        except ValueError:
            raise DatasetError(f"unknown cwe_type {cwe_type!r}") from None

    def to_json(self) -> dict:
        return {
            "cwe_ids": self.cwe_ids,
            "cwe_types": self.cwe_types,
            "id_to_type": self.id_to_type,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LabelRegistry":
        return cls(
            cwe_ids=list(obj["cwe_ids"]),
            cwe_types=list(obj["cwe_types"]),
            id_to_type=dict(obj["id_to_type"]),
        )

    @classmethod
    def from_records(
        cls, records: Sequence[VulnRecord], row_numbers: Sequence[int] | None = None
    ) -> "LabelRegistry":
        """Build a registry from labeled records; labels are sorted for stability.

        row_numbers, when given, supplies the source file row of each record
        for error reporting.
        """
        if row_numbers is None:
            row_numbers = list(range(1, len(records) + 1))
        id_to_type: dict[str, str] = {}
        rows_by_id: dict[str, int] = {}
        for rec, row in zip(records, row_numbers):
            if rec.cwe_id is None:
                continue
            assert rec.cwe_type is not None
            prev = id_to_type.get(rec.cwe_id)
            if prev is None:
                id_to_type[rec.cwe_id] = rec.cwe_type
                rows_by_id[rec.cwe_id] = row
            elif prev != rec.cwe_type:
                raise DatasetError(
                    f"inconsistent mapping for {rec.cwe_id}: row {rows_by_id[rec.cwe_id]} "
                    f"says {prev!r}, row {row} says {rec.cwe_type!r}"
                )
        cwe_ids = sorted(id_to_type)
        cwe_types = sorted(set(id_to_type.values()))
        return cls(cwe_ids=cwe_ids, cwe_types=cwe_types, id_to_type=id_to_type)


@dataclass
class DatasetSplit:
    train: list[VulnRecord]
    validation: list[VulnRecord]
    test: list[VulnRecord]
    seed: int

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "train": [r.id for r in self.train],
            "validation": [r.id for r in self.validation],
            "test": [r.id for r in self.test],
        }

    def save_manifest(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def apply_manifest(records: Sequence[VulnRecord], manifest: dict) -> DatasetSplit:
    by_id = {r.id: r for r in records}
    parts = {}
    for name in ("train", "validation", "test"):
        try:
            parts[name] = [by_id[i] for i in manifest[name]]
        except KeyError as e:
            raise DatasetError(f"manifest id {e} not found in records") from None
    return DatasetSplit(seed=manifest.get("seed", 0), **parts)


# ---------------------------------------------------------------------------
# Ingestion


def _parse_bool(raw: str, row_no: int) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise DatasetError(f"row {row_no}: bad boolean {raw!r}")


def _record_from_fields(fields: dict, row_no: int) -> VulnRecord:
    missing = [c for c in CSV_COLUMNS if c not in fields]
    if missing:
        raise DatasetError(f"row {row_no}: missing fields {missing}")

    def opt(name: str) -> str | None:
        v = fields[name]
        if v is None:
            return None
        v = str(v).strip()
        return v or None

    vulnerable = fields["vulnerable"]
    if isinstance(vulnerable, str):
        vulnerable = _parse_bool(vulnerable, row_no)
    elif not isinstance(vulnerable, bool):
        raise DatasetError(f"row {row_no}: bad vulnerable value {vulnerable!r}")

    cvss_raw = fields["cvss"]
    cvss: float | None
    if cvss_raw is None or (isinstance(cvss_raw, str) and not cvss_raw.strip()):
        cvss = None
    else:
        try:
            cvss = float(cvss_raw)
        except (TypeError, ValueError):
            raise DatasetError(f"row {row_no}: bad cvss value {cvss_raw!r}") from None

    rec = VulnRecord(
        id=str(fields["id"]),
        code=str(fields["code"]),
        vulnerable=vulnerable,
        cwe_id=opt("cwe_id"),
        cwe_type=opt("cwe_type"),
        cvss=cvss,
    )
    try:
        rec.validate()
    except DatasetError as e:
        raise DatasetError(f"row {row_no}: {e}") from None
    return rec


def load_dataset(path: str | Path, format: str | None = None) -> tuple[list[VulnRecord], LabelRegistry]:
    """Load records from a CSV (header required) or JSONL file.

    Rows violating record invariants, malformed rows, and CWE-ID -> CWE-Type
    inconsistencies across rows all raise DatasetError with row numbers.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    if format not in ("csv", "jsonl"):
        raise DatasetError(f"unknown dataset format {format!r}")

    records: list[VulnRecord] = []
    row_numbers: list[int] = []
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DatasetError("empty CSV: header row required")
            unknown = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
            if unknown:
                raise DatasetError(f"CSV header missing columns {unknown}")
            for row_no, row in enumerate(reader, start=2):
                if None in row.values():
                    raise DatasetError(f"row {row_no}: wrong number of fields")
                records.append(_record_from_fields(row, row_no))
                row_numbers.append(row_no)
    else:
        with open(path, encoding="utf-8") as fh:
            for row_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetError(f"row {row_no}: bad JSON ({e.msg})") from None
                if not isinstance(obj, dict):
                    raise DatasetError(f"row {row_no}: expected an object")
                obj.setdefault("vulnerable", False)
                for col in CSV_COLUMNS:
                    obj.setdefault(col, None)
                records.append(_record_from_fields(obj, row_no))
                row_numbers.append(row_no)

    registry = LabelRegistry.from_records(records, row_numbers)
    return records, registry


def save_dataset(records: Sequence[VulnRecord], path: str | Path, format: str | None = None) -> None:
    """Write records as CSV (RFC-4180 quoting) or JSONL with the canonical columns."""
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow(
                    [
                        r.id,
                        r.code,
                        "true" if r.vulnerable else "false",
                        r.cwe_id or "",
                        r.cwe_type or "",
                        "" if r.cvss is None else repr(r.cvss),
                    ]
                )
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                obj = {
                    "id": r.id,
                    "code": r.code,
                    "vulnerable": r.vulnerable,
                    "cwe_id": r.cwe_id,
                    "cwe_type": r.cwe_type,
                    "cvss": r.cvss,
                }
                fh.write(json.dumps(obj, sort_keys=True) + "\n")
    else:
        raise DatasetError(f"unknown dataset format {format!r}")


# ---------------------------------------------------------------------------
# Splitting


def _partition_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    # Test rounds up, validation rounds half-up, train takes the remainder.
    # Keeps every partition within one record of its exact share.
    r_train, r_val, r_test = ratios
    eps = 1e-9
    n_test = min(n, math.ceil(n * r_test - eps))
    n_val = min(n - n_test, math.floor(n * r_val + 0.5 + eps))
    n_train = n - n_val - n_test
    return n_train, n_val, n_test


def split_dataset(
    records: Sequence[VulnRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic shuffled partition with the CWE coverage guarantee.

    Every CWE-ID present in the corpus ends up with at least one record in
    train: records of a CWE-ID that the shuffle left only in validation or
    test are moved into train, and the partitions are then refilled back to
    their target sizes with records that are safe to move out of train.
    """
    if not records:
        raise DatasetError("cannot split an empty record list")
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise DatasetError(f"ratios {ratios} must be non-negative and sum to 1")

    order = list(records)
    random.Random(seed).shuffle(order)
    n_train, n_val, n_test = _partition_sizes(len(order), ratios)
    train = order[:n_train]
    val = order[n_train : n_train + n_val]
    test = order[n_train + n_val :]

    covered = {r.cwe_id for r in train if r.cwe_id is not None}
    moved = [r for r in val + test if r.cwe_id is not None and r.cwe_id not in covered]
    if moved:
        moved_ids = {id(r) for r in moved}
        val = [r for r in val if id(r) not in moved_ids]
        test = [r for r in test if id(r) not in moved_ids]
        train = train + moved

    # Refill the depleted partitions from train, newest first so the moves
    # concentrate on CWE-IDs that now have surplus train records.  A record
    # may leave train only if its CWE-ID keeps at least one other record there.
    counts = Counter(r.cwe_id for r in train if r.cwe_id is not None)
    for part, target in ((val, n_val), (test, n_test)):
        i = len(train) - 1
        while len(part) < target and i >= 0:
            cand = train[i]
            if cand.cwe_id is None or counts[cand.cwe_id] > 1:
                if cand.cwe_id is not None:
                    counts[cand.cwe_id] -= 1
                part.append(cand)
                del train[i]
            i -= 1

    return DatasetSplit(train=train, validation=val, test=test, seed=seed)


# ---------------------------------------------------------------------------
# Synthetic corpus


@dataclass
class SyntheticSpec:
    """Knobs for the deterministic synthetic corpus generator."""

    n_records: int
    n_cwe_ids: int = 6
    n_cwe_types: int = 3
    vocabulary: tuple[str, ...] = (
        "buf", "len", "idx", "ptr", "count", "size", "data",
        "tmp", "src", "dst", "offset", "limit", "acc", "mask",
    )
    seed: int = 0


_MARKER_WORDS = (
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
    "xray", "yankee", "zulu",
)


def _marker(cwe_index: int) -> str:
    # distinct letters-only identifiers so classes never share a subtoken
    # with filler code or with each other
    parts = []
    k = cwe_index
    while True:
        parts.append(_MARKER_WORDS[k % len(_MARKER_WORDS)])
        k //= len(_MARKER_WORDS)
        if k == 0:
            break
    return "hazard_" + "_".join(reversed(parts))


def synthetic_cvss(code: str, cwe_index: int) -> float:
    """Noiseless severity target: 10 * planted density, clamped to [1.2, 10.0].

    Density is the fraction of whitespace-separated words of the function
    text that contain the planted marker identifier.
    """
    words = code.split()
    planted = sum(1 for w in words if _marker(cwe_index) in w)
    return max(1.2, min(10.0, 10.0 * planted / len(words)))


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[VulnRecord], LabelRegistry]:
    """Generate a labeled corpus where every signal is planted and learnable.

    Even-indexed records are vulnerable and embed marker calls whose
    identifier is a fixed function of the record's CWE-ID; the CVSS label is
    the documented density formula (see synthetic_cvss).  CWE-IDs are dealt
    round-robin, as is the CWE-ID -> CWE-Type map.
    """
    if not (spec.n_cwe_ids >= spec.n_cwe_types >= 1):
        raise DatasetError("need n_cwe_ids >= n_cwe_types >= 1")

    cwe_ids = [f"CWE-{9001 + i}" for i in range(spec.n_cwe_ids)]
    type_names = list(TYPE_NAMES) + [f"Type-{k}" for k in range(len(TYPE_NAMES), spec.n_cwe_types)]
    cwe_types = type_names[: spec.n_cwe_types]
    id_to_type = {cid: cwe_types[i % spec.n_cwe_types] for i, cid in enumerate(cwe_ids)}
    registry = LabelRegistry(cwe_ids=cwe_ids, cwe_types=sorted(cwe_types), id_to_type=id_to_type)

    rng = random.Random(spec.seed)
    records: list[VulnRecord] = []
    vuln_counter = 0
    for i in range(spec.n_records):
        vulnerable = i % 2 == 0
        name = f"probe_{i}"
        vocab = spec.vocabulary
        a, b = rng.choice(vocab), rng.choice(vocab)
        lines = [f"int {name}(int {a}, char *{b}) {{"]
        for _ in range(rng.randint(4, 8)):
            x, y = rng.choice(vocab), rng.choice(vocab)
            stmt = rng.choice([f"{x}++;", f"{x}--;", f"{x} = {y};", f"{x} += {y};"])
            lines.append("    " + stmt)
        if vulnerable:
            cwe_index = vuln_counter % spec.n_cwe_ids
            vuln_counter += 1
            marker = _marker(cwe_index)
            n_markers = rng.randint(2, 14)
            pos = rng.randint(1, len(lines))
            planted: list[str] = []
            for j in range(0, n_markers, 4):
                args = [f"{marker}({rng.choice(vocab)});" for _ in range(min(4, n_markers - j))]
                planted.append("    " + " ".join(args))
            lines[pos:pos] = planted
        lines.append("}")
        code = "\n".join(lines) + "\n"

        if vulnerable:
            cid = cwe_ids[cwe_index]
            records.append(
                VulnRecord(
                    id=f"synth-{i:05d}",
                    code=code,
                    vulnerable=True,
                    cwe_id=cid,
                    cwe_type=id_to_type[cid],
                    cvss=synthetic_cvss(code, cwe_index),
                )
            )
        else:
            records.append(VulnRecord(id=f"synth-{i:05d}", code=code, vulnerable=False))

    for rec in records:
        rec.validate()
    return records, registry


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class FieldStats:
    n: int
    mean: float
    median: float
    std: float
    q1: float
    q3: float
    min: float
    max: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "FieldStats":
        arr = np.asarray(values, dtype=np.float64)
        return cls(
            n=arr.size,
            mean=float(arr.mean()),
            median=float(np.median(arr)),
            std=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            q1=float(np.percentile(arr, 25)),
            q3=float(np.percentile(arr, 75)),
            min=float(arr.min()),
            max=float(arr.max()),
        )


@dataclass
class StatsSummary:
    n_records: int
    n_vulnerable: int
    n_cwe_ids: int
    n_cwe_types: int
    severity: FieldStats | None
    cwe_id_cardinality: FieldStats | None
    cwe_type_cardinality: FieldStats | None

    def to_text(self) -> str:
        rows = [
            ("CWE-ID cardinality", self.cwe_id_cardinality),
            ("CWE-Type cardinality", self.cwe_type_cardinality),
            ("Severity score", self.severity),
        ]
        lines = [
            f"records: {self.n_records} ({self.n_vulnerable} vulnerable), "
            f"{self.n_cwe_ids} CWE-IDs, {self.n_cwe_types} CWE-Types",
            f"{'field':<22} {'mean':>8} {'median':>8} {'std':>8} {'q1':>8} {'q3':>8} {'min':>8} {'max':>8}",
        ]
        for name, st in rows:
            if st is None:
                lines.append(f"{name:<22} {'-':>8}")
                continue
            lines.append(
                f"{name:<22} {st.mean:>8.2f} {st.median:>8.2f} {st.std:>8.2f} "
                f"{st.q1:>8.2f} {st.q3:>8.2f} {st.min:>8.2f} {st.max:>8.2f}"
            )
        return "\n".join(lines)


def dataset_stats(records: Sequence[VulnRecord]) -> StatsSummary:
    """Descriptive statistics over present fields only."""
    if not records:
        raise DatasetError("no records")
    cvss = [r.cvss for r in records if r.cvss is not None]
    id_counts = Counter(r.cwe_id for r in records if r.cwe_id is not None)
    type_counts = Counter(r.cwe_type for r in records if r.cwe_type is not None)
    return StatsSummary(
        n_records=len(records),
        n_vulnerable=sum(1 for r in records if r.vulnerable),
        n_cwe_ids=len(id_counts),
        n_cwe_types=len(type_counts),
        severity=FieldStats.from_values(cvss) if cvss else None,
        cwe_id_cardinality=FieldStats.from_values(list(id_counts.values())) if id_counts else None,
        cwe_type_cardinality=(
            FieldStats.from_values(list(type_counts.values())) if type_counts else None
        ),
    )

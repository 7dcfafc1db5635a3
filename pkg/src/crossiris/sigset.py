"""Comparison specifications: which probe/enrollment pairs are genuine or imposter.

File format (UTF-8, LF, no quoting)::

    [ENROLL]
    template_id,identity_id,path
    [PROBE]
    template_id,identity_id,path
    [COMPARE]
    probe_template_id,enrolled_template_id,G|I

Declared labels are authoritative. They are never recomputed from identity
ids, even when the two disagree.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

from .exceptions import DanglingReference, DuplicateComparison, MalformedSigSet

SECTIONS = ("[ENROLL]", "[PROBE]", "[COMPARE]")


class Label(str, enum.Enum):
    GENUINE = "G"
    IMPOSTER = "I"


def _check_field(value: str) -> None:
    if not value or value != value.strip() or any(ch in value for ch in ",\r\n"):
        raise MalformedSigSet(f"field {value!r} is empty, padded, or holds a comma or line break")


@dataclass(frozen=True)
class Entry:
    template_id: str
    identity_id: str
    path: str


@dataclass(frozen=True)
class Comparison:
    probe_id: str
    enrolled_id: str
    label: Label


@dataclass(frozen=True)
class SigSet:
    enrollment_entries: tuple[Entry, ...]
    probe_entries: tuple[Entry, ...]
    comparisons: tuple[Comparison, ...]

    def __post_init__(self):
        for name in ("enrollment_entries", "probe_entries", "comparisons"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        for e in (*self.enrollment_entries, *self.probe_entries):
            for value in (e.template_id, e.identity_id, e.path):
                _check_field(value)
        for c in self.comparisons:
            _check_field(c.probe_id)
            _check_field(c.enrolled_id)
        for section, entries in (("ENROLL", self.enrollment_entries), ("PROBE", self.probe_entries)):
            seen = set()
            for e in entries:
                if e.template_id in seen:
                    raise MalformedSigSet(f"duplicate template id {e.template_id!r} in [{section}]")
                seen.add(e.template_id)
        enrolled = {e.template_id for e in self.enrollment_entries}
        probes = {e.template_id for e in self.probe_entries}
        pairs = set()
        for c in self.comparisons:
            if c.probe_id not in probes:
                raise DanglingReference(f"comparison references unknown probe template {c.probe_id!r}")
            if c.enrolled_id not in enrolled:
                raise DanglingReference(
                    f"comparison references unknown enrolled template {c.enrolled_id!r}"
                )
            key = (c.probe_id, c.enrolled_id)
            if key in pairs:
                raise DuplicateComparison(f"comparison {c.probe_id},{c.enrolled_id} declared twice")
            pairs.add(key)

    def enrollment_by_id(self) -> dict[str, Entry]:
        return {e.template_id: e for e in self.enrollment_entries}

    def probe_by_id(self) -> dict[str, Entry]:
        return {e.template_id: e for e in self.probe_entries}

    def identities(self) -> dict[str, list[str]]:
        """Enrollment template ids grouped by identity, in file order."""
        groups: dict[str, list[str]] = {}
        for e in self.enrollment_entries:
            groups.setdefault(e.identity_id, []).append(e.template_id)
        return groups


def _fields(line: str, lineno: int, n: int) -> list[str]:
    parts = line.split(",")
    if len(parts) != n or any(p == "" for p in parts):
        raise MalformedSigSet(f"line {lineno}: expected {n} non-empty comma-separated fields: {line!r}")
    return parts


def parse_sigset_text(text: str) -> SigSet:
    entries: dict[str, list[Entry]] = {"[ENROLL]": [], "[PROBE]": []}
    comparisons: list[Comparison] = []
    section = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line in SECTIONS:
            section = line
            continue
        if line.startswith("["):
            raise MalformedSigSet(f"line {lineno}: unknown section {line!r}")
        if section is None:
            raise MalformedSigSet(f"line {lineno}: data before any section marker")
        if section == "[COMPARE]":
            probe, enrolled, label = _fields(line, lineno, 3)
            try:
                comparisons.append(Comparison(probe, enrolled, Label(label)))
            except ValueError:
                raise MalformedSigSet(f"line {lineno}: label must be G or I, got {label!r}") from None
        else:
            entries[section].append(Entry(*_fields(line, lineno, 3)))
    return SigSet(entries["[ENROLL]"], entries["[PROBE]"], comparisons)


def parse_sigset(path: str | os.PathLike) -> SigSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedSigSet(f"{os.fspath(path)}: not UTF-8 ({exc})") from None
    return parse_sigset_text(text)


def serialize_sigset(sigset: SigSet) -> str:
    lines = ["[ENROLL]"]
    lines += [f"{e.template_id},{e.identity_id},{e.path}" for e in sigset.enrollment_entries]
    lines.append("[PROBE]")
    lines += [f"{e.template_id},{e.identity_id},{e.path}" for e in sigset.probe_entries]
    lines.append("[COMPARE]")
    lines += [f"{c.probe_id},{c.enrolled_id},{c.label.value}" for c in sigset.comparisons]
    return "\n".join(lines) + "\n"


def write_sigset(sigset: SigSet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_sigset(sigset))


def derive_labels(sigset: SigSet) -> dict[tuple[str, str], Label]:
    """Declared label per (probe, enrolled) pair, exactly as written."""
    return {(c.probe_id, c.enrolled_id): c.label for c in sigset.comparisons}

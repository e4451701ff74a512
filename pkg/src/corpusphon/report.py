"""Validation findings and reports.

Validators never raise on bad data; they collect findings with a severity so
callers can decide what is fatal. The machine-readable rendering is one line
per finding: SEVERITY<TAB>location<TAB>message (the CLI prepends a file
column for batch output).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Severity(enum.Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"
    INFO = "INFO"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Finding:
    severity: Severity
    location: str
    message: str

    def machine_line(self, file: str | None = None) -> str:
        fields = [self.severity.value]
        if file is not None:
            fields.append(file)
        fields += [self.location, self.message]
        return "\t".join(fields)

    def human_line(self) -> str:
        loc = f" [{self.location}]" if self.location else ""
        return f"{self.severity.value}{loc}: {self.message}"


@dataclass
class Report:
    findings: list[Finding] = field(default_factory=list)

    def add(self, severity: Severity, location: str, message: str) -> None:
        self.findings.append(Finding(severity, location, message))

    def error(self, location: str, message: str) -> None:
        self.add(Severity.ERROR, location, message)

    def warning(self, location: str, message: str) -> None:
        self.add(Severity.WARNING, location, message)

    def info(self, location: str, message: str) -> None:
        self.add(Severity.INFO, location, message)

    def extend(self, other: "Report") -> None:
        self.findings.extend(other.findings)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.WARNING]

    @property
    def has_errors(self) -> bool:
        return any(f.severity is Severity.ERROR for f in self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def __bool__(self) -> bool:
        return bool(self.findings)

    def machine_text(self, file: str | None = None) -> str:
        return "".join(f.machine_line(file) + "\n" for f in self.findings)

    def human_text(self) -> str:
        return "".join(f.human_line() + "\n" for f in self.findings)

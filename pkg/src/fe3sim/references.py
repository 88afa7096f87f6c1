"""Bundled reference values and the comparison report used by ``--check``."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class ReferenceRecord:
    name: str
    expected: float
    tolerance: float
    provenance: str
    experiment: str = ""
    comparison: str = "within"

    def __post_init__(self):
        if self.comparison not in ("within", "greater"):
            raise ValueError(f"unknown comparison {self.comparison!r}")
        if self.comparison == "within" and not self.tolerance > 0:
            raise ValueError(f"record {self.name}: tolerance must be positive")

    def passes(self, measured: float) -> bool:
        if self.comparison == "greater":
            return measured > self.expected
        return abs(measured - self.expected) <= self.tolerance


@dataclass(frozen=True)
class CheckResult:
    record: ReferenceRecord
    measured: float
    passed: bool

    def line(self) -> str:
        r = self.record
        status = "PASS" if self.passed else "FAIL"
        if r.comparison == "greater":
            target = f"> {r.expected:g}"
        else:
            target = f"{r.expected:g} +- {r.tolerance:g}"
        return f"[{status}] {r.name}: measured {self.measured:.6g}, expected {target} ({r.provenance})"


def load_references(experiment: str | None = None) -> list:
    text = resources.files("fe3sim").joinpath("data/references.toml").read_text()
    records = [ReferenceRecord(**entry) for entry in tomllib.loads(text)["record"]]
    if experiment is not None:
        records = [r for r in records if r.experiment == experiment]
    return records


def compare_reference(results: dict, records) -> list:
    """Evaluate every record against ``results``; a missing key raises KeyError."""
    missing = [r.name for r in records if r.name not in results]
    if missing:
        raise KeyError(f"results lack reference quantities: {', '.join(missing)}")
    return [CheckResult(r, float(results[r.name]), r.passes(float(results[r.name]))) for r in records]

"""Validation results shared by the dynamics and network checkers."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Violation:
    """One broken invariant. ``where`` holds the offending indices/ids."""

    kind: str
    where: tuple = ()
    message: str = ""

    def __str__(self) -> str:
        loc = f" at {self.where}" if self.where else ""
        msg = f": {self.message}" if self.message else ""
        return f"{self.kind}{loc}{msg}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ValueError("; ".join(str(v) for v in self.violations))

"""Three-valued results for properties that are only semi-decidable."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Status(str, enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    UNKNOWN = "Unknown"


@dataclass
class Verdict:
    status: Status
    witness: Any = None
    budget_used: dict = field(default_factory=dict)
    step: int | None = None
    note: str = ""

    def __post_init__(self):
        if self.status is Status.FAILS and self.witness is None:
            raise ValueError("a failing verdict needs a witness")
        if self.status is Status.UNKNOWN and not self.budget_used:
            raise ValueError("an unknown verdict must report the exhausted budgets")

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def fails(self) -> bool:
        return self.status is Status.FAILS

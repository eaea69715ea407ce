"""Eventually-constant positive rate sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .errors import DomainError


@dataclass(frozen=True)
class RateSchedule:
    """Rates ``r_offset, r_offset+1, ...`` given by a finite head and a constant tail.

    ``head[i]`` is the rate at index ``offset + i``; every index past the head
    uses ``tail``.  Service schedules ``mu_n`` start at ``offset=1`` and
    arrival schedules ``lambda_n`` at ``offset=0``.
    """

    head: tuple[float, ...]
    tail: float
    offset: int = 1

    def __post_init__(self):
        head = tuple(float(r) for r in self.head)
        tail = float(self.tail)
        for r in head + (tail,):
            if not (r > 0 and math.isfinite(r)):
                raise DomainError(f"rates must be positive and finite, got {r!r}")
        if self.offset < 0:
            raise DomainError("schedule offset must be nonnegative")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def constant(cls, rate: float, offset: int = 1) -> "RateSchedule":
        return cls((), rate, offset)

    def __len__(self) -> int:
        return len(self.head)

    @property
    def last_head_index(self) -> int:
        """Largest index covered by the head (``offset - 1`` if the head is empty)."""
        return self.offset + len(self.head) - 1

    def rate(self, n: int) -> float:
        if n < self.offset:
            raise DomainError(f"index {n} precedes schedule offset {self.offset}")
        i = n - self.offset
        return self.head[i] if i < len(self.head) else self.tail

    __getitem__ = rate

    def shifted(self, k: int) -> "RateSchedule":
        """Schedule with ``r'_n = r_{n+k}``."""
        if k < 0:
            raise DomainError("shift must be nonnegative")
        return RateSchedule(self.head[k:], self.tail, self.offset)

    def to_dict(self) -> dict[str, Any]:
        return {"head": list(self.head), "tail": self.tail}

    @classmethod
    def from_dict(cls, record: Any, offset: int = 1) -> "RateSchedule":
        if isinstance(record, (int, float)):
            return cls.constant(record, offset)
        if not isinstance(record, dict) or set(record) - {"head", "tail"} or "tail" not in record:
            raise DomainError(f"rate schedule record must be a number or {{head, tail}}: {record!r}")
        return cls(tuple(record.get("head", ())), record["tail"], offset)

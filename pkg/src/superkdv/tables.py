"""Correlator tables: exact values keyed by (genus, sorted multi-index)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .exactcore import (
    ExactCoreError,
    Truncation,
    rational_from_str,
    rational_to_str,
)

# engines whose entries carry the implicit s-power 2 - 2g + 2|k|
S_GRADED_ENGINES = {"bgw", "spin", "zk", "zk-bracket"}


@dataclass
class CorrelatorTable:
    engine: str
    trunc: Truncation
    entries: dict[tuple[int, tuple[int, ...]], Fraction] = field(default_factory=dict)

    def key(self, g: int, k) -> tuple[int, tuple[int, ...]]:
        return (g, tuple(sorted(k)))

    def get(self, g: int, k) -> Fraction:
        return self.entries.get(self.key(g, k), Fraction(0))

    def set(self, g: int, k, value: Fraction) -> None:
        if value:
            self.entries[self.key(g, k)] = value

    def spower(self, g: int, k) -> int:
        """Implicit s-power of an entry for the s-graded engines."""
        if self.engine not in S_GRADED_ENGINES:
            raise ExactCoreError(f"engine {self.engine!r} carries no s-grading")
        return 2 - 2 * g + 2 * sum(k)

    def to_json(self) -> dict:
        rows = [
            {"g": g, "k": list(k), "v": rational_to_str(v)}
            for (g, k), v in sorted(self.entries.items())
        ]
        return {"engine": self.engine, "trunc": self.trunc.to_json(), "entries": rows}

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_json(cls, d: dict) -> "CorrelatorTable":
        table = cls(d["engine"], Truncation.from_json(d["trunc"]))
        for row in d["entries"]:
            table.entries[(row["g"], tuple(row["k"]))] = rational_from_str(row["v"])
        return table

"""Generator words: nested repeat groups over the three projections.

A word is a sequence of atoms (generator indices 1, 2, 3) and powers of
subwords.  Exponents are exact integers of any size, so the flattened
letter count of a faithful instance is astronomically large; flattening
and letter-wise application therefore take a hard cap and raise
WordTooLong beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WordTooLong

GENERATORS = (1, 2, 3)


@dataclass(frozen=True)
class Atom:
    gen: int

    def __post_init__(self):
        if self.gen not in GENERATORS:
            raise ValueError(f"unknown generator {self.gen}")


@dataclass(frozen=True)
class Power:
    body: tuple
    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("exponents must be at least 1")


@dataclass(frozen=True)
class Word:
    """Top-level word with marks recording where each stage block ends."""

    parts: tuple
    stage_marks: tuple[int, ...]

    def __post_init__(self):
        last = 0
        for m in self.stage_marks:
            if not last < m <= len(self.parts):
                raise ValueError("stage marks must increase within the word")
            last = m

    def letter_count(self) -> int:
        return sum(letter_count(p) for p in self.parts)

    def generators_used(self) -> set[int]:
        out: set[int] = set()
        for p in self.parts:
            _collect_generators(p, out)
        return out


def letter_count(part) -> int:
    if isinstance(part, Atom):
        return 1
    if isinstance(part, Power):
        return part.exponent * sum(letter_count(p) for p in part.body)
    raise TypeError(f"not a word part: {part!r}")


def _collect_generators(part, out: set[int]) -> None:
    if isinstance(part, Atom):
        out.add(part.gen)
    else:
        for p in part.body:
            _collect_generators(p, out)


def flatten(parts, cap: int) -> list[int]:
    """Expand to plain generator indices; raises WordTooLong above cap."""
    total = sum(letter_count(p) for p in parts)
    if total > cap:
        raise WordTooLong(total, cap)
    out: list[int] = []

    def emit(part):
        if isinstance(part, Atom):
            out.append(part.gen)
        else:
            for _ in range(part.exponent):
                for p in part.body:
                    emit(p)

    for p in parts:
        emit(p)
    return out


def run_length(parts, cap: int) -> list[tuple[int, int]]:
    """The flattened word as (generator, run) pairs."""
    letters = flatten(parts, cap)
    out: list[tuple[int, int]] = []
    for g in letters:
        if out and out[-1][0] == g:
            out[-1] = (g, out[-1][1] + 1)
        else:
            out.append((g, 1))
    return out


def apply_flattened(parts, matrices: dict[int, np.ndarray], x: np.ndarray,
                    cap: int) -> np.ndarray:
    """Letter-by-letter application, first letter first."""
    v = np.asarray(x, dtype=float).copy()
    for g in flatten(parts, cap):
        v = matrices[g] @ v
    return v


def sandwich_power(inner_exponent: int, outer_exponent: int) -> Power:
    """The block (E (P1 Q P1)^p E)^m over generators 1 -> E, 2 -> P1, 3 -> Q."""
    inner = Power(body=(Atom(2), Atom(3), Atom(2)), exponent=inner_exponent)
    return Power(body=(Atom(1), inner, Atom(1)), exponent=outer_exponent)

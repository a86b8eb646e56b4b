"""Square binary marker dictionaries with a rotation-aware minimum Hamming distance."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from boomtrack._io import atomic_write_text


class InfeasibleDictionaryError(ValueError):
    pass


def rotations(code: np.ndarray) -> list[np.ndarray]:
    """The four in-plane rotations; index k is ``np.rot90(code, k)``."""
    return [np.rot90(code, k) for k in range(4)]


def rotated_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Minimum Hamming distance between ``a`` and any rotation of ``b``."""
    return min(int(np.count_nonzero(a != r)) for r in rotations(b))


def self_rotation_distance(code: np.ndarray) -> int:
    """Distance between a code and its own non-trivial rotations."""
    return min(int(np.count_nonzero(code != np.rot90(code, k))) for k in (1, 2, 3))


@dataclass(frozen=True, eq=False)
class MarkerDictionary:
    grid: int
    codes: tuple[np.ndarray, ...]
    min_hamming: int

    def __post_init__(self) -> None:
        frozen = []
        for code in self.codes:
            c = np.asarray(code, dtype=np.uint8)
            if c.shape != (self.grid, self.grid):
                raise ValueError(f"code shape {c.shape} does not match grid {self.grid}")
            if np.any(c > 1):
                raise ValueError("codes must be 0/1 matrices")
            c = c.copy()
            c.setflags(write=False)
            frozen.append(c)
        object.__setattr__(self, "codes", tuple(frozen))

    def __len__(self) -> int:
        return len(self.codes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MarkerDictionary):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.min_hamming == other.min_hamming
            and len(self.codes) == len(other.codes)
            and all(np.array_equal(a, b) for a, b in zip(self.codes, other.codes))
        )

    @property
    def correction_radius(self) -> int:
        return max(0, (self.min_hamming - 1) // 2)

    def measured_min_distance(self) -> int:
        """Smallest distance over all id pairs (any rotation) and self-rotations."""
        best = self.grid * self.grid
        for i, a in enumerate(self.codes):
            best = min(best, self_rotation_distance(a))
            for b in self.codes[i + 1 :]:
                best = min(best, rotated_distance(a, b))
        return best

    def match(self, bits: np.ndarray) -> tuple[int, int, int]:
        """Closest ``(id, rotation, distance)`` for an observed bit matrix.

        ``rotation`` is the k with ``bits`` closest to ``np.rot90(code, k)``.
        Ties resolve to the lowest id, then the lowest k.
        """
        bits = np.asarray(bits, dtype=np.uint8)
        stack = np.stack(self.codes)  # (n, g, g)
        best = (-1, 0, self.grid * self.grid + 1)
        for k in range(4):
            rotated = np.rot90(stack, k, axes=(1, 2))
            dist = np.count_nonzero(rotated != bits[None], axis=(1, 2))
            i = int(np.argmin(dist))
            d = int(dist[i])
            if d < best[2] or (d == best[2] and i < best[0]):
                best = (i, k, d)
        return best

    # text format: one line per id, grid*grid characters of 0/1
    def dumps(self) -> str:
        header = f"# grid={self.grid} min_hamming={self.min_hamming} count={len(self.codes)}\n"
        return header + "".join("".join(str(int(b)) for b in c.ravel()) + "\n" for c in self.codes)

    def save(self, path: str | os.PathLike) -> None:
        atomic_write_text(path, self.dumps())

    @classmethod
    def loads(cls, text: str) -> "MarkerDictionary":
        min_hamming = None
        rows: list[str] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, value = tok.partition("=")
                    if key == "min_hamming":
                        min_hamming = int(value)
                continue
            if set(line) - {"0", "1"}:
                raise ValueError(f"dictionary line {lineno}: expected only 0/1 characters")
            rows.append(line)
        if not rows:
            raise ValueError("dictionary file holds no codes")
        n = len(rows[0])
        grid = int(round(n**0.5))
        if grid * grid != n or any(len(r) != n for r in rows):
            raise ValueError("dictionary lines must all have grid*grid characters")
        codes = tuple(np.array([int(ch) for ch in r], dtype=np.uint8).reshape(grid, grid) for r in rows)
        d = cls(grid, codes, min_hamming if min_hamming is not None else 1)
        if min_hamming is None:
            object.__setattr__(d, "min_hamming", d.measured_min_distance())
        return d

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MarkerDictionary":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def generate_dictionary(
    grid: int,
    count: int,
    min_hamming: int,
    seed: int = 0,
    max_attempts: int = 200_000,
) -> MarkerDictionary:
    """Seeded random search for ``count`` codes pairwise at least ``min_hamming`` apart.

    Distances are taken over all four rotations, and each code must also be
    ``min_hamming`` away from its own rotations so that orientation decodes
    unambiguously. Codes too close to all-black or all-white are skipped:
    plain dark blobs would otherwise decode as markers.
    """
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if min_hamming < 1:
        raise ValueError(f"min_hamming must be >= 1, got {min_hamming}")
    nbits = grid * grid
    if min_hamming > nbits or count > 2**nbits // 4:
        raise InfeasibleDictionaryError(f"cannot place {count} codes of {nbits} bits at distance {min_hamming}")

    rng = np.random.default_rng(seed)
    zeros = np.zeros((grid, grid), dtype=np.uint8)
    ones = np.ones((grid, grid), dtype=np.uint8)
    accepted: list[np.ndarray] = []
    # all rotations of accepted codes, stacked for vectorized distance checks
    pool = np.empty((0, grid, grid), dtype=np.uint8)
    attempts = 0
    while len(accepted) < count:
        if attempts >= max_attempts:
            raise InfeasibleDictionaryError(
                f"placed only {len(accepted)}/{count} codes at distance {min_hamming} "
                f"after {max_attempts} attempts"
            )
        attempts += 1
        cand = rng.integers(0, 2, size=(grid, grid), dtype=np.uint8)
        if self_rotation_distance(cand) < min_hamming:
            continue
        if rotated_distance(zeros, cand) < min_hamming or rotated_distance(ones, cand) < min_hamming:
            continue
        if len(pool) and int(np.count_nonzero(pool != cand[None], axis=(1, 2)).min()) < min_hamming:
            continue
        accepted.append(cand)
        pool = np.concatenate([pool, np.stack(rotations(cand))])
        attempts = 0
    return MarkerDictionary(grid, tuple(accepted), min_hamming)

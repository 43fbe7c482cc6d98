"""Sudoku generation, validity checks and a bitmask backtracking solver."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from ..errors import GenerationError, ParameterError

Grid = tuple[tuple[int, ...], ...]

DEFAULT_GIVENS = 30
MIN_GIVENS = 17
_ALL = 0x3FE  # bits 1..9
_MAX_ATTEMPTS = 25


def _box(r: int, c: int) -> int:
    return (r // 3) * 3 + c // 3


def as_grid(rows: Sequence[Sequence[int]]) -> Grid:
    grid = tuple(tuple(int(d) for d in row) for row in rows)
    if len(grid) != 9 or any(len(row) != 9 for row in grid):
        raise ParameterError("grid must be 9x9")
    return grid


def is_valid_solution(grid: Sequence[Sequence[int]]) -> bool:
    """True iff every row, column and box holds 1..9 exactly once."""
    if len(grid) != 9 or any(len(row) != 9 for row in grid):
        return False
    digits = set(range(1, 10))
    for i in range(9):
        if set(grid[i]) != digits:
            return False
        if {grid[r][i] for r in range(9)} != digits:
            return False
        br, bc = 3 * (i // 3), 3 * (i % 3)
        if {grid[br + dr][bc + dc] for dr in range(3) for dc in range(3)} != digits:
            return False
    return True


def extends(solution: Sequence[Sequence[int]], givens: Sequence[Sequence[int]]) -> bool:
    return all(g == 0 or g == s for grow, srow in zip(givens, solution) for g, s in zip(grow, srow))


def _search(givens: Sequence[Sequence[int]], limit: int, rng: random.Random | None = None) -> list[Grid]:
    cells = [int(d) for row in givens for d in row]
    rows, cols, boxes = [0] * 9, [0] * 9, [0] * 9
    for i, d in enumerate(cells):
        if d:
            r, c = divmod(i, 9)
            bit = 1 << d
            if (rows[r] | cols[c] | boxes[_box(r, c)]) & bit:
                return []
            rows[r] |= bit
            cols[c] |= bit
            boxes[_box(r, c)] |= bit
    empties = [i for i, d in enumerate(cells) if d == 0]
    found: list[Grid] = []

    def rec() -> bool:
        best, best_mask, best_count = -1, 0, 10
        for i in empties:
            if cells[i]:
                continue
            r, c = divmod(i, 9)
            mask = _ALL & ~(rows[r] | cols[c] | boxes[_box(r, c)])
            count = bin(mask).count("1")
            if count < best_count:
                best, best_mask, best_count = i, mask, count
                if count <= 1:
                    break
        if best < 0:
            found.append(tuple(tuple(cells[r * 9:(r + 1) * 9]) for r in range(9)))
            return len(found) >= limit
        if best_count == 0:
            return False
        r, c = divmod(best, 9)
        b = _box(r, c)
        digits = [d for d in range(1, 10) if best_mask & (1 << d)]
        if rng is not None:
            rng.shuffle(digits)
        for d in digits:
            bit = 1 << d
            cells[best] = d
            rows[r] |= bit
            cols[c] |= bit
            boxes[b] |= bit
            if rec():
                return True
            cells[best] = 0
            rows[r] &= ~bit
            cols[c] &= ~bit
            boxes[b] &= ~bit
        return False

    rec()
    return found


def solve(givens: Sequence[Sequence[int]]) -> Grid | None:
    """First completion in digit order, or None when the givens are unsatisfiable."""
    found = _search(givens, 1)
    return found[0] if found else None


def count_solutions(givens: Sequence[Sequence[int]], limit: int = 2) -> int:
    """Number of completions, counting stops at ``limit``."""
    return len(_search(givens, limit))


@dataclass(frozen=True)
class SudokuInstance:
    givens: Grid
    solution: Grid
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "givens", as_grid(self.givens))
        object.__setattr__(self, "solution", as_grid(self.solution))
        if any(not 0 <= d <= 9 for row in self.givens for d in row):
            raise ParameterError("givens digits must be in 0..9")
        if not is_valid_solution(self.solution):
            raise ParameterError("solution is not a valid completed sudoku")
        if not extends(self.solution, self.givens):
            raise ParameterError("solution contradicts the givens")

    @property
    def given_count(self) -> int:
        return sum(1 for row in self.givens for d in row if d)

    def to_dict(self) -> dict:
        return {
            "givens": [list(r) for r in self.givens],
            "solution": [list(r) for r in self.solution],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SudokuInstance":
        return cls(as_grid(data["givens"]), as_grid(data["solution"]), int(data["seed"]))


def gen_sudoku(target_givens: int = DEFAULT_GIVENS, seed: int = 0, require_unique: bool = False) -> SudokuInstance:
    """Fill a grid by randomized backtracking, then blank cells in random order.

    With ``require_unique`` a removal is kept only if the puzzle still has
    exactly one completion; when that stalls above ``target_givens`` a fresh
    solution is drawn from the same random stream.
    """
    if not MIN_GIVENS <= target_givens <= 81:
        raise ParameterError(f"target_givens must be in {MIN_GIVENS}..81, got {target_givens}")
    rng = random.Random(seed)
    empty = [[0] * 9 for _ in range(9)]
    for _ in range(_MAX_ATTEMPTS):
        solution = _search(empty, 1, rng)[0]
        cells = [d for row in solution for d in row]
        order = list(range(81))
        rng.shuffle(order)
        remaining = 81
        for i in order:
            if remaining == target_givens:
                break
            kept = cells[i]
            cells[i] = 0
            if require_unique and count_solutions([cells[r * 9:(r + 1) * 9] for r in range(9)], 2) != 1:
                cells[i] = kept
                continue
            remaining -= 1
        if remaining == target_givens:
            givens = tuple(tuple(cells[r * 9:(r + 1) * 9]) for r in range(9))
            return SudokuInstance(givens, solution, seed)
    raise GenerationError(f"could not reach {target_givens} givens with a unique solution (seed {seed})")

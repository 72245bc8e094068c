"""Voxel body plans: parsing, validation and lattice neighborhoods.

A body plan is written as rows of ``0``/``1`` characters separated by ``-``,
listed top to bottom, e.g. the biped ``"1111-1111-1001"`` whose last row holds
the two legs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidBody, MalformedSpec, NotAVoxel

WORM = "11111"
BIPED = "1111-1111-1001"
COMB = "1111111-1010101"

NAMED_MORPHOLOGIES = {"worm": WORM, "biped": BIPED, "comb": COMB}

# Direction order used everywhere for inputs, outputs and neighbor tables.
UP, LEFT, DOWN, RIGHT = 0, 1, 2, 3
DIRECTIONS = ("up", "left", "down", "right")
OPPOSITE = (DOWN, RIGHT, UP, LEFT)
_OFFSETS = ((-1, 0), (0, -1), (1, 0), (0, 1))


class CellIndex(NamedTuple):
    row: int
    col: int


class NeighborSet(NamedTuple):
    up: Optional[CellIndex]
    left: Optional[CellIndex]
    down: Optional[CellIndex]
    right: Optional[CellIndex]


@dataclass(frozen=True)
class MorphologyGrid:
    width: int
    height: int
    occupied: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        if len(self.occupied) != self.height or any(len(r) != self.width for r in self.occupied):
            raise MalformedSpec("occupancy matrix does not match width/height")
        _validate_body(self.occupied)

    @classmethod
    def from_array(cls, occupied) -> "MorphologyGrid":
        arr = np.asarray(occupied, dtype=bool)
        if arr.ndim != 2 or arr.size == 0:
            raise MalformedSpec("occupancy must be a non-empty 2D matrix")
        rows = tuple(tuple(bool(v) for v in row) for row in arr)
        return cls(width=arr.shape[1], height=arr.shape[0], occupied=rows)

    def is_voxel(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width and self.occupied[r][c]

    @property
    def n_voxels(self) -> int:
        return sum(sum(row) for row in self.occupied)

    def as_array(self) -> np.ndarray:
        return np.array(self.occupied, dtype=bool)

    def render(self) -> str:
        return "-".join("".join("1" if v else "0" for v in row) for row in self.occupied)

    def __str__(self) -> str:
        return self.render()


def _validate_body(occupied) -> None:
    cells = [(r, c) for r, row in enumerate(occupied) for c, v in enumerate(row) if v]
    if not cells:
        raise InvalidBody("body has no voxels")
    cellset = set(cells)
    seen = {cells[0]}
    stack = [cells[0]]
    while stack:
        r, c = stack.pop()
        for dr, dc in _OFFSETS:
            nb = (r + dr, c + dc)
            if nb in cellset and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(cells):
        raise InvalidBody(f"body is not 4-connected ({len(cells) - len(seen)} voxels unreachable)")


def parse_morphology(spec: str) -> MorphologyGrid:
    """Parse a ``'-'``-separated body plan; named shapes (``worm``...) are accepted too."""
    spec = NAMED_MORPHOLOGIES.get(spec.strip(), spec.strip())
    if not spec:
        raise MalformedSpec("empty morphology string")
    rows = spec.split("-")
    width = len(rows[0])
    for row in rows:
        if len(row) != width or width == 0:
            raise MalformedSpec(f"ragged or empty row {row!r} in {spec!r}")
        if set(row) - {"0", "1"}:
            raise MalformedSpec(f"unexpected characters in row {row!r}")
    occupied = tuple(tuple(ch == "1" for ch in row) for row in rows)
    return MorphologyGrid(width=width, height=len(rows), occupied=occupied)


def neighbors(grid: MorphologyGrid, cell) -> NeighborSet:
    if not grid.is_voxel(cell):
        raise NotAVoxel(f"{tuple(cell)} is not an occupied cell")
    r, c = cell
    found = []
    for dr, dc in _OFFSETS:
        nb = CellIndex(r + dr, c + dc)
        found.append(nb if grid.is_voxel(nb) else None)
    return NeighborSet(*found)


def voxel_order(grid: MorphologyGrid) -> list[CellIndex]:
    """Occupied cells in row-major order, top row first."""
    return [
        CellIndex(r, c)
        for r in range(grid.height)
        for c in range(grid.width)
        if grid.occupied[r][c]
    ]


def neighbor_table(grid: MorphologyGrid) -> np.ndarray:
    """``(n_voxels, 4)`` table of neighbor voxel indices (up, left, down, right), -1 if absent."""
    order = voxel_order(grid)
    index = {cell: i for i, cell in enumerate(order)}
    table = np.full((len(order), 4), -1, dtype=np.intp)
    for i, cell in enumerate(order):
        for d, nb in enumerate(neighbors(grid, cell)):
            if nb is not None:
                table[i, d] = index[nb]
    return table

"""City maps, derived environment layers and the pairwise line-of-sight table.

Grid coordinates are ``(x, y)`` with ``x`` pointing east and ``y`` north.
All per-cell arrays are indexed ``array[x, y]``.  In the JSON map file the
first string of ``cells`` is the northernmost row (``y = M - 1``) and the
character index within a string is ``x``, so the file reads like a map with
north up.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

MIN_SIZE = 2
MAX_SIZE = 256

LOS_MAGIC = b"AHLOS\x00\x00\x01"
_LOS_HEADER = struct.Struct("<8sH32s")


class MapFormatError(ValueError):
    """The map file is not well-formed JSON of the expected shape."""


class MapValidationError(ValueError):
    """The map parsed but violates a structural invariant."""


class LosCacheError(ValueError):
    """A LoS cache file is truncated or has the wrong magic."""


class StaleCacheError(LosCacheError):
    """A LoS cache file was computed for a different map."""


class CellKind(enum.IntEnum):
    FREE = 0
    LANDING = 1
    NFZ = 2
    TALL_BUILDING = 3
    SMALL_BUILDING = 4


CELL_CODES = {
    ".": CellKind.FREE,
    "L": CellKind.LANDING,
    "N": CellKind.NFZ,
    "T": CellKind.TALL_BUILDING,
    "S": CellKind.SMALL_BUILDING,
}
CODE_OF_KIND = {kind: code for code, kind in CELL_CODES.items()}


@dataclass(frozen=True, eq=False)
class CityMap:
    """Square grid world with cell semantics.

    ``kinds`` is an ``(M, M)`` integer array of :class:`CellKind` values indexed
    ``[x, y]``.  ``start_cells`` is the designated subset of landing cells from
    which missions may start; it defaults to every landing cell.
    """

    name: str
    kinds: np.ndarray
    cell_size: float = 10.0
    altitude: float = 10.0
    start_cells: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        kinds = np.asarray(self.kinds, dtype=np.int8)
        if kinds.ndim != 2 or kinds.shape[0] != kinds.shape[1]:
            raise MapValidationError(f"map grid must be square, got shape {kinds.shape}")
        size = kinds.shape[0]
        if not MIN_SIZE <= size <= MAX_SIZE:
            raise MapValidationError(f"map size {size} outside [{MIN_SIZE}, {MAX_SIZE}]")
        if not np.isin(kinds, [int(k) for k in CellKind]).all():
            raise MapValidationError("map contains unknown cell kinds")
        if not (kinds == CellKind.LANDING).any():
            raise MapValidationError("map has no landing cell")
        if self.cell_size <= 0 or self.altitude <= 0:
            raise MapValidationError("cell_size and altitude must be positive")
        kinds.setflags(write=False)
        object.__setattr__(self, "kinds", kinds)

        starts = tuple((int(x), int(y)) for x, y in self.start_cells)
        if not starts:
            starts = tuple((int(x), int(y)) for x, y in zip(*np.nonzero(kinds == CellKind.LANDING)))
        for x, y in starts:
            if not (0 <= x < size and 0 <= y < size) or kinds[x, y] != CellKind.LANDING:
                raise MapValidationError(f"start cell {(x, y)} is not a landing cell")
        if len(set(starts)) != len(starts):
            raise MapValidationError("duplicate start cells")
        object.__setattr__(self, "start_cells", starts)

    @property
    def size(self) -> int:
        return self.kinds.shape[0]

    @cached_property
    def landing(self) -> np.ndarray:
        """Boolean layer of the landing set L."""
        return _frozen(self.kinds == CellKind.LANDING)

    @cached_property
    def blocked(self) -> np.ndarray:
        """Boolean layer of Z: cells UAVs may not occupy (NFZ and tall buildings)."""
        return _frozen((self.kinds == CellKind.NFZ) | (self.kinds == CellKind.TALL_BUILDING))

    @cached_property
    def buildings(self) -> np.ndarray:
        """Boolean layer of B: cells that obstruct wireless links."""
        return _frozen(
            (self.kinds == CellKind.TALL_BUILDING) | (self.kinds == CellKind.SMALL_BUILDING)
        )

    @cached_property
    def layers(self) -> np.ndarray:
        """Environment tensor of shape ``(M, M, 3)`` with channels [landing, Z, B]."""
        stack = np.stack([self.landing, self.blocked, self.buildings], axis=-1).astype(np.float32)
        return _frozen(stack)

    @cached_property
    def rows(self) -> list[str]:
        """Cell codes as written in the map file (north row first)."""
        size = self.size
        return [
            "".join(CODE_OF_KIND[CellKind(self.kinds[x, y])] for x in range(size))
            for y in reversed(range(size))
        ]

    @cached_property
    def digest(self) -> bytes:
        """SHA-256 over the canonical cell string; keys the LoS cache."""
        canonical = f"{self.size}\n" + "\n".join(self.rows)
        return hashlib.sha256(canonical.encode("utf-8")).digest()

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.size and 0 <= y < self.size

    def cell_index(self, x: int, y: int) -> int:
        return x * self.size + y

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cell_size": self.cell_size,
            "altitude": self.altitude,
            "cells": self.rows,
            "start_cells": [list(c) for c in self.start_cells],
        }


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def parse_map(data: dict, default_name: str = "unnamed") -> CityMap:
    """Build a :class:`CityMap` from the decoded JSON document."""
    if not isinstance(data, dict):
        raise MapFormatError("map document must be a JSON object")
    rows = data.get("cells")
    if not isinstance(rows, list) or not rows or not all(isinstance(r, str) for r in rows):
        raise MapFormatError("'cells' must be a non-empty list of strings")
    size = len(rows)
    for i, row in enumerate(rows):
        if len(row) != size:
            raise MapFormatError(f"row {i} has length {len(row)}, expected {size}")
    kinds = np.empty((size, size), dtype=np.int8)
    for r, row in enumerate(rows):
        y = size - 1 - r
        for x, code in enumerate(row):
            kind = CELL_CODES.get(code)
            if kind is None:
                raise MapValidationError(f"unknown cell code {code!r} at row {r}, column {x}")
            kinds[x, y] = kind
    starts = data.get("start_cells", [])
    try:
        starts = tuple((int(x), int(y)) for x, y in starts)
    except (TypeError, ValueError) as exc:
        raise MapFormatError("'start_cells' must be a list of [x, y] pairs") from exc
    return CityMap(
        name=str(data.get("name", default_name)),
        kinds=kinds,
        cell_size=float(data.get("cell_size", 10.0)),
        altitude=float(data.get("altitude", 10.0)),
        start_cells=starts,
    )


def load_map(file_path: str | Path) -> CityMap:
    """Load and validate a JSON map file.

    Names without a directory component that are not existing files are looked
    up among the bundled maps (``manhattan32``, ``urban50``, ``tiny8``).
    """
    path = Path(file_path)
    if not path.exists():
        bundled = Path(__file__).parent / "maps" / f"{path.stem.lower()}.json"
        if path.parent == Path(".") and bundled.exists():
            path = bundled
        else:
            raise FileNotFoundError(f"map file not found: {file_path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"{path}: {exc}") from exc
    return parse_map(data, default_name=path.stem)


def save_map(city: CityMap, file_path: str | Path) -> None:
    Path(file_path).write_text(json.dumps(city.to_dict(), indent=1) + "\n", encoding="utf-8")


def supercover(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Cells touched by the segment between two cell centers, endpoints included.

    Cells are unit squares around integer centers.  Where the segment passes
    exactly through a cell corner, both cells sharing that corner with the
    current cell are reported as well.  Integer arithmetic only.
    """
    nx, ny = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x1 > x0 else -1
    sy = 1 if y1 > y0 else -1
    x, y = x0, y0
    cells = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        # compares the parameters of the next vertical and horizontal grid-line crossing
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


@dataclass(frozen=True, eq=False)
class LosTable:
    """Symmetric boolean LoS matrix over flattened cell indices ``x * M + y``."""

    size: int
    map_hash: bytes
    bits: np.ndarray

    def los(self, p: tuple[int, int], q: tuple[int, int]) -> bool:
        return bool(self.bits[p[0] * self.size + p[1], q[0] * self.size + q[1]])

    def from_cell(self, p: tuple[int, int]) -> np.ndarray:
        """``(M, M)`` view: LoS from ``p`` to every cell."""
        return self.bits[p[0] * self.size + p[1]].reshape(self.size, self.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LosTable):
            return NotImplemented
        return (
            self.size == other.size
            and self.map_hash == other.map_hash
            and np.array_equal(self.bits, other.bits)
        )


def compute_los_table(city: CityMap) -> LosTable:
    """LoS for every ordered cell pair via supercover offsets per displacement.

    The set of cells a segment touches depends only on the displacement
    between its endpoints, so each displacement is traced once and tested
    against the building layer for all source cells with shifted slices.
    """
    size = city.size
    obstacles = city.buildings
    bits = np.ones((size * size, size * size), dtype=bool)
    grid_x, grid_y = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    for dx in range(-(size - 1), size):
        xa, xb = max(0, -dx), min(size, size - dx)
        for dy in range(-(size - 1), size):
            interior = supercover(0, 0, dx, dy)[1:-1]
            if not interior:
                continue
            ya, yb = max(0, -dy), min(size, size - dy)
            hit = np.zeros((xb - xa, yb - ya), dtype=bool)
            for ox, oy in interior:
                hit |= obstacles[xa + ox : xb + ox, ya + oy : yb + oy]
            if not hit.any():
                continue
            sx = grid_x[xa:xb, ya:yb]
            sy = grid_y[xa:xb, ya:yb]
            src = (sx * size + sy)[hit]
            dst = ((sx + dx) * size + (sy + dy))[hit]
            bits[src, dst] = False
    bits.setflags(write=False)
    return LosTable(size=size, map_hash=city.digest, bits=bits)


def write_los_cache(table: LosTable, path: str | Path) -> None:
    packed = np.packbits(table.bits.ravel(), bitorder="little")
    with open(path, "wb") as handle:
        handle.write(_LOS_HEADER.pack(LOS_MAGIC, table.size, table.map_hash))
        handle.write(packed.tobytes())


def read_los_cache(path: str | Path, city: CityMap) -> LosTable:
    """Read a cache file, refusing it unless it was computed for ``city``."""
    raw = Path(path).read_bytes()
    if len(raw) < _LOS_HEADER.size:
        raise LosCacheError(f"{path}: truncated header")
    magic, size, digest = _LOS_HEADER.unpack_from(raw)
    if magic != LOS_MAGIC:
        raise LosCacheError(f"{path}: bad magic {magic!r}")
    if digest != city.digest or size != city.size:
        raise StaleCacheError(f"{path}: cache was computed for a different map")
    n_bits = size**4
    payload = np.frombuffer(raw, dtype=np.uint8, offset=_LOS_HEADER.size)
    if payload.size != (n_bits + 7) // 8:
        raise LosCacheError(f"{path}: payload has {payload.size} bytes, expected {(n_bits + 7) // 8}")
    bits = np.unpackbits(payload, count=n_bits, bitorder="little").astype(bool)
    bits = bits.reshape(size * size, size * size)
    bits.setflags(write=False)
    return LosTable(size=size, map_hash=digest, bits=bits)


def load_or_compute_los(city: CityMap, cache_path: str | Path | None = None) -> tuple[LosTable, bool]:
    """Return ``(table, from_cache)``; a stale or broken cache is recomputed and rewritten."""
    if cache_path is not None and Path(cache_path).exists():
        try:
            return read_los_cache(cache_path, city), True
        except LosCacheError:
            pass
    table = compute_los_table(city)
    if cache_path is not None:
        Path(cache_path).parent.mkdir(parents=True, exist_ok=True)
        write_los_cache(table, cache_path)
    return table, False

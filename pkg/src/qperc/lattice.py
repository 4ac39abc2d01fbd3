"""Honeycomb lattice geometry and random site occupation.

The rows x cols index grid is embedded as a brick-wall honeycomb.  Site
(r, c) belongs to sublattice ``(r + c) % 2``; each row is a zigzag chain and
even-parity sites carry a vertical bond to the row above, odd-parity sites
to the row below.  With pitch ``a`` the positions are::

    x = c * a * sqrt(3) / 2
    y = 1.5 * a * r - 0.5 * a * ((r + c) % 2)

which puts nearest neighbours at distance ``a`` and next-to-nearest
neighbours (same sublattice) at ``a * sqrt(3)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .rng import site_uniforms

SQRT3 = math.sqrt(3.0)

NEAREST = "nearest"
NEXT_NEAREST = "next_nearest"

# (drow, dcol) offsets; the vertical bond direction depends on parity
_NN_EVEN = ((0, -1), (0, 1), (1, 0))
_NN_ODD = ((0, -1), (0, 1), (-1, 0))
_NNN = ((0, -2), (0, 2), (-1, -1), (-1, 1), (1, -1), (1, 1))


class SiteIndex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class LatticeSpec:
    rows: int
    cols: int
    pitch: float = 15.0  # µm

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise DomainError("rows and cols must be integers")
        if self.rows < 2 or self.cols < 2:
            raise DomainError(f"lattice must be at least 2x2, got {self.rows}x{self.cols}")
        if not self.pitch > 0:
            raise DomainError(f"pitch must be positive, got {self.pitch}")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def flat(self, site) -> int:
        r, c = site
        return r * self.cols + c

    def unflat(self, k: int) -> SiteIndex:
        return SiteIndex(*divmod(int(k), self.cols))

    def contains(self, site) -> bool:
        r, c = site
        return 0 <= r < self.rows and 0 <= c < self.cols


def _check_index(spec: LatticeSpec, index) -> SiteIndex:
    r, c = index
    if not spec.contains((r, c)):
        raise IndexError(f"site {tuple(index)} outside {spec.rows}x{spec.cols} lattice")
    return SiteIndex(int(r), int(c))


def site_coordinates(spec: LatticeSpec, index) -> tuple[float, float]:
    """Position of site ``index`` in µm."""
    r, c = _check_index(spec, index)
    a = spec.pitch
    return (c * a * SQRT3 / 2.0, 1.5 * a * r - 0.5 * a * ((r + c) % 2))


def coordinates_array(spec: LatticeSpec) -> np.ndarray:
    """(rows, cols, 2) array of site positions in µm."""
    r, c = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
    a = spec.pitch
    x = c * a * SQRT3 / 2.0
    y = 1.5 * a * r - 0.5 * a * ((r + c) % 2)
    return np.stack([x, y], axis=-1).astype(float)


def neighbor_offsets(site, kind: str):
    r, c = site
    if kind == NEAREST:
        return _NN_EVEN if (r + c) % 2 == 0 else _NN_ODD
    if kind == NEXT_NEAREST:
        return _NNN
    raise DomainError(f"unknown neighbor kind {kind!r}")


@lru_cache(maxsize=32)
def pair_table(rows: int, cols: int, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """All unordered in-range site pairs (flat indices, i < j) of one kind."""
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    r = r.ravel()
    c = c.ravel()
    src, dst = [], []
    if kind == NEAREST:
        # each bond listed once: rightward in-row bond and the upward vertical bond
        offsets = [(np.ones_like(r, bool), 0, 1), ((r + c) % 2 == 0, 1, 0)]
    elif kind == NEXT_NEAREST:
        offsets = [(np.ones_like(r, bool), 0, 2), (np.ones_like(r, bool), 1, -1),
                   (np.ones_like(r, bool), 1, 1)]
    else:
        raise DomainError(f"unknown neighbor kind {kind!r}")
    for sel, dr, dc in offsets:
        rr, cc = r + dr, c + dc
        ok = sel & (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
        a = r[ok] * cols + c[ok]
        b = rr[ok] * cols + cc[ok]
        src.append(np.minimum(a, b))
        dst.append(np.maximum(a, b))
    i = np.concatenate(src)
    j = np.concatenate(dst)
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    i.flags.writeable = False
    j.flags.writeable = False
    return i, j


@lru_cache(maxsize=32)
def nearest_neighbor_table(rows: int, cols: int) -> np.ndarray:
    """(n_sites, 3) flat nearest-neighbour indices, -1 where off-lattice."""
    table = -np.ones((rows * cols, 3), dtype=np.int64)
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        for slot, (dr, dc) in enumerate(neighbor_offsets((r, c), NEAREST)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                table[k, slot] = rr * cols + cc
    table.flags.writeable = False
    return table


@lru_cache(maxsize=32)
def injection_site(spec: LatticeSpec) -> SiteIndex:
    """Site nearest the lattice centroid; ties go to the lowest row-major index."""
    xy = coordinates_array(spec).reshape(-1, 2)
    d2 = ((xy - xy.mean(axis=0)) ** 2).sum(axis=1)
    return spec.unflat(int(np.argmin(d2)))


@dataclass(frozen=True, eq=False)
class Lattice:
    """Immutable occupied lattice; ``occupied`` is a read-only (rows, cols) mask."""

    spec: LatticeSpec
    occupied: np.ndarray
    occupation_probability: float
    injection: SiteIndex
    seed: int = 0
    _coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool)
        if occ.shape != (self.spec.rows, self.spec.cols):
            raise DomainError(f"mask shape {occ.shape} does not match spec")
        inj = _check_index(self.spec, self.injection)
        if not occ[inj]:
            raise DomainError(f"injection site {tuple(inj)} is vacant")
        occ.flags.writeable = False
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "injection", inj)

    @property
    def coordinates(self) -> np.ndarray:
        if self._coords is None:
            c = coordinates_array(self.spec)
            c.flags.writeable = False
            object.__setattr__(self, "_coords", c)
        return self._coords

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    @property
    def occupied_flat(self) -> np.ndarray:
        return self.occupied.ravel()

    def is_occupied(self, site) -> bool:
        return bool(self.occupied[_check_index(self.spec, site)])

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return (self.spec == other.spec
                and np.array_equal(self.occupied, other.occupied)
                and self.injection == other.injection
                and self.seed == other.seed
                and (self.occupation_probability == other.occupation_probability
                     or (math.isnan(self.occupation_probability)
                         and math.isnan(other.occupation_probability))))

    __hash__ = None


def occupation_mask(spec: LatticeSpec, P: float, seed: int) -> np.ndarray:
    u = site_uniforms(seed, spec.n_sites).reshape(spec.rows, spec.cols)
    mask = u < P
    mask[injection_site(spec)] = True
    return mask


def generate_lattice(spec: LatticeSpec, P: float, seed: int) -> Lattice:
    """Occupy every site independently with probability ``P``.

    The injection site is forced occupied.  The result is a pure function of
    ``(spec, P, seed)``.
    """
    if not (0.0 <= P <= 1.0):
        raise DomainError(f"occupation probability must lie in [0, 1], got {P}")
    return Lattice(spec, occupation_mask(spec, P, seed), float(P), injection_site(spec), int(seed))


def lattice_from_mask(spec: LatticeSpec, occupied, *, injection=None, P: float = float("nan"),
                      seed: int = 0) -> Lattice:
    """Wrap an explicit occupation mask (tests, file loading)."""
    inj = injection_site(spec) if injection is None else SiteIndex(*injection)
    return Lattice(spec, np.asarray(occupied, dtype=bool), float(P), inj, int(seed))


def neighbors(lattice: Lattice, site, kind: str = NEAREST) -> list[SiteIndex]:
    """Occupied neighbours of an occupied site.

    ``next_nearest`` ignores whether the intermediate sites are occupied.
    """
    s = _check_index(lattice.spec, site)
    if not lattice.occupied[s]:
        raise DomainError(f"query site {tuple(s)} is vacant")
    out = []
    for dr, dc in neighbor_offsets(s, kind):
        t = (s.row + dr, s.col + dc)
        if lattice.spec.contains(t) and lattice.occupied[t]:
            out.append(SiteIndex(*t))
    return out


# --- serialization ---------------------------------------------------------

def to_text_grid(lattice: Lattice) -> str:
    return "\n".join("".join("1" if v else "0" for v in row) for row in lattice.occupied) + "\n"


def parse_text_grid(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DomainError("empty grid")
    width = len(lines[0])
    if any(len(ln) != width for ln in lines) or any(set(ln) - {"0", "1"} for ln in lines):
        raise DomainError("grid rows must be equal-length strings of '0'/'1'")
    return np.array([[ch == "1" for ch in ln] for ln in lines], dtype=bool)


def from_text_grid(text: str, pitch: float = 15.0) -> Lattice:
    mask = parse_text_grid(text)
    spec = LatticeSpec(mask.shape[0], mask.shape[1], pitch)
    return lattice_from_mask(spec, mask)


def lattice_to_dict(lattice: Lattice) -> dict:
    spec = lattice.spec
    P = lattice.occupation_probability
    return {
        "spec": {"rows": spec.rows, "cols": spec.cols, "pitch": spec.pitch},
        "P": None if math.isnan(P) else P,
        "seed": lattice.seed,
        "injection": [lattice.injection.row, lattice.injection.col],
        "occupied": "".join("1" if v else "0" for v in lattice.occupied.ravel()),
    }


def lattice_from_dict(doc: dict) -> Lattice:
    s = doc["spec"]
    spec = LatticeSpec(int(s["rows"]), int(s["cols"]), float(s.get("pitch", 15.0)))
    bits = doc["occupied"]
    if len(bits) != spec.n_sites or set(bits) - {"0", "1"}:
        raise DomainError("occupied must be a row-major '0'/'1' string of rows*cols characters")
    mask = np.frombuffer(bits.encode(), dtype=np.uint8).reshape(spec.rows, spec.cols) == ord("1")
    P = doc.get("P")
    return lattice_from_mask(spec, mask, injection=doc.get("injection"),
                             P=float("nan") if P is None else float(P), seed=int(doc.get("seed", 0)))


def dumps_lattice(lattice: Lattice) -> str:
    return json.dumps(lattice_to_dict(lattice), indent=1)


def loads_lattice(text: str) -> Lattice:
    return lattice_from_dict(json.loads(text))

"""Percolation Hamiltonian over the occupied sites of a lattice.

Occupied pairs at nearest (pitch) or next-to-nearest (pitch * sqrt(3))
distance are coupled; every other matrix element, the diagonal included,
is zero.  Next-to-nearest couplings are present whether or not the site
between them is occupied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .lattice import NEAREST, NEXT_NEAREST, SQRT3, Lattice, SiteIndex, pair_table

DEFAULT_T1 = 0.3  # mm^-1, see calibrate_t1 and README "Coupling calibration"
DEFAULT_RATIO = 0.15  # t2 / t1


@dataclass(frozen=True)
class CouplingModel:
    """Exponentially decaying evanescent coupling.

    ``coupling(d) = t1 * exp(-beta * (d - reference_distance))`` with ``t1``
    in mm^-1, ``beta`` in µm^-1 and distances in µm.
    """

    t1: float = DEFAULT_T1
    beta: float = -math.log(DEFAULT_RATIO) / (15.0 * (SQRT3 - 1.0))
    reference_distance: float = 15.0

    def __post_init__(self):
        if not self.t1 > 0:
            raise DomainError(f"t1 must be positive, got {self.t1}")
        if not self.beta >= 0:
            raise DomainError(f"beta must be non-negative, got {self.beta}")
        if not self.reference_distance > 0:
            raise DomainError("reference_distance must be positive")

    @classmethod
    def from_ratio(cls, t1: float = DEFAULT_T1, ratio: float = DEFAULT_RATIO,
                   pitch: float = 15.0) -> "CouplingModel":
        """Model whose next-to-nearest coupling is ``ratio * t1``."""
        if not 0 < ratio <= 1:
            raise DomainError(f"ratio must lie in (0, 1], got {ratio}")
        return cls(t1, -math.log(ratio) / (pitch * (SQRT3 - 1.0)), pitch)

    @property
    def t2(self) -> float:
        return coupling_strength(self, self.reference_distance * SQRT3)


def coupling_strength(model: CouplingModel, distance: float) -> float:
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance}")
    return model.t1 * math.exp(-model.beta * (distance - model.reference_distance))


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Real symmetric coupling matrix (mm^-1) in the basis ``site_order``.

    ``site_order`` holds flat row-major lattice indices of the occupied sites
    in increasing order.
    """

    matrix: sp.csr_matrix
    site_order: np.ndarray
    cols: int

    @property
    def dimension(self) -> int:
        return int(self.site_order.size)

    def sites(self) -> list[SiteIndex]:
        return [SiteIndex(*divmod(int(k), self.cols)) for k in self.site_order]

    def basis_position(self, site) -> int:
        k = site[0] * self.cols + site[1]
        pos = int(np.searchsorted(self.site_order, k))
        if pos >= self.site_order.size or self.site_order[pos] != k:
            raise DomainError(f"site {tuple(site)} is not in the Hamiltonian basis")
        return pos

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def spectral_bound(self) -> float:
        """Gershgorin radius: max absolute row sum (the diagonal is zero)."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(np.abs(self.matrix).sum(axis=1).max())


def build_hamiltonian(lattice: Lattice, model: CouplingModel) -> SparseHamiltonian:
    spec = lattice.spec
    occ = lattice.occupied_flat
    order = np.flatnonzero(occ)
    if order.size == 0:
        raise DomainError("lattice has no occupied sites")
    position = np.full(spec.n_sites, -1, dtype=np.int64)
    position[order] = np.arange(order.size)

    rows, cols, vals = [], [], []
    for kind, dist in ((NEAREST, spec.pitch), (NEXT_NEAREST, spec.pitch * SQRT3)):
        i, j = pair_table(spec.rows, spec.cols, kind)
        keep = occ[i] & occ[j]
        t = coupling_strength(model, dist)
        if t == 0.0:
            continue
        a = position[i[keep]]
        b = position[j[keep]]
        rows += [a, b]
        cols += [b, a]
        vals.append(np.full(2 * a.size, t))
    n = order.size
    if vals:
        H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
    else:
        H = sp.csr_matrix((n, n))
    H.sort_indices()
    order.flags.writeable = False
    return SparseHamiltonian(H, order, spec.cols)


def export_coo(ham: SparseHamiltonian) -> str:
    """Coordinate-list text: a site-order table followed by ``i j value`` lines."""
    lines = [f"# dimension {ham.dimension}", "# site_order: index row col"]
    for pos, s in enumerate(ham.sites()):
        lines.append(f"# {pos} {s.row} {s.col}")
    coo = ham.matrix.tocoo()
    for i, j, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        lines.append(f"{i} {j} {v!r}")
    return "\n".join(lines) + "\n"

"""Choice of the nearest-neighbour coupling t1.

No coupling values are tabulated for the fabricated waveguides, so t1 is
fixed by a geometric rule instead: the largest t1 on a ``step`` grid for
which the P = 1 wavepacket at ``z_max`` keeps ``enclosed`` of its intensity
within the distance from the injection site to the nearest lattice edge.
The lattice then stays ballistic up to ``z_max`` without edge reflections.
For the 40x40, 20 mm setting this gives t1 = 0.30 per mm.
"""
from __future__ import annotations

import numpy as np

from .hamiltonian import DEFAULT_RATIO, CouplingModel, build_hamiltonian
from .lattice import LatticeSpec, generate_lattice
from .propagator import evolve, initial_state


def enclosed_radius(spec: LatticeSpec, model: CouplingModel, z: float, enclosed: float = 0.99) -> float:
    """Radius (µm) around the injection site holding ``enclosed`` of the P = 1 intensity."""
    lattice = generate_lattice(spec, 1.0, 0)
    ham = build_hamiltonian(lattice, model)
    psi = evolve(ham, initial_state(ham, lattice.injection), z)
    xy = lattice.coordinates.reshape(-1, 2)[ham.site_order]
    d = np.hypot(*(xy - lattice.coordinates[lattice.injection]).T)
    order = np.argsort(d, kind="stable")
    cum = np.cumsum(psi.intensity[order])
    return float(d[order][np.searchsorted(cum, enclosed * cum[-1])])


def edge_distance(spec: LatticeSpec) -> float:
    """Distance (µm) from the injection site to the nearest lattice edge."""
    lattice = generate_lattice(spec, 1.0, 0)
    xy = lattice.coordinates.reshape(-1, 2)
    x0, y0 = lattice.coordinates[lattice.injection]
    return float(min(x0 - xy[:, 0].min(), xy[:, 0].max() - x0, y0 - xy[:, 1].min(), xy[:, 1].max() - y0))


def calibrate_t1(spec: LatticeSpec = LatticeSpec(40, 40), z_max: float = 20.0,
                 ratio: float = DEFAULT_RATIO, enclosed: float = 0.99, step: float = 0.05,
                 t1_max: float = 2.0) -> float:
    limit = edge_distance(spec)
    best = None
    for k in range(1, int(round(t1_max / step)) + 1):
        t1 = round(k * step, 10)
        model = CouplingModel.from_ratio(t1, ratio, spec.pitch)
        if enclosed_radius(spec, model, z_max, enclosed) <= limit:
            best = t1
        else:
            break
    return best

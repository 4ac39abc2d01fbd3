"""Unitary evolution psi(z) = exp(-i H z) psi(0) of a single photon.

The production route is a Chebyshev expansion of the propagator.  With the
Gershgorin radius R bounding the spectrum of H, the rescaled X = H / R has
spectrum in [-1, 1] and

    exp(-i R z X) = J_0(Rz) + 2 sum_k (-i)^k J_k(Rz) T_k(X)

where J_k are Bessel functions of the first kind.  The series is cut once
k exceeds Rz and the coefficient magnitude drops below ``tol``.  A dense
eigendecomposition is kept as an independent oracle.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .errors import DomainError, PropagationError, ResourceError
from .hamiltonian import SparseHamiltonian

CHEBYSHEV_TOL = 1e-12
DENSE_LIMIT = 2000
NORM_TOL = 1e-10
# Light cone at P = 1: intensity above 1e-6 stays within nearest-neighbour
# graph distance LIGHT_CONE_SPEED * t1 * z + LIGHT_CONE_MARGIN (fitted on
# 60x60 runs up to z = 30 mm, where the measured speed is 3.5-4.5).
LIGHT_CONE_SPEED = 4.0
LIGHT_CONE_MARGIN = 8


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    site_order: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Intensities ``(len(z_samples), dimension)`` over the Hamiltonian basis."""

    z_samples: np.ndarray
    intensities: np.ndarray
    site_order: np.ndarray
    cols: int


def initial_state(ham: SparseHamiltonian, injection) -> StateVector:
    pos = ham.basis_position(injection)
    psi = np.zeros(ham.dimension, dtype=complex)
    psi[pos] = 1.0
    return StateVector(psi, ham.site_order)


def chebyshev_coefficients(rz: float, tol: float = CHEBYSHEV_TOL) -> np.ndarray:
    """Real Bessel weights J_k(Rz) kept by the truncation rule."""
    kmax = int(rz + 12.0 * max(rz, 1.0) ** (1.0 / 3.0) + 40)
    while True:
        j = jv(np.arange(kmax + 1), rz)
        tail = np.flatnonzero((np.arange(kmax + 1) > rz) & (2.0 * np.abs(j) < tol))
        if tail.size:
            return j[: tail[0]]
        kmax *= 2


def chebyshev_propagate(matrix, psi: np.ndarray, z: float, radius: float,
                        tol: float = CHEBYSHEV_TOL) -> np.ndarray:
    """exp(-i H z) psi for real symmetric ``matrix`` with spectrum in [-radius, radius]."""
    if z == 0.0 or radius == 0.0:
        return psi.copy()
    rz = radius * z
    sign = 1.0
    if rz < 0:
        # exp(+i H |z|) = conj(exp(-i H |z|)) for real H; fold the sign into the phases
        rz, sign = -rz, -1.0
    coef = chebyshev_coefficients(rz, tol)
    scale = 1.0 / radius
    t_prev = psi
    out = coef[0] * psi
    if coef.size == 1:
        return out
    t_cur = scale * (matrix @ psi)
    phase = -1j * sign
    out = out + 2.0 * coef[1] * phase * t_cur
    for k in range(2, coef.size):
        t_next = 2.0 * scale * (matrix @ t_cur) - t_prev
        phase *= -1j * sign
        out += (2.0 * coef[k] * phase) * t_next
        t_prev, t_cur = t_cur, t_next
    return out


def _check_z(z) -> float:
    z = float(z)
    if not np.isfinite(z):
        raise DomainError(f"propagation length must be finite, got {z}")
    return z


def evolve(ham: SparseHamiltonian, state: StateVector, z: float, *,
           method: str = "chebyshev", tol: float = CHEBYSHEV_TOL) -> StateVector:
    """Evolve ``state`` by propagation length ``z`` (mm)."""
    z = _check_z(z)
    if z < 0:
        raise DomainError(f"propagation length must be non-negative, got {z}")
    if method == "dense":
        return dense_oracle(ham, state, z)
    if method != "chebyshev":
        raise DomainError(f"unknown propagation method {method!r}")
    psi = chebyshev_propagate(ham.matrix, state.amplitudes, z, ham.spectral_bound(), tol)
    out = StateVector(psi, ham.site_order)
    if not abs(out.norm - state.norm) < NORM_TOL:
        raise PropagationError(f"norm drift {abs(out.norm - state.norm):.3e} at z={z}")
    return out


def dense_oracle(ham: SparseHamiltonian, state: StateVector, z: float) -> StateVector:
    """exp(-i H z) psi via full Hermitian eigendecomposition (any sign of z)."""
    z = _check_z(z)
    if ham.dimension > DENSE_LIMIT:
        raise ResourceError(f"dense oracle limited to dimension {DENSE_LIMIT}, got {ham.dimension}")
    w, v = np.linalg.eigh(ham.toarray())
    psi = v @ (np.exp(-1j * w * z) * (v.conj().T @ state.amplitudes))
    return StateVector(psi, ham.site_order)


def evolve_trace(ham: SparseHamiltonian, state: StateVector, z_grid, *,
                 method: str = "chebyshev", tol: float = CHEBYSHEV_TOL) -> EvolutionTrace:
    """Intensities at each ``z_grid`` sample, stepping sample to sample."""
    z = np.asarray(z_grid, dtype=float).ravel()
    if z.size == 0:
        raise DomainError("z grid is empty")
    if not np.all(np.isfinite(z)) or z[0] < 0 or np.any(np.diff(z) <= 0):
        raise DomainError("z grid must be finite, start at >= 0 and increase strictly")
    if method == "dense":
        if ham.dimension > DENSE_LIMIT:
            raise ResourceError(f"dense route limited to dimension {DENSE_LIMIT}")
        w, v = np.linalg.eigh(ham.toarray())
        c0 = v.conj().T @ state.amplitudes
        amps = (v @ (np.exp(-1j * np.outer(w, z)) * c0[:, None])).T
        intens = np.abs(amps) ** 2
    else:
        radius = ham.spectral_bound()
        intens = np.empty((z.size, ham.dimension))
        psi = state.amplitudes
        prev = 0.0
        for n, zn in enumerate(z):
            psi = chebyshev_propagate(ham.matrix, psi, zn - prev, radius, tol)
            prev = zn
            intens[n] = np.abs(psi) ** 2
        drift = np.abs(intens.sum(axis=1) - state.norm ** 2).max()
        if not drift < 2 * NORM_TOL:
            raise PropagationError(f"norm drift {drift:.3e} along trace")
    return EvolutionTrace(z, intens, ham.site_order, ham.cols)


# --- export ----------------------------------------------------------------

TRACE_MAGIC = b"QPTRACE1"


def trace_csv_lines(trace: EvolutionTrace):
    yield "z_mm,site_row,site_col,intensity\n"
    rows, cols = np.divmod(trace.site_order, trace.cols)
    for zi, z in enumerate(trace.z_samples):
        for k in range(trace.site_order.size):
            yield f"{z!r},{rows[k]},{cols[k]},{trace.intensities[zi, k]!r}\n"


def write_trace_csv(trace: EvolutionTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.writelines(trace_csv_lines(trace))


def write_trace_binary(trace: EvolutionTrace, path) -> None:
    """Little-endian layout: magic ``QPTRACE1``; uint64 n_z, dimension, cols;
    float64 z[n_z]; int64 site_order[dimension]; float64 intensities[n_z, dimension]
    in row-major order."""
    with open(path, "wb") as fh:
        fh.write(TRACE_MAGIC)
        fh.write(struct.pack("<3Q", trace.z_samples.size, trace.site_order.size, trace.cols))
        fh.write(np.asarray(trace.z_samples, "<f8").tobytes())
        fh.write(np.asarray(trace.site_order, "<i8").tobytes())
        fh.write(np.ascontiguousarray(trace.intensities, "<f8").tobytes())


def read_trace_binary(path) -> EvolutionTrace:
    with open(path, "rb") as fh:
        if fh.read(8) != TRACE_MAGIC:
            raise DomainError(f"{path}: not a trace file")
        nz, dim, cols = struct.unpack("<3Q", fh.read(24))
        z = np.frombuffer(fh.read(8 * nz), "<f8")
        order = np.frombuffer(fh.read(8 * dim), "<i8")
        intens = np.frombuffer(fh.read(8 * nz * dim), "<f8").reshape(nz, dim)
    return EvolutionTrace(z.copy(), intens.copy(), order.copy(), int(cols))

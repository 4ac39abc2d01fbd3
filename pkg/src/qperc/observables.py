"""Localization and percolation metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lattice import Lattice

DEFAULT_PORTION = 0.10


@dataclass(frozen=True)
class IprSample:
    value: float
    P: float
    z: float
    seed: int = 0


@dataclass(frozen=True)
class ExponentFit:
    nu: float
    intercept: float
    fit_window: tuple[float, float]
    residual: float


def ipr(intensity) -> float:
    """Inverse participation ratio sum(I^2) / (sum I)^2 of an intensity vector."""
    x = np.asarray(intensity, dtype=float).ravel()
    if x.size == 0 or np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("intensity must be a non-empty, finite, non-negative vector")
    total = x.sum()
    if total == 0.0:
        raise DomainError("intensity vector is identically zero")
    x = x / total
    return float(x @ x)


def effective_width(samples) -> float:
    """<IPR>^(-1/2) over a disorder ensemble sharing one (P, z)."""
    samples = list(samples)
    if not samples:
        raise DomainError("no IPR samples")
    keys = {(s.P, s.z) for s in samples}
    if len(keys) > 1:
        raise DomainError(f"samples mix several (P, z) points: {sorted(keys)}")
    return width_from_mean_ipr(float(np.mean([s.value for s in samples])))


def width_from_mean_ipr(mean_ipr):
    return np.asarray(mean_ipr, dtype=float) ** -0.5 if np.ndim(mean_ipr) else float(mean_ipr) ** -0.5


def ipr_statistics(samples) -> dict:
    values = np.array([getattr(s, "value", s) for s in samples], dtype=float)
    if values.size < 2:
        raise DomainError("need at least two samples")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    return {"mean": mean, "std": std, "ratio": std / mean}


def bound_mask(lattice: Lattice, bound_side: int) -> np.ndarray:
    """Boolean (rows, cols) mask of sites outside the square index bound.

    The bound holds rows ``r0 - side//2 .. r0 + side - side//2 - 1`` (and the
    same for columns) around the injection site, i.e. exactly side x side
    index positions.
    """
    side = int(bound_side)
    if side < 1:
        raise DomainError("bound side must be positive")
    spec = lattice.spec
    r0, c0 = lattice.injection
    lo_r, lo_c = r0 - side // 2, c0 - side // 2
    if side > spec.rows or side > spec.cols or lo_r < 0 or lo_c < 0 \
            or lo_r + side > spec.rows or lo_c + side > spec.cols:
        raise DomainError(f"{side}x{side} bound does not fit the {spec.rows}x{spec.cols} lattice")
    outside = np.ones((spec.rows, spec.cols), dtype=bool)
    outside[lo_r:lo_r + side, lo_c:lo_c + side] = False
    return outside


def bound_fraction(lattice: Lattice, intensity, bound_side: int, site_order=None) -> float:
    """Fraction of the intensity that lies outside the square bound.

    ``intensity`` is either a full (rows, cols) / flat grid, or a vector over
    ``site_order`` (flat lattice indices, e.g. a Hamiltonian basis).
    """
    outside = bound_mask(lattice, bound_side).ravel()
    x = np.asarray(intensity, dtype=float).ravel()
    if site_order is not None:
        outside = outside[np.asarray(site_order)]
    if x.size != outside.size:
        raise DomainError("intensity does not match lattice sites")
    total = x.sum()
    if not total > 0:
        raise DomainError("intensity has no weight")
    return float(min(max(x[outside].sum() / total, 0.0), 1.0))


def percolation_event(fraction: float, threshold: float = DEFAULT_PORTION) -> bool:
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"fraction must lie in [0, 1], got {fraction}")
    return bool(fraction >= threshold)


def fit_exponent(z_values, widths, window=None) -> ExponentFit:
    """Least-squares slope of log(width) against log(z).

    The default window is [z_max / 2, z_max].
    """
    z = np.asarray(z_values, dtype=float).ravel()
    w = np.asarray(widths, dtype=float).ravel()
    if z.shape != w.shape:
        raise DomainError("z_values and widths differ in length")
    if window is None:
        window = (z.max() / 2.0, z.max())
    lo, hi = float(window[0]), float(window[1])
    sel = (z >= lo) & (z <= hi)
    zs, ws = z[sel], w[sel]
    if np.any(zs <= 0) or np.any(ws <= 0):
        raise DomainError("fit window contains non-positive z or width")
    if zs.size < 3:
        raise DomainError(f"need >= 3 points in window [{lo}, {hi}], got {zs.size}")
    lx, ly = np.log(zs), np.log(ws)
    A = np.column_stack([lx, np.ones_like(lx)])
    (nu, b), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = math.sqrt(float(np.mean((ly - (nu * lx + b)) ** 2)))
    return ExponentFit(float(nu), float(b), (lo, hi), resid)
